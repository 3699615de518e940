//! Full-batch (projected) gradient descent and DP-SGD.
//!
//! DP-SGD samples one example per step (uniformly, with replacement), clips
//! its gradient to norm `L`, steps with `eta_t = 1/(m t)`, and adds
//! `N(0, (eta_t * sigma * mult_t)^2)` noise per coordinate, where `mult_t`
//! comes from an optional [`NoiseSchedule`].

use crate::loss::{BlockLoss, DataPoint, ParamPoint};
use crate::rng::RngStream;
use crate::vector::{dist_sq, norm, norm_sq, project_ball_in_place, Annulus, RealVector};
use crate::{Error, Result};

/// Per-block projection applied after every step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Projection {
    pub ball1: Option<f64>,
    pub ball2: Option<f64>,
    pub annulus1: Option<Annulus>,
}

impl Projection {
    pub fn balls(radius1: f64, radius2: f64) -> Self {
        Projection {
            ball1: Some(radius1),
            ball2: Some(radius2),
            annulus1: None,
        }
    }

    fn apply(&self, t1: &mut [f64], t2: &mut [f64]) {
        if let Some(r) = self.ball1 {
            project_ball_in_place(t1, r);
        }
        if let Some(a) = self.annulus1 {
            a.project_in_place(t1);
        }
        if let Some(r) = self.ball2 {
            project_ball_in_place(t2, r);
        }
    }

    /// Whether `(t1, t2)` lies in the constraint set, with a relative
    /// rounding allowance.
    pub fn contains(&self, t1: &[f64], t2: &[f64]) -> bool {
        let ok = |n: f64, r: f64| n <= r * (1.0 + 1e-12);
        self.ball1.is_none_or(|r| ok(norm(t1), r))
            && self.ball2.is_none_or(|r| ok(norm(t2), r))
            && self.annulus1.is_none_or(|a| a.distance(t1) <= a.outer() * 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GdConfig {
    pub steps: usize,
    pub step_size: f64,
    pub projection: Option<Projection>,
}

impl GdConfig {
    pub fn new(steps: usize, step_size: f64) -> Self {
        GdConfig {
            steps,
            step_size,
            projection: None,
        }
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = Some(projection);
        self
    }
}

/// Optimizer output and the bookkeeping used by the locality checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Thinned iterates (only when recording was requested).
    pub iterates: Vec<ParamPoint>,
    pub final_point: ParamPoint,
    /// `max_t |theta1_t - theta1_0|`.
    pub max_block1_displacement: f64,
    /// Per step: whether the iterate was outside the containment ball.
    pub left_ball_flags: Vec<bool>,
    /// Largest clipped per-example gradient norm seen.
    pub max_clipped_grad_norm: f64,
    /// Steps whose post-projection iterate was outside the constraint set.
    pub constraint_violations: usize,
    pub steps: usize,
}

impl Trajectory {
    pub fn left_ball(&self) -> bool {
        self.left_ball_flags.iter().any(|&f| f)
    }
}

struct Tracker {
    origin1: Vec<f64>,
    max_disp_sq: f64,
    record_every: Option<usize>,
    iterates: Vec<ParamPoint>,
    containment: Option<Containment>,
    left: Vec<bool>,
    projection: Option<Projection>,
    violations: usize,
}

impl Tracker {
    fn new(
        theta0: &ParamPoint,
        record_every: Option<usize>,
        containment: Option<Containment>,
        projection: Option<Projection>,
    ) -> Self {
        let mut iterates = Vec::new();
        if record_every.is_some() {
            iterates.push(theta0.clone());
        }
        Tracker {
            origin1: theta0.theta1.as_slice().to_vec(),
            max_disp_sq: 0.0,
            record_every,
            iterates,
            containment,
            left: Vec::new(),
            projection,
            violations: 0,
        }
    }

    fn observe(&mut self, step: usize, t1: &[f64], t2: &[f64]) -> Result<()> {
        self.max_disp_sq = self.max_disp_sq.max(dist_sq(t1, &self.origin1));
        if let Some(c) = &self.containment {
            let d = dist_sq(t1, c.center.theta1.as_slice()) + dist_sq(t2, c.center.theta2.as_slice());
            self.left.push(d.sqrt() > c.radius);
        }
        if let Some(p) = &self.projection {
            if !p.contains(t1, t2) {
                self.violations += 1;
            }
        }
        if let Some(k) = self.record_every {
            if k > 0 && step.is_multiple_of(k) {
                self.iterates.push(point(t1, t2)?);
            }
        }
        Ok(())
    }

    fn finish(self, final_point: ParamPoint, max_clip: f64, steps: usize) -> Trajectory {
        Trajectory {
            iterates: self.iterates,
            final_point,
            max_block1_displacement: self.max_disp_sq.sqrt(),
            left_ball_flags: self.left,
            max_clipped_grad_norm: max_clip,
            constraint_violations: self.violations,
            steps,
        }
    }
}

fn point(t1: &[f64], t2: &[f64]) -> Result<ParamPoint> {
    Ok(ParamPoint::new(
        RealVector::new(t1.to_vec())?,
        RealVector::new(t2.to_vec())?,
    ))
}

fn check_data<L: BlockLoss + ?Sized>(loss: &L, data: &[DataPoint], theta0: &ParamPoint) -> Result<()> {
    let (a, b) = loss.dims();
    theta0.check_dims(a, b)?;
    for d in data {
        d.d1.check_dim(a)?;
        d.d2.check_dim(b)?;
    }
    Ok(())
}

/// Full-batch gradient descent on the empirical loss of `data`.
pub fn run_gd<L: BlockLoss + ?Sized>(
    loss: &L,
    data: &[DataPoint],
    config: &GdConfig,
    theta0: &ParamPoint,
) -> Result<Trajectory> {
    if data.is_empty() {
        return Err(Error::param("data", "must be nonempty"));
    }
    if !(config.step_size > 0.0) {
        return Err(Error::param("step_size", "must be positive"));
    }
    check_data(loss, data, theta0)?;
    let (a, b) = loss.dims();
    let mut t1 = theta0.theta1.as_slice().to_vec();
    let mut t2 = theta0.theta2.as_slice().to_vec();
    let (mut g1, mut g2) = (vec![0.0; a], vec![0.0; b]);
    let (mut s1, mut s2) = (vec![0.0; a], vec![0.0; b]);
    let mut tracker = Tracker::new(theta0, None, None, config.projection);
    let n = data.len() as f64;
    for step in 1..=config.steps {
        s1.fill(0.0);
        s2.fill(0.0);
        for d in data {
            loss.grad_slices(&t1, &t2, d.d1.as_slice(), d.d2.as_slice(), &mut g1, &mut g2);
            s1.iter_mut().zip(&g1).for_each(|(s, g)| *s += g);
            s2.iter_mut().zip(&g2).for_each(|(s, g)| *s += g);
        }
        let eta = config.step_size;
        t1.iter_mut().zip(&s1).for_each(|(t, s)| *t -= eta * (s / n));
        t2.iter_mut().zip(&s2).for_each(|(t, s)| *t -= eta * (s / n));
        if let Some(p) = &config.projection {
            p.apply(&mut t1, &mut t2);
        }
        tracker.observe(step, &t1, &t2)?;
    }
    let final_point = point(&t1, &t2).map_err(|_| Error::NonFinite("gradient descent iterate"))?;
    Ok(tracker.finish(final_point, 0.0, config.steps))
}

/// Piecewise-constant noise multipliers over the DP-SGD steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    phases: Vec<(usize, f64)>,
}

impl NoiseSchedule {
    pub fn new(phases: Vec<(usize, f64)>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::param("schedule", "needs at least one phase"));
        }
        for &(len, mult) in &phases {
            if len == 0 {
                return Err(Error::param("schedule", "phase lengths must be positive"));
            }
            if !(mult > 0.0) || !mult.is_finite() {
                return Err(Error::param(
                    "schedule",
                    format!("multiplier must be positive, got {mult}"),
                ));
            }
        }
        Ok(NoiseSchedule { phases })
    }

    pub fn uniform(steps: usize) -> Self {
        NoiseSchedule {
            phases: vec![(steps, 1.0)],
        }
    }

    /// `first_len` steps at multiplier `low`, the rest at the multiplier
    /// that keeps the Gaussian privacy cost `sum len / mult^2` equal to that
    /// of the uniform schedule.
    pub fn front_loaded(steps: usize, first_len: usize, low: f64) -> Result<Self> {
        let high = balancing_multiplier(steps, first_len, low)?;
        NoiseSchedule::new(vec![(first_len, low), (steps - first_len, high)])
    }

    /// [`Self::front_loaded`] with the phases reversed.
    pub fn back_loaded(steps: usize, last_len: usize, low: f64) -> Result<Self> {
        let high = balancing_multiplier(steps, last_len, low)?;
        NoiseSchedule::new(vec![(steps - last_len, high), (last_len, low)])
    }

    pub fn phases(&self) -> &[(usize, f64)] {
        &self.phases
    }

    pub fn total_steps(&self) -> usize {
        self.phases.iter().map(|p| p.0).sum()
    }

    /// `sum len / mult^2`: composition cost of the Gaussian steps relative to
    /// multiplier 1.
    pub fn privacy_cost(&self) -> f64 {
        self.phases.iter().map(|&(l, m)| l as f64 / (m * m)).sum()
    }

    /// `sum len * mult^2 * sigma^2 * dim`: expected `sum_t |xi_t|^2 / eta_t^2`.
    pub fn noise_energy(&self, sigma: f64, dim: usize) -> f64 {
        self.phases
            .iter()
            .map(|&(l, m)| l as f64 * m * m * sigma * sigma * dim as f64)
            .sum()
    }

    /// Multiplier at 1-based step `t`.
    pub fn multiplier_at(&self, t: usize) -> f64 {
        let mut end = 0;
        for &(len, m) in &self.phases {
            end += len;
            if t <= end {
                return m;
            }
        }
        self.phases.last().map_or(1.0, |p| p.1)
    }

    pub fn same_budget(&self, other: &NoiseSchedule) -> bool {
        let (a, b) = (self.privacy_cost(), other.privacy_cost());
        (a - b).abs() <= 1e-9 * a.max(b)
    }
}

fn balancing_multiplier(steps: usize, len: usize, low: f64) -> Result<f64> {
    if len == 0 || len >= steps {
        return Err(Error::param(
            "schedule",
            "low-noise phase must be shorter than the run",
        ));
    }
    let rest = (steps - len) as f64;
    let denom = steps as f64 - len as f64 / (low * low);
    if !(denom > 0.0) {
        return Err(Error::param("schedule", "low multiplier too small to balance"));
    }
    Ok((rest / denom).sqrt())
}

/// `sigma_center` reference point and radius for per-step containment flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Containment {
    pub center: ParamPoint,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpSgdConfig {
    pub epsilon: f64,
    pub delta: f64,
    /// Private sample count.
    pub n: usize,
    /// Strong-convexity scale `m` of the active quadratic.
    pub strong_convexity: f64,
    /// Clip norm `L`.
    pub clip_norm: f64,
    /// Iterations `T`.
    pub steps: usize,
    /// Per-step noise standard deviation before the step-size factor.
    pub sigma: f64,
    pub c_sigma: f64,
    pub projection: Option<Projection>,
    pub schedule: Option<NoiseSchedule>,
    /// Average the final `fraction` of iterates instead of returning the
    /// last one.
    pub suffix_average: Option<f64>,
    /// Use the mean clipped gradient over all examples instead of sampling.
    pub full_batch: bool,
    pub containment: Option<Containment>,
    pub record_every: Option<usize>,
}

impl DpSgdConfig {
    /// `T = n^2`, `c_sigma = 1`, sigma from [`calibrate_sigma`].
    pub fn calibrated(
        epsilon: f64,
        delta: f64,
        n: usize,
        strong_convexity: f64,
        clip_norm: f64,
    ) -> Result<Self> {
        let sigma = calibrate_sigma(epsilon, delta, clip_norm, n, 1.0)?;
        Ok(DpSgdConfig {
            epsilon,
            delta,
            n,
            strong_convexity,
            clip_norm,
            steps: n * n,
            sigma,
            c_sigma: 1.0,
            projection: None,
            schedule: None,
            suffix_average: None,
            full_batch: false,
            containment: None,
            record_every: None,
        })
    }

    pub fn with_c_sigma(mut self, c_sigma: f64) -> Result<Self> {
        self.sigma = calibrate_sigma(self.epsilon, self.delta, self.clip_norm, self.n, c_sigma)?;
        self.c_sigma = c_sigma;
        Ok(self)
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_projection(mut self, projection: Projection) -> Self {
        self.projection = Some(projection);
        self
    }

    pub fn with_schedule(mut self, schedule: NoiseSchedule) -> Self {
        self.schedule = Some(schedule);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::param("dp.steps", "T must be at least 1"));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param("dp.sigma", "must be finite and >= 0"));
        }
        if !(self.strong_convexity > 0.0) {
            return Err(Error::param("dp.m", "must be positive"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::param("dp.clip", "must be positive"));
        }
        if let Some(s) = &self.schedule {
            if s.total_steps() != self.steps {
                return Err(Error::param(
                    "schedule",
                    format!("phase lengths sum to {} but T = {}", s.total_steps(), self.steps),
                ));
            }
        }
        if let Some(f) = self.suffix_average {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::param("dp.suffix_average", "fraction must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// `sigma = c_sigma * L * sqrt(ln(1/delta)) / (epsilon * n)`.
pub fn calibrate_sigma(epsilon: f64, delta: f64, clip_norm: f64, n: usize, c_sigma: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if !(epsilon > 0.0) || n == 0 || !(c_sigma > 0.0) || !(clip_norm >= 0.0) {
        return Err(Error::param(
            "epsilon",
            "epsilon, n, and c_sigma must be positive",
        ));
    }
    Ok(c_sigma * clip_norm * (1.0 / delta).ln().sqrt() / (epsilon * n as f64))
}

/// Rescales `(g1, g2)` to norm at most `clip`; returns the applied factor.
pub fn clip_gradient(g1: &mut [f64], g2: &mut [f64], clip: f64) -> f64 {
    let n = (norm_sq(g1) + norm_sq(g2)).sqrt();
    if n > clip {
        let s = clip / n;
        g1.iter_mut().for_each(|x| *x *= s);
        g2.iter_mut().for_each(|x| *x *= s);
        s
    } else {
        1.0
    }
}

/// DP-SGD on `data` from `theta0`.
pub fn run_dpsgd<L: BlockLoss + ?Sized>(
    loss: &L,
    data: &[DataPoint],
    config: &DpSgdConfig,
    theta0: &ParamPoint,
    stream: &mut RngStream,
) -> Result<Trajectory> {
    config.validate()?;
    if data.len() != config.n {
        return Err(Error::param(
            "dp.n",
            format!("config expects {} examples, got {}", config.n, data.len()),
        ));
    }
    check_data(loss, data, theta0)?;
    let (a, b) = loss.dims();
    let mut t1 = theta0.theta1.as_slice().to_vec();
    let mut t2 = theta0.theta2.as_slice().to_vec();
    let (mut g1, mut g2) = (vec![0.0; a], vec![0.0; b]);
    let (mut s1, mut s2) = (vec![0.0; a], vec![0.0; b]);
    let mut tracker = Tracker::new(
        theta0,
        config.record_every,
        config.containment.clone(),
        config.projection,
    );

    let steps = config.steps;
    let avg_start = config
        .suffix_average
        .map(|f| steps - ((f * steps as f64).ceil() as usize).clamp(1, steps) + 1);
    let (mut avg1, mut avg2, mut avg_count) = (vec![0.0; a], vec![0.0; b], 0usize);

    // phase cursor: (remaining steps in phase, multiplier, next phase index)
    let phases: Vec<(usize, f64)> = config
        .schedule
        .as_ref()
        .map_or_else(|| vec![(steps, 1.0)], |s| s.phases().to_vec());
    let (mut phase_idx, mut phase_left) = (0usize, phases[0].0);

    let m = config.strong_convexity;
    let clip = config.clip_norm;
    let mut max_clip = 0.0f64;
    for t in 1..=steps {
        if phase_left == 0 {
            phase_idx += 1;
            phase_left = phases[phase_idx].0;
        }
        phase_left -= 1;
        let mult = phases[phase_idx].1;

        if config.full_batch {
            s1.fill(0.0);
            s2.fill(0.0);
            for d in data {
                loss.grad_slices(&t1, &t2, d.d1.as_slice(), d.d2.as_slice(), &mut g1, &mut g2);
                clip_gradient(&mut g1, &mut g2, clip);
                max_clip = max_clip.max((norm_sq(&g1) + norm_sq(&g2)).sqrt());
                s1.iter_mut().zip(&g1).for_each(|(s, g)| *s += g);
                s2.iter_mut().zip(&g2).for_each(|(s, g)| *s += g);
            }
            let inv = 1.0 / data.len() as f64;
            g1.iter_mut().zip(&s1).for_each(|(g, s)| *g = s * inv);
            g2.iter_mut().zip(&s2).for_each(|(g, s)| *g = s * inv);
        } else {
            let d = &data[stream.index(data.len())];
            loss.grad_slices(&t1, &t2, d.d1.as_slice(), d.d2.as_slice(), &mut g1, &mut g2);
            clip_gradient(&mut g1, &mut g2, clip);
            max_clip = max_clip.max((norm_sq(&g1) + norm_sq(&g2)).sqrt());
        }

        let eta = 1.0 / (m * t as f64);
        let noise_sd = eta * config.sigma * mult;
        if noise_sd > 0.0 {
            for (x, g) in t1.iter_mut().zip(&g1) {
                *x += -eta * g + noise_sd * stream.standard_normal();
            }
            for (x, g) in t2.iter_mut().zip(&g2) {
                *x += -eta * g + noise_sd * stream.standard_normal();
            }
        } else {
            t1.iter_mut().zip(&g1).for_each(|(x, g)| *x -= eta * g);
            t2.iter_mut().zip(&g2).for_each(|(x, g)| *x -= eta * g);
        }
        if let Some(p) = &config.projection {
            p.apply(&mut t1, &mut t2);
        }
        tracker.observe(t, &t1, &t2)?;

        if let Some(start) = avg_start {
            if t >= start {
                avg1.iter_mut().zip(&t1).for_each(|(s, x)| *s += x);
                avg2.iter_mut().zip(&t2).for_each(|(s, x)| *s += x);
                avg_count += 1;
            }
        }
    }
    if avg_count > 0 {
        let inv = 1.0 / avg_count as f64;
        t1 = avg1.iter().map(|s| s * inv).collect();
        t2 = avg2.iter().map(|s| s * inv).collect();
    }
    let final_point = point(&t1, &t2).map_err(|_| Error::NonFinite("DP-SGD iterate"))?;
    debug_assert!(max_clip <= clip * (1.0 + 1e-12));
    Ok(tracker.finish(final_point, max_clip, steps))
}

/// Rough epsilon for `T` steps of the Gaussian mechanism with noise
/// multiplier `sigma_over_L`, each step touching one of `n` examples.
///
/// Per step: `eps0 = sqrt(2 ln(1.25/delta0)) / z` with `delta0 = delta/(2T)`,
/// amplified by sampling rate `1/n`, then the smaller of basic and advanced
/// composition (with the remaining `delta/2`). A sanity indicator only; it
/// is not a certified bound.
pub fn account_epsilon(sigma_over_l: f64, steps: usize, n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", format!("must lie in (0, 1), got {delta}")));
    }
    if n == 0 || !(sigma_over_l >= 0.0) {
        return Err(Error::param("sigma_over_L", "inputs must be positive"));
    }
    if steps == 0 || sigma_over_l == f64::INFINITY {
        return Ok(0.0);
    }
    if sigma_over_l == 0.0 {
        return Ok(f64::INFINITY);
    }
    let t = steps as f64;
    let delta0 = delta / (2.0 * t);
    let eps0 = (2.0 * (1.25 / delta0).ln()).sqrt() / sigma_over_l;
    let q = 1.0 / n as f64;
    let eps_step = if eps0 < 700.0 {
        (q * eps0.exp_m1()).ln_1p()
    } else {
        eps0 + q.ln()
    };
    let basic = t * eps_step;
    let advanced = if eps_step < 50.0 {
        eps_step * (2.0 * t * (2.0 / delta).ln()).sqrt() + t * eps_step * eps_step.exp_m1()
    } else {
        f64::INFINITY
    };
    Ok(basic.min(advanced))
}

/// `(m/2) |theta - d|^2` on a single block: the isolated strongly convex
/// quadratic used for containment checks. The second block is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsotropicQuadratic {
    pub dim: usize,
    pub curvature: f64,
}

impl BlockLoss for IsotropicQuadratic {
    fn dims(&self) -> (usize, usize) {
        (self.dim, 0)
    }

    fn value_slices(&self, t1: &[f64], _t2: &[f64], d1: &[f64], _d2: &[f64]) -> f64 {
        0.5 * self.curvature * dist_sq(t1, d1)
    }

    fn grad_slices(&self, t1: &[f64], _t2: &[f64], d1: &[f64], _d2: &[f64], g1: &mut [f64], _g2: &mut [f64]) {
        for ((g, a), b) in g1.iter_mut().zip(t1).zip(d1) {
            *g = self.curvature * (a - b);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::{BasinLossSpec, QuadraticLossSpec};
    use crate::stream;

    fn rv(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    fn empty() -> RealVector {
        RealVector::zeros(0)
    }

    #[test]
    fn sigma_examples() {
        let e = std::f64::consts::E;
        assert!((calibrate_sigma(1.0, 1.0 / e, 1.0, 1, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let a = calibrate_sigma(1.0, 1e-4, 3.0, 100, 1.0).unwrap();
        let b = calibrate_sigma(1.0, 1e-4, 3.0, 200, 1.0).unwrap();
        assert!((a - 2.0 * b).abs() < 1e-15);
        assert_eq!(calibrate_sigma(1.0, 1e-4, 0.0, 10, 1.0).unwrap(), 0.0);
        assert!(calibrate_sigma(1.0, 1.0, 1.0, 10, 1.0).is_err());
        assert!(calibrate_sigma(1.0, 0.0, 1.0, 10, 1.0).is_err());
    }

    #[test]
    fn accountant_limits_and_monotonicity() {
        assert_eq!(account_epsilon(1.0, 0, 100, 1e-5).unwrap(), 0.0);
        assert!(account_epsilon(1e9, 1000, 100, 1e-5).unwrap() < 1e-6);
        let mut prev = 0.0;
        for t in [1, 2, 5, 10, 100, 1000, 10_000, 1_000_000] {
            let e = account_epsilon(1.5, t, 512, 1e-4).unwrap();
            assert!(e >= prev, "T={t}: {e} < {prev}");
            prev = e;
        }
        assert!(account_epsilon(1.0, 10, 10, 1.0).is_err());
    }

    #[test]
    fn zero_steps_returns_start() {
        let q = QuadraticLossSpec::new(1, 2, 1, 1.0).unwrap();
        let th = ParamPoint::new(rv(&[0.3, 0.1]), rv(&[0.2]));
        let data = vec![DataPoint::new(rv(&[0.0, 0.0]), rv(&[0.0]))];
        let tr = run_gd(&q, &data, &GdConfig::new(0, 0.5), &th).unwrap();
        assert_eq!(tr.final_point, th);
        assert!(run_gd(&q, &[], &GdConfig::new(1, 0.5), &th).is_err());
    }

    #[test]
    fn gd_contracts_on_quadratic() {
        let q = IsotropicQuadratic {
            dim: 3,
            curvature: 1.0,
        };
        let target = rv(&[0.2, -0.4, 0.1]);
        let data = vec![DataPoint::new(target.clone(), empty())];
        let mut th = ParamPoint::new(rv(&[1.0, 1.0, 1.0]), empty());
        let eta = 0.3;
        for _ in 0..5 {
            let before = th.theta1.distance(&target).unwrap();
            th = run_gd(&q, &data, &GdConfig::new(1, eta), &th)
                .unwrap()
                .final_point;
            let after = th.theta1.distance(&target).unwrap();
            assert!((after - (1.0 - eta) * before).abs() < 1e-14);
        }
    }

    #[test]
    fn one_gd_step_from_origin_lands_on_mean() {
        let spec = BasinLossSpec::toy();
        let data: Vec<DataPoint> = [0.45, 0.52, 0.61]
            .iter()
            .map(|&x| DataPoint::new(rv(&[x]), rv(&[0.004])))
            .collect();
        let tr = run_gd(&spec, &data, &GdConfig::new(1, 1.0), &ParamPoint::origin(1, 1)).unwrap();
        assert_eq!(tr.final_point.theta2.as_slice(), &[0.0]);
        let mean = (0.45 + 0.52 + 0.61) / 3.0;
        assert!((tr.final_point.theta1[0] - mean).abs() < 1e-15);
    }

    #[test]
    fn noiseless_dpsgd_contracts_like_one_over_t() {
        // eta_t = 1/(m t) on (m/2)|x - d|^2: after T steps the distance is
        // prod (1 - 1/t) = 0 from t = 1 on, so start at step 2 via a point
        // mass and check the exact product instead.
        let m = 4.0;
        let q = IsotropicQuadratic {
            dim: 2,
            curvature: m / 2.0,
        };
        let data = vec![DataPoint::new(rv(&[0.0, 0.0]), empty())];
        let th0 = ParamPoint::new(rv(&[1.0, -2.0]), empty());
        let cfg = DpSgdConfig::calibrated(1.0, 1e-5, 1, m, 1e9)
            .unwrap()
            .with_sigma(0.0)
            .with_steps(50);
        let tr = run_dpsgd(&q, &data, &cfg, &th0, &mut stream!(0, "dp")).unwrap();
        // each step multiplies by (1 - 1/(2t)); closed-form product
        let factor: f64 = (1..=50).map(|t| 1.0 - 0.5 / t as f64).product();
        let d = tr.final_point.theta1.norm();
        assert!((d - factor * 5f64.sqrt()).abs() < 1e-12, "{d}");
        assert!(factor < 2.0 / (50f64).sqrt());
    }

    #[test]
    fn clipping_preserves_direction() {
        // every true gradient here has norm >= 2; clip at 0.5
        let q = IsotropicQuadratic {
            dim: 2,
            curvature: 1.0,
        };
        let data = vec![
            DataPoint::new(rv(&[3.0, 0.0]), empty()),
            DataPoint::new(rv(&[0.0, -4.0]), empty()),
        ];
        let th0 = ParamPoint::new(rv(&[0.0, 0.0]), empty());
        let cfg = DpSgdConfig::calibrated(1.0, 1e-5, 2, 1.0, 0.5)
            .unwrap()
            .with_sigma(0.0)
            .with_steps(1);
        for seed in 0..8 {
            let tr = run_dpsgd(&q, &data, &cfg, &th0, &mut stream!(seed, "clip")).unwrap();
            let step = &tr.final_point.theta1;
            assert!((step.norm() - 0.5).abs() < 1e-15);
            let along_x = step[1] == 0.0 && step[0] > 0.0;
            let along_y = step[0] == 0.0 && step[1] < 0.0;
            assert!(along_x || along_y);
            assert!(tr.max_clipped_grad_norm <= 0.5 + 1e-15);
        }
        let mut g1 = vec![3.0, 4.0];
        let mut g2 = vec![];
        assert!((clip_gradient(&mut g1, &mut g2, 1.0) - 0.2).abs() < 1e-15);
        assert!((g1[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn dpsgd_is_deterministic_and_checks_n() {
        let spec = BasinLossSpec::toy();
        let data: Vec<DataPoint> = (0..4)
            .map(|i| DataPoint::new(rv(&[0.4 + 0.05 * i as f64]), rv(&[0.001 * i as f64])))
            .collect();
        let cfg =
            DpSgdConfig::calibrated(1.0, 1e-4, 4, spec.strong_convexity(), spec.default_clip_norm()).unwrap();
        let th0 = ParamPoint::new(rv(&[0.5]), rv(&[0.0]));
        let a = run_dpsgd(&spec, &data, &cfg, &th0, &mut stream!(3, "x")).unwrap();
        let b = run_dpsgd(&spec, &data, &cfg, &th0, &mut stream!(3, "x")).unwrap();
        assert_eq!(a, b);
        assert!(run_dpsgd(&spec, &data[..3], &cfg, &th0, &mut stream!(3, "x")).is_err());
    }

    #[test]
    fn noiseless_full_batch_decreases_empirical_loss() {
        let q = QuadraticLossSpec::new(2, 3, 2, 0.1).unwrap();
        let mut s = stream!(4, "fb");
        let data: Vec<DataPoint> = (0..6)
            .map(|_| {
                DataPoint::new(
                    crate::rng::gaussian_vector(&mut s, 3, 0.3).unwrap(),
                    crate::rng::gaussian_vector(&mut s, 2, 0.03).unwrap(),
                )
            })
            .collect();
        let emp = |th: &ParamPoint| data.iter().map(|d| q.value(th, d).unwrap()).sum::<f64>() / 6.0;
        let mut cfg = DpSgdConfig::calibrated(1.0, 1e-4, 6, 2.0 / 0.01, 1e9)
            .unwrap()
            .with_sigma(0.0)
            .with_steps(30);
        cfg.full_batch = true;
        cfg.record_every = Some(1);
        let th0 = ParamPoint::new(rv(&[1.0, 1.0, 1.0]), rv(&[0.2, -0.2]));
        let tr = run_dpsgd(&q, &data, &cfg, &th0, &mut s).unwrap();
        let losses: Vec<f64> = tr.iterates.iter().map(emp).collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn projection_keeps_iterates_feasible() {
        let q = QuadraticLossSpec::new(1, 2, 2, 0.05).unwrap();
        let data = vec![DataPoint::new(rv(&[2.0, 0.0]), rv(&[0.0, 0.3]))];
        let proj = Projection::balls(1.0, 0.05);
        let cfg = DpSgdConfig::calibrated(1.0, 1e-4, 1, 1.0, 1e9)
            .unwrap()
            .with_sigma(0.5)
            .with_steps(200)
            .with_projection(proj);
        let mut cfg = cfg;
        cfg.record_every = Some(1);
        let th0 = ParamPoint::origin(2, 2);
        let tr = run_dpsgd(&q, &data, &cfg, &th0, &mut stream!(5, "proj")).unwrap();
        assert_eq!(tr.constraint_violations, 0);
        for it in &tr.iterates {
            assert!(it.theta1.norm() <= 1.0 + 1e-12 && it.theta2.norm() <= 0.05 + 1e-12);
        }
    }

    #[test]
    fn schedules() {
        let front = NoiseSchedule::front_loaded(100, 10, 0.6f64.sqrt()).unwrap();
        let back = NoiseSchedule::back_loaded(100, 10, 0.6f64.sqrt()).unwrap();
        let uni = NoiseSchedule::uniform(100);
        assert!(front.same_budget(&uni) && back.same_budget(&front));
        assert!((front.noise_energy(2.0, 3) - back.noise_energy(2.0, 3)).abs() < 1e-9);
        assert_eq!(front.multiplier_at(1), 0.6f64.sqrt());
        assert_eq!(front.multiplier_at(11), front.phases()[1].1);
        assert_eq!(back.multiplier_at(91), 0.6f64.sqrt());
        assert!(NoiseSchedule::new(vec![(0, 1.0)]).is_err());

        let cfg = DpSgdConfig::calibrated(1.0, 1e-4, 4, 1.0, 1.0)
            .unwrap()
            .with_steps(50)
            .with_schedule(NoiseSchedule::uniform(40));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unit_schedule_matches_plain_run() {
        let spec = BasinLossSpec::toy();
        let data: Vec<DataPoint> = (0..5)
            .map(|i| DataPoint::new(rv(&[0.45 + 0.02 * i as f64]), rv(&[0.002])))
            .collect();
        let cfg =
            DpSgdConfig::calibrated(1.0, 1e-4, 5, spec.strong_convexity(), spec.default_clip_norm()).unwrap();
        let th0 = ParamPoint::new(rv(&[0.5]), rv(&[0.0]));
        let plain = run_dpsgd(&spec, &data, &cfg, &th0, &mut stream!(8, "u")).unwrap();
        let sched = cfg
            .clone()
            .with_schedule(NoiseSchedule::new(vec![(10, 1.0), (15, 1.0)]).unwrap());
        let with = run_dpsgd(&spec, &data, &sched, &th0, &mut stream!(8, "u")).unwrap();
        assert_eq!(plain.final_point, with.final_point);

        let front = cfg
            .clone()
            .with_schedule(NoiseSchedule::front_loaded(25, 5, 0.7).unwrap());
        let back = cfg
            .clone()
            .with_schedule(NoiseSchedule::back_loaded(25, 5, 0.7).unwrap());
        let f = run_dpsgd(&spec, &data, &front, &th0, &mut stream!(8, "u")).unwrap();
        let b = run_dpsgd(&spec, &data, &back, &th0, &mut stream!(8, "u")).unwrap();
        assert_ne!(f.final_point, b.final_point);
    }

    #[test]
    fn suffix_average() {
        let q = IsotropicQuadratic {
            dim: 1,
            curvature: 1.0,
        };
        let data = vec![DataPoint::new(rv(&[0.0]), empty())];
        let mut cfg = DpSgdConfig::calibrated(1.0, 1e-4, 1, 1.0, 1e9)
            .unwrap()
            .with_sigma(1.0)
            .with_steps(400);
        cfg.suffix_average = Some(0.5);
        let th0 = ParamPoint::new(rv(&[0.0]), empty());
        let avg = run_dpsgd(&q, &data, &cfg, &th0, &mut stream!(1, "avg")).unwrap();
        cfg.suffix_average = None;
        let last = run_dpsgd(&q, &data, &cfg, &th0, &mut stream!(1, "avg")).unwrap();
        assert_ne!(avg.final_point, last.final_point);
        cfg.suffix_average = Some(1.5);
        assert!(cfg.validate().is_err());
    }
}
