//! The gated two-block loss
//!
//! ```text
//! l((t1, t2); (d1, d2)) = l1(t1; d1) + p * q(t1) * l2(t2; d2)
//! l1 = min(|t1 - d1|^2 / 2, 9/2)
//! l2 = min(0, |t2 - d2|^2 / (2 r^2) - 9/2)
//! q  = 1 on the annulus S, 0 at distance >= R2 from S, linear in between
//! ```
//!
//! plus the constrained quadratic variant, analytic gradients, and the
//! population-loss evaluators (closed form and Monte Carlo).

use crate::distributions::TaskInstance;
use crate::rng::RngStream;
use crate::vector::{dist_sq, norm, Annulus, RealVector};
use crate::{Error, Result};

/// Clamp level shared by both blocks.
pub const CLAMP: f64 = 4.5;

/// Loss constants before validation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinLossParams {
    /// Base scale; multiplies the second block.
    pub p: usize,
    pub dim1: usize,
    pub dim2: usize,
    /// M: center radius of the basin annulus.
    pub basin_radius: f64,
    /// R1: half width of the basin annulus.
    pub basin_half_width: f64,
    /// R2: width of the gate ramp outside the basin.
    pub gate_ramp: f64,
    /// r: support radius of the second data block.
    pub radius2: f64,
}

impl BasinLossParams {
    /// Desk-scale defaults: p = 4, 256 + 4 dimensions, M = 0.5, R1 = 0.25,
    /// R2 = 0.2, r = 1e-3.
    pub fn desk() -> Self {
        Self::desk_for(4)
    }

    /// Desk scaling for an arbitrary `p`: blocks of `p^4` and `p` dimensions
    /// with the desk constants.
    pub fn desk_for(p: usize) -> Self {
        BasinLossParams {
            p,
            dim1: p.pow(4),
            dim2: p,
            basin_radius: 0.5,
            basin_half_width: 0.25,
            gate_ramp: 0.2,
            radius2: 1e-3,
        }
    }

    /// One-dimensional blocks with the constants used for the landscape
    /// pictures: p = 1, M = 0.5, R1 = 0.1, R2 = 0.2, r = 0.01.
    pub fn toy() -> Self {
        BasinLossParams {
            p: 1,
            dim1: 1,
            dim2: 1,
            basin_radius: 0.5,
            basin_half_width: 0.1,
            gate_ramp: 0.2,
            radius2: 0.01,
        }
    }

    /// Asymptotic parameterization: `dim1 = p^4`, `dim2 = p`,
    /// `M = min(1/2, sqrt(dim1) / (epsilon * p^2))`,
    /// `R1 = 1/p^2 + kappa * ln(p) / sqrt(p)`, `R2 = (M - R1) / 2`,
    /// `r = c_r / (p^{5/2} sqrt(ln(1/delta)))`.
    pub fn theorem(p: usize, epsilon: f64, delta: f64, kappa: f64, c_r: f64) -> Self {
        let pf = p as f64;
        let dim1 = p.pow(4);
        let m = (0.5f64).min((dim1 as f64).sqrt() / (epsilon * pf * pf));
        let r1 = 1.0 / (pf * pf) + kappa * pf.ln() / pf.sqrt();
        BasinLossParams {
            p,
            dim1,
            dim2: p,
            basin_radius: m,
            basin_half_width: r1,
            gate_ramp: 0.5 * (m - r1),
            radius2: c_r / (pf.powf(2.5) * (1.0 / delta).ln().sqrt()),
        }
    }
}

/// Validated loss constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasinLossSpec {
    params: BasinLossParams,
    annulus: Annulus,
}

impl TryFrom<BasinLossParams> for BasinLossSpec {
    type Error = Error;

    fn try_from(params: BasinLossParams) -> Result<Self> {
        BasinLossSpec::new(params)
    }
}

impl BasinLossSpec {
    pub fn new(params: BasinLossParams) -> Result<Self> {
        let BasinLossParams {
            p,
            dim1,
            dim2,
            basin_radius: m,
            basin_half_width: r1,
            gate_ramp: r2,
            radius2: r,
        } = params;
        if p == 0 {
            return Err(Error::param("p", "must be positive"));
        }
        if dim1 == 0 || dim2 == 0 {
            return Err(Error::param("dim", "block dimensions must be positive"));
        }
        for (name, v) in [("M", m), ("R1", r1), ("R2", r2), ("r", r)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::param(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        let annulus = Annulus::new(m, r1)?;
        if !(r2 < m - r1) {
            return Err(Error::param(
                "R2",
                format!(
                    "must be < M - R1 so that q(0) = 0 (R2 = {r2}, M - R1 = {})",
                    m - r1
                ),
            ));
        }
        if m + r1 > 1.0 {
            return Err(Error::param(
                "M",
                format!("basin must lie in the unit ball: M + R1 = {} > 1", m + r1),
            ));
        }
        Ok(BasinLossSpec { params, annulus })
    }

    pub fn desk() -> Self {
        Self::new(BasinLossParams::desk()).expect("desk defaults are valid")
    }

    pub fn toy() -> Self {
        Self::new(BasinLossParams::toy()).expect("toy constants are valid")
    }

    pub fn params(&self) -> BasinLossParams {
        self.params
    }

    pub fn p(&self) -> usize {
        self.params.p
    }

    pub fn dim1(&self) -> usize {
        self.params.dim1
    }

    pub fn dim2(&self) -> usize {
        self.params.dim2
    }

    pub fn basin_radius(&self) -> f64 {
        self.params.basin_radius
    }

    pub fn basin_half_width(&self) -> f64 {
        self.params.basin_half_width
    }

    pub fn gate_ramp(&self) -> f64 {
        self.params.gate_ramp
    }

    pub fn radius2(&self) -> f64 {
        self.params.radius2
    }

    pub fn annulus(&self) -> Annulus {
        self.annulus
    }

    /// Per-example gradient bound inside the basin: `3p/r` for block two plus
    /// `3` for block one.
    pub fn default_clip_norm(&self) -> f64 {
        3.0 * self.params.p as f64 / self.params.radius2 + 3.0
    }

    /// Curvature of the active second block, `p / r^2`.
    pub fn strong_convexity(&self) -> f64 {
        self.params.p as f64 / (self.params.radius2 * self.params.radius2)
    }

    /// Gate value and the radial coefficient `c` with `grad q = c * t1`.
    #[inline]
    fn gate_parts(&self, t1: &[f64]) -> (f64, f64) {
        let n = norm(t1);
        let dist = self.annulus.distance_for_norm(n);
        let ramp = self.params.gate_ramp;
        if dist == 0.0 {
            (1.0, 0.0)
        } else if dist >= ramp {
            (0.0, 0.0)
        } else {
            let q = 1.0 - dist / ramp;
            let c = if n < self.annulus.inner() {
                1.0 / (n * ramp)
            } else {
                -1.0 / (n * ramp)
            };
            (q, c)
        }
    }

    #[inline]
    fn ell1_slices(&self, t1: &[f64], d1: &[f64]) -> f64 {
        (0.5 * dist_sq(t1, d1)).min(CLAMP)
    }

    #[inline]
    fn ell2_slices(&self, t2: &[f64], d2: &[f64]) -> f64 {
        let r = self.params.radius2;
        (dist_sq(t2, d2) / (2.0 * r * r) - CLAMP).min(0.0)
    }
}

/// A model iterate `(theta1, theta2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamPoint {
    pub theta1: RealVector,
    pub theta2: RealVector,
}

impl ParamPoint {
    pub fn new(theta1: RealVector, theta2: RealVector) -> Self {
        ParamPoint { theta1, theta2 }
    }

    pub fn origin(dim1: usize, dim2: usize) -> Self {
        ParamPoint {
            theta1: RealVector::zeros(dim1),
            theta2: RealVector::zeros(dim2),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.theta1.dim(), self.theta2.dim())
    }

    pub fn check_dims(&self, dim1: usize, dim2: usize) -> Result<()> {
        self.theta1.check_dim(dim1)?;
        self.theta2.check_dim(dim2)
    }

    /// Euclidean distance over both blocks.
    pub fn distance(&self, other: &ParamPoint) -> Result<f64> {
        let a = self.theta1.distance(&other.theta1)?;
        let b = self.theta2.distance(&other.theta2)?;
        Ok(a.hypot(b))
    }

    /// `self + alpha * other`, blockwise.
    pub fn axpy(&self, alpha: f64, other: &ParamPoint) -> Result<ParamPoint> {
        Ok(ParamPoint {
            theta1: self.theta1.axpy(alpha, &other.theta1)?,
            theta2: self.theta2.axpy(alpha, &other.theta2)?,
        })
    }

    pub fn sub(&self, other: &ParamPoint) -> Result<ParamPoint> {
        self.axpy(-1.0, other)
    }
}

/// One example `(d1, d2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub d1: RealVector,
    pub d2: RealVector,
}

impl DataPoint {
    pub fn new(d1: RealVector, d2: RealVector) -> Self {
        DataPoint { d1, d2 }
    }
}

/// A two-block per-example loss with an analytic gradient. The optimizers
/// are generic over this.
pub trait BlockLoss: Sync {
    fn dims(&self) -> (usize, usize);

    fn value_slices(&self, t1: &[f64], t2: &[f64], d1: &[f64], d2: &[f64]) -> f64;

    /// Writes the gradient into `g1`, `g2` (overwriting).
    fn grad_slices(&self, t1: &[f64], t2: &[f64], d1: &[f64], d2: &[f64], g1: &mut [f64], g2: &mut [f64]);

    fn check(&self, theta: &ParamPoint, d: &DataPoint) -> Result<()> {
        let (a, b) = self.dims();
        theta.check_dims(a, b)?;
        d.d1.check_dim(a)?;
        d.d2.check_dim(b)
    }

    fn value(&self, theta: &ParamPoint, d: &DataPoint) -> Result<f64> {
        self.check(theta, d)?;
        Ok(self.value_slices(
            theta.theta1.as_slice(),
            theta.theta2.as_slice(),
            d.d1.as_slice(),
            d.d2.as_slice(),
        ))
    }

    fn grad(&self, theta: &ParamPoint, d: &DataPoint) -> Result<ParamPoint> {
        self.check(theta, d)?;
        let (a, b) = self.dims();
        let (mut g1, mut g2) = (vec![0.0; a], vec![0.0; b]);
        self.grad_slices(
            theta.theta1.as_slice(),
            theta.theta2.as_slice(),
            d.d1.as_slice(),
            d.d2.as_slice(),
            &mut g1,
            &mut g2,
        );
        Ok(ParamPoint::new(RealVector::new(g1)?, RealVector::new(g2)?))
    }
}

impl BlockLoss for BasinLossSpec {
    fn dims(&self) -> (usize, usize) {
        (self.params.dim1, self.params.dim2)
    }

    fn value_slices(&self, t1: &[f64], t2: &[f64], d1: &[f64], d2: &[f64]) -> f64 {
        let (q, _) = self.gate_parts(t1);
        let base = self.ell1_slices(t1, d1);
        if q == 0.0 {
            return base;
        }
        base + self.params.p as f64 * q * self.ell2_slices(t2, d2)
    }

    // Clamp boundaries and the gate kinks take the zero branch.
    fn grad_slices(&self, t1: &[f64], t2: &[f64], d1: &[f64], d2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        let p = self.params.p as f64;
        let r = self.params.radius2;
        let (q, dq) = self.gate_parts(t1);

        if 0.5 * dist_sq(t1, d1) < CLAMP {
            for ((g, a), b) in g1.iter_mut().zip(t1).zip(d1) {
                *g = a - b;
            }
        } else {
            g1.fill(0.0);
        }

        let inner = dist_sq(t2, d2) / (2.0 * r * r) - CLAMP;
        let ell2 = inner.min(0.0);
        if dq != 0.0 && ell2 != 0.0 {
            let c = p * ell2 * dq;
            for (g, a) in g1.iter_mut().zip(t1) {
                *g += c * a;
            }
        }

        if q != 0.0 && inner < 0.0 {
            let c = p * q / (r * r);
            for ((g, a), b) in g2.iter_mut().zip(t2).zip(d2) {
                *g = c * (a - b);
            }
        } else {
            g2.fill(0.0);
        }
    }
}

pub fn ell1(spec: &BasinLossSpec, theta1: &RealVector, d1: &RealVector) -> Result<f64> {
    theta1.check_dim(spec.dim1())?;
    d1.check_dim(spec.dim1())?;
    Ok(spec.ell1_slices(theta1.as_slice(), d1.as_slice()))
}

pub fn ell2(spec: &BasinLossSpec, theta2: &RealVector, d2: &RealVector) -> Result<f64> {
    theta2.check_dim(spec.dim2())?;
    d2.check_dim(spec.dim2())?;
    Ok(spec.ell2_slices(theta2.as_slice(), d2.as_slice()))
}

pub fn q_gate(spec: &BasinLossSpec, theta1: &RealVector) -> Result<f64> {
    theta1.check_dim(spec.dim1())?;
    Ok(spec.gate_parts(theta1.as_slice()).0)
}

pub fn composite_loss(spec: &BasinLossSpec, theta: &ParamPoint, d: &DataPoint) -> Result<f64> {
    spec.value(theta, d)
}

pub fn composite_grad(spec: &BasinLossSpec, theta: &ParamPoint, d: &DataPoint) -> Result<ParamPoint> {
    spec.grad(theta, d)
}

/// `1/2 |t1 - d1|^2 + p / (2 r^2) |t2 - d2|^2` over `B(0,1) x B(0,r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticLossSpec {
    p: usize,
    dim1: usize,
    dim2: usize,
    radius2: f64,
}

impl QuadraticLossSpec {
    pub fn new(p: usize, dim1: usize, dim2: usize, radius2: f64) -> Result<Self> {
        if p == 0 || dim1 == 0 || dim2 == 0 {
            return Err(Error::param("p", "p and block dimensions must be positive"));
        }
        if !(radius2 > 0.0) || !radius2.is_finite() {
            return Err(Error::param("r", format!("must be positive, got {radius2}")));
        }
        Ok(QuadraticLossSpec {
            p,
            dim1,
            dim2,
            radius2,
        })
    }

    /// Same scale, dimensions, and `r` as a basin spec.
    pub fn matching(spec: &BasinLossSpec) -> Self {
        QuadraticLossSpec {
            p: spec.p(),
            dim1: spec.dim1(),
            dim2: spec.dim2(),
            radius2: spec.radius2(),
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn radius2(&self) -> f64 {
        self.radius2
    }

    /// Constraint radii `(1, r)`.
    pub fn constraint_radii(&self) -> (f64, f64) {
        (1.0, self.radius2)
    }

    fn weight2(&self) -> f64 {
        self.p as f64 / (self.radius2 * self.radius2)
    }
}

impl BlockLoss for QuadraticLossSpec {
    fn dims(&self) -> (usize, usize) {
        (self.dim1, self.dim2)
    }

    fn value_slices(&self, t1: &[f64], t2: &[f64], d1: &[f64], d2: &[f64]) -> f64 {
        0.5 * dist_sq(t1, d1) + 0.5 * self.weight2() * dist_sq(t2, d2)
    }

    fn grad_slices(&self, t1: &[f64], t2: &[f64], d1: &[f64], d2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        for ((g, a), b) in g1.iter_mut().zip(t1).zip(d1) {
            *g = a - b;
        }
        let w = self.weight2();
        for ((g, a), b) in g2.iter_mut().zip(t2).zip(d2) {
            *g = w * (a - b);
        }
    }
}

pub fn quadratic_loss(spec: &QuadraticLossSpec, theta: &ParamPoint, d: &DataPoint) -> Result<f64> {
    spec.value(theta, d)
}

pub fn quadratic_grad(spec: &QuadraticLossSpec, theta: &ParamPoint, d: &DataPoint) -> Result<ParamPoint> {
    spec.grad(theta, d)
}

/// Population loss over the task's private distribution, in closed form.
pub trait PopulationLoss: BlockLoss {
    /// `None` outside the regime where the closed form is exact.
    fn population_closed_form(&self, task: &TaskInstance, theta: &ParamPoint) -> Result<Option<f64>>;
}

fn spreads(task: &TaskInstance) -> (f64, f64) {
    (task.private.first.spread(), task.private.second.spread())
}

impl PopulationLoss for BasinLossSpec {
    fn population_closed_form(&self, task: &TaskInstance, theta: &ParamPoint) -> Result<Option<f64>> {
        theta.check_dims(self.dim1(), self.dim2())?;
        task.check_dims(self.dim1(), self.dim2())?;
        let (value, valid) = population_loss_closed_form(self, task, theta)?;
        Ok(valid.then_some(value))
    }
}

impl PopulationLoss for QuadraticLossSpec {
    fn population_closed_form(&self, task: &TaskInstance, theta: &ParamPoint) -> Result<Option<f64>> {
        let (a, b) = self.dims();
        theta.check_dims(a, b)?;
        task.check_dims(a, b)?;
        let (s1, s2) = spreads(task);
        let e1 = dist_sq(theta.theta1.as_slice(), task.mu1.as_slice()) + s1;
        let e2 = dist_sq(theta.theta2.as_slice(), task.mu2.as_slice()) + s2;
        Ok(Some(0.5 * e1 + 0.5 * self.weight2() * e2))
    }
}

/// Closed-form population loss, exact while `|theta1| <= 2` and
/// `|theta2| <= 2r` (both clamps inactive for every supported data point).
/// Returns `(value, valid)`; when `valid` is false the value is meaningless
/// and callers must fall back to Monte Carlo.
pub fn population_loss_closed_form(
    spec: &BasinLossSpec,
    task: &TaskInstance,
    theta: &ParamPoint,
) -> Result<(f64, bool)> {
    theta.check_dims(spec.dim1(), spec.dim2())?;
    task.check_dims(spec.dim1(), spec.dim2())?;
    let r = spec.radius2();
    let t1 = theta.theta1.as_slice();
    let t2 = theta.theta2.as_slice();
    if norm(t1) > 2.0 || norm(t2) > 2.0 * r {
        return Ok((f64::NAN, false));
    }
    let (s1, s2) = spreads(task);
    let q = spec.gate_parts(t1).0;
    let first = 0.5 * (dist_sq(t1, task.mu1.as_slice()) + s1);
    let second = (dist_sq(t2, task.mu2.as_slice()) + s2) / (2.0 * r * r) - CLAMP;
    Ok((first + spec.p() as f64 * q * second, true))
}

/// Sample mean and standard error of `f(d)` over `n_mc` fresh private draws.
fn mc_mean<F>(task: &TaskInstance, n_mc: usize, stream: &mut RngStream, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(&[f64], &[f64]) -> f64,
{
    if n_mc < 2 {
        return Err(Error::param("n_mc", "must be at least 2"));
    }
    let mut d1 = vec![0.0; task.dim1];
    let mut d2 = vec![0.0; task.dim2];
    // Welford
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 0..n_mc {
        task.private.first.sample_into(stream, &mut d1);
        task.private.second.sample_into(stream, &mut d2);
        let x = f(&d1, &d2);
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (n_mc - 1) as f64;
    if !mean.is_finite() || !var.is_finite() {
        return Err(Error::NonFinite("Monte Carlo loss"));
    }
    Ok((mean, (var / n_mc as f64).sqrt()))
}

/// Monte Carlo population loss: `(estimate, standard error)`.
pub fn population_loss_mc<L: BlockLoss + ?Sized>(
    loss: &L,
    task: &TaskInstance,
    theta: &ParamPoint,
    n_mc: usize,
    stream: &mut RngStream,
) -> Result<(f64, f64)> {
    let (a, b) = loss.dims();
    theta.check_dims(a, b)?;
    task.check_dims(a, b)?;
    let (t1, t2) = (theta.theta1.as_slice(), theta.theta2.as_slice());
    mc_mean(task, n_mc, stream, |d1, d2| loss.value_slices(t1, t2, d1, d2))
}

/// Monte Carlo estimate of `L(theta) - L(theta*)` using the same draws for
/// both terms.
pub fn excess_risk_mc_paired<L: BlockLoss + ?Sized>(
    loss: &L,
    task: &TaskInstance,
    theta: &ParamPoint,
    n_mc: usize,
    stream: &mut RngStream,
) -> Result<(f64, f64)> {
    let (a, b) = loss.dims();
    theta.check_dims(a, b)?;
    task.check_dims(a, b)?;
    let star = task.theta_star();
    let (t1, t2) = (theta.theta1.as_slice(), theta.theta2.as_slice());
    let (s1, s2) = (star.theta1.as_slice(), star.theta2.as_slice());
    mc_mean(task, n_mc, stream, |d1, d2| {
        loss.value_slices(t1, t2, d1, d2) - loss.value_slices(s1, s2, d1, d2)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorKind {
    ClosedForm,
    MonteCarlo,
}

impl EvaluatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvaluatorKind::ClosedForm => "closed_form",
            EvaluatorKind::MonteCarlo => "monte_carlo",
        }
    }
}

/// Which population evaluator to use for `L(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Evaluator {
    /// Closed form when valid, Monte Carlo with `n_mc` draws otherwise.
    Auto { n_mc: usize },
    /// Always Monte Carlo.
    MonteCarlo { n_mc: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub value: f64,
    pub stderr: f64,
    pub evaluator: EvaluatorKind,
}

/// `L(theta) - L(theta*)`, with `L(theta*)` always in closed form.
pub fn excess_risk<L: PopulationLoss + ?Sized>(
    loss: &L,
    task: &TaskInstance,
    theta: &ParamPoint,
    evaluator: Evaluator,
    stream: &mut RngStream,
) -> Result<RiskEstimate> {
    let star = task.theta_star();
    let base = loss
        .population_closed_form(task, &star)?
        .ok_or(Error::NonFinite("closed form at the population minimizer"))?;
    let (value, stderr, kind) = match evaluator {
        Evaluator::Auto { n_mc } => match loss.population_closed_form(task, theta)? {
            Some(v) => (v, 0.0, EvaluatorKind::ClosedForm),
            None => {
                let (v, se) = population_loss_mc(loss, task, theta, n_mc, stream)?;
                (v, se, EvaluatorKind::MonteCarlo)
            }
        },
        Evaluator::MonteCarlo { n_mc } => {
            let (v, se) = population_loss_mc(loss, task, theta, n_mc, stream)?;
            (v, se, EvaluatorKind::MonteCarlo)
        }
    };
    let excess = value - base;
    if !excess.is_finite() {
        return Err(Error::NonFinite("excess risk"));
    }
    Ok(RiskEstimate {
        value: excess,
        stderr,
        evaluator: kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{make_task, TaskMode};
    use crate::stream;

    fn rv(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    fn pt(a: &[f64], b: &[f64]) -> ParamPoint {
        ParamPoint::new(rv(a), rv(b))
    }

    fn dp(a: &[f64], b: &[f64]) -> DataPoint {
        DataPoint::new(rv(a), rv(b))
    }

    #[test]
    fn spec_validation_names_the_violation() {
        let mut p = BasinLossParams::toy();
        p.gate_ramp = 0.4;
        let err = BasinLossSpec::new(p).unwrap_err();
        assert!(err.to_string().contains("R2"), "{err}");

        let mut p = BasinLossParams::toy();
        p.basin_half_width = 0.5;
        assert!(BasinLossSpec::new(p).unwrap_err().to_string().contains("R1"));

        let mut p = BasinLossParams::desk();
        p.basin_radius = 0.8;
        assert!(BasinLossSpec::new(p).unwrap_err().to_string().contains("M"));
    }

    #[test]
    fn theorem_params_for_p4_are_valid() {
        let spec = BasinLossSpec::new(BasinLossParams::theorem(4, 1.0, 1e-4, 0.25, 1.0)).unwrap();
        assert_eq!(spec.dim1(), 256);
        assert_eq!(spec.dim2(), 4);
        assert!(BasinLossSpec::new(BasinLossParams::theorem(1, 1.0, 1e-4, 0.25, 1.0)).is_err());
    }

    #[test]
    fn ell1_examples() {
        let s = BasinLossSpec::toy();
        assert_eq!(ell1(&s, &rv(&[0.3]), &rv(&[0.3])).unwrap(), 0.0);
        assert_eq!(ell1(&s, &rv(&[3.5]), &rv(&[0.5])).unwrap(), 4.5);
        assert_eq!(ell1(&s, &rv(&[0.0]), &rv(&[0.5])).unwrap(), 0.125);
        assert!(ell1(&s, &rv(&[0.0, 1.0]), &rv(&[0.5])).is_err());
    }

    #[test]
    fn ell2_examples() {
        let s = BasinLossSpec::toy(); // r = 0.01
        assert_eq!(ell2(&s, &rv(&[0.005]), &rv(&[0.005])).unwrap(), -4.5);
        assert!(ell2(&s, &rv(&[0.03]), &rv(&[0.0])).unwrap().abs() < 1e-12);
        assert!((ell2(&s, &rv(&[0.015]), &rv(&[0.005])).unwrap() + 4.0).abs() < 1e-12);
        assert!(ell2(&s, &rv(&[0.0, 0.0]), &rv(&[0.0])).is_err());
    }

    #[test]
    fn gate_examples() {
        let s = BasinLossSpec::toy();
        assert_eq!(q_gate(&s, &rv(&[0.0])).unwrap(), 0.0);
        assert_eq!(q_gate(&s, &rv(&[0.5])).unwrap(), 1.0);
        assert!((q_gate(&s, &rv(&[0.7])).unwrap() - 0.5).abs() < 1e-12);
        assert!((q_gate(&s, &rv(&[-0.3])).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(q_gate(&s, &rv(&[0.85])).unwrap(), 0.0);
    }

    #[test]
    fn composite_examples() {
        let s = BasinLossSpec::toy();
        let v = composite_loss(&s, &pt(&[0.5], &[0.005]), &dp(&[0.5], &[0.005])).unwrap();
        assert_eq!(v, -4.5);

        // gate zero: independent of theta2
        let a = composite_loss(&s, &pt(&[0.1], &[0.3]), &dp(&[0.5], &[0.005])).unwrap();
        let b = composite_loss(&s, &pt(&[0.1], &[-2.0]), &dp(&[0.5], &[0.005])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, ell1(&s, &rv(&[0.1]), &rv(&[0.5])).unwrap());

        // inside S: ell1 + p * ell2
        let th = pt(&[0.45], &[0.01]);
        let d = dp(&[0.5], &[0.005]);
        let expect = ell1(&s, &th.theta1, &d.d1).unwrap() + ell2(&s, &th.theta2, &d.d2).unwrap();
        assert!((composite_loss(&s, &th, &d).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn gradient_at_origin_leaves_block_two_alone() {
        let s = BasinLossSpec::toy();
        let g = composite_grad(&s, &pt(&[0.0], &[0.0]), &dp(&[0.5], &[0.005])).unwrap();
        assert_eq!(g.theta2.as_slice(), &[0.0]);
        assert_eq!(g.theta1.as_slice(), &[-0.5]);

        let d = BasinLossSpec::desk();
        let th = ParamPoint::origin(256, 4);
        let data = DataPoint::new(RealVector::basis(256, 3, 1.0), RealVector::basis(4, 1, 1e-3));
        let g = composite_grad(&d, &th, &data).unwrap();
        assert!(g.theta2.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn gradient_zero_at_block_two_minimum() {
        let s = BasinLossSpec::toy();
        let g = composite_grad(&s, &pt(&[0.5], &[0.004]), &dp(&[0.3], &[0.004])).unwrap();
        assert_eq!(g.theta2.as_slice(), &[0.0]);
    }

    #[test]
    fn quadratic_examples() {
        let q = QuadraticLossSpec::new(1, 2, 2, 1.0).unwrap();
        let d = dp(&[0.2, 0.1], &[0.0, 0.3]);
        let same = ParamPoint::new(d.d1.clone(), d.d2.clone());
        assert_eq!(quadratic_loss(&q, &same, &d).unwrap(), 0.0);
        let th = pt(&[1.2, 0.1], &[1.0, 0.3]);
        assert!((quadratic_loss(&q, &th, &d).unwrap() - 1.0).abs() < 1e-15);
        let g = quadratic_grad(&q, &th, &d).unwrap();
        assert!((g.theta1[0] - 1.0).abs() < 1e-15 && (g.theta2[0] - 1.0).abs() < 1e-15);
        assert!(QuadraticLossSpec::new(1, 2, 2, 0.0).is_err());
    }

    #[test]
    fn closed_form_regime_guard() {
        let spec = BasinLossSpec::desk();
        let task = make_task(&spec, TaskMode::Id, 0.5, &mut stream!(5, "task")).unwrap();
        let far = ParamPoint::new(RealVector::basis(256, 0, 3.0), RealVector::zeros(4));
        assert!(!population_loss_closed_form(&spec, &task, &far).unwrap().1);
        let far2 = ParamPoint::new(RealVector::zeros(256), RealVector::basis(4, 0, 3e-3));
        assert!(!population_loss_closed_form(&spec, &task, &far2).unwrap().1);
    }

    #[test]
    fn population_minimizer_value() {
        let spec = BasinLossSpec::desk();
        let task = make_task(&spec, TaskMode::Id, 0.5, &mut stream!(5, "task")).unwrap();
        let (v, ok) = population_loss_closed_form(&spec, &task, &task.theta_star()).unwrap();
        assert!(ok);
        let (m, r, p) = (0.5f64, 1e-3f64, 4.0);
        let mu2 = 0.5 * r;
        let expect = 0.5 * (1.0 - m * m) + p * ((r * r - mu2 * mu2) / (2.0 * r * r) - 4.5);
        assert!((v - expect).abs() < 1e-12, "{v} vs {expect}");
    }

    #[test]
    fn excess_risk_examples() {
        let spec = BasinLossSpec::desk();
        let task = make_task(&spec, TaskMode::Id, 0.5, &mut stream!(9, "task")).unwrap();
        let mut s = stream!(9, "mc");
        let ev = Evaluator::Auto { n_mc: 1000 };
        let star = task.theta_star();
        assert!(excess_risk(&spec, &task, &star, ev, &mut s).unwrap().value.abs() < 1e-12);

        // theta2 = 0 with |mu2| = r/2 costs p * (r/2)^2 / (2 r^2) = p / 8
        let no2 = ParamPoint::new(task.mu1.clone(), RealVector::zeros(4));
        let e = excess_risk(&spec, &task, &no2, ev, &mut s).unwrap();
        assert_eq!(e.evaluator, EvaluatorKind::ClosedForm);
        assert!((e.value - 4.0 / 8.0).abs() < 1e-9, "{}", e.value);

        // theta1 = 0 loses the whole second-block bonus
        let no1 = ParamPoint::new(RealVector::zeros(256), task.mu2.clone());
        let e = excess_risk(&spec, &task, &no1, ev, &mut s).unwrap();
        assert!(e.value >= 0.5 * 0.25);
        let (_, s2) = (task.private.first.spread(), task.private.second.spread());
        let r = spec.radius2();
        let bonus = -4.0 * (s2 / (2.0 * r * r) - 4.5);
        assert!((e.value - (0.125 + bonus)).abs() < 1e-9);
    }

    #[test]
    fn mc_is_exact_for_point_masses() {
        use crate::distributions::{Factor, PointMass, ProductDistribution};
        let spec = BasinLossSpec::toy();
        let mut task = make_task(&spec, TaskMode::Id, 0.5, &mut stream!(1, "t")).unwrap();
        task.private = ProductDistribution {
            first: Factor::Point(PointMass::new(rv(&[0.5]))),
            second: Factor::Point(PointMass::new(rv(&[0.005]))),
        };
        let th = pt(&[0.42], &[0.001]);
        let (est, se) = population_loss_mc(&spec, &task, &th, 10, &mut stream!(1, "mc")).unwrap();
        assert_eq!(se, 0.0);
        assert_eq!(est, composite_loss(&spec, &th, &dp(&[0.5], &[0.005])).unwrap());
        assert!(population_loss_mc(&spec, &task, &th, 1, &mut stream!(1, "mc")).is_err());
    }
}
