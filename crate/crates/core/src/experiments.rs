//! The three algorithm arms (public-only, private-only, mixed), the
//! constrained quadratic variant, noise-schedule comparison, basin-landing
//! calibration, and per-arm summaries.

use crate::distributions::{make_task, DataSource, Dataset, TaskInstance, TaskMode};
use crate::loss::{
    excess_risk, BasinLossParams, BasinLossSpec, BlockLoss, Evaluator, EvaluatorKind, ParamPoint,
    PopulationLoss, QuadraticLossSpec,
};
use crate::optim::{run_dpsgd, run_gd, DpSgdConfig, GdConfig, NoiseSchedule, Projection, Trajectory};
use crate::rng::RngStream;
use crate::vector::{project_ball_in_place, RealVector};
use crate::{stream, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scaling {
    /// `n_pub = p`, `n_priv = p^2`, `P1 = p^4`, `P2 = p`.
    Theorem,
    /// Constants chosen freely.
    Desk,
}

impl Scaling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scaling::Theorem => "theorem",
            Scaling::Desk => "desk",
        }
    }
}

impl std::str::FromStr for Scaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "theorem" => Ok(Scaling::Theorem),
            "desk" => Ok(Scaling::Desk),
            _ => Err(Error::param(
                "scaling",
                format!("expected `theorem` or `desk`, got `{s}`"),
            )),
        }
    }
}

/// DP-SGD knobs that do not depend on the loss constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DpSettings {
    pub epsilon: f64,
    pub delta: f64,
    pub c_sigma: f64,
    /// `None` means `n_priv^2`.
    pub steps: Option<usize>,
    pub suffix_average: Option<f64>,
}

impl Default for DpSettings {
    fn default() -> Self {
        DpSettings {
            epsilon: 1.0,
            delta: 1e-4,
            c_sigma: 1.0,
            steps: None,
            suffix_average: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparationConfig {
    pub spec: BasinLossSpec,
    pub mode: TaskMode,
    pub n_pub: usize,
    pub n_priv: usize,
    /// `|mu2| = rho * r`.
    pub rho: f64,
    pub dp: DpSettings,
    pub seeds: usize,
    pub n_mc: usize,
    pub scaling: Scaling,
    pub evaluator: EvaluatorChoice,
    /// Landing margin as a fraction of R1.
    pub landing_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvaluatorChoice {
    /// Closed form when valid, Monte Carlo otherwise.
    Auto,
    MonteCarlo,
}

impl EvaluatorChoice {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvaluatorChoice::Auto => "auto",
            EvaluatorChoice::MonteCarlo => "monte_carlo",
        }
    }
}

impl std::str::FromStr for EvaluatorChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "closed_form" => Ok(EvaluatorChoice::Auto),
            "monte_carlo" | "mc" => Ok(EvaluatorChoice::MonteCarlo),
            _ => Err(Error::param(
                "evaluator",
                format!("expected `auto` or `monte_carlo`, got `{s}`"),
            )),
        }
    }
}

impl Default for SeparationConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SeparationConfig {
    /// p = 4, P1 = 256, P2 = 4, n_pub = 32, n_priv = 512, 20 seeds.
    pub fn desk() -> Self {
        Self::desk_for(4).expect("desk defaults are valid")
    }

    /// Desk constants at base scale `p` with `n_pub = 2p^2`, `n_priv = 32p^2`.
    pub fn desk_for(p: usize) -> Result<Self> {
        Ok(SeparationConfig {
            spec: BasinLossSpec::new(BasinLossParams::desk_for(p))?,
            mode: TaskMode::Id,
            n_pub: 2 * p * p,
            n_priv: 32 * p * p,
            rho: 0.5,
            dp: DpSettings::default(),
            seeds: 20,
            n_mc: 100_000,
            scaling: Scaling::Desk,
            evaluator: EvaluatorChoice::Auto,
            landing_margin: 0.2,
        })
    }

    /// Asymptotic parameterization at base scale `p`.
    pub fn theorem(p: usize, kappa: f64, c_r: f64) -> Result<Self> {
        let dp = DpSettings::default();
        let spec = BasinLossSpec::new(BasinLossParams::theorem(p, dp.epsilon, dp.delta, kappa, c_r))?;
        Ok(SeparationConfig {
            spec,
            n_pub: p,
            n_priv: p * p,
            scaling: Scaling::Theorem,
            ..Self::desk()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_pub == 0 {
            return Err(Error::param("n_pub", "must be at least 1"));
        }
        if self.n_priv == 0 {
            return Err(Error::param("n_priv", "must be at least 1"));
        }
        if self.seeds == 0 {
            return Err(Error::param("seeds", "must be at least 1"));
        }
        if self.n_mc < 2 {
            return Err(Error::param("n_mc", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::param("rho", "must lie in [0, 1]"));
        }
        if !(self.landing_margin >= 0.0 && self.landing_margin < 1.0) {
            return Err(Error::param("landing_margin", "must lie in [0, 1)"));
        }
        if self.scaling == Scaling::Theorem {
            let p = self.spec.p();
            let ok = self.n_pub == p
                && self.n_priv == p * p
                && self.spec.dim1() == p.pow(4)
                && self.spec.dim2() == p;
            if !ok {
                return Err(Error::param(
                    "scaling",
                    format!(
                        "theorem scaling requires n_pub = p, n_priv = p^2, P1 = p^4, P2 = p \
                         (p = {p}, n_pub = {}, n_priv = {}, P1 = {}, P2 = {})",
                        self.n_pub,
                        self.n_priv,
                        self.spec.dim1(),
                        self.spec.dim2()
                    ),
                ));
            }
        }
        self.dp_config()?.validate()
    }

    /// DP-SGD configuration for the private phase: `m = p/r^2`,
    /// `L = 3p/r + 3`, `T = n_priv^2` unless overridden.
    pub fn dp_config(&self) -> Result<DpSgdConfig> {
        let mut cfg = DpSgdConfig::calibrated(
            self.dp.epsilon,
            self.dp.delta,
            self.n_priv,
            self.spec.strong_convexity(),
            self.spec.default_clip_norm(),
        )?
        .with_c_sigma(self.dp.c_sigma)?;
        if let Some(t) = self.dp.steps {
            cfg = cfg.with_steps(t);
        }
        cfg.suffix_average = self.dp.suffix_average;
        Ok(cfg)
    }

    pub fn evaluator(&self) -> Evaluator {
        match self.evaluator {
            EvaluatorChoice::Auto => Evaluator::Auto { n_mc: self.n_mc },
            EvaluatorChoice::MonteCarlo => Evaluator::MonteCarlo { n_mc: self.n_mc },
        }
    }
}

/// One GD step with step size 1 from the origin on public data, optionally
/// projected.
pub fn public_step<L: BlockLoss + ?Sized>(
    loss: &L,
    public: &Dataset,
    projection: Option<Projection>,
) -> Result<ParamPoint> {
    let data = public.require(DataSource::Public, "public gradient step")?;
    let (a, b) = loss.dims();
    let mut cfg = GdConfig::new(1, 1.0);
    cfg.projection = projection;
    Ok(run_gd(loss, data, &cfg, &ParamPoint::origin(a, b))?.final_point)
}

/// The public step followed by clipping block two to `B(0, r)`.
pub fn algo_public_only<L: BlockLoss + ?Sized>(
    loss: &L,
    public: &Dataset,
    radius2: f64,
    projection: Option<Projection>,
) -> Result<ParamPoint> {
    let mut theta = public_step(loss, public, projection)?;
    let mut t2 = theta.theta2.into_vec();
    project_ball_in_place(&mut t2, radius2);
    theta.theta2 = RealVector::new(t2)?;
    Ok(theta)
}

/// DP-SGD from the origin on private data.
pub fn algo_private_only<L: BlockLoss + ?Sized>(
    loss: &L,
    private: &Dataset,
    dp: &DpSgdConfig,
    stream: &mut RngStream,
) -> Result<Trajectory> {
    let data = private.require(DataSource::Private, "private DP-SGD")?;
    let (a, b) = loss.dims();
    run_dpsgd(loss, data, dp, &ParamPoint::origin(a, b), stream)
}

/// Public step (no clip), then DP-SGD on private data from there. Returns
/// the phase-one point and the phase-two trajectory.
pub fn algo_mixed<L: BlockLoss + ?Sized>(
    loss: &L,
    public: &Dataset,
    private: &Dataset,
    dp: &DpSgdConfig,
    projection: Option<Projection>,
    stream: &mut RngStream,
) -> Result<(ParamPoint, Trajectory)> {
    let start = public_step(loss, public, projection)?;
    let data = private.require(DataSource::Private, "mixed fine-tuning")?;
    let tr = run_dpsgd(loss, data, dp, &start, stream)?;
    Ok((start, tr))
}

pub const ARM_PUBLIC: &str = "public_only";
pub const ARM_PRIVATE: &str = "private_only";
pub const ARM_MIXED: &str = "mixed";

#[derive(Debug, Clone, PartialEq)]
pub struct ArmRecord {
    pub experiment: String,
    pub mode: TaskMode,
    pub seed: u64,
    pub arm: String,
    pub excess_risk: f64,
    pub stderr: f64,
    pub evaluator: EvaluatorKind,
    /// Final block one lies in the basin annulus S.
    pub basin_hit: bool,
    pub block1_final_norm: f64,
    pub block2_dist_to_mu2: f64,
    /// DP-SGD arms only.
    pub block1_max_displacement: Option<f64>,
    /// Mixed arm: the public step landed in S with the configured margin.
    pub landed: Option<bool>,
    pub constraint_violations: usize,
    /// `L(theta*)` used as the baseline.
    pub optimum_loss: f64,
    pub final_point: ParamPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub arm: String,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub experiment: String,
    pub root_seed: u64,
    pub records: Vec<ArmRecord>,
}

impl ExperimentReport {
    /// Arms in order of first appearance.
    pub fn arms(&self) -> Vec<String> {
        let mut arms: Vec<String> = Vec::new();
        for r in &self.records {
            if !arms.contains(&r.arm) {
                arms.push(r.arm.clone());
            }
        }
        arms
    }

    pub fn arm_records(&self, arm: &str) -> Vec<&ArmRecord> {
        self.records.iter().filter(|r| r.arm == arm).collect()
    }

    pub fn excess(&self, arm: &str) -> Vec<f64> {
        self.arm_records(arm).iter().map(|r| r.excess_risk).collect()
    }

    pub fn median(&self, arm: &str) -> f64 {
        quantile(&self.excess(arm), 0.5)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        self.arms()
            .into_iter()
            .map(|arm| {
                let xs = self.excess(&arm);
                SummaryRow {
                    median: quantile(&xs, 0.5),
                    q25: quantile(&xs, 0.25),
                    q75: quantile(&xs, 0.75),
                    n: xs.len(),
                    arm,
                }
            })
            .collect()
    }
}

/// Linear-interpolation quantile (R type 7). NaN for empty input.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Standard error of the sample median, via `1.2533 * sd / sqrt(n)`.
pub fn median_stderr(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (std::f64::consts::PI / 2.0).sqrt() * (var / n).sqrt()
}

/// Runs `f` over `0..n`, in parallel when enabled, keeping index order.
pub(crate) fn map_indexed<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

fn with_seed<T>(seed: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Seed {
        seed: seed as u64,
        source: Box::new(e),
    })
}

struct SeedData {
    task: TaskInstance,
    public: Dataset,
    private: Dataset,
}

fn seed_stream(experiment: &str, config: &SeparationConfig, root_seed: u64, seed: usize) -> RngStream {
    stream!(root_seed, experiment, config.mode.as_str(), seed)
}

/// The task and the tagged public and private datasets that seed `seed` of
/// `experiment` ("separation", "quadratic" or "schedule") uses.
pub fn seed_datasets(
    config: &SeparationConfig,
    experiment: &str,
    root_seed: u64,
    seed: usize,
) -> Result<(TaskInstance, Dataset, Dataset)> {
    let d = seed_data(config, &seed_stream(experiment, config, root_seed, seed))?;
    Ok((d.task, d.public, d.private))
}

fn seed_data(config: &SeparationConfig, base: &RngStream) -> Result<SeedData> {
    let task = make_task(&config.spec, config.mode, config.rho, &mut base.child("task"))?;
    let public = task.sample_public(&mut base.child("public"), config.n_pub)?;
    let private = task.sample_private(&mut base.child("private"), config.n_priv)?;
    if config.mode == TaskMode::Ood && public.points().iter().any(|d| d.d2.iter().any(|&x| x != 0.0)) {
        return Err(Error::InformationFlow(
            "OOD public data has a nonzero second block".into(),
        ));
    }
    Ok(SeedData {
        task,
        public,
        private,
    })
}

struct RecordContext<'a, L: ?Sized> {
    loss: &'a L,
    experiment: &'a str,
    config: &'a SeparationConfig,
    task: &'a TaskInstance,
    seed: usize,
    eval: &'a RngStream,
}

impl<L: PopulationLoss + ?Sized> RecordContext<'_, L> {
    fn record(
        &self,
        arm: &str,
        theta: ParamPoint,
        trajectory: Option<&Trajectory>,
        landed: Option<bool>,
    ) -> Result<ArmRecord> {
        let mut s = self.eval.child(arm);
        let risk = excess_risk(self.loss, self.task, &theta, self.config.evaluator(), &mut s)?;
        let star = self.task.theta_star();
        let optimum_loss = self
            .loss
            .population_closed_form(self.task, &star)?
            .ok_or(Error::NonFinite("closed form at the population minimizer"))?;
        Ok(ArmRecord {
            experiment: self.experiment.to_string(),
            mode: self.config.mode,
            seed: self.seed as u64,
            arm: arm.to_string(),
            excess_risk: risk.value,
            stderr: risk.stderr,
            evaluator: risk.evaluator,
            basin_hit: self.config.spec.annulus().contains(theta.theta1.as_slice()),
            block1_final_norm: theta.theta1.norm(),
            block2_dist_to_mu2: theta.theta2.distance(&self.task.mu2)?,
            block1_max_displacement: trajectory.map(|t| t.max_block1_displacement),
            landed,
            constraint_violations: trajectory.map_or(0, |t| t.constraint_violations),
            optimum_loss,
            final_point: theta,
        })
    }
}

fn landed(config: &SeparationConfig, theta: &ParamPoint) -> bool {
    let s = config.spec.annulus();
    s.margin(theta.theta1.as_slice()) >= config.landing_margin * config.spec.basin_half_width()
}

fn run_three_arms<L: PopulationLoss + ?Sized>(
    loss: &L,
    experiment: &str,
    config: &SeparationConfig,
    projection: Option<Projection>,
    root_seed: u64,
) -> Result<ExperimentReport> {
    config.validate()?;
    let mut dp = config.dp_config()?;
    dp.projection = projection;
    let per_seed = map_indexed(config.seeds, |seed| {
        with_seed(
            seed,
            (|| {
                let base = seed_stream(experiment, config, root_seed, seed);
                let data = seed_data(config, &base)?;
                let ctx = RecordContext {
                    loss,
                    experiment,
                    config,
                    task: &data.task,
                    seed,
                    eval: &base.child("eval"),
                };
                let public = algo_public_only(loss, &data.public, config.spec.radius2(), projection)?;
                let private = algo_private_only(loss, &data.private, &dp, &mut base.child(ARM_PRIVATE))?;
                let (start, mixed) = algo_mixed(
                    loss,
                    &data.public,
                    &data.private,
                    &dp,
                    projection,
                    &mut base.child(ARM_MIXED),
                )?;
                let records = vec![
                    ctx.record(ARM_PUBLIC, public, None, None)?,
                    ctx.record(ARM_PRIVATE, private.final_point.clone(), Some(&private), None)?,
                    ctx.record(
                        ARM_MIXED,
                        mixed.final_point.clone(),
                        Some(&mixed),
                        Some(landed(config, &start)),
                    )?,
                ];
                let base_loss = records[0].optimum_loss;
                if records.iter().any(|r| r.optimum_loss != base_loss) {
                    return Err(Error::InformationFlow("arms disagree on L(theta*)".into()));
                }
                Ok(records)
            })(),
        )
    })?;
    Ok(ExperimentReport {
        experiment: experiment.to_string(),
        root_seed,
        records: per_seed.into_iter().flatten().collect(),
    })
}

/// All three arms on the composite loss, one task and dataset pair per seed.
pub fn run_separation(config: &SeparationConfig, root_seed: u64) -> Result<ExperimentReport> {
    run_three_arms(&config.spec, "separation", config, None, root_seed)
}

/// All three arms on the constrained quadratic, with per-block projection
/// onto `B(0, 1) x B(0, r)` in every arm.
pub fn run_quadratic_separation(config: &SeparationConfig, root_seed: u64) -> Result<ExperimentReport> {
    let q = QuadraticLossSpec::matching(&config.spec);
    let (r1, r2) = q.constraint_radii();
    run_three_arms(
        &q,
        "quadratic",
        config,
        Some(Projection::balls(r1, r2)),
        root_seed,
    )
}

/// Named noise schedules for [`run_schedule_comparison`].
#[derive(Debug, Clone, PartialEq)]
pub struct NamedSchedule {
    pub name: String,
    pub schedule: NoiseSchedule,
}

/// Uniform, front-loaded and back-loaded schedules over `steps`. The loaded
/// schedules run one epoch (`n` steps) at noise multiplier `sqrt(low_var)`
/// and the rest at the multiplier that keeps the budget equal.
pub fn default_schedules(steps: usize, n: usize, low_var: f64) -> Result<Vec<NamedSchedule>> {
    let low = low_var.sqrt();
    Ok(vec![
        NamedSchedule {
            name: "front_loaded".into(),
            schedule: NoiseSchedule::front_loaded(steps, n, low)?,
        },
        NamedSchedule {
            name: "back_loaded".into(),
            schedule: NoiseSchedule::back_loaded(steps, n, low)?,
        },
        NamedSchedule {
            name: "uniform".into(),
            schedule: NoiseSchedule::uniform(steps),
        },
    ])
}

/// Private-only DP-SGD under each schedule. Within a seed every schedule
/// sees the same task, data and random draws.
pub fn run_schedule_comparison(
    config: &SeparationConfig,
    schedules: &[NamedSchedule],
    root_seed: u64,
) -> Result<ExperimentReport> {
    config.validate()?;
    let Some(first) = schedules.first() else {
        return Err(Error::param("schedules", "need at least one schedule"));
    };
    if let Some(bad) = schedules
        .iter()
        .find(|s| !s.schedule.same_budget(&first.schedule))
    {
        return Err(Error::param(
            "schedules",
            format!(
                "unequal privacy budgets: `{}` costs {} but `{}` costs {}",
                bad.name,
                bad.schedule.privacy_cost(),
                first.name,
                first.schedule.privacy_cost()
            ),
        ));
    }
    let dp = config.dp_config()?;
    let experiment = "schedule";
    let per_seed = map_indexed(config.seeds, |seed| {
        with_seed(
            seed,
            (|| {
                let base = seed_stream(experiment, config, root_seed, seed);
                let data = seed_data(config, &base)?;
                let ctx = RecordContext {
                    loss: &config.spec,
                    experiment,
                    config,
                    task: &data.task,
                    seed,
                    eval: &base.child("eval"),
                };
                schedules
                    .iter()
                    .map(|s| {
                        let cfg = dp.clone().with_schedule(s.schedule.clone());
                        let tr =
                            algo_private_only(&config.spec, &data.private, &cfg, &mut base.child("dpsgd"))?;
                        ctx.record(&s.name, tr.final_point.clone(), Some(&tr), None)
                    })
                    .collect::<Result<Vec<_>>>()
            })(),
        )
    })?;
    Ok(ExperimentReport {
        experiment: experiment.to_string(),
        root_seed,
        records: per_seed.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRow {
    pub n_pub: usize,
    pub trials: usize,
    pub landed: usize,
    pub rate: f64,
    /// Largest `|theta1 - mean(d1)|_inf` after the public step.
    pub max_mean_error: f64,
    /// Largest `|theta2|_inf` after the public step.
    pub max_block2_abs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub margin_fraction: f64,
    pub root_seed: u64,
    pub rows: Vec<CalibrationRow>,
}

/// For each `n_pub`, the fraction of trials in which the public step puts
/// block one inside S at distance at least `margin_fraction * R1` from its
/// boundary.
pub fn calibrate_basin_landing(
    spec: &BasinLossSpec,
    n_pub_grid: &[usize],
    trials: usize,
    margin_fraction: f64,
    rho: f64,
    root_seed: u64,
) -> Result<CalibrationReport> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if n_pub_grid.contains(&0) {
        return Err(Error::param("n_pub", "grid entries must be at least 1"));
    }
    let annulus = spec.annulus();
    let need = margin_fraction * spec.basin_half_width();
    let mut rows = Vec::with_capacity(n_pub_grid.len());
    for &n_pub in n_pub_grid {
        let outcomes = map_indexed(trials, |trial| {
            with_seed(
                trial,
                (|| {
                    let base = stream!(root_seed, "calibrate", n_pub, trial);
                    let task = make_task(spec, TaskMode::Id, rho, &mut base.child("task"))?;
                    let public = task.sample_public(&mut base.child("public"), n_pub)?;
                    let theta = public_step(spec, &public, None)?;
                    let mean = public.mean_d1()?;
                    let err = theta
                        .theta1
                        .iter()
                        .zip(mean.iter())
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    let b2 = theta.theta2.iter().map(|x| x.abs()).fold(0.0, f64::max);
                    Ok((annulus.margin(theta.theta1.as_slice()) >= need, err, b2))
                })(),
            )
        })?;
        let landed = outcomes.iter().filter(|o| o.0).count();
        rows.push(CalibrationRow {
            n_pub,
            trials,
            landed,
            rate: landed as f64 / trials as f64,
            max_mean_error: outcomes.iter().map(|o| o.1).fold(0.0, f64::max),
            max_block2_abs: outcomes.iter().map(|o| o.2).fold(0.0, f64::max),
        });
    }
    Ok(CalibrationReport {
        margin_fraction,
        root_seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SeparationConfig {
        let mut c = SeparationConfig::desk_for(2).unwrap();
        c.seeds = 3;
        c.n_mc = 1000;
        c
    }

    #[test]
    fn quantiles() {
        let xs = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(quantile(&xs, 0.5), 2.5);
        assert_eq!(quantile(&xs, 0.25), 1.75);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&[7.0], 0.75), 7.0);
        assert!(quantile(&[], 0.5).is_nan());
    }

    #[test]
    fn report_shape_and_determinism() {
        let c = small();
        let a = run_separation(&c, 11).unwrap();
        assert_eq!(a.records.len(), 3 * c.seeds);
        assert_eq!(a.arms(), vec![ARM_PUBLIC, ARM_PRIVATE, ARM_MIXED]);
        let b = run_separation(&c, 11).unwrap();
        assert_eq!(a, b);
        let s = a.summary();
        assert_eq!(s.len(), 3);
        assert!(s
            .iter()
            .all(|r| r.n == c.seeds && r.q25 <= r.median && r.median <= r.q75));
    }

    #[test]
    fn public_step_is_exact_mean() {
        let c = small();
        let base = stream!(2, "t");
        let data = seed_data(&c, &base).unwrap();
        let theta = public_step(&c.spec, &data.public, None).unwrap();
        assert_eq!(theta.theta2.as_slice(), vec![0.0; c.spec.dim2()].as_slice());
        let mean = data.public.mean_d1().unwrap();
        assert!(theta.theta1.distance(&mean).unwrap() < 1e-15);
    }

    #[test]
    fn ood_public_arm_has_zero_block_two() {
        let mut c = small();
        c.mode = TaskMode::Ood;
        let r = run_separation(&c, 4).unwrap();
        for rec in r.arm_records(ARM_PUBLIC) {
            assert!(rec.final_point.theta2.iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn arms_refuse_wrongly_tagged_data() {
        let c = small();
        let data = seed_data(&c, &stream!(3, "t")).unwrap();
        let dp = c.dp_config().unwrap();
        assert!(matches!(
            public_step(&c.spec, &data.private, None),
            Err(Error::InformationFlow(_))
        ));
        assert!(matches!(
            algo_private_only(&c.spec, &data.public, &dp, &mut stream!(0, "x")),
            Err(Error::InformationFlow(_))
        ));
    }

    #[test]
    fn theorem_scaling_is_enforced() {
        let mut c = SeparationConfig::theorem(3, 0.25, 1.0).unwrap();
        c.validate().unwrap();
        c.n_pub = 4;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("n_pub = p"), "{err}");
    }

    #[test]
    fn quadratic_iterates_stay_feasible() {
        let c = small();
        let r = run_quadratic_separation(&c, 5).unwrap();
        for rec in &r.records {
            assert_eq!(rec.constraint_violations, 0);
            assert!(rec.final_point.theta1.norm() <= 1.0 + 1e-12);
            assert!(rec.final_point.theta2.norm() <= c.spec.radius2() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn schedules_need_equal_budgets() {
        let mut c = small();
        c.dp.steps = Some(400);
        let mut s = default_schedules(400, 20, 0.6).unwrap();
        let r = run_schedule_comparison(&c, &s, 1).unwrap();
        assert_eq!(r.arms(), vec!["front_loaded", "back_loaded", "uniform"]);
        s.push(NamedSchedule {
            name: "cheap".into(),
            schedule: NoiseSchedule::new(vec![(400, 2.0)]).unwrap(),
        });
        assert!(run_schedule_comparison(&c, &s, 1).is_err());
    }

    #[test]
    fn calibration_is_monotone_in_trend() {
        let spec = BasinLossSpec::new(BasinLossParams::desk_for(2)).unwrap();
        let rep = calibrate_basin_landing(&spec, &[1, 64], 200, 0.2, 0.5, 9).unwrap();
        assert!(rep.rows[1].rate >= rep.rows[0].rate);
        assert_eq!(rep.rows[1].rate, 1.0);
        assert_eq!(rep.rows[0].max_block2_abs, 0.0);
        let again = calibrate_basin_landing(&spec, &[1, 64], 200, 0.2, 0.5, 9).unwrap();
        assert_eq!(rep, again);
    }
}
