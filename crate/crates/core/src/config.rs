//! Run configuration and its text format.
//!
//! One `key = value` pair per line, dotted section prefixes (`spec.M`,
//! `dp.epsilon`), `#` starts a comment. Unknown or repeated keys are errors.
//! [`RunConfig::to_text`] writes every key, and parsing that text gives back
//! the same config.

use std::fmt::Display;
use std::str::FromStr;

use crate::distributions::TaskMode;
use crate::experiments::{DpSettings, EvaluatorChoice, Scaling, SeparationConfig};
use crate::loss::{BasinLossParams, BasinLossSpec, DataPoint};
use crate::vector::RealVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Separation,
    Quadratic,
    Schedule,
    Landscape,
    Calibrate,
    Selftest,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Separation => "separation",
            ExperimentKind::Quadratic => "quadratic",
            ExperimentKind::Schedule => "schedule",
            ExperimentKind::Landscape => "landscape",
            ExperimentKind::Calibrate => "calibrate",
            ExperimentKind::Selftest => "selftest",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "separation" => ExperimentKind::Separation,
            "quadratic" => ExperimentKind::Quadratic,
            "schedule" => ExperimentKind::Schedule,
            "landscape" => ExperimentKind::Landscape,
            "calibrate" => ExperimentKind::Calibrate,
            "selftest" => ExperimentKind::Selftest,
            _ => return Err(Error::Config(format!("unknown experiment `{s}`"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandscapeKind {
    /// Toy slices along theta1 plus a heatmap.
    Toy,
    /// Interpolation plane through (theta*, mixed, private-only) of a
    /// separation seed.
    Plane,
}

impl LandscapeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            LandscapeKind::Toy => "toy",
            LandscapeKind::Plane => "plane",
        }
    }
}

impl FromStr for LandscapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(LandscapeKind::Toy),
            "plane" => Ok(LandscapeKind::Plane),
            _ => Err(Error::Config(format!("unknown landscape kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeSettings {
    pub kind: LandscapeKind,
    /// Toy pictures use the toy constants instead of `spec.*`.
    pub toy_spec: bool,
    pub theta1_lo: f64,
    pub theta1_hi: f64,
    pub theta1_n: usize,
    pub theta2_lo: f64,
    pub theta2_hi: f64,
    pub theta2_n: usize,
    /// Fixed theta2 values for the slices.
    pub slices: Vec<f64>,
    /// Data point of the toy loss.
    pub d1: f64,
    pub d2: f64,
    pub plane_res: usize,
    pub plane_margin: usize,
    /// Which separation seed supplies the plane's corners.
    pub plane_seed: usize,
}

impl Default for LandscapeSettings {
    fn default() -> Self {
        LandscapeSettings {
            kind: LandscapeKind::Toy,
            toy_spec: true,
            theta1_lo: -1.0,
            theta1_hi: 1.0,
            theta1_n: 401,
            theta2_lo: -0.02,
            theta2_hi: 0.03,
            theta2_n: 101,
            slices: vec![0.005, -0.005],
            d1: 0.5,
            d2: 0.005,
            plane_res: 41,
            plane_margin: 8,
            plane_seed: 0,
        }
    }
}

impl LandscapeSettings {
    pub fn data_point(&self) -> Result<DataPoint> {
        Ok(DataPoint::new(
            RealVector::new(vec![self.d1])?,
            RealVector::new(vec![self.d2])?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrateSettings {
    pub n_pub_grid: Vec<usize>,
    pub trials: usize,
    /// Landing margin as a fraction of R1.
    pub margin: f64,
}

impl Default for CalibrateSettings {
    fn default() -> Self {
        CalibrateSettings {
            n_pub_grid: vec![1, 2, 4, 8, 16, 32, 64],
            trials: 200,
            margin: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSettings {
    /// Noise variance multiplier of the low-noise phase.
    pub low_var: f64,
    /// Length of the low-noise phase; `None` means one epoch (`n_priv`).
    pub phase_len: Option<usize>,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        ScheduleSettings {
            low_var: 0.6,
            phase_len: None,
        }
    }
}

/// Everything a CLI run needs. Loss constants are kept unvalidated here so
/// overrides can pass through invalid intermediate states; [`Self::resolve`]
/// validates.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub root_seed: u64,
    pub out_dir: String,
    pub spec: BasinLossParams,
    pub mode: TaskMode,
    pub rho: f64,
    pub n_pub: usize,
    pub n_priv: usize,
    pub dump_datasets: bool,
    pub dp: DpSettings,
    pub seeds: usize,
    pub n_mc: usize,
    pub scaling: Scaling,
    pub evaluator: EvaluatorChoice,
    pub landing_margin: f64,
    pub kappa: f64,
    pub c_r: f64,
    pub schedule: ScheduleSettings,
    pub landscape: LandscapeSettings,
    pub calibrate: CalibrateSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sep = SeparationConfig::desk();
        RunConfig {
            experiment: ExperimentKind::Separation,
            root_seed: 0,
            out_dir: "out".into(),
            spec: sep.spec.params(),
            mode: sep.mode,
            rho: sep.rho,
            n_pub: sep.n_pub,
            n_priv: sep.n_priv,
            dump_datasets: false,
            dp: sep.dp,
            seeds: sep.seeds,
            n_mc: sep.n_mc,
            scaling: sep.scaling,
            evaluator: sep.evaluator,
            landing_margin: sep.landing_margin,
            kappa: 0.25,
            c_r: 1.0,
            schedule: ScheduleSettings::default(),
            landscape: LandscapeSettings::default(),
            calibrate: CalibrateSettings::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("`{key}`: cannot parse `{value}`: {e}")))
}

fn parse_opt<T: FromStr>(key: &str, value: &str, none: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    if value == none {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn list<T: Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn opt<T: Display>(x: &Option<T>, none: &str) -> String {
    x.as_ref().map_or_else(|| none.to_string(), |v| v.to_string())
}

impl RunConfig {
    /// Every key with its current value, in file order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let s = &self.spec;
        let l = &self.landscape;
        vec![
            ("experiment", self.experiment.as_str().into()),
            ("seed", self.root_seed.to_string()),
            ("out", self.out_dir.clone()),
            ("spec.p", s.p.to_string()),
            ("spec.P1", s.dim1.to_string()),
            ("spec.P2", s.dim2.to_string()),
            ("spec.M", s.basin_radius.to_string()),
            ("spec.R1", s.basin_half_width.to_string()),
            ("spec.R2", s.gate_ramp.to_string()),
            ("spec.r", s.radius2.to_string()),
            ("task.mode", self.mode.as_str().into()),
            ("task.rho", self.rho.to_string()),
            ("data.n_pub", self.n_pub.to_string()),
            ("data.n_priv", self.n_priv.to_string()),
            ("data.dump", self.dump_datasets.to_string()),
            ("dp.epsilon", self.dp.epsilon.to_string()),
            ("dp.delta", self.dp.delta.to_string()),
            ("dp.c_sigma", self.dp.c_sigma.to_string()),
            ("dp.steps", opt(&self.dp.steps, "auto")),
            ("dp.suffix_average", opt(&self.dp.suffix_average, "none")),
            ("run.seeds", self.seeds.to_string()),
            ("run.n_mc", self.n_mc.to_string()),
            ("run.scaling", self.scaling.as_str().into()),
            ("run.evaluator", self.evaluator.as_str().into()),
            ("run.landing_margin", self.landing_margin.to_string()),
            ("theorem.kappa", self.kappa.to_string()),
            ("theorem.c_r", self.c_r.to_string()),
            ("schedule.low_var", self.schedule.low_var.to_string()),
            ("schedule.phase_len", opt(&self.schedule.phase_len, "auto")),
            ("landscape.kind", l.kind.as_str().into()),
            ("landscape.spec", if l.toy_spec { "toy" } else { "config" }.into()),
            ("landscape.theta1_lo", l.theta1_lo.to_string()),
            ("landscape.theta1_hi", l.theta1_hi.to_string()),
            ("landscape.theta1_n", l.theta1_n.to_string()),
            ("landscape.theta2_lo", l.theta2_lo.to_string()),
            ("landscape.theta2_hi", l.theta2_hi.to_string()),
            ("landscape.theta2_n", l.theta2_n.to_string()),
            ("landscape.slices", list(&l.slices)),
            ("landscape.d1", l.d1.to_string()),
            ("landscape.d2", l.d2.to_string()),
            ("landscape.plane_res", l.plane_res.to_string()),
            ("landscape.plane_margin", l.plane_margin.to_string()),
            ("landscape.plane_seed", l.plane_seed.to_string()),
            ("calibrate.n_pub_grid", list(&self.calibrate.n_pub_grid)),
            ("calibrate.trials", self.calibrate.trials.to_string()),
            ("calibrate.margin", self.calibrate.margin.to_string()),
        ]
    }

    /// Sets one key. Unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let s = &mut self.spec;
        let l = &mut self.landscape;
        match key {
            "experiment" => self.experiment = v.parse()?,
            "seed" => self.root_seed = parse(key, v)?,
            "out" => self.out_dir = v.to_string(),
            "spec.p" => s.p = parse(key, v)?,
            "spec.P1" => s.dim1 = parse(key, v)?,
            "spec.P2" => s.dim2 = parse(key, v)?,
            "spec.M" => s.basin_radius = parse(key, v)?,
            "spec.R1" => s.basin_half_width = parse(key, v)?,
            "spec.R2" => s.gate_ramp = parse(key, v)?,
            "spec.r" => s.radius2 = parse(key, v)?,
            "task.mode" => self.mode = parse(key, v)?,
            "task.rho" => self.rho = parse(key, v)?,
            "data.n_pub" => self.n_pub = parse(key, v)?,
            "data.n_priv" => self.n_priv = parse(key, v)?,
            "data.dump" => self.dump_datasets = parse(key, v)?,
            "dp.epsilon" => self.dp.epsilon = parse(key, v)?,
            "dp.delta" => self.dp.delta = parse(key, v)?,
            "dp.c_sigma" => self.dp.c_sigma = parse(key, v)?,
            "dp.steps" => self.dp.steps = parse_opt(key, v, "auto")?,
            "dp.suffix_average" => self.dp.suffix_average = parse_opt(key, v, "none")?,
            "run.seeds" => self.seeds = parse(key, v)?,
            "run.n_mc" => self.n_mc = parse(key, v)?,
            "run.scaling" => self.scaling = parse(key, v)?,
            "run.evaluator" => self.evaluator = parse(key, v)?,
            "run.landing_margin" => self.landing_margin = parse(key, v)?,
            "theorem.kappa" => self.kappa = parse(key, v)?,
            "theorem.c_r" => self.c_r = parse(key, v)?,
            "schedule.low_var" => self.schedule.low_var = parse(key, v)?,
            "schedule.phase_len" => self.schedule.phase_len = parse_opt(key, v, "auto")?,
            "landscape.kind" => l.kind = v.parse()?,
            "landscape.spec" => {
                l.toy_spec = match v {
                    "toy" => true,
                    "config" => false,
                    _ => {
                        return Err(Error::Config(format!(
                            "`{key}`: expected `toy` or `config`, got `{v}`"
                        )))
                    }
                }
            }
            "landscape.theta1_lo" => l.theta1_lo = parse(key, v)?,
            "landscape.theta1_hi" => l.theta1_hi = parse(key, v)?,
            "landscape.theta1_n" => l.theta1_n = parse(key, v)?,
            "landscape.theta2_lo" => l.theta2_lo = parse(key, v)?,
            "landscape.theta2_hi" => l.theta2_hi = parse(key, v)?,
            "landscape.theta2_n" => l.theta2_n = parse(key, v)?,
            "landscape.slices" => l.slices = parse_list(key, v)?,
            "landscape.d1" => l.d1 = parse(key, v)?,
            "landscape.d2" => l.d2 = parse(key, v)?,
            "landscape.plane_res" => l.plane_res = parse(key, v)?,
            "landscape.plane_margin" => l.plane_margin = parse(key, v)?,
            "landscape.plane_seed" => l.plane_seed = parse(key, v)?,
            "calibrate.n_pub_grid" => self.calibrate.n_pub_grid = parse_list(key, v)?,
            "calibrate.trials" => self.calibrate.trials = parse(key, v)?,
            "calibrate.margin" => self.calibrate.margin = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` (the `--set` form).
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v)
    }

    /// Parses the text format on top of the defaults.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if seen.iter().any(|s| s == k) {
                return Err(Error::Config(format!(
                    "line {}: key `{k}` given twice",
                    lineno + 1
                )));
            }
            cfg.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            seen.push(k.to_string());
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Switches to theorem scaling: loss constants, `n_pub = p` and
    /// `n_priv = p^2` derived from `spec.p`, `kappa`, `c_r`, epsilon, delta.
    pub fn apply_theorem_scaling(&mut self) {
        let p = self.spec.p;
        self.spec = BasinLossParams::theorem(p, self.dp.epsilon, self.dp.delta, self.kappa, self.c_r);
        self.n_pub = p;
        self.n_priv = p * p;
        self.scaling = Scaling::Theorem;
    }

    /// Validated experiment configuration.
    pub fn resolve(&self) -> Result<SeparationConfig> {
        let cfg = SeparationConfig {
            spec: BasinLossSpec::new(self.spec)?,
            mode: self.mode,
            n_pub: self.n_pub,
            n_priv: self.n_priv,
            rho: self.rho,
            dp: self.dp,
            seeds: self.seeds,
            n_mc: self.n_mc,
            scaling: self.scaling,
            evaluator: self.evaluator,
            landing_margin: self.landing_margin,
        };
        cfg.validate()?;
        if !(self.schedule.low_var > 0.0) {
            return Err(Error::param("schedule.low_var", "must be positive"));
        }
        if self.calibrate.trials == 0 {
            return Err(Error::param("calibrate.trials", "must be at least 1"));
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_round_trips() {
        let c = RunConfig::default();
        assert_eq!(RunConfig::parse_text(&c.to_text()).unwrap(), c);
        c.resolve().unwrap();
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = RunConfig::parse_text("# header\n\nspec.M = 0.45  # smaller basin\ndp.epsilon=2\n").unwrap();
        assert_eq!(c.spec.basin_radius, 0.45);
        assert_eq!(c.dp.epsilon, 2.0);
    }

    #[test]
    fn unknown_and_duplicate_keys_are_errors() {
        let e = RunConfig::parse_text("spec.m = 0.5\n").unwrap_err().to_string();
        assert!(e.contains("unknown key `spec.m`"), "{e}");
        assert!(RunConfig::parse_text("seed = 1\nseed = 2\n").is_err());
        assert!(RunConfig::parse_text("seed\n").is_err());
        assert!(RunConfig::parse_text("seed = -1\n").is_err());
    }

    #[test]
    fn violations_name_the_invariant() {
        let mut c = RunConfig::default();
        c.set_pair("spec.R1=0.6").unwrap();
        let e = c.resolve().unwrap_err().to_string();
        assert!(e.contains("R1"), "{e}");
        let mut c = RunConfig::default();
        c.set_pair("dp.delta=1.5").unwrap();
        assert!(c.resolve().unwrap_err().to_string().contains("delta"));
    }

    #[test]
    fn theorem_scaling_derives_sizes() {
        let mut c = RunConfig::default();
        c.set("spec.p", "3").unwrap();
        c.apply_theorem_scaling();
        let s = c.resolve().unwrap();
        assert_eq!((s.n_pub, s.n_priv, s.spec.dim1(), s.spec.dim2()), (3, 9, 81, 3));
        c.n_pub = 5;
        assert!(c.resolve().is_err());
    }

    proptest! {
        #[test]
        fn random_configs_round_trip(
            seed in any::<u64>(),
            m in 0.01f64..0.9,
            eps in 1e-3f64..10.0,
            steps in proptest::option::of(1usize..1_000_000),
            avg in proptest::option::of(0.01f64..1.0),
            slices in proptest::collection::vec(-1.0f64..1.0, 0..4),
            grid in proptest::collection::vec(1usize..500, 1..5),
            ood in any::<bool>(),
        ) {
            let mut c = RunConfig { root_seed: seed, ..RunConfig::default() };
            c.spec.basin_radius = m;
            c.dp.epsilon = eps;
            c.dp.steps = steps;
            c.dp.suffix_average = avg;
            c.landscape.slices = slices;
            c.calibrate.n_pub_grid = grid;
            c.mode = if ood { TaskMode::Ood } else { TaskMode::Id };
            prop_assert_eq!(RunConfig::parse_text(&c.to_text()).unwrap(), c);
        }
    }
}
