use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use basin_core::config::{ExperimentKind, LandscapeKind, RunConfig};
use basin_core::csv;
use basin_core::experiments::{
    calibrate_basin_landing, default_schedules, run_quadratic_separation, run_schedule_comparison,
    run_separation, seed_datasets, ExperimentReport, Scaling, SeparationConfig, ARM_MIXED, ARM_PRIVATE,
};
use basin_core::landscape::{basin_check, heatmap_2d, interpolation_plane, local_minima_1d, slice_1d, Range};
use basin_core::loss::{BasinLossSpec, ParamPoint, PopulationLoss};
use basin_core::selftest::run_selftest;
use basin_core::vector::RealVector;
use basin_core::Error;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "basin",
    version,
    about = "Public pretraining + private fine-tuning separation experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Three arms on the composite basin loss
    Separation(Common),
    /// Three arms on the constrained quadratic
    Quadratic(Common),
    /// Private-only DP-SGD under front/back-loaded and uniform noise
    Schedule(Common),
    /// Toy slices and heatmap, or an interpolation plane
    Landscape(Common),
    /// Landing rate of the public step over a grid of n_pub
    Calibrate(Common),
    /// Quick invariant checks
    Selftest(Common),
}

#[derive(Args)]
struct Common {
    /// Config file (key = value lines)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Task mode: id or ood
    #[arg(long)]
    mode: Option<String>,
    /// Scaling: theorem or desk
    #[arg(long)]
    scaling: Option<String>,
    /// Number of seeds
    #[arg(long)]
    seeds: Option<usize>,
    /// Override any config key, e.g. --set dp.epsilon=2 (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidParameter { .. } => Failure::Config(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(format!("i/o: {e}"))
    }
}

fn build_config(kind: ExperimentKind, c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = match &c.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::parse_text(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.experiment = kind;
    if let Some(s) = c.seed {
        cfg.root_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.to_string_lossy().into_owned();
    }
    if let Some(m) = &c.mode {
        cfg.set("task.mode", m)?;
    }
    if let Some(n) = c.seeds {
        cfg.seeds = n;
    }
    if let Some(s) = &c.scaling {
        cfg.set("run.scaling", s)?;
    }
    for pair in &c.set {
        cfg.set_pair(pair)?;
    }
    // derived from the final p, epsilon, delta, kappa and c_r
    if cfg.scaling == Scaling::Theorem {
        cfg.apply_theorem_scaling();
    }
    Ok(cfg)
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), Failure> {
    fs::write(dir.join(name), body)?;
    Ok(())
}

fn write_report(dir: &Path, report: &ExperimentReport) -> Result<(), Failure> {
    write(dir, "records.csv", &csv::records_csv(report))?;
    write(dir, "summary.csv", &csv::summary_csv(report))?;
    println!(
        "{:<14} {:>22} {:>22} {:>22} {:>4}",
        "arm", "median", "q25", "q75", "n"
    );
    for s in report.summary() {
        println!(
            "{:<14} {:>22} {:>22} {:>22} {:>4}",
            s.arm, s.median, s.q25, s.q75, s.n
        );
    }
    Ok(())
}

fn dump_datasets(
    dir: &Path,
    cfg: &SeparationConfig,
    experiment: &str,
    root_seed: u64,
) -> Result<(), Failure> {
    let mut body = csv::dataset_header(cfg.spec.dim2());
    for seed in 0..cfg.seeds {
        let (_, public, private) = seed_datasets(cfg, experiment, root_seed, seed)?;
        body.push_str(&csv::dataset_rows(seed, &public));
        body.push_str(&csv::dataset_rows(seed, &private));
    }
    write(dir, "datasets.csv", &body)
}

fn run(kind: ExperimentKind, common: &Common) -> Result<(), Failure> {
    let cfg = build_config(kind, common)?;
    let sep = cfg.resolve()?;
    let dir = PathBuf::from(&cfg.out_dir);
    fs::create_dir_all(&dir)?;
    let seed = cfg.root_seed;
    match kind {
        ExperimentKind::Separation | ExperimentKind::Quadratic => {
            let report = if kind == ExperimentKind::Separation {
                run_separation(&sep, seed)?
            } else {
                run_quadratic_separation(&sep, seed)?
            };
            write_report(&dir, &report)?;
            if cfg.dump_datasets {
                dump_datasets(&dir, &sep, kind.as_str(), seed)?;
            }
        }
        ExperimentKind::Schedule => {
            let dp = sep.dp_config()?;
            let phase = cfg.schedule.phase_len.unwrap_or(sep.n_priv);
            let schedules = default_schedules(dp.steps, phase, cfg.schedule.low_var)?;
            let mut body = String::from("schedule,phase,length,multiplier,privacy_cost\n");
            for s in &schedules {
                for (i, (len, m)) in s.schedule.phases().iter().enumerate() {
                    body.push_str(&format!(
                        "{},{i},{len},{},{}\n",
                        s.name,
                        csv::fmt_f64(*m),
                        csv::fmt_f64(s.schedule.privacy_cost())
                    ));
                }
            }
            write(&dir, "schedules.csv", &body)?;
            let report = run_schedule_comparison(&sep, &schedules, seed)?;
            write_report(&dir, &report)?;
        }
        ExperimentKind::Landscape => run_landscape(&cfg, &sep, &dir)?,
        ExperimentKind::Calibrate => {
            let c = &cfg.calibrate;
            let report =
                calibrate_basin_landing(&sep.spec, &c.n_pub_grid, c.trials, c.margin, sep.rho, seed)?;
            write(&dir, "calibration.csv", &csv::calibration_csv(&report))?;
            println!("{:>6} {:>8} {:>8}", "n_pub", "landed", "rate");
            for r in &report.rows {
                println!("{:>6} {:>8} {:>8}", r.n_pub, r.landed, r.rate);
            }
        }
        ExperimentKind::Selftest => {
            let report = run_selftest();
            let mut body = String::from("check,passed,detail\n");
            for c in &report.checks {
                println!(
                    "{} {:<28} {}",
                    if c.passed { "ok  " } else { "FAIL" },
                    c.name,
                    c.detail
                );
                body.push_str(&format!(
                    "{},{},\"{}\"\n",
                    c.name,
                    c.passed,
                    c.detail.replace('"', "'")
                ));
            }
            write(&dir, "selftest.csv", &body)?;
            write(&dir, "manifest.txt", &manifest(&cfg))?;
            println!("{} passed, {} failed", report.passed(), report.failed());
            if report.failed() > 0 {
                return Err(Failure::Run(format!(
                    "{} self-test checks failed",
                    report.failed()
                )));
            }
            return Ok(());
        }
    }
    write(&dir, "manifest.txt", &manifest(&cfg))?;
    Ok(())
}

fn manifest(cfg: &RunConfig) -> String {
    format!(
        "# basin {} run, root seed {}\n{}",
        cfg.experiment.as_str(),
        cfg.root_seed,
        cfg.to_text()
    )
}

fn run_landscape(cfg: &RunConfig, sep: &SeparationConfig, dir: &Path) -> Result<(), Failure> {
    let l = &cfg.landscape;
    match l.kind {
        LandscapeKind::Toy => {
            let spec = if l.toy_spec {
                BasinLossSpec::toy()
            } else {
                sep.spec
            };
            if spec.dim1() != 1 || spec.dim2() != 1 {
                return Err(Failure::Config(
                    "toy landscapes need spec.P1 = spec.P2 = 1 (or landscape.spec = toy)".into(),
                ));
            }
            let d = l.data_point()?;
            let slices = l
                .slices
                .iter()
                .map(|&v| RealVector::new(vec![v]))
                .collect::<Result<Vec<_>, _>>()?;
            let r1 = Range::new(l.theta1_lo, l.theta1_hi, l.theta1_n)?;
            let slice = slice_1d(&spec, &d, &slices, 0, r1)?;
            write(dir, "slice.csv", &csv::grid_csv(&slice))?;
            let mut minima = String::from("theta2,theta1,value\n");
            for (iy, &t2) in slice.y.values.iter().enumerate() {
                let mins = local_minima_1d(slice.row(iy));
                println!("theta2 = {t2}: {} local minima", mins.len());
                for i in mins {
                    println!("  theta1 = {}  loss = {}", slice.x.values[i], slice.get(i, iy));
                    minima.push_str(&format!(
                        "{},{},{}\n",
                        csv::fmt_f64(t2),
                        csv::fmt_f64(slice.x.values[i]),
                        csv::fmt_f64(slice.get(i, iy))
                    ));
                }
            }
            write(dir, "minima.csv", &minima)?;
            let r2 = Range::new(l.theta2_lo, l.theta2_hi, l.theta2_n)?;
            let heat = heatmap_2d(&spec, &d, r1, r2)?;
            write(dir, "heatmap.csv", &csv::grid_csv(&heat))?;
        }
        LandscapeKind::Plane => {
            let mut one = sep.clone();
            one.seeds = l.plane_seed + 1;
            let report = run_separation(&one, cfg.root_seed)?;
            let pick = |arm: &str| {
                report
                    .records
                    .iter()
                    .find(|r| r.arm == arm && r.seed == l.plane_seed as u64)
                    .map(|r| r.final_point.clone())
                    .ok_or_else(|| Failure::Run(format!("missing {arm} record")))
            };
            let (mixed, private) = (pick(ARM_MIXED)?, pick(ARM_PRIVATE)?);
            let (task, _, _) = seed_datasets(sep, "separation", cfg.root_seed, l.plane_seed)?;
            let star = task.theta_star();
            let spec = sep.spec;
            let f = |t: &ParamPoint| {
                spec.population_closed_form(&task, t)?
                    .ok_or(Error::NonFinite("plane point outside the closed-form regime"))
            };
            let grid = interpolation_plane(
                f,
                &star,
                &mixed,
                &private,
                (l.plane_res, l.plane_res),
                l.plane_margin,
            )?;
            write(dir, "plane.csv", &csv::grid_csv(&grid))?;
            let check = basin_check(&grid, &star, &mixed, &private)?;
            let body = format!(
                "level,optimum_and_mixed_connected,private_separated,dist_optimum_mixed,dist_optimum_private\n{},{},{},{},{}\n",
                csv::fmt_f64(check.level),
                check.optimum_and_mixed_connected,
                check.private_separated,
                csv::fmt_f64(check.dist_optimum_mixed),
                csv::fmt_f64(check.dist_optimum_private)
            );
            write(dir, "basin.csv", &body)?;
            println!(
                "same basin: {}  private separated: {}  |theta* - mixed| = {}  |theta* - private| = {}",
                check.optimum_and_mixed_connected,
                check.private_separated,
                check.dist_optimum_mixed,
                check.dist_optimum_private
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::Separation(c) => (ExperimentKind::Separation, c),
        Command::Quadratic(c) => (ExperimentKind::Quadratic, c),
        Command::Schedule(c) => (ExperimentKind::Schedule, c),
        Command::Landscape(c) => (ExperimentKind::Landscape, c),
        Command::Calibrate(c) => (ExperimentKind::Calibrate, c),
        Command::Selftest(c) => (ExperimentKind::Selftest, c),
    };
    match run(kind, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("basin: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("basin: {msg}");
            ExitCode::from(1)
        }
    }
}
