//! CSV output. Every table has a header row; floats use the shortest
//! decimal string that parses back to the same `f64`.

use std::fmt::Write;

use crate::distributions::{DataSource, Dataset};
use crate::experiments::{CalibrationReport, ExperimentReport};
use crate::landscape::GridResult;

/// Shortest round-trip decimal form (at most 17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub const RECORDS_HEADER: &str =
    "experiment,mode,seed,arm,excess_risk,evaluator,basin_hit,block1_final_norm,block2_dist_to_mu2";
pub const SUMMARY_HEADER: &str = "arm,median,q25,q75,n";

pub fn records_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(RECORDS_HEADER);
    out.push('\n');
    for r in &report.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.experiment,
            r.mode.as_str(),
            r.seed,
            r.arm,
            fmt_f64(r.excess_risk),
            r.evaluator.as_str(),
            r.basin_hit,
            fmt_f64(r.block1_final_norm),
            fmt_f64(r.block2_dist_to_mu2),
        );
    }
    out
}

pub fn summary_csv(report: &ExperimentReport) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in report.summary() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            s.arm,
            fmt_f64(s.median),
            fmt_f64(s.q25),
            fmt_f64(s.q75),
            s.n
        );
    }
    out
}

/// `x, y, value` rows in storage order (`y` outer).
pub fn grid_csv(grid: &GridResult) -> String {
    let mut out = format!("{},{},value\n", grid.x.name, grid.y.name);
    for (iy, &y) in grid.y.values.iter().enumerate() {
        for (ix, &x) in grid.x.values.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(grid.get(ix, iy)));
        }
    }
    out
}

pub fn calibration_csv(report: &CalibrationReport) -> String {
    let mut out = String::from("n_pub,trials,landed,rate,margin_fraction,max_mean_error,max_block2_abs\n");
    for r in &report.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n_pub,
            r.trials,
            r.landed,
            fmt_f64(r.rate),
            fmt_f64(report.margin_fraction),
            fmt_f64(r.max_mean_error),
            fmt_f64(r.max_block2_abs)
        );
    }
    out
}

/// Header for [`dataset_rows`] with `dim2` second-block columns.
pub fn dataset_header(dim2: usize) -> String {
    let mut h = String::from("seed,source,index,d1_norm");
    for j in 0..dim2 {
        let _ = write!(h, ",d2_{j}");
    }
    h.push('\n');
    h
}

/// One row per data point: norm of the first block and every coordinate
/// of the second.
pub fn dataset_rows(seed: usize, data: &Dataset) -> String {
    let source = match data.source() {
        DataSource::Public => "public",
        DataSource::Private => "private",
    };
    let mut out = String::new();
    for (i, d) in data.points().iter().enumerate() {
        let _ = write!(out, "{seed},{source},{i},{}", fmt_f64(d.d1.norm()));
        for x in d.d2.iter() {
            let _ = write!(out, ",{}", fmt_f64(*x));
        }
        out.push('\n');
    }
    out
}
