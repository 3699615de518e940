//! Browser bindings: toy-landscape slices and heatmaps, and a single
//! three-arm separation trial.
//!
//! The plain functions are what the wasm exports call; they are kept
//! separate so they can be tested natively.

use basin_core::experiments::{run_separation, SeparationConfig, ARM_MIXED, ARM_PRIVATE, ARM_PUBLIC};
use basin_core::landscape::{heatmap_2d, local_minima_1d, slice_1d, Range};
use basin_core::loss::{BasinLossParams, BasinLossSpec, DataPoint};
use basin_core::vector::RealVector;
use basin_core::Result;
use wasm_bindgen::prelude::*;

fn toy_spec(r: f64) -> Result<BasinLossSpec> {
    BasinLossSpec::new(BasinLossParams {
        radius2: r,
        ..BasinLossParams::toy()
    })
}

fn scalar_point(d1: f64, d2: f64) -> Result<DataPoint> {
    Ok(DataPoint::new(
        RealVector::new(vec![d1])?,
        RealVector::new(vec![d2])?,
    ))
}

/// Toy loss along `theta1 in [-1, 1]` (`n` points) at fixed `theta2`.
pub fn slice(theta2: f64, d1: f64, d2: f64, r: f64, n: usize) -> Result<Vec<f64>> {
    let spec = toy_spec(r)?;
    let g = slice_1d(
        &spec,
        &scalar_point(d1, d2)?,
        &[RealVector::new(vec![theta2])?],
        0,
        Range::new(-1.0, 1.0, n)?,
    )?;
    Ok(g.values)
}

/// Grid indices of the local minima of [`slice`].
pub fn slice_minima(theta2: f64, d1: f64, d2: f64, r: f64, n: usize) -> Result<Vec<u32>> {
    Ok(local_minima_1d(&slice(theta2, d1, d2, r, n)?)
        .into_iter()
        .map(|i| i as u32)
        .collect())
}

/// Toy loss over `[-1, 1] x [d2 - 5r, d2 + 5r]`, `ny` rows of `nx` values.
pub fn heatmap(d1: f64, d2: f64, r: f64, nx: usize, ny: usize) -> Result<Vec<f64>> {
    let spec = toy_spec(r)?;
    let g = heatmap_2d(
        &spec,
        &scalar_point(d1, d2)?,
        Range::new(-1.0, 1.0, nx)?,
        Range::new(d2 - 5.0 * r, d2 + 5.0 * r, ny)?,
    )?;
    Ok(g.values)
}

/// Median excess risk of `[public_only, private_only, mixed]` over `seeds`
/// desk-scaled seeds at base scale `p`.
pub fn separation(p: usize, epsilon: f64, seeds: usize, root_seed: u64) -> Result<Vec<f64>> {
    let mut cfg = SeparationConfig::desk_for(p)?;
    cfg.dp.epsilon = epsilon;
    cfg.seeds = seeds;
    let report = run_separation(&cfg, root_seed)?;
    Ok([ARM_PUBLIC, ARM_PRIVATE, ARM_MIXED]
        .iter()
        .map(|a| report.median(a))
        .collect())
}

fn js(e: basin_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn toy_slice(theta2: f64, d1: f64, d2: f64, r: f64, n: usize) -> std::result::Result<Vec<f64>, JsError> {
    slice(theta2, d1, d2, r, n).map_err(js)
}

#[wasm_bindgen]
pub fn toy_slice_minima(
    theta2: f64,
    d1: f64,
    d2: f64,
    r: f64,
    n: usize,
) -> std::result::Result<Vec<u32>, JsError> {
    slice_minima(theta2, d1, d2, r, n).map_err(js)
}

#[wasm_bindgen]
pub fn toy_heatmap(d1: f64, d2: f64, r: f64, nx: usize, ny: usize) -> std::result::Result<Vec<f64>, JsError> {
    heatmap(d1, d2, r, nx, ny).map_err(js)
}

#[wasm_bindgen]
pub fn separation_trial(
    p: usize,
    epsilon: f64,
    seeds: usize,
    root_seed: u64,
) -> std::result::Result<Vec<f64>, JsError> {
    separation(p, epsilon, seeds, root_seed).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_slice_has_two_wells() {
        let mins = slice_minima(0.005, 0.5, 0.005, 0.01, 401).unwrap();
        assert_eq!(mins, vec![120, 300]);
        let v = slice(0.005, 0.5, 0.005, 0.01, 401).unwrap();
        assert!((v[300] + 4.5).abs() < 1e-12);
    }

    #[test]
    fn heatmap_shape() {
        assert_eq!(heatmap(0.5, 0.005, 0.01, 30, 20).unwrap().len(), 600);
        assert!(heatmap(0.5, 0.005, 0.01, 0, 20).is_err());
    }

    #[test]
    fn separation_orders_arms() {
        let m = separation(2, 1.0, 3, 0).unwrap();
        assert!(m[2] < m[0] && m[2] < m[1], "{m:?}");
    }
}
