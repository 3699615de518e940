//! Grid evaluators for looking at the loss: 1-D slices and 2-D heatmaps of
//! the toy loss, interpolation planes through three parameter points, and
//! sublevel-set connectivity on those grids.

use std::collections::VecDeque;

use crate::experiments::map_indexed;
use crate::loss::{BasinLossSpec, BlockLoss, DataPoint, ParamPoint};
use crate::vector::{dist_sq, RealVector};
use crate::{Error, Result};

/// `n` evenly spaced points from `lo` to `hi` inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Range {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("range", "needs at least one point"));
        }
        if !lo.is_finite() || !hi.is_finite() || hi < lo || (n > 1 && hi == lo) {
            return Err(Error::param("range", format!("empty range [{lo}, {hi}]")));
        }
        Ok(Range { lo, hi, n })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let span = self.hi - self.lo;
        (0..self.n)
            .map(|i| {
                if i == self.n - 1 {
                    self.hi
                } else {
                    self.lo + span * i as f64 / (self.n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    fn new(name: &str, values: Vec<f64>) -> Self {
        Axis {
            name: name.to_string(),
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the value closest to `x`.
    pub fn nearest(&self, x: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if (v - x).abs() < (self.values[best] - x).abs() {
                best = i;
            }
        }
        best
    }
}

/// Values on the product of two axes, stored with `y` outer and `x` inner:
/// `values[iy * nx + ix]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub x: Axis,
    pub y: Axis,
    pub values: Vec<f64>,
    /// Free-form `(key, value)` pairs describing what was evaluated.
    pub metadata: Vec<(String, String)>,
}

impl GridResult {
    fn build(x: Axis, y: Axis, values: Vec<f64>, metadata: Vec<(String, String)>) -> Result<Self> {
        if values.len() != x.len() * y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len() * y.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("grid value"));
        }
        Ok(GridResult {
            x,
            y,
            values,
            metadata,
        })
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.x.len() + ix]
    }

    /// Row `iy` as a slice over `x`.
    pub fn row(&self, iy: usize) -> &[f64] {
        let nx = self.x.len();
        &self.values[iy * nx..(iy + 1) * nx]
    }

    /// `(ix, iy)` of the smallest value.
    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(k, _)| k);
        (k % self.x.len(), k / self.x.len())
    }
}

fn scalar(v: f64) -> RealVector {
    RealVector::new(vec![v]).expect("finite grid coordinate")
}

/// Composite loss along `theta1 = s * e_axis` for each fixed `theta2`.
/// The `y` axis holds the first coordinate of each fixed `theta2`.
pub fn slice_1d(
    spec: &BasinLossSpec,
    d: &DataPoint,
    theta2_fixed: &[RealVector],
    axis: usize,
    range1: Range,
) -> Result<GridResult> {
    if theta2_fixed.is_empty() {
        return Err(Error::param("theta2_fixed", "needs at least one slice"));
    }
    if axis >= spec.dim1() {
        return Err(Error::param("axis", format!("must be < {}", spec.dim1())));
    }
    let xs = range1.points();
    let mut values = Vec::with_capacity(xs.len() * theta2_fixed.len());
    for t2 in theta2_fixed {
        for &s in &xs {
            let theta = ParamPoint::new(RealVector::basis(spec.dim1(), axis, s), t2.clone());
            values.push(spec.value(&theta, d)?);
        }
    }
    let ys = theta2_fixed
        .iter()
        .map(|t| t.as_slice().first().copied().unwrap_or(0.0))
        .collect();
    GridResult::build(
        Axis::new("theta1", xs),
        Axis::new("theta2", ys),
        values,
        vec![("kind".into(), "slice".into()), ("axis".into(), axis.to_string())],
    )
}

/// Composite loss over a `theta1 x theta2` grid; 1-D blocks only.
pub fn heatmap_2d(spec: &BasinLossSpec, d: &DataPoint, range1: Range, range2: Range) -> Result<GridResult> {
    if spec.dim1() != 1 || spec.dim2() != 1 {
        return Err(Error::param("spec", "heatmaps need one-dimensional blocks"));
    }
    let (xs, ys) = (range1.points(), range2.points());
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for &b in &ys {
        for &a in &xs {
            values.push(spec.value(&ParamPoint::new(scalar(a), scalar(b)), d)?);
        }
    }
    GridResult::build(
        Axis::new("theta1", xs),
        Axis::new("theta2", ys),
        values,
        vec![("kind".into(), "heatmap".into())],
    )
}

/// `a + u (b - a) + v (c - a)`; the three corners are returned verbatim.
pub fn plane_point(a: &ParamPoint, b: &ParamPoint, c: &ParamPoint, u: f64, v: f64) -> Result<ParamPoint> {
    match (u, v) {
        (0.0, 0.0) => return Ok(a.clone()),
        (1.0, 0.0) => return Ok(b.clone()),
        (0.0, 1.0) => return Ok(c.clone()),
        _ => {}
    }
    let mix = |x: &RealVector, y: &RealVector, z: &RealVector| {
        RealVector::new(
            x.iter()
                .zip(y.iter())
                .zip(z.iter())
                .map(|((p, q), r)| p + u * (q - p) + v * (r - p))
                .collect(),
        )
    };
    Ok(ParamPoint::new(
        mix(&a.theta1, &b.theta1, &c.theta1)?,
        mix(&a.theta2, &b.theta2, &c.theta2)?,
    ))
}

/// Plane coordinates: `res - 1` cells span `[0, 1]`, with `margin` extra
/// cells on each side. 0 and 1 are hit exactly.
fn plane_axis(res: usize, margin: usize) -> Vec<f64> {
    let denom = (res - 1) as f64;
    (0..res + 2 * margin)
        .map(|i| (i as f64 - margin as f64) / denom)
        .collect()
}

/// Evaluates `loss_at` on the plane through `a`, `b`, `c` at
/// `theta(u, v) = a + u (b - a) + v (c - a)`.
pub fn interpolation_plane<F>(
    loss_at: F,
    a: &ParamPoint,
    b: &ParamPoint,
    c: &ParamPoint,
    res: (usize, usize),
    margin_cells: usize,
) -> Result<GridResult>
where
    F: Fn(&ParamPoint) -> Result<f64> + Sync + Send,
{
    let (d1, d2) = a.dims();
    b.check_dims(d1, d2)?;
    c.check_dims(d1, d2)?;
    if res.0 < 2 || res.1 < 2 {
        return Err(Error::param("res", "needs at least two points per axis"));
    }
    let us = plane_axis(res.0, margin_cells);
    let vs = plane_axis(res.1, margin_cells);
    let rows = map_indexed(vs.len(), |iy| {
        us.iter()
            .map(|&u| loss_at(&plane_point(a, b, c, u, vs[iy])?))
            .collect::<Result<Vec<f64>>>()
    })?;
    GridResult::build(
        Axis::new("u", us),
        Axis::new("v", vs),
        rows.into_iter().flatten().collect(),
        vec![
            ("kind".into(), "plane".into()),
            ("margin_cells".into(), margin_cells.to_string()),
        ],
    )
}

/// Component labels of `{cell : value <= level}` under 4-adjacency; `None`
/// for cells above the level.
pub fn sublevel_components(grid: &GridResult, level: f64) -> Vec<Option<usize>> {
    let (nx, ny) = (grid.x.len(), grid.y.len());
    let mut label = vec![None; nx * ny];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..nx * ny {
        if label[start].is_some() || grid.values[start] > level {
            continue;
        }
        label[start] = Some(next);
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            let (ix, iy) = (k % nx, k / nx);
            let mut visit = |j: usize| {
                if label[j].is_none() && grid.values[j] <= level {
                    label[j] = Some(next);
                    queue.push_back(j);
                }
            };
            if ix > 0 {
                visit(k - 1);
            }
            if ix + 1 < nx {
                visit(k + 1);
            }
            if iy > 0 {
                visit(k - nx);
            }
            if iy + 1 < ny {
                visit(k + nx);
            }
        }
        next += 1;
    }
    label
}

/// Whether two cells lie in the same component of the sublevel set.
pub fn same_basin(grid: &GridResult, level: f64, a: (usize, usize), b: (usize, usize)) -> bool {
    let labels = sublevel_components(grid, level);
    let nx = grid.x.len();
    match (labels[a.1 * nx + a.0], labels[b.1 * nx + b.0]) {
        (Some(x), Some(y)) => x == y,
        _ => false,
    }
}

/// Indices of strict local minima of a sequence. A run of equal values
/// counts once (at its first index) when both outside neighbours are higher;
/// endpoints need only their single neighbour to be higher.
pub fn local_minima_1d(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = values.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[j + 1] == values[i] {
            j += 1;
        }
        let left_ok = i == 0 || values[i - 1] > values[i];
        let right_ok = j == n - 1 || values[j + 1] > values[i];
        if left_ok && right_ok && (i > 0 || j < n - 1) {
            out.push(i);
        }
        i = j + 1;
    }
    out
}

/// Symmetric matrix of Euclidean distances over both blocks.
pub fn pairwise_distances(points: &[ParamPoint]) -> Result<Vec<Vec<f64>>> {
    if points.len() < 2 {
        return Err(Error::param("points", "need at least two"));
    }
    let (a, b) = points[0].dims();
    for p in points {
        p.check_dims(a, b)?;
    }
    let n = points.len();
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = (dist_sq(points[i].theta1.as_slice(), points[j].theta1.as_slice())
                + dist_sq(points[i].theta2.as_slice(), points[j].theta2.as_slice()))
            .sqrt();
            m[i][j] = d;
            m[j][i] = d;
        }
    }
    Ok(m)
}

/// Outcome of the basin test on the plane through
/// `(theta*, mixed output, private-only output)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasinCheck {
    /// Sublevel threshold: the loss at the mixed output.
    pub level: f64,
    pub optimum_and_mixed_connected: bool,
    /// The private-only corner lies outside the optimum's component.
    pub private_separated: bool,
    pub dist_optimum_mixed: f64,
    pub dist_optimum_private: f64,
}

/// Runs the basin test on a plane built with corners `a = theta*`,
/// `b = mixed`, `c = private-only` (see [`interpolation_plane`]).
pub fn basin_check(grid: &GridResult, a: &ParamPoint, b: &ParamPoint, c: &ParamPoint) -> Result<BasinCheck> {
    let margin: usize = grid
        .metadata
        .iter()
        .find(|(k, _)| k == "margin_cells")
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::param("grid", "not an interpolation plane"))?;
    let nx = grid.x.len();
    let corner_a = (margin, margin);
    let corner_b = (nx - 1 - margin, margin);
    let corner_c = (margin, grid.y.len() - 1 - margin);
    let level = grid.get(corner_b.0, corner_b.1);
    let labels = sublevel_components(grid, level);
    let at = |(ix, iy): (usize, usize)| labels[iy * nx + ix];
    let d = pairwise_distances(&[a.clone(), b.clone(), c.clone()])?;
    Ok(BasinCheck {
        level,
        optimum_and_mixed_connected: at(corner_a).is_some() && at(corner_a) == at(corner_b),
        private_separated: at(corner_c).is_none() || at(corner_c) != at(corner_a),
        dist_optimum_mixed: d[0][1],
        dist_optimum_private: d[0][2],
    })
}
