//! Dense real vectors and the two Euclidean projections everything else
//! builds on: onto a centered ball and onto a centered annulus.

use std::ops::Index;

use crate::{Error, Result};

/// A fixed-dimension vector whose entries are always finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector entries"));
        }
        Ok(RealVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        RealVector(vec![0.0; dim])
    }

    /// `scale * e_axis` in `dim` dimensions.
    pub fn basis(dim: usize, axis: usize, scale: f64) -> Self {
        let mut v = vec![0.0; dim];
        v[axis] = scale;
        RealVector(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, other: &RealVector) -> Result<f64> {
        other.check_dim(self.dim())?;
        Ok(dot(&self.0, &other.0))
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn scale(&self, factor: f64) -> Result<RealVector> {
        RealVector::new(self.0.iter().map(|x| x * factor).collect())
    }

    pub fn add(&self, other: &RealVector) -> Result<RealVector> {
        other.check_dim(self.dim())?;
        RealVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &RealVector) -> Result<RealVector> {
        other.check_dim(self.dim())?;
        RealVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &RealVector) -> Result<RealVector> {
        other.check_dim(self.dim())?;
        RealVector::new(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn distance(&self, other: &RealVector) -> Result<f64> {
        other.check_dim(self.dim())?;
        Ok(dist_sq(&self.0, &other.0).sqrt())
    }
}

impl Index<usize> for RealVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        RealVector::new(values)
    }
}

// Slice kernels used by the optimizer hot loops.

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

#[inline]
pub fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// In-place projection onto the closed ball of `radius` around the origin.
pub fn project_ball_in_place(v: &mut [f64], radius: f64) {
    let n = norm(v);
    if n > radius {
        let s = radius / n;
        v.iter_mut().for_each(|x| *x *= s);
    }
}

/// Nearest point of the closed ball `B(0, radius)`.
pub fn project_ball(v: &RealVector, radius: f64) -> Result<RealVector> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    let mut out = v.0.clone();
    project_ball_in_place(&mut out, radius);
    Ok(RealVector(out))
}

/// The closed annulus `{x : M - R1 <= |x| <= M + R1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Annulus {
    center_radius: f64,
    half_width: f64,
}

impl Annulus {
    pub fn new(center_radius: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::param("R1", format!("must be positive, got {half_width}")));
        }
        if !(center_radius > half_width) || !center_radius.is_finite() {
            return Err(Error::param(
                "R1",
                format!("must be < M (R1 = {half_width}, M = {center_radius})"),
            ));
        }
        Ok(Annulus {
            center_radius,
            half_width,
        })
    }

    pub fn inner(&self) -> f64 {
        self.center_radius - self.half_width
    }

    pub fn outer(&self) -> f64 {
        self.center_radius + self.half_width
    }

    /// Euclidean distance from a point of norm `n` to the annulus.
    #[inline]
    pub fn distance_for_norm(&self, n: f64) -> f64 {
        if n < self.inner() {
            self.inner() - n
        } else if n > self.outer() {
            n - self.outer()
        } else {
            0.0
        }
    }

    pub fn distance(&self, v: &[f64]) -> f64 {
        self.distance_for_norm(norm(v))
    }

    pub fn contains(&self, v: &[f64]) -> bool {
        self.distance(v) == 0.0
    }

    /// Distance from `v` to the annulus boundary when `v` is inside, negative
    /// distance-to-annulus otherwise.
    pub fn margin(&self, v: &[f64]) -> f64 {
        let n = norm(v);
        if n < self.inner() || n > self.outer() {
            -self.distance_for_norm(n)
        } else {
            (n - self.inner()).min(self.outer() - n)
        }
    }

    /// In-place Euclidean projection. The origin maps to `inner * e_1`.
    pub fn project_in_place(&self, v: &mut [f64]) {
        let n = norm(v);
        if n == 0.0 {
            if let Some(first) = v.first_mut() {
                *first = self.inner();
            }
            return;
        }
        let target = n.clamp(self.inner(), self.outer());
        if target != n {
            let s = target / n;
            v.iter_mut().for_each(|x| *x *= s);
        }
    }

    pub fn project(&self, v: &RealVector) -> RealVector {
        let mut out = v.0.clone();
        self.project_in_place(&mut out);
        RealVector(out)
    }
}

/// Nearest point of the annulus `B(0, M + R1) \ B(0, M - R1)`.
pub fn project_annulus(v: &RealVector, m: f64, r1: f64) -> Result<RealVector> {
    Ok(Annulus::new(m, r1)?.project(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rv(v: &[f64]) -> RealVector {
        RealVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        assert!(RealVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(RealVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn ball_examples() {
        let inside = rv(&[0.3, 0.4]);
        assert_eq!(project_ball(&inside, 1.0).unwrap(), inside);
        let p = project_ball(&rv(&[3.0, 4.0]), 1.0).unwrap();
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let z = RealVector::zeros(3);
        assert_eq!(project_ball(&z, 0.25).unwrap(), z);
        assert!(project_ball(&z, 0.0).is_err());
    }

    #[test]
    fn annulus_examples() {
        let p = project_annulus(&rv(&[0.3]), 0.5, 0.1).unwrap();
        assert!((p[0] - 0.4).abs() < 1e-15);
        let p = project_annulus(&rv(&[-0.3]), 0.5, 0.1).unwrap();
        assert!((p[0] + 0.4).abs() < 1e-15);

        let v = rv(&[1.2, 1.6]); // norm 2
        let p = project_annulus(&v, 0.5, 0.1).unwrap();
        let expect = v.scale(0.6 / 2.0).unwrap();
        assert!(p.distance(&expect).unwrap() < 1e-15);

        let on = rv(&[0.3, 0.4]); // norm 0.5
        assert_eq!(project_annulus(&on, 0.5, 0.1).unwrap(), on);

        let origin = project_annulus(&RealVector::zeros(3), 0.5, 0.1).unwrap();
        assert_eq!(origin.as_slice(), &[0.4, 0.0, 0.0]);
    }

    #[test]
    fn annulus_rejects_wide_half_width() {
        assert!(Annulus::new(0.5, 0.5).is_err());
        assert!(Annulus::new(0.5, 0.6).is_err());
        assert!(Annulus::new(0.5, 0.0).is_err());
    }

    #[test]
    fn annulus_projection_is_optimal_on_dense_grid() {
        let a = Annulus::new(0.5, 0.1).unwrap();
        // 1-D: S = [-0.6, -0.4] ∪ [0.4, 0.6]
        let grid_1d: Vec<f64> = (0..=2000)
            .map(|i| -0.6 + 1.2 * i as f64 / 2000.0)
            .filter(|x| a.contains(&[*x]))
            .collect();
        for i in 0..200 {
            let x = -1.5 + 3.0 * (i as f64 + 0.37) / 200.0;
            let p = a.project(&rv(&[x]));
            let d = (x - p[0]).abs();
            for s in &grid_1d {
                assert!(d <= (x - s).abs() + 1e-12);
            }
        }
        // 2-D: polar grid over S
        let mut grid_2d = Vec::new();
        for i in 0..=40 {
            let rad = 0.4 + 0.2 * i as f64 / 40.0;
            for k in 0..360 {
                let th = k as f64 * std::f64::consts::TAU / 360.0;
                grid_2d.push([rad * th.cos(), rad * th.sin()]);
            }
        }
        for i in 0..60 {
            let th = 0.61 * i as f64;
            let rad = 0.05 + 0.02 * i as f64;
            let v = [rad * th.cos(), rad * th.sin()];
            let p = a.project(&rv(&v));
            let d = dist_sq(&v, p.as_slice()).sqrt();
            for s in &grid_2d {
                assert!(d <= dist_sq(&v, s).sqrt() + 1e-12);
            }
        }
    }

    fn vec_strategy(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, dim)
    }

    proptest! {
        #[test]
        fn projections_are_idempotent(v in vec_strategy(4), radius in 0.01f64..2.0) {
            let v = rv(&v);
            let once = project_ball(&v, radius).unwrap();
            let twice = project_ball(&once, radius).unwrap();
            prop_assert!(once.distance(&twice).unwrap() <= 1e-15);

            let a = Annulus::new(0.5, 0.25).unwrap();
            let once = a.project(&v);
            let twice = a.project(&once);
            prop_assert!(once.distance(&twice).unwrap() <= 1e-15);
            prop_assert!(a.distance(once.as_slice()) <= 1e-15);
        }

        #[test]
        fn ball_projection_is_nonexpansive(x in vec_strategy(5), y in vec_strategy(5), radius in 0.01f64..2.0) {
            let (x, y) = (rv(&x), rv(&y));
            let px = project_ball(&x, radius).unwrap();
            let py = project_ball(&y, radius).unwrap();
            prop_assert!(px.distance(&py).unwrap() <= x.distance(&y).unwrap() + 1e-12);
        }
    }
}
