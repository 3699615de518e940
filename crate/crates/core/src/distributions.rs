//! Sampleable hard instances and the public/private task pairs built from
//! them.
//!
//! The mean-estimation family is a biased radial sign vector: every draw has
//! coordinates `±scale/sqrt(dim)`, so it lies exactly on the sphere of radius
//! `scale`, and coordinate `i` is positive with probability
//! `(1 + mu_i sqrt(dim) / scale) / 2`, which makes its expectation `mu_i`.

use crate::loss::{BasinLossSpec, DataPoint, ParamPoint};
use crate::rng::RngStream;
use crate::vector::{norm, RealVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SignMeanDistribution {
    mean: RealVector,
    scale: f64,
    magnitude: f64,
    p_plus: Vec<f64>,
}

impl SignMeanDistribution {
    pub fn new(mean: RealVector, scale: f64) -> Result<Self> {
        if mean.dim() == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::param("scale", format!("must be positive, got {scale}")));
        }
        let magnitude = scale / (mean.dim() as f64).sqrt();
        let tol = magnitude * 1e-12;
        if mean.iter().any(|m| m.abs() > magnitude + tol) {
            return Err(Error::param(
                "mean",
                format!("every coordinate must satisfy |mu_i| <= scale/sqrt(dim) = {magnitude}"),
            ));
        }
        let p_plus = mean
            .iter()
            .map(|m| (0.5 * (1.0 + m / magnitude)).clamp(0.0, 1.0))
            .collect();
        Ok(SignMeanDistribution {
            mean,
            scale,
            magnitude,
            p_plus,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    pub fn mean(&self) -> &RealVector {
        &self.mean
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Probability that coordinate `i` is positive.
    pub fn p_plus(&self, i: usize) -> f64 {
        self.p_plus[i]
    }

    fn sample_into(&self, stream: &mut RngStream, out: &mut [f64]) {
        for (o, &pp) in out.iter_mut().zip(&self.p_plus) {
            *o = if stream.uniform() < pp {
                self.magnitude
            } else {
                -self.magnitude
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    point: RealVector,
}

impl PointMass {
    pub fn new(point: RealVector) -> Self {
        PointMass { point }
    }

    pub fn origin(dim: usize) -> Self {
        PointMass {
            point: RealVector::zeros(dim),
        }
    }

    pub fn point(&self) -> &RealVector {
        &self.point
    }
}

/// One block of a product distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    SignMean(SignMeanDistribution),
    Point(PointMass),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::SignMean(d) => d.dim(),
            Factor::Point(p) => p.point.dim(),
        }
    }

    pub fn mean(&self) -> &RealVector {
        match self {
            Factor::SignMean(d) => &d.mean,
            Factor::Point(p) => &p.point,
        }
    }

    /// Radius of the smallest centered ball containing every draw.
    pub fn support_radius(&self) -> f64 {
        match self {
            Factor::SignMean(d) => d.scale,
            Factor::Point(p) => p.point.norm(),
        }
    }

    /// `E|d - mean|^2`; exact since sign-family draws have norm `scale`.
    pub fn spread(&self) -> f64 {
        match self {
            Factor::SignMean(d) => (d.scale * d.scale - norm_sq_of(&d.mean)).max(0.0),
            Factor::Point(_) => 0.0,
        }
    }

    pub fn sample_into(&self, stream: &mut RngStream, out: &mut [f64]) {
        match self {
            Factor::SignMean(d) => d.sample_into(stream, out),
            Factor::Point(p) => out.copy_from_slice(p.point.as_slice()),
        }
    }

    pub fn sample_one(&self, stream: &mut RngStream) -> RealVector {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(stream, &mut out);
        RealVector::new(out).expect("draws are finite")
    }

    /// `n` independent draws.
    pub fn sample(&self, stream: &mut RngStream, n: usize) -> Result<Vec<RealVector>> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        Ok((0..n).map(|_| self.sample_one(stream)).collect())
    }
}

fn norm_sq_of(v: &RealVector) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// Mean `±M/sqrt(dim)` per coordinate (random signs), unit-sphere support.
pub fn make_private_hard_instance(
    dim: usize,
    m: f64,
    stream: &mut RngStream,
) -> Result<SignMeanDistribution> {
    if !(m > 0.0) || m > 1.0 {
        return Err(Error::param("M", format!("must lie in (0, 1], got {m}")));
    }
    random_sign_instance(dim, m, 1.0, stream)
}

/// Support on the sphere of radius `r`, mean of norm `rho * r`.
pub fn make_public_hard_instance(
    dim: usize,
    r: f64,
    rho: f64,
    stream: &mut RngStream,
) -> Result<SignMeanDistribution> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::param("rho", format!("must lie in [0, 1], got {rho}")));
    }
    random_sign_instance(dim, rho * r, r, stream)
}

fn random_sign_instance(
    dim: usize,
    mean_norm: f64,
    scale: f64,
    stream: &mut RngStream,
) -> Result<SignMeanDistribution> {
    if dim == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    let c = mean_norm / (dim as f64).sqrt();
    let mean = (0..dim).map(|_| if stream.coin() { c } else { -c }).collect();
    SignMeanDistribution::new(RealVector::new(mean)?, scale)
}

/// Draw `n` times from `dist`.
pub fn sample(dist: &Factor, stream: &mut RngStream, n: usize) -> Result<Vec<RealVector>> {
    dist.sample(stream, n)
}

/// Independent product over the two blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductDistribution {
    pub first: Factor,
    pub second: Factor,
}

impl ProductDistribution {
    pub fn sample_one(&self, stream: &mut RngStream) -> DataPoint {
        let d1 = self.first.sample_one(stream);
        let d2 = self.second.sample_one(stream);
        DataPoint::new(d1, d2)
    }

    pub fn sample(&self, stream: &mut RngStream, n: usize) -> Result<Vec<DataPoint>> {
        if n == 0 {
            return Err(Error::param("n", "must be positive"));
        }
        Ok((0..n).map(|_| self.sample_one(stream)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskMode {
    /// Public and private data share one distribution.
    Id,
    /// Public second block is a point mass at the origin.
    Ood,
}

impl TaskMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskMode::Id => "id",
            TaskMode::Ood => "ood",
        }
    }
}

impl std::str::FromStr for TaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "id" => Ok(TaskMode::Id),
            "ood" => Ok(TaskMode::Ood),
            other => Err(Error::Config(format!(
                "unknown mode `{other}` (expected id or ood)"
            ))),
        }
    }
}

/// Which side of the privacy boundary a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Public,
    Private,
}

/// A sampled dataset tagged with its source.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    source: DataSource,
    points: Vec<DataPoint>,
}

impl Dataset {
    pub fn new(source: DataSource, points: Vec<DataPoint>) -> Self {
        Dataset { source, points }
    }

    pub fn source(&self) -> DataSource {
        self.source
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fails unless the dataset carries the `expected` tag.
    pub fn require(&self, expected: DataSource, consumer: &str) -> Result<&[DataPoint]> {
        if self.source != expected {
            return Err(Error::InformationFlow(format!(
                "{consumer} expects {expected:?} data but was given {:?} data",
                self.source
            )));
        }
        Ok(&self.points)
    }

    /// Mean of the first blocks.
    pub fn mean_d1(&self) -> Result<RealVector> {
        let first = self
            .points
            .first()
            .ok_or_else(|| Error::param("dataset", "empty"))?;
        let mut acc = vec![0.0; first.d1.dim()];
        for d in &self.points {
            for (a, x) in acc.iter_mut().zip(d.d1.iter()) {
                *a += x;
            }
        }
        let n = self.points.len() as f64;
        RealVector::new(acc.into_iter().map(|a| a / n).collect())
    }
}

/// A public/private pair of data distributions plus the population
/// minimizer `(mu1, mu2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub mode: TaskMode,
    pub dim1: usize,
    pub dim2: usize,
    pub basin_radius: f64,
    pub radius2: f64,
    pub rho: f64,
    pub public: ProductDistribution,
    pub private: ProductDistribution,
    pub mu1: RealVector,
    pub mu2: RealVector,
}

impl TaskInstance {
    pub fn theta_star(&self) -> ParamPoint {
        ParamPoint::new(self.mu1.clone(), self.mu2.clone())
    }

    pub fn check_dims(&self, dim1: usize, dim2: usize) -> Result<()> {
        self.mu1.check_dim(dim1)?;
        self.mu2.check_dim(dim2)
    }

    pub fn sample_public(&self, stream: &mut RngStream, n: usize) -> Result<Dataset> {
        Ok(Dataset::new(DataSource::Public, self.public.sample(stream, n)?))
    }

    pub fn sample_private(&self, stream: &mut RngStream, n: usize) -> Result<Dataset> {
        Ok(Dataset::new(DataSource::Private, self.private.sample(stream, n)?))
    }
}

/// Builds the task for a basin spec: private first block with `|mu1| = M`,
/// second block of radius `r` with `|mu2| = rho r`.
pub fn make_task(
    spec: &BasinLossSpec,
    mode: TaskMode,
    rho: f64,
    stream: &mut RngStream,
) -> Result<TaskInstance> {
    make_task_with_dims(
        spec.dim1(),
        spec.dim2(),
        spec.basin_radius(),
        spec.radius2(),
        mode,
        rho,
        stream,
    )
}

/// As [`make_task`] with the constants given directly.
pub fn make_task_with_dims(
    dim1: usize,
    dim2: usize,
    basin_radius: f64,
    radius2: f64,
    mode: TaskMode,
    rho: f64,
    stream: &mut RngStream,
) -> Result<TaskInstance> {
    let first = make_private_hard_instance(dim1, basin_radius, &mut stream.child("d1"))?;
    let second = make_public_hard_instance(dim2, radius2, rho, &mut stream.child("d2"))?;
    let mu1 = first.mean().clone();
    let mu2 = second.mean().clone();
    let private = ProductDistribution {
        first: Factor::SignMean(first),
        second: Factor::SignMean(second),
    };
    let public = match mode {
        TaskMode::Id => private.clone(),
        TaskMode::Ood => ProductDistribution {
            first: private.first.clone(),
            second: Factor::Point(PointMass::origin(dim2)),
        },
    };
    debug_assert!((norm(mu1.as_slice()) - basin_radius).abs() <= 1e-12);
    Ok(TaskInstance {
        mode,
        dim1,
        dim2,
        basin_radius,
        radius2,
        rho,
        public,
        private,
        mu1,
        mu2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream;

    #[test]
    fn private_instance_shape() {
        let mut s = stream!(3, "priv");
        let d = make_private_hard_instance(64, 0.5, &mut s).unwrap();
        assert!((d.mean().norm() - 0.5).abs() < 1e-14);
        for x in d.mean().iter() {
            assert!((x.abs() - 0.5 / 8.0).abs() < 1e-15);
        }
        let f = Factor::SignMean(d);
        for v in f.sample(&mut s, 200).unwrap() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
        assert!(make_private_hard_instance(4, 1.2, &mut s).is_err());
    }

    #[test]
    fn coordinate_expectation_identity() {
        let mean = RealVector::new(vec![0.3, -0.1, 0.0, 0.5]).unwrap();
        let d = SignMeanDistribution::new(mean.clone(), 1.0).unwrap();
        let mag = 0.5;
        for i in 0..4 {
            let e = (2.0 * d.p_plus(i) - 1.0) * mag;
            assert!((e - mean[i]).abs() < 1e-15);
        }
        assert!(SignMeanDistribution::new(RealVector::new(vec![0.6, 0.0, 0.0, 0.0]).unwrap(), 1.0).is_err());
    }

    #[test]
    fn public_instance_norm() {
        let mut s = stream!(3, "pub");
        let d = make_public_hard_instance(4, 0.01, 0.5, &mut s).unwrap();
        assert!((d.mean().norm() - 0.005).abs() < 1e-17);
        let f = Factor::SignMean(d);
        for v in f.sample(&mut s, 100).unwrap() {
            assert!((v.norm() - 0.01).abs() < 1e-16);
        }
    }

    #[test]
    fn point_mass_samples() {
        let f = Factor::Point(PointMass::origin(3));
        let v = f.sample(&mut stream!(1, "pm"), 3).unwrap();
        assert_eq!(v.len(), 3);
        assert!(v.iter().all(|x| x.iter().all(|&c| c == 0.0)));
        assert!(f.sample(&mut stream!(1, "pm"), 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = BasinLossSpec::desk();
        let task = make_task(&spec, TaskMode::Id, 0.5, &mut stream!(11, "task")).unwrap();
        let a = task.sample_private(&mut stream!(11, "data"), 20).unwrap();
        let b = task.sample_private(&mut stream!(11, "data"), 20).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn task_modes() {
        let spec = BasinLossSpec::desk();
        let id = make_task(&spec, TaskMode::Id, 0.5, &mut stream!(2, "t")).unwrap();
        assert_eq!(id.public, id.private);
        assert!((id.mu1.norm() - 0.5).abs() < 1e-14);
        assert!((id.mu2.norm() - 0.5e-3).abs() < 1e-17);
        assert_eq!(id.theta_star(), ParamPoint::new(id.mu1.clone(), id.mu2.clone()));

        let ood = make_task(&spec, TaskMode::Ood, 0.5, &mut stream!(2, "t")).unwrap();
        assert_eq!(ood.private, id.private);
        let pubdata = ood.sample_public(&mut stream!(2, "p"), 50).unwrap();
        assert!(pubdata.points().iter().all(|d| d.d2.iter().all(|&x| x == 0.0)));
        assert!(pubdata.require(DataSource::Private, "test").is_err());
    }

    #[test]
    fn empirical_means_within_five_standard_errors() {
        let mut s = stream!(77, "means");
        let dists = [
            make_private_hard_instance(16, 0.5, &mut s).unwrap(),
            make_public_hard_instance(4, 1e-3, 0.5, &mut s).unwrap(),
        ];
        let n = 100_000;
        for d in dists {
            let dim = d.dim();
            let mut acc = vec![0.0; dim];
            let f = Factor::SignMean(d.clone());
            let mut buf = vec![0.0; dim];
            for _ in 0..n {
                f.sample_into(&mut s, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += b;
                }
            }
            let mag = d.scale() / (dim as f64).sqrt();
            for (i, (a, mu)) in acc.iter().zip(d.mean().iter()).enumerate() {
                let (mean, mu) = (a / n as f64, *mu);
                let se = ((mag * mag - mu * mu) / n as f64).sqrt();
                assert!((mean - mu).abs() <= 5.0 * se, "coord {i}: {mean} vs {mu}");
            }
        }
    }
}
