//! Hierarchical, hash-derived random streams.
//!
//! A stream is identified by a root seed and a label path such as
//! `["sep", "mixed", 3]`. The ChaCha key is the SHA-256 digest of the
//! root seed and the length-prefixed labels, so two streams with the same
//! identity replay the same bytes no matter which order they are created in.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::vector::RealVector;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Label {
    Str(String),
    Int(u64),
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Str(s.to_owned())
    }
}

impl From<String> for Label {
    fn from(s: String) -> Self {
        Label::Str(s)
    }
}

impl From<u64> for Label {
    fn from(v: u64) -> Self {
        Label::Int(v)
    }
}

impl From<usize> for Label {
    fn from(v: usize) -> Self {
        Label::Int(v as u64)
    }
}

impl From<u32> for Label {
    fn from(v: u32) -> Self {
        Label::Int(u64::from(v))
    }
}

impl From<i32> for Label {
    fn from(v: i32) -> Self {
        Label::Int(v as u64)
    }
}

/// A labeled random stream. Owned by exactly one logical task.
#[derive(Debug, Clone)]
pub struct RngStream {
    root_seed: u64,
    path: Vec<Label>,
    rng: ChaCha8Rng,
}

/// Builds the stream for `(root_seed, path)`. An empty path is allowed.
pub fn derive_stream(root_seed: u64, path: &[Label]) -> RngStream {
    let mut hasher = Sha256::new();
    hasher.update(b"basin-rng-v1");
    hasher.update(root_seed.to_le_bytes());
    for label in path {
        match label {
            Label::Str(s) => {
                hasher.update([0u8]);
                hasher.update((s.len() as u64).to_le_bytes());
                hasher.update(s.as_bytes());
            }
            Label::Int(v) => {
                hasher.update([1u8]);
                hasher.update(v.to_le_bytes());
            }
        }
    }
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    RngStream {
        root_seed,
        path: path.to_vec(),
        rng: ChaCha8Rng::from_seed(key),
    }
}

/// `derive_stream` with a path built from anything convertible to [`Label`].
#[macro_export]
macro_rules! stream {
    ($seed:expr $(, $label:expr)* $(,)?) => {
        $crate::rng::derive_stream($seed, &[$($crate::rng::Label::from($label)),*])
    };
}

impl RngStream {
    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn path(&self) -> &[Label] {
        &self.path
    }

    /// Derives the sub-stream `path ++ [label]`. Independent of how much of
    /// `self` has been consumed.
    pub fn child(&self, label: impl Into<Label>) -> RngStream {
        let mut path = self.path.clone();
        path.push(label.into());
        derive_stream(self.root_seed, &path)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    #[inline]
    pub fn coin(&mut self) -> bool {
        self.rng.random::<bool>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// `dim` i.i.d. draws from `N(0, sigma^2)`.
pub fn gaussian_vector(stream: &mut RngStream, dim: usize, sigma: f64) -> Result<RealVector> {
    if dim == 0 {
        return Err(Error::param("dim", "must be positive"));
    }
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::param(
            "sigma",
            format!("must be finite and >= 0, got {sigma}"),
        ));
    }
    let values = (0..dim).map(|_| sigma * stream.standard_normal()).collect();
    RealVector::new(values)
}
