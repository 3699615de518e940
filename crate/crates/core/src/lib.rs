//! Two-phase "basin selection, then local optimization" loss construction and
//! the experiments that separate public-only, private-only, and
//! public-pretrained private training on it.
//!
//! Layout:
//! - [`rng`], [`vector`]: seeded streams, vectors, ball/annulus projections.
//! - [`distributions`]: sampleable hard instances and ID/OOD task pairs.
//! - [`loss`]: the gated composite loss, the constrained quadratic variant,
//!   gradients, and population-risk evaluators.
//! - [`optim`]: gradient descent and DP-SGD with clipping and noise schedules.
//! - [`experiments`]: the three algorithm arms and reporting.
//! - [`landscape`]: slices, heatmaps, and interpolation planes.
//! - [`config`], [`csv`], [`selftest`]: run configuration and output plumbing.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod distributions;
mod error;
pub mod experiments;
pub mod landscape;
pub mod loss;
pub mod optim;
pub mod rng;
pub mod selftest;
pub mod vector;

pub use error::{Error, Result};
