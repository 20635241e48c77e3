//! Estimation of probability measures supported on an unknown submanifold of
//! `R^D` from noisy samples.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical
//! building block of the estimation pipeline:
//!
//! - [`geometry`]: synthetic manifolds with closed-form tangent spaces and
//!   volume measures, samplers for the noise-free and tubular-noise models,
//!   and deterministic reference discretizations;
//! - [`numerics`]: point sets, orthogonal projectors, subspace angles,
//!   symmetric tensors and fixed-radius range search;
//! - [`kernels`]: compactly supported radial kernels with certified vanishing
//!   moments and bounded negative mass;
//! - [`charts`]: farthest point sampling and local polynomial charts;
//! - [`pou`]: smooth partitions of unity over chart centers;
//! - [`volume`]: the patchwork estimator of the volume measure;
//! - [`density`]: weighted kernel density estimators and bandwidth schedules;
//! - [`wasserstein`]: exact transport distances (network simplex, 1-D closed
//!   form, Hungarian assignment);
//! - [`pipeline`]: the end-to-end composition of the above.
//!
//! Heavy loops go through an [`Executor`], so a `std` front end can run them
//! on a thread pool while results stay bitwise identical to the sequential
//! order.

#![no_std]

extern crate alloc;

pub mod charts;
pub mod density;
pub mod error;
pub mod exec;
pub mod fmath;
pub mod geometry;
pub mod kernels;
pub mod measure;
pub mod numerics;
pub mod pipeline;
pub mod pou;
pub mod quadrature;
pub mod rng;
pub mod volume;
pub mod wasserstein;

pub use error::{Error, Result, Stage};
pub use exec::{Executor, Sequential};
pub use measure::WeightedMeasure;
pub use numerics::PointSet;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
