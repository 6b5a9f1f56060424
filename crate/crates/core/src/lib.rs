//! Ridge-type, graphical lasso and 2-step precision matrix estimators for
//! Gaussian graphical models, plus the simulation and application
//! tooling built on them.
//!
//! The numerical modules are generic over [`scalar::Real`]; the experiment
//! pipelines in [`select`], [`apps`] and [`cli`] run in `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod scalar;
pub mod matcore;
pub mod glasso;
pub mod estimators;
pub mod dualcheck;
pub mod simgen;
pub mod io;
pub mod metrics;
pub mod select;
pub mod apps;
pub mod cli;

pub use error::{Error, Result};
pub use estimators::{Method, TargetSpec, TuningParams, TwoStepConfig};
pub use glasso::{GlassoConfig, GlassoFit};
pub use matcore::{EigenDecomp, Matrix, SymMatrix};
pub use scalar::Real;

pub type SymMatrixF64 = SymMatrix<f64>;
pub type SymMatrixF32 = SymMatrix<f32>;
pub type MatrixF64 = Matrix<f64>;
pub type EigenDecompF64 = EigenDecomp<f64>;
pub type GlassoFitF64 = GlassoFit<f64>;
pub type TuningParamsF64 = TuningParams<f64>;
