//! Robust sparse channel estimation under impulsive noise.
//!
//! The centerpiece is [`admm::solve`], a linearized ADMM solver for
//! `min tau ||y - A x||_1 + ||x||_1`. OMP and FISTA live in [`baselines`] for
//! comparison, [`channel`] synthesizes probes, sparse fading channels and
//! Gaussian-mixture noise, and [`bench`] runs Monte-Carlo comparisons and
//! writes CSV/JSON results.

pub mod admm;
pub mod baselines;
pub mod bench;
pub mod channel;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, ComplexVector};
pub use model::MeasurementModel;
pub use solver::{SolveResult, SolverKind};
