use serde::{Deserialize, Serialize};

use crate::linalg::ComplexVector;

/// Output of any estimator in this crate.
///
/// `objective_history` and `primal_residual_history` are filled by every
/// solver with one entry per iteration. For ADMM the primal residual is
/// `||A x + z - y||_2`; for OMP and FISTA it is the data misfit
/// `||y - A x||_2`. The dual residual, penalty and tolerance histories are
/// ADMM-only and stay empty for the baselines.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub x_hat: ComplexVector,
    pub iterations: usize,
    pub converged: bool,
    pub objective_history: Vec<f64>,
    pub primal_residual_history: Vec<f64>,
    pub dual_residual_history: Vec<f64>,
    pub rho_history: Vec<f64>,
    pub primal_tolerance_history: Vec<f64>,
    pub dual_tolerance_history: Vec<f64>,
}

impl SolveResult {
    pub(crate) fn empty(x_hat: ComplexVector) -> Self {
        Self {
            x_hat,
            iterations: 0,
            converged: false,
            objective_history: Vec::new(),
            primal_residual_history: Vec::new(),
            dual_residual_history: Vec::new(),
            rho_history: Vec::new(),
            primal_tolerance_history: Vec::new(),
            dual_tolerance_history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Admm,
    Omp,
    Fista,
}

impl SolverKind {
    pub const ALL: [SolverKind; 3] = [SolverKind::Admm, SolverKind::Omp, SolverKind::Fista];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Admm => "admm",
            SolverKind::Omp => "omp",
            SolverKind::Fista => "fista",
        }
    }
}

impl std::fmt::Display for SolverKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "admm" => Ok(SolverKind::Admm),
            "omp" => Ok(SolverKind::Omp),
            "fista" => Ok(SolverKind::Fista),
            other => Err(format!("unknown solver '{other}' (expected admm, omp or fista)")),
        }
    }
}
