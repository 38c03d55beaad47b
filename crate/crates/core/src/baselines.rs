//! Reference estimators: orthogonal matching pursuit and monotone FISTA on
//! the squared-loss lasso `(1/2)||y - A x||^2 + lambda ||x||_1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};
use crate::model::MeasurementModel;
use crate::prox::{soft_threshold_vec, Threshold};
use crate::solver::SolveResult;

/// `||2 A^H y||_inf`, the scale used to set both regularization weights.
pub fn lambda_inf(model: &MeasurementModel) -> Result<f64> {
    Ok(2.0 * model.a().adjoint_matvec(model.y())?.norm_inf())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OmpConfig {
    /// Number of greedy selections, i.e. the target support size.
    pub num_iterations: usize,
}

impl OmpConfig {
    fn validate(&self, model: &MeasurementModel) -> Result<()> {
        let cap = model.num_obs().min(model.num_unknowns());
        if self.num_iterations == 0 || self.num_iterations > cap {
            return Err(Error::InvalidParameter(format!(
                "OMP iterations must be in 1..={cap}, got {}",
                self.num_iterations
            )));
        }
        Ok(())
    }
}

/// Minimum-norm least-squares solution of `a x = b` via SVD.
fn least_squares(a: &ComplexMatrix, b: &ComplexVector) -> Result<ComplexVector> {
    let mat = DMatrix::from_fn(a.rows(), a.cols(), |i, j| a.get(i, j));
    let rhs = DVector::from_iterator(b.len(), b.iter().copied());
    let svd = mat.svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * f64::EPSILON * a.rows().max(a.cols()) as f64;
    let sol = svd
        .solve(&rhs, eps)
        .map_err(|e| Error::InvalidParameter(format!("least-squares solve failed: {e}")))?;
    Ok(sol.iter().copied().collect())
}

pub fn omp_solve(model: &MeasurementModel, cfg: &OmpConfig) -> Result<SolveResult> {
    omp_solve_with_observer(model, cfg, |_, _| {})
}

/// Classic OMP: pick the column most correlated with the residual, refit
/// by least squares on the accumulated support, repeat.
pub fn omp_solve_with_observer(
    model: &MeasurementModel,
    cfg: &OmpConfig,
    mut observer: impl FnMut(usize, &ComplexVector),
) -> Result<SolveResult> {
    cfg.validate(model)?;
    let a = model.a();
    let y = model.y();
    let n = model.num_unknowns();
    let y_norm = y.norm2();

    let mut support: Vec<usize> = Vec::with_capacity(cfg.num_iterations);
    let mut in_support = vec![false; n];
    let mut x = ComplexVector::zeros(n);
    let mut residual = y.clone();
    let mut result = SolveResult::empty(x.clone());

    for k in 1..=cfg.num_iterations {
        if residual.norm2() <= 1e-13 * y_norm || y_norm == 0.0 {
            result.converged = true;
            break;
        }
        let corr = a.adjoint_matvec(&residual)?;
        let best = corr
            .iter()
            .enumerate()
            .filter(|(j, _)| !in_support[*j])
            .map(|(j, c)| (j, c.norm()))
            .fold(None, |acc: Option<(usize, f64)>, (j, v)| match acc {
                Some((_, bv)) if bv >= v => acc,
                _ => Some((j, v)),
            });
        let Some((j, _)) = best else { break };
        support.push(j);
        in_support[j] = true;

        let sub = a.select_columns(&support)?;
        let coef = least_squares(&sub, y)?;
        x = ComplexVector::zeros(n);
        for (&idx, &c) in support.iter().zip(coef.iter()) {
            x[idx] = c;
        }
        residual = model.residual(&x)?;

        let r_norm = residual.norm2();
        result.objective_history.push(0.5 * r_norm * r_norm);
        result.primal_residual_history.push(r_norm);
        result.iterations = k;
        observer(k, &x);
    }
    if result.iterations == cfg.num_iterations {
        result.converged = true;
    }
    result.x_hat = x;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FistaConfig {
    /// l1 weight.
    pub lambda: f64,
    /// Initial step.
    pub t0: f64,
    /// Step divisor for backtracking.
    pub eta: f64,
    pub max_iter: usize,
    /// Stop when `||x_k - x_{k-1}|| <= rel_tol ||x_{k-1}||`.
    pub rel_tol: f64,
}

impl FistaConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            t0: 1.0,
            eta: 1.5,
            max_iter: 500,
            rel_tol: 1e-6,
        }
    }

    /// `lambda = 0.01 * lambda_inf` with default tunables.
    pub fn for_model(model: &MeasurementModel) -> Result<Self> {
        let li = lambda_inf(model)?;
        if li <= 0.0 {
            return Err(Error::InvalidParameter(
                "A^H y is zero, lasso weight is undefined".into(),
            ));
        }
        Ok(Self::with_lambda(0.01 * li))
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [("lambda", self.lambda), ("t0", self.t0), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.eta > 1.0) {
            return Err(Error::InvalidParameter(format!("eta must be > 1, got {}", self.eta)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Next momentum weight, `(1 + sqrt(1 + 4 theta^2)) / 2`.
pub fn next_theta(theta: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt())
}

fn smooth_loss(residual: &ComplexVector) -> f64 {
    0.5 * residual.norm2_sqr()
}

pub fn fista_solve(model: &MeasurementModel, cfg: &FistaConfig) -> Result<SolveResult> {
    fista_solve_with_observer(model, cfg, |_, _| {})
}

/// Monotone FISTA with backtracking on the quadratic upper bound.
///
/// The step only shrinks across iterations. The accepted iterate is the
/// better of the prox-gradient point and the previous iterate, so the lasso
/// objective never increases.
pub fn fista_solve_with_observer(
    model: &MeasurementModel,
    cfg: &FistaConfig,
    mut observer: impl FnMut(usize, &ComplexVector),
) -> Result<SolveResult> {
    cfg.validate()?;
    let a = model.a();
    let n = model.num_unknowns();

    let mut x = ComplexVector::zeros(n);
    let mut x_resid = model.residual(&x)?;
    let mut f_x = smooth_loss(&x_resid) + cfg.lambda * x.norm1();
    let mut v = x.clone();
    let mut v_resid = x_resid.clone();
    let mut theta = 1.0;
    let mut step = cfg.t0;
    let mut result = SolveResult::empty(x.clone());

    for k in 1..=cfg.max_iter {
        // gradient of (1/2)||A v - y||^2 is A^H (A v - y) = -A^H r(v)
        let grad = a.adjoint_matvec(&v_resid)?.scale_real(-1.0);
        let f_v = smooth_loss(&v_resid);

        let (cand, cand_resid) = loop {
            let point: ComplexVector = v
                .iter()
                .zip(grad.iter())
                .map(|(&vi, &gi)| vi - gi * step)
                .collect();
            let cand = soft_threshold_vec(&point, Threshold::new(cfg.lambda * step)?);
            let cand_resid = model.residual(&cand)?;
            let diff = cand.sub(&v)?;
            let bound = f_v + grad.dot(&diff)?.re + diff.norm2_sqr() / (2.0 * step);
            if smooth_loss(&cand_resid) <= bound * (1.0 + 1e-12) || step < 1e-300 {
                break (cand, cand_resid);
            }
            step /= cfg.eta;
        };

        let f_cand = smooth_loss(&cand_resid) + cfg.lambda * cand.norm1();
        let theta_next = next_theta(theta);
        let change = cand.sub(&x)?.norm2();
        let prev_norm = x.norm2();

        let (x_new, x_new_resid, f_new) = if f_cand <= f_x {
            (cand.clone(), cand_resid.clone(), f_cand)
        } else {
            (x.clone(), x_resid.clone(), f_x)
        };
        // v = x_new + (theta/theta_next)(cand - x_new) + ((theta-1)/theta_next)(x_new - x)
        let w1 = theta / theta_next;
        let w2 = (theta - 1.0) / theta_next;
        v = x_new
            .iter()
            .zip(cand.iter())
            .zip(x.iter())
            .map(|((&xn, &c), &xo)| xn + (c - xn) * w1 + (xn - xo) * w2)
            .collect();
        // residuals are affine in x, so r(v) combines the same way
        v_resid = x_new_resid
            .iter()
            .zip(cand_resid.iter())
            .zip(x_resid.iter())
            .map(|((&rn, &rc), &ro)| rn + (rc - rn) * w1 + (rn - ro) * w2)
            .collect();

        x = x_new;
        x_resid = x_new_resid;
        f_x = f_new;
        theta = theta_next;

        result.objective_history.push(f_x);
        result.primal_residual_history.push(x_resid.norm2());
        result.iterations = k;
        observer(k, &x);

        let rel = if prev_norm > 0.0 {
            change / prev_norm
        } else if change == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if rel <= cfg.rel_tol {
            result.converged = true;
            break;
        }
    }
    result.x_hat = x;
    Ok(result)
}
