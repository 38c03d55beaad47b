//! Linearized ADMM for the robust l1-l1 estimation problem
//!
//! ```text
//! min_x  tau ||y - A x||_1 + ||x||_1
//! ```
//!
//! split as `min tau ||z||_1 + ||x||_1  s.t.  A x + z = y`. Each iteration
//! takes a linearized proximal step on `x` with a backtracking line search
//! that accepts the first step not increasing `J`, an exact proximal step on
//! `z` guarded so that `G` never increases, a dual ascent step on `gamma`,
//! and a residual-balancing update of the penalty `rho`.

use crate::baselines::lambda_inf;
use crate::error::{check_dim, Error, Result};
use crate::linalg::ComplexVector;
use crate::model::MeasurementModel;
use crate::prox::{soft_threshold_vec, Threshold};
use crate::solver::SolveResult;

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    /// Weight of the data-fit term.
    pub tau: f64,
    /// Initial penalty.
    pub rho0: f64,
    /// Initial step of every line search.
    pub t0: f64,
    /// Line-search step divisor.
    pub eta: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    /// Residual ratio that triggers a penalty change.
    pub xi: f64,
    /// `rho` is multiplied by this when the primal residual dominates.
    pub delta_incr: f64,
    /// `rho` is divided by this when the dual residual dominates.
    pub delta_decr: f64,
    pub max_iter: usize,
    pub max_backtrack: usize,
}

impl AdmmConfig {
    /// Default tunables with the given data-fit weight.
    pub fn with_tau(tau: f64) -> Self {
        Self {
            tau,
            rho0: 1.0,
            t0: 1.0,
            eta: 1.5,
            eps_abs: 1e-3,
            eps_rel: 1e-2,
            xi: 10.0,
            delta_incr: 2.0,
            delta_decr: 2.0,
            max_iter: 500,
            max_backtrack: 60,
        }
    }

    /// Defaults with `tau = 1 / (0.04 * lambda_inf)`, `lambda_inf = ||2 A^H y||_inf`.
    pub fn for_model(model: &MeasurementModel) -> Result<Self> {
        let li = lambda_inf(model)?;
        if li <= 0.0 {
            return Err(Error::InvalidParameter(
                "A^H y is zero, data-fit weight is undefined".into(),
            ));
        }
        Ok(Self::with_tau(1.0 / (0.04 * li)))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tau", self.tau),
            ("rho0", self.rho0),
            ("t0", self.t0),
            ("eps_abs", self.eps_abs),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.eps_rel >= 0.0 && self.eps_rel.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_rel must be >= 0, got {}",
                self.eps_rel
            )));
        }
        let above_one = [
            ("eta", self.eta),
            ("xi", self.xi),
            ("delta_incr", self.delta_incr),
            ("delta_decr", self.delta_decr),
        ];
        for (name, v) in above_one {
            if !(v > 1.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 1, got {v}")));
            }
        }
        if self.max_iter == 0 || self.max_backtrack == 0 {
            return Err(Error::InvalidParameter(
                "max_iter and max_backtrack must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Iterate of the solver. `ax` caches `A x` and `r_p` the primal residual
/// `A x + z - y` of this iterate.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub x: ComplexVector,
    pub z: ComplexVector,
    pub gamma: ComplexVector,
    pub rho: f64,
    pub iter: usize,
    pub t_x: f64,
    ax: ComplexVector,
    r_p: ComplexVector,
}

impl AdmmState {
    /// Builds a state from explicit iterates, computing the cached products.
    pub fn from_parts(
        model: &MeasurementModel,
        x: ComplexVector,
        z: ComplexVector,
        gamma: ComplexVector,
        rho: f64,
        t_x: f64,
    ) -> Result<Self> {
        check_dim("AdmmState (z)", model.num_obs(), z.len())?;
        check_dim("AdmmState (gamma)", model.num_obs(), gamma.len())?;
        if !(rho > 0.0) {
            return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
        }
        let ax = model.a().matvec(&x)?;
        let r_p = primal_residual(&ax, &z, model);
        Ok(Self {
            x,
            z,
            gamma,
            rho,
            iter: 0,
            t_x,
            ax,
            r_p,
        })
    }

    pub fn ax(&self) -> &ComplexVector {
        &self.ax
    }

    pub fn primal_residual(&self) -> &ComplexVector {
        &self.r_p
    }
}

fn primal_residual(ax: &ComplexVector, z: &ComplexVector, model: &MeasurementModel) -> ComplexVector {
    ax.iter()
        .zip(z.iter())
        .zip(model.y().iter())
        .map(|((&a, &zi), &yi)| a + zi - yi)
        .collect()
}

fn j_from_ax(x: &ComplexVector, ax: &ComplexVector, model: &MeasurementModel, tau: f64) -> f64 {
    let misfit: f64 = model
        .y()
        .iter()
        .zip(ax.iter())
        .map(|(yi, ai)| (yi - ai).norm())
        .sum();
    tau * misfit + x.norm1()
}

/// `(rho/2) ||z + A x - y + gamma/rho||^2 + tau ||z||_1` with `A x` supplied.
fn g_from_ax(
    z: &ComplexVector,
    ax: &ComplexVector,
    gamma: &ComplexVector,
    model: &MeasurementModel,
    rho: f64,
    tau: f64,
) -> f64 {
    let quad: f64 = z
        .iter()
        .zip(ax.iter())
        .zip(model.y().iter())
        .zip(gamma.iter())
        .map(|(((&zi, &ai), &yi), &gi)| (zi + ai - yi + gi / rho).norm_sqr())
        .sum();
    0.5 * rho * quad + tau * z.norm1()
}

/// `x = 0`, `z = y - A x = y`, `gamma = 0`, `rho = rho0`.
pub fn initialize(model: &MeasurementModel, cfg: &AdmmConfig) -> Result<AdmmState> {
    cfg.validate()?;
    let n = model.num_unknowns();
    let m = model.num_obs();
    let x = ComplexVector::zeros(n);
    let z = model.residual(&x)?;
    AdmmState::from_parts(model, x, z, ComplexVector::zeros(m), cfg.rho0, cfg.t0)
}

#[derive(Debug, Clone)]
pub struct XUpdate {
    pub x: ComplexVector,
    /// `A x` for the returned iterate.
    pub ax: ComplexVector,
    pub t_x: f64,
    /// Number of step reductions before acceptance.
    pub backtracks: usize,
    /// False when no trial step passed and the previous iterate was kept.
    pub accepted: bool,
}

/// Linearized proximal step on `x` with backtracking.
///
/// For `l = 0, 1, ...` the step `t = t0 / eta^l` gives the candidate
/// `S_{t/rho}(x - (t/rho) grad_f1(x))`; the first candidate with
/// `J(candidate) <= J(x)` is accepted. After `max_backtrack` rejections the
/// previous iterate is returned.
pub fn x_update(state: &AdmmState, model: &MeasurementModel, cfg: &AdmmConfig) -> Result<XUpdate> {
    let rho = state.rho;
    // grad f1 = rho A^H (z + A x - y + gamma/rho)
    let r: ComplexVector = state
        .r_p
        .iter()
        .zip(state.gamma.iter())
        .map(|(&rp, &g)| rp + g / rho)
        .collect();
    let grad = model.a().adjoint_matvec(&r)?.scale_real(rho);
    let j_prev = j_from_ax(&state.x, &state.ax, model, cfg.tau);

    let mut t = cfg.t0;
    for l in 0..cfg.max_backtrack {
        let step = t / rho;
        let shrink = Threshold::new(step)?;
        let point: ComplexVector = state
            .x
            .iter()
            .zip(grad.iter())
            .map(|(&xi, &gi)| xi - gi * step)
            .collect();
        let candidate = soft_threshold_vec(&point, shrink);
        let a_cand = model.a().matvec(&candidate)?;
        if j_from_ax(&candidate, &a_cand, model, cfg.tau) <= j_prev {
            return Ok(XUpdate {
                x: candidate,
                ax: a_cand,
                t_x: t,
                backtracks: l,
                accepted: true,
            });
        }
        t /= cfg.eta;
    }
    Ok(XUpdate {
        x: state.x.clone(),
        ax: state.ax.clone(),
        t_x: t * cfg.eta,
        backtracks: cfg.max_backtrack,
        accepted: false,
    })
}

/// Exact proximal step on `z`, `w = S_{tau/rho}(z - grad_g1(z)/rho)`, then
/// whichever of `w` and the previous `z` has the smaller `G`.
pub fn z_update(
    state: &AdmmState,
    x_new: &ComplexVector,
    model: &MeasurementModel,
    cfg: &AdmmConfig,
) -> Result<ComplexVector> {
    let ax_new = model.a().matvec(x_new)?;
    z_update_with_ax(state, &ax_new, model, cfg)
}

fn z_update_with_ax(
    state: &AdmmState,
    ax_new: &ComplexVector,
    model: &MeasurementModel,
    cfg: &AdmmConfig,
) -> Result<ComplexVector> {
    let rho = state.rho;
    // z - grad_g1(z)/rho = z - (z + A x_new - y + gamma/rho)
    let point: ComplexVector = state
        .z
        .iter()
        .zip(ax_new.iter())
        .zip(model.y().iter())
        .zip(state.gamma.iter())
        .map(|(((&zi, &ai), &yi), &gi)| zi - (zi + ai - yi + gi / rho))
        .collect();
    let w = soft_threshold_vec(&point, Threshold::new(cfg.tau / rho)?);
    let g_w = g_from_ax(&w, ax_new, &state.gamma, model, rho, cfg.tau);
    let g_prev = g_from_ax(&state.z, ax_new, &state.gamma, model, rho, cfg.tau);
    Ok(if g_w <= g_prev { w } else { state.z.clone() })
}

/// `gamma + rho (z_new + A x_new - y)`.
pub fn dual_update(
    state: &AdmmState,
    x_new: &ComplexVector,
    z_new: &ComplexVector,
    model: &MeasurementModel,
) -> Result<ComplexVector> {
    check_dim("dual_update (z)", model.num_obs(), z_new.len())?;
    let ax_new = model.a().matvec(x_new)?;
    let r_p = primal_residual(&ax_new, z_new, model);
    Ok(dual_from_residual(&state.gamma, &r_p, state.rho))
}

fn dual_from_residual(gamma: &ComplexVector, r_p: &ComplexVector, rho: f64) -> ComplexVector {
    gamma.zip_map(r_p, |g, r| g + r * rho)
}

/// Primal residual `A x_new + z_new - y` and dual residual
/// `rho A^H (r_p_new - r_p_prev) - (rho / t_x) (x_new - x_prev)`, using the
/// penalty and line-search step stored in `next`.
///
/// The x-update shrinks with threshold `t_x / rho` after a gradient step of
/// `(t_x / rho) grad_f1`, so its effective proximal step is `t_x / rho` and
/// that is the step whose reciprocal weights the iterate change.
pub fn residuals(
    prev: &AdmmState,
    next: &AdmmState,
    model: &MeasurementModel,
) -> Result<(ComplexVector, ComplexVector)> {
    check_dim("residuals (x)", prev.x.len(), next.x.len())?;
    if !(next.t_x > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "step size must be > 0, got {}",
            next.t_x
        )));
    }
    let r_p = next.r_p.clone();
    let diff = r_p.sub(&prev.r_p)?;
    let back = model.a().adjoint_matvec(&diff)?;
    // the x-step is a prox step of length t_x / rho
    let inv_t = next.rho / next.t_x;
    let rho = next.rho;
    let r_d: ComplexVector = back
        .iter()
        .zip(next.x.iter())
        .zip(prev.x.iter())
        .map(|((&b, &xn), &xp)| b * rho - (xn - xp) * inv_t)
        .collect();
    Ok((r_p, r_d))
}

/// Stopping tolerances of the current iterate:
/// `eps_p = sqrt(M) eps_abs + eps_rel max(||A x||, ||z||, ||y||)` and
/// `eps_d = sqrt(N) eps_abs + eps_rel ||A^H gamma||`.
pub fn tolerances(state: &AdmmState, model: &MeasurementModel, cfg: &AdmmConfig) -> Result<(f64, f64)> {
    let m = model.num_obs() as f64;
    let n = model.num_unknowns() as f64;
    let scale_p = state.ax.norm2().max(state.z.norm2()).max(model.y().norm2());
    let eps_p = m.sqrt() * cfg.eps_abs + cfg.eps_rel * scale_p;
    let eps_d = if cfg.eps_rel == 0.0 {
        n.sqrt() * cfg.eps_abs
    } else {
        n.sqrt() * cfg.eps_abs + cfg.eps_rel * model.a().adjoint_matvec(&state.gamma)?.norm2()
    };
    Ok((eps_p, eps_d))
}

/// Residual balancing: grow `rho` when the primal residual dominates by more
/// than `xi`, shrink it when the dual residual does, otherwise keep it.
pub fn rho_update(rho: f64, r_p_norm: f64, r_d_norm: f64, cfg: &AdmmConfig) -> f64 {
    if r_p_norm > cfg.xi * r_d_norm {
        rho * cfg.delta_incr
    } else if r_d_norm > cfg.xi * r_p_norm {
        rho / cfg.delta_decr
    } else {
        rho
    }
}

pub fn solve(model: &MeasurementModel, cfg: &AdmmConfig) -> Result<SolveResult> {
    solve_with_observer(model, cfg, |_, _| {})
}

/// Runs the solver, calling `observer(k, x_k)` after every iteration.
pub fn solve_with_observer(
    model: &MeasurementModel,
    cfg: &AdmmConfig,
    mut observer: impl FnMut(usize, &ComplexVector),
) -> Result<SolveResult> {
    let mut state = initialize(model, cfg)?;
    let mut result = SolveResult::empty(state.x.clone());

    for k in 1..=cfg.max_iter {
        let xu = x_update(&state, model, cfg)?;
        let z_new = z_update_with_ax(&state, &xu.ax, model, cfg)?;
        let r_p = primal_residual(&xu.ax, &z_new, model);
        let gamma_new = dual_from_residual(&state.gamma, &r_p, state.rho);

        let next = AdmmState {
            x: xu.x,
            z: z_new,
            gamma: gamma_new,
            rho: state.rho,
            iter: k,
            t_x: xu.t_x,
            ax: xu.ax,
            r_p,
        };
        let (r_p, r_d) = residuals(&state, &next, model)?;
        let (eps_p, eps_d) = tolerances(&next, model, cfg)?;
        let (rp_norm, rd_norm) = (r_p.norm2(), r_d.norm2());

        result
            .objective_history
            .push(j_from_ax(&next.x, &next.ax, model, cfg.tau));
        result.primal_residual_history.push(rp_norm);
        result.dual_residual_history.push(rd_norm);
        result.rho_history.push(next.rho);
        result.primal_tolerance_history.push(eps_p);
        result.dual_tolerance_history.push(eps_d);
        result.iterations = k;
        observer(k, &next.x);

        state = next;
        if rp_norm <= eps_p && rd_norm <= eps_d {
            result.converged = true;
            break;
        }
        state.rho = rho_update(state.rho, rp_norm, rd_norm, cfg);
    }

    result.x_hat = state.x;
    Ok(result)
}
