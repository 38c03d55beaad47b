//! Complex soft-thresholding and the smooth/nonsmooth pieces of the
//! l1-l1 splitting.
//!
//! With `r(x, z) = z + A x - y + gamma / rho` the two smooth subproblem
//! terms are `f1(x) = rho/2 ||r(x, z)||^2` and `g1(z) = rho/2 ||r(x_new, z)||^2`.
//! The l1 norm of a complex vector is the sum of moduli throughout.

use num_complex::Complex64;

use crate::error::{check_dim, Error, Result};
use crate::linalg::ComplexVector;
use crate::model::MeasurementModel;

/// Shrinkage level of the soft-thresholding operator, always `>= 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Threshold(f64);

impl Threshold {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha >= 0.0 && alpha.is_finite() {
            Ok(Self(alpha))
        } else {
            Err(Error::InvalidParameter(format!(
                "threshold must be finite and >= 0, got {alpha}"
            )))
        }
    }

    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `S_alpha(beta)`: shrinks the modulus of `beta` by `alpha`, keeping its
/// phase, and returns zero when `|beta| <= alpha`.
#[inline]
pub fn soft_threshold(beta: Complex64, alpha: Threshold) -> Complex64 {
    let alpha = alpha.value();
    if alpha == 0.0 {
        return beta;
    }
    let mag = beta.norm();
    if mag <= alpha {
        Complex64::new(0.0, 0.0)
    } else {
        beta * ((mag - alpha) / mag)
    }
}

pub fn soft_threshold_vec(v: &ComplexVector, alpha: Threshold) -> ComplexVector {
    v.iter().map(|&b| soft_threshold(b, alpha)).collect()
}

/// `J(x) = tau ||y - A x||_1 + ||x||_1`.
pub fn objective_j(x: &ComplexVector, model: &MeasurementModel, tau: f64) -> Result<f64> {
    Ok(tau * model.residual(x)?.norm1() + x.norm1())
}

/// `z + A x - y + gamma / rho`, shared by both gradients and `G`.
fn scaled_constraint_residual(
    x: &ComplexVector,
    z: &ComplexVector,
    gamma: &ComplexVector,
    model: &MeasurementModel,
    rho: f64,
) -> Result<ComplexVector> {
    check_dim("constraint residual (z)", model.num_obs(), z.len())?;
    check_dim("constraint residual (gamma)", model.num_obs(), gamma.len())?;
    if !(rho > 0.0) {
        return Err(Error::InvalidParameter(format!("rho must be > 0, got {rho}")));
    }
    let ax = model.a().matvec(x)?;
    let inv_rho = 1.0 / rho;
    Ok(z
        .iter()
        .zip(ax.iter())
        .zip(model.y().iter())
        .zip(gamma.iter())
        .map(|(((&zi, &axi), &yi), &gi)| zi + axi - yi + gi * inv_rho)
        .collect())
}

/// `grad f1(x) = rho A^H (z + A x - y + gamma / rho)`.
pub fn grad_f1(
    x: &ComplexVector,
    z: &ComplexVector,
    gamma: &ComplexVector,
    model: &MeasurementModel,
    rho: f64,
) -> Result<ComplexVector> {
    let r = scaled_constraint_residual(x, z, gamma, model, rho)?;
    Ok(model.a().adjoint_matvec(&r)?.scale_real(rho))
}

/// `grad g1(z) = rho (z + A x_new - y + gamma / rho)`.
pub fn grad_g1(
    z: &ComplexVector,
    x_new: &ComplexVector,
    gamma: &ComplexVector,
    model: &MeasurementModel,
    rho: f64,
) -> Result<ComplexVector> {
    Ok(scaled_constraint_residual(x_new, z, gamma, model, rho)?.scale_real(rho))
}

/// `G(z) = rho/2 ||z + A x_new - y + gamma / rho||^2 + tau ||z||_1`.
pub fn objective_g(
    z: &ComplexVector,
    x_new: &ComplexVector,
    gamma: &ComplexVector,
    model: &MeasurementModel,
    rho: f64,
    tau: f64,
) -> Result<f64> {
    let r = scaled_constraint_residual(x_new, z, gamma, model, rho)?;
    Ok(0.5 * rho * r.norm2_sqr() + tau * z.norm1())
}
