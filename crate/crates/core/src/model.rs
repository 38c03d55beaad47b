use crate::error::{check_dim, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};

/// One estimation instance `y = A x + n`: the training operator and the
/// observations it produced.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    a: ComplexMatrix,
    y: ComplexVector,
}

impl MeasurementModel {
    pub fn new(a: ComplexMatrix, y: ComplexVector) -> Result<Self> {
        check_dim("MeasurementModel::new", a.rows(), y.len())?;
        Ok(Self { a, y })
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn y(&self) -> &ComplexVector {
        &self.y
    }

    /// Number of observations M.
    pub fn num_obs(&self) -> usize {
        self.a.rows()
    }

    /// Number of unknowns N.
    pub fn num_unknowns(&self) -> usize {
        self.a.cols()
    }

    /// `y - A x`.
    pub fn residual(&self, x: &ComplexVector) -> Result<ComplexVector> {
        self.y.sub(&self.a.matvec(x)?)
    }
}
