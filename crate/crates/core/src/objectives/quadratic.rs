use nalgebra::SymmetricEigen;

use super::{check_point, Objective};
use crate::{Error, Matrix, Result, Vector};

/// `f(x) = ½ xᵀAx - bᵀx` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    hessian: Matrix,
    linear: Vector,
    min_eigenvalue: f64,
    max_eigenvalue: f64,
}

impl QuadraticObjective {
    pub fn new(hessian: Matrix, linear: Vector) -> Result<Self> {
        let n = hessian.nrows();
        if hessian.ncols() != n || linear.len() != n || n == 0 {
            return Err(Error::InvalidInput(format!(
                "quadratic needs a square matrix and matching vector, got {}x{} and {}",
                hessian.nrows(),
                hessian.ncols(),
                linear.len()
            )));
        }
        let asym = (&hessian - hessian.transpose()).amax();
        if !(asym <= 1e-12 * hessian.amax().max(1.0)) {
            return Err(Error::InvalidInput(format!("quadratic matrix is not symmetric (|A - Aᵀ| = {asym:e})")));
        }
        let eig = SymmetricEigen::new(hessian.clone());
        let min_eigenvalue = eig.eigenvalues.min();
        let max_eigenvalue = eig.eigenvalues.max();
        Ok(Self { hessian, linear, min_eigenvalue, max_eigenvalue })
    }

    pub fn hessian(&self) -> &Matrix {
        &self.hessian
    }

    pub fn linear(&self) -> &Vector {
        &self.linear
    }

    /// Euclidean strong convexity modulus `μ = λ_min(A)`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue
    }

    /// Euclidean smoothness constant `L = λ_max(A)`.
    pub fn max_eigenvalue(&self) -> f64 {
        self.max_eigenvalue
    }
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.linear.len()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        check_point(x, self.dim())?;
        Ok(0.5 * x.dot(&(&self.hessian * x)) - self.linear.dot(x))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_point(x, self.dim())?;
        Ok(&self.hessian * x - &self.linear)
    }

    fn value_and_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        check_point(x, self.dim())?;
        let ax = &self.hessian * x;
        Ok((0.5 * x.dot(&ax) - self.linear.dot(x), ax - &self.linear))
    }
}
