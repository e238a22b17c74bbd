use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;

use super::io::{read_matrices, write_matrix};
use super::{check_point, Objective, RelativelySmooth};
use crate::{Error, Matrix, Result, Vector};

/// D-optimal experiment design, `f(x) = -log det(Σᵢ xᵢ vᵢvᵢᵀ)`.
///
/// The design vectors `v₁ … vₙ ∈ ℝᵐ` are the columns of an `m × n` matrix.
/// The objective is 1-smooth relative to Burg's entropy.
#[derive(Debug, Clone, PartialEq)]
pub struct DOptimalDesign {
    vectors: Matrix,
}

impl DOptimalDesign {
    pub fn new(vectors: Matrix) -> Result<Self> {
        let (m, n) = vectors.shape();
        if m == 0 || n < m + 1 {
            return Err(Error::InvalidInput(format!(
                "D-optimal design needs n >= m + 1 vectors, got m = {m}, n = {n}"
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("design vectors must be finite".into()));
        }
        Ok(Self { vectors })
    }

    /// Vectors drawn i.i.d. from the standard Gaussian in `ℝᵐ`.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        let vectors = Matrix::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        Self::new(vectors)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    /// `H(x) = Σᵢ xᵢ vᵢvᵢᵀ`.
    pub fn information_matrix(&self, x: &Vector) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (j, mut col) in scaled.column_iter_mut().enumerate() {
            col *= x[j];
        }
        scaled * self.vectors.transpose()
    }

    fn factor(&self, x: &Vector) -> Result<Cholesky<f64, nalgebra::Dyn>> {
        check_point(x, self.dim())?;
        Cholesky::new(self.information_matrix(x)).ok_or(Error::SingularInformation)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_matrix(&mut s, &self.vectors);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let blocks = read_matrices(text)?;
        match <[Matrix; 1]>::try_from(blocks) {
            Ok([v]) => Self::new(v),
            Err(b) => Err(Error::Parse(format!(
                "D-optimal instance needs exactly one matrix block, found {}",
                b.len()
            ))),
        }
    }
}

fn log_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

impl Objective for DOptimalDesign {
    fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        Ok(-log_det(&self.factor(x)?))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        Ok(self.value_and_gradient(x)?.1)
    }

    fn value_and_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        let chol = self.factor(x)?;
        // ∂f/∂xᵢ = -vᵢᵀ H⁻¹ vᵢ = -‖L⁻¹vᵢ‖²
        let whitened = chol
            .l()
            .solve_lower_triangular(&self.vectors)
            .ok_or(Error::SingularInformation)?;
        let grad = Vector::from_iterator(
            self.dim(),
            whitened.column_iter().map(|c| -c.norm_squared()),
        );
        Ok((-log_det(&chol), grad))
    }
}

impl RelativelySmooth for DOptimalDesign {
    fn relative_smoothness_constant(&self) -> f64 {
        1.0
    }
}
