use rand::Rng;

use super::io::{read_matrices, write_matrix};
use super::{check_point, Objective, RelativelySmooth};
use crate::{Error, Matrix, Result, Vector};

/// Entries of `y` below this are redrawn so that `ln yᵢ` stays tame.
const MIN_COUNT: f64 = 1e-3;

/// Poisson linear inverse problem
/// `f(x) = Σᵢ [(Ax)ᵢ ln((Ax)ᵢ / yᵢ) - (Ax)ᵢ + yᵢ]`.
///
/// `A` is `m × n` with nonnegative entries, every row having a positive entry;
/// `y > 0`. The smoothness constant relative to Burg's entropy is `‖y‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonInverse {
    matrix: Matrix,
    counts: Vector,
}

impl PoissonInverse {
    pub fn new(matrix: Matrix, counts: Vector) -> Result<Self> {
        if matrix.nrows() != counts.len() || matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "measurement matrix is {}x{} but there are {} counts",
                matrix.nrows(),
                matrix.ncols(),
                counts.len()
            )));
        }
        if matrix.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidInput("measurement matrix must be finite and nonnegative".into()));
        }
        if let Some(i) = matrix.row_iter().position(|r| !r.iter().any(|a| *a > 0.0)) {
            return Err(Error::InvalidInput(format!("row {i} of the measurement matrix is zero")));
        }
        if counts.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
            return Err(Error::InvalidInput("counts must be finite and positive".into()));
        }
        Ok(Self { matrix, counts })
    }

    /// `A` and `y` with entries uniform on `[0, 1]`.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        let matrix = Matrix::from_fn(m, n, |_, _| rng.random::<f64>());
        let counts = Vector::from_fn(m, |_, _| loop {
            let y = rng.random::<f64>();
            if y >= MIN_COUNT {
                break y;
            }
        });
        Self::new(matrix, counts)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn counts(&self) -> &Vector {
        &self.counts
    }

    fn forward(&self, x: &Vector) -> Result<Vector> {
        check_point(x, self.dim())?;
        let ax = &self.matrix * x;
        if let Some(i) = ax.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Domain(format!("(Ax)[{i}] = {} is not positive", ax[i])));
        }
        Ok(ax)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        write_matrix(&mut s, &self.matrix);
        write_matrix(&mut s, &Matrix::from_column_slice(self.counts.len(), 1, self.counts.as_slice()));
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let blocks = read_matrices(text)?;
        match <[Matrix; 2]>::try_from(blocks) {
            Ok([a, y]) if y.ncols() == 1 => Self::new(a, y.column(0).into_owned()),
            Ok(_) => Err(Error::Parse("counts block must have a single column".into())),
            Err(b) => Err(Error::Parse(format!(
                "Poisson instance needs a matrix block and a counts block, found {} blocks",
                b.len()
            ))),
        }
    }
}

impl Objective for PoissonInverse {
    fn dim(&self) -> usize {
        self.matrix.ncols()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        let ax = self.forward(x)?;
        Ok(ax
            .iter()
            .zip(self.counts.iter())
            .map(|(a, y)| a * (a / y).ln() - a + y)
            .sum())
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let ax = self.forward(x)?;
        let log_ratio = ax.zip_map(&self.counts, |a, y| (a / y).ln());
        Ok(self.matrix.tr_mul(&log_ratio))
    }

    fn value_and_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        let ax = self.forward(x)?;
        let log_ratio = ax.zip_map(&self.counts, |a, y| (a / y).ln());
        let value = ax
            .iter()
            .zip(self.counts.iter())
            .zip(log_ratio.iter())
            .map(|((a, y), l)| a * l - a + y)
            .sum();
        Ok((value, self.matrix.tr_mul(&log_ratio)))
    }
}

impl RelativelySmooth for PoissonInverse {
    fn relative_smoothness_constant(&self) -> f64 {
        self.counts.iter().sum()
    }
}
