//! Benchmark objectives with exact gradients.

mod doptimal;
pub mod io;
mod poisson;
mod quadratic;

pub use doptimal::DOptimalDesign;
pub use poisson::PoissonInverse;
pub use quadratic::QuadraticObjective;

use crate::geometry::BregmanDivergence;
use crate::{Error, Result, Vector};

/// Differentiable objective `f: ℝⁿ → ℝ`.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> Result<f64>;

    fn gradient(&self, x: &Vector) -> Result<Vector>;

    fn value_and_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }
}

impl<T: Objective + ?Sized> Objective for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, x: &Vector) -> Result<f64> {
        (**self).value(x)
    }
    fn gradient(&self, x: &Vector) -> Result<Vector> {
        (**self).gradient(x)
    }
    fn value_and_gradient(&self, x: &Vector) -> Result<(f64, Vector)> {
        (**self).value_and_gradient(x)
    }
}

/// Objectives with a known smoothness constant relative to Burg's entropy.
pub trait RelativelySmooth: Objective {
    fn relative_smoothness_constant(&self) -> f64;
}

/// Outcome of [`verify_relative_smoothness`].
#[derive(Debug, Clone)]
pub struct SmoothnessCheck {
    pub passed: bool,
    pub samples: usize,
    /// Largest `f(x) - f(y) - <∇f(y), x - y> - L·V(x, y)` seen, with its pair.
    pub worst_violation: f64,
    pub witness: Option<(Vector, Vector)>,
}

/// Checks `f(x) ≤ f(y) + <∇f(y), x - y> + L·V(x, y)` on every sampled pair,
/// allowing a slack of `1e-9·(1 + |f(x)| + |f(y)|)`.
pub fn verify_relative_smoothness<O, I>(
    objective: &O,
    geometry: &BregmanDivergence,
    smoothness: f64,
    pairs: I,
) -> Result<SmoothnessCheck>
where
    O: Objective + ?Sized,
    I: IntoIterator<Item = (Vector, Vector)>,
{
    let mut check = SmoothnessCheck {
        passed: true,
        samples: 0,
        worst_violation: f64::NEG_INFINITY,
        witness: None,
    };
    for (x, y) in pairs {
        check.samples += 1;
        let fx = objective.value(&x)?;
        let (fy, gy) = objective.value_and_gradient(&y)?;
        let upper = fy + gy.dot(&(&x - &y)) + smoothness * geometry.divergence(&x, &y)?;
        let excess = fx - upper;
        let slack = 1e-9 * (1.0 + fx.abs() + fy.abs());
        if excess > check.worst_violation {
            check.worst_violation = excess;
            if excess > slack {
                check.passed = false;
                check.witness = Some((x, y));
            }
        }
    }
    Ok(check)
}

pub(crate) fn check_point(x: &Vector, dim: usize) -> Result<()> {
    if x.len() != dim {
        return Err(Error::InvalidInput(format!(
            "point has dimension {} but the objective has dimension {dim}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite coordinate x[{i}]")));
    }
    Ok(())
}
