//! The clipped probability simplex `{x : Σxᵢ = 1, xᵢ ≥ ε₀}`.
//!
//! With `ε₀ > 0` every vertex stays strictly positive, which keeps Burg-entropy
//! divergences between an iterate and an oracle vertex finite.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::geometry::{BregmanDivergence, TseSample};
use crate::{Error, Result, Vector};

/// Safety factor applied to the sampled divergence diameter.
const DIVERGENCE_DIAMETER_INFLATION: f64 = 1.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippedSimplex {
    dim: usize,
    floor: f64,
}

impl ClippedSimplex {
    /// Simplex in `ℝ^dim` with per-coordinate lower bound `floor ∈ [0, 1/dim)`.
    pub fn new(dim: usize, floor: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidInput(format!("simplex dimension must be >= 2, got {dim}")));
        }
        if !(floor >= 0.0 && floor * (dim as f64) < 1.0) {
            return Err(Error::InvalidInput(format!(
                "simplex floor must lie in [0, 1/{dim}), got {floor}"
            )));
        }
        Ok(Self { dim, floor })
    }

    /// The unclipped probability simplex.
    pub fn standard(dim: usize) -> Result<Self> {
        Self::new(dim, 0.0)
    }

    /// Floor `1e-6 / dim`, the default when the geometry is Burg's entropy.
    pub fn with_default_floor(dim: usize) -> Result<Self> {
        Self::new(dim, 1e-6 / dim as f64)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    /// Mass a vertex puts on its peak coordinate above the floor.
    fn free_mass(&self) -> f64 {
        1.0 - self.dim as f64 * self.floor
    }

    pub fn vertex(&self, index: usize) -> Vector {
        let mut v = Vector::from_element(self.dim, self.floor);
        v[index] = self.floor + self.free_mass();
        v
    }

    /// Barycenter `(1/n, …, 1/n)`.
    pub fn center(&self) -> Vector {
        Vector::from_element(self.dim, 1.0 / self.dim as f64)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        x.len() == self.dim
            && (x.sum() - 1.0).abs() <= tol
            && x.iter().all(|&v| v >= self.floor - tol)
    }

    /// Index of the vertex minimizing `<g, z>`; ties go to the smallest index.
    pub fn lmo_index(&self, g: &Vector) -> Result<usize> {
        if g.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "gradient has length {} but the simplex has dimension {}",
                g.len(),
                self.dim
            )));
        }
        let mut best = 0;
        for (i, &gi) in g.iter().enumerate() {
            if !gi.is_finite() {
                return Err(Error::InvalidInput(format!("non-finite gradient entry g[{i}] = {gi}")));
            }
            if gi < g[best] {
                best = i;
            }
        }
        Ok(best)
    }

    /// Linear minimization oracle `argmin_z <g, z>`.
    pub fn lmo(&self, g: &Vector) -> Result<Vector> {
        Ok(self.vertex(self.lmo_index(g)?))
    }

    /// `max ‖x - y‖₂` over the set, attained at any pair of distinct vertices.
    pub fn euclidean_diameter(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.free_mass()
    }

    /// Euclidean distance from `x` to the relative boundary of the set.
    ///
    /// Within the affine hull `Σxᵢ = 1` the facet `xᵢ = ε₀` lies at distance
    /// `(xᵢ - ε₀) / √(1 - 1/n)`, and the foot of the perpendicular stays
    /// feasible, so the minimum over facets is exact.
    pub fn boundary_distance(&self, x: &Vector) -> f64 {
        let scale = (1.0 - 1.0 / self.dim as f64).sqrt();
        x.iter()
            .map(|&v| (v - self.floor) / scale)
            .fold(f64::INFINITY, f64::min)
            .max(0.0)
    }

    /// Uniformly distributed point of the relative interior.
    pub fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector {
        let weights: Vec<f64> = (0..self.dim).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = weights.iter().sum();
        let mass = self.free_mass();
        Vector::from_iterator(self.dim, weights.iter().map(|w| self.floor + mass * w / total))
    }

    /// Interior triples with `θ` uniform on `(0.01, 0.99)`, for
    /// [`BregmanDivergence::estimate_tse`].
    pub fn tse_samples<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<TseSample> {
        (0..count)
            .map(|_| TseSample {
                x: self.sample_interior(rng),
                z: self.sample_interior(rng),
                z_tilde: self.sample_interior(rng),
                theta: rng.random_range(0.01..0.99),
            })
            .collect()
    }

    /// Diameter constants of the set under `geometry`.
    ///
    /// `D` is exact. `D_V` is the largest divergence seen over `num_samples`
    /// vertex/interior pairs, inflated by 10%; `R² = 2·D_V`.
    pub fn set_constants<R: Rng + ?Sized>(
        &self,
        geometry: &BregmanDivergence,
        num_samples: usize,
        rng: &mut R,
    ) -> Result<SetConstants> {
        if geometry.reference().requires_positive() && self.floor == 0.0 {
            return Err(Error::Domain(
                "Burg divergence is unbounded on the unclipped simplex; use a positive floor"
                    .to_string(),
            ));
        }
        if num_samples == 0 {
            return Err(Error::InvalidInput("set_constants needs at least one sample".into()));
        }
        let mut max_div = 0.0_f64;
        for k in 0..num_samples {
            let (x, y) = match k % 4 {
                0 => {
                    let i = rng.random_range(0..self.dim);
                    let j = (i + rng.random_range(1..self.dim)) % self.dim;
                    (self.vertex(i), self.vertex(j))
                }
                1 => (self.vertex(rng.random_range(0..self.dim)), self.sample_interior(rng)),
                2 => (self.sample_interior(rng), self.vertex(rng.random_range(0..self.dim))),
                _ => (self.sample_interior(rng), self.sample_interior(rng)),
            };
            max_div = max_div.max(geometry.divergence(&x, &y)?);
        }
        let divergence_diameter = DIVERGENCE_DIAMETER_INFLATION * max_div;
        Ok(SetConstants {
            set: *self,
            euclidean_diameter: self.euclidean_diameter(),
            divergence_diameter,
            divergence_radius_sq: 2.0 * divergence_diameter,
        })
    }
}

/// Geometric constants entering the rate bounds.
#[derive(Debug, Clone, Copy)]
pub struct SetConstants {
    pub set: ClippedSimplex,
    /// `D = max ‖x - y‖₂`.
    pub euclidean_diameter: f64,
    /// `D_V ≥ max V(x, y)` (sampled, inflated).
    pub divergence_diameter: f64,
    /// `R²` with `V(x, y) ≤ R²/2`.
    pub divergence_radius_sq: f64,
}

impl SetConstants {
    /// `δ(x)`, distance to the relative boundary.
    pub fn boundary_distance(&self, x: &Vector) -> f64 {
        self.set.boundary_distance(x)
    }
}
