//! Reference functions and the Bregman divergences they induce.
//!
//! A reference function `h` is convex on its domain and generates
//! `V(x, y) = h(x) - h(y) - <∇h(y), x - y>`. Three kinds are supported:
//! the squared Euclidean norm, Burg's entropy on the positive orthant and a
//! general convex quadratic (used for the similarity geometry of the
//! distributed simulator).
//!
//! Divergences are evaluated in closed form rather than through the defining
//! difference, which loses all precision when `x` and `y` are close.
//! [`BregmanDivergence::divergence_from_definition`] keeps the literal formula
//! around for cross-checking.

use crate::{Error, Matrix, Result, Vector};

/// Convex function generating a Bregman divergence.
#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceFunction {
    /// `h(x) = ½‖x‖²` on all of `ℝⁿ`.
    SquaredEuclidean,
    /// `h(x) = -Σ ln xᵢ` on the strictly positive orthant.
    BurgEntropy,
    /// `h(x) = ½ xᵀ H x + <c, x>` with symmetric positive semidefinite `H`.
    Quadratic { hessian: Matrix, linear: Vector },
}

impl ReferenceFunction {
    /// Whether the domain is the strictly positive orthant.
    pub fn requires_positive(&self) -> bool {
        matches!(self, ReferenceFunction::BurgEntropy)
    }

    pub fn check_domain(&self, x: &Vector) -> Result<()> {
        if let ReferenceFunction::Quadratic { hessian, .. } = self {
            if hessian.nrows() != x.len() {
                return Err(Error::InvalidInput(format!(
                    "point has dimension {} but the quadratic reference has dimension {}",
                    x.len(),
                    hessian.nrows()
                )));
            }
        }
        if self.requires_positive() {
            if let Some((i, v)) = x.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
                return Err(Error::Domain(format!(
                    "Burg entropy needs positive coordinates, x[{i}] = {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &Vector) -> Result<f64> {
        self.check_domain(x)?;
        Ok(match self {
            ReferenceFunction::SquaredEuclidean => 0.5 * x.norm_squared(),
            ReferenceFunction::BurgEntropy => -x.iter().map(|v| v.ln()).sum::<f64>(),
            ReferenceFunction::Quadratic { hessian, linear } => {
                0.5 * x.dot(&(hessian * x)) + linear.dot(x)
            }
        })
    }

    pub fn gradient(&self, x: &Vector) -> Result<Vector> {
        self.check_domain(x)?;
        Ok(match self {
            ReferenceFunction::SquaredEuclidean => x.clone(),
            ReferenceFunction::BurgEntropy => x.map(|v| -1.0 / v),
            ReferenceFunction::Quadratic { hessian, linear } => hessian * x + linear,
        })
    }
}

/// Bregman divergence `V(x, y)` of a [`ReferenceFunction`].
///
/// Immutable; safe to share between threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BregmanDivergence {
    reference: ReferenceFunction,
}

impl BregmanDivergence {
    pub fn new(reference: ReferenceFunction) -> Self {
        Self { reference }
    }

    pub fn euclidean() -> Self {
        Self::new(ReferenceFunction::SquaredEuclidean)
    }

    /// Itakura-Saito divergence generated by Burg's entropy.
    pub fn burg() -> Self {
        Self::new(ReferenceFunction::BurgEntropy)
    }

    pub fn reference(&self) -> &ReferenceFunction {
        &self.reference
    }

    /// `V(x, y)`.
    pub fn divergence(&self, x: &Vector, y: &Vector) -> Result<f64> {
        check_same_len(x, y)?;
        self.divergence_step(y, &(x - y))
    }

    /// `V(base + step, base)`, computed from the displacement directly so that
    /// short steps keep full relative precision.
    pub fn divergence_step(&self, base: &Vector, step: &Vector) -> Result<f64> {
        check_same_len(base, step)?;
        self.reference.check_domain(base)?;
        match &self.reference {
            ReferenceFunction::SquaredEuclidean => Ok(0.5 * step.norm_squared()),
            ReferenceFunction::Quadratic { hessian, .. } => Ok(0.5 * step.dot(&(hessian * step))),
            ReferenceFunction::BurgEntropy => {
                let mut total = 0.0;
                for (i, (b, s)) in base.iter().zip(step.iter()).enumerate() {
                    // r = (b + s) / b, and r - ln r - 1 = u - ln(1 + u) with u = r - 1
                    let u = s / b;
                    if !(u > -1.0) {
                        return Err(Error::Domain(format!(
                            "Burg entropy needs positive coordinates, x[{i}] = {}",
                            b + s
                        )));
                    }
                    total += u - u.ln_1p();
                }
                Ok(total)
            }
        }
    }

    /// `h(x) - h(y) - <∇h(y), x - y>` evaluated literally.
    pub fn divergence_from_definition(&self, x: &Vector, y: &Vector) -> Result<f64> {
        check_same_len(x, y)?;
        let hx = self.reference.value(x)?;
        let hy = self.reference.value(y)?;
        let gy = self.reference.gradient(y)?;
        Ok(hx - hy - gy.dot(&(x - y)))
    }

    /// Empirical triangle scaling exponent: the largest `γ ≤ 2` such that
    /// `V((1-θ)x + θz, (1-θ)x + θz̃) ≤ θ^γ V(z, z̃)` on every sample.
    ///
    /// Samples with `V(z, z̃) = 0` carry no information and are skipped; an
    /// error is returned if nothing else is left. A sample with `θ = 1`
    /// compares a divergence with itself and never binds.
    pub fn estimate_tse<I>(&self, samples: I) -> Result<TseEstimate>
    where
        I: IntoIterator<Item = TseSample>,
    {
        let mut gamma_hat = 2.0_f64;
        let mut witness = None;
        let mut sample_count = 0;
        let mut informative = 0;
        for sample in samples {
            sample_count += 1;
            let theta = sample.theta;
            if !(theta > 0.0 && theta <= 1.0) {
                return Err(Error::InvalidInput(format!("theta must lie in (0, 1], got {theta}")));
            }
            let base = self.divergence(&sample.z, &sample.z_tilde)?;
            if !(base > 0.0) {
                continue;
            }
            informative += 1;
            if theta == 1.0 {
                continue;
            }
            let p = sample.x.scale(1.0 - theta) + sample.z.scale(theta);
            let q = sample.x.scale(1.0 - theta) + sample.z_tilde.scale(theta);
            let mixed = self.divergence(&p, &q)?;
            if !(mixed > 0.0) {
                continue;
            }
            let exponent = (mixed / base).ln() / theta.ln();
            if exponent < gamma_hat {
                gamma_hat = exponent;
                witness = Some(sample);
            }
        }
        if informative == 0 {
            return Err(Error::Estimation(
                "every TSE sample had V(z, z~) = 0".to_string(),
            ));
        }
        Ok(TseEstimate {
            gamma_hat: gamma_hat.max(f64::EPSILON),
            sample_count,
            witness,
        })
    }
}

/// One triple `(x, z, z̃)` with mixing weight `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TseSample {
    pub x: Vector,
    pub z: Vector,
    pub z_tilde: Vector,
    pub theta: f64,
}

/// Result of [`BregmanDivergence::estimate_tse`].
#[derive(Debug, Clone)]
pub struct TseEstimate {
    /// Sampled exponent, clipped to `(0, 2]`.
    pub gamma_hat: f64,
    pub sample_count: usize,
    /// Sample that set `gamma_hat`; `None` when no sample bound below 2.
    pub witness: Option<TseSample>,
}

fn check_same_len(a: &Vector, b: &Vector) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}
