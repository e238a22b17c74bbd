//! In-process simulation of centralized distributed optimization.
//!
//! `m` worker nodes each hold a quadratic `fⱼ`; the first `m̃` of them make up
//! the central node, which knows `F̃ = (1/m̃)Σ_{l≤m̃} f_l` but has to ask the
//! remaining `m - m̃` nodes for their gradients to obtain `∇F`, where
//! `F = (1/m)Σⱼ fⱼ`. Communication is counted, not transported.
//!
//! When `‖(∇F - ∇F̃)(x) - (∇F - ∇F̃)(y)‖ ≤ σ‖x - y‖`, the reference
//! `F̃(x) + (σ/2)‖x‖²` makes `F` 1-relatively smooth and
//! `μ/(μ + 2σ)`-relatively strongly convex, with `μ` the Euclidean modulus of
//! `F`. [`solve_distributed`] runs the divergence-test solver in that geometry.

use std::cell::Cell;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;

use crate::geometry::{BregmanDivergence, ReferenceFunction};
use crate::objectives::{Objective, QuadraticObjective};
use crate::simplex::ClippedSimplex;
use crate::solver::{solve_gamma_adaptive, SolverConfig, SolverRun};
use crate::{Error, Matrix, Result, Vector};

/// Multiplier applied to the estimated similarity constant before building
/// the geometry used by the solver.
pub const SIGMA_SAFETY_FACTOR: f64 = 1.05;

const POWER_ITERATION_RTOL: f64 = 1e-8;
const POWER_ITERATION_MAX_STEPS: usize = 10_000;

/// Below this many multiply-adds per aggregation the nodes are evaluated
/// sequentially.
const PARALLEL_WORK_THRESHOLD: usize = 1 << 16;

/// Worker nodes with quadratic local objectives; the first `central` of them
/// form the central node.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityNetwork {
    nodes: Vec<QuadraticObjective>,
    central: usize,
}

impl SimilarityNetwork {
    pub fn new(nodes: Vec<QuadraticObjective>, central: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidInput("network needs at least one node".into()));
        }
        if central == 0 || central > nodes.len() {
            return Err(Error::InvalidInput(format!(
                "central node count must lie in [1, {}], got {central}",
                nodes.len()
            )));
        }
        let n = nodes[0].dim();
        if let Some(j) = nodes.iter().position(|f| f.dim() != n) {
            return Err(Error::InvalidInput(format!(
                "node {j} has dimension {} but node 0 has dimension {n}",
                nodes[j].dim()
            )));
        }
        Ok(Self { nodes, central })
    }

    pub fn nodes(&self) -> &[QuadraticObjective] {
        &self.nodes
    }

    /// `m`.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// `m̃`.
    pub fn central_count(&self) -> usize {
        self.central
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    /// Nodes that must send their gradient each round.
    pub fn worker_count(&self) -> usize {
        self.nodes.len() - self.central
    }

    fn average(nodes: &[QuadraticObjective]) -> Result<QuadraticObjective> {
        let n = nodes[0].dim();
        let mut hessian = Matrix::zeros(n, n);
        let mut linear = Vector::zeros(n);
        for f in nodes {
            hessian += f.hessian();
            linear += f.linear();
        }
        let scale = 1.0 / nodes.len() as f64;
        QuadraticObjective::new(hessian * scale, linear * scale)
    }

    /// `F` as a single quadratic.
    pub fn global_objective(&self) -> Result<QuadraticObjective> {
        Self::average(&self.nodes)
    }

    /// `F̃` as a single quadratic.
    pub fn central_objective(&self) -> Result<QuadraticObjective> {
        Self::average(&self.nodes[..self.central])
    }

    /// `∇F(x)`, summed in node order. Records one round in `ledger`.
    pub fn aggregate_gradient(&self, x: &Vector, ledger: &mut CommunicationLedger) -> Result<Vector> {
        let n = self.dim();
        let grads: Vec<Vector> = if self.nodes.len() * n * n >= PARALLEL_WORK_THRESHOLD {
            self.nodes.par_iter().map(|f| f.gradient(x)).collect::<Result<_>>()?
        } else {
            self.nodes.iter().map(|f| f.gradient(x)).collect::<Result<_>>()?
        };
        let mut total = Vector::zeros(n);
        for g in &grads {
            total += g;
        }
        ledger.record_round(self.worker_count(), n);
        Ok(total / self.nodes.len() as f64)
    }

    /// `F(x)` averaged over nodes. Not a communicated quantity.
    pub fn global_value(&self, x: &Vector) -> Result<f64> {
        let mut total = 0.0;
        for f in &self.nodes {
            total += f.value(x)?;
        }
        Ok(total / self.nodes.len() as f64)
    }

    /// Header `m mtilde n`, then for every node `n` rows of its matrix and one
    /// row with its linear term.
    pub fn to_text(&self) -> String {
        let n = self.dim();
        let mut s = format!("{} {} {}\n", self.node_count(), self.central, n);
        let line = |s: &mut String, it: &mut dyn Iterator<Item = f64>| {
            let row: Vec<String> = it.map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "{}", row.join(" "));
        };
        for f in &self.nodes {
            for i in 0..n {
                line(&mut s, &mut f.hessian().row(i).iter().copied());
            }
            line(&mut s, &mut f.linear().iter().copied());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut next = |what: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("network file ended while reading {what}")))
        };
        let mut header = [0usize; 3];
        for (slot, name) in header.iter_mut().zip(["m", "mtilde", "n"]) {
            let tok = next(name)?;
            *slot = tok
                .parse()
                .map_err(|_| Error::Parse(format!("bad header field {name} = {tok:?}")))?;
        }
        let [m, central, n] = header;
        if n == 0 {
            return Err(Error::Parse("network dimension must be positive".into()));
        }
        let mut read = |count: usize| -> Result<Vec<f64>> {
            (0..count)
                .map(|_| {
                    let tok = next("node data")?;
                    tok.parse().map_err(|_| Error::Parse(format!("bad number {tok:?}")))
                })
                .collect()
        };
        let mut nodes = Vec::with_capacity(m);
        for _ in 0..m {
            let a = Matrix::from_row_slice(n, n, &read(n * n)?);
            let b = Vector::from_vec(read(n)?);
            nodes.push(QuadraticObjective::new(a, b)?);
        }
        if tokens.next().is_some() {
            return Err(Error::Parse("trailing data after the last node".into()));
        }
        Self::new(nodes, central)
    }
}

/// Message counts of a simulated run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CommunicationLedger {
    pub rounds: usize,
    pub gradient_vectors_sent: usize,
    pub scalars_sent: usize,
}

impl CommunicationLedger {
    pub fn record_round(&mut self, workers: usize, dim: usize) {
        self.rounds += 1;
        self.gradient_vectors_sent += workers;
        self.scalars_sent += workers * dim;
    }

    /// Comment line appended to trace CSVs.
    pub fn footer(&self) -> String {
        format!("# rounds={} grad_msgs={}", self.rounds, self.gradient_vectors_sent)
    }
}

/// `F` served through gradient aggregation, with a ledger of the rounds used.
///
/// Values are computed by the simulator for tracing only and cost nothing.
pub struct AggregatedObjective<'a> {
    network: &'a SimilarityNetwork,
    ledger: Cell<CommunicationLedger>,
}

impl<'a> AggregatedObjective<'a> {
    pub fn new(network: &'a SimilarityNetwork) -> Self {
        Self { network, ledger: Cell::new(CommunicationLedger::default()) }
    }

    pub fn ledger(&self) -> CommunicationLedger {
        self.ledger.get()
    }
}

impl Objective for AggregatedObjective<'_> {
    fn dim(&self) -> usize {
        self.network.dim()
    }

    fn value(&self, x: &Vector) -> Result<f64> {
        self.network.global_value(x)
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        let mut ledger = self.ledger.get();
        let g = self.network.aggregate_gradient(x, &mut ledger)?;
        self.ledger.set(ledger);
        Ok(g)
    }
}

/// `‖∇²F - ∇²F̃‖₂` by power iteration on the square of the difference.
///
/// Stops once the Rayleigh quotient `ρ` of the square has eigen-residual
/// `‖M²v - ρv‖ ≤ 1e-8·ρ`, which pins `ρ` to an eigenvalue of `M²` within that
/// relative distance. Fails after `10⁴` steps.
pub fn estimate_sigma(network: &SimilarityNetwork) -> Result<f64> {
    let diff = network.global_objective()?.hessian() - network.central_objective()?.hessian();
    let n = diff.nrows();
    let mut v = Vector::from_fn(n, |i, _| 1.0 + (i as f64 + 1.0).sqrt().fract());
    v /= v.norm();
    for _ in 0..POWER_ITERATION_MAX_STEPS {
        let w = &diff * &v;
        let rho = w.norm_squared();
        if rho == 0.0 {
            return Ok(0.0);
        }
        let next = &diff * &w;
        if (&next - v.scale(rho)).norm() <= POWER_ITERATION_RTOL * rho {
            return Ok(rho.sqrt());
        }
        v = &next / next.norm();
    }
    Err(Error::Estimation(format!(
        "power iteration for the similarity constant did not converge in {POWER_ITERATION_MAX_STEPS} steps"
    )))
}

/// Largest `‖Δgrad‖/‖x - y‖` over `samples` Gaussian pairs, where
/// `Δgrad = ∇F(x) - ∇F̃(x) - ∇F(y) + ∇F̃(y)`. Never exceeds the exact constant.
pub fn estimate_sigma_sampled<R: Rng + ?Sized>(
    network: &SimilarityNetwork,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    let global = network.global_objective()?;
    let central = network.central_objective()?;
    let n = network.dim();
    let mut best = 0.0_f64;
    for _ in 0..samples {
        let x = gaussian(n, rng);
        let y = gaussian(n, rng);
        let delta = global.gradient(&x)? - central.gradient(&x)? - global.gradient(&y)? + central.gradient(&y)?;
        let dist = (&x - &y).norm();
        if dist > 0.0 {
            best = best.max(delta.norm() / dist);
        }
    }
    Ok(best)
}

fn gaussian<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vector {
    Vector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `1 + 2σ/μ`.
pub fn relative_condition_number(mu: f64, sigma: f64) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::InvalidInput(format!("strong convexity modulus must be positive, got {mu}")));
    }
    Ok(1.0 + 2.0 * sigma / mu)
}

/// Divergence of the reference `F̃(x) + (σ/2)‖x‖²`.
#[derive(Debug, Clone)]
pub struct SimilarityGeometry {
    pub sigma: f64,
    /// Euclidean strong convexity modulus of `F`.
    pub mu: f64,
    pub divergence: BregmanDivergence,
}

impl SimilarityGeometry {
    /// Builds the geometry without checking the relative bounds.
    pub fn new(network: &SimilarityNetwork, sigma: f64) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidInput(format!("sigma must be finite and nonnegative, got {sigma}")));
        }
        let central = network.central_objective()?;
        let n = network.dim();
        let hessian = central.hessian() + Matrix::identity(n, n) * sigma;
        let reference = ReferenceFunction::Quadratic { hessian, linear: -central.linear() };
        Ok(Self {
            sigma,
            mu: network.global_objective()?.min_eigenvalue(),
            divergence: BregmanDivergence::new(reference),
        })
    }

    /// `μ/(μ + 2σ)`.
    pub fn strong_convexity_modulus(&self) -> f64 {
        self.mu / (self.mu + 2.0 * self.sigma)
    }

    /// Checks on `samples` Gaussian pairs that
    /// `F(y) - F(x) - <∇F(x), y - x>` lies between
    /// `μ/(μ + 2σ)·V(y, x)` and `V(y, x)`, up to `1e-9·(1 + |F(x)| + |F(y)|)`.
    pub fn verify<R: Rng + ?Sized>(
        &self,
        network: &SimilarityNetwork,
        samples: usize,
        rng: &mut R,
    ) -> Result<SimilarityCheck> {
        let global = network.global_objective()?;
        let n = network.dim();
        let modulus = self.strong_convexity_modulus();
        let mut check = SimilarityCheck { samples, ..Default::default() };
        for _ in 0..samples {
            let x = gaussian(n, rng);
            let y = gaussian(n, rng);
            let (fx, gx) = global.value_and_gradient(&x)?;
            let fy = global.value(&y)?;
            let gap = fy - fx - gx.dot(&(&y - &x));
            let v = self.divergence.divergence(&y, &x)?;
            let slack = 1e-9 * (1.0 + fx.abs() + fy.abs());
            let upper = gap - v;
            let lower = modulus * v - gap;
            if upper > check.smoothness_worst {
                check.smoothness_worst = upper;
            }
            if lower > check.convexity_worst {
                check.convexity_worst = lower;
            }
            if upper > slack && check.smoothness_witness.is_none() {
                check.smoothness_witness = Some((x.clone(), y.clone()));
            }
            if lower > slack && check.convexity_witness.is_none() {
                check.convexity_witness = Some((x, y));
            }
        }
        Ok(check)
    }
}

/// Outcome of [`SimilarityGeometry::verify`]; worst excesses are raw
/// differences, witnesses are the first pairs beyond the slack.
#[derive(Debug, Clone, Default)]
pub struct SimilarityCheck {
    pub samples: usize,
    pub smoothness_worst: f64,
    pub convexity_worst: f64,
    pub smoothness_witness: Option<(Vector, Vector)>,
    pub convexity_witness: Option<(Vector, Vector)>,
}

impl SimilarityCheck {
    pub fn passed(&self) -> bool {
        self.smoothness_witness.is_none() && self.convexity_witness.is_none()
    }
}

/// [`SimilarityGeometry::new`] followed by a sampled check of both relative
/// bounds; a failed check is returned as [`Error::Violation`].
pub fn build_similarity_geometry<R: Rng + ?Sized>(
    network: &SimilarityNetwork,
    sigma: f64,
    samples: usize,
    rng: &mut R,
) -> Result<SimilarityGeometry> {
    let geometry = SimilarityGeometry::new(network, sigma)?;
    let check = geometry.verify(network, samples, rng)?;
    if let Some((x, y)) = check.smoothness_witness {
        return Err(Error::Violation {
            inequality: "1-relative smoothness",
            violation: check.smoothness_worst,
            x: x.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
        });
    }
    if let Some((x, y)) = check.convexity_witness {
        return Err(Error::Violation {
            inequality: "relative strong convexity",
            violation: check.convexity_worst,
            x: x.as_slice().to_vec(),
            y: y.as_slice().to_vec(),
        });
    }
    Ok(geometry)
}

/// A solver run together with the communication it needed.
#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub run: SolverRun,
    pub ledger: CommunicationLedger,
    /// Similarity constant of the geometry, `None` for the Euclidean baseline.
    pub sigma: Option<f64>,
}

/// Divergence-test solver in the similarity geometry with `σ = 1.05·σ̂` and
/// `L = 1`; `config.l0` and `config.variant` are overridden.
pub fn solve_distributed(
    network: &SimilarityNetwork,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<DistributedRun> {
    let sigma = SIGMA_SAFETY_FACTOR * estimate_sigma(network)?;
    let geometry = SimilarityGeometry::new(network, sigma)?;
    let objective = AggregatedObjective::new(network);
    let config = SolverConfig { l0: 1.0, ..config.clone() };
    let run = solve_gamma_adaptive(&objective, &geometry.divergence, set, &config, x0)?;
    Ok(DistributedRun { run, ledger: objective.ledger(), sigma: Some(sigma) })
}

/// Same protocol in the Euclidean geometry with `L = λ_max(∇²F)`.
pub fn solve_distributed_euclidean(
    network: &SimilarityNetwork,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<DistributedRun> {
    let l_euk = network.global_objective()?.max_eigenvalue();
    let objective = AggregatedObjective::new(network);
    let config = SolverConfig { l0: l_euk, ..config.clone() };
    let run = solve_gamma_adaptive(&objective, &BregmanDivergence::euclidean(), set, &config, x0)?;
    Ok(DistributedRun { run, ledger: objective.ledger(), sigma: None })
}

/// Parameters of [`generate_network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetworkSpec {
    pub dim: usize,
    pub nodes: usize,
    pub central: usize,
    /// `L/μ` of `F`; `μ` is fixed to 1.
    pub condition_number: f64,
    /// Target `σ` as a fraction of `L`.
    pub sigma_ratio: f64,
}

/// Quadratic network with prescribed conditioning and similarity.
///
/// `∇²F = Q·diag(λ)·Qᵀ` with random orthogonal `Q` and `λ` log-spaced from 1
/// to `condition_number`. Node matrices add zero-mean symmetric perturbations
/// scaled so that `‖∇²F - ∇²F̃‖₂ = sigma_ratio·condition_number`. Linear terms
/// are `∇²fⱼ·c` plus zero-mean noise, so the unconstrained minimizer of `F` is
/// a point `c` in the interior of the probability simplex.
pub fn generate_network<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<SimilarityNetwork> {
    let NetworkSpec { dim: n, nodes: m, central, condition_number, sigma_ratio } = *spec;
    if n < 2 || m == 0 || central == 0 || central > m {
        return Err(Error::InvalidInput(format!(
            "network needs n >= 2 and 1 <= central <= nodes, got n = {n}, nodes = {m}, central = {central}"
        )));
    }
    if !(condition_number >= 1.0 && condition_number.is_finite()) {
        return Err(Error::InvalidInput(format!("condition number must be >= 1, got {condition_number}")));
    }
    if !(sigma_ratio >= 0.0 && sigma_ratio.is_finite()) {
        return Err(Error::InvalidInput(format!("sigma ratio must be nonnegative, got {sigma_ratio}")));
    }
    let gaussian_matrix = |rng: &mut R| Matrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));

    let q = gaussian_matrix(rng).qr().q();
    let spectrum = Vector::from_fn(n, |i, _| condition_number.powf(i as f64 / (n - 1) as f64));
    let base = symmetrize(&(&q * Matrix::from_diagonal(&spectrum) * q.transpose()));

    let mut perturbations: Vec<Matrix> = (0..m).map(|_| symmetrize(&gaussian_matrix(rng))).collect();
    let mean = perturbations.iter().fold(Matrix::zeros(n, n), |acc, e| acc + e) / m as f64;
    for e in &mut perturbations {
        *e -= &mean;
    }
    let target = sigma_ratio * condition_number;
    let central_shift = perturbations[..central].iter().fold(Matrix::zeros(n, n), |acc, e| acc + e) / central as f64;
    let shift_norm = central_shift.symmetric_eigenvalues().amax();
    let scale = if target == 0.0 {
        0.0
    } else if shift_norm > 0.0 {
        target / shift_norm
    } else {
        return Err(Error::InvalidInput(
            "a positive similarity constant needs at least one node outside the central node".into(),
        ));
    };

    let weights: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = weights.iter().sum();
    let center = Vector::from_fn(n, |i, _| 0.5 / n as f64 + 0.5 * weights[i] / total);

    let mut noise: Vec<Vector> = (0..m).map(|_| gaussian(n, rng)).collect();
    let noise_mean = noise.iter().fold(Vector::zeros(n), |acc, v| acc + v) / m as f64;
    for v in &mut noise {
        *v -= &noise_mean;
    }

    let nodes = perturbations
        .iter()
        .zip(&noise)
        .map(|(e, xi)| {
            let a = symmetrize(&(&base + e * scale));
            let b = &a * &center + xi;
            QuadraticObjective::new(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    SimilarityNetwork::new(nodes, central)
}

fn symmetrize(a: &Matrix) -> Matrix {
    (a + a.transpose()) * 0.5
}
