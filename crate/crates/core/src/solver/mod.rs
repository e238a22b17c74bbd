//! Frank-Wolfe variants with Bregman step sizes.
//!
//! All variants share the step
//! `α = min{(-<∇f(x), d> / (2·L·V(s, x)))^(1/(γ-1)), 1}` with `d = s - x`
//! and `s` the oracle vertex. They differ in how `L` and `γ` move:
//!
//! | variant       | `L`            | `γ`            | acceptance test                         |
//! |---------------|----------------|----------------|-----------------------------------------|
//! | `full-adapt`  | halve, double  | expand, shrink | `f(x+αd) ≤ f + α<∇f,d> + α^γ·L·V(s,x)`  |
//! | `L-adapt`     | halve, double  | fixed `γ₀`     | same                                    |
//! | `gamma-adapt` | fixed `L₀`     | expand, shrink | `V(x+αd, x) ≤ α^γ·V(s, x)`              |
//! | `fixed`       | fixed `L₀`     | fixed `γ₀`     | none                                    |

mod diagnostics;
mod frank_wolfe;
mod trace;

pub use diagnostics::{
    acceptance_violations, check_budget, full_step_halving_violations, gap_domination_violations,
    linear_rate_envelope, monotone_violations, progress_violations, scaling_diagnostic,
    sublinear_envelope_violations, CheckBudget, LinearEnvelope, ScalingDiagnostic,
};
pub use frank_wolfe::{solve, solve_baseline, solve_fully_adaptive, solve_gamma_adaptive};
pub use trace::{write_trace_csv, TRACE_HEADER};

use std::fmt;
use std::str::FromStr;

use crate::simplex::ClippedSimplex;
use crate::{Error, Result, Vector};

/// Which parameters a run adapts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    FullAdapt,
    GammaAdapt,
    LAdapt,
    Fixed,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::FullAdapt, Variant::GammaAdapt, Variant::LAdapt, Variant::Fixed];

    pub fn name(self) -> &'static str {
        match self {
            Variant::FullAdapt => "full-adapt",
            Variant::GammaAdapt => "gamma-adapt",
            Variant::LAdapt => "L-adapt",
            Variant::Fixed => "fixed",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "unknown solver {s:?}; expected one of full-adapt, gamma-adapt, L-adapt, fixed"
                ))
            })
    }
}

/// How the fully adaptive variant alternates between growing `L` and
/// shrinking `γ` after a failed acceptance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RejectionParity {
    /// Odd-numbered rejections within an iteration double `L`, even-numbered
    /// ones shrink `γ`.
    #[default]
    InnerCounter,
    /// Even outer iterations only double `L`, odd ones only shrink `γ`.
    OuterIndex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub variant: Variant,
    /// Initial (or, for the non-`L`-adaptive variants, fixed) smoothness `L₀ > 0`.
    pub l0: f64,
    /// Initial (or fixed) exponent `γ₀ ∈ (1, γ_max]`.
    pub gamma0: f64,
    pub gamma_max: f64,
    /// Expansion/shrink factor `η > 1` for `γ`.
    pub eta: f64,
    /// Stop once the Frank-Wolfe gap is at most this.
    pub gap_tolerance: f64,
    pub max_iterations: usize,
    /// Hard cap on acceptance tests within a single iteration.
    pub max_inner_checks: usize,
    pub rejection_parity: RejectionParity,
    /// Accepted for interface parity with the algorithm statement; unused.
    pub delta: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            variant: Variant::FullAdapt,
            l0: 1.0,
            gamma0: 2.0,
            gamma_max: 2.0,
            eta: 2.0,
            gap_tolerance: 1e-12,
            max_iterations: 1000,
            max_inner_checks: 200,
            rejection_parity: RejectionParity::InnerCounter,
            delta: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn with_variant(&self, variant: Variant) -> Self {
        Self { variant, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l0 > 0.0 && self.l0.is_finite()) {
            return Err(Error::Config(format!("L0 must be positive and finite, got {}", self.l0)));
        }
        if !(self.gamma_max > 1.0 && self.gamma_max <= 2.0) {
            return Err(Error::Config(format!("gamma_max must lie in (1, 2], got {}", self.gamma_max)));
        }
        if !(self.gamma0 > 1.0 && self.gamma0 <= self.gamma_max) {
            return Err(Error::Config(format!(
                "gamma0 must lie in (1, gamma_max = {}], got {}",
                self.gamma_max, self.gamma0
            )));
        }
        if !(self.eta > 1.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must exceed 1, got {}", self.eta)));
        }
        if !(self.gap_tolerance >= 0.0) {
            return Err(Error::Config(format!("gap tolerance must be nonnegative, got {}", self.gap_tolerance)));
        }
        if self.max_inner_checks == 0 {
            return Err(Error::Config("max_inner_checks must be at least 1".into()));
        }
        Ok(())
    }
}

/// One row of a solver trace.
///
/// Row `k` describes the iterate `x_k` and the step taken from it. The last
/// row of a run describes the final iterate; no step is taken from it, so its
/// `alpha` is 0 and `accepted` is false.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    pub f_value: f64,
    pub fw_gap: f64,
    pub alpha: f64,
    pub l_k: f64,
    pub gamma_k: f64,
    pub inner_checks: usize,
    pub elapsed_seconds: f64,
    /// `<∇f(x_k), d_k>`, equal to `-fw_gap`.
    pub directional_derivative: f64,
    /// `V(s_k, x_k)`; NaN when not evaluated.
    pub vertex_divergence: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    GapTolerance,
    IterationBudget,
    InnerCheckBudget,
    /// The objective or geometry could not be evaluated at a new iterate.
    DomainError(String),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::GapTolerance => f.write_str("gap-tolerance"),
            Termination::IterationBudget => f.write_str("iteration-budget"),
            Termination::InnerCheckBudget => f.write_str("inner-check-budget"),
            Termination::DomainError(msg) => write!(f, "domain-error ({msg})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverRun {
    pub config: SolverConfig,
    pub trace: Vec<IterationRecord>,
    pub final_point: Vector,
    pub termination: Termination,
}

impl SolverRun {
    /// Records that took a step.
    pub fn steps(&self) -> impl Iterator<Item = &IterationRecord> {
        self.trace.iter().filter(|r| r.accepted)
    }

    pub fn iterations(&self) -> usize {
        self.steps().count()
    }

    pub fn total_inner_checks(&self) -> usize {
        self.trace.iter().map(|r| r.inner_checks).sum()
    }

    pub fn final_value(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.f_value)
    }

    pub fn best_value(&self) -> f64 {
        self.trace.iter().map(|r| r.f_value).fold(f64::INFINITY, f64::min)
    }

    /// `max L_k` over accepted steps.
    pub fn l_max(&self) -> f64 {
        self.steps().map(|r| r.l_k).fold(f64::NAN, f64::max)
    }

    /// `min γ_k` over accepted steps.
    pub fn gamma_min(&self) -> f64 {
        self.steps().map(|r| r.gamma_k).fold(f64::NAN, f64::min)
    }
}

/// Frank-Wolfe gap `G(x) = -<∇f(x), s - x>` with its vertex and direction.
#[derive(Debug, Clone)]
pub struct FwGap {
    pub gap: f64,
    pub vertex: Vector,
    pub direction: Vector,
}

pub fn fw_gap(gradient: &Vector, x: &Vector, set: &ClippedSimplex) -> Result<FwGap> {
    let vertex = set.lmo(gradient)?;
    let direction = &vertex - x;
    let gap = -gradient.dot(&direction);
    Ok(FwGap { gap, vertex, direction })
}

/// `min{(neg_grad_dot_d / (2·L·V(s, x)))^(1/(γ-1)), 1}`.
pub fn adaptive_step(neg_grad_dot_d: f64, l: f64, gamma: f64, vertex_divergence: f64) -> Result<f64> {
    if !(gamma > 1.0) {
        return Err(Error::Config(format!("step exponent needs gamma > 1, got {gamma}")));
    }
    if !(l > 0.0 && l.is_finite()) || !(vertex_divergence > 0.0 && vertex_divergence.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step size needs positive finite L and V(s, x), got L = {l}, V = {vertex_divergence}"
        )));
    }
    if !(neg_grad_dot_d >= 0.0 && neg_grad_dot_d.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "step size needs a nonnegative descent measure, got {neg_grad_dot_d}"
        )));
    }
    let ratio = neg_grad_dot_d / (2.0 * l * vertex_divergence);
    if ratio >= 1.0 {
        return Ok(1.0);
    }
    Ok(ratio.powf(1.0 / (gamma - 1.0)).min(1.0))
}
