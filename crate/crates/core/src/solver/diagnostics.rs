//! Post-hoc checks of solver traces against the convergence theory.
//!
//! None of these are used inside the solver loop; they take the optimal
//! value (or a reference approximation of it) from the caller.

use super::{IterationRecord, SolverRun};
use crate::geometry::BregmanDivergence;
use crate::simplex::SetConstants;
use crate::{Error, Result, Vector};

/// Relative slack of the per-step progress bound.
const PROGRESS_RTOL: f64 = 1e-9;
/// Relative slack of the linear-rate envelope.
const LINEAR_ENVELOPE_RTOL: f64 = 1e-6;
/// Relative slack of the monotone-descent check.
const MONOTONE_RTOL: f64 = 1e-10;

/// Running `(max L_i, min γ_i)` over accepted steps `i ≤ k`, for every `k`.
fn running_extremes(trace: &[IterationRecord]) -> Vec<Option<(f64, f64)>> {
    let mut acc: Option<(f64, f64)> = None;
    trace
        .iter()
        .map(|r| {
            if r.accepted {
                acc = Some(match acc {
                    Some((l, g)) => (l.max(r.l_k), g.min(r.gamma_k)),
                    None => (r.l_k, r.gamma_k),
                });
            }
            acc
        })
        .collect()
}

/// Steps violating
/// `f(x_{k+1}) - f(x_k) ≤ <∇f, d>·min{½, ½(-<∇f, d>/(2·L_max·V(s, x)))^(1/(γ_min-1))}`
/// by more than `1e-9·(1 + |f(x_k)|)`, with `L_max`, `γ_min` taken over steps
/// `0..=k`. Recomputed from the stored records only.
pub fn progress_violations(trace: &[IterationRecord]) -> Vec<usize> {
    let extremes = running_extremes(trace);
    let mut out = Vec::new();
    for (k, pair) in trace.windows(2).enumerate() {
        let (cur, next) = (&pair[0], &pair[1]);
        if !cur.accepted {
            continue;
        }
        let (l_max, gamma_min) = extremes[k].expect("accepted step has extremes");
        let slope = cur.directional_derivative;
        let ratio = -slope / (2.0 * l_max * cur.vertex_divergence);
        let factor = (0.5 * ratio.powf(1.0 / (gamma_min - 1.0))).min(0.5);
        let bound = slope * factor;
        let decrease = next.f_value - cur.f_value;
        if decrease > bound + PROGRESS_RTOL * (1.0 + cur.f_value.abs()) {
            out.push(k);
        }
    }
    out
}

/// Accepted steps whose function-value test
/// `f(x_{k+1}) ≤ f(x_k) + α<∇f, d> + α^γ·L·V(s, x)` fails when re-evaluated
/// from the stored records, up to `1e-12·(1 + |f(x_k)|)`. Only meaningful for
/// variants that run this test.
pub fn acceptance_violations(trace: &[IterationRecord]) -> Vec<usize> {
    trace
        .windows(2)
        .filter(|w| w[0].accepted)
        .filter(|w| {
            let r = &w[0];
            let rhs = r.f_value + r.alpha * r.directional_derivative + r.alpha.powf(r.gamma_k) * r.l_k * r.vertex_divergence;
            w[1].f_value > rhs + 1e-12 * (1.0 + r.f_value.abs())
        })
        .map(|w| w[0].k)
        .collect()
}

/// Iterates where `f(x_{k+1}) > f(x_k) + 1e-10·(1 + |f(x_k)|)`.
pub fn monotone_violations(trace: &[IterationRecord]) -> Vec<usize> {
    trace
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].f_value > w[0].f_value + MONOTONE_RTOL * (1.0 + w[0].f_value.abs()))
        .map(|(k, _)| k + 1)
        .collect()
}

/// Iterates where `f(x_k) - f* > G(x_k) + tol`.
pub fn gap_domination_violations(trace: &[IterationRecord], f_star: f64, tol: f64) -> Vec<usize> {
    trace
        .iter()
        .filter(|r| r.f_value - f_star > r.fw_gap + tol)
        .map(|r| r.k)
        .collect()
}

/// Iterates `k ≥ 1` where `f(x_k) - f* > (2/(k+2))^(γ_min-1)·L_max·R²`.
pub fn sublinear_envelope_violations(trace: &[IterationRecord], f_star: f64, radius_sq: f64) -> Vec<usize> {
    let extremes = running_extremes(trace);
    trace
        .iter()
        .zip(extremes)
        .skip(1)
        .filter_map(|(r, ext)| {
            let (l_max, gamma_min) = ext?;
            let bound = (2.0 / (r.k as f64 + 2.0)).powf(gamma_min - 1.0) * l_max * radius_sq;
            (r.f_value - f_star > bound).then_some(r.k)
        })
        .collect()
}

/// Steps with `α_k = 1` after which `f(x_{k+1}) - f* > (f(x_k) - f*)/2 + tol`.
pub fn full_step_halving_violations(trace: &[IterationRecord], f_star: f64, tol: f64) -> Vec<usize> {
    trace
        .windows(2)
        .filter(|w| w[0].accepted && w[0].alpha == 1.0)
        .filter(|w| w[1].f_value - f_star > 0.5 * (w[0].f_value - f_star) + tol)
        .map(|w| w[0].k)
        .collect()
}

/// Acceptance-test count of a run against
/// `3N + log₂(2·L_max/L₀) + log_η((γ₀-1)/(γ_min-1))`.
#[derive(Debug, Clone, Copy)]
pub struct CheckBudget {
    pub iterations: usize,
    pub total_checks: usize,
    pub bound: f64,
}

impl CheckBudget {
    pub fn holds(&self) -> bool {
        self.total_checks as f64 <= self.bound
    }
}

pub fn check_budget(run: &SolverRun) -> CheckBudget {
    let cfg = &run.config;
    let iterations = run.iterations();
    let (l_max, gamma_min) = if iterations == 0 {
        (cfg.l0, cfg.gamma0)
    } else {
        (run.l_max(), run.gamma_min())
    };
    let bound = 3.0 * iterations as f64
        + (2.0 * l_max / cfg.l0).log2()
        + ((cfg.gamma0 - 1.0) / (gamma_min - 1.0)).ln() / cfg.eta.ln();
    CheckBudget { iterations, total_checks: run.total_inner_checks(), bound }
}

/// Both sides of the Bregman scaling condition at one iterate.
#[derive(Debug, Clone, Copy)]
pub struct ScalingDiagnostic {
    /// `-<∇f(x), s - x> / V(s, x)`.
    pub lhs: f64,
    /// `<-∇f(x), x* - x> / V(x*, x)`.
    pub rhs_factor: f64,
    /// `lhs / rhs_factor`, absent when `rhs_factor ≤ 0` (condition vacuous).
    pub tau_implied: Option<f64>,
    /// `(δ(x*)/D)·(ε/D_V)`.
    pub tau_theory: f64,
}

impl ScalingDiagnostic {
    pub fn is_vacuous(&self) -> bool {
        self.tau_implied.is_none()
    }
}

pub fn scaling_diagnostic(
    x: &Vector,
    gradient: &Vector,
    vertex: &Vector,
    x_star: &Vector,
    constants: &SetConstants,
    geometry: &BregmanDivergence,
    epsilon: f64,
) -> Result<ScalingDiagnostic> {
    let v_star = geometry.divergence(x_star, x)?;
    if !(v_star > 0.0) {
        return Err(Error::InvalidInput("scaling diagnostic needs V(x*, x) > 0".into()));
    }
    let v_sx = geometry.divergence(vertex, x)?;
    let gap = -gradient.dot(&(vertex - x));
    let lhs = if v_sx > 0.0 { gap / v_sx } else { 0.0 };
    let rhs_factor = -gradient.dot(&(x_star - x)) / v_star;
    let tau_implied = (rhs_factor > 0.0).then(|| lhs / rhs_factor);
    let tau_theory = constants.boundary_distance(x_star) / constants.euclidean_diameter
        * (epsilon / constants.divergence_diameter);
    Ok(ScalingDiagnostic { lhs, rhs_factor, tau_implied, tau_theory })
}

/// Contraction factors and the cumulative bound
/// `f(x_k) - f* ≤ (f(x₀) - f*)·Π φᵢ` over the steps before `k`.
#[derive(Debug, Clone)]
pub struct LinearEnvelope {
    /// `φ` of each accepted step, in trace order.
    pub factors: Vec<f64>,
    /// Bound on `f(x_k) - f*` for every trace record.
    pub bounds: Vec<f64>,
    /// Records exceeding their bound by more than a `1e-6` relative slack.
    pub violations: Vec<usize>,
}

impl LinearEnvelope {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `φᵢ = ½` on full steps and
/// `1 - (τ/2)·(γ^(γ/(γ+1))/(γ+1))·(μ/(2Lᵢ))^(1/(γ-1))` otherwise.
///
/// Step `i` (from `x_i` to `x_{i+1}`) contributes `φᵢ` to the bounds of all
/// later records. A factor outside `(0, 1]` means the supplied `μ`, `τ`,
/// `γ` are inconsistent with the trace and is reported as an error.
pub fn linear_rate_envelope(
    trace: &[IterationRecord],
    f_star: f64,
    mu: f64,
    tau: f64,
    gamma: f64,
) -> Result<LinearEnvelope> {
    if !(gamma > 1.0 && gamma <= 2.0) || !(mu > 0.0) || !(tau >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "envelope needs mu > 0, tau >= 0, gamma in (1, 2]; got mu = {mu}, tau = {tau}, gamma = {gamma}"
        )));
    }
    let Some(first) = trace.first() else {
        return Ok(LinearEnvelope { factors: vec![], bounds: vec![], violations: vec![] });
    };
    let shape = gamma.powf(gamma / (gamma + 1.0)) / (gamma + 1.0);
    let mut bound = first.f_value - f_star;
    let mut factors = Vec::new();
    let mut bounds = Vec::with_capacity(trace.len());
    let mut violations = Vec::new();
    for r in trace {
        bounds.push(bound);
        if r.f_value - f_star > bound * (1.0 + LINEAR_ENVELOPE_RTOL) {
            violations.push(r.k);
        }
        if r.accepted {
            let phi = if r.alpha == 1.0 {
                0.5
            } else {
                1.0 - 0.5 * tau * shape * (mu / (2.0 * r.l_k)).powf(1.0 / (gamma - 1.0))
            };
            if !(phi > 0.0 && phi <= 1.0) {
                return Err(Error::InvalidInput(format!(
                    "parameter inconsistency: contraction factor {phi} at step {} lies outside (0, 1]",
                    r.k
                )));
            }
            factors.push(phi);
            bound *= phi;
        }
    }
    Ok(LinearEnvelope { factors, bounds, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(k: usize, f: f64, alpha: f64, l: f64, accepted: bool) -> IterationRecord {
        IterationRecord {
            k,
            f_value: f,
            fw_gap: 1.0,
            alpha,
            l_k: l,
            gamma_k: 2.0,
            inner_checks: 1,
            elapsed_seconds: 0.0,
            directional_derivative: -1.0,
            vertex_divergence: 1.0,
            accepted,
        }
    }

    #[test]
    fn zero_tau_degenerates_to_monotonicity() {
        let trace = vec![rec(0, 3.0, 0.3, 1.0, true), rec(1, 2.0, 0.0, 1.0, false)];
        let env = linear_rate_envelope(&trace, 0.0, 1.0, 0.0, 2.0).unwrap();
        assert_eq!(env.factors, vec![1.0]);
        assert_eq!(env.bounds, vec![3.0, 3.0]);
        assert!(env.holds());
    }

    #[test]
    fn full_steps_halve_the_bound() {
        let trace = vec![rec(0, 4.0, 1.0, 1.0, true), rec(1, 2.5, 1.0, 1.0, true), rec(2, 0.5, 0.0, 1.0, false)];
        let env = linear_rate_envelope(&trace, 0.0, 1.0, 0.5, 2.0).unwrap();
        assert_eq!(env.bounds, vec![4.0, 2.0, 1.0]);
        assert_eq!(env.violations, vec![1]);
        assert_eq!(full_step_halving_violations(&trace, 0.0, 1e-9), vec![0]);
    }

    #[test]
    fn inconsistent_parameters_are_reported() {
        let trace = vec![rec(0, 4.0, 0.5, 1e-3, true), rec(1, 3.0, 0.0, 1.0, false)];
        // μ/(2L) = 500 makes φ negative
        assert!(linear_rate_envelope(&trace, 0.0, 1.0, 1.0, 2.0).is_err());
        assert!(linear_rate_envelope(&trace, 0.0, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn progress_bound_on_hand_trace() {
        // slope -1, V = 1, L = 1: ratio ½, bound = -1·min{½, ¼} = -¼
        let ok = vec![rec(0, 1.0, 0.5, 1.0, true), rec(1, 0.75, 0.0, 1.0, false)];
        assert!(progress_violations(&ok).is_empty());
        let bad = vec![rec(0, 1.0, 0.5, 1.0, true), rec(1, 0.76, 0.0, 1.0, false)];
        assert_eq!(progress_violations(&bad), vec![0]);
    }

    #[test]
    fn monotone_and_gap_checks() {
        let trace = vec![rec(0, 1.0, 0.5, 1.0, true), rec(1, 1.5, 0.5, 1.0, true), rec(2, 1.2, 0.0, 1.0, false)];
        assert_eq!(monotone_violations(&trace), vec![1]);
        assert_eq!(gap_domination_violations(&trace, 0.3, 1e-8), vec![1]);
    }

    #[test]
    fn scaling_condition_with_oracle_at_optimum() {
        use crate::simplex::ClippedSimplex;
        use rand::SeedableRng;
        let set = ClippedSimplex::standard(3).unwrap();
        let geometry = BregmanDivergence::euclidean();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let constants = set.set_constants(&geometry, 64, &mut rng).unwrap();
        let x = Vector::from_column_slice(&[0.2, 0.3, 0.5]);
        let s = set.vertex(0);
        let g = Vector::from_column_slice(&[-1.0, 0.5, 0.2]);
        let d = scaling_diagnostic(&x, &g, &s, &s, &constants, &geometry, 0.1).unwrap();
        assert!((d.tau_implied.unwrap() - 1.0).abs() < 1e-14);
        // x* on a vertex sits on the boundary, so the theoretical τ is 0
        assert_eq!(d.tau_theory, 0.0);
    }

    #[test]
    fn scaling_condition_vacuous_at_stationary_point() {
        use crate::simplex::ClippedSimplex;
        use rand::SeedableRng;
        let set = ClippedSimplex::standard(3).unwrap();
        let geometry = BregmanDivergence::euclidean();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let constants = set.set_constants(&geometry, 64, &mut rng).unwrap();
        let x = set.center();
        let g = Vector::zeros(3);
        let s = set.lmo(&g).unwrap();
        let d = scaling_diagnostic(&x, &g, &s, &Vector::from_column_slice(&[0.5, 0.25, 0.25]), &constants, &geometry, 0.1)
            .unwrap();
        assert!(d.is_vacuous());
        assert_eq!(d.lhs, 0.0);
        assert_eq!(d.rhs_factor, 0.0);
    }
}
