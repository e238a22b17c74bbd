use std::time::Instant;

use super::{
    adaptive_step, fw_gap, IterationRecord, RejectionParity, SolverConfig, SolverRun, Termination,
    Variant,
};
use crate::geometry::BregmanDivergence;
use crate::objectives::Objective;
use crate::simplex::ClippedSimplex;
use crate::{Error, Result, Vector};

/// Below this `V(s_k, x_k)` the step size is 0/0 and the run stops.
const ZERO_DIVERGENCE: f64 = 1e-15;

/// Relative tolerance of the divergence-only acceptance test. `V(x + αd, x)`
/// and `α^γ·V(s, x)` agree exactly for quadratic references, so without it
/// rounding alone would reject valid steps.
const DIVERGENCE_TEST_RTOL: f64 = 1e-12;

/// Runs the variant selected in `config`.
///
/// `x0` must lie in the relative interior of `set` and in the domain of the
/// geometry. Failures at `x0` are returned as errors; failures at later
/// iterates end the run with [`Termination::DomainError`].
pub fn solve<O: Objective + ?Sized>(
    objective: &O,
    geometry: &BregmanDivergence,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<SolverRun> {
    config.validate()?;
    if objective.dim() != set.dim() {
        return Err(Error::InvalidInput(format!(
            "objective has dimension {} but the feasible set has dimension {}",
            objective.dim(),
            set.dim()
        )));
    }
    if !set.contains(x0, 1e-9) || x0.iter().any(|&v| v <= set.floor()) {
        return Err(Error::InvalidInput(
            "initial point must lie in the relative interior of the feasible set".into(),
        ));
    }
    geometry.reference().check_domain(x0)?;
    Solver { objective, geometry, set, config }.run(x0)
}

/// Adapts both `L` and `γ` with the function-value acceptance test.
pub fn solve_fully_adaptive<O: Objective + ?Sized>(
    objective: &O,
    geometry: &BregmanDivergence,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<SolverRun> {
    solve(objective, geometry, set, &config.with_variant(Variant::FullAdapt), x0)
}

/// Keeps `L = config.l0` and adapts `γ` with the divergence-only test, which
/// never needs objective values.
pub fn solve_gamma_adaptive<O: Objective + ?Sized>(
    objective: &O,
    geometry: &BregmanDivergence,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<SolverRun> {
    solve(objective, geometry, set, &config.with_variant(Variant::GammaAdapt), x0)
}

/// Runs one of the baselines, [`Variant::Fixed`] or [`Variant::LAdapt`].
pub fn solve_baseline<O: Objective + ?Sized>(
    objective: &O,
    geometry: &BregmanDivergence,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<SolverRun> {
    match config.variant {
        Variant::Fixed | Variant::LAdapt => solve(objective, geometry, set, config, x0),
        other => Err(Error::Config(format!("{other} is not a baseline variant"))),
    }
}

struct Solver<'a, O: ?Sized> {
    objective: &'a O,
    geometry: &'a BregmanDivergence,
    set: &'a ClippedSimplex,
    config: &'a SolverConfig,
}

struct Accepted {
    alpha: f64,
    point: Vector,
}

impl<O: Objective + ?Sized> Solver<'_, O> {
    fn run(&self, x0: &Vector) -> Result<SolverRun> {
        let cfg = self.config;
        let start = Instant::now();
        let (mut fx, mut grad) = self.objective.value_and_gradient(x0)?;
        let mut x = x0.clone();
        let mut l_prev = cfg.l0;
        let mut gamma_prev = cfg.gamma0;
        let mut trace = Vec::new();

        let mut k = 0;
        let termination = loop {
            let gap = fw_gap(&grad, &x, self.set)?;
            let mut terminal = IterationRecord {
                k,
                f_value: fx,
                fw_gap: gap.gap,
                alpha: 0.0,
                l_k: l_prev,
                gamma_k: gamma_prev,
                inner_checks: 0,
                elapsed_seconds: 0.0,
                directional_derivative: -gap.gap,
                vertex_divergence: f64::NAN,
                accepted: false,
            };
            if gap.gap <= cfg.gap_tolerance {
                break self.finish(&mut trace, terminal, start, Termination::GapTolerance);
            }
            if k >= cfg.max_iterations {
                break self.finish(&mut trace, terminal, start, Termination::IterationBudget);
            }
            let v_sx = match self.geometry.divergence(&gap.vertex, &x) {
                Ok(v) => v,
                Err(e) => {
                    break self.finish(&mut trace, terminal, start, Termination::DomainError(e.to_string()))
                }
            };
            terminal.vertex_divergence = v_sx;
            if v_sx <= ZERO_DIVERGENCE {
                break self.finish(&mut trace, terminal, start, Termination::GapTolerance);
            }

            let (mut l, mut gamma) = match cfg.variant {
                Variant::FullAdapt => (l_prev / 2.0, expand_gamma(gamma_prev, cfg)),
                Variant::LAdapt => (l_prev / 2.0, cfg.gamma0),
                Variant::GammaAdapt => (cfg.l0, expand_gamma(gamma_prev, cfg)),
                Variant::Fixed => (cfg.l0, cfg.gamma0),
            };
            let slope = -gap.gap;
            let mut checks = 0;
            let accepted = loop {
                checks += 1;
                let alpha = adaptive_step(gap.gap, l, gamma, v_sx)?;
                let step = gap.direction.scale(alpha);
                let trial = &x + &step;
                let passed = match cfg.variant {
                    Variant::Fixed => true,
                    Variant::FullAdapt | Variant::LAdapt => match self.objective.value(&trial) {
                        Ok(ft) => ft <= fx + alpha * slope + alpha.powf(gamma) * l * v_sx,
                        Err(_) => false,
                    },
                    Variant::GammaAdapt => match self.geometry.divergence_step(&x, &step) {
                        Ok(v) => v <= alpha.powf(gamma) * v_sx * (1.0 + DIVERGENCE_TEST_RTOL),
                        Err(_) => false,
                    },
                };
                if passed {
                    break Some(Accepted { alpha, point: trial });
                }
                if checks >= cfg.max_inner_checks {
                    break None;
                }
                let shrink = |g: f64| 1.0 + (g - 1.0) / cfg.eta;
                match cfg.variant {
                    Variant::LAdapt => l *= 2.0,
                    Variant::GammaAdapt => gamma = shrink(gamma),
                    Variant::FullAdapt => {
                        let grow_l = match cfg.rejection_parity {
                            RejectionParity::InnerCounter => checks % 2 == 1,
                            RejectionParity::OuterIndex => k % 2 == 0,
                        };
                        if grow_l {
                            l *= 2.0;
                        } else {
                            gamma = shrink(gamma);
                        }
                    }
                    Variant::Fixed => unreachable!("the fixed variant has no acceptance test"),
                }
            };

            let Some(Accepted { alpha, point }) = accepted else {
                terminal.inner_checks = checks;
                break self.finish(&mut trace, terminal, start, Termination::InnerCheckBudget);
            };
            let (f_next, g_next) = match self.objective.value_and_gradient(&point) {
                Ok(pair) => pair,
                Err(e) => {
                    terminal.inner_checks = checks;
                    break self.finish(&mut trace, terminal, start, Termination::DomainError(e.to_string()));
                }
            };
            trace.push(IterationRecord {
                alpha,
                l_k: l,
                gamma_k: gamma,
                inner_checks: checks,
                elapsed_seconds: start.elapsed().as_secs_f64(),
                accepted: true,
                ..terminal
            });
            l_prev = l;
            gamma_prev = gamma;
            x = point;
            fx = f_next;
            grad = g_next;
            k += 1;
        };

        Ok(SolverRun {
            config: cfg.clone(),
            trace,
            final_point: x,
            termination,
        })
    }

    fn finish(
        &self,
        trace: &mut Vec<IterationRecord>,
        mut record: IterationRecord,
        start: Instant,
        reason: Termination,
    ) -> Termination {
        record.elapsed_seconds = start.elapsed().as_secs_f64();
        trace.push(record);
        reason
    }
}

/// `min{γ + η(γ - 1), γ_max}`.
fn expand_gamma(gamma: f64, cfg: &SolverConfig) -> f64 {
    (gamma + cfg.eta * (gamma - 1.0)).min(cfg.gamma_max)
}
