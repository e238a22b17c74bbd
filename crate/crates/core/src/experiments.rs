//! Batch runner for the benchmark studies.
//!
//! Each experiment builds one instance, runs every requested variant from the
//! uniform starting point and writes `<variant>.csv` plus `summary.txt` to the
//! output directory. Residuals are measured against a reference optimum: the
//! best value seen by a full-adapt run with ten times the iteration budget and
//! no gap tolerance, or along any experimental trace.

use std::fmt::{self, Write as _};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distributed::{
    estimate_sigma, generate_network, relative_condition_number, solve_distributed, solve_distributed_euclidean,
    DistributedRun, NetworkSpec, SimilarityNetwork, SIGMA_SAFETY_FACTOR,
};
use crate::geometry::BregmanDivergence;
use crate::objectives::{DOptimalDesign, Objective, PoissonInverse};
use crate::simplex::ClippedSimplex;
use crate::solver::{solve, write_trace_csv, SolverConfig, SolverRun, Termination, Variant};
use crate::{Error, Result, Vector};

/// Environment variable capping the worker threads used for variants.
pub const THREADS_ENV: &str = "FW_THREADS";

/// Multiple of the experiment budget given to the reference run.
const REFERENCE_BUDGET_FACTOR: usize = 10;

/// Default `η` of the full-adapt variant in experiments. Larger values shrink
/// `γ` so far on a single rejection that `α = ratio^(1/(γ-1))` collapses when
/// `ratio ≪ 1`.
pub const FULL_ADAPT_ETA: f64 = 1.1;

const INSTANCE_STREAM: u64 = 0;
const SOLVER_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    DOptimal,
    Poisson,
    Distributed,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::DOptimal => "doptimal",
            ExperimentKind::Poisson => "poisson",
            ExperimentKind::Distributed => "distributed",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "doptimal" => Ok(ExperimentKind::DOptimal),
            "poisson" => Ok(ExperimentKind::Poisson),
            "distributed" => Ok(ExperimentKind::Distributed),
            other => Err(Error::InvalidInput(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Everything needed to reproduce one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Design-vector length (doptimal) or number of measurements (poisson).
    pub m: usize,
    /// Simplex dimension.
    pub n: usize,
    pub nodes: usize,
    pub central: usize,
    pub condition_number: f64,
    pub sigma_ratio: f64,
    pub seed: u64,
    /// Ignored by the distributed experiment, which always runs the
    /// similarity geometry against the Euclidean baseline.
    pub variants: Vec<Variant>,
    pub max_iterations: usize,
    pub gap_tolerance: f64,
    /// `η` for every variant; `None` selects [`ExperimentSpec::eta_for`].
    pub eta: Option<f64>,
    /// Overrides the per-experiment default `L₀`.
    pub l0: Option<f64>,
    pub gamma_max: f64,
    pub output_dir: PathBuf,
    pub save_instance: Option<PathBuf>,
    pub load_instance: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Defaults: doptimal `m = 25, n = 100`; poisson `m = 500, n = 200`;
    /// distributed `n = 50` over 16 nodes with one central, `L/μ = 100`,
    /// `σ = 0.01·L`, gap tolerance `1e-6` and `3·10⁵` iterations.
    /// `η` is chosen per variant, see [`ExperimentSpec::eta_for`].
    pub fn new(kind: ExperimentKind, output_dir: impl Into<PathBuf>) -> Self {
        let (m, n) = match kind {
            ExperimentKind::DOptimal => (25, 100),
            ExperimentKind::Poisson => (500, 200),
            ExperimentKind::Distributed => (0, 50),
        };
        let distributed = kind == ExperimentKind::Distributed;
        Self {
            kind,
            m,
            n,
            nodes: 16,
            central: 1,
            condition_number: 100.0,
            sigma_ratio: 0.01,
            seed: 0,
            variants: Variant::ALL.to_vec(),
            max_iterations: if distributed { 300_000 } else { 1000 },
            gap_tolerance: if distributed { 1e-6 } else { 1e-12 },
            eta: None,
            l0: None,
            gamma_max: 2.0,
            output_dir: output_dir.into(),
            save_instance: None,
            load_instance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        match self.kind {
            ExperimentKind::DOptimal if self.m == 0 || self.n < self.m + 1 => {
                return bad(format!("doptimal needs m >= 1 and n >= m + 1, got m = {}, n = {}", self.m, self.n))
            }
            ExperimentKind::Poisson if self.m == 0 || self.n < 2 => {
                return bad(format!("poisson needs m >= 1 and n >= 2, got m = {}, n = {}", self.m, self.n))
            }
            ExperimentKind::Distributed if self.n < 2 || self.central == 0 || self.central > self.nodes => {
                return bad(format!(
                    "distributed needs n >= 2 and 1 <= central <= nodes, got n = {}, nodes = {}, central = {}",
                    self.n, self.nodes, self.central
                ))
            }
            _ => {}
        }
        if self.kind != ExperimentKind::Distributed && self.variants.is_empty() {
            return bad("no solver variants requested".into());
        }
        if let Some(l0) = self.l0 {
            if !(l0 > 0.0 && l0.is_finite()) {
                return bad(format!("L0 must be positive, got {l0}"));
            }
        }
        self.base_config(1.0).validate()
    }

    /// The explicit `η` if set, else [`FULL_ADAPT_ETA`] for full-adapt and the
    /// solver default for the other variants. A small `η` makes the
    /// divergence-test variant spend many checks undoing each expansion of `γ`.
    pub fn eta_for(&self, variant: Variant) -> f64 {
        self.eta.unwrap_or(match variant {
            Variant::FullAdapt => FULL_ADAPT_ETA,
            _ => SolverConfig::default().eta,
        })
    }

    fn config_for(&self, variant: Variant, default_l0: f64) -> SolverConfig {
        SolverConfig { variant, eta: self.eta_for(variant), ..self.base_config(default_l0) }
    }

    fn base_config(&self, default_l0: f64) -> SolverConfig {
        SolverConfig {
            l0: self.l0.unwrap_or(default_l0),
            eta: self.eta.unwrap_or(SolverConfig::default().eta),
            gamma_max: self.gamma_max,
            gap_tolerance: self.gap_tolerance,
            max_iterations: self.max_iterations,
            ..SolverConfig::default()
        }
    }

    /// Instance and solver generators, independent streams of one seed.
    pub fn rngs(&self) -> (ChaCha8Rng, ChaCha8Rng) {
        let mut instance = ChaCha8Rng::seed_from_u64(self.seed);
        instance.set_stream(INSTANCE_STREAM);
        let mut solver = ChaCha8Rng::seed_from_u64(self.seed);
        solver.set_stream(SOLVER_STREAM);
        (instance, solver)
    }
}

/// Result of one variant; `run` is `Err` when the solver refused to start.
#[derive(Debug)]
pub struct VariantOutcome {
    pub label: String,
    pub run: std::result::Result<SolverRun, String>,
    pub elapsed_seconds: f64,
}

impl VariantOutcome {
    /// Whether the variant errored or stopped on a domain failure.
    pub fn failed(&self) -> bool {
        !matches!(&self.run, Ok(r) if !matches!(r.termination, Termination::DomainError(_)))
    }
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub f_star: f64,
    pub outcomes: Vec<VariantOutcome>,
    /// Extra `key = value` lines written to the summary.
    pub notes: Vec<(String, String)>,
}

impl ExperimentOutcome {
    pub fn any_failed(&self) -> bool {
        self.outcomes.iter().any(VariantOutcome::failed)
    }

    pub fn get(&self, label: &str) -> Option<&SolverRun> {
        self.outcomes.iter().find(|o| o.label == label).and_then(|o| o.run.as_ref().ok())
    }
}

/// Runs `spec` and writes its CSV files and `summary.txt`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutcome> {
    spec.validate()?;
    fs::create_dir_all(&spec.output_dir)?;
    let outcome = with_thread_cap(|| match spec.kind {
        ExperimentKind::DOptimal => {
            let design = match &spec.load_instance {
                Some(p) => DOptimalDesign::from_text(&fs::read_to_string(p)?)?,
                None => DOptimalDesign::random(spec.m, spec.n, &mut spec.rngs().0)?,
            };
            save(spec, || design.to_text())?;
            run_simplex_experiment(spec, &design, 1.0)
        }
        ExperimentKind::Poisson => {
            let problem = match &spec.load_instance {
                Some(p) => PoissonInverse::from_text(&fs::read_to_string(p)?)?,
                None => PoissonInverse::random(spec.m, spec.n, &mut spec.rngs().0)?,
            };
            save(spec, || problem.to_text())?;
            let l0 = problem.counts().sum();
            run_simplex_experiment(spec, &problem, l0)
        }
        ExperimentKind::Distributed => {
            let network = match &spec.load_instance {
                Some(p) => SimilarityNetwork::from_text(&fs::read_to_string(p)?)?,
                None => generate_network(
                    &NetworkSpec {
                        dim: spec.n,
                        nodes: spec.nodes,
                        central: spec.central,
                        condition_number: spec.condition_number,
                        sigma_ratio: spec.sigma_ratio,
                    },
                    &mut spec.rngs().0,
                )?,
            };
            save(spec, || network.to_text())?;
            run_distributed_experiment(spec, &network)
        }
    })?;
    write_summary(spec, &outcome)?;
    Ok(outcome)
}

fn save(spec: &ExperimentSpec, text: impl FnOnce() -> String) -> Result<()> {
    if let Some(path) = &spec.save_instance {
        fs::write(path, text())?;
    }
    Ok(())
}

/// Runs `f` inside a pool of at most `FW_THREADS` workers when the variable is
/// set to a positive integer.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()).filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

fn run_simplex_experiment<O: Objective + Sync>(
    spec: &ExperimentSpec,
    objective: &O,
    default_l0: f64,
) -> Result<ExperimentOutcome> {
    let n = objective.dim();
    let set = ClippedSimplex::with_default_floor(n)?;
    let geometry = BregmanDivergence::burg();
    let x0 = set.center();

    let outcomes: Vec<VariantOutcome> = spec
        .variants
        .par_iter()
        .map(|&variant| {
            let start = Instant::now();
            let run = solve(objective, &geometry, &set, &spec.config_for(variant, default_l0), &x0).map_err(|e| e.to_string());
            VariantOutcome { label: variant.name().to_string(), run, elapsed_seconds: start.elapsed().as_secs_f64() }
        })
        .collect();
    for o in &outcomes {
        if let Ok(run) = &o.run {
            write_csv(&spec.output_dir.join(format!("{}.csv", o.label)), run, None)?;
        }
    }

    let reference =
        reference_optimum(objective, &geometry, &set, &spec.config_for(Variant::FullAdapt, default_l0), &x0)?;
    let f_star = outcomes
        .iter()
        .filter_map(|o| o.run.as_ref().ok())
        .flat_map(|r| r.trace.iter().map(|t| t.f_value))
        .fold(reference, f64::min);
    let (_, mut solver_rng) = spec.rngs();
    let constants = set.set_constants(&geometry, 1000, &mut solver_rng)?;
    let notes = vec![
        ("floor".into(), format!("{:e}", set.floor())),
        ("divergence_radius_sq".into(), format!("{:.16e}", constants.divergence_radius_sq)),
    ];
    Ok(ExperimentOutcome { f_star, outcomes, notes })
}

/// Best value found by a full-adapt run with ten times the budget of `config`
/// and zero gap tolerance.
pub fn reference_optimum<O: Objective + ?Sized>(
    objective: &O,
    geometry: &BregmanDivergence,
    set: &ClippedSimplex,
    config: &SolverConfig,
    x0: &Vector,
) -> Result<f64> {
    let cfg = SolverConfig {
        variant: Variant::FullAdapt,
        gap_tolerance: 0.0,
        max_iterations: config.max_iterations.saturating_mul(REFERENCE_BUDGET_FACTOR),
        ..config.clone()
    };
    Ok(solve(objective, geometry, set, &cfg, x0)?.best_value())
}

/// Labels of the two distributed runs.
pub const SIMILARITY_LABEL: &str = "similarity";
pub const EUCLIDEAN_LABEL: &str = "euclidean";

fn run_distributed_experiment(spec: &ExperimentSpec, network: &SimilarityNetwork) -> Result<ExperimentOutcome> {
    let set = ClippedSimplex::standard(network.dim())?;
    let x0 = set.center();
    let config = spec.config_for(Variant::GammaAdapt, 1.0);
    let global = network.global_objective()?;
    let sigma_hat = estimate_sigma(network)?;

    let (similar, euclid) = rayon::join(
        || timed(|| solve_distributed(network, &set, &config, &x0)),
        || timed(|| solve_distributed_euclidean(network, &set, &config, &x0)),
    );
    let mut outcomes = Vec::new();
    for (label, (result, elapsed)) in [(SIMILARITY_LABEL, similar), (EUCLIDEAN_LABEL, euclid)] {
        let run = match result {
            Ok(DistributedRun { run, ledger, .. }) => {
                write_csv(&spec.output_dir.join(format!("{label}.csv")), &run, Some(&ledger.footer()))?;
                Ok(run)
            }
            Err(e) => Err(e.to_string()),
        };
        outcomes.push(VariantOutcome { label: label.to_string(), run, elapsed_seconds: elapsed });
    }

    let mut f_star = match global.hessian().clone().cholesky() {
        Some(chol) => {
            let minimizer = chol.solve(global.linear());
            if set.contains(&minimizer, 1e-12) && minimizer.iter().all(|&v| v >= 0.0) {
                global.value(&minimizer)?
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    };
    for run in outcomes.iter().filter_map(|o| o.run.as_ref().ok()) {
        f_star = f_star.min(run.best_value());
    }
    let mu = global.min_eigenvalue();
    let notes = vec![
        ("sigma_hat".into(), format!("{sigma_hat:.16e}")),
        ("sigma_used".into(), format!("{:.16e}", SIGMA_SAFETY_FACTOR * sigma_hat)),
        ("mu_euclidean".into(), format!("{mu:.16e}")),
        ("L_euclidean".into(), format!("{:.16e}", global.max_eigenvalue())),
        ("relative_condition_number".into(), format!("{:.16e}", relative_condition_number(mu, sigma_hat)?)),
    ];
    Ok(ExperimentOutcome { f_star, outcomes, notes })
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

fn write_csv(path: &Path, run: &SolverRun, footer: Option<&str>) -> Result<()> {
    use std::io::Write;
    let mut out = BufWriter::new(fs::File::create(path)?);
    write_trace_csv(run, &mut out)?;
    if let Some(line) = footer {
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

/// Renders `summary.txt`: `key = value` lines, then one whitespace-separated
/// row per variant.
pub fn render_summary(spec: &ExperimentSpec, outcome: &ExperimentOutcome) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment = {}", spec.kind);
    let _ = writeln!(s, "seed = {}", spec.seed);
    match spec.eta {
        Some(eta) => {
            let _ = writeln!(s, "eta = {eta}");
        }
        None => {
            let _ = writeln!(
                s,
                "eta = {} (full-adapt), {} (other variants)",
                spec.eta_for(Variant::FullAdapt),
                spec.eta_for(Variant::GammaAdapt)
            );
        }
    }
    let _ = writeln!(s, "f_star = {:.16e}", outcome.f_star);
    for (k, v) in &outcome.notes {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>24} {:>24} {:>12} {:>12}  termination",
        "variant", "iterations", "final_f", "residual", "inner_checks", "elapsed_s"
    );
    for o in &outcome.outcomes {
        match &o.run {
            Ok(run) => {
                let _ = writeln!(
                    s,
                    "{:<12} {:>10} {:>24.16e} {:>24.16e} {:>12} {:>12.3}  {}",
                    o.label,
                    run.iterations(),
                    run.final_value(),
                    run.final_value() - outcome.f_star,
                    run.total_inner_checks(),
                    o.elapsed_seconds,
                    run.termination
                );
            }
            Err(e) => {
                let _ = writeln!(s, "{:<12} error: {e}", o.label);
            }
        }
    }
    s
}

fn write_summary(spec: &ExperimentSpec, outcome: &ExperimentOutcome) -> Result<()> {
    fs::write(spec.output_dir.join("summary.txt"), render_summary(spec, outcome))?;
    Ok(())
}
