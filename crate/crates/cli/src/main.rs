use std::path::PathBuf;
use std::process::ExitCode;

use adafw::experiments::{render_summary, run_experiment, ExperimentKind, ExperimentSpec};
use adafw::{Error, Variant};
use clap::{Args, Parser, Subcommand};

/// Frank-Wolfe experiments with step sizes adaptive in the smoothness
/// constant and the triangle scaling exponent.
///
/// Writes one CSV trace per solver and a summary.txt to the output
/// directory. FW_THREADS caps the number of worker threads.
#[derive(Parser, Debug)]
#[command(name = "adafw", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// D-optimal design: minimize -ln det(sum_i x_i v_i v_i^T) over the simplex.
    Doptimal(Common),
    /// Poisson linear inverse problem with uniform [0, 1] data.
    Poisson(Common),
    /// Centralized network of quadratics: similarity geometry vs Euclidean.
    Distributed(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Vector length (doptimal) or number of measurements (poisson).
    #[arg(long)]
    m: Option<usize>,
    /// Problem dimension.
    #[arg(long)]
    n: Option<usize>,
    /// Network size (distributed).
    #[arg(long)]
    nodes: Option<usize>,
    /// Nodes held by the central server (distributed).
    #[arg(long)]
    central: Option<usize>,
    /// Condition number of the global quadratic (distributed).
    #[arg(long)]
    cond: Option<f64>,
    /// Similarity constant as a fraction of the largest eigenvalue (distributed).
    #[arg(long = "sigma-ratio")]
    sigma_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Stop once the Frank-Wolfe gap drops to this value.
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated subset of full-adapt, gamma-adapt, L-adapt, fixed.
    #[arg(long, value_delimiter = ',')]
    solvers: Option<Vec<String>>,
    /// Expansion factor for gamma; defaults to 1.1 for full-adapt and 2 otherwise.
    #[arg(long)]
    eta: Option<f64>,
    /// Initial smoothness constant; defaults to 1 (doptimal) or ||y||_1 (poisson).
    #[arg(long)]
    l0: Option<f64>,
    #[arg(long = "gamma-max")]
    gamma_max: Option<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Write the generated instance to this path.
    #[arg(long = "save-instance")]
    save_instance: Option<PathBuf>,
    /// Read the instance from this path instead of generating it.
    #[arg(long = "load-instance")]
    load_instance: Option<PathBuf>,
}

impl Common {
    fn into_spec(self, kind: ExperimentKind) -> Result<ExperimentSpec, Error> {
        let mut spec = ExperimentSpec::new(kind, self.out);
        spec.seed = self.seed;
        spec.eta = self.eta;
        spec.l0 = self.l0;
        spec.save_instance = self.save_instance;
        spec.load_instance = self.load_instance;
        macro_rules! set {
            ($($field:ident <- $flag:expr),* $(,)?) => { $(if let Some(v) = $flag { spec.$field = v; })* };
        }
        set!(
            m <- self.m,
            n <- self.n,
            nodes <- self.nodes,
            central <- self.central,
            condition_number <- self.cond,
            sigma_ratio <- self.sigma_ratio,
            max_iterations <- self.max_iter,
            gap_tolerance <- self.tol,
            gamma_max <- self.gamma_max,
        );
        if let Some(names) = self.solvers {
            spec.variants = names.iter().map(|s| s.parse::<Variant>()).collect::<Result<_, _>>()?;
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn is_input_error(e: &Error) -> bool {
    matches!(e, Error::InvalidInput(_) | Error::Config(_) | Error::Parse(_) | Error::Io(_))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let (kind, args) = match cli.command {
        Command::Doptimal(a) => (ExperimentKind::DOptimal, a),
        Command::Poisson(a) => (ExperimentKind::Poisson, a),
        Command::Distributed(a) => (ExperimentKind::Distributed, a),
    };
    let result = args.into_spec(kind).and_then(|spec| run_experiment(&spec).map(|o| (spec, o)));
    match result {
        Ok((spec, outcome)) => {
            print!("{}", render_summary(&spec, &outcome));
            if outcome.any_failed() {
                eprintln!("error: at least one solver failed; see summary.txt");
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if is_input_error(&e) { 1 } else { 2 })
        }
    }
}
