//! `hippi` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hippi::assignment::ProjectionMethod;
use hippi::bench::{bench_to_csv, run_bench};
use hippi::config::{InitMethod, Method, RunConfig};
use hippi::formats::{report_to_csv, write_csv};
use hippi::pipeline::{cmd_eval, cmd_generate, cmd_solve, cmd_verify};
use hippi::solver::UniverseSizeRule;
use hippi::Error;

#[derive(Parser)]
#[command(
    name = "hippi",
    version,
    about = "Cycle-consistent multi-matching of point sets"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic problem with planted ground truth.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Number of objects.
        #[arg(long)]
        k: Option<usize>,
        /// Number of universe points.
        #[arg(long)]
        d_true: Option<usize>,
        #[arg(long)]
        outlier_fraction: Option<f64>,
        #[arg(long)]
        visibility: Option<f64>,
    },
    /// Match the objects of a problem file.
    Solve {
        /// Problem file.
        problem: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        /// Result file of an external method.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Score a result file against the problem's ground truth.
    Eval {
        problem: PathBuf,
        /// Assignment or matchings file.
        result: PathBuf,
        /// Also write the report row to this CSV file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure per-iteration runtime over a ladder of problem sizes.
    Bench {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        solver: SolverFlags,
        /// Comma-separated total point counts.
        #[arg(long, value_delimiter = ',')]
        sizes: Option<Vec<usize>>,
        /// Skip the complete solve at each size.
        #[arg(long)]
        no_full_solve: bool,
    },
    /// Check a result file for cycle-consistency violations.
    Verify {
        /// Assignment or matchings file.
        result: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (file for generate and bench, directory for solve).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverFlags {
    /// hippi, spectral, random, greedy, planted, external-file, quickmatch,
    /// matchals or matcheig.
    #[arg(long)]
    method: Option<String>,
    /// greedy, random or identity.
    #[arg(long)]
    init: Option<String>,
    /// Universe size.
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Similarity of each point with itself in the reweighting.
    #[arg(long)]
    self_weight: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    f_tol: Option<f64>,
    /// exact or auction.
    #[arg(long)]
    projection: Option<String>,
    /// Fail when an adjacency block is not positive semidefinite.
    #[arg(long)]
    strict_psd: bool,
}

const USAGE: u8 = 1;
const DATA: u8 = 2;
const SOLVER: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    if e.is_solver_failure() {
        SOLVER
    } else {
        DATA
    }
}

impl Common {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.out.is_some() {
            cfg.out.clone_from(&self.out);
        }
    }
}

impl SolverFlags {
    fn apply(&self, cfg: &mut RunConfig) -> hippi::Result<()> {
        if let Some(m) = &self.method {
            cfg.method = m.parse::<Method>()?;
        }
        if let Some(i) = &self.init {
            cfg.init = i.parse::<InitMethod>()?;
        }
        if let Some(d) = self.d {
            cfg.solver.universe_size = UniverseSizeRule::Explicit(d);
        }
        if let Some(mu) = self.mu {
            cfg.kernel.mu = mu;
        }
        if let Some(sigma) = self.sigma {
            cfg.kernel.sigma = sigma;
        }
        if let Some(l) = self.self_weight {
            cfg.kernel.self_weight = l;
        }
        if let Some(n) = self.max_iters {
            cfg.solver.max_iters = n;
        }
        if let Some(t) = self.f_tol {
            cfg.solver.f_tol = t;
        }
        if let Some(p) = &self.projection {
            cfg.solver.projection = p.parse::<ProjectionMethod>()?;
        }
        if self.strict_psd {
            cfg.solver.strict_psd = true;
        }
        Ok(())
    }
}

/// Builds the effective configuration; any failure here is a usage error.
fn configure(cli: &Cli) -> hippi::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Generate {
            common,
            k,
            d_true,
            outlier_fraction,
            visibility,
        } => {
            common.apply(&mut cfg);
            let g = &mut cfg.generate;
            g.k = k.unwrap_or(g.k);
            g.d_true = d_true.unwrap_or(g.d_true);
            g.outlier_fraction = outlier_fraction.unwrap_or(g.outlier_fraction);
            g.visibility = visibility.unwrap_or(g.visibility);
            if cfg.out.is_none() {
                return Err(Error::InvalidInput("generate needs --out".into()));
            }
        }
        Command::Solve {
            problem,
            common,
            solver,
            import,
        } => {
            common.apply(&mut cfg);
            solver.apply(&mut cfg)?;
            if problem.is_some() {
                cfg.problem.clone_from(problem);
            }
            if import.is_some() {
                cfg.import.clone_from(import);
            }
            if cfg.problem.is_none() {
                return Err(Error::InvalidInput("solve needs a problem file".into()));
            }
            if cfg.out.is_none() {
                return Err(Error::InvalidInput("solve needs --out".into()));
            }
        }
        Command::Bench {
            common,
            solver,
            sizes,
            no_full_solve,
        } => {
            common.apply(&mut cfg);
            solver.apply(&mut cfg)?;
            if let Some(d) = solver.d {
                cfg.bench.d = d;
            }
            if let Some(s) = sizes {
                cfg.bench.sizes.clone_from(s);
            }
            if *no_full_solve {
                cfg.bench.full_solve = false;
            }
        }
        Command::Eval { .. } | Command::Verify { .. } => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> hippi::Result<()> {
    match &cli.command {
        Command::Generate { .. } => {
            let s = cmd_generate(cfg)?;
            println!("wrote {}", s.path.display());
            println!("k = {}, m = {}, d_true = {}", s.k, s.m, s.d_true);
            let counts: Vec<String> = s.outliers.iter().map(ToString::to_string).collect();
            println!("outliers per object: {}", counts.join(" "));
        }
        Command::Solve { .. } => {
            let outcome = cmd_solve(cfg)?;
            print!("{}", report_to_csv(std::slice::from_ref(&outcome.report))?);
        }
        Command::Eval {
            problem,
            result,
            out,
        } => {
            let row = cmd_eval(problem, result)?;
            let csv = report_to_csv(std::slice::from_ref(&row))?;
            print!("{csv}");
            if let Some(path) = out {
                write_csv(path, &csv)?;
            }
        }
        Command::Bench { .. } => {
            let report = run_bench(&cfg.bench, &cfg.kernel, &cfg.solver, cfg.effective_seed())?;
            let csv = bench_to_csv(&report)?;
            print!("{csv}");
            println!("exponent {:.3}", report.exponent);
            if let Some(path) = &cfg.out {
                write_csv(path, &csv)?;
            }
        }
        Command::Verify { result } => {
            let r = cmd_verify(result)?;
            println!(
                "identity_violations,symmetry_violations,transitivity_violations,composed_matches,cycle_error"
            );
            println!(
                "{},{},{},{},{}",
                r.identity_violations,
                r.symmetry_violations,
                r.transitivity_violations,
                r.composed_matches,
                hippi::evaluation::cycle_error_from(&r)
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let cfg = match configure(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    match run(&cli, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
