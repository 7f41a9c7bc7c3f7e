//! The commands behind the CLI: generate, solve, eval, verify.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::baselines::{
    greedy_init, identity_init, pairwise_lap_matchings, random_init, spectral_sync,
};
use crate::config::{InitMethod, Method, RunConfig};
use crate::error::{Error, Result};
use crate::evaluation::{cycle_error, evaluate_matchings, verify_cycle_consistency, CycleReport};
use crate::formats::{self, MatchingFile, ReportRow};
use crate::kernels::{build_adjacency, build_similarity};
use crate::solver::{build_wbar_apply, hippi_solve, objective, universe_size, SolverTrace};
use crate::synthgen::{generate, planted_assignment};
use crate::types::{Label, ProblemInstance, SimilarityMatrix, UniverseAssignment};

pub const ASSIGNMENT_FILE: &str = "assignment.json";
pub const MATCHINGS_FILE: &str = "matchings.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.csv";

fn require<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::invalid(format!("no {what} given")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub k: usize,
    pub m: usize,
    pub d_true: usize,
    /// Outliers per object.
    pub outliers: Vec<usize>,
    pub path: PathBuf,
}

/// Generates a problem and writes it to `cfg.out`.
pub fn cmd_generate(cfg: &RunConfig) -> Result<GenerateSummary> {
    let out = require(&cfg.out, "output path")?;
    let gen = cfg.gen_config();
    let p = generate(&gen)?;
    formats::write_problem(out, &p)?;
    let outliers = p
        .objects()
        .iter()
        .map(|o| {
            o.labels
                .as_ref()
                .map_or(0, |l| l.iter().filter(|x| **x == Label::Outlier).count())
        })
        .collect();
    Ok(GenerateSummary {
        k: p.num_objects(),
        m: p.total_points(),
        d_true: gen.d_true,
        outliers,
        path: out.to_path_buf(),
    })
}

/// What a matching method produced.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub result: MatchingFile,
    /// Objective sequence for iterative methods, otherwise the objective of
    /// the result alone.
    pub trace: SolverTrace,
    pub report: ReportRow,
}

fn initial_assignment(
    cfg: &RunConfig,
    w: &SimilarityMatrix,
    d: usize,
) -> Result<UniverseAssignment> {
    let u = match cfg.init {
        InitMethod::Greedy => greedy_init(w, d)?,
        InitMethod::Random => random_init(w.index(), d, cfg.effective_seed())?,
        InitMethod::Identity => identity_init(w.index(), d)?,
    };
    Ok(u)
}

/// Runs the configured method on a problem without touching the disk.
pub fn solve_problem(cfg: &RunConfig, p: &ProblemInstance) -> Result<SolveOutcome> {
    let w = build_similarity(p, &cfg.kernel)?;
    let a = build_adjacency(p, &cfg.kernel)?;
    let d = universe_size(&p.sizes(), cfg.solver.universe_size)?;
    let start = Instant::now();
    let (result, trace) = match &cfg.method {
        Method::Hippi => {
            let u0 = initial_assignment(cfg, &w, d)?;
            let (u, trace) = hippi_solve(&w, &a, &u0, &cfg.solver)?;
            (MatchingFile::Assignment(u), Some(trace))
        }
        Method::Spectral => {
            let x = pairwise_lap_matchings(&w)?;
            (MatchingFile::Assignment(spectral_sync(&x, d)?), None)
        }
        Method::Random => (
            MatchingFile::Assignment(random_init(w.index(), d, cfg.effective_seed())?),
            None,
        ),
        Method::Greedy => (MatchingFile::Assignment(greedy_init(&w, d)?), None),
        Method::Planted => (MatchingFile::Assignment(planted_assignment(p, d)?), None),
        Method::External(_) => {
            let file = formats::read_matching_file(require(&cfg.import, "import file")?)?;
            if file.index() != w.index() {
                return Err(Error::DimensionMismatch(
                    "imported result does not match the problem's object sizes".into(),
                ));
            }
            (file, None)
        }
    };
    let runtime = start.elapsed().as_secs_f64();
    let op = build_wbar_apply(&w, &a)?;
    let objective_value = match &result {
        MatchingFile::Assignment(u) => Some(objective(u, &op)?),
        MatchingFile::Matchings(_) => None,
    };
    let trace = trace.unwrap_or_else(|| SolverTrace {
        objectives: objective_value.into_iter().collect(),
        converged: true,
        ..Default::default()
    });
    let matchings = result.to_matchings();
    let mut report = ReportRow {
        method: cfg.method.to_string(),
        k: p.num_objects(),
        m: p.total_points(),
        d: match &result {
            MatchingFile::Assignment(u) => u.universe_size(),
            MatchingFile::Matchings(_) => d,
        },
        iterations: trace.iterations,
        objective: objective_value,
        precision: None,
        recall: None,
        fscore: None,
        cycle_error: cycle_error(&matchings),
        runtime_seconds: runtime,
    };
    if let Some(truth) = p.ground_truth() {
        report = report.with_scores(&evaluate_matchings(&matchings, &truth)?);
    }
    log::info!(
        "{}: {} iterations in {runtime:.3} s",
        report.method,
        report.iterations
    );
    Ok(SolveOutcome {
        result,
        trace,
        report,
    })
}

/// Solves `cfg.problem` and writes the result, trace and report into the
/// directory `cfg.out`.
pub fn cmd_solve(cfg: &RunConfig) -> Result<SolveOutcome> {
    let p = formats::read_problem(require(&cfg.problem, "problem file")?)?;
    let out = require(&cfg.out, "output directory")?;
    let outcome = solve_problem(cfg, &p)?;
    std::fs::create_dir_all(out)?;
    match &outcome.result {
        MatchingFile::Assignment(u) => formats::write_assignment(&out.join(ASSIGNMENT_FILE), u)?,
        MatchingFile::Matchings(x) => formats::write_matchings(&out.join(MATCHINGS_FILE), x)?,
    }
    formats::write_csv(
        &out.join(TRACE_FILE),
        &formats::trace_to_csv(&outcome.trace)?,
    )?;
    formats::write_csv(
        &out.join(REPORT_FILE),
        &formats::report_to_csv(std::slice::from_ref(&outcome.report))?,
    )?;
    Ok(outcome)
}

/// Scores a result file against the problem's ground truth.
pub fn cmd_eval(problem: &Path, result: &Path) -> Result<ReportRow> {
    let p = formats::read_problem(problem)?;
    let truth = p.ground_truth().ok_or(Error::MissingGroundTruth)?;
    let start = Instant::now();
    let file = formats::read_matching_file(result)?;
    if file.index() != &p.block_index() {
        return Err(Error::DimensionMismatch(
            "result does not match the problem's object sizes".into(),
        ));
    }
    let matchings = file.to_matchings();
    let scores = evaluate_matchings(&matchings, &truth)?;
    let d = match &file {
        MatchingFile::Assignment(u) => u.universe_size(),
        MatchingFile::Matchings(_) => 0,
    };
    let name = result
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(ReportRow {
        method: name,
        k: p.num_objects(),
        m: p.total_points(),
        d,
        iterations: 0,
        objective: None,
        precision: None,
        recall: None,
        fscore: None,
        cycle_error: scores.cycle_error,
        runtime_seconds: start.elapsed().as_secs_f64(),
    }
    .with_scores(&scores))
}

/// Checks a result file for cycle-consistency violations.
pub fn cmd_verify(result: &Path) -> Result<CycleReport> {
    let file = formats::read_matching_file(result)?;
    Ok(verify_cycle_consistency(&file.to_matchings()))
}
