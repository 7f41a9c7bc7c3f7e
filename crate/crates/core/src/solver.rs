//! The higher-order projected power iteration.
//!
//! The objective is `f(U) = tr(UᵀW̄UUᵀW̄U) = ‖UᵀW̄U‖²_F` with `W̄ = WᵀAW`.
//! Each iteration computes `P = W̄U` (m x d), the `d x d` matrix `M = UᵀP`,
//! the power step `V = P·M` and projects `V` back onto valid assignments.
//! `UUᵀ` is never formed.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::assignment::{project_to_universe, ProjectionMethod};
use crate::error::{Error, Result};
use crate::kernels::psd_report;
use crate::types::{MultiAdjacency, SimilarityMatrix, UniverseAssignment};

/// Symmetric linear operator `x ↦ W̄x` on `m`-dimensional columns.
pub trait WbarOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64>;

    /// `W̄U` for a universe assignment.
    fn apply_assignment(&self, u: &UniverseAssignment) -> DMatrix<f64> {
        self.apply(&u.to_dense())
    }
}

/// `W̄ = WᵀAW` applied as `W(A(Wx))`; `W` is symmetric so `Wᵀ = W`. A
/// nonzero self weight `λ` of the similarity matrix replaces `W` by `W + λI`.
#[derive(Debug, Clone, Copy)]
pub struct ReweightedOperator<'a> {
    w: &'a SimilarityMatrix,
    a: &'a MultiAdjacency,
}

pub fn build_wbar_apply<'a>(
    w: &'a SimilarityMatrix,
    a: &'a MultiAdjacency,
) -> Result<ReweightedOperator<'a>> {
    if w.index() != a.index() {
        return Err(Error::DimensionMismatch(format!(
            "similarity blocks {:?} differ from adjacency blocks {:?}",
            w.index().sizes(),
            a.index().sizes()
        )));
    }
    Ok(ReweightedOperator { w, a })
}

impl ReweightedOperator<'_> {
    /// Materialises `W̄` densely (tests and small problems only).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        let w = self.w.data() + DMatrix::identity(m, m) * self.w.self_weight();
        w.transpose() * self.a.to_dense() * &w
    }

    fn reweight(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let lambda = self.w.self_weight();
        let mut wx = self.w.data() * x;
        if lambda != 0.0 {
            wx += x * lambda;
        }
        wx
    }
}

impl WbarOperator for ReweightedOperator<'_> {
    fn dim(&self) -> usize {
        self.w.index().total()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.reweight(&self.a.apply(&self.reweight(x)))
    }

    fn apply_assignment(&self, u: &UniverseAssignment) -> DMatrix<f64> {
        let w = self.w.data();
        // WU is a sum of W's columns per universe column
        let mut wu = DMatrix::zeros(w.nrows(), u.universe_size());
        let lambda = self.w.self_weight();
        for (g, &c) in u.assignment().iter().enumerate() {
            wu.column_mut(c).axpy(1.0, &w.column(g), 1.0);
            wu[(g, c)] += lambda;
        }
        self.reweight(&self.a.apply(&wu))
    }
}

/// An explicit symmetric matrix used as `W̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

impl WbarOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        &self.0 * x
    }

    fn apply_assignment(&self, u: &UniverseAssignment) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.0.nrows(), u.universe_size());
        for (g, &c) in u.assignment().iter().enumerate() {
            out.column_mut(c).axpy(1.0, &self.0.column(g), 1.0);
        }
        out
    }
}

/// `UᵀP` for `P` with `m` rows: sums the rows of `P` per universe column.
fn gather_rows(u: &UniverseAssignment, p: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(u.universe_size(), p.ncols());
    for (g, &c) in u.assignment().iter().enumerate() {
        let mut row = out.row_mut(c);
        row += p.row(g);
    }
    out
}

fn check_dim(u: &UniverseAssignment, op: &dyn WbarOperator) -> Result<()> {
    if u.index().total() != op.dim() {
        return Err(Error::DimensionMismatch(format!(
            "assignment covers {} points, operator has dimension {}",
            u.index().total(),
            op.dim()
        )));
    }
    Ok(())
}

/// `f(U) = ‖UᵀW̄U‖²_F`.
pub fn objective(u: &UniverseAssignment, op: &dyn WbarOperator) -> Result<f64> {
    check_dim(u, op)?;
    let p = op.apply_assignment(u);
    Ok(gather_rows(u, &p).norm_squared())
}

/// Objective at `u` together with the power step `V = W̄UUᵀW̄U`.
pub fn power_step(u: &UniverseAssignment, op: &dyn WbarOperator) -> Result<(f64, DMatrix<f64>)> {
    check_dim(u, op)?;
    let p = op.apply_assignment(u);
    let m = gather_rows(u, &p);
    let f = m.norm_squared();
    Ok((f, p * m))
}

/// Rule for choosing the number of universe columns `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UniverseSizeRule {
    Explicit(usize),
    /// `⌈2 · mean(m_i)⌉`, at least `max(m_i)`.
    #[default]
    TwiceAverage,
    /// `max(m_i)`.
    MaxBlock,
}

pub fn universe_size(sizes: &[usize], rule: UniverseSizeRule) -> Result<usize> {
    if sizes.is_empty() {
        return Err(Error::invalid("no objects"));
    }
    let max = *sizes.iter().max().expect("non-empty");
    match rule {
        UniverseSizeRule::Explicit(d) if d < max => {
            Err(Error::UniverseTooSmall { d, required: max })
        }
        UniverseSizeRule::Explicit(d) => Ok(d),
        UniverseSizeRule::MaxBlock => Ok(max),
        UniverseSizeRule::TwiceAverage => {
            let k = sizes.len();
            let total: usize = sizes.iter().sum();
            Ok((2 * total).div_ceil(k).max(max))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `|f(U_t) - f(U_{t-1})| <= f_tol + rel_tol · |f(U_t)|`.
    pub f_tol: f64,
    pub rel_tol: f64,
    pub projection: ProjectionMethod,
    pub universe_size: UniverseSizeRule,
    /// Refuse to run when an adjacency block is not positive semidefinite.
    pub strict_psd: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 200,
            f_tol: 0.0,
            rel_tol: 0.0,
            projection: ProjectionMethod::Exact,
            universe_size: UniverseSizeRule::TwiceAverage,
            strict_psd: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be at least 1"));
        }
        if !(self.f_tol >= 0.0) || !(self.rel_tol >= 0.0) {
            return Err(Error::invalid("tolerances must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrace {
    /// `f(U_0), f(U_1), ...`; one entry more than `iterations`.
    pub objectives: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Seconds spent in each iteration (projection plus power step).
    pub wall_times: Vec<f64>,
}

impl SolverTrace {
    pub fn final_objective(&self) -> f64 {
        self.objectives.last().copied().unwrap_or(0.0)
    }

    /// Largest relative decrease between consecutive objectives (0 when the
    /// sequence is non-decreasing).
    pub fn worst_relative_decrease(&self) -> f64 {
        self.objectives
            .windows(2)
            .map(|w| (w[0] - w[1]) / w[0].abs().max(w[1].abs()).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// Runs the iteration from `u0` with an arbitrary `W̄` operator.
pub fn solve_with_operator(
    op: &dyn WbarOperator,
    u0: &UniverseAssignment,
    cfg: &SolverConfig,
) -> Result<(UniverseAssignment, SolverTrace)> {
    cfg.validate()?;
    let mut u = u0.clone();
    let (mut f, mut v) = power_step(&u, op)?;
    let mut trace = SolverTrace {
        objectives: vec![f],
        ..Default::default()
    };
    while trace.iterations < cfg.max_iters {
        let start = Instant::now();
        let next = project_to_universe(&v, u.index(), cfg.projection)?;
        let (f_next, v_next) = power_step(&next, op)?;
        trace.wall_times.push(start.elapsed().as_secs_f64());
        trace.iterations += 1;
        trace.objectives.push(f_next);
        // identical partitions have identical objectives in exact arithmetic
        let stalled = (f_next - f).abs() <= cfg.f_tol + cfg.rel_tol * f.abs().max(f_next.abs())
            || next.same_partition(&u);
        log::debug!("iteration {}: f = {f_next:.12e}", trace.iterations);
        u = next;
        f = f_next;
        v = v_next;
        if stalled {
            trace.converged = true;
            break;
        }
    }
    Ok((u, trace))
}

/// Maximises `f(U)` starting from `u0`. The returned assignment is the last
/// iterate.
pub fn hippi_solve(
    w: &SimilarityMatrix,
    a: &MultiAdjacency,
    u0: &UniverseAssignment,
    cfg: &SolverConfig,
) -> Result<(UniverseAssignment, SolverTrace)> {
    let op = build_wbar_apply(w, a)?;
    if u0.index() != w.index() {
        return Err(Error::DimensionMismatch(
            "initial assignment does not match the problem's blocks".into(),
        ));
    }
    let report = psd_report(a);
    if !report.is_psd() {
        let worst = report
            .violations()
            .map(|b| b.min_eigenvalue)
            .fold(f64::INFINITY, f64::min);
        if cfg.strict_psd {
            return Err(Error::Solver(format!(
                "adjacency is not positive semidefinite (smallest eigenvalue {worst:.3e})"
            )));
        }
        log::warn!(
            "adjacency is not positive semidefinite (smallest eigenvalue {worst:.3e}); monotonicity is not guaranteed"
        );
    }
    solve_with_operator(&op, u0, cfg)
}
