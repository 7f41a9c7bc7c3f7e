//! Rectangular linear assignment and the projection onto the set of valid
//! object-to-universe matchings.
//!
//! Every solver here maximises: rows are assigned to distinct columns so that
//! the summed score is as large as possible. Blocks are never padded with
//! dummy rows; surplus columns simply stay unassigned.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BlockIndex, UniverseAssignment};

/// Dense `rows x cols` score matrix (row-major), `rows <= cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBlock {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl ScoreBlock {
    pub fn new(rows: usize, cols: usize, scores: Vec<f64>) -> Result<Self> {
        if rows > cols {
            return Err(Error::InfeasibleBlock { rows, cols });
        }
        if scores.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for a {rows}x{cols} block",
                scores.len()
            )));
        }
        if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("score {v} is not finite")));
        }
        Ok(Self { rows, cols, scores })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged score rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let scores = (0..m.nrows())
            .flat_map(|r| (0..m.ncols()).map(move |c| m[(r, c)]))
            .collect();
        Self::new(m.nrows(), m.ncols(), scores)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.scores[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.scores[r * self.cols..(r + 1) * self.cols]
    }

    /// Summed score of an assignment, accumulated in row order.
    pub fn objective(&self, assignment: &[usize]) -> f64 {
        assignment
            .iter()
            .enumerate()
            .map(|(r, &c)| self.get(r, c))
            .sum()
    }

    fn is_integral(&self) -> bool {
        self.scores.iter().all(|v| v.fract() == 0.0)
    }

    fn range(&self) -> f64 {
        let (lo, hi) = self
            .scores
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if self.scores.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }
}

/// Exact maximum-score assignment via shortest augmenting paths with dual
/// potentials (Hungarian / Jonker-Volgenant family), O(rows² · cols).
///
/// Ties are broken deterministically: among equally short augmenting paths
/// the lowest column index wins.
pub fn lap_exact(block: &ScoreBlock) -> Result<Vec<usize>> {
    let (n, m) = (block.rows, block.cols);
    if n > m {
        return Err(Error::InfeasibleBlock { rows: n, cols: m });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // 1-based: index 0 is the virtual root of the augmenting tree.
    let cost = |i: usize, j: usize| -block.get(i - 1, j - 1);
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::Solver(
                    "assignment search found no free column".into(),
                ));
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=m {
        if owner[j] > 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    Ok(assignment)
}

/// ε-scaling parameters for the auction solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionConfig {
    pub eps_start: f64,
    pub eps_scale: f64,
    pub eps_min: f64,
    /// Cap on the total number of bids (forward and reverse) over all phases.
    pub max_rounds: usize,
}

impl AuctionConfig {
    /// Default schedule for a block.
    ///
    /// Scores are treated as integer multiples of a resolution `q`: `q = 1`
    /// when every score is integral, otherwise `q = range · 1e-6`. Then
    /// `eps_start = range / 4`, `eps_scale = 0.2` and
    /// `eps_min = q / (rows + 1)`, which makes the result exactly optimal on
    /// integer scores.
    pub fn for_block(block: &ScoreBlock) -> Self {
        let range = block.range();
        let range = if range > 0.0 { range } else { 1.0 };
        let resolution = if block.is_integral() {
            1.0
        } else {
            range * 1e-6
        };
        let eps_min = resolution / (block.rows as f64 + 1.0);
        Self {
            eps_start: (range / 4.0).max(eps_min * 2.0),
            eps_scale: 0.2,
            eps_min,
            max_rounds: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps_min > 0.0 && self.eps_start > self.eps_min) {
            return Err(Error::invalid(format!(
                "auction needs eps_start > eps_min > 0 (got {} and {})",
                self.eps_start, self.eps_min
            )));
        }
        if !(self.eps_scale > 0.0 && self.eps_scale < 1.0) {
            return Err(Error::invalid(format!(
                "auction eps_scale must lie in (0, 1), got {}",
                self.eps_scale
            )));
        }
        Ok(())
    }
}

fn best_two(values: impl Iterator<Item = (usize, f64)>) -> (usize, f64, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    for (idx, v) in values {
        if v > best.1 {
            second = best.1;
            best = (idx, v);
        } else if v > second {
            second = v;
        }
    }
    (best.0, best.1, second)
}

/// Forward/reverse auction with ε-scaling for asymmetric assignment
/// (rows <= cols). The result is within `rows · eps_min` of the optimum.
///
/// Each phase runs forward bids until every row is assigned, then reverse
/// bids that push the prices of unassigned columns down to the smallest price
/// of an assigned column, so the bound also holds for surplus columns.
pub fn lap_auction(block: &ScoreBlock, cfg: &AuctionConfig) -> Result<Vec<usize>> {
    cfg.validate()?;
    let (n, m) = (block.rows, block.cols);
    if n > m {
        return Err(Error::InfeasibleBlock { rows: n, cols: m });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        let (best, _, _) = best_two(block.row(0).iter().copied().enumerate());
        return Ok(vec![best]);
    }

    let mut price = vec![0.0f64; m];
    let mut profit = vec![0.0f64; n];
    let mut owner: Vec<Option<usize>> = vec![None; m];
    let mut assigned: Vec<Option<usize>> = vec![None; n];
    let mut rounds = 0usize;
    let mut eps = cfg.eps_start;

    loop {
        owner.fill(None);
        assigned.fill(None);
        let mut persons: VecDeque<usize> = (0..n).collect();
        while let Some(i) = persons.pop_front() {
            rounds += 1;
            if rounds > cfg.max_rounds {
                return Err(Error::AuctionDiverged(cfg.max_rounds));
            }
            let row = block.row(i);
            let (j, _, second) = best_two(row.iter().zip(&price).map(|(a, p)| a - p).enumerate());
            price[j] = row[j] - second + eps;
            profit[i] = second - eps;
            if let Some(prev) = owner[j].replace(i) {
                assigned[prev] = None;
                persons.push_back(prev);
            }
            assigned[i] = Some(j);
        }

        let lambda = (0..m)
            .filter(|&j| owner[j].is_some())
            .map(|j| price[j])
            .fold(f64::INFINITY, f64::min);
        let mut objects: VecDeque<usize> = (0..m)
            .filter(|&j| owner[j].is_none() && price[j] > lambda)
            .collect();
        while let Some(j) = objects.pop_front() {
            if owner[j].is_some() || price[j] <= lambda {
                continue;
            }
            rounds += 1;
            if rounds > cfg.max_rounds {
                return Err(Error::AuctionDiverged(cfg.max_rounds));
            }
            let (i, beta, gamma) = best_two((0..n).map(|i| (i, block.get(i, j) - profit[i])));
            if lambda >= beta - eps {
                price[j] = lambda;
                continue;
            }
            let new_price = lambda.max(gamma - eps);
            let old = assigned[i].expect("all rows assigned after the forward stage");
            price[j] = new_price;
            profit[i] = block.get(i, j) - new_price;
            owner[old] = None;
            owner[j] = Some(i);
            assigned[i] = Some(j);
            if price[old] > lambda {
                objects.push_back(old);
            }
        }

        if eps <= cfg.eps_min {
            break;
        }
        eps = (eps * cfg.eps_scale).max(cfg.eps_min);
    }

    Ok(assigned
        .into_iter()
        .map(|a| a.expect("every row is assigned"))
        .collect())
}

/// Block solver used by [`project_to_universe`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionMethod {
    #[default]
    Exact,
    Auction,
}

impl std::str::FromStr for ProjectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Self::Exact),
            "auction" => Ok(Self::Auction),
            other => Err(Error::invalid(format!(
                "unknown projection method {other:?} (expected exact or auction)"
            ))),
        }
    }
}

fn solve_block(block: &ScoreBlock, method: ProjectionMethod) -> Result<Vec<usize>> {
    match method {
        ProjectionMethod::Exact => lap_exact(block),
        ProjectionMethod::Auction => match lap_auction(block, &AuctionConfig::for_block(block)) {
            Err(Error::AuctionDiverged(rounds)) => {
                log::warn!("auction exceeded {rounds} rounds, falling back to exact LAP");
                lap_exact(block)
            }
            other => other,
        },
    }
}

/// Euclidean projection of a dense `m x d` matrix onto valid universe
/// assignments: maximises `⟨U, V⟩`, which splits into one rectangular LAP per
/// object block.
pub fn project_to_universe(
    v: &DMatrix<f64>,
    index: &BlockIndex,
    method: ProjectionMethod,
) -> Result<UniverseAssignment> {
    let d = v.ncols();
    if v.nrows() != index.total() {
        return Err(Error::DimensionMismatch(format!(
            "score matrix has {} rows for {} points",
            v.nrows(),
            index.total()
        )));
    }
    if d < index.max_size() {
        return Err(Error::UniverseTooSmall {
            d,
            required: index.max_size(),
        });
    }
    let blocks: Vec<Vec<usize>> = (0..index.num_objects())
        .into_par_iter()
        .map(|i| {
            let r = index.range(i);
            let block = ScoreBlock::from_matrix(&v.rows(r.start, r.len()).into_owned())?;
            solve_block(&block, method)
        })
        .collect::<Result<_>>()?;
    UniverseAssignment::new(blocks.concat(), d, index.clone())
}

/// `⟨U, V⟩` for a universe assignment.
pub fn assignment_score(v: &DMatrix<f64>, u: &UniverseAssignment) -> f64 {
    u.assignment()
        .iter()
        .enumerate()
        .map(|(g, &c)| v[(g, c)])
        .sum()
}
