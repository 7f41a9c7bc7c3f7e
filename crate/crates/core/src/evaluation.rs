//! Cycle-consistency checks and ground-truth scores.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Label, PairwiseMatchingSet, UniverseAssignment};

/// Violation counts of the three cycle-consistency conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CycleReport {
    /// Entries where `X_ii` differs from the identity.
    pub identity_violations: usize,
    /// Entries of `X_ij` (i < j) that differ from `X_jiᵀ`.
    pub symmetry_violations: usize,
    /// Entries of `X_ij X_jℓ` exceeding `X_iℓ`, over distinct objects with `i < ℓ`.
    pub transitivity_violations: usize,
    /// Nonzero entries of all composed matchings `X_ij X_jℓ` (same triples).
    pub composed_matches: usize,
}

impl CycleReport {
    pub fn total(&self) -> usize {
        self.identity_violations + self.symmetry_violations + self.transitivity_violations
    }

    pub fn is_consistent(&self) -> bool {
        self.total() == 0
    }
}

fn sym_diff(a: &[(usize, usize)], b: &[(usize, usize)]) -> usize {
    let (mut x, mut y, mut n) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => {
                n += 1;
                x += 1;
            }
            std::cmp::Ordering::Greater => {
                n += 1;
                y += 1;
            }
            std::cmp::Ordering::Equal => {
                x += 1;
                y += 1;
            }
        }
    }
    n + (a.len() - x) + (b.len() - y)
}

/// (violations, nonzero composed entries) of `X_ij X_jℓ ≤ X_iℓ`.
fn transitivity(x: &PairwiseMatchingSet, i: usize, j: usize, l: usize) -> (usize, usize) {
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(q, r) in x.block(j, l) {
        next.entry(q).or_default().push(r);
    }
    let mut composed: Vec<(usize, usize)> = Vec::new();
    for &(p, q) in x.block(i, j) {
        if let Some(rs) = next.get(&q) {
            composed.extend(rs.iter().map(|&r| (p, r)));
        }
    }
    composed.sort_unstable();
    let (mut violations, mut distinct) = (0, 0);
    for run in composed.chunk_by(|a, b| a == b) {
        distinct += 1;
        let allowed = usize::from(x.contains(i, l, run[0].0, run[0].1));
        if run.len() > allowed {
            violations += 1;
        }
    }
    (violations, distinct)
}

/// Checks identity, symmetry and transitivity of a set of pairwise
/// matchings with exact integer counting.
pub fn verify_cycle_consistency(x: &PairwiseMatchingSet) -> CycleReport {
    let k = x.num_objects();
    let index = x.index();
    let mut report = CycleReport::default();
    for i in 0..k {
        let identity: Vec<(usize, usize)> = (0..index.size(i)).map(|p| (p, p)).collect();
        report.identity_violations += sym_diff(x.block(i, i), &identity);
        for j in i + 1..k {
            let mut transposed: Vec<(usize, usize)> =
                x.block(j, i).iter().map(|&(q, p)| (p, q)).collect();
            transposed.sort_unstable();
            report.symmetry_violations += sym_diff(x.block(i, j), &transposed);
        }
    }
    let (violations, composed) = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut acc = (0, 0);
            for l in i + 1..k {
                for j in (0..k).filter(|&j| j != i && j != l) {
                    let (v, c) = transitivity(x, i, j, l);
                    acc.0 += v;
                    acc.1 += c;
                }
            }
            acc
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    report.transitivity_violations = violations;
    report.composed_matches = composed;
    report
}

/// Fraction of composed three-cycle matches that violate transitivity
/// (0 when nothing is composed).
pub fn cycle_error(x: &PairwiseMatchingSet) -> f64 {
    cycle_error_from(&verify_cycle_consistency(x))
}

pub fn cycle_error_from(report: &CycleReport) -> f64 {
    if report.composed_matches == 0 {
        0.0
    } else {
        report.transitivity_violations as f64 / report.composed_matches as f64
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub cycle_error: f64,
    pub runtime_seconds: f64,
}

impl MatchReport {
    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let fscore = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            fscore,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            ..Default::default()
        }
    }
}

fn check_truth(x: &PairwiseMatchingSet, truth: &[Label]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::MissingGroundTruth);
    }
    if truth.len() != x.index().total() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} points",
            truth.len(),
            x.index().total()
        )));
    }
    Ok(())
}

/// Number of unordered cross-object pairs sharing a universe label.
fn true_pair_count(x: &PairwiseMatchingSet, truth: &[Label]) -> usize {
    let index = x.index();
    let mut per_label: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..index.num_objects() {
        for g in index.range(i) {
            if let Label::Universe(c) = truth[g] {
                let counts = per_label
                    .entry(c)
                    .or_insert_with(|| vec![0; index.num_objects()]);
                counts[i] += 1;
            }
        }
    }
    per_label
        .values()
        .map(|counts| {
            let total: usize = counts.iter().sum();
            let same: usize = counts.iter().map(|n| n * n).sum();
            (total * total - same) / 2
        })
        .sum()
}

/// Pair-level precision, recall and fscore of predicted matchings. Each
/// unordered cross-object pair is counted once (from `X_ij`, `i < j`); cycle
/// error is left at zero.
pub fn fscore(predicted: &PairwiseMatchingSet, truth: &[Label]) -> Result<MatchReport> {
    check_truth(predicted, truth)?;
    let index = predicted.index();
    let k = index.num_objects();
    let (mut tp, mut fp) = (0, 0);
    for i in 0..k {
        for j in i + 1..k {
            for &(p, q) in predicted.block(i, j) {
                let a = truth[index.offset(i) + p];
                let b = truth[index.offset(j) + q];
                match (a, b) {
                    (Label::Universe(x), Label::Universe(y)) if x == y => tp += 1,
                    _ => fp += 1,
                }
            }
        }
    }
    let total = true_pair_count(predicted, truth);
    Ok(MatchReport::from_counts(tp, fp, total - tp.min(total)))
}

/// Full report for pairwise matchings, including cycle error.
pub fn evaluate_matchings(predicted: &PairwiseMatchingSet, truth: &[Label]) -> Result<MatchReport> {
    let mut report = fscore(predicted, truth)?;
    report.cycle_error = cycle_error(predicted);
    Ok(report)
}

/// Report for a universe assignment (cycle error is zero by construction
/// but still measured).
pub fn evaluate_assignment(u: &UniverseAssignment, truth: &[Label]) -> Result<MatchReport> {
    evaluate_matchings(&u.expand(), truth)
}
