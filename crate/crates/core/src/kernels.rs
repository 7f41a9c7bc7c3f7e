//! Gaussian kernels: cross-object feature similarities `W` and per-object
//! geometric adjacency blocks `A_i`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{MultiAdjacency, ProblemInstance, SimilarityMatrix};

/// Relative tolerance for the smallest eigenvalue of an adjacency block.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// How the per-pair weight `ω_pq` of the similarity kernel is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// `ω_pq = 1`.
    #[default]
    Constant,
    /// Down-weights descriptors that have a close neighbour inside their own
    /// object. With `δ_p` the distance from descriptor `p` to the nearest
    /// other descriptor of the same object,
    /// `ω_p = 1 - exp(-δ_p² / (2σ²))` and `ω_pq = sqrt(ω_p ω_q)`.
    /// Objects with a single point get `ω_p = 1`.
    IntraRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelConfig {
    /// Bandwidth of the feature similarity kernel.
    pub sigma: f64,
    /// Scaling of the adjacency bandwidth.
    pub mu: f64,
    pub weight_mode: WeightMode,
    /// Keep only the `t` largest similarities per row; 0 keeps everything.
    pub knn_sparsify: usize,
    /// Similarity of each point with itself, used by the reweighting.
    pub self_weight: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            mu: 1.0,
            weight_mode: WeightMode::Constant,
            knn_sparsify: 0,
            self_weight: 0.0,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid(format!(
                "sigma must be > 0, got {}",
                self.sigma
            )));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid(format!("mu must be > 0, got {}", self.mu)));
        }
        if !(self.self_weight >= 0.0) || !self.self_weight.is_finite() {
            return Err(Error::invalid(format!(
                "self_weight must be >= 0, got {}",
                self.self_weight
            )));
        }
        Ok(())
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn intra_weights(p: &ProblemInstance, sigma: f64) -> Vec<f64> {
    let mut weights = Vec::with_capacity(p.total_points());
    for o in p.objects() {
        for (a, fa) in o.features.iter().enumerate() {
            let nearest = o
                .features
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(_, fb)| sq_dist(fa, fb))
                .fold(f64::INFINITY, f64::min);
            weights.push(if nearest.is_finite() {
                1.0 - (-nearest / (2.0 * sigma * sigma)).exp()
            } else {
                1.0
            });
        }
    }
    weights
}

/// `[W_ij]_pq = ω_pq exp(-‖F_i[p] - F_j[q]‖² / (2σ²))` for `i ≠ j`, zero
/// diagonal blocks.
pub fn build_similarity(p: &ProblemInstance, cfg: &KernelConfig) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    p.validate()?;
    let index = p.block_index();
    let m = index.total();
    let feats: Vec<&[f64]> = p
        .objects()
        .iter()
        .flat_map(|o| o.features.iter().map(Vec::as_slice))
        .collect();
    let owner: Vec<usize> = (0..index.num_objects())
        .flat_map(|i| std::iter::repeat_n(i, index.size(i)))
        .collect();
    let omega = match cfg.weight_mode {
        WeightMode::Constant => None,
        WeightMode::IntraRatio => Some(intra_weights(p, cfg.sigma)),
    };
    let denom = 2.0 * cfg.sigma * cfg.sigma;

    let mut w = DMatrix::zeros(m, m);
    for c in 0..m {
        for r in 0..c {
            if owner[r] == owner[c] {
                continue;
            }
            let mut v = (-sq_dist(feats[r], feats[c]) / denom).exp();
            if let Some(om) = &omega {
                v *= (om[r] * om[c]).sqrt();
            }
            w[(r, c)] = v;
            w[(c, r)] = v;
        }
    }

    if cfg.knn_sparsify > 0 && cfg.knn_sparsify < m {
        let t = cfg.knn_sparsify;
        let mut kept = DMatrix::zeros(m, m);
        let mut row: Vec<(f64, usize)> = Vec::with_capacity(m);
        for r in 0..m {
            row.clear();
            row.extend((0..m).map(|c| (w[(r, c)], c)));
            row.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            for &(v, c) in row.iter().take(t) {
                kept[(r, c)] = v;
            }
        }
        for c in 0..m {
            for r in 0..m {
                w[(r, c)] = (kept[(r, c)] + kept[(c, r)]) / 2.0;
            }
        }
    }
    SimilarityMatrix::new(w, index)?.with_self_weight(cfg.self_weight)
}

/// Distances between the points of one object, either precomputed or
/// Euclidean.
fn object_distances(p: &ProblemInstance, object: usize) -> Result<DMatrix<f64>> {
    let o = p.object(object);
    let n = o.len();
    let mut d = DMatrix::zeros(n, n);
    match &o.distances {
        Some(given) => {
            for a in 0..n {
                for b in a + 1..n {
                    let (x, y) = (given[a][b], given[b][a]);
                    if !(x >= 0.0) || (x - y).abs() > 1e-12 * x.abs().max(y.abs()).max(1.0) {
                        return Err(Error::invalid(format!(
                            "distance matrix of object {object} is not symmetric and non-negative at ({a}, {b})"
                        )));
                    }
                    d[(a, b)] = x;
                    d[(b, a)] = x;
                }
            }
        }
        None => {
            for a in 0..n {
                for b in a + 1..n {
                    let v = sq_dist(&o.points[a], &o.points[b]).sqrt();
                    d[(a, b)] = v;
                    d[(b, a)] = v;
                }
            }
        }
    }
    Ok(d)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `[A_i]_pq = exp(-d_pq² / (2μσ_A²))` with `σ_A` the median nearest-neighbour
/// distance of object `i`.
pub fn build_adjacency(p: &ProblemInstance, cfg: &KernelConfig) -> Result<MultiAdjacency> {
    cfg.validate()?;
    p.validate()?;
    let index = p.block_index();
    let mut blocks = Vec::with_capacity(index.num_objects());
    for i in 0..index.num_objects() {
        let n = index.size(i);
        if n == 1 {
            blocks.push(DMatrix::from_element(1, 1, 1.0));
            continue;
        }
        let d = object_distances(p, i)?;
        let mut dmin: Vec<f64> = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| b != a)
                    .map(|b| d[(a, b)])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let sigma_a = median(&mut dmin);
        if !(sigma_a > 0.0) {
            return Err(Error::DegenerateObject {
                object: i,
                reason: "median nearest-neighbour distance is zero".into(),
            });
        }
        let denom = 2.0 * cfg.mu * sigma_a * sigma_a;
        blocks.push(d.map(|v| (-v * v / denom).exp()));
    }
    MultiAdjacency::new(blocks, index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockPsd {
    pub object: usize,
    pub min_eigenvalue: f64,
    /// Largest absolute eigenvalue.
    pub norm: f64,
    pub violates: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdReport {
    pub blocks: Vec<BlockPsd>,
}

impl PsdReport {
    pub fn is_psd(&self) -> bool {
        self.blocks.iter().all(|b| !b.violates)
    }

    pub fn violations(&self) -> impl Iterator<Item = &BlockPsd> {
        self.blocks.iter().filter(|b| b.violates)
    }
}

fn block_psd(object: usize, b: &DMatrix<f64>) -> BlockPsd {
    let eig = b.clone().symmetric_eigenvalues();
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let norm = eig.iter().map(|v| v.abs()).fold(0.0, f64::max);
    BlockPsd {
        object,
        min_eigenvalue,
        norm,
        violates: min_eigenvalue < -PSD_TOLERANCE * norm,
    }
}

/// Smallest eigenvalue of every adjacency block, flagging blocks below
/// `-PSD_TOLERANCE * ‖A_i‖`.
pub fn psd_report(a: &MultiAdjacency) -> PsdReport {
    PsdReport {
        blocks: a
            .blocks()
            .iter()
            .enumerate()
            .map(|(i, b)| block_psd(i, b))
            .collect(),
    }
}

/// Clamps negative eigenvalues of violating blocks to zero. Returns the
/// repaired matrix and the report of the input.
pub fn repair_psd(a: &MultiAdjacency) -> Result<(MultiAdjacency, PsdReport)> {
    let report = psd_report(a);
    let mut blocks = a.blocks().to_vec();
    for v in report.violations() {
        log::warn!(
            "repairing adjacency block {} (min eigenvalue {:.3e})",
            v.object,
            v.min_eigenvalue
        );
        let eig = SymmetricEigen::new(blocks[v.object].clone());
        let clamped = eig.eigenvalues.map(|l| l.max(0.0));
        let q = &eig.eigenvectors;
        let r = q * DMatrix::from_diagonal(&clamped) * q.transpose();
        blocks[v.object] = (&r + r.transpose()) * 0.5;
    }
    Ok((MultiAdjacency::new(blocks, a.index().clone())?, report))
}
