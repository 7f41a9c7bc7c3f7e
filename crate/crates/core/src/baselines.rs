//! Initialisers and reference methods: independent pairwise LAP matchings,
//! spectral permutation synchronisation, random and greedy seeding.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assignment::{lap_exact, ScoreBlock};
use crate::error::{Error, Result};
use crate::types::{BlockIndex, PairwiseMatchingSet, SimilarityMatrix, UniverseAssignment};

/// Dense block matrix of pairwise scores or 0/1 matchings with identity
/// diagonal blocks; block `(j, i)` is the transpose of block `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseInput {
    data: DMatrix<f64>,
    index: BlockIndex,
}

impl PairwiseInput {
    /// Symmetrises `data` and resets the diagonal blocks to the identity.
    pub fn new(data: DMatrix<f64>, index: BlockIndex) -> Result<Self> {
        let m = index.total();
        if data.nrows() != m || data.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "pairwise matrix is {}x{}, expected {m}x{m}",
                data.nrows(),
                data.ncols()
            )));
        }
        let mut data = (&data + data.transpose()) * 0.5;
        for i in 0..index.num_objects() {
            let r = index.range(i);
            data.view_mut((r.start, r.start), (r.len(), r.len()))
                .fill_with_identity();
        }
        Ok(Self { data, index })
    }

    pub fn from_matchings(x: &PairwiseMatchingSet) -> Result<Self> {
        Self::new(x.to_dense(), x.index().clone())
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    /// Entries above one half, as binary matchings.
    pub fn to_matchings(&self) -> PairwiseMatchingSet {
        let k = self.index.num_objects();
        let mut blocks = vec![Vec::new(); k * k];
        for i in 0..k {
            for j in 0..k {
                let (ri, rj) = (self.index.range(i), self.index.range(j));
                for (p, r) in ri.clone().enumerate() {
                    for (q, c) in rj.clone().enumerate() {
                        if self.data[(r, c)] > 0.5 {
                            blocks[i * k + j].push((p, q));
                        }
                    }
                }
            }
        }
        PairwiseMatchingSet::from_blocks(self.index.clone(), blocks).expect("in-range blocks")
    }
}

/// Matches every pair of objects independently by a rectangular LAP on
/// `W_ij`, so each pair gets `min(m_i, m_j)` matches. Ignores
/// cycle-consistency.
pub fn pairwise_lap_matchings(w: &SimilarityMatrix) -> Result<PairwiseInput> {
    let index = w.index();
    let k = index.num_objects();
    let mut x = DMatrix::zeros(index.total(), index.total());
    for i in 0..k {
        for j in i + 1..k {
            let block = w.block(i, j);
            let pairs: Vec<(usize, usize)> = if block.nrows() <= block.ncols() {
                let a = lap_exact(&ScoreBlock::from_matrix(&block)?)?;
                a.into_iter().enumerate().collect()
            } else {
                let a = lap_exact(&ScoreBlock::from_matrix(&block.transpose())?)?;
                a.into_iter().enumerate().map(|(q, p)| (p, q)).collect()
            };
            for (p, q) in pairs {
                let (r, c) = (index.offset(i) + p, index.offset(j) + q);
                x[(r, c)] = 1.0;
                x[(c, r)] = 1.0;
            }
        }
    }
    PairwiseInput::new(x, index.clone())
}

/// Score of opening a fresh universe column during spectral rounding; an
/// embedded point joins an existing column only if its cosine similarity to
/// the column's reference exceeds this.
const NEW_COLUMN_SCORE: f64 = 0.5;

/// Spectral synchronisation of pairwise matchings.
///
/// The top-`d` eigenvectors of the block matrix, scaled by the square root of
/// their eigenvalue magnitude, embed every point. Rows are then rounded to a
/// valid assignment object by object: the largest object seeds one universe
/// column per point, and every further object (largest first) is matched to
/// the current reference columns by a LAP on cosine similarities, with the
/// option to open new columns while fewer than `d` exist.
pub fn spectral_sync(x: &PairwiseInput, d: usize) -> Result<UniverseAssignment> {
    let index = x.index();
    if d < index.max_size() {
        return Err(Error::UniverseTooSmall {
            d,
            required: index.max_size(),
        });
    }
    let k = index.num_objects();
    if k == 1 {
        return identity_init(index, d);
    }
    let m = index.total();
    let eig = SymmetricEigen::try_new(x.data().clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Solver("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let rank = d.min(m);
    let mut embedding = DMatrix::zeros(m, rank);
    for (t, &e) in order.iter().take(rank).enumerate() {
        let scale = eig.eigenvalues[e].abs().sqrt();
        embedding.set_column(t, &(eig.eigenvectors.column(e) * scale));
    }
    for mut row in embedding.row_iter_mut() {
        let n = row.norm();
        if n > 0.0 {
            row /= n;
        }
    }

    let mut objects: Vec<usize> = (0..k).collect();
    objects.sort_by(|&a, &b| index.size(b).cmp(&index.size(a)).then(a.cmp(&b)));
    let anchor = objects[0];
    let mut assignment = vec![usize::MAX; m];
    let mut reference: Vec<usize> = Vec::with_capacity(d);
    for (p, g) in index.range(anchor).enumerate() {
        assignment[g] = p;
        reference.push(g);
    }
    for &i in &objects[1..] {
        let rows = index.size(i);
        let fresh = rows.min(d - reference.len());
        let cols = reference.len() + fresh;
        let mut scores = Vec::with_capacity(rows * cols);
        for g in index.range(i) {
            for &r in &reference {
                scores.push(embedding.row(g).dot(&embedding.row(r)));
            }
            scores.extend(std::iter::repeat_n(NEW_COLUMN_SCORE, fresh));
        }
        let a = lap_exact(&ScoreBlock::new(rows, cols, scores)?)?;
        let existing = reference.len();
        let mut opened = Vec::new();
        for (p, &c) in a.iter().enumerate() {
            let g = index.offset(i) + p;
            if c < existing {
                assignment[g] = c;
            } else {
                opened.push(g);
            }
        }
        for g in opened {
            assignment[g] = reference.len();
            reference.push(g);
        }
    }
    UniverseAssignment::new(assignment, d, index.clone())
}

/// Uniformly random injection of every object into the `d` columns.
pub fn random_init(index: &BlockIndex, d: usize, seed: u64) -> Result<UniverseAssignment> {
    if d < index.max_size() {
        return Err(Error::UniverseTooSmall {
            d,
            required: index.max_size(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = Vec::with_capacity(index.total());
    for i in 0..index.num_objects() {
        assignment.extend(rand::seq::index::sample(&mut rng, d, index.size(i)).iter());
    }
    UniverseAssignment::new(assignment, d, index.clone())
}

/// Point `p` of every object goes to column `p`.
pub fn identity_init(index: &BlockIndex, d: usize) -> Result<UniverseAssignment> {
    let assignment = (0..index.num_objects())
        .flat_map(|i| 0..index.size(i))
        .collect();
    UniverseAssignment::new(assignment, d, index.clone())
}

/// Similarity-based seeding: the largest object (lowest index on ties) gets
/// columns `0..m_a`, every other object is matched to it by a LAP on its
/// similarity block.
pub fn greedy_init(w: &SimilarityMatrix, d: usize) -> Result<UniverseAssignment> {
    let index = w.index();
    let k = index.num_objects();
    let anchor = (0..k)
        .max_by(|&a, &b| index.size(a).cmp(&index.size(b)).then(b.cmp(&a)))
        .expect("at least one object");
    let mut assignment = Vec::with_capacity(index.total());
    for i in 0..k {
        if i == anchor {
            assignment.extend(0..index.size(i));
        } else {
            let block = ScoreBlock::from_matrix(&w.block(i, anchor))?;
            assignment.extend(lap_exact(&block)?);
        }
    }
    UniverseAssignment::new(assignment, d, index.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{fscore, verify_cycle_consistency};
    use crate::types::Label;
    use rand::Rng;

    fn sim(index: &BlockIndex, entries: &[(usize, usize, f64)]) -> SimilarityMatrix {
        let m = index.total();
        let mut w = DMatrix::zeros(m, m);
        for &(r, c, v) in entries {
            w[(r, c)] = v;
            w[(c, r)] = v;
        }
        SimilarityMatrix::new(w, index.clone()).unwrap()
    }

    #[test]
    fn pairwise_identity_and_anti_diagonal() {
        let index = BlockIndex::from_sizes(&[2, 2]).unwrap();
        let x = pairwise_lap_matchings(&sim(&index, &[(0, 2, 1.0), (1, 3, 1.0)])).unwrap();
        assert_eq!(x.to_matchings().block(0, 1), &[(0, 0), (1, 1)]);
        let x = pairwise_lap_matchings(&sim(&index, &[(0, 3, 1.0), (1, 2, 1.0)])).unwrap();
        assert_eq!(x.to_matchings().block(0, 1), &[(0, 1), (1, 0)]);
        assert_eq!(x.to_matchings().block(1, 0), &[(0, 1), (1, 0)]);
    }

    #[test]
    fn pairwise_blocks_attain_lap_optimum() {
        fn brute(b: &DMatrix<f64>) -> f64 {
            let (rows, cols) = (b.nrows().min(b.ncols()), b.nrows().max(b.ncols()));
            let t = if b.nrows() <= b.ncols() {
                b.clone()
            } else {
                b.transpose()
            };
            fn rec(t: &DMatrix<f64>, r: usize, rows: usize, used: &mut Vec<bool>, acc: f64) -> f64 {
                if r == rows {
                    return acc;
                }
                let mut best = f64::NEG_INFINITY;
                for c in 0..used.len() {
                    if !used[c] {
                        used[c] = true;
                        best = best.max(rec(t, r + 1, rows, used, acc + t[(r, c)]));
                        used[c] = false;
                    }
                }
                best
            }
            rec(&t, 0, rows, &mut vec![false; cols], 0.0)
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let index = BlockIndex::from_sizes(&[3, 5, 4]).unwrap();
        let mut entries = Vec::new();
        for r in 0..12 {
            for c in 0..12 {
                let (i, _) = index.global_to_local(r).unwrap();
                let (j, _) = index.global_to_local(c).unwrap();
                if r < c && i != j {
                    entries.push((r, c, rng.random::<f64>()));
                }
            }
        }
        let w = sim(&index, &entries);
        let x = pairwise_lap_matchings(&w).unwrap().to_matchings();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    continue;
                }
                let b = w.block(i, j);
                let got: f64 = x.block(i, j).iter().map(|&(p, q)| b[(p, q)]).sum();
                assert!((got - brute(&b)).abs() < 1e-12);
                assert_eq!(x.block(i, j).len(), index.size(i).min(index.size(j)));
            }
        }
    }

    fn planted(index: &BlockIndex, d: usize, seed: u64) -> UniverseAssignment {
        random_init(index, d, seed).unwrap()
    }

    #[test]
    fn spectral_recovers_noiseless_input() {
        for seed in 0..10 {
            let index = BlockIndex::from_sizes(&[5, 4, 5, 3]).unwrap();
            let u = planted(&index, 6, seed);
            let x = PairwiseInput::from_matchings(&u.expand()).unwrap();
            let s = spectral_sync(&x, 6).unwrap();
            assert!(s.same_partition(&u), "seed {seed}");
        }
    }

    #[test]
    fn spectral_single_object_is_identity() {
        let index = BlockIndex::from_sizes(&[4]).unwrap();
        let x = PairwiseInput::new(DMatrix::zeros(4, 4), index.clone()).unwrap();
        assert_eq!(spectral_sync(&x, 5).unwrap().assignment(), &[0, 1, 2, 3]);
    }

    #[test]
    fn spectral_improves_corrupted_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (mut before, mut after) = (0.0, 0.0);
        for seed in 0..10 {
            let k = 8;
            let index = BlockIndex::from_sizes(&vec![6; k]).unwrap();
            let u = planted(&index, 6, seed);
            let labels: Vec<Label> = u.assignment().iter().map(|&c| Label::Universe(c)).collect();
            let mut dense = u.expand().to_dense();
            // replace ~10% of the off-diagonal blocks by random permutations
            for i in 0..k {
                for j in i + 1..k {
                    if rng.random::<f64>() < 0.1 {
                        let perm = rand::seq::index::sample(&mut rng, 6, 6).into_vec();
                        for p in 0..6 {
                            for q in 0..6 {
                                let v = if perm[p] == q { 1.0 } else { 0.0 };
                                dense[(index.offset(i) + p, index.offset(j) + q)] = v;
                                dense[(index.offset(j) + q, index.offset(i) + p)] = v;
                            }
                        }
                    }
                }
            }
            let x = PairwiseInput::new(dense, index.clone()).unwrap();
            before += fscore(&x.to_matchings(), &labels).unwrap().fscore;
            let s = spectral_sync(&x, 6).unwrap();
            assert_eq!(verify_cycle_consistency(&s.expand()).total(), 0);
            after += fscore(&s.expand(), &labels).unwrap().fscore;
        }
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn random_init_is_deterministic_and_uniform() {
        let index = BlockIndex::from_sizes(&[4, 4]).unwrap();
        assert_eq!(
            random_init(&index, 6, 5).unwrap(),
            random_init(&index, 6, 5).unwrap()
        );
        let u = random_init(&index, 4, 3).unwrap();
        for i in 0..2 {
            let mut b = u.block(i).to_vec();
            b.sort_unstable();
            assert_eq!(b, vec![0, 1, 2, 3]);
        }

        let single = BlockIndex::from_sizes(&[2]).unwrap();
        let n = 10_000;
        let identity = (0..n)
            .filter(|&s| random_init(&single, 2, s).unwrap().assignment() == [0, 1])
            .count();
        let freq = identity as f64 / n as f64;
        assert!((freq - 0.5).abs() <= 0.02, "{freq}");
    }

    #[test]
    fn greedy_init_follows_similarities() {
        let index = BlockIndex::from_sizes(&[2, 3]).unwrap();
        // object 1 is the anchor; object 0 point 0 ~ anchor point 2, point 1 ~ anchor point 0
        let w = sim(&index, &[(0, 4, 1.0), (1, 2, 1.0), (0, 3, 0.1)]);
        let u = greedy_init(&w, 4).unwrap();
        assert_eq!(u.assignment(), &[2, 0, 0, 1, 2]);
    }
}
