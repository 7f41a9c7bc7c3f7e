//! Domain types shared by the solver, kernels and evaluation code.
//!
//! Points are addressed either globally (`0..m`, objects stacked in order) or
//! locally as `(object, index within object)`. [`BlockIndex`] owns the
//! conversion between the two.

use std::fmt;
use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Cumulative offsets of each object's block in the global point index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockIndex {
    offsets: Vec<usize>,
    total: usize,
}

impl BlockIndex {
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::invalid("at least one object is required"));
        }
        if let Some(i) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::invalid(format!("object {i} has no points")));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut total = 0;
        for &s in sizes {
            offsets.push(total);
            total += s;
        }
        Ok(Self { offsets, total })
    }

    pub fn num_objects(&self) -> usize {
        self.offsets.len()
    }

    /// Total number of points `m`.
    pub fn total(&self) -> usize {
        self.total
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn offset(&self, object: usize) -> usize {
        self.offsets[object]
    }

    pub fn size(&self, object: usize) -> usize {
        let end = self.offsets.get(object + 1).copied().unwrap_or(self.total);
        end - self.offsets[object]
    }

    pub fn range(&self, object: usize) -> Range<usize> {
        self.offsets[object]..self.offsets[object] + self.size(object)
    }

    pub fn sizes(&self) -> Vec<usize> {
        (0..self.num_objects()).map(|i| self.size(i)).collect()
    }

    pub fn max_size(&self) -> usize {
        (0..self.num_objects())
            .map(|i| self.size(i))
            .max()
            .unwrap_or(0)
    }

    pub fn global_to_local(&self, g: usize) -> Result<(usize, usize)> {
        if g >= self.total {
            return Err(Error::IndexOutOfRange {
                index: g,
                len: self.total,
            });
        }
        let object = self.offsets.partition_point(|&o| o <= g) - 1;
        Ok((object, g - self.offsets[object]))
    }

    pub fn local_to_global(&self, object: usize, local: usize) -> Result<usize> {
        if object >= self.num_objects() || local >= self.size(object) {
            return Err(Error::invalid(format!(
                "point ({object}, {local}) does not exist"
            )));
        }
        Ok(self.offsets[object] + local)
    }
}

/// Ground-truth label of a single point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Universe(usize),
    Outlier,
}

impl Label {
    pub fn universe(self) -> Option<usize> {
        match self {
            Label::Universe(c) => Some(c),
            Label::Outlier => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Universe(c) => write!(f, "{c}"),
            Label::Outlier => f.write_str("outlier"),
        }
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Label::Universe(c) => s.serialize_u64(*c as u64),
            Label::Outlier => s.serialize_str("outlier"),
        }
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(usize),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Index(c) => Ok(Label::Universe(c)),
            Raw::Name(s) if s == "outlier" => Ok(Label::Outlier),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "unknown label {s:?}, expected an integer or \"outlier\""
            ))),
        }
    }
}

/// One object of a multi-matching problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub points: Vec<Vec<f64>>,
    pub features: Vec<Vec<f64>>,
    /// Precomputed intra-object distances (e.g. geodesics). Replaces the
    /// Euclidean distances between `points` when building adjacency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Label>>,
}

impl Object {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// A collection of `k` objects to be matched jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemInstance {
    objects: Vec<Object>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl ProblemInstance {
    pub fn new(objects: Vec<Object>, seed: Option<u64>) -> Result<Self> {
        let p = Self { objects, seed };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::invalid("a problem needs at least one object"));
        }
        let feature_dim = self.objects[0].features.first().map(Vec::len);
        let point_dim = self.objects[0].points.first().map(Vec::len);
        let labelled = self.objects[0].labels.is_some();
        for (i, o) in self.objects.iter().enumerate() {
            if o.is_empty() {
                return Err(Error::invalid(format!("object {i} has no points")));
            }
            if o.features.len() != o.len() {
                return Err(Error::DimensionMismatch(format!(
                    "object {i} has {} points but {} feature vectors",
                    o.len(),
                    o.features.len()
                )));
            }
            if o.features.iter().any(|f| Some(f.len()) != feature_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "object {i} has features of inconsistent dimension"
                )));
            }
            if o.points.iter().any(|p| Some(p.len()) != point_dim) {
                return Err(Error::DimensionMismatch(format!(
                    "object {i} has points of inconsistent dimension"
                )));
            }
            if let Some(dist) = &o.distances {
                if dist.len() != o.len() || dist.iter().any(|r| r.len() != o.len()) {
                    return Err(Error::DimensionMismatch(format!(
                        "object {i} distance matrix is not {0}x{0}",
                        o.len()
                    )));
                }
            }
            match &o.labels {
                Some(l) if l.len() != o.len() => {
                    return Err(Error::DimensionMismatch(format!(
                        "object {i} has {} labels for {} points",
                        l.len(),
                        o.len()
                    )))
                }
                l if l.is_some() != labelled => {
                    return Err(Error::invalid(
                        "ground truth must cover every object or none",
                    ))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    pub fn object(&self, i: usize) -> &Object {
        &self.objects[i]
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.objects.iter().map(Object::len).collect()
    }

    pub fn total_points(&self) -> usize {
        self.objects.iter().map(Object::len).sum()
    }

    pub fn feature_dim(&self) -> usize {
        self.objects[0].features[0].len()
    }

    pub fn block_index(&self) -> BlockIndex {
        BlockIndex::from_sizes(&self.sizes()).expect("validated instance")
    }

    pub fn has_ground_truth(&self) -> bool {
        self.objects[0].labels.is_some()
    }

    /// Ground-truth labels in global point order.
    pub fn ground_truth(&self) -> Option<Vec<Label>> {
        if !self.has_ground_truth() {
            return None;
        }
        Some(
            self.objects
                .iter()
                .flat_map(|o| o.labels.as_ref().expect("validated").iter().copied())
                .collect(),
        )
    }
}

/// Object-to-universe matching: each point is mapped to one of `d` universe
/// columns, with distinct columns inside every object.
///
/// Equivalent to a binary `m x d` matrix with a single one per row, stored as
/// the column index of that one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UniverseAssignment {
    assignment: Vec<usize>,
    d: usize,
    index: BlockIndex,
}

impl UniverseAssignment {
    pub fn new(assignment: Vec<usize>, d: usize, index: BlockIndex) -> Result<Self> {
        if assignment.len() != index.total() {
            return Err(Error::DimensionMismatch(format!(
                "assignment has {} entries for {} points",
                assignment.len(),
                index.total()
            )));
        }
        if d < index.max_size() {
            return Err(Error::UniverseTooSmall {
                d,
                required: index.max_size(),
            });
        }
        let mut seen = vec![usize::MAX; d];
        for i in 0..index.num_objects() {
            for g in index.range(i) {
                let c = assignment[g];
                if c >= d {
                    return Err(Error::invalid(format!(
                        "point {g} assigned to column {c} >= d = {d}"
                    )));
                }
                if seen[c] == i {
                    return Err(Error::invalid(format!(
                        "object {i} uses universe column {c} twice"
                    )));
                }
                seen[c] = i;
            }
        }
        Ok(Self {
            assignment,
            d,
            index,
        })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn into_assignment(self) -> Vec<usize> {
        self.assignment
    }

    pub fn universe_size(&self) -> usize {
        self.d
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    pub fn block(&self, object: usize) -> &[usize] {
        &self.assignment[self.index.range(object)]
    }

    /// Number of points assigned to each universe column (the diagonal of `UᵀU`).
    pub fn column_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.d];
        for &c in &self.assignment {
            counts[c] += 1;
        }
        counts
    }

    /// Relabels universe columns: column `c` becomes `perm[c]`.
    pub fn permute_columns(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for d = {}",
                perm.len(),
                self.d
            )));
        }
        let assignment = self.assignment.iter().map(|&c| perm[c]).collect();
        Self::new(assignment, self.d, self.index.clone())
    }

    /// Dense binary `m x d` matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut u = DMatrix::zeros(self.assignment.len(), self.d);
        for (g, &c) in self.assignment.iter().enumerate() {
            u[(g, c)] = 1.0;
        }
        u
    }

    /// Whether both assignments induce the same pairwise matchings, i.e.
    /// differ only by a relabelling of universe columns.
    pub fn same_partition(&self, other: &Self) -> bool {
        if self.index != other.index {
            return false;
        }
        let mut fwd = vec![usize::MAX; self.d];
        let mut bwd = vec![usize::MAX; other.d];
        for (&a, &b) in self.assignment.iter().zip(&other.assignment) {
            if fwd[a] == usize::MAX && bwd[b] == usize::MAX {
                fwd[a] = b;
                bwd[b] = a;
            } else if fwd[a] != b || bwd[b] != a {
                return false;
            }
        }
        true
    }

    /// The pairwise matchings `X = UUᵀ`.
    pub fn expand(&self) -> PairwiseMatchingSet {
        expand(self)
    }
}

/// All `k²` pairwise matchings, each block stored as sorted `(p, q)` pairs of
/// local indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairwiseMatchingSet {
    blocks: Vec<Vec<(usize, usize)>>,
    index: BlockIndex,
}

impl PairwiseMatchingSet {
    /// Builds a set from arbitrary binary blocks (`blocks[i * k + j]` is
    /// `X_ij`). Blocks need not be partial permutations, so corrupted or
    /// imported matchings can be represented and verified.
    pub fn from_blocks(index: BlockIndex, mut blocks: Vec<Vec<(usize, usize)>>) -> Result<Self> {
        let k = index.num_objects();
        if blocks.len() != k * k {
            return Err(Error::DimensionMismatch(format!(
                "expected {} blocks, got {}",
                k * k,
                blocks.len()
            )));
        }
        for i in 0..k {
            for j in 0..k {
                let b = &mut blocks[i * k + j];
                b.sort_unstable();
                b.dedup();
                if let Some(&(p, q)) = b
                    .iter()
                    .find(|&&(p, q)| p >= index.size(i) || q >= index.size(j))
                {
                    return Err(Error::invalid(format!(
                        "entry ({p}, {q}) outside block ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { blocks, index })
    }

    /// Builds a set from a list of matched global point pairs; every pair is
    /// inserted in both directions and identity blocks are added.
    pub fn from_global_pairs(index: BlockIndex, pairs: &[(usize, usize)]) -> Result<Self> {
        let k = index.num_objects();
        let mut blocks = vec![Vec::new(); k * k];
        for i in 0..k {
            blocks[i * k + i] = (0..index.size(i)).map(|p| (p, p)).collect();
        }
        for &(a, b) in pairs {
            let (i, p) = index.global_to_local(a)?;
            let (j, q) = index.global_to_local(b)?;
            blocks[i * k + j].push((p, q));
            blocks[j * k + i].push((q, p));
        }
        Self::from_blocks(index, blocks)
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    pub fn num_objects(&self) -> usize {
        self.index.num_objects()
    }

    /// Nonzero entries of `X_ij`.
    pub fn block(&self, i: usize, j: usize) -> &[(usize, usize)] {
        &self.blocks[i * self.num_objects() + j]
    }

    pub fn contains(&self, i: usize, j: usize, p: usize, q: usize) -> bool {
        self.block(i, j).binary_search(&(p, q)).is_ok()
    }

    /// Whether every block has row and column sums at most one.
    pub fn is_partial_permutation(&self) -> bool {
        let k = self.num_objects();
        for i in 0..k {
            for j in 0..k {
                let mut rows = vec![false; self.index.size(i)];
                let mut cols = vec![false; self.index.size(j)];
                for &(p, q) in self.block(i, j) {
                    if rows[p] || cols[q] {
                        return false;
                    }
                    rows[p] = true;
                    cols[q] = true;
                }
            }
        }
        true
    }

    /// Dense `m x m` 0/1 matrix.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.index.total();
        let k = self.num_objects();
        let mut x = DMatrix::zeros(m, m);
        for i in 0..k {
            for j in 0..k {
                for &(p, q) in self.block(i, j) {
                    x[(self.index.offset(i) + p, self.index.offset(j) + q)] = 1.0;
                }
            }
        }
        x
    }
}

/// Expands an object-to-universe assignment into pairwise matchings:
/// point `p` of object `i` matches point `q` of object `j` iff both share a
/// universe column.
pub fn expand(u: &UniverseAssignment) -> PairwiseMatchingSet {
    let index = u.index();
    let k = index.num_objects();
    // members[c] lists (object, local) pairs in global order
    let mut members: Vec<Vec<(usize, usize)>> = vec![Vec::new(); u.universe_size()];
    for i in 0..k {
        for (p, &c) in u.block(i).iter().enumerate() {
            members[c].push((i, p));
        }
    }
    let mut blocks = vec![Vec::new(); k * k];
    for col in &members {
        for &(i, p) in col {
            for &(j, q) in col {
                blocks[i * k + j].push((p, q));
            }
        }
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    PairwiseMatchingSet {
        blocks,
        index: index.clone(),
    }
}

/// Cross-object similarity scores `W`, a dense symmetric `m x m` matrix with
/// zero diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    data: DMatrix<f64>,
    index: BlockIndex,
    self_weight: f64,
}

impl SimilarityMatrix {
    pub fn new(data: DMatrix<f64>, index: BlockIndex) -> Result<Self> {
        let m = index.total();
        if data.nrows() != m || data.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "similarity matrix is {}x{}, expected {m}x{m}",
                data.nrows(),
                data.ncols()
            )));
        }
        for c in 0..m {
            for r in 0..m {
                let v = data[(r, c)];
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::invalid(format!(
                        "similarity ({r}, {c}) = {v} is not a finite non-negative number"
                    )));
                }
                if v != data[(c, r)] {
                    return Err(Error::invalid(format!(
                        "similarity matrix is not symmetric at ({r}, {c})"
                    )));
                }
            }
        }
        for i in 0..index.num_objects() {
            let r = index.range(i);
            if data
                .view((r.start, r.start), (r.len(), r.len()))
                .iter()
                .any(|&v| v != 0.0)
            {
                return Err(Error::invalid(format!(
                    "diagonal block {i} of the similarity matrix is not zero"
                )));
            }
        }
        Ok(Self {
            data,
            index,
            self_weight: 0.0,
        })
    }

    /// Sets the similarity `λ` of every point with itself. The reweighting
    /// then uses `W + λI`; the stored cross-object blocks are unchanged.
    pub fn with_self_weight(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "self weight must be finite and non-negative, got {lambda}"
            )));
        }
        self.self_weight = lambda;
        Ok(self)
    }

    pub fn self_weight(&self) -> f64 {
        self.self_weight
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    /// Block `W_ij` as an owned `m_i x m_j` matrix.
    pub fn block(&self, i: usize, j: usize) -> DMatrix<f64> {
        let (ri, rj) = (self.index.range(i), self.index.range(j));
        self.data
            .view((ri.start, rj.start), (ri.len(), rj.len()))
            .into_owned()
    }
}

/// Block-diagonal multi-adjacency matrix `A = diag(A_1, ..., A_k)`; only the
/// blocks are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAdjacency {
    blocks: Vec<DMatrix<f64>>,
    index: BlockIndex,
}

impl MultiAdjacency {
    /// Checks shapes and symmetry. Positive semidefiniteness is checked
    /// separately by [`crate::kernels::psd_report`].
    pub fn new(blocks: Vec<DMatrix<f64>>, index: BlockIndex) -> Result<Self> {
        if blocks.len() != index.num_objects() {
            return Err(Error::DimensionMismatch(format!(
                "{} adjacency blocks for {} objects",
                blocks.len(),
                index.num_objects()
            )));
        }
        for (i, b) in blocks.iter().enumerate() {
            let s = index.size(i);
            if b.nrows() != s || b.ncols() != s {
                return Err(Error::DimensionMismatch(format!(
                    "adjacency block {i} is {}x{}, expected {s}x{s}",
                    b.nrows(),
                    b.ncols()
                )));
            }
            if b != &b.transpose() {
                return Err(Error::invalid(format!(
                    "adjacency block {i} is not symmetric"
                )));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("adjacency block {i} is not finite")));
            }
        }
        Ok(Self { blocks, index })
    }

    /// `A = I`, i.e. no geometric term.
    pub fn identity(index: BlockIndex) -> Self {
        let blocks = (0..index.num_objects())
            .map(|i| DMatrix::identity(index.size(i), index.size(i)))
            .collect();
        Self { blocks, index }
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DMatrix<f64> {
        &self.blocks[i]
    }

    pub fn index(&self) -> &BlockIndex {
        &self.index
    }

    /// Computes `A x` blockwise.
    pub fn apply(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(x.nrows(), x.ncols());
        for (i, b) in self.blocks.iter().enumerate() {
            let r = self.index.range(i);
            let xi = x.rows(r.start, r.len());
            out.rows_mut(r.start, r.len()).copy_from(&(b * xi));
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.index.total();
        let mut a = DMatrix::zeros(m, m);
        for (i, b) in self.blocks.iter().enumerate() {
            let o = self.index.offset(i);
            a.view_mut((o, o), (b.nrows(), b.ncols())).copy_from(b);
        }
        a
    }
}
