//! On-disk formats: JSON documents for problems, assignments and pairwise
//! matchings, CSV for traces and run reports.
//!
//! Floats are written in shortest round-trip form, so reading a written file
//! gives back bit-identical values.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::MatchReport;
use crate::solver::SolverTrace;
use crate::types::{BlockIndex, Object, PairwiseMatchingSet, ProblemInstance, UniverseAssignment};

const PROBLEM_FORMAT: &str = "hippi-problem";
const ASSIGNMENT_FORMAT: &str = "hippi-assignment";
const MATCHINGS_FORMAT: &str = "hippi-matchings";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemDoc {
    format: String,
    sizes: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    objects: Vec<Object>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssignmentDoc {
    format: String,
    d: usize,
    sizes: Vec<usize>,
    assignment: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlockDoc {
    i: usize,
    j: usize,
    pairs: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatchingsDoc {
    format: String,
    sizes: Vec<usize>,
    /// Nonempty blocks only.
    blocks: Vec<BlockDoc>,
}

fn check_format(found: &str, expected: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Parse(format!(
            "expected a {expected:?} document, found {found:?}"
        )));
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    let text = fs::read_to_string(path)?;
    if text.trim().is_empty() {
        return Err(Error::Parse(format!("{} is empty", path.display())));
    }
    Ok(text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn problem_to_string(p: &ProblemInstance) -> Result<String> {
    let doc = ProblemDoc {
        format: PROBLEM_FORMAT.into(),
        sizes: p.sizes(),
        seed: p.seed(),
        objects: p.objects().to_vec(),
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn problem_from_str(text: &str) -> Result<ProblemInstance> {
    let doc: ProblemDoc = serde_json::from_str(text)?;
    check_format(&doc.format, PROBLEM_FORMAT)?;
    let sizes: Vec<usize> = doc.objects.iter().map(Object::len).collect();
    if sizes != doc.sizes {
        return Err(Error::DimensionMismatch(format!(
            "declared sizes {:?} differ from object sizes {sizes:?}",
            doc.sizes
        )));
    }
    ProblemInstance::new(doc.objects, doc.seed)
}

pub fn assignment_to_string(u: &UniverseAssignment) -> Result<String> {
    let doc = AssignmentDoc {
        format: ASSIGNMENT_FORMAT.into(),
        d: u.universe_size(),
        sizes: u.index().sizes(),
        assignment: u.assignment().to_vec(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn assignment_from_str(text: &str) -> Result<UniverseAssignment> {
    let doc: AssignmentDoc = serde_json::from_str(text)?;
    check_format(&doc.format, ASSIGNMENT_FORMAT)?;
    let index = BlockIndex::from_sizes(&doc.sizes)?;
    UniverseAssignment::new(doc.assignment, doc.d, index)
}

pub fn matchings_to_string(x: &PairwiseMatchingSet) -> Result<String> {
    let k = x.num_objects();
    let mut blocks = Vec::new();
    for i in 0..k {
        for j in 0..k {
            if !x.block(i, j).is_empty() {
                blocks.push(BlockDoc {
                    i,
                    j,
                    pairs: x.block(i, j).to_vec(),
                });
            }
        }
    }
    let doc = MatchingsDoc {
        format: MATCHINGS_FORMAT.into(),
        sizes: x.index().sizes(),
        blocks,
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn matchings_from_str(text: &str) -> Result<PairwiseMatchingSet> {
    let doc: MatchingsDoc = serde_json::from_str(text)?;
    check_format(&doc.format, MATCHINGS_FORMAT)?;
    let index = BlockIndex::from_sizes(&doc.sizes)?;
    let k = index.num_objects();
    let mut blocks = vec![Vec::new(); k * k];
    for b in doc.blocks {
        if b.i >= k || b.j >= k {
            return Err(Error::IndexOutOfRange {
                index: b.i.max(b.j),
                len: k,
            });
        }
        blocks[b.i * k + b.j].extend(b.pairs);
    }
    PairwiseMatchingSet::from_blocks(index, blocks)
}

/// A result file produced by some matching method: either an object-to-
/// universe assignment or a set of pairwise matchings.
#[derive(Debug, Clone, PartialEq)]
pub enum MatchingFile {
    Assignment(UniverseAssignment),
    Matchings(PairwiseMatchingSet),
}

impl MatchingFile {
    pub fn to_matchings(&self) -> PairwiseMatchingSet {
        match self {
            MatchingFile::Assignment(u) => u.expand(),
            MatchingFile::Matchings(x) => x.clone(),
        }
    }

    pub fn index(&self) -> &BlockIndex {
        match self {
            MatchingFile::Assignment(u) => u.index(),
            MatchingFile::Matchings(x) => x.index(),
        }
    }
}

pub fn matching_file_from_str(text: &str) -> Result<MatchingFile> {
    #[derive(Deserialize)]
    struct Probe {
        format: String,
    }
    let probe: Probe = serde_json::from_str(text)?;
    match probe.format.as_str() {
        ASSIGNMENT_FORMAT => Ok(MatchingFile::Assignment(assignment_from_str(text)?)),
        MATCHINGS_FORMAT => Ok(MatchingFile::Matchings(matchings_from_str(text)?)),
        other => Err(Error::Parse(format!(
            "expected an assignment or matchings document, found {other:?}"
        ))),
    }
}

pub fn read_problem(path: &Path) -> Result<ProblemInstance> {
    problem_from_str(&read_text(path)?)
}

pub fn write_problem(path: &Path, p: &ProblemInstance) -> Result<()> {
    write_text(path, &problem_to_string(p)?)
}

pub fn read_assignment(path: &Path) -> Result<UniverseAssignment> {
    assignment_from_str(&read_text(path)?)
}

pub fn write_assignment(path: &Path, u: &UniverseAssignment) -> Result<()> {
    write_text(path, &assignment_to_string(u)?)
}

pub fn read_matchings(path: &Path) -> Result<PairwiseMatchingSet> {
    matchings_from_str(&read_text(path)?)
}

pub fn write_matchings(path: &Path, x: &PairwiseMatchingSet) -> Result<()> {
    write_text(path, &matchings_to_string(x)?)
}

pub fn read_matching_file(path: &Path) -> Result<MatchingFile> {
    matching_file_from_str(&read_text(path)?)
}

/// `iteration,objective` rows, starting with the initial assignment at
/// iteration 0.
pub fn trace_to_csv(trace: &SolverTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iteration", "objective"])?;
    for (t, f) in trace.objectives.iter().enumerate() {
        w.write_record([t.to_string(), f.to_string()])?;
    }
    finish_csv(w)
}

/// Objectives from a trace CSV written by [`trace_to_csv`].
pub fn trace_from_csv(text: &str) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let f = rec
            .get(1)
            .ok_or_else(|| Error::Parse("trace row without objective".into()))?;
        out.push(
            f.parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad objective {f:?}: {e}")))?,
        );
    }
    Ok(out)
}

/// One row of a run report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub k: usize,
    pub m: usize,
    pub d: usize,
    pub iterations: usize,
    pub objective: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub fscore: Option<f64>,
    pub cycle_error: f64,
    pub runtime_seconds: f64,
}

impl ReportRow {
    pub fn with_scores(mut self, r: &MatchReport) -> Self {
        self.precision = Some(r.precision);
        self.recall = Some(r.recall);
        self.fscore = Some(r.fscore);
        self
    }
}

pub fn report_to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    finish_csv(w)
}

pub fn report_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_csv(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}
