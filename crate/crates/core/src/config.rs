//! Run configuration loaded from TOML.
//!
//! ```toml
//! seed = 7
//! method = "hippi"
//! init = "greedy"
//! problem = "problem.json"
//! out = "results"
//!
//! [kernel]
//! sigma = 0.5
//! mu = 1.0
//!
//! [solver]
//! max_iters = 200
//! projection = "auction"
//! universe_size = { explicit = 30 }
//!
//! [generate]
//! k = 5
//! d_true = 12
//!
//! [bench]
//! sizes = [500, 1000, 2000]
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelConfig;
use crate::solver::SolverConfig;
use crate::synthgen::GenConfig;

/// A named matching method.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    #[default]
    Hippi,
    /// Spectral synchronisation of per-pair LAP matchings.
    Spectral,
    Random,
    Greedy,
    /// The ground-truth assignment of a generated problem.
    Planted,
    /// Results produced by another tool, read from the `import` file. The
    /// name records which tool (`external-file`, `quickmatch`, `matchals`,
    /// `matcheig`).
    External(String),
}

pub const METHOD_NAMES: &[&str] = &[
    "hippi",
    "spectral",
    "random",
    "greedy",
    "planted",
    "external-file",
    "quickmatch",
    "matchals",
    "matcheig",
];

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "hippi" => Method::Hippi,
            "spectral" => Method::Spectral,
            "random" => Method::Random,
            "greedy" => Method::Greedy,
            "planted" => Method::Planted,
            "external-file" | "quickmatch" | "matchals" | "matcheig" => {
                Method::External(s.to_string())
            }
            _ => {
                return Err(Error::invalid(format!(
                    "unknown method {s:?}; known methods: {}",
                    METHOD_NAMES.join(", ")
                )))
            }
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Hippi => "hippi",
            Method::Spectral => "spectral",
            Method::Random => "random",
            Method::Greedy => "greedy",
            Method::Planted => "planted",
            Method::External(name) => name,
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// How the solver's starting assignment is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitMethod {
    #[default]
    Greedy,
    Random,
    Identity,
}

impl FromStr for InitMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(InitMethod::Greedy),
            "random" => Ok(InitMethod::Random),
            "identity" => Ok(InitMethod::Identity),
            _ => Err(Error::invalid(format!(
                "unknown init {s:?}; expected greedy, random or identity"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Total point counts `m` of the ladder.
    pub sizes: Vec<usize>,
    /// Fixed universe size.
    pub d: usize,
    /// Points per object; `k = m / points_per_object`.
    pub points_per_object: usize,
    /// Timed iterations per size; the median is reported.
    pub timed_iterations: usize,
    /// Also run a complete solve at every size.
    pub full_solve: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![500, 1000, 2000, 4000],
            d: 40,
            points_per_object: 20,
            timed_iterations: 5,
            full_solve: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.timed_iterations == 0 {
            return Err(Error::invalid(
                "bench needs at least one size and one timed iteration",
            ));
        }
        if self.points_per_object == 0 || self.d < self.points_per_object {
            return Err(Error::invalid("bench needs 1 <= points_per_object <= d"));
        }
        if let Some(&m) = self.sizes.iter().find(|&&m| m < self.points_per_object) {
            return Err(Error::invalid(format!(
                "bench size {m} is smaller than one object"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for every random choice; overrides `generate.seed` when set.
    pub seed: Option<u64>,
    pub method: Method,
    pub init: InitMethod,
    pub problem: Option<PathBuf>,
    /// Results of an external method, for `method = "external-file"`.
    pub import: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub solver: SolverConfig,
    pub generate: GenConfig,
    pub bench: BenchConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.problem, &mut cfg.import, &mut cfg.out]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.generate.seed)
    }

    pub fn gen_config(&self) -> GenConfig {
        GenConfig {
            seed: self.effective_seed(),
            ..self.generate.clone()
        }
    }

    /// Checks parameters and that referenced input files exist.
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        self.solver.validate()?;
        self.gen_config().validate()?;
        self.bench.validate()?;
        for p in [&self.problem, &self.import].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::invalid(format!("{} does not exist", p.display())));
            }
        }
        if matches!(self.method, Method::External(_)) && self.import.is_none() {
            return Err(Error::invalid(format!(
                "method {} needs an import file",
                self.method
            )));
        }
        Ok(())
    }
}
