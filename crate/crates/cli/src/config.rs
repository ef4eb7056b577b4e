//! TOML run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// A scalar or a list, written as `x = 1.0` or `x = [1.0, 2.0]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Quadratic,
    Gcca,
    SyntheticCca,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeritKind {
    Identity,
    Huber,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Columns `p` of the decision variable. Synthetic CCA defaults to the
    /// number of planted correlations.
    pub p: Option<usize>,

    // quadratic: either generated (`n`, `matrix_seed`) or read from files
    pub n: Option<usize>,
    pub matrix_seed: Option<u64>,
    pub a_path: Option<PathBuf>,
    pub m_path: Option<PathBuf>,

    // gcca: one file per view, or one file split by `blocks`
    pub views: Option<Vec<PathBuf>>,
    pub data_path: Option<PathBuf>,
    pub blocks: Option<Vec<usize>>,
    pub center: Option<bool>,
    pub scale: Option<bool>,
    pub merit: Option<MeritKind>,
    pub mu: Option<f64>,
    /// Symmetric `m x m` weights with zero diagonal; 1/2 off the diagonal when absent.
    pub weights: Option<Vec<Vec<f64>>>,

    // synthetic-cca
    pub dims: Option<[usize; 2]>,
    pub correlations: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub data_seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Cdfsg,
    CdfsgAda,
    DetGd,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Cdfsg => "cdfsg",
            SolverKind::CdfsgAda => "cdfsg-ada",
            SolverKind::DetGd => "det-gd",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    Constant,
    Theory,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: OneOrMany<SolverKind>,
    pub s1: Option<OneOrMany<f64>>,
    /// Step constant; the fixed step size for `det-gd`.
    pub s2: OneOrMany<f64>,
    pub mode: Option<ModeKind>,
    pub iterations: Option<usize>,
    /// Passes over the data; sets the iteration count for minibatch problems.
    pub epochs: Option<usize>,
    pub beta: Option<f64>,
    pub eta1: Option<f64>,
    pub eta2: Option<f64>,
    pub eps: Option<f64>,
    pub batch_size: Option<usize>,
    /// Draw the objective and constraint samples from one batch.
    pub shared_batches: Option<bool>,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CadenceConfig {
    /// `auto`, `ends` or `never`.
    Named(String),
    Every(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub cadence: CadenceConfig,
    pub plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("gsopt-out"),
            cadence: CadenceConfig::Named("auto".into()),
            plot_data: false,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Relative data paths resolve against the directory of the config file.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let pr = &mut self.problem;
        for p in [&mut pr.a_path, &mut pr.m_path, &mut pr.data_path]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        if let Some(v) = pr.views.as_mut() {
            v.iter_mut().for_each(fix);
        }
    }
}
