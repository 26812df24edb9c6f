//! Flat TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixing::WeightRule;
use crate::problem::RowSizes;
use crate::solvers::{SolverKind, StepSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemSource {
    Synthetic,
    Files,
    Libsvm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProcessChoice {
    Fixed,
    IidUniform,
    IidBernoulli,
    Markov,
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    /// Entries i.i.d. `N(0, init_scale²)`.
    Gaussian,
    /// Gaussian, then each node projected onto its own solution set.
    Projected,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub iterations: usize,
    pub runs: usize,
    pub solver: String,
    pub weight_rule: String,
    /// Gradient solvers only. Defaults to `power:0.1:<h>`.
    pub schedule: Option<String>,
    /// Consensus gain of the gradient solvers. Defaults to `1/(4N)`.
    pub h: Option<f64>,
    pub init: InitKind,
    pub init_scale: f64,
    /// Draw a fresh initial state per run instead of sharing one.
    pub init_per_run: bool,
    pub compute_bounds: bool,
    pub bound_cap: usize,
    pub bound_mc_draws: usize,

    pub problem: ProblemSource,
    pub nodes: usize,
    pub dim: usize,
    /// Defaults to `dim`.
    pub rank: Option<usize>,
    /// `"l"`, `"lo-hi"` or a comma list.
    pub rows: String,
    pub residual: f64,
    pub matrix: Option<PathBuf>,
    pub vector: Option<PathBuf>,
    pub libsvm: Option<PathBuf>,
    pub libsvm_features: Option<usize>,
    /// Comma list of block sizes; defaults to an even split over `nodes`.
    pub partition: Option<String>,

    pub process: ProcessChoice,
    /// Sample space (or the fixed/base graph) read from a file.
    pub graphs: Option<PathBuf>,
    pub space_size: usize,
    pub keep: f64,
    pub base_p: f64,
    pub q: f64,
    pub temporal_dim: usize,
    pub temporal_radius: f64,

    pub csv: Option<PathBuf>,
    pub plot_data: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            iterations: 2000,
            runs: 50,
            solver: "projection".into(),
            weight_rule: "laplacian".into(),
            schedule: None,
            h: None,
            init: InitKind::Gaussian,
            init_scale: 1.0,
            init_per_run: false,
            compute_bounds: false,
            bound_cap: 1024,
            bound_mc_draws: 4000,
            problem: ProblemSource::Synthetic,
            nodes: 20,
            dim: 10,
            rank: None,
            rows: "1-5".into(),
            residual: 0.0,
            matrix: None,
            vector: None,
            libsvm: None,
            libsvm_features: None,
            partition: None,
            process: ProcessChoice::IidUniform,
            graphs: None,
            space_size: 30,
            keep: 0.3,
            base_p: 0.3,
            q: 0.5,
            temporal_dim: 100,
            temporal_radius: 0.9,
            csv: None,
            plot_data: None,
            summary: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    pub fn rebase(&mut self, dir: &Path) {
        for p in [
            &mut self.matrix,
            &mut self.vector,
            &mut self.libsvm,
            &mut self.graphs,
            &mut self.csv,
            &mut self.plot_data,
            &mut self.summary,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs must be at least 1".into()));
        }
        self.solver_kind()?;
        self.rule()?;
        if let Some(s) = &self.schedule {
            s.parse::<StepSchedule>()?;
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::Config(format!("h must be positive, got {h}")));
            }
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(
                "init_scale must be finite and nonnegative".into(),
            ));
        }
        match self.problem {
            ProblemSource::Synthetic => {
                parse_row_sizes(&self.rows)?;
                if self.nodes == 0 || self.dim == 0 {
                    return Err(Error::Config("nodes and dim must be positive".into()));
                }
            }
            ProblemSource::Files => {
                if self.matrix.is_none() || self.vector.is_none() {
                    return Err(Error::Config("file problems need matrix and vector".into()));
                }
            }
            ProblemSource::Libsvm => {
                if self.libsvm.is_none() {
                    return Err(Error::Config("libsvm problems need a libsvm path".into()));
                }
            }
        }
        for (name, v) in [("keep", self.keep), ("base_p", self.base_p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.graphs.is_none() && self.space_size == 0 {
            return Err(Error::Config("space_size must be positive".into()));
        }
        Ok(())
    }

    pub fn solver_kind(&self) -> Result<SolverKind> {
        self.solver.parse()
    }

    pub fn rule(&self) -> Result<WeightRule> {
        self.weight_rule.parse()
    }

    pub fn synthetic_rows(&self) -> Result<RowSizes> {
        parse_row_sizes(&self.rows)
    }
}

/// `"3"`, `"1-5"` or `"2,3,4"`.
pub fn parse_row_sizes(text: &str) -> Result<RowSizes> {
    let t = text.trim();
    let num = |s: &str| {
        s.trim()
            .parse::<usize>()
            .map_err(|_| Error::Config(format!("bad row size {s:?}")))
    };
    if t.contains(',') {
        return Ok(RowSizes::Explicit(
            t.split(',').map(num).collect::<Result<_>>()?,
        ));
    }
    if let Some((lo, hi)) = t.split_once('-') {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!("bad row range {t:?}")));
        }
        return Ok(RowSizes::Uniform { lo, hi });
    }
    let l = num(t)?;
    if l == 0 {
        return Err(Error::Config("row size must be positive".into()));
    }
    Ok(RowSizes::Fixed(l))
}

/// Splits `rows` into `parts` contiguous blocks whose sizes differ by at most
/// one, larger blocks first.
pub fn even_partition(rows: usize, parts: usize) -> Result<Vec<usize>> {
    if parts == 0 || parts > rows {
        return Err(Error::Partition(format!(
            "cannot split {rows} rows over {parts} nodes"
        )));
    }
    let base = rows / parts;
    let extra = rows % parts;
    Ok((0..parts).map(|i| base + usize::from(i < extra)).collect())
}
