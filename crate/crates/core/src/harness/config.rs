use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::datagen::{CloneSpec, GeneratorConfig, GeneratorKind};
use crate::error::{Error, Result};
use crate::evaluators::{EvalParams, Registry};
use crate::rankings::DEFAULT_WINDOW;

/// An algorithm by name, optionally with its own parameter overrides.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum AlgorithmSpec {
    Name(String),
    Detailed {
        name: String,
        #[serde(default)]
        params: toml::Table,
    },
}

impl AlgorithmSpec {
    pub fn name(&self) -> &str {
        match self {
            AlgorithmSpec::Name(n) => n,
            AlgorithmSpec::Detailed { name, .. } => name,
        }
    }

    fn overrides(&self) -> Option<&toml::Table> {
        match self {
            AlgorithmSpec::Name(_) => None,
            AlgorithmSpec::Detailed { params, .. } => Some(params),
        }
    }
}

impl From<&str> for AlgorithmSpec {
    fn from(s: &str) -> Self {
        AlgorithmSpec::Name(s.to_string())
    }
}

/// A seed count (seeds `base, base+1, ...`) or an explicit list.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Seeds {
    Count(u64),
    List(Vec<u64>),
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds::Count(10)
    }
}

impl Seeds {
    pub fn resolve(&self, base: u64) -> Vec<u64> {
        match self {
            Seeds::Count(n) => (0..*n).map(|i| base.wrapping_add(i)).collect(),
            Seeds::List(v) => v.clone(),
        }
    }
}

/// Grid of generator dispersions, cutoffs and algorithms for `sweep`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub phi: Vec<f64>,
    #[serde(default)]
    pub k: Vec<usize>,
    #[serde(default)]
    pub algorithms: Vec<AlgorithmSpec>,
}

fn default_instances() -> usize {
    100
}
fn default_phis() -> Vec<f64> {
    vec![0.3, 0.6]
}
fn default_sample_horizon() -> u64 {
    2_000
}
fn default_sample_every() -> u64 {
    20
}
fn default_sample_instances() -> usize {
    20
}

/// Settings of the ground-truth recovery check.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KemenyCheckSpec {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_phis")]
    pub phi: Vec<f64>,
    /// Rounds of uniform score sampling in the sampled variant.
    #[serde(default = "default_sample_horizon")]
    pub sample_horizon: u64,
    #[serde(default = "default_sample_every")]
    pub sample_every: u64,
    #[serde(default = "default_sample_instances")]
    pub sample_instances: usize,
}

impl Default for KemenyCheckSpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

fn default_algorithms() -> Vec<AlgorithmSpec> {
    vec!["uniform_averaging".into()]
}
fn default_horizon() -> u64 {
    10_000
}
fn default_k_values() -> Vec<usize> {
    vec![3]
}
fn default_window() -> usize {
    DEFAULT_WINDOW
}
fn default_true() -> bool {
    true
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_curve_every() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgorithmSpec>,
    /// Parameter overrides applied to every algorithm.
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_k_values")]
    pub k_values: Vec<usize>,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub clones: Option<CloneSpec>,
    /// With clones, score rankings on the original agents only.
    #[serde(default = "default_true")]
    pub restrict_to_originals: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    /// Write every n-th round to `curves.csv` (the last round is always kept).
    #[serde(default = "default_curve_every")]
    pub curve_every: u64,
    #[serde(default)]
    pub log_log: bool,
    /// Also write final per-agent ratings to `ratings.csv`.
    #[serde(default)]
    pub export_ratings: bool,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub kemeny: KemenyCheckSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("all fields have defaults")
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative dataset path is taken relative to the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(ds) = &cfg.generator.dataset {
            if ds.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.generator.dataset = Some(base.join(ds));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seed_values(&self) -> Vec<u64> {
        self.seeds.resolve(self.generator.seed)
    }

    /// Effective parameters of `spec`: defaults, then global, then per-algorithm overrides.
    pub fn params_for(&self, spec: &AlgorithmSpec) -> Result<EvalParams> {
        let mut merged = self.params.clone();
        if let Some(o) = spec.overrides() {
            for (k, v) in o {
                merged.insert(k.clone(), v.clone());
            }
        }
        let p: EvalParams = toml::Value::Table(merged)
            .try_into()
            .map_err(|e| Error::Config(format!("parameters of {}: {e}", spec.name())))?;
        p.validate()?;
        Ok(p)
    }

    /// Agents on which rankings are scored, when known before loading data.
    pub fn scored_agents(&self) -> Option<usize> {
        if self.generator.kind == GeneratorKind::Dataset {
            return None;
        }
        match self.clones {
            Some(c) if !self.restrict_to_originals => Some(self.generator.m + c.count),
            _ => Some(self.generator.m),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be at least 1".into()));
        }
        if self.curve_every == 0 {
            return Err(Error::Config("curve_every must be at least 1".into()));
        }
        let seeds = self.seed_values();
        if seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        if self.k_values.is_empty() {
            return Err(Error::Config("k_values must not be empty".into()));
        }
        if let Some(m) = self.scored_agents() {
            if let Some(k) = self.k_values.iter().find(|&&k| k < 1 || k > m) {
                return Err(Error::Config(format!("k = {k} outside [1, {m}]")));
            }
        }
        if let Some(c) = &self.clones {
            c.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let registry = Registry::standard();
        let mut seen = BTreeSet::new();
        for a in &self.algorithms {
            if !registry.contains(a.name()) {
                return Err(Error::Config(format!("unknown algorithm {:?}", a.name())));
            }
            if !seen.insert(a.name()) {
                return Err(Error::Config(format!("algorithm {:?} listed twice", a.name())));
            }
            self.params_for(a)?;
        }
        if let Some(s) = &self.sweep {
            for a in &s.algorithms {
                if !registry.contains(a.name()) {
                    return Err(Error::Config(format!("unknown algorithm {:?} in sweep", a.name())));
                }
            }
            if s.phi.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Config("sweep phi values must lie in [0,1]".into()));
            }
        }
        if self.kemeny.instances == 0 || self.kemeny.sample_every == 0 {
            return Err(Error::Config("kemeny instances and sample_every must be positive".into()));
        }
        Ok(())
    }
}
