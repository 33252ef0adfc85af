use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use platewise::cluster::ClusterConfig;
use platewise::corpus::{LofConfig, PrototypeConfig};
use platewise::generator::CombinationConstraints;
use platewise::metrics::{CompareConfig, MetricConfig};
use platewise::portioner::{MealEnergyPlan, PortionConstraints, SolverOptions};
use platewise::substitution::{RetrievalConfig, SweepConfig};
use platewise::RdiProfile64;
use serde::{Deserialize, Serialize};

/// Environment variable that sets the output root when no `--out` flag is given.
pub const OUT_ENV: &str = "PLATEWISE_OUT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub foods: Option<PathBuf>,
    pub meals: Option<PathBuf>,
    /// `meal_id,cluster_id`, produced by an external clusterer.
    pub labels: Option<PathBuf>,
    pub codemap: Option<PathBuf>,
    pub pricebook: Option<PathBuf>,
    /// Presence probabilities exported by a trained generative model.
    pub probability_export: Option<PathBuf>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub lof: LofConfig,
    pub presence_resamples: usize,
    pub presence_level: f64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self { lof: LofConfig::default(), presence_resamples: 1000, presence_level: 0.95 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterStageConfig {
    #[serde(flatten)]
    pub cluster: ClusterConfig,
    /// Bins for the "level" features.
    pub level_bins: usize,
}

impl Default for ClusterStageConfig {
    fn default() -> Self {
        Self { cluster: ClusterConfig::default(), level_bins: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateConfig {
    #[serde(flatten)]
    pub constraints: CombinationConstraints,
    /// Combinations drawn per (meal type, cluster).
    pub per_cluster: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { constraints: CombinationConstraints::default(), per_cluster: 50 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PortionConfig {
    pub plan: MealEnergyPlan,
    pub profile: RdiProfile64,
    pub constraints: PortionConstraints,
    pub solver: SolverOptions,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub metrics: MetricConfig,
    pub compare: CompareConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubstituteConfig {
    #[serde(flatten)]
    pub retrieval: RetrievalConfig,
    /// Largest k_sub searched; the sweep pools every k up to it.
    pub k_max: usize,
}

impl Default for SubstituteConfig {
    fn default() -> Self {
        Self { retrieval: RetrievalConfig::default(), k_max: 3 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub ingest: IngestConfig,
    pub prototype: PrototypeConfig,
    pub cluster: ClusterStageConfig,
    pub generate: GenerateConfig,
    pub portion: PortionConfig,
    pub evaluate: EvaluateConfig,
    pub substitute: SubstituteConfig,
    pub sweep: SweepConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Reads a config file and resolves its relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let p = &mut self.paths;
        for slot in [
            &mut p.foods,
            &mut p.meals,
            &mut p.labels,
            &mut p.codemap,
            &mut p.pricebook,
            &mut p.probability_export,
            &mut p.output,
        ] {
            if let Some(path) = slot.as_mut() {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        }
    }

    /// Output root: the flag wins over the environment, which wins over the file.
    pub fn output_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        if let Some(p) = flag {
            return Ok(p.to_path_buf());
        }
        if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            return Ok(PathBuf::from(p));
        }
        match &self.paths.output {
            Some(p) => Ok(p.clone()),
            None => bail!(platewise::Error::Config(format!("no output directory: pass --out, set {OUT_ENV} or paths.output"))),
        }
    }

    pub fn require_seed(&self, stage: &str) -> Result<u64> {
        match self.seed {
            Some(s) => Ok(s),
            None => bail!(platewise::Error::Config(format!("stage `{stage}` needs a seed"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.prototype.validate()?;
        self.cluster.cluster.validate()?;
        self.generate.constraints.validate()?;
        self.portion.plan.validate()?;
        self.portion.profile.validate()?;
        self.portion.constraints.validate()?;
        self.sweep.validate()?;
        if self.cluster.level_bins == 0 {
            bail!(platewise::Error::Config("cluster.level_bins must be positive".into()));
        }
        if self.substitute.k_max == 0 {
            bail!(platewise::Error::Config("substitute.k_max must be at least 1".into()));
        }
        Ok(())
    }

    /// The config as recorded in run manifests: the output root is left out so
    /// runs into different directories record identical parameters.
    pub fn for_manifest(&self) -> Self {
        let mut c = self.clone();
        c.paths.output = None;
        c
    }
}
