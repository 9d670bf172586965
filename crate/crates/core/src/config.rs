//! Run configuration. One TOML file plus the dataset digest fully
//! describes a run: every tunable that affects output lives here, and a
//! single master seed derives every stage seed deterministically.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::catalog::{CatalogFormat, EpochSpec, IndexLevel};
use crate::clusterer::{AffinityParams, Preference};
use crate::error::{Error, Result};
use crate::esom::{GridSpec, Topology, TrainingSchedule};
use crate::mechanics::EpsilonPolicy;

pub const WORKERS_ENV: &str = "DRIFTFIELD_WORKERS";

/// Worker-count override. The environment variable is the only knob that
/// may differ between reruns without changing results.
pub fn worker_count() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.parse().ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    #[serde(default = "default_periods")]
    pub periods: Vec<PeriodConfig>,
    #[serde(default = "default_levels")]
    pub levels: Vec<IndexLevel>,
    #[serde(default)]
    pub grids: GridConfig,
    #[serde(default)]
    pub training: TrainingConfig,
    #[serde(default)]
    pub pagerank: PageRankConfig,
    #[serde(default)]
    pub clustering: ClusteringConfig,
    #[serde(default)]
    pub fusion: FusionConfig,
    #[serde(default)]
    pub mechanics: MechanicsConfig,
    #[serde(default)]
    pub anchor: AnchorConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: PathBuf,
    pub format: CatalogFormat,
}

/// One collection period. Must tile exactly into epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PeriodConfig {
    pub start: i32,
    pub end: i32,
    #[serde(default = "default_epoch_length")]
    pub epoch_length_years: u32,
    #[serde(default = "default_epoch_count")]
    pub epoch_count: u32,
}

impl PeriodConfig {
    pub fn epoch_spec(&self) -> Result<EpochSpec> {
        EpochSpec::new(self.start, self.end, self.epoch_length_years, self.epoch_count)
    }

    pub fn label(&self) -> String {
        format!("{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSize {
    pub width: usize,
    pub height: usize,
}

/// Map sizes keyed by indexing level; deeper levels get larger maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub level1: GridSize,
    pub level2: GridSize,
    pub level3: GridSize,
    pub all: GridSize,
    pub topology: Topology,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            level1: GridSize { width: 20, height: 12 },
            level2: GridSize { width: 40, height: 24 },
            level3: GridSize { width: 50, height: 30 },
            all: GridSize { width: 60, height: 40 },
            topology: Topology::Toroid,
        }
    }
}

impl GridConfig {
    pub fn size_for(&self, level: IndexLevel) -> GridSize {
        match level {
            IndexLevel::Level1 => self.level1,
            IndexLevel::Level2 => self.level2,
            IndexLevel::Level3 => self.level3,
            IndexLevel::AllLevels => self.all,
        }
    }

    pub fn spec_for(&self, level: IndexLevel) -> Result<GridSpec> {
        let size = self.size_for(level);
        GridSpec::new(size.width, size.height, self.topology)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Principal-component plane, falling back to random when the term
    /// vectors have no spread.
    Pca,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    /// `None` defaults to min(width, height) / 2 per grid.
    pub radius_start: Option<f64>,
    pub radius_end: f64,
    pub rate_start: f64,
    pub rate_end: f64,
    pub init: InitStrategy,
    /// L2-normalize term vectors before training.
    pub l2_normalize: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 10,
            radius_start: None,
            radius_end: 1.0,
            rate_start: 0.1,
            rate_end: 0.01,
            init: InitStrategy::Pca,
            l2_normalize: true,
        }
    }
}

impl TrainingConfig {
    pub fn schedule_for(&self, spec: &GridSpec, seed: u64) -> TrainingSchedule {
        let mut schedule = TrainingSchedule::default_for(spec);
        schedule.epochs = self.epochs;
        if let Some(r) = self.radius_start {
            schedule.radius_start = r;
        }
        schedule.radius_end = self.radius_end;
        schedule.rate_start = self.rate_start;
        schedule.rate_end = self.rate_end;
        schedule.seed = seed;
        schedule
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        PageRankConfig { damping: 0.85, tolerance: 1e-10, max_iter: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClusteringConfig {
    pub damping: f64,
    pub max_iter: usize,
    pub convergence_iter: usize,
    /// `None` uses the median off-diagonal similarity.
    pub preference: Option<f64>,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        ClusteringConfig { damping: 0.9, max_iter: 1000, convergence_iter: 50, preference: None }
    }
}

impl ClusteringConfig {
    pub fn to_params(&self) -> AffinityParams {
        AffinityParams {
            damping: self.damping,
            max_iter: self.max_iter,
            convergence_iter: self.convergence_iter,
            preference: match self.preference {
                Some(v) => Preference::Value(v),
                None => Preference::Median,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    pub k: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig { k: 60.0 }
    }
}

/// `epsilon = "mean_scaled"` or a fixed positive number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EpsilonConfig {
    Fixed(f64),
    Named(EpsilonName),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonName {
    MeanScaled,
}

impl Default for EpsilonConfig {
    fn default() -> Self {
        EpsilonConfig::Named(EpsilonName::MeanScaled)
    }
}

impl EpsilonConfig {
    pub fn to_policy(self) -> EpsilonPolicy {
        match self {
            EpsilonConfig::Fixed(v) => EpsilonPolicy::Fixed(v),
            EpsilonConfig::Named(EpsilonName::MeanScaled) => EpsilonPolicy::MeanScaled,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MechanicsConfig {
    pub epsilon: EpsilonConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStrategy {
    /// Fused importance rank across epochs (the primary definition).
    Importance,
    /// Persistent term with the smallest total displacement.
    LeastDisplacement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnchorConfig {
    pub strategy: AnchorStrategy,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig { strategy: AnchorStrategy::Importance }
    }
}

fn default_periods() -> Vec<PeriodConfig> {
    vec![
        PeriodConfig { start: 1796, end: 1845, epoch_length_years: 5, epoch_count: 10 },
        PeriodConfig { start: 1960, end: 2009, epoch_length_years: 5, epoch_count: 10 },
    ]
}

fn default_levels() -> Vec<IndexLevel> {
    IndexLevel::ALL.to_vec()
}

fn default_epoch_length() -> u32 {
    5
}

fn default_epoch_count() -> u32 {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn default_seed() -> u64 {
    42
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig {
                source: PathBuf::new(),
                format: CatalogFormat::GenericJsonl,
            },
            periods: default_periods(),
            levels: default_levels(),
            grids: GridConfig::default(),
            training: TrainingConfig::default(),
            pagerank: PageRankConfig::default(),
            clustering: ClusteringConfig::default(),
            fusion: FusionConfig::default(),
            mechanics: MechanicsConfig::default(),
            anchor: AnchorConfig::default(),
            output_dir: default_output_dir(),
            seed: default_seed(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("parsing config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.source.as_os_str().is_empty() {
            return Err(Error::Config("dataset.source must be set".into()));
        }
        if self.periods.is_empty() {
            return Err(Error::Config("at least one period is required".into()));
        }
        for period in &self.periods {
            period.epoch_spec()?;
        }
        if self.levels.is_empty() {
            return Err(Error::Config("at least one indexing level is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for level in &self.levels {
            if !seen.insert(*level) {
                return Err(Error::Config(format!("level {level} listed twice")));
            }
            self.grids.spec_for(*level)?;
        }
        if self.training.epochs == 0 {
            return Err(Error::Config("training.epochs must be positive".into()));
        }
        for (name, v) in [
            ("training.radius_end", self.training.radius_end),
            ("training.rate_start", self.training.rate_start),
            ("training.rate_end", self.training.rate_end),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(r) = self.training.radius_start {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config(format!(
                    "training.radius_start must be positive, got {r}"
                )));
            }
        }
        if !(self.pagerank.damping > 0.0 && self.pagerank.damping < 1.0) {
            return Err(Error::Config(format!(
                "pagerank.damping must lie in (0, 1), got {}",
                self.pagerank.damping
            )));
        }
        if !(self.pagerank.tolerance > 0.0 && self.pagerank.tolerance.is_finite()) {
            return Err(Error::Config("pagerank.tolerance must be positive".into()));
        }
        if !(0.5..1.0).contains(&self.clustering.damping) {
            return Err(Error::Config(format!(
                "clustering.damping must lie in [0.5, 1), got {}",
                self.clustering.damping
            )));
        }
        if !(self.fusion.k > 0.0 && self.fusion.k.is_finite()) {
            return Err(Error::Config(format!("fusion.k must be positive, got {}", self.fusion.k)));
        }
        if let EpsilonConfig::Fixed(v) = self.mechanics.epsilon {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "mechanics.epsilon must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }

    /// Canonical serialization; the digest of this string identifies the run
    /// configuration in `run_info.json`.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(format!("encoding config: {e}")))
    }

    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.to_toml()?.as_bytes())))
    }
}

/// Derives a stage seed from the master seed and a label path. Labels keep
/// stages and lanes independent: changing one lane's seed never perturbs
/// another's stream.
pub fn derive_seed(master: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update([0u8]);
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 yields at least 8 bytes"))
}
