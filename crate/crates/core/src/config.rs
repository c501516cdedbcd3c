//! The JSON pipeline document: one file describes the space, grid, oracle,
//! training, table and scenario settings for a whole run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::FreqRange;
use crate::error::{Error, Result};
use crate::gbdt::TrainConfig;
use crate::harness::{cyclic_lod_schedule, Scenario};
use crate::oracle::OracleConfig;
use crate::runtime::{FixedSource, FrequencySource, RandomWalkSource, ScriptedSource};
use crate::space::{HardwareGrid, LodLevel, LodSet, ParameterDimension, ParameterSpace};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub space: SpaceDoc,
    pub lods: Vec<LodLevel>,
    pub hardware_grid: GridDoc,
    pub oracle: OracleDoc,
    #[serde(default)]
    pub train: TrainDoc,
    #[serde(default)]
    pub lut: LutDoc,
    pub scenario: ScenarioDoc,
    #[serde(default)]
    pub paths: PathsDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceDoc {
    pub dimensions: Vec<DimensionDoc>,
    /// Level index of the best-quality setting per dimension.
    pub best_quality: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionDoc {
    pub name: String,
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Categorical level names; without `values` they are coded 0, 1, ...
    #[serde(default)]
    pub labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinsDoc {
    List(Vec<u32>),
    Even(EvenBins),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvenBins {
    pub from: u32,
    pub to: u32,
    pub count: usize,
}

impl BinsDoc {
    fn resolve(&self) -> Vec<u32> {
        match self {
            BinsDoc::List(v) => v.clone(),
            BinsDoc::Even(e) => HardwareGrid::linspace(e.from, e.to, e.count),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDoc {
    pub cpu_bins: BinsDoc,
    pub gpu_bins: BinsDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDoc {
    pub seed: u64,
    pub cpu_range_mhz: [f64; 2],
    pub gpu_range_mhz: [f64; 2],
    #[serde(default)]
    pub cost_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub quality_weights: Option<Vec<f64>>,
    #[serde(default = "default_interaction")]
    pub interaction_strength: f64,
    #[serde(default = "default_noise_time")]
    pub noise_std_time: f64,
    #[serde(default = "default_noise_ssim")]
    pub noise_std_ssim: f64,
    /// Default sample count for data generation.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_interaction() -> f64 {
    0.5
}
fn default_noise_time() -> f64 {
    0.03
}
fn default_noise_ssim() -> f64 {
    0.002
}
fn default_samples() -> usize {
    20_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainDoc {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub depth_range: [usize; 2],
    pub split: [u32; 2],
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for TrainDoc {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            n_estimators: d.n_estimators,
            learning_rate: d.learning_rate,
            depth_range: [*d.depth_range.start(), *d.depth_range.end()],
            split: [d.split.0, d.split.1],
            min_samples_leaf: d.min_samples_leaf,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LutDoc {
    pub percentile: f64,
}

impl Default for LutDoc {
    fn default() -> Self {
        Self { percentile: 0.2 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub frames: usize,
    pub lod_schedule: Vec<usize>,
    /// Frames each scheduled LOD is held before moving to the next.
    #[serde(default = "default_hold")]
    pub lod_hold_frames: usize,
    pub source: SourceDoc,
    /// CPU clock used by GPU-frequency sweeps.
    #[serde(default)]
    pub sweep_cpu_mhz: Option<f64>,
}

fn default_hold() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceDoc {
    Fixed { cpu_mhz: f64, gpu_mhz: f64 },
    Trace { path: PathBuf },
    RandomWalk { seed: u64, max_step_mhz: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsDoc {
    pub dataset: PathBuf,
    pub phi: PathBuf,
    pub psi: PathBuf,
    pub lut: PathBuf,
    pub report_dir: PathBuf,
}

impl Default for PathsDoc {
    fn default() -> Self {
        Self {
            dataset: "out/dataset.csv".into(),
            phi: "out/phi.json".into(),
            psi: "out/psi.json".into(),
            lut: "out/table.lut".into(),
            report_dir: "out/report".into(),
        }
    }
}

/// A validated configuration with every section resolved into domain types.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub doc: PipelineConfig,
    pub space: ParameterSpace,
    pub lods: LodSet,
    pub grid: HardwareGrid,
    pub oracle: OracleConfig,
    pub train: TrainConfig,
    pub percentile: f64,
}

fn section<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Config(format!("{name}: {e}")))
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn resolve(self) -> Result<Pipeline> {
        let dims = self
            .space
            .dimensions
            .iter()
            .map(|d| match (&d.values, &d.labels) {
                (Some(values), labels) => Ok(ParameterDimension {
                    name: d.name.clone(),
                    values: values.clone(),
                    labels: labels.clone(),
                }),
                (None, Some(labels)) => {
                    let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
                    Ok(ParameterDimension::categorical(d.name.clone(), &refs))
                }
                (None, None) => Err(Error::validation(format!("dimension `{}` needs values or labels", d.name))),
            })
            .collect::<Result<Vec<_>>>();
        let space = section("space", dims.and_then(|d| ParameterSpace::new(d, self.space.best_quality.clone())))?;
        let lods = section("lods", LodSet::new(self.lods.clone()))?;
        let grid = section(
            "hardware_grid",
            HardwareGrid::new(self.hardware_grid.cpu_bins.resolve(), self.hardware_grid.gpu_bins.resolve()),
        )?;

        let o = &self.oracle;
        let cpu_range = section("oracle.cpu_range_mhz", FreqRange::new(o.cpu_range_mhz[0], o.cpu_range_mhz[1]))?;
        let gpu_range = section("oracle.gpu_range_mhz", FreqRange::new(o.gpu_range_mhz[0], o.gpu_range_mhz[1]))?;
        for (label, bins, range) in [("cpu", &grid.cpu_bins, cpu_range), ("gpu", &grid.gpu_bins, gpu_range)] {
            if bins.iter().any(|&b| !range.contains(b as f64)) {
                return Err(Error::Config(format!(
                    "hardware_grid.{label}_bins: bins must lie inside oracle.{label}_range_mhz"
                )));
            }
        }
        let k = space.dim_count();
        let uniform = vec![1.0 / k as f64; k];
        let oracle = section(
            "oracle",
            OracleConfig::new(
                space.clone(),
                lods.clone(),
                cpu_range,
                gpu_range,
                o.cost_weights.clone().unwrap_or_else(|| uniform.clone()),
                o.quality_weights.clone().unwrap_or(uniform),
                o.interaction_strength,
                o.noise_std_time,
                o.noise_std_ssim,
                o.seed,
            ),
        )?;

        let t = &self.train;
        let train = TrainConfig {
            n_estimators: t.n_estimators,
            learning_rate: t.learning_rate,
            depth_range: t.depth_range[0]..=t.depth_range[1],
            split: (t.split[0], t.split[1]),
            min_samples_leaf: t.min_samples_leaf,
            seed: t.seed,
        };
        section("train", train.validate())?;

        let percentile = self.lut.percentile;
        if !(percentile > 0.0 && percentile <= 1.0) {
            return Err(Error::Config("lut.percentile must lie in (0, 1]".into()));
        }

        let sc = &self.scenario;
        if sc.frames == 0 || sc.lod_schedule.is_empty() {
            return Err(Error::Config("scenario: frames and lod_schedule must be non-empty".into()));
        }
        if let Some(&bad) = sc.lod_schedule.iter().find(|&&l| l >= lods.len()) {
            return Err(Error::Config(format!("scenario.lod_schedule: LOD {bad} out of range")));
        }
        Ok(Pipeline { doc: self, space, lods, grid, oracle, train, percentile })
    }
}

impl Pipeline {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        PipelineConfig::load(path)?.resolve()
    }

    pub fn lod_schedule(&self) -> Vec<usize> {
        let sc = &self.doc.scenario;
        cyclic_lod_schedule(&sc.lod_schedule, sc.lod_hold_frames, sc.frames)
    }

    pub fn frequency_source(&self) -> Result<Box<dyn FrequencySource>> {
        Ok(match &self.doc.scenario.source {
            SourceDoc::Fixed { cpu_mhz, gpu_mhz } => Box::new(FixedSource { cpu: *cpu_mhz, gpu: *gpu_mhz }),
            SourceDoc::Trace { path } => Box::new(ScriptedSource::load_csv(path)?),
            SourceDoc::RandomWalk { seed, max_step_mhz } => Box::new(RandomWalkSource::new(
                self.oracle.cpu_range,
                self.oracle.gpu_range,
                *max_step_mhz,
                *seed,
            )),
        })
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut source = self.frequency_source()?;
        Ok(Scenario::from_source(source.as_mut(), &self.lod_schedule()))
    }

    pub fn sweep_cpu_mhz(&self) -> f64 {
        self.doc.scenario.sweep_cpu_mhz.unwrap_or_else(|| self.oracle.cpu_ref())
    }
}
