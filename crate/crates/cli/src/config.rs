//! Run configuration: presets, file loading (TOML or JSON) and validation.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use ionprof_core::domain::{config_grid, find_ion, ion_catalog, paper_molarities, paper_widths};
use ionprof_core::gbdt::GbdtTrainConfig;
use ionprof_core::io::read_catalog;
use ionprof_core::mlp::{
    DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_HIDDEN, DEFAULT_LEARNING_RATE,
};
use ionprof_core::{ChannelConfig, IonSpecies};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Full 1,725-config grid, 2,000 samples/config, published hyperparameters.
    Paper,
    /// Reduced grid and small models; finishes in minutes.
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub ions: Vec<String>,
    pub widths: Vec<f64>,
    pub molarities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSpec {
    pub per_config: usize,
    pub master_seed: u64,
    /// gzip the dataset CSVs
    pub compress: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Synthetic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// distance cache written by `ingest`; relative paths resolve against `--out`
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSpec {
    pub bin_sizes: Vec<f64>,
    pub bench_runs: usize,
    pub bench_bin_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSpec {
    pub dataset_dir: PathBuf,
    pub model_dir: PathBuf,
    pub report_dir: PathBuf,
    pub profile_dir: PathBuf,
    pub cache_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional catalog file; the built-in five-ion table otherwise.
    pub catalog: Option<PathBuf>,
    pub grid: GridSpec,
    pub sampling: SamplingSpec,
    pub source: SourceSpec,
    pub mlp: MlpSpec,
    pub gbdt: GbdtTrainConfig,
    pub evaluation: EvalSpec,
    pub paths: PathsSpec,
}

fn all_ions() -> Vec<String> {
    ion_catalog().into_iter().map(|i| i.name).collect()
}

fn default_paths() -> PathsSpec {
    PathsSpec {
        dataset_dir: "dataset".into(),
        model_dir: "models".into(),
        report_dir: "reports".into(),
        profile_dir: "profiles".into(),
        cache_dir: "cache".into(),
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Paper => RunConfig {
                catalog: None,
                grid: GridSpec {
                    ions: all_ions(),
                    widths: paper_widths(),
                    molarities: paper_molarities(),
                },
                sampling: SamplingSpec {
                    per_config: 2000,
                    master_seed: 0,
                    compress: false,
                },
                source: SourceSpec {
                    kind: SourceKind::Synthetic,
                    cache: None,
                },
                mlp: MlpSpec {
                    hidden: DEFAULT_HIDDEN.to_vec(),
                    epochs: DEFAULT_EPOCHS,
                    learning_rate: DEFAULT_LEARNING_RATE,
                    batch_size: DEFAULT_BATCH_SIZE,
                },
                gbdt: GbdtTrainConfig::default(),
                evaluation: EvalSpec {
                    bin_sizes: vec![0.05],
                    bench_runs: 6,
                    bench_bin_size: 0.05,
                },
                paths: default_paths(),
            },
            Preset::Desk => {
                let mut cfg = RunConfig::preset(Preset::Paper);
                cfg.grid.widths = (4..=15).map(|k| f64::from(k) * 2.0 / 10.0).collect();
                cfg.grid.molarities = vec![0.8, 1.0, 1.4, 1.8, 2.2, 2.6, 3.0, 3.6];
                cfg.sampling.per_config = 500;
                cfg.mlp.hidden = vec![64, 32];
                cfg.mlp.epochs = 50;
                cfg.gbdt.rounds = 20;
                cfg
            }
        }
    }

    /// Preset values overlaid with whatever the file sets. Files ending in
    /// `.json` are JSON, anything else TOML.
    pub fn load(preset: Preset, file: Option<&Path>) -> anyhow::Result<Self> {
        let base = RunConfig::preset(preset);
        let Some(path) = file else {
            return Ok(base);
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let overlay: Value = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            let t: toml::Table =
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            serde_json::to_value(t)?
        };
        let mut merged = serde_json::to_value(&base)?;
        merge(&mut merged, overlay);
        serde_json::from_value(merged).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn catalog(&self, out: &Path) -> anyhow::Result<Vec<IonSpecies>> {
        match &self.catalog {
            Some(p) => Ok(read_catalog(&resolve(out, p))?),
            None => Ok(ion_catalog()),
        }
    }

    pub fn validate(&self, catalog: &[IonSpecies]) -> anyhow::Result<()> {
        for name in &self.grid.ions {
            find_ion(catalog, name)?;
        }
        let s = &self.sampling;
        if s.per_config < 2 || !s.per_config.is_multiple_of(2) {
            bail!(
                "sampling.per_config must be even and >= 2, got {}",
                s.per_config
            );
        }
        let e = &self.evaluation;
        if let Some(b) = e
            .bin_sizes
            .iter()
            .chain([&e.bench_bin_size])
            .find(|b| !(**b > 0.0))
        {
            bail!("bin sizes must be positive, got {b}");
        }
        if e.bin_sizes.is_empty() {
            bail!("evaluation.bin_sizes is empty");
        }
        if self.mlp.batch_size == 0 || self.mlp.hidden.contains(&0) {
            bail!("mlp.batch_size and hidden widths must be positive");
        }
        if self.source.kind == SourceKind::Empirical && self.source.cache.is_none() {
            bail!("source.kind = \"empirical\" needs source.cache");
        }
        Ok(())
    }

    /// Configurations named by the grid spec, ion-major.
    pub fn grid(&self, catalog: &[IonSpecies]) -> anyhow::Result<Vec<ChannelConfig>> {
        let ions: Vec<IonSpecies> = self
            .grid
            .ions
            .iter()
            .map(|n| find_ion(catalog, n).cloned())
            .collect::<Result<_, _>>()?;
        Ok(config_grid(
            &ions,
            &self.grid.widths,
            &self.grid.molarities,
        )?)
    }

    pub fn mlp_dims(&self) -> Vec<usize> {
        ionprof_core::mlp::layer_dims_with_hidden(&self.mlp.hidden)
    }
}

/// `path` unchanged when absolute, else below `out`.
pub fn resolve(out: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out.join(path)
    }
}

fn merge(base: &mut Value, overlay: Value) {
    match (base, overlay) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}
