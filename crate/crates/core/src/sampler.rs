//! Training and interpolation-test datasets drawn from a ground-truth CDF.
//!
//! Each configuration contributes `n` points: half with `r` uniform on
//! `[0, w/2 + 0.1]` (teaching the model that nothing lies beyond the wall)
//! and half uniform on `[max(0, w/2 - 0.5), w/2]`, which concentrates data
//! in the interfacial layers. Configurations whose width or molarity is in
//! the held-out sets go to the test split wholesale.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{assemble_features, ChannelConfig, FeatureVector};
use crate::error::{Error, Result};
use crate::ground_truth::CdfSource;
use crate::seed::{config_seed, rng_from};

/// Held-out channel widths, nm.
pub const TEST_WIDTHS: [f64; 3] = [1.6, 2.4, 2.8];
/// Held-out molarities, M.
pub const TEST_MOLARITIES: [f64; 3] = [1.4, 2.2, 3.0];
/// Absolute tolerance for grid-value membership.
pub const SPLIT_TOLERANCE: f64 = 1e-9;
/// How far past the wall the wide interval extends, nm.
pub const OUTSIDE_MARGIN: f64 = 0.1;
/// Depth of the near-wall interval, nm.
pub const WALL_BAND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfSample {
    pub features: FeatureVector,
    pub target: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Test,
}

impl Partition {
    pub fn as_str(self) -> &'static str {
        match self {
            Partition::Train => "train",
            Partition::Test => "test",
        }
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn member(value: f64, set: &[f64]) -> bool {
    set.iter().any(|s| (value - s).abs() <= SPLIT_TOLERANCE)
}

pub fn split_rule(config: &ChannelConfig) -> Partition {
    if member(config.width, &TEST_WIDTHS) || member(config.molarity, &TEST_MOLARITIES) {
        Partition::Test
    } else {
        Partition::Train
    }
}

/// The two sampling intervals of a configuration.
pub fn sampling_intervals(config: &ChannelConfig) -> [(f64, f64); 2] {
    let h = config.half_width();
    [(0.0, h + OUTSIDE_MARGIN), ((h - WALL_BAND).max(0.0), h)]
}

pub fn sample_config(
    config: &ChannelConfig,
    source: &dyn CdfSource,
    n: usize,
    seed: u64,
) -> Result<Vec<CdfSample>> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "samples per configuration must be even and >= 2, got {n}"
        )));
    }
    let mut rng = rng_from(seed);
    let mut rs = Vec::with_capacity(n);
    for (lo, hi) in sampling_intervals(config) {
        rs.extend((0..n / 2).map(|_| rng.random_range(lo..=hi)));
    }
    let targets = source.cdf_many(config, &rs)?;
    rs.into_iter()
        .zip(targets)
        .map(|(r, target)| {
            if !(0.0..=1.0).contains(&target) {
                return Err(Error::OutOfRange(format!(
                    "ground truth returned {target} at r={r} for {}",
                    config.label()
                )));
            }
            Ok(CdfSample {
                features: assemble_features(config, r)?,
                target,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub ion: String,
    pub width: f64,
    pub molarity: f64,
    pub partition: Partition,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetProvenance {
    pub master_seed: u64,
    pub per_config: usize,
    pub grid: Vec<GridEntry>,
}

impl DatasetProvenance {
    pub fn count(&self, partition: Partition) -> usize {
        self.grid
            .iter()
            .filter(|g| g.partition == partition)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Vec<CdfSample>,
    pub test: Vec<CdfSample>,
    pub provenance: DatasetProvenance,
}

pub fn check_unique(grid: &[ChannelConfig]) -> Result<()> {
    for (i, a) in grid.iter().enumerate() {
        if grid[..i].iter().any(|b| a.same_as(b, SPLIT_TOLERANCE)) {
            return Err(Error::DuplicateConfig(a.label()));
        }
    }
    Ok(())
}

/// Samples every configuration (in parallel) and splits by [`split_rule`].
/// Output order is grid order, then draw order, regardless of scheduling.
pub fn build_dataset(
    grid: &[ChannelConfig],
    source: &dyn CdfSource,
    per_config: usize,
    master_seed: u64,
) -> Result<Dataset> {
    if grid.is_empty() {
        return Err(Error::Empty("configuration grid"));
    }
    check_unique(grid)?;
    let blocks: Vec<(Partition, u64, Vec<CdfSample>)> = grid
        .par_iter()
        .map(|config| {
            let seed = config_seed(master_seed, config);
            let samples = sample_config(config, source, per_config, seed)?;
            Ok((split_rule(config), seed, samples))
        })
        .collect::<Result<_>>()?;

    let n_test = blocks.iter().filter(|b| b.0 == Partition::Test).count();
    let mut train = Vec::with_capacity((grid.len() - n_test) * per_config);
    let mut test = Vec::with_capacity(n_test * per_config);
    let mut entries = Vec::with_capacity(grid.len());
    for (config, (partition, seed, samples)) in grid.iter().zip(blocks) {
        entries.push(GridEntry {
            ion: config.species.name.clone(),
            width: config.width,
            molarity: config.molarity,
            partition,
            seed,
        });
        match partition {
            Partition::Train => train.extend(samples),
            Partition::Test => test.extend(samples),
        }
    }
    Ok(Dataset {
        train,
        test,
        provenance: DatasetProvenance {
            master_seed,
            per_config,
            grid: entries,
        },
    })
}
