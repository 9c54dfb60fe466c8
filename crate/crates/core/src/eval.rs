//! Profile accuracy metrics, grid-wide error maps and the inference-time
//! benchmark.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::ChannelConfig;
use crate::error::{Error, Result};
use crate::ground_truth::CdfSource;
use crate::model::{CdfEstimator, ExactCdf};
use crate::profile::{predict_profiles, ConcentrationProfile};
use crate::sampler::{split_rule, Partition};

/// Configurations per parallel work item in grid evaluation.
const GRID_CHUNK: usize = 32;

fn check_binning(a: &ConcentrationProfile, b: &ConcentrationProfile) -> Result<()> {
    if !a.same_binning(b) {
        return Err(Error::InvalidArgument(
            "profiles use different bin edges".into(),
        ));
    }
    if a.concentrations.is_empty() {
        return Err(Error::Empty("profile"));
    }
    Ok(())
}

/// Mean over bins of `|C_pred - C_ref|`, M.
pub fn profile_mae(
    predicted: &ConcentrationProfile,
    reference: &ConcentrationProfile,
) -> Result<f64> {
    check_binning(predicted, reference)?;
    let sum: f64 = predicted
        .concentrations
        .iter()
        .zip(&reference.concentrations)
        .map(|(p, r)| (p - r).abs())
        .sum();
    Ok(sum / predicted.n_bins() as f64)
}

/// Distance between the peak-bin midpoints of two profiles, nm. Between two
/// full-width bins this is the bin-index gap times the bin size, so a
/// one-bin shift is exactly one bin size.
pub fn peak_deviation(
    predicted: &ConcentrationProfile,
    reference: &ConcentrationProfile,
) -> Result<f64> {
    check_binning(predicted, reference)?;
    let p = predicted.peak_index().ok_or(Error::Empty("profile"))?;
    let r = reference.peak_index().ok_or(Error::Empty("profile"))?;
    let full = |i: usize| {
        i + 1 < predicted.n_bins()
            || predicted.bin_edges[i + 1] - predicted.bin_edges[i] == predicted.bin_size
    };
    if full(p) && full(r) {
        return Ok(p.abs_diff(r) as f64 * predicted.bin_size);
    }
    let mid = |i: usize| 0.5 * (predicted.bin_edges[i] + predicted.bin_edges[i + 1]);
    Ok((mid(p) - mid(r)).abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigMetrics {
    pub ion: String,
    pub width: f64,
    pub molarity: f64,
    pub partition: Partition,
    pub mae: f64,
    pub peak_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_configs: usize,
    pub mean_mae: f64,
    pub mean_peak_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub train: Option<Aggregate>,
    pub test: Option<Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingResult {
    /// Wall-clock seconds of each timed run.
    pub runs: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 for a single run.
    pub std: f64,
    pub profiles_per_run: usize,
}

impl TimingResult {
    pub fn from_runs(runs: Vec<f64>, profiles_per_run: usize) -> Self {
        let n = runs.len() as f64;
        let mean = runs.iter().sum::<f64>() / n;
        let std = if runs.len() > 1 {
            (runs.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            runs,
            mean,
            std,
            profiles_per_run,
        }
    }

    /// `mean(std)` in seconds with two decimals, e.g. `0.80(0.10)`.
    pub fn display(&self) -> String {
        format!("{:.2}({:.2})", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub bin_size: f64,
    pub per_config: Vec<ConfigMetrics>,
    pub aggregates: Aggregates,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<TimingResult>,
}

fn aggregate(rows: &[ConfigMetrics], partition: Partition) -> Option<Aggregate> {
    let sel: Vec<&ConfigMetrics> = rows.iter().filter(|m| m.partition == partition).collect();
    if sel.is_empty() {
        return None;
    }
    let n = sel.len() as f64;
    Some(Aggregate {
        n_configs: sel.len(),
        mean_mae: sel.iter().map(|m| m.mae).sum::<f64>() / n,
        mean_peak_dev: sel.iter().map(|m| m.peak_dev).sum::<f64>() / n,
    })
}

/// MAE and peak deviation for every configuration, labeled train/test.
pub fn evaluate_grid(
    model: &dyn CdfEstimator,
    source: &dyn CdfSource,
    grid: &[ChannelConfig],
    bin_size: f64,
) -> Result<Vec<ConfigMetrics>> {
    if grid.is_empty() {
        return Err(Error::Empty("evaluation grid"));
    }
    let exact = ExactCdf(source);
    let chunks: Vec<Vec<ConfigMetrics>> = grid
        .par_chunks(GRID_CHUNK)
        .map(|chunk| {
            let predicted = predict_profiles(model, chunk, bin_size)?;
            let reference = predict_profiles(&exact, chunk, bin_size)?;
            chunk
                .iter()
                .zip(predicted.iter().zip(&reference))
                .map(|(config, (p, r))| {
                    Ok(ConfigMetrics {
                        ion: config.species.name.clone(),
                        width: config.width,
                        molarity: config.molarity,
                        partition: split_rule(config),
                        mae: profile_mae(p, r)?,
                        peak_dev: peak_deviation(p, r)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaeCell {
    pub ion: String,
    pub width: f64,
    pub molarity: f64,
    pub partition: Partition,
    pub mae: f64,
}

/// Per-configuration profile MAE (heatmap cells).
pub fn mae_grid(
    model: &dyn CdfEstimator,
    source: &dyn CdfSource,
    grid: &[ChannelConfig],
    bin_size: f64,
) -> Result<Vec<MaeCell>> {
    Ok(evaluate_grid(model, source, grid, bin_size)?
        .into_iter()
        .map(|m| MaeCell {
            ion: m.ion,
            width: m.width,
            molarity: m.molarity,
            partition: m.partition,
            mae: m.mae,
        })
        .collect())
}

pub fn evaluate(
    label: &str,
    model: &dyn CdfEstimator,
    source: &dyn CdfSource,
    grid: &[ChannelConfig],
    bin_size: f64,
) -> Result<EvalReport> {
    let per_config = evaluate_grid(model, source, grid, bin_size)?;
    let aggregates = Aggregates {
        train: aggregate(&per_config, Partition::Train),
        test: aggregate(&per_config, Partition::Test),
    };
    Ok(EvalReport {
        model: label.to_string(),
        bin_size,
        per_config,
        aggregates,
        timing: None,
    })
}

/// Times serial prediction of every profile in `grid`: one untimed warm-up
/// followed by `runs` timed repetitions.
pub fn bench_inference(
    model: &dyn CdfEstimator,
    grid: &[ChannelConfig],
    bin_size: f64,
    runs: usize,
) -> Result<TimingResult> {
    if runs == 0 {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one run".into(),
        ));
    }
    if grid.is_empty() {
        return Err(Error::Empty("benchmark grid"));
    }
    let warm = predict_profiles(model, grid, bin_size)?;
    let profiles = warm.len();
    drop(warm);
    let mut times = Vec::with_capacity(runs);
    for _ in 0..runs {
        let start = Instant::now();
        let out = predict_profiles(model, grid, bin_size)?;
        times.push(start.elapsed().as_secs_f64());
        std::hint::black_box(out);
    }
    Ok(TimingResult::from_runs(times, profiles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{config_grid, find_ion, ion_catalog};
    use crate::ground_truth::SyntheticOracle;
    use crate::mlp::init_mlp;

    fn profile(edges: Vec<f64>, conc: Vec<f64>) -> ConcentrationProfile {
        let ion = find_ion(&ion_catalog(), "Na").unwrap().clone();
        ConcentrationProfile {
            config: ChannelConfig::new(ion, 2.0 * edges.last().unwrap(), 1.0).unwrap(),
            bin_size: edges[1] - edges[0],
            bin_edges: edges,
            concentrations: conc,
        }
    }

    #[test]
    fn mae_examples() {
        let a = profile(vec![0.0, 0.5, 1.0], vec![1.0, 3.0]);
        let b = profile(vec![0.0, 0.5, 1.0], vec![2.0, 2.0]);
        assert_eq!(profile_mae(&a, &a).unwrap(), 0.0);
        assert_eq!(profile_mae(&a, &b).unwrap(), 1.0);
        let shifted = profile(vec![0.0, 0.5, 1.0], vec![1.3, 3.3]);
        assert!((profile_mae(&shifted, &a).unwrap() - 0.3).abs() < 1e-12);
        let other = profile(vec![0.0, 0.4, 1.0], vec![1.0, 3.0]);
        assert!(profile_mae(&a, &other).is_err());
    }

    #[test]
    fn peak_deviation_examples() {
        let edges: Vec<f64> = (0..=20).map(|k| k as f64 * 0.05).collect();
        let mut reference = vec![1.0; 20];
        reference[15] = 5.0;
        let mut shifted = vec![1.0; 20];
        shifted[16] = 5.0;
        let r = profile(edges.clone(), reference);
        let s = profile(edges.clone(), shifted);
        assert_eq!(peak_deviation(&r, &r).unwrap(), 0.0);
        assert_eq!(peak_deviation(&s, &r).unwrap(), 0.05);

        // flat prediction: first bin wins the tie
        let flat = profile(edges, vec![2.0; 20]);
        assert_eq!(peak_deviation(&flat, &r).unwrap(), 15.0 * 0.05);

        // partial last bin: fall back to midpoints
        let edges = vec![0.0, 0.3, 0.6, 0.75];
        let a = profile(edges.clone(), vec![1.0, 1.0, 4.0]);
        let b = profile(edges, vec![4.0, 1.0, 1.0]);
        assert!((peak_deviation(&a, &b).unwrap() - (0.675 - 0.15)).abs() < 1e-15);
    }

    #[test]
    fn oracle_against_itself_is_exact() {
        let grid = config_grid(&ion_catalog()[..2], &[1.0, 1.6, 2.3], &[1.0, 2.2]).unwrap();
        let report = evaluate(
            "oracle",
            &ExactCdf(&SyntheticOracle),
            &SyntheticOracle,
            &grid,
            0.05,
        )
        .unwrap();
        assert_eq!(report.per_config.len(), grid.len());
        assert!(report
            .per_config
            .iter()
            .all(|m| m.mae == 0.0 && m.peak_dev == 0.0));
        let test = report.aggregates.test.unwrap();
        let train = report.aggregates.train.unwrap();
        assert_eq!(test.n_configs + train.n_configs, grid.len());
        assert_eq!(train.n_configs, 4);
    }

    #[test]
    fn grid_is_order_invariant() {
        let m = init_mlp(&[6, 8, 1], 5).unwrap();
        let grid = config_grid(&ion_catalog(), &[1.0, 2.0], &[1.0, 3.0]).unwrap();
        let a = mae_grid(&m, &SyntheticOracle, &grid, 0.05).unwrap();
        let mut rev = grid.clone();
        rev.reverse();
        let mut b = mae_grid(&m, &SyntheticOracle, &rev, 0.05).unwrap();
        b.reverse();
        assert_eq!(a, b);
    }

    #[test]
    fn timing_statistics() {
        let t = TimingResult::from_runs(vec![1.0, 2.0, 3.0], 10);
        assert_eq!(t.mean, 2.0);
        assert_eq!(t.std, 1.0);
        assert_eq!(t.display(), "2.00(1.00)");
        assert_eq!(TimingResult::from_runs(vec![0.5], 1).std, 0.0);
    }

    #[test]
    fn bench_smoke() {
        let m = init_mlp(&[6, 8, 1], 5).unwrap();
        let grid = config_grid(&ion_catalog()[..1], &[2.0], &[2.0]).unwrap();
        let t = bench_inference(&m, &grid, 0.05, 6).unwrap();
        assert_eq!(t.runs.len(), 6);
        assert_eq!(t.profiles_per_run, 1);
        assert!(t.mean >= 0.0 && t.std >= 0.0);
        assert!(bench_inference(&m, &grid, 0.05, 0).is_err());
    }
}
