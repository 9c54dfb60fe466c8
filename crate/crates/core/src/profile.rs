//! Binned concentration profiles from a CDF over the distance to the
//! channel center.
//!
//! Bin `[r1, r2]` holds probability `F(r2) - F(r1)`. With the symmetric
//! coordinate `|z - o|` the bin covers a slab fraction `2 (r2 - r1) / w`, so
//! its concentration is `p * c * w / (2 (r2 - r1))`, which makes the
//! channel-averaged concentration equal to the molarity.

use serde::{Deserialize, Serialize};

use crate::domain::ChannelConfig;
use crate::error::{Error, Result};
use crate::model::CdfEstimator;

/// Relative slack when deciding whether `w/2` is a whole number of bins.
const EDGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationProfile {
    pub config: ChannelConfig,
    pub bin_size: f64,
    /// nm, ascending from 0 to `w/2`
    pub bin_edges: Vec<f64>,
    /// mol/L per bin
    pub concentrations: Vec<f64>,
}

impl ConcentrationProfile {
    pub fn n_bins(&self) -> usize {
        self.concentrations.len()
    }

    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.bin_edges
            .windows(2)
            .zip(&self.concentrations)
            .map(|(e, &c)| (e[0], e[1], c))
    }

    /// Index of the highest-concentration bin; ties go to the smallest r.
    pub fn peak_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &c) in self.concentrations.iter().enumerate() {
            if best.is_none_or(|b| c > self.concentrations[b]) {
                best = Some(i);
            }
        }
        best
    }

    /// Midpoint of the peak bin, nm.
    pub fn peak_location(&self) -> Option<f64> {
        self.peak_index()
            .map(|i| 0.5 * (self.bin_edges[i] + self.bin_edges[i + 1]))
    }

    /// Channel-averaged concentration `(2/w) * sum(C_b * dr_b)`.
    pub fn mean_concentration(&self) -> f64 {
        let total: f64 = self.bins().map(|(lo, hi, c)| c * (hi - lo)).sum();
        2.0 * total / self.config.width
    }

    pub fn same_binning(&self, other: &ConcentrationProfile) -> bool {
        self.bin_edges == other.bin_edges
    }
}

fn check_bin_size(width: f64, bin_size: f64) -> Result<()> {
    let h = 0.5 * width;
    if !(bin_size > 0.0) || !bin_size.is_finite() {
        return Err(Error::OutOfRange(format!(
            "bin size must be > 0 nm, got {bin_size}"
        )));
    }
    if bin_size > h * (1.0 + EDGE_TOLERANCE) {
        return Err(Error::OutOfRange(format!(
            "bin size {bin_size} nm exceeds the half-width {h} nm"
        )));
    }
    Ok(())
}

/// Edges `0, b, 2b, ...` ending exactly at `w/2`; a trailing partial bin is
/// kept at its true width.
pub fn bin_edges(width: f64, bin_size: f64) -> Result<Vec<f64>> {
    check_bin_size(width, bin_size)?;
    let h = 0.5 * width;
    let n_full = (h / bin_size + EDGE_TOLERANCE).floor() as usize;
    let mut edges: Vec<f64> = (0..=n_full).map(|k| k as f64 * bin_size).collect();
    let last = edges.last_mut().expect("at least the zero edge");
    if (*last - h).abs() <= EDGE_TOLERANCE * h.max(1.0) {
        *last = h;
    } else {
        edges.push(h);
    }
    if edges.len() < 2 {
        edges.push(h);
    }
    Ok(edges)
}

/// Running maximum, then clamp to `[0, 1]`.
pub fn monotonize(values: &[f64]) -> Vec<f64> {
    let mut running = f64::NEG_INFINITY;
    values
        .iter()
        .map(|&v| {
            running = running.max(v);
            running.clamp(0.0, 1.0)
        })
        .collect()
}

/// Per-bin probabilities from CDF values at the bin edges.
pub fn probabilities_from_edge_values(cdf_at_edges: &[f64]) -> Vec<f64> {
    monotonize(cdf_at_edges)
        .windows(2)
        .map(|w| w[1] - w[0])
        .collect()
}

/// Bin edges over `[0, w/2]` and the probability of each bin under `cdf`.
pub fn bin_probabilities(
    cdf: impl Fn(f64) -> f64,
    width: f64,
    bin_size: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let edges = bin_edges(width, bin_size)?;
    let values: Vec<f64> = edges.iter().map(|&r| cdf(r)).collect();
    let probs = probabilities_from_edge_values(&values);
    Ok((edges, probs))
}

pub fn to_concentration(
    probabilities: &[f64],
    bin_edges: &[f64],
    molarity: f64,
    width: f64,
) -> Result<Vec<f64>> {
    if bin_edges.len() != probabilities.len() + 1 {
        return Err(Error::ShapeMismatch {
            expected: probabilities.len() + 1,
            actual: bin_edges.len(),
        });
    }
    bin_edges
        .windows(2)
        .zip(probabilities)
        .map(|(e, &p)| {
            let dr = e[1] - e[0];
            if !(dr > 0.0) {
                return Err(Error::OutOfRange(format!(
                    "bin [{}, {}] has no width",
                    e[0], e[1]
                )));
            }
            Ok(p * molarity * width / (2.0 * dr))
        })
        .collect()
}

fn assemble(
    config: &ChannelConfig,
    bin_size: f64,
    edges: Vec<f64>,
    cdf_values: &[f64],
) -> Result<ConcentrationProfile> {
    let probs = probabilities_from_edge_values(cdf_values);
    let concentrations = to_concentration(&probs, &edges, config.molarity, config.width)?;
    Ok(ConcentrationProfile {
        config: config.clone(),
        bin_size,
        bin_edges: edges,
        concentrations,
    })
}

/// Evaluates the model's running supremum at every bin edge, repairs
/// monotonicity, differences and converts to molar concentration.
pub fn predict_profile(
    model: &dyn CdfEstimator,
    config: &ChannelConfig,
    bin_size: f64,
) -> Result<ConcentrationProfile> {
    let edges = bin_edges(config.width, bin_size)?;
    let values = model
        .envelope_batch(&[(config, &edges)])?
        .pop()
        .unwrap_or_default();
    assemble(config, bin_size, edges, &values)
}

/// [`predict_profile`] for many configurations with one batched model call.
pub fn predict_profiles(
    model: &dyn CdfEstimator,
    configs: &[ChannelConfig],
    bin_size: f64,
) -> Result<Vec<ConcentrationProfile>> {
    let edges: Vec<Vec<f64>> = configs
        .iter()
        .map(|c| bin_edges(c.width, bin_size))
        .collect::<Result<_>>()?;
    let queries: Vec<(&ChannelConfig, &[f64])> = configs
        .iter()
        .zip(&edges)
        .map(|(c, e)| (c, e.as_slice()))
        .collect();
    let values = model.envelope_batch(&queries)?;
    configs
        .iter()
        .zip(edges)
        .zip(values)
        .map(|((c, e), v)| assemble(c, bin_size, e, &v))
        .collect()
}
