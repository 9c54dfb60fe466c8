//! Anything that can be asked for `F(r | config)`: trained regressors and
//! exact ground-truth sources.

use serde::{Deserialize, Serialize};

use crate::domain::{features_unchecked, ChannelConfig, N_FEATURES};
use crate::error::{Error, Result};
use crate::gbdt::GbdtModel;
use crate::ground_truth::CdfSource;
use crate::mlp::MlpModel;

pub trait CdfEstimator: Sync {
    /// CDF values at each distance in `rs` for one configuration.
    fn cdf_at(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>>;

    /// Many configurations at once; implementations may batch internally.
    fn cdf_batch(&self, queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<Vec<f64>>> {
        queries.iter().map(|(c, rs)| self.cdf_at(c, rs)).collect()
    }

    /// Running supremum `max over 0 <= s <= r` of the CDF at each query
    /// point (`rs` ascending). The default takes the maximum over the query
    /// points only, which is exact for sources that are non-decreasing in r.
    fn envelope_batch(&self, queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<Vec<f64>>> {
        check_ascending(queries)?;
        Ok(self
            .cdf_batch(queries)?
            .into_iter()
            .map(|mut v| {
                let mut running = f64::NEG_INFINITY;
                for x in &mut v {
                    running = running.max(*x);
                    *x = running;
                }
                v
            })
            .collect())
    }
}

fn check_ascending(queries: &[(&ChannelConfig, &[f64])]) -> Result<()> {
    for (_, rs) in queries {
        if rs.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::InvalidArgument(
                "envelope query points must be ascending".into(),
            ));
        }
    }
    Ok(())
}

fn check_distances(rs: &[f64]) -> Result<()> {
    match rs.iter().find(|r| !(**r >= 0.0)) {
        Some(r) => Err(Error::OutOfRange(format!(
            "distance r must be >= 0, got {r}"
        ))),
        None => Ok(()),
    }
}

fn feature_rows(queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<[f64; N_FEATURES]>> {
    let mut rows = Vec::with_capacity(queries.iter().map(|q| q.1.len()).sum());
    for (config, rs) in queries {
        check_distances(rs)?;
        rows.extend(rs.iter().map(|&r| features_unchecked(config, r)));
    }
    Ok(rows)
}

fn split_back(queries: &[(&ChannelConfig, &[f64])], flat: Vec<f64>) -> Vec<Vec<f64>> {
    let mut it = flat.into_iter();
    queries
        .iter()
        .map(|(_, rs)| it.by_ref().take(rs.len()).collect())
        .collect()
}

impl CdfEstimator for MlpModel {
    fn cdf_at(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.cdf_batch(&[(config, rs)])?.pop().unwrap_or_default())
    }

    fn cdf_batch(&self, queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<Vec<f64>>> {
        let rows = feature_rows(queries)?;
        Ok(split_back(queries, self.predict_rows(&rows)))
    }
}

impl CdfEstimator for GbdtModel {
    fn cdf_at(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        check_distances(rs)?;
        Ok(rs
            .iter()
            .map(|&r| {
                self.predict_raw(&features_unchecked(config, r))
                    .clamp(0.0, 1.0)
            })
            .collect())
    }

    /// Exact, from the trees' r-thresholds.
    fn envelope_batch(&self, queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<Vec<f64>>> {
        check_ascending(queries)?;
        queries
            .iter()
            .map(|(config, rs)| {
                check_distances(rs)?;
                Ok(self.running_sup(&features_unchecked(config, 0.0), rs))
            })
            .collect()
    }
}

/// Wraps a ground-truth source so it can stand wherever a model is expected.
#[derive(Clone, Copy)]
pub struct ExactCdf<'a>(pub &'a dyn CdfSource);

impl CdfEstimator for ExactCdf<'_> {
    fn cdf_at(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        self.0.cdf_many(config, rs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gbdt,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gbdt => "gbdt",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A trained regressor of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Model {
    Mlp(MlpModel),
    Gbdt(GbdtModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Mlp(_) => ModelKind::Mlp,
            Model::Gbdt(_) => ModelKind::Gbdt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Mlp(m) => m.validate(),
            Model::Gbdt(m) => m.validate(),
        }
    }
}

impl CdfEstimator for Model {
    fn cdf_at(&self, config: &ChannelConfig, rs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Mlp(m) => m.cdf_at(config, rs),
            Model::Gbdt(m) => m.cdf_at(config, rs),
        }
    }

    fn cdf_batch(&self, queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Mlp(m) => m.cdf_batch(queries),
            Model::Gbdt(m) => m.cdf_batch(queries),
        }
    }

    fn envelope_batch(&self, queries: &[(&ChannelConfig, &[f64])]) -> Result<Vec<Vec<f64>>> {
        match self {
            Model::Mlp(m) => m.envelope_batch(queries),
            Model::Gbdt(m) => m.envelope_batch(queries),
        }
    }
}
