//! Conditional-CDF surrogates for ion concentration profiles in slit
//! nanochannels.
//!
//! A regressor learns `F(r | sigma, epsilon, w, c, q)`, the probability that
//! an ion sits within distance `r` of the channel center. Differencing the
//! CDF over bins gives a binned concentration profile.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod eval;
pub mod gbdt;
pub mod ground_truth;
pub mod io;
pub mod mlp;
pub mod model;
pub mod profile;
pub mod sampler;
pub mod seed;

pub use domain::{
    assemble_features, config_grid, find_ion, ion_catalog, paper_grid, ChannelConfig,
    FeatureVector, IonSpecies, N_FEATURES,
};
pub use error::{Error, Result};
pub use eval::{
    bench_inference, evaluate, mae_grid, peak_deviation, profile_mae, EvalReport, TimingResult,
};
pub use gbdt::{fit_tree, predict_gbdt, train_gbdt, GbdtModel, GbdtTrainConfig};
pub use ground_truth::{CdfSource, EmpiricalCdf, EmpiricalSource, SyntheticOracle, TrajectorySlab};
pub use mlp::{adam_step, backward, init_mlp, train_mlp, AdamState, MlpModel, MlpTrainConfig};
pub use model::{CdfEstimator, ExactCdf, Model, ModelKind};
pub use profile::{
    bin_probabilities, predict_profile, predict_profiles, to_concentration, ConcentrationProfile,
};
pub use sampler::{build_dataset, sample_config, split_rule, CdfSample, Dataset, Partition};
