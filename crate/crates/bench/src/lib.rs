//! Fixtures for the criterion benches.

use ionprof_core::domain::paper_grid;
use ionprof_core::gbdt::{train_gbdt, GbdtModel, GbdtTrainConfig};
use ionprof_core::mlp::{default_layer_dims, init_mlp, MlpModel};
use ionprof_core::{build_dataset, config_grid, ion_catalog, ChannelConfig, SyntheticOracle};

/// Untrained MLP with the published layer sizes. Inference cost does not
/// depend on the weight values.
pub fn paper_mlp() -> MlpModel {
    init_mlp(&default_layer_dims(), 0).expect("valid dims")
}

pub fn desk_mlp() -> MlpModel {
    init_mlp(&[6, 64, 32, 1], 0).expect("valid dims")
}

/// A boosted ensemble fitted to a small synthetic dataset.
pub fn small_gbdt(rounds: usize) -> GbdtModel {
    let grid = config_grid(&ion_catalog(), &[1.0, 1.8, 2.6], &[1.0, 2.0, 3.4]).expect("valid grid");
    let data = build_dataset(&grid, &SyntheticOracle, 200, 0).expect("dataset");
    let cfg = GbdtTrainConfig {
        rounds,
        ..Default::default()
    };
    train_gbdt(&data.train, &cfg).expect("training").model
}

/// Every `step`-th configuration of the full grid.
pub fn grid_sample(step: usize) -> Vec<ChannelConfig> {
    paper_grid().into_iter().step_by(step.max(1)).collect()
}
