//! Shared setup for the criterion benches.

use std::sync::Arc;

use mpesplit::grid::SpectralGrid;
use mpesplit::models::{ModelFlows, ModelId, ModelSpec};
use mpesplit::state::State;

pub struct Fixture {
    pub grid: Arc<SpectralGrid>,
    pub flows: ModelFlows,
    pub state: State,
}

/// Default model parameters on an `n`-point grid, with its initial data.
pub fn fixture(model: ModelId, n: usize) -> Fixture {
    let spec = ModelSpec::defaults(model).with_n(n);
    let grid = spec.grid().expect("valid grid");
    let flows = spec.flows(&grid, true).expect("valid flows");
    let state = spec.initial_condition(&grid).expect("initial data");
    Fixture { grid, flows, state }
}
