//! Monte Carlo evolution of forward curves.

mod hypothesis;
mod scenario;
mod sim;
mod volatility;

pub use hypothesis::{hypothesis_check, HypothesisOptions, HypothesisRow};
pub use scenario::{EngineMode, SimulationScenario};
pub use sim::{
    bond_price, martingale_test, path_increments, short_rate, simulate, simulate_path_stepping, step, CheckpointRecord,
    Ensemble, MartingaleOptions, MartingaleRow, PathResult, Stepper,
};
pub use volatility::{BoundVolatility, StateFunctional, VolatilitySpec};
