//! Optimal and ambiguity-averse liquidation of an FX currency triplet.
//!
//! Pairs are `x = (2,1)`, `y = (3,1)` and `z = (2,3)` with mid-rates
//! `X`, `Y` and `Z = X / Y`. Inventories are in lots, cash in lot-rate
//! units (one unit is `LOT` units of currency 1).

pub mod config;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod neutral;
pub mod params;
pub mod quadrature;
pub mod rng;
pub mod robust;
pub mod sim;

pub use config::Config;
pub use error::{ConfigError, ExperimentError, ModelError, SimError, SolveError};
pub use grid::TimeGrid;
pub use neutral::{H0Evaluation, HCoefficients, HSolution};
pub use params::{
    derive_z_params, validate_solvability, AmbiguityParams, ClientFlow, Dynamics, ExecutionParams,
    FlowParams, Inventory, Mark, Pair, PairFlow, PerPair, Side, SizeLaw, TripletParams, LOT,
};
pub use robust::{ControlSnapshot, DriftAdjustment, H1Coefficients, RobustCorrection, RobustSolution};
pub use sim::{
    run_path, FillTiming, IlliquidOnlyStrategy, NeutralStrategy, PathResult, RobustStrategy, SimConfig,
    Strategy,
};
