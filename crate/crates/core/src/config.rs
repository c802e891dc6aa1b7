//! JSON run configuration.
//!
//! Sections: `triplet` (reference measure at the top level, data-generating
//! measure under `statistical`), `execution`, `flow`, `ambiguity` and
//! `simulation`. Validation errors name the offending field.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::grid::TimeGrid;
use crate::params::{
    AmbiguityParams, Dynamics, ExecutionParams, FlowParams, Inventory, Pair, PairFlow, PerPair, Side,
    SizeLaw, TripletParams,
};
use crate::sim::{FillTiming, SimConfig};

/// Configuration shipped with the crate.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.json");

/// Relative tolerance for an explicitly given `z0` against `x0 / y0`.
const Z0_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

impl From<MeasureSection> for Dynamics {
    fn from(m: MeasureSection) -> Self {
        Dynamics { mu_x: m.mu_x, mu_y: m.mu_y, sigma_x: m.sigma_x, sigma_y: m.sigma_y, rho: m.rho }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TripletSection {
    pub x0: f64,
    pub y0: f64,
    /// Optional; must equal `x0 / y0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
    pub statistical: MeasureSection,
}

impl TripletSection {
    pub fn reference_measure(&self) -> MeasureSection {
        MeasureSection { mu_x: self.mu_x, mu_y: self.mu_y, sigma_x: self.sigma_x, sigma_y: self.sigma_y, rho: self.rho }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub horizon: f64,
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub initial_inventory: Inventory,
    pub unwind_interval: f64,
    #[serde(default)]
    pub fill_timing: FillTiming,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub triplet: TripletSection,
    pub execution: ExecutionParams,
    pub flow: FlowParams,
    pub ambiguity: AmbiguityParams,
    pub simulation: SimulationSection,
}

impl Default for Config {
    fn default() -> Self {
        Self::from_json(DEFAULT_CONFIG).expect("shipped configuration is valid")
    }
}

impl Config {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(if path == "." { "<root>".to_string() } else { path }, e.into_inner().to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("<file>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.triplet;
        positive("triplet.x0", t.x0)?;
        positive("triplet.y0", t.y0)?;
        if let Some(z0) = t.z0 {
            positive("triplet.z0", z0)?;
            let implied = t.x0 / t.y0;
            if ((z0 - implied) / implied).abs() > Z0_TOLERANCE {
                return Err(ConfigError::new("triplet.z0", format!("must equal x0 / y0 = {implied}, got {z0}")));
            }
        }
        measure("triplet", &t.reference_measure())?;
        measure("triplet.statistical", &t.statistical)?;

        let e = &self.execution;
        for pair in Pair::ALL {
            positive(&format!("execution.impact.{pair}"), e.impact[pair])?;
            non_negative(&format!("execution.fee_buy.{pair}"), e.fee_buy[pair])?;
            non_negative(&format!("execution.fee_sell.{pair}"), e.fee_sell[pair])?;
            non_negative(&format!("execution.penalty.{pair}"), e.penalty[pair])?;
        }

        for pair in Pair::ALL {
            for side in Side::ALL {
                let f = self.flow.pair(pair).side(side);
                let base = format!("flow.{pair}.{}", side.label());
                non_negative(&format!("{base}.intensity"), f.intensity)?;
                match f.size {
                    SizeLaw::Exponential { mean } => positive(&format!("{base}.size.mean"), mean)?,
                    SizeLaw::Constant { size } => positive(&format!("{base}.size.size"), size)?,
                }
            }
        }

        non_negative("ambiguity.phi", self.ambiguity.phi)?;

        let s = &self.simulation;
        positive("simulation.horizon", s.horizon)?;
        positive("simulation.dt", s.dt)?;
        if TimeGrid::with_step(s.horizon, s.dt).is_none() {
            return Err(ConfigError::new("simulation.dt", format!("must divide the horizon {}, got {}", s.horizon, s.dt)));
        }
        if s.n_paths == 0 {
            return Err(ConfigError::new("simulation.n_paths", "must be at least 1"));
        }
        for pair in Pair::ALL {
            finite(&format!("simulation.initial_inventory.{pair}"), s.initial_inventory[pair])?;
        }
        positive("simulation.unwind_interval", s.unwind_interval)?;
        Ok(())
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::with_step(self.simulation.horizon, self.simulation.dt).expect("validated grid")
    }

    /// Broker's model `P`.
    pub fn reference(&self) -> TripletParams {
        let t = &self.triplet;
        TripletParams::new(t.reference_measure().into(), t.x0, t.y0).expect("validated reference measure")
    }

    /// Data-generating measure used by the simulator.
    pub fn statistical(&self) -> TripletParams {
        let t = &self.triplet;
        TripletParams::new(t.statistical.into(), t.x0, t.y0).expect("validated statistical measure")
    }

    pub fn sim_config(&self) -> SimConfig {
        let s = &self.simulation;
        SimConfig {
            grid: self.grid(),
            n_paths: s.n_paths,
            seed: s.seed,
            statistical: self.statistical(),
            exec: self.execution,
            flow: self.flow,
            initial: s.initial_inventory,
            unwind_interval: s.unwind_interval,
            fill_timing: s.fill_timing,
        }
    }

    pub fn with_phi(mut self, phi: f64) -> Self {
        self.ambiguity.phi = phi;
        self
    }

    pub fn with_paths(mut self, n_paths: usize) -> Self {
        self.simulation.n_paths = n_paths;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.simulation.seed = seed;
        self
    }

    pub fn with_initial(mut self, q: Inventory) -> Self {
        self.simulation.initial_inventory = q;
        self
    }

    pub fn without_client_flow(mut self) -> Self {
        self.flow = FlowParams::none();
        self
    }

    /// Client flow only on the cross pair.
    pub fn illiquid_flow(mut self) -> Self {
        self.flow.x = PairFlow::none();
        self.flow.y = PairFlow::none();
        self
    }

    /// Terminal penalty `alpha_k = multiplier * a_k`.
    pub fn with_penalty_multiplier(mut self, multiplier: f64) -> Self {
        self.execution.penalty = self.execution.impact.map(|_, a| a * multiplier);
        self
    }

    /// Reference drifts of both liquid pairs set to `mu`.
    pub fn with_reference_drift(mut self, mu_x: f64, mu_y: f64) -> Self {
        self.triplet.mu_x = mu_x;
        self.triplet.mu_y = mu_y;
        self
    }

    /// Initial inventories of the two liquid pairs.
    pub fn liquid_inventory(&self) -> PerPair<f64> {
        let q = self.simulation.initial_inventory;
        PerPair::new(q.x, q.y, 0.0)
    }
}

fn finite(path: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be finite, got {v}")))
    }
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    finite(path, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be positive, got {v}")))
    }
}

fn non_negative(path: &str, v: f64) -> Result<(), ConfigError> {
    finite(path, v)?;
    if v >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(path, format!("must be non-negative, got {v}")))
    }
}

fn measure(prefix: &str, m: &MeasureSection) -> Result<(), ConfigError> {
    finite(&format!("{prefix}.mu_x"), m.mu_x)?;
    finite(&format!("{prefix}.mu_y"), m.mu_y)?;
    positive(&format!("{prefix}.sigma_x"), m.sigma_x)?;
    positive(&format!("{prefix}.sigma_y"), m.sigma_y)?;
    finite(&format!("{prefix}.rho"), m.rho)?;
    if !(-1.0..=1.0).contains(&m.rho) {
        return Err(ConfigError::new(format!("{prefix}.rho"), format!("must lie in [-1, 1], got {}", m.rho)));
    }
    let d: Dynamics = (*m).into();
    TripletParams::new(d, 1.0, 1.0).map_err(|e| ConfigError::new(prefix, e.to_string()))?;
    Ok(())
}
