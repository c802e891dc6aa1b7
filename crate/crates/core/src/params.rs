//! Model parameters for a currency triplet: rate dynamics, execution costs,
//! client order flow and the ambiguity-aversion level.
//!
//! Pair naming follows the triangle over currencies {1, 2, 3}:
//! `x` is (2,1), `y` is (3,1) and `z` is (2,3), so that `Z = X / Y`.
//! Inventories are measured in lots of the pair's base currency and every
//! cash amount is marked to market in currency 1.

use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Units of base currency in one lot.
pub const LOT: f64 = 1.0e6;

/// One of the three currency pairs of the triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pair {
    X,
    Y,
    Z,
}

impl Pair {
    pub const ALL: [Pair; 3] = [Pair::X, Pair::Y, Pair::Z];

    pub fn index(self) -> usize {
        match self {
            Pair::X => 0,
            Pair::Y => 1,
            Pair::Z => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Pair::X => "x",
            Pair::Y => "y",
            Pair::Z => "z",
        }
    }

    /// The rate that values a unit of this pair in currency 1.
    ///
    /// Pairs `x` and `z` share base currency 2 and are valued at `X`
    /// (using `Y * Z = X`); pair `y` is valued at `Y`.
    pub fn mark(self) -> Mark {
        match self {
            Pair::X | Pair::Z => Mark::X,
            Pair::Y => Mark::Y,
        }
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which of the two traded rates marks a pair in currency 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    X,
    Y,
}

impl Mark {
    pub fn select(self, x: f64, y: f64) -> f64 {
        match self {
            Mark::X => x,
            Mark::Y => y,
        }
    }
}

/// Side of a client order as seen from the client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Client buys the pair from the broker; broker inventory falls.
    Buy,
    /// Client sells the pair to the broker; broker inventory rises.
    Sell,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Sell, Side::Buy];

    pub fn label(self) -> &'static str {
        match self {
            Side::Buy => "buy",
            Side::Sell => "sell",
        }
    }
}

/// A value for each of the three pairs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerPair<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T> PerPair<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn from_fn(mut f: impl FnMut(Pair) -> T) -> Self {
        Self {
            x: f(Pair::X),
            y: f(Pair::Y),
            z: f(Pair::Z),
        }
    }

    pub fn map<U>(&self, mut f: impl FnMut(Pair, &T) -> U) -> PerPair<U> {
        PerPair {
            x: f(Pair::X, &self.x),
            y: f(Pair::Y, &self.y),
            z: f(Pair::Z, &self.z),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (Pair, &T)> {
        [(Pair::X, &self.x), (Pair::Y, &self.y), (Pair::Z, &self.z)].into_iter()
    }
}

impl<T: Copy> PerPair<T> {
    pub fn splat(v: T) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T> Index<Pair> for PerPair<T> {
    type Output = T;
    fn index(&self, pair: Pair) -> &T {
        match pair {
            Pair::X => &self.x,
            Pair::Y => &self.y,
            Pair::Z => &self.z,
        }
    }
}

impl<T> IndexMut<Pair> for PerPair<T> {
    fn index_mut(&mut self, pair: Pair) -> &mut T {
        match pair {
            Pair::X => &mut self.x,
            Pair::Y => &mut self.y,
            Pair::Z => &mut self.z,
        }
    }
}

/// Signed inventory in lots per pair.
pub type Inventory = PerPair<f64>;

fn finite(name: &'static str, v: f64) -> Result<f64, ModelError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ModelError::NonFinite { name, value: v })
    }
}

fn non_negative(name: &'static str, v: f64) -> Result<f64, ModelError> {
    finite(name, v)?;
    if v < 0.0 {
        return Err(ModelError::Negative { name, value: v });
    }
    Ok(v)
}

/// Drift and volatility of the cross pair `z` implied by `Z = X / Y`.
///
/// Returns `(mu_z, sigma_z)`.
pub fn derive_z_params(
    mu_x: f64,
    mu_y: f64,
    sigma_x: f64,
    sigma_y: f64,
    rho: f64,
) -> Result<(f64, f64), ModelError> {
    finite("mu_x", mu_x)?;
    finite("mu_y", mu_y)?;
    finite("sigma_x", sigma_x)?;
    finite("sigma_y", sigma_y)?;
    finite("rho", rho)?;
    if sigma_x <= 0.0 {
        return Err(ModelError::NonPositiveVolatility { name: "sigma_x", value: sigma_x });
    }
    if sigma_y <= 0.0 {
        return Err(ModelError::NonPositiveVolatility { name: "sigma_y", value: sigma_y });
    }
    if rho.abs() > 1.0 {
        return Err(ModelError::CorrelationOutOfRange(rho));
    }
    let mu_z = mu_x - mu_y + sigma_y * sigma_y - rho * sigma_x * sigma_y;
    // rho = 1 with sigma_x = sigma_y can round to a tiny negative variance.
    let var_z = sigma_x * sigma_x + sigma_y * sigma_y - 2.0 * rho * sigma_x * sigma_y;
    Ok((mu_z, var_z.max(0.0).sqrt()))
}

/// Drifts, volatilities and correlation of the two independent rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dynamics {
    pub mu_x: f64,
    pub mu_y: f64,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub rho: f64,
}

/// Validated rate dynamics of the triplet together with the initial rates.
///
/// `mu_z`, `sigma_z` and `z0` are always derived from the other fields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletParams {
    dynamics: Dynamics,
    mu_z: f64,
    sigma_z: f64,
    x0: f64,
    y0: f64,
}

impl TripletParams {
    pub fn new(dynamics: Dynamics, x0: f64, y0: f64) -> Result<Self, ModelError> {
        let Dynamics { mu_x, mu_y, sigma_x, sigma_y, rho } = dynamics;
        let (mu_z, sigma_z) = derive_z_params(mu_x, mu_y, sigma_x, sigma_y, rho)?;
        for (name, v) in [("x0", x0), ("y0", y0)] {
            finite(name, v)?;
            if v <= 0.0 {
                return Err(ModelError::NonPositiveRate { name, value: v });
            }
        }
        Ok(Self { dynamics, mu_z, sigma_z, x0, y0 })
    }

    /// Same initial rates, different dynamics.
    pub fn with_dynamics(&self, dynamics: Dynamics) -> Result<Self, ModelError> {
        Self::new(dynamics, self.x0, self.y0)
    }

    pub fn dynamics(&self) -> Dynamics {
        self.dynamics
    }
    pub fn mu_x(&self) -> f64 {
        self.dynamics.mu_x
    }
    pub fn mu_y(&self) -> f64 {
        self.dynamics.mu_y
    }
    pub fn sigma_x(&self) -> f64 {
        self.dynamics.sigma_x
    }
    pub fn sigma_y(&self) -> f64 {
        self.dynamics.sigma_y
    }
    pub fn rho(&self) -> f64 {
        self.dynamics.rho
    }
    pub fn mu_z(&self) -> f64 {
        self.mu_z
    }
    pub fn sigma_z(&self) -> f64 {
        self.sigma_z
    }
    pub fn x0(&self) -> f64 {
        self.x0
    }
    pub fn y0(&self) -> f64 {
        self.y0
    }
    pub fn z0(&self) -> f64 {
        self.x0 / self.y0
    }

    /// Drift of the rate that marks `pair` (`mu_x` for x and z, `mu_y` for y).
    pub fn mark_drift(&self, pair: Pair) -> f64 {
        match pair.mark() {
            Mark::X => self.dynamics.mu_x,
            Mark::Y => self.dynamics.mu_y,
        }
    }

    /// Volatility of the rate that marks `pair`.
    pub fn mark_vol(&self, pair: Pair) -> f64 {
        match pair.mark() {
            Mark::X => self.dynamics.sigma_x,
            Mark::Y => self.dynamics.sigma_y,
        }
    }
}

/// Broker trading costs per pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExecutionParams {
    /// Temporary impact `a_k`, per lot/hour of trading speed.
    pub impact: PerPair<f64>,
    /// Fee `c_k^-` charged on client buys, per lot of order size.
    pub fee_buy: PerPair<f64>,
    /// Fee `c_k^+` charged on client sells, per lot of order size.
    pub fee_sell: PerPair<f64>,
    /// Terminal inventory penalty `alpha_k`, per lot.
    pub penalty: PerPair<f64>,
}

impl ExecutionParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        for (_, v) in self.impact.iter() {
            non_negative("impact", *v)?;
        }
        for (_, v) in self.fee_buy.iter() {
            non_negative("fee_buy", *v)?;
        }
        for (_, v) in self.fee_sell.iter() {
            non_negative("fee_sell", *v)?;
        }
        for (_, v) in self.penalty.iter() {
            non_negative("penalty", *v)?;
        }
        Ok(())
    }

    pub fn fee(&self, pair: Pair, side: Side) -> f64 {
        match side {
            Side::Buy => self.fee_buy[pair],
            Side::Sell => self.fee_sell[pair],
        }
    }
}

/// Distribution of client order sizes, in lots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum SizeLaw {
    Exponential { mean: f64 },
    /// Every order has the same size.
    Constant { size: f64 },
}

impl SizeLaw {
    /// Raw moments `E[xi^n]` for `n = 1..=4`.
    pub fn moments(&self) -> [f64; 4] {
        match *self {
            SizeLaw::Exponential { mean } => {
                let m = mean;
                [m, 2.0 * m * m, 6.0 * m * m * m, 24.0 * m * m * m * m]
            }
            SizeLaw::Constant { size } => {
                let s = size;
                [s, s * s, s * s * s, s * s * s * s]
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.moments()[0]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SizeLaw::Exponential { mean } => {
                let exp = Exp::new(1.0 / mean).expect("validated positive mean");
                exp.sample(rng)
            }
            SizeLaw::Constant { size } => size,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        let v = match *self {
            SizeLaw::Exponential { mean } => mean,
            SizeLaw::Constant { size } => size,
        };
        finite("order size", v)?;
        if v <= 0.0 {
            return Err(ModelError::NonPositiveOrderSize(v));
        }
        Ok(())
    }
}

/// Arrival intensity (per hour) and size law of one side of client flow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClientFlow {
    pub intensity: f64,
    pub size: SizeLaw,
}

impl ClientFlow {
    pub fn none() -> Self {
        Self { intensity: 0.0, size: SizeLaw::Constant { size: 1.0 } }
    }

    pub fn exponential(intensity: f64, mean: f64) -> Self {
        Self { intensity, size: SizeLaw::Exponential { mean } }
    }
}

/// Client flow on both sides of one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairFlow {
    pub sell: ClientFlow,
    pub buy: ClientFlow,
}

impl PairFlow {
    pub fn none() -> Self {
        Self { sell: ClientFlow::none(), buy: ClientFlow::none() }
    }

    pub fn symmetric_exponential(intensity: f64, mean: f64) -> Self {
        let side = ClientFlow::exponential(intensity, mean);
        Self { sell: side, buy: side }
    }

    pub fn side(&self, side: Side) -> &ClientFlow {
        match side {
            Side::Buy => &self.buy,
            Side::Sell => &self.sell,
        }
    }
}

/// Compound-Poisson client order flow for the three pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowParams {
    pub x: PairFlow,
    pub y: PairFlow,
    pub z: PairFlow,
}

impl FlowParams {
    pub fn none() -> Self {
        Self { x: PairFlow::none(), y: PairFlow::none(), z: PairFlow::none() }
    }

    pub fn pair(&self, pair: Pair) -> &PairFlow {
        match pair {
            Pair::X => &self.x,
            Pair::Y => &self.y,
            Pair::Z => &self.z,
        }
    }

    pub fn pair_mut(&mut self, pair: Pair) -> &mut PairFlow {
        match pair {
            Pair::X => &mut self.x,
            Pair::Y => &mut self.y,
            Pair::Z => &mut self.z,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for pair in Pair::ALL {
            for side in Side::ALL {
                let f = self.pair(pair).side(side);
                non_negative("intensity", f.intensity)?;
                if f.intensity > 0.0 {
                    f.size.validate()?;
                }
            }
        }
        Ok(())
    }

    /// Net expected inflow `gamma_-^k = l+ theta+ - l- theta-`, lots per hour.
    pub fn gamma_minus(&self, pair: Pair) -> f64 {
        let p = self.pair(pair);
        p.sell.intensity * p.sell.size.mean() - p.buy.intensity * p.buy.size.mean()
    }

    /// `delta^k = l+ eta+ + l- eta-`.
    pub fn delta(&self, pair: Pair) -> f64 {
        let p = self.pair(pair);
        p.sell.intensity * p.sell.size.moments()[1] + p.buy.intensity * p.buy.size.moments()[1]
    }

    /// Expected fee income rate `psi^k = c- l- eta- + c+ l+ eta+`.
    pub fn psi(&self, pair: Pair, exec: &ExecutionParams) -> f64 {
        let p = self.pair(pair);
        exec.fee_buy[pair] * p.buy.intensity * p.buy.size.moments()[1]
            + exec.fee_sell[pair] * p.sell.intensity * p.sell.size.moments()[1]
    }

    /// Signed jump-moment rates `J_n = l+ E[xi+^n] + (-1)^n l- E[xi-^n]`
    /// for `n = 1..=4`.
    pub fn jump_rates(&self, pair: Pair) -> [f64; 4] {
        let p = self.pair(pair);
        let up = p.sell.size.moments();
        let down = p.buy.size.moments();
        let mut out = [0.0; 4];
        for (n, slot) in out.iter_mut().enumerate() {
            let sign = if n % 2 == 0 { -1.0 } else { 1.0 };
            let up_part = if p.sell.intensity > 0.0 { p.sell.intensity * up[n] } else { 0.0 };
            let down_part = if p.buy.intensity > 0.0 { p.buy.intensity * down[n] } else { 0.0 };
            *slot = up_part + sign * down_part;
        }
        out
    }

    pub fn is_silent(&self) -> bool {
        Pair::ALL
            .iter()
            .all(|&k| Side::ALL.iter().all(|&s| self.pair(k).side(s).intensity == 0.0))
    }
}

/// Ambiguity-aversion level `phi >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmbiguityParams {
    pub phi: f64,
}

impl AmbiguityParams {
    pub fn new(phi: f64) -> Result<Self, ModelError> {
        non_negative("phi", phi)?;
        Ok(Self { phi })
    }
}

/// Outcome of the closed-form solvability check for one pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PairSolvability {
    /// `|mu| < alpha / a`.
    Satisfied { drift: f64, bound: f64 },
    Violated { drift: f64, bound: f64 },
    /// `a = 0` and `alpha = 0`: frictionless pair, the condition is vacuous.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolvabilityReport {
    pub pairs: PerPair<PairSolvability>,
}

impl SolvabilityReport {
    pub fn passes(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn violations(&self) -> Vec<Pair> {
        self.pairs
            .iter()
            .filter(|(_, s)| matches!(s, PairSolvability::Violated { .. }))
            .map(|(p, _)| p)
            .collect()
    }

    pub fn degenerate(&self) -> Vec<Pair> {
        self.pairs
            .iter()
            .filter(|(_, s)| matches!(s, PairSolvability::Degenerate))
            .map(|(p, _)| p)
            .collect()
    }
}

/// Check `|mu_khat| < alpha_k / a_k` for every pair.
pub fn validate_solvability(params: &TripletParams, exec: &ExecutionParams) -> SolvabilityReport {
    let pairs = PerPair::from_fn(|k| {
        let a = exec.impact[k];
        let alpha = exec.penalty[k];
        let drift = params.mark_drift(k);
        if a == 0.0 && alpha == 0.0 {
            return PairSolvability::Degenerate;
        }
        let bound = if a == 0.0 { f64::INFINITY } else { alpha / a };
        if drift.abs() < bound {
            PairSolvability::Satisfied { drift, bound }
        } else {
            PairSolvability::Violated { drift, bound }
        }
    });
    SolvabilityReport { pairs }
}
