//! Path simulation under the statistical measure.
//!
//! One step of length `dt` runs, in order: strategy query at the left
//! endpoint, broker trade, client fills, rate update. Cash is kept in
//! lot-rate units (`LOT` units of currency 1), inventories in lots.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::grid::TimeGrid;
use crate::neutral::{HCoefficients, HSolution};
use crate::params::{
    ExecutionParams, FlowParams, Inventory, Pair, PerPair, Side, SizeLaw, TripletParams, LOT,
};
use crate::rng::{stream, StreamLabel};
use crate::robust::{ControlSnapshot, DriftAdjustment, RobustSolution};

/// Whether client fills in a step are priced before or after the rate
/// update of that step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillTiming {
    #[default]
    PreUpdate,
    PostUpdate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub seed: u64,
    /// Data-generating dynamics.
    pub statistical: TripletParams,
    pub exec: ExecutionParams,
    pub flow: FlowParams,
    pub initial: Inventory,
    /// Time allowed to unwind terminal inventory.
    pub unwind_interval: f64,
    pub fill_timing: FillTiming,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n_paths == 0 {
            return Err(SimError::Setup("n_paths must be at least 1".into()));
        }
        if !(self.unwind_interval > 0.0 && self.unwind_interval.is_finite()) {
            return Err(SimError::Setup(format!("unwind interval must be positive, got {}", self.unwind_interval)));
        }
        if self.initial.iter().any(|(_, q)| !q.is_finite()) {
            return Err(SimError::Setup("initial inventory must be finite".into()));
        }
        self.exec.validate().map_err(|e| SimError::Setup(e.to_string()))?;
        self.flow.validate().map_err(|e| SimError::Setup(e.to_string()))?;
        Ok(())
    }

    /// Divisor turning total proceeds into proceeds per lot of the initial
    /// cross-pair position (1 when that position is flat).
    pub fn lots(&self) -> f64 {
        if self.initial.z != 0.0 {
            self.initial.z.abs()
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathState {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub q: Inventory,
    pub cash: f64,
    /// Cumulative volume filled for clients buying from the broker.
    pub client_buys: PerPair<f64>,
    /// Cumulative volume filled for clients selling to the broker.
    pub client_sells: PerPair<f64>,
    pub speeds: PerPair<f64>,
    pub kappa: DriftAdjustment,
}

impl PathState {
    pub fn new(x: f64, y: f64, q: Inventory) -> Self {
        Self {
            step: 0,
            t: 0.0,
            x,
            y,
            z: x / y,
            q,
            cash: 0.0,
            client_buys: PerPair::splat(0.0),
            client_sells: PerPair::splat(0.0),
            speeds: PerPair::splat(0.0),
            kappa: DriftAdjustment::default(),
        }
    }

    /// Marking rate of `pair`: `X` for `x` and `z`, `Y` for `y`.
    pub fn mark(&self, pair: Pair) -> f64 {
        pair.mark().select(self.x, self.y)
    }
}

/// Log-Euler update of `(X, Y)` with correlated shocks; `Z = X / Y`.
pub fn step_rates(x: f64, y: f64, params: &TripletParams, dt: f64, zeta_x: f64, zeta_y: f64) -> (f64, f64, f64) {
    let (sx, sy) = (params.sigma_x(), params.sigma_y());
    let root = dt.sqrt();
    let nx = x * ((params.mu_x() - 0.5 * sx * sx) * dt + sx * root * zeta_x).exp();
    let ny = y * ((params.mu_y() - 0.5 * sy * sy) * dt + sy * root * zeta_y).exp();
    (nx, ny, nx / ny)
}

/// Correlated pair of standard normals from two independent ones.
pub fn correlate(rho: f64, n1: f64, n2: f64) -> (f64, f64) {
    (n1, rho * n1 + (1.0 - rho * rho).max(0.0).sqrt() * n2)
}

/// Trade `speeds` (lots per hour, positive sells) for `dt` at the
/// impacted rate `k (1 - a nu)`.
pub fn apply_broker_trade(state: &mut PathState, exec: &ExecutionParams, speeds: &PerPair<f64>, dt: f64) {
    for k in Pair::ALL {
        let nu = speeds[k];
        if nu == 0.0 {
            continue;
        }
        state.q[k] -= nu * dt;
        state.cash += state.mark(k) * (1.0 - exec.impact[k] * nu) * nu * dt;
    }
}

/// Fill one client order of `size` lots. A client buy takes inventory
/// from the broker and pays the fee; a client sell hands inventory over.
pub fn apply_client_fill(state: &mut PathState, exec: &ExecutionParams, pair: Pair, side: Side, size: f64) {
    let mark = state.mark(pair);
    match side {
        Side::Buy => {
            state.q[pair] -= size;
            state.cash += mark * (1.0 + exec.fee_buy[pair] * size) * size;
            state.client_buys[pair] += size;
        }
        Side::Sell => {
            state.q[pair] += size;
            state.cash -= mark * (1.0 - exec.fee_sell[pair] * size) * size;
            state.client_sells[pair] += size;
        }
    }
}

/// Proceeds from unwinding `q` over `interval`:
/// `sum_k q^k max(K (1 - a_k q^k / interval), 0)`.
pub fn terminal_unwind(x: f64, y: f64, q: &Inventory, exec: &ExecutionParams, interval: f64) -> f64 {
    Pair::ALL
        .iter()
        .map(|&k| {
            let mark = k.mark().select(x, y);
            q[k] * (mark * (1.0 - exec.impact[k] * q[k] / interval)).max(0.0)
        })
        .sum()
}

/// Poisson arrivals of client orders on one side of one pair, sampled as
/// exponential inter-arrival times.
#[derive(Debug, Clone)]
pub struct ClientFlowSampler {
    intensity: f64,
    size: SizeLaw,
    arrivals: ChaCha8Rng,
    sizes: ChaCha8Rng,
    next: f64,
}

impl ClientFlowSampler {
    pub fn new(intensity: f64, size: SizeLaw, arrivals: ChaCha8Rng, sizes: ChaCha8Rng) -> Self {
        let mut s = Self { intensity, size, arrivals, sizes, next: f64::INFINITY };
        if intensity > 0.0 {
            s.next = s.gap();
        }
        s
    }

    fn gap(&mut self) -> f64 {
        let e: f64 = Exp1.sample(&mut self.arrivals);
        e / self.intensity
    }

    /// Sizes of orders arriving in `[t0, t1)`.
    pub fn fills(&mut self, t1: f64, out: &mut Vec<f64>) {
        out.clear();
        while self.next < t1 {
            out.push(self.size.sample(&mut self.sizes));
            self.next += self.gap();
        }
    }
}

/// Client fills of all pairs and sides for one path.
#[derive(Debug, Clone)]
pub struct ClientFills {
    samplers: Vec<(Pair, Side, ClientFlowSampler)>,
    buffer: Vec<f64>,
}

impl ClientFills {
    pub fn new(flow: &FlowParams, seed: u64, path: u64) -> Self {
        let mut samplers = Vec::new();
        for pair in Pair::ALL {
            for side in Side::ALL {
                let f = flow.pair(pair).side(side);
                if f.intensity > 0.0 {
                    let s = ClientFlowSampler::new(
                        f.intensity,
                        f.size,
                        stream(seed, path, StreamLabel::Arrivals(pair, side)),
                        stream(seed, path, StreamLabel::Sizes(pair, side)),
                    );
                    samplers.push((pair, side, s));
                }
            }
        }
        Self { samplers, buffer: Vec::new() }
    }

    /// All fills arriving before `t1`, as `(pair, side, size)`.
    pub fn sample_until(&mut self, t1: f64) -> Vec<(Pair, Side, f64)> {
        let mut out = Vec::new();
        for (pair, side, s) in self.samplers.iter_mut() {
            s.fills(t1, &mut self.buffer);
            out.extend(self.buffer.iter().map(|&r| (*pair, *side, r)));
        }
        out
    }
}

/// Speeds and the drift adjustment a strategy reports for one step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Decision {
    pub speeds: PerPair<f64>,
    pub kappa: DriftAdjustment,
}

/// A trading rule evaluated at the left endpoint of each step.
pub trait Strategy: Send + Sync {
    fn decide(&self, step: usize, state: &PathState) -> Decision;
    fn name(&self) -> String;
}

/// Ambiguity-neutral optimal speeds.
#[derive(Debug, Clone)]
pub struct NeutralStrategy {
    impact: PerPair<f64>,
    table: Arc<Vec<HCoefficients>>,
}

impl NeutralStrategy {
    pub fn new(sol: &HSolution) -> Self {
        let table = (0..sol.grid().knots()).map(|i| sol.coefficients_at_knot(i)).collect();
        Self { impact: sol.exec().impact, table: Arc::new(table) }
    }
}

impl Strategy for NeutralStrategy {
    fn decide(&self, step: usize, state: &PathState) -> Decision {
        let h = &self.table[step];
        Decision { speeds: PerPair::from_fn(|k| h.speed(k, self.impact[k], state.q[k])), kappa: DriftAdjustment::default() }
    }

    fn name(&self) -> String {
        "neutral".into()
    }
}

/// First-order robust speeds for a given ambiguity aversion.
#[derive(Debug, Clone)]
pub struct RobustStrategy {
    phi: f64,
    exec: ExecutionParams,
    reference: TripletParams,
    table: Arc<Vec<ControlSnapshot>>,
}

impl RobustStrategy {
    pub fn new(sol: &RobustSolution, phi: f64) -> Self {
        let table = (0..sol.neutral().grid().knots()).map(|i| sol.snapshot_at_knot(i)).collect();
        Self::with_table(sol, Arc::new(table), phi)
    }

    /// Reuse a snapshot table across ambiguity levels.
    pub fn with_table(sol: &RobustSolution, table: Arc<Vec<ControlSnapshot>>, phi: f64) -> Self {
        Self { phi, exec: *sol.neutral().exec(), reference: *sol.neutral().reference(), table }
    }

    pub fn snapshots(sol: &RobustSolution) -> Arc<Vec<ControlSnapshot>> {
        Arc::new((0..sol.neutral().grid().knots()).map(|i| sol.snapshot_at_knot(i)).collect())
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

impl Strategy for RobustStrategy {
    fn decide(&self, step: usize, state: &PathState) -> Decision {
        let snap = &self.table[step];
        Decision {
            speeds: snap.speeds(&self.exec, state.x, state.y, &state.q, self.phi),
            kappa: snap.drift_adjustment(&self.reference, state.x, state.y, &state.q, self.phi),
        }
    }

    fn name(&self) -> String {
        format!("robust(phi={})", self.phi)
    }
}

/// Neutral speed on the cross pair only; the liquid pairs are never
/// traded.
#[derive(Debug, Clone)]
pub struct IlliquidOnlyStrategy {
    inner: NeutralStrategy,
}

impl IlliquidOnlyStrategy {
    pub fn new(sol: &HSolution) -> Self {
        Self { inner: NeutralStrategy::new(sol) }
    }
}

impl Strategy for IlliquidOnlyStrategy {
    fn decide(&self, step: usize, state: &PathState) -> Decision {
        let mut d = self.inner.decide(step, state);
        d.speeds.x = 0.0;
        d.speeds.y = 0.0;
        d
    }

    fn name(&self) -> String {
        "illiquid-only".into()
    }
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub q: Inventory,
    pub speeds: PerPair<f64>,
    pub kappa: DriftAdjustment,
    pub cash: f64,
}

impl TrajectoryPoint {
    fn from_state(s: &PathState) -> Self {
        Self { t: s.t, x: s.x, y: s.y, z: s.z, q: s.q, speeds: s.speeds, kappa: s.kappa, cash: s.cash }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathResult {
    pub path: usize,
    /// Cash before the unwind, in lot-rate units.
    pub cash: f64,
    /// Unwind proceeds, in lot-rate units.
    pub unwind: f64,
    pub terminal: Inventory,
    pub terminal_x: f64,
    pub terminal_y: f64,
    /// Total proceeds in currency 1.
    pub pnl_total: f64,
    /// Proceeds per lot of the initial cross-pair position.
    pub pnl_per_lot: f64,
    pub client_buys: PerPair<f64>,
    pub client_sells: PerPair<f64>,
    #[serde(skip)]
    pub trajectory: Option<Vec<TrajectoryPoint>>,
}

/// Simulate one path. With `record`, every knot's state is kept; the
/// speeds and drift adjustment stored at a knot are those applied over the
/// following step (zero at the horizon).
pub fn run_path(config: &SimConfig, strategy: &dyn Strategy, path: usize, record: bool) -> Result<PathResult, SimError> {
    let grid = config.grid;
    let dt = grid.dt();
    let params = &config.statistical;
    let mut state = PathState::new(params.x0(), params.y0(), config.initial);
    let mut normals = stream(config.seed, path as u64, StreamLabel::Normals);
    let mut fills = ClientFills::new(&config.flow, config.seed, path as u64);
    let mut trajectory = if record { Some(Vec::with_capacity(grid.knots())) } else { None };

    for i in 0..grid.steps() {
        state.step = i;
        state.t = grid.time(i);
        let d = strategy.decide(i, &state);
        for k in Pair::ALL {
            if !d.speeds[k].is_finite() {
                return Err(SimError::NonFiniteSpeed { path, step: i, pair: k });
            }
        }
        state.speeds = d.speeds;
        state.kappa = d.kappa;
        if let Some(tr) = trajectory.as_mut() {
            tr.push(TrajectoryPoint::from_state(&state));
        }
        apply_broker_trade(&mut state, &config.exec, &d.speeds, dt);

        let arrived = fills.sample_until(grid.time(i + 1));
        let n1: f64 = normals.sample(StandardNormal);
        let n2: f64 = normals.sample(StandardNormal);
        let (zx, zy) = correlate(params.rho(), n1, n2);
        let (nx, ny, nz) = step_rates(state.x, state.y, params, dt, zx, zy);
        match config.fill_timing {
            FillTiming::PreUpdate => {
                for &(k, side, r) in &arrived {
                    apply_client_fill(&mut state, &config.exec, k, side, r);
                }
                (state.x, state.y, state.z) = (nx, ny, nz);
            }
            FillTiming::PostUpdate => {
                (state.x, state.y, state.z) = (nx, ny, nz);
                for &(k, side, r) in &arrived {
                    apply_client_fill(&mut state, &config.exec, k, side, r);
                }
            }
        }
    }
    state.step = grid.steps();
    state.t = grid.horizon();
    state.speeds = PerPair::splat(0.0);
    state.kappa = DriftAdjustment::default();
    if let Some(tr) = trajectory.as_mut() {
        tr.push(TrajectoryPoint::from_state(&state));
    }
    let unwind = terminal_unwind(state.x, state.y, &state.q, &config.exec, config.unwind_interval);
    let pnl_total = (state.cash + unwind) * LOT;
    Ok(PathResult {
        path,
        cash: state.cash,
        unwind,
        terminal: state.q,
        terminal_x: state.x,
        terminal_y: state.y,
        pnl_total,
        pnl_per_lot: pnl_total / config.lots(),
        client_buys: state.client_buys,
        client_sells: state.client_sells,
        trajectory,
    })
}

/// Draw a standard normal; exposed for oracle tests of the rate update.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
