//! Ambiguity-neutral value function and optimal speeds.
//!
//! The value function is `X + H0(t, x, y, q)` with
//!
//! ```text
//! H0 = x (q^x + q^z) + y q^y - h0_x x - h0_y y
//!      - h1_x x q^x - h1_y y q^y - h1_z x q^z
//!      - h2_x x (q^x)^2 - h2_y y (q^y)^2 - h2_z x (q^z)^2
//! ```
//!
//! `h2_k` and `h1_k` solve Riccati/linear ODEs in closed form; `h0_x`,
//! `h0_y` are quadratures of them. Pairs `x` and `z` are both marked at `X`
//! so they share the drift `mu_x`, and both feed `h0_x`.

use serde::Serialize;

use crate::error::SolveError;
use crate::grid::TimeGrid;
use crate::params::{
    validate_solvability, ExecutionParams, FlowParams, Inventory, Mark, Pair, PairSolvability,
    PerPair, TripletParams,
};
use crate::quadrature::{horizon_log_transform, simpson, simpson_refined};

/// Drifts below this magnitude (per hour) use the zero-drift branch.
pub const ZERO_DRIFT: f64 = 1e-14;

/// Starting panel count for `h0` quadrature.
pub const H0_PANELS: usize = 2048;

/// Relative-change target for `h0` panel doubling.
pub const H0_TOLERANCE: f64 = 1e-10;

const MAX_PANELS: usize = 1 << 22;

/// Constants of the closed forms for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCoefficients {
    pub impact: f64,
    pub penalty: f64,
    /// Drift of the marking rate.
    pub drift: f64,
    pub gamma_minus: f64,
    pub delta: f64,
    pub psi: f64,
}

impl PairCoefficients {
    fn zero_drift(&self) -> bool {
        self.drift.abs() < ZERO_DRIFT
    }

    /// `1 - upsilon e^{-mu tau}`, the common denominator of the closed forms.
    fn denominator(&self, tau: f64) -> f64 {
        let mu = self.drift;
        -(-mu * tau).exp_m1() + self.impact / self.penalty * mu * (-mu * tau).exp()
    }

    /// `h2` as a function of time to horizon `tau = T - t`.
    pub fn h2(&self, tau: f64) -> f64 {
        let a = self.impact;
        if self.penalty == 0.0 {
            return 0.0;
        }
        if self.zero_drift() {
            1.0 / (1.0 / self.penalty + tau / a)
        } else {
            a * self.drift / self.denominator(tau)
        }
    }

    /// `h1` as a function of time to horizon.
    pub fn h1(&self, tau: f64) -> f64 {
        let a = self.impact;
        let g = self.gamma_minus;
        if self.penalty == 0.0 {
            // only reachable with zero drift; h2 = 0 makes h1 vanish too
            return 0.0;
        }
        if self.zero_drift() {
            2.0 * g * tau / (1.0 / self.penalty + tau / a)
        } else {
            let x = self.drift * tau;
            let ratio = a / self.penalty * self.drift;
            // (1 - 2 a g)(-x) + (1 - ratio)(1 - e^{-x}), regrouped so the
            // O(x) terms cancel analytically
            let num = -expm1_minus_linear(-x) + 2.0 * a * g * x + ratio * (-x).exp_m1();
            num / self.denominator(tau)
        }
    }

    /// `D(u, t) = exp(-int_t^u h2 / a)`, the decay of the jump-free
    /// inventory flow, given times to horizon `tau_u <= tau_t`.
    pub fn flow_factor(&self, tau_u: f64, tau_t: f64) -> f64 {
        if self.penalty == 0.0 {
            return 1.0;
        }
        if self.zero_drift() {
            (1.0 / self.penalty + tau_u / self.impact) / (1.0 / self.penalty + tau_t / self.impact)
        } else {
            (-self.drift * (tau_t - tau_u)).exp() * self.denominator(tau_u) / self.denominator(tau_t)
        }
    }

    /// Width of the `h2` boundary layer at the horizon.
    pub(crate) fn layer_width(&self, horizon: f64) -> f64 {
        if self.penalty > 0.0 {
            (self.impact / self.penalty).min(horizon)
        } else {
            horizon
        }
    }

    /// Integrand `F` of `h0 = -int_t^T e^{mu (u - t)} F(u) du`, split into
    /// the four components: `-psi`, `+gamma h1`, `+delta h2`, `-h1^2 / 4a`
    /// (signs as they enter `h0`).
    fn h0_component(&self, component: usize, tau: f64) -> f64 {
        match component {
            0 => -self.psi,
            1 => self.gamma_minus * self.h1(tau),
            2 => self.delta * self.h2(tau),
            3 => {
                let h1 = self.h1(tau);
                -h1 * h1 / (4.0 * self.impact)
            }
            _ => unreachable!(),
        }
    }
}

/// `H0` and its first partial derivatives at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H0Evaluation {
    pub value: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub d_q: Inventory,
}

/// Time-dependent coefficients of `H0` at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HCoefficients {
    pub h2: PerPair<f64>,
    pub h1: PerPair<f64>,
    pub h0_x: f64,
    pub h0_y: f64,
}

impl HCoefficients {
    /// `d H0 / d x` at inventory `q`.
    pub fn d_x(&self, q: &Inventory) -> f64 {
        (q.x + q.z) - self.h0_x - self.h1.x * q.x - self.h1.z * q.z
            - self.h2.x * q.x * q.x
            - self.h2.z * q.z * q.z
    }

    /// `d H0 / d y` at inventory `q`.
    pub fn d_y(&self, q: &Inventory) -> f64 {
        q.y - self.h0_y - self.h1.y * q.y - self.h2.y * q.y * q.y
    }

    pub fn evaluate(&self, x: f64, y: f64, q: &Inventory) -> H0Evaluation {
        let value = x * (q.x + q.z) + y * q.y
            - self.h0_x * x
            - self.h0_y * y
            - self.h1.x * x * q.x
            - self.h1.y * y * q.y
            - self.h1.z * x * q.z
            - self.h2.x * x * q.x * q.x
            - self.h2.y * y * q.y * q.y
            - self.h2.z * x * q.z * q.z;
        let d_q = PerPair::from_fn(|k| {
            let mark = k.mark().select(x, y);
            mark * (1.0 - self.h1[k] - 2.0 * self.h2[k] * q[k])
        });
        H0Evaluation { value, d_x: self.d_x(q), d_y: self.d_y(q), d_q }
    }

    /// Optimal neutral speed `(h1 + 2 h2 q) / 2a` for `pair`.
    pub fn speed(&self, pair: Pair, impact: f64, q: f64) -> f64 {
        (self.h1[pair] + 2.0 * self.h2[pair] * q) / (2.0 * impact)
    }
}

/// Ambiguity-neutral solution: closed-form `h2`, `h1` and tabulated `h0`.
#[derive(Debug, Clone)]
pub struct HSolution {
    grid: TimeGrid,
    reference: TripletParams,
    exec: ExecutionParams,
    flow: FlowParams,
    coef: PerPair<PairCoefficients>,
    h2: PerPair<Vec<f64>>,
    h1: PerPair<Vec<f64>>,
    h0_x: Vec<f64>,
    h0_y: Vec<f64>,
}

impl HSolution {
    /// Solve on `grid` under the broker's reference model.
    pub fn new(
        reference: &TripletParams,
        exec: &ExecutionParams,
        flow: &FlowParams,
        grid: TimeGrid,
    ) -> Result<Self, SolveError> {
        let report = validate_solvability(reference, exec);
        for (pair, status) in report.pairs.iter() {
            match *status {
                PairSolvability::Degenerate => return Err(SolveError::FrictionlessPair(pair)),
                PairSolvability::Violated { drift, bound } => {
                    if exec.impact[pair] == 0.0 {
                        return Err(SolveError::FrictionlessPair(pair));
                    }
                    if !(exec.penalty[pair] == 0.0 && drift.abs() < ZERO_DRIFT) {
                        if exec.penalty[pair] == 0.0 {
                            return Err(SolveError::ZeroPenaltyWithDrift { pair, drift });
                        }
                        return Err(SolveError::Unsolvable { pair, drift, bound });
                    }
                }
                PairSolvability::Satisfied { .. } => {
                    if exec.impact[pair] == 0.0 {
                        return Err(SolveError::FrictionlessPair(pair));
                    }
                }
            }
        }
        let coef = PerPair::from_fn(|k| PairCoefficients {
            impact: exec.impact[k],
            penalty: exec.penalty[k],
            drift: reference.mark_drift(k),
            gamma_minus: flow.gamma_minus(k),
            delta: flow.delta(k),
            psi: flow.psi(k, exec),
        });
        let horizon = grid.horizon();
        let h2 = coef.map(|_, c| grid.times().map(|t| c.h2(horizon - t)).collect());
        let h1 = coef.map(|_, c| grid.times().map(|t| c.h1(horizon - t)).collect());
        let mut sol = Self {
            grid,
            reference: *reference,
            exec: *exec,
            flow: *flow,
            coef,
            h2,
            h1,
            h0_x: Vec::new(),
            h0_y: Vec::new(),
        };
        sol.h0_x = sol.tabulate_h0(Mark::X)?;
        sol.h0_y = sol.tabulate_h0(Mark::Y)?;
        Ok(sol)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }
    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }
    pub fn reference(&self) -> &TripletParams {
        &self.reference
    }
    pub fn exec(&self) -> &ExecutionParams {
        &self.exec
    }
    pub fn flow(&self) -> &FlowParams {
        &self.flow
    }
    pub fn coefficients(&self, pair: Pair) -> &PairCoefficients {
        &self.coef[pair]
    }

    fn tau(&self, t: f64) -> f64 {
        (self.horizon() - t).max(0.0)
    }

    /// Exact `h2_k(t)`.
    pub fn h2(&self, pair: Pair, t: f64) -> f64 {
        self.coef[pair].h2(self.tau(t))
    }

    /// Exact `h1_k(t)`.
    pub fn h1(&self, pair: Pair, t: f64) -> f64 {
        self.coef[pair].h1(self.tau(t))
    }

    /// `h0` for the given marking rate, linearly interpolated from the
    /// grid tabulation.
    pub fn h0(&self, mark: Mark, t: f64) -> f64 {
        match mark {
            Mark::X => self.grid.interpolate(&self.h0_x, t),
            Mark::Y => self.grid.interpolate(&self.h0_y, t),
        }
    }

    pub fn h0_table(&self, mark: Mark) -> &[f64] {
        match mark {
            Mark::X => &self.h0_x,
            Mark::Y => &self.h0_y,
        }
    }

    pub fn h2_table(&self, pair: Pair) -> &[f64] {
        &self.h2[pair]
    }

    pub fn h1_table(&self, pair: Pair) -> &[f64] {
        &self.h1[pair]
    }

    fn contributing(mark: Mark) -> &'static [Pair] {
        match mark {
            Mark::X => &[Pair::X, Pair::Z],
            Mark::Y => &[Pair::Y],
        }
    }

    /// `h0` at an arbitrary time by full-range quadrature with panel
    /// doubling from `H0_PANELS`.
    pub fn h0_exact(&self, mark: Mark, t: f64) -> Result<f64, SolveError> {
        self.h0_with_panels(mark, t, None)
    }

    /// `h0` with a fixed number of Simpson panels per component (no
    /// refinement). Used to study convergence.
    pub fn h0_fixed(&self, mark: Mark, t: f64, panels: usize) -> f64 {
        self.h0_with_panels(mark, t, Some(panels)).expect("fixed-panel quadrature cannot fail")
    }

    fn h0_with_panels(
        &self,
        mark: Mark,
        t: f64,
        fixed: Option<usize>,
    ) -> Result<f64, SolveError> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(SolveError::TimeOutOfRange { t, horizon });
        }
        if t == horizon {
            return Ok(0.0);
        }
        let span = horizon - t;
        let mut total = 0.0;
        for &pair in Self::contributing(mark) {
            let c = self.coef[pair];
            let eps = c.layer_width(horizon);
            for component in 0..4 {
                let integrand =
                    |tau: f64| (c.drift * (span - tau)).exp() * c.h0_component(component, tau);
                let (g, lo, hi) = horizon_log_transform(integrand, 0.0, span, eps);
                let v = match fixed {
                    Some(p) => simpson(&g, lo, hi, p),
                    None => {
                        let r = simpson_refined(&g, lo, hi, H0_PANELS, H0_TOLERANCE, 1e-300, MAX_PANELS);
                        if !r.converged {
                            return Err(SolveError::Quadrature {
                                component: format!("h0_{}: component {} of pair {}", mark_label(mark), component + 1, pair),
                                t,
                                change: r.change,
                            });
                        }
                        r.value
                    }
                };
                total += v;
            }
        }
        Ok(total)
    }

    /// Tabulate `h0` on the grid by accumulating interval integrals
    /// backward from the horizon:
    /// `h0(t_i) = e^{mu dt} h0(t_{i+1}) + int_{t_i}^{t_{i+1}} e^{mu (u - t_i)} G(u) du`.
    fn tabulate_h0(&self, mark: Mark) -> Result<Vec<f64>, SolveError> {
        let horizon = self.horizon();
        let n = self.grid.steps();
        let pairs = Self::contributing(mark);
        let drift = self.coef[pairs[0]].drift;
        let mut table = vec![0.0; n + 1];
        for i in (0..n).rev() {
            let t0 = self.grid.time(i);
            let t1 = self.grid.time(i + 1);
            let mut piece = 0.0;
            for &pair in pairs {
                let c = self.coef[pair];
                let eps = c.layer_width(horizon);
                let span = horizon - t0;
                let (tau_lo, tau_hi) = (horizon - t1, span);
                let integrand = |tau: f64| {
                    let g: f64 = (0..4).map(|m| c.h0_component(m, tau)).sum();
                    (c.drift * (span - tau)).exp() * g
                };
                // scale for the convergence test: the components may cancel
                let magnitude = |tau: f64| {
                    let g: f64 = (0..4).map(|m| c.h0_component(m, tau).abs()).sum();
                    (c.drift * (span - tau)).exp() * g
                };
                let (g, lo, hi) = horizon_log_transform(integrand, tau_lo, tau_hi, eps);
                let (m, _, _) = horizon_log_transform(magnitude, tau_lo, tau_hi, eps);
                let floor = simpson(&m, lo, hi, 8).max(1e-300);
                let r = simpson_refined(&g, lo, hi, 2, H0_TOLERANCE, floor, MAX_PANELS);
                if !r.converged {
                    return Err(SolveError::Quadrature {
                        component: format!("h0_{} interval {} of pair {}", mark_label(mark), i, pair),
                        t: t0,
                        change: r.change,
                    });
                }
                piece += r.value;
            }
            table[i] = (drift * (t1 - t0)).exp() * table[i + 1] + piece;
        }
        Ok(table)
    }

    /// Exact coefficients at an arbitrary time (`h0` interpolated).
    pub fn coefficients_at(&self, t: f64) -> HCoefficients {
        HCoefficients {
            h2: PerPair::from_fn(|k| self.h2(k, t)),
            h1: PerPair::from_fn(|k| self.h1(k, t)),
            h0_x: self.h0(Mark::X, t),
            h0_y: self.h0(Mark::Y, t),
        }
    }

    /// Coefficients at grid knot `i`.
    pub fn coefficients_at_knot(&self, i: usize) -> HCoefficients {
        HCoefficients {
            h2: self.h2.map(|_, v| v[i]),
            h1: self.h1.map(|_, v| v[i]),
            h0_x: self.h0_x[i],
            h0_y: self.h0_y[i],
        }
    }

    /// `H0` and its gradient.
    pub fn eval_h0(&self, t: f64, x: f64, y: f64, q: &Inventory) -> Result<H0Evaluation, SolveError> {
        for (what, v) in [("t", t), ("x", x), ("y", y), ("q_x", q.x), ("q_y", q.y), ("q_z", q.z)] {
            if !v.is_finite() {
                return Err(SolveError::NonFinite { what: what.to_string(), t });
            }
        }
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(SolveError::TimeOutOfRange { t, horizon: self.horizon() });
        }
        Ok(self.coefficients_at(t).evaluate(x, y, q))
    }

    /// Optimal neutral speed for one pair; depends on that pair's
    /// inventory only.
    pub fn neutral_speed(&self, pair: Pair, t: f64, q: f64) -> f64 {
        (self.h1(pair, t) + 2.0 * self.h2(pair, t) * q) / (2.0 * self.coef[pair].impact)
    }

    /// Leading-order speed as the terminal penalty grows without bound:
    /// `q / (T - t) + gamma_-`.
    ///
    /// With client flow this limit is not an admissible strategy: its
    /// expected squared speed diverges at the horizon.
    pub fn twap_limit_speed(&self, pair: Pair, t: f64, q: f64) -> Result<f64, SolveError> {
        twap_limit_speed(self.horizon(), t, q, self.flow.gamma_minus(pair))
    }
}

/// `q / (T - t) + gamma_minus`; undefined at `t >= T`.
pub fn twap_limit_speed(horizon: f64, t: f64, q: f64, gamma_minus: f64) -> Result<f64, SolveError> {
    if t >= horizon {
        return Err(SolveError::AtHorizon);
    }
    Ok(q / (horizon - t) + gamma_minus)
}

/// `e^x - 1 - x`, accurate for small `x`.
fn expm1_minus_linear(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x * x / 2.0;
        let mut sum = term;
        for n in 3..20 {
            term *= x / n as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

fn mark_label(mark: Mark) -> &'static str {
    match mark {
        Mark::X => "x",
        Mark::Y => "y",
    }
}
