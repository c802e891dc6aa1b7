//! Jump-free flow of the auxiliary inventory processes.
//!
//! Between client fills the auxiliary inventory follows
//! `dQ/du = -(h1(u) + 2 h2(u) Q) / 2a`, whose solution from `(t, q)` is
//! `D(u, t) q + b(u, t)`.

use crate::error::SolveError;
use crate::grid::TimeGrid;
use crate::neutral::{HSolution, PairCoefficients};
use crate::params::{Pair, PerPair};
use crate::quadrature::{horizon_log_transform, simpson_refined};

const OFFSET_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct AuxiliaryFlow {
    grid: TimeGrid,
    coef: PerPair<PairCoefficients>,
    step_decay: PerPair<Vec<f64>>,
    step_offset: PerPair<Vec<f64>>,
}

impl AuxiliaryFlow {
    pub fn new(sol: &HSolution) -> Result<Self, SolveError> {
        let grid = sol.grid();
        let coef = PerPair::from_fn(|k| *sol.coefficients(k));
        let mut flow = Self {
            grid,
            coef,
            step_decay: PerPair::from_fn(|_| Vec::new()),
            step_offset: PerPair::from_fn(|_| Vec::new()),
        };
        for pair in Pair::ALL {
            let mut decay = Vec::with_capacity(grid.steps());
            let mut offset = Vec::with_capacity(grid.steps());
            for j in 0..grid.steps() {
                let (t0, t1) = (grid.time(j), grid.time(j + 1));
                decay.push(flow.decay(pair, t1, t0));
                offset.push(flow.offset(pair, t1, t0)?);
            }
            flow.step_decay[pair] = decay;
            flow.step_offset[pair] = offset;
        }
        Ok(flow)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// `D(u, t)` for `t <= u`.
    pub fn decay(&self, pair: Pair, u: f64, t: f64) -> f64 {
        let horizon = self.grid.horizon();
        self.coef[pair].flow_factor((horizon - u).max(0.0), (horizon - t).max(0.0))
    }

    /// `b(u, t) = -int_t^u D(u, s) h1(s) / 2a ds`.
    pub fn offset(&self, pair: Pair, u: f64, t: f64) -> Result<f64, SolveError> {
        if u <= t {
            return Ok(0.0);
        }
        let c = self.coef[pair];
        if c.gamma_minus == 0.0 && c.drift == 0.0 {
            return Ok(0.0);
        }
        let horizon = self.grid.horizon();
        let (tau_u, tau_t) = ((horizon - u).max(0.0), (horizon - t).max(0.0));
        let integrand = |tau_s: f64| c.flow_factor(tau_u, tau_s) * c.h1(tau_s) / (2.0 * c.impact);
        let (g, lo, hi) = horizon_log_transform(integrand, tau_u, tau_t, c.layer_width(horizon));
        let r = simpson_refined(&g, lo, hi, 8, OFFSET_TOLERANCE, 1e-300, 1 << 22);
        if !r.converged {
            return Err(SolveError::Quadrature {
                component: format!("auxiliary flow offset of pair {pair}"),
                t,
                change: r.change,
            });
        }
        Ok(-r.value)
    }

    /// `(D, b)` over grid interval `j`, i.e. from `t_j` to `t_{j+1}`.
    pub fn step(&self, pair: Pair, j: usize) -> (f64, f64) {
        (self.step_decay[pair][j], self.step_offset[pair][j])
    }

    /// Jump-free auxiliary inventory at `u` started from `q` at `t`.
    pub fn mean(&self, pair: Pair, u: f64, t: f64, q: f64) -> Result<f64, SolveError> {
        Ok(self.decay(pair, u, t) * q + self.offset(pair, u, t)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Dynamics, ExecutionParams, FlowParams, PairFlow, TripletParams};

    fn solution(mu: f64, flow: FlowParams, penalty_scale: f64) -> HSolution {
        let reference = TripletParams::new(
            Dynamics { mu_x: mu, mu_y: -mu / 2.0, sigma_x: 1.7e-3, sigma_y: 1.56e-3, rho: 0.78 },
            0.7459,
            0.7678,
        )
        .unwrap();
        let impact = PerPair::new(5e-8, 1e-8, 1e-7);
        let exec = ExecutionParams {
            impact,
            fee_buy: impact.map(|_, a| a / 2.0),
            fee_sell: impact.map(|_, a| a / 2.0),
            penalty: impact.map(|_, a| a * penalty_scale),
        };
        HSolution::new(&reference, &exec, &flow, TimeGrid::new(1.0, 100)).unwrap()
    }

    /// RK4 on `dQ/du = -(h1 + 2 h2 Q) / 2a` with steps capped by the
    /// stiffness scale.
    fn rk4_flow(sol: &HSolution, pair: Pair, t: f64, u: f64, q: f64) -> f64 {
        let a = sol.exec().impact[pair];
        let f = |s: f64, q: f64| -(sol.h1(pair, s) + 2.0 * sol.h2(pair, s) * q) / (2.0 * a);
        let (mut s, mut q) = (t, q);
        while s < u {
            let h = (1e-4f64).min(0.01 * a / sol.h2(pair, (s + 1e-4).min(u))).min(u - s);
            let k1 = f(s, q);
            let k2 = f(s + h / 2.0, q + h / 2.0 * k1);
            let k3 = f(s + h / 2.0, q + h / 2.0 * k2);
            let k4 = f(s + h, q + h * k3);
            q += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            s += h;
        }
        q
    }

    #[test]
    fn identity_at_start() {
        let sol = solution(0.0, FlowParams::none(), 1e6);
        let flow = AuxiliaryFlow::new(&sol).unwrap();
        for k in Pair::ALL {
            assert_eq!(flow.decay(k, 0.3, 0.3), 1.0);
            assert_eq!(flow.offset(k, 0.3, 0.3).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_drift_decay_is_linear() {
        let sol = solution(0.0, FlowParams::none(), 1e6);
        let flow = AuxiliaryFlow::new(&sol).unwrap();
        for i in 0..=10 {
            let u = i as f64 / 10.0;
            let expected = (5e-8 + 0.05 * (1.0 - u)) / (5e-8 + 0.05);
            assert!((flow.decay(Pair::X, u, 0.0) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn decay_matches_rk4() {
        let flow_params = FlowParams {
            x: PairFlow { sell: crate::params::ClientFlow::exponential(60.0, 2.0), buy: crate::params::ClientFlow::exponential(30.0, 2.0) },
            ..FlowParams::none()
        };
        for (mu, scale) in [(-6.5e-4, 1e6), (3e-4, 2.5), (0.0, 1.0)] {
            let sol = solution(mu, flow_params, scale);
            let flow = AuxiliaryFlow::new(&sol).unwrap();
            for k in Pair::ALL {
                for &(t, u) in &[(0.0, 0.5), (0.2, 0.97), (0.5, 1.0)] {
                    let q = 150.0;
                    let oracle = rk4_flow(&sol, k, t, u, q);
                    let closed = flow.mean(k, u, t, q).unwrap();
                    assert!((closed - oracle).abs() <= 1e-9 * q, "{k} {mu} {scale} ({t},{u}): {closed} vs {oracle}");
                }
            }
        }
    }

    #[test]
    fn steps_compose() {
        let sol = solution(-6.5e-4, FlowParams::none(), 1e6);
        let flow = AuxiliaryFlow::new(&sol).unwrap();
        let mut q = 200.0;
        for j in 0..50 {
            let (d, b) = flow.step(Pair::Z, j);
            q = d * q + b;
        }
        let direct = flow.mean(Pair::Z, 0.5, 0.0, 200.0).unwrap();
        assert!((q - direct).abs() < 1e-10 * 200.0);
    }
}
