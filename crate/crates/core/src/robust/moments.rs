//! Raw moments of the auxiliary inventory processes.
//!
//! With affine drift and compound-Poisson jumps, the raw moments
//! `m_n(u) = E[Q_u^n]` solve the closed lower-triangular system
//!
//! ```text
//! dm_n/du = -n (h1 m_{n-1} + 2 h2 m_n) / 2a + sum_{j=1..n} C(n, j) J_j m_{n-j}
//! ```
//!
//! so `m(u) = Phi(u, t) (1, q, q^2, q^3, q^4)`. `Phi` is built one grid
//! interval at a time and chained.

use rayon::prelude::*;

use crate::error::SolveError;
use crate::grid::TimeGrid;
use crate::neutral::HSolution;
use crate::params::{Pair, PerPair};

/// Highest moment carried.
pub const MOMENT_ORDER: usize = 4;
const DIM: usize = MOMENT_ORDER + 1;

/// RK4 substeps are capped at this fraction of the fastest decay scale
/// `a / (4 h2)`.
const STIFF_FRACTION: f64 = 0.02;
const MIN_SUBSTEPS: usize = 8;

/// Lower-triangular propagator acting on `(1, q, q^2, q^3, q^4)`.
pub type Propagator = [[f64; DIM]; DIM];

const BINOMIAL: [[f64; DIM]; DIM] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 2.0, 1.0, 0.0, 0.0],
    [1.0, 3.0, 3.0, 1.0, 0.0],
    [1.0, 4.0, 6.0, 4.0, 1.0],
];

pub fn identity() -> Propagator {
    let mut m = [[0.0; DIM]; DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

/// `a * b` for lower-triangular matrices.
pub fn compose(a: &Propagator, b: &Propagator) -> Propagator {
    let mut out = [[0.0; DIM]; DIM];
    for i in 0..DIM {
        for j in 0..=i {
            let mut s = 0.0;
            for k in j..=i {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn generator(h1: f64, h2: f64, impact: f64, jumps: &[f64; 4]) -> Propagator {
    let mut a = [[0.0; DIM]; DIM];
    for n in 1..DIM {
        let nf = n as f64;
        a[n][n] -= nf * h2 / impact;
        a[n][n - 1] -= nf * h1 / (2.0 * impact);
        for j in 1..=n {
            a[n][n - j] += BINOMIAL[n][j] * jumps[j - 1];
        }
    }
    a
}

fn axpy(m: &Propagator, k: &Propagator, h: f64) -> Propagator {
    let mut out = *m;
    for i in 0..DIM {
        for j in 0..=i {
            out[i][j] += h * k[i][j];
        }
    }
    out
}

/// Per-interval moment propagators for the three pairs.
#[derive(Debug, Clone)]
pub struct MomentPropagators {
    grid: TimeGrid,
    steps: PerPair<Vec<Propagator>>,
}

impl MomentPropagators {
    pub fn new(sol: &HSolution) -> Result<Self, SolveError> {
        let grid = sol.grid();
        let mut steps = PerPair::from_fn(|_| Vec::new());
        for pair in Pair::ALL {
            let jumps = sol.flow().jump_rates(pair);
            let impact = sol.exec().impact[pair];
            let built: Vec<Propagator> = (0..grid.steps())
                .into_par_iter()
                .map(|j| step_propagator(sol, pair, impact, &jumps, grid.time(j), grid.time(j + 1)))
                .collect();
            for (j, p) in built.iter().enumerate() {
                if p.iter().flatten().any(|v| !v.is_finite()) {
                    return Err(SolveError::NonFinite {
                        what: format!("moment propagator of pair {pair}"),
                        t: grid.time(j),
                    });
                }
            }
            steps[pair] = built;
        }
        Ok(Self { grid, steps })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// `Phi(t_{j+1}, t_j)`.
    pub fn step(&self, pair: Pair, j: usize) -> &Propagator {
        &self.steps[pair][j]
    }

    /// `Phi(t_j, t_i)` for `i <= j`.
    pub fn between(&self, pair: Pair, i: usize, j: usize) -> Propagator {
        let mut phi = identity();
        for s in i..j {
            phi = compose(&self.steps[pair][s], &phi);
        }
        phi
    }

    /// Moments on the knots `t_i..=t_N` for a start at `(t_i, q)`.
    pub fn trajectory(&self, pair: Pair, i: usize, q: f64) -> MomentTrajectory {
        let powers = [1.0, q, q * q, q * q * q, q * q * q * q];
        let mut phi = identity();
        let mut moments = Vec::with_capacity(self.grid.knots() - i);
        for j in i..=self.grid.steps() {
            if j > i {
                phi = compose(&self.steps[pair][j - 1], &phi);
            }
            let mut m = [0.0; MOMENT_ORDER];
            for n in 1..DIM {
                m[n - 1] = (0..=n).map(|p| phi[n][p] * powers[p]).sum();
            }
            moments.push(m);
        }
        MomentTrajectory { grid: self.grid, start: i, moments }
    }
}

fn step_propagator(
    sol: &HSolution,
    pair: Pair,
    impact: f64,
    jumps: &[f64; 4],
    t0: f64,
    t1: f64,
) -> Propagator {
    let rhs = |u: f64, m: &Propagator| {
        let a = generator(sol.h1(pair, u), sol.h2(pair, u), impact, jumps);
        compose(&a, m)
    };
    let max_step = (t1 - t0) / MIN_SUBSTEPS as f64;
    let mut phi = identity();
    let mut u = t0;
    while u < t1 {
        let mut h = max_step.min(t1 - u);
        // h2 grows toward the horizon, so check the stiffness at the far end
        loop {
            let rate = MOMENT_ORDER as f64 * sol.h2(pair, u + h).abs() / impact;
            let cap = STIFF_FRACTION / rate.max(1e-300);
            if h <= cap {
                break;
            }
            h = cap;
        }
        if t1 - u - h < 1e-3 * h {
            h = t1 - u;
        }
        let k1 = rhs(u, &phi);
        let k2 = rhs(u + 0.5 * h, &axpy(&phi, &k1, 0.5 * h));
        let k3 = rhs(u + 0.5 * h, &axpy(&phi, &k2, 0.5 * h));
        let k4 = rhs(u + h, &axpy(&phi, &k3, h));
        for i in 0..DIM {
            for j in 0..=i {
                phi[i][j] += h / 6.0 * (k1[i][j] + 2.0 * k2[i][j] + 2.0 * k3[i][j] + k4[i][j]);
            }
        }
        u += h;
    }
    phi
}

/// Raw moments `m_1..m_4` of one auxiliary inventory on the knots from a
/// start index onward.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrajectory {
    grid: TimeGrid,
    start: usize,
    moments: Vec<[f64; MOMENT_ORDER]>,
}

impl MomentTrajectory {
    pub fn start(&self) -> usize {
        self.start
    }

    /// Moments at knot `j >= start`.
    pub fn at(&self, j: usize) -> [f64; MOMENT_ORDER] {
        self.moments[j - self.start]
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (self.start..=self.grid.steps()).map(|j| self.grid.time(j))
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; MOMENT_ORDER]> {
        self.moments.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{Dynamics, ExecutionParams, FlowParams, PairFlow, TripletParams};
    use crate::robust::AuxiliaryFlow;

    fn solution(mu: f64, flow: FlowParams) -> HSolution {
        let reference = TripletParams::new(
            Dynamics { mu_x: mu, mu_y: 0.0, sigma_x: 1.7e-3, sigma_y: 1.56e-3, rho: 0.78 },
            0.7459,
            0.7678,
        )
        .unwrap();
        let impact = PerPair::new(5e-8, 1e-8, 1e-7);
        let exec = ExecutionParams {
            impact,
            fee_buy: impact.map(|_, a| a / 2.0),
            fee_sell: impact.map(|_, a| a / 2.0),
            penalty: impact.map(|_, a| a * 1e6),
        };
        HSolution::new(&reference, &exec, &flow, TimeGrid::new(1.0, 200)).unwrap()
    }

    #[test]
    fn starts_at_powers() {
        let sol = solution(0.0, FlowParams { z: PairFlow::symmetric_exponential(6.0, 10.0), ..FlowParams::none() });
        let props = MomentPropagators::new(&sol).unwrap();
        let tr = props.trajectory(Pair::Z, 40, 3.0);
        assert_eq!(tr.at(40), [3.0, 9.0, 27.0, 81.0]);
    }

    #[test]
    fn without_jumps_moments_are_powers_of_the_flow() {
        let sol = solution(-6.5e-4, FlowParams::none());
        let props = MomentPropagators::new(&sol).unwrap();
        let flow = AuxiliaryFlow::new(&sol).unwrap();
        let q = 200.0;
        let tr = props.trajectory(Pair::Z, 0, q);
        for j in [1, 50, 100, 199, 200] {
            let u = sol.grid().time(j);
            let m1 = flow.mean(Pair::Z, u, 0.0, q).unwrap();
            let m = tr.at(j);
            for n in 0..4 {
                let expected = m1.powi(n as i32 + 1);
                let scale = q.powi(n as i32 + 1);
                assert!((m[n] - expected).abs() <= 1e-9 * scale, "j={j} n={n}: {} vs {expected}", m[n]);
            }
        }
    }

    #[test]
    fn symmetric_flow_keeps_zero_mean() {
        let sol = solution(0.0, FlowParams { z: PairFlow::symmetric_exponential(6.0, 10.0), ..FlowParams::none() });
        let props = MomentPropagators::new(&sol).unwrap();
        let tr = props.trajectory(Pair::Z, 0, 0.0);
        for m in tr.iter() {
            assert!(m[0].abs() < 1e-12);
            assert!(m[2].abs() < 1e-9);
            assert!(m[1] >= 0.0);
        }
    }

    #[test]
    fn jensen_bounds_hold() {
        let sol = solution(0.0, FlowParams { z: PairFlow::symmetric_exponential(6.0, 10.0), ..FlowParams::none() });
        let props = MomentPropagators::new(&sol).unwrap();
        let tr = props.trajectory(Pair::Z, 0, 200.0);
        for m in tr.iter() {
            assert!(m[1] >= m[0] * m[0] * (1.0 - 1e-12));
            assert!(m[3] >= m[1] * m[1] * (1.0 - 1e-12));
        }
    }

    #[test]
    fn chained_steps_match_between() {
        let sol = solution(0.0, FlowParams { z: PairFlow::symmetric_exponential(6.0, 10.0), ..FlowParams::none() });
        let props = MomentPropagators::new(&sol).unwrap();
        let phi = props.between(Pair::Z, 10, 60);
        let tr = props.trajectory(Pair::Z, 10, 2.0);
        let m = tr.at(60);
        let direct: f64 = (0..=2).map(|p| phi[2][p] * 2f64.powi(p as i32)).sum();
        assert!((m[1] - direct).abs() < 1e-12 * direct.abs());
    }
}
