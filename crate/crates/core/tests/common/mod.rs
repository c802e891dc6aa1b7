#![allow(dead_code)]

use fxtriplet::neutral::PairCoefficients;
use fxtriplet::params::{Dynamics, ExecutionParams, FlowParams, Mark, Pair, PerPair, Side, TripletParams};
use fxtriplet::quadrature::simpson_weights;
use fxtriplet::robust::{AuxiliaryFlow, RobustCorrection};
use fxtriplet::rng::{stream, StreamLabel};
use fxtriplet::{HSolution, TimeGrid};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

pub fn section5_exec(multiplier: f64) -> ExecutionParams {
    let impact = PerPair::new(5e-8, 1e-8, 1e-7);
    ExecutionParams {
        impact,
        fee_buy: impact.map(|_, a| a / 2.0),
        fee_sell: impact.map(|_, a| a / 2.0),
        penalty: impact.map(|_, a| a * multiplier),
    }
}

pub fn reference(mu_x: f64, mu_y: f64, rho: f64) -> TripletParams {
    TripletParams::new(Dynamics { mu_x, mu_y, sigma_x: 1.7e-3, sigma_y: 1.56e-3, rho }, 0.7459, 0.7678).unwrap()
}

/// Backward RK4 for `(h2, h1)` in time to horizon, with steps shrunk
/// inside the terminal boundary layer.
pub fn rk4_h(c: &PairCoefficients, tau: f64, step: f64) -> (f64, f64) {
    rk4_h_at(c, &[tau], step)[0]
}

/// Same integration, reporting the state at each of the ascending `taus`.
pub fn rk4_h_at(c: &PairCoefficients, taus: &[f64], step: f64) -> Vec<(f64, f64)> {
    let (a, mu, g) = (c.impact, c.drift, c.gamma_minus);
    let f = |h: [f64; 2]| [mu * h[0] - h[0] * h[0] / a, -(mu * (1.0 - h[1]) + h[0] * h[1] / a - 2.0 * g * h[0])];
    let mut h = [c.penalty, 0.0];
    let mut s = 0.0;
    let mut out = Vec::with_capacity(taus.len());
    for &tau in taus {
        while s < tau {
            let dt = step.min(2e-3 * a / h[0].abs().max(1e-300)).min(tau - s);
            let k1 = f(h);
            let k2 = f([h[0] + 0.5 * dt * k1[0], h[1] + 0.5 * dt * k1[1]]);
            let k3 = f([h[0] + 0.5 * dt * k2[0], h[1] + 0.5 * dt * k2[1]]);
            let k4 = f([h[0] + dt * k3[0], h[1] + dt * k3[1]]);
            for j in 0..2 {
                h[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
            }
            s = if tau - s <= dt { tau } else { s + dt };
        }
        out.push((h[0], h[1]));
    }
    out
}

/// One Monte Carlo estimate with its standard error and the value it is
/// checked against.
#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub name: &'static str,
    pub mc: f64,
    pub se: f64,
    pub model: f64,
}

impl Estimate {
    /// Within `k` standard errors, with a relative floor for estimators
    /// that happen to be deterministic.
    pub fn agrees(&self, k: f64, rel_floor: f64) -> bool {
        (self.mc - self.model).abs() <= k * self.se + rel_floor * self.model.abs().max(1e-300)
    }
}

/// Sample path of one auxiliary inventory on the grid knots from `t_0`,
/// using the closed-form decay between exact jump times.
pub fn auxiliary_path<R: Rng>(
    sol: &HSolution,
    flow: &AuxiliaryFlow,
    pair: Pair,
    q0: f64,
    arrivals: &mut R,
    sizes: &mut R,
) -> Vec<f64> {
    let grid = sol.grid();
    let horizon = grid.horizon();
    let c = sol.coefficients(pair);
    let spec = sol.flow().pair(pair);
    // (time, signed size), sorted
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    for side in Side::ALL {
        let f = spec.side(side);
        if f.intensity <= 0.0 {
            continue;
        }
        let sign = if side == Side::Sell { 1.0 } else { -1.0 };
        let mut t = 0.0;
        loop {
            let e: f64 = Exp1.sample(arrivals);
            t += e / f.intensity;
            if t >= horizon {
                break;
            }
            jumps.push((t, sign * f.size.sample(sizes)));
        }
    }
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut path = Vec::with_capacity(grid.knots());
    let mut q = q0;
    path.push(q);
    let mut next = 0;
    for j in 0..grid.steps() {
        let (d, b) = flow.step(pair, j);
        let t1 = grid.time(j + 1);
        q = d * q + b;
        while next < jumps.len() && jumps[next].0 <= t1 {
            let (s, r) = jumps[next];
            q += c.flow_factor(horizon - t1, horizon - s) * r;
            next += 1;
        }
        path.push(q);
    }
    path
}

/// Direct simulation of the Feynman-Kac representation of `H11`, `H12`,
/// `H13` at `t = 0` and inventory `q`.
pub fn h1_monte_carlo(sol: &HSolution, correction: &RobustCorrection, q: [f64; 3], samples: usize, seed: u64) -> [Estimate; 3] {
    let grid = sol.grid();
    let n = grid.steps();
    let flow = AuxiliaryFlow::new(sol).unwrap();
    let p = sol.reference();
    let (mx, my, sx, sy, rho) = (p.mu_x(), p.mu_y(), p.sigma_x(), p.sigma_y(), p.rho());
    let w = simpson_weights(n, grid.dt());
    let times: Vec<f64> = grid.times().collect();
    let w11: Vec<f64> = times.iter().zip(&w).map(|(u, w)| w * ((2.0 * mx + sx * sx) * u).exp() * 0.5 * sx * sx).collect();
    let w12: Vec<f64> = times.iter().zip(&w).map(|(u, w)| w * ((2.0 * my + sy * sy) * u).exp() * 0.5 * sy * sy).collect();
    let w13: Vec<f64> =
        times.iter().zip(&w).map(|(u, w)| w * ((mx + my + rho * sx * sy) * u).exp() * rho * sx * sy).collect();
    let h = |pair: Pair| -> (Vec<f64>, Vec<f64>) {
        (times.iter().map(|&u| sol.h2(pair, u)).collect(), times.iter().map(|&u| sol.h1(pair, u)).collect())
    };
    let ((h2x, h1x), (h2y, h1y), (h2z, h1z)) = (h(Pair::X), h(Pair::Y), h(Pair::Z));
    let h0x: Vec<f64> = times.iter().map(|&u| sol.h0(Mark::X, u)).collect();
    let h0y: Vec<f64> = times.iter().map(|&u| sol.h0(Mark::Y, u)).collect();

    let draws: Vec<[f64; 3]> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut paths = Vec::new();
            for (i, pair) in Pair::ALL.into_iter().enumerate() {
                let mut arr = stream(seed, s as u64, StreamLabel::Custom(2 * i as u32));
                let mut siz = stream(seed, s as u64, StreamLabel::Custom(2 * i as u32 + 1));
                paths.push(auxiliary_path(sol, &flow, pair, q[i], &mut arr, &mut siz));
            }
            let (qx, qy, qz) = (&paths[0], &paths[1], &paths[2]);
            let mut acc = [0.0; 3];
            for j in 0..=n {
                let dx = qx[j] + qz[j] - h0x[j] - h1x[j] * qx[j] - h2x[j] * qx[j] * qx[j] - h1z[j] * qz[j] - h2z[j] * qz[j] * qz[j];
                let dy = qy[j] - h0y[j] - h1y[j] * qy[j] - h2y[j] * qy[j] * qy[j];
                acc[0] -= w11[j] * dx * dx;
                acc[1] -= w12[j] * dy * dy;
                acc[2] -= w13[j] * dx * dy;
            }
            acc
        })
        .collect();
    let coef = correction.at_knot(0);
    let qv = PerPair::new(q[0], q[1], q[2]);
    let model = [coef.h11(q[0], q[2]), coef.h12(q[1]), coef.h13(&qv)];
    let names = ["H11", "H12", "H13"];
    let mut out = [Estimate { name: "", mc: 0.0, se: 0.0, model: 0.0 }; 3];
    for c in 0..3 {
        let v: Vec<f64> = draws.iter().map(|d| d[c]).collect();
        let m = v.iter().sum::<f64>() / samples as f64;
        let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (samples as f64 - 1.0);
        out[c] = Estimate { name: names[c], mc: m, se: (var / samples as f64).sqrt(), model: model[c] };
    }
    out
}

/// The five small instances used by the `H1` oracle.
pub fn h1_instances() -> Vec<(String, HSolution, [f64; 3])> {
    use fxtriplet::params::{ClientFlow, PairFlow, SizeLaw};
    let mut out = Vec::new();
    let grid = TimeGrid::new(1.0, 200);

    let flow = FlowParams { z: PairFlow::symmetric_exponential(6.0, 10.0), ..FlowParams::none() };
    out.push((
        "cross-pair flow only".to_string(),
        HSolution::new(&reference(0.0, 0.0, 0.78), &section5_exec(1e6), &flow, grid).unwrap(),
        [0.0, 0.0, 200.0],
    ));

    let flow = FlowParams {
        x: PairFlow { sell: ClientFlow::exponential(60.0, 2.0), buy: ClientFlow::exponential(40.0, 3.0) },
        ..FlowParams::none()
    };
    out.push((
        "asymmetric x flow with drift".to_string(),
        HSolution::new(&reference(-6.5e-4, -3.2e-4, 0.78), &section5_exec(1e6), &flow, grid).unwrap(),
        [10.0, 0.0, -50.0],
    ));

    let flow = FlowParams {
        y: PairFlow::symmetric_exponential(90.0, 1.0),
        z: PairFlow::symmetric_exponential(6.0, 10.0),
        ..FlowParams::none()
    };
    out.push((
        "weak terminal penalty".to_string(),
        HSolution::new(&reference(0.0, 0.0, 0.78), &section5_exec(1.0), &flow, grid).unwrap(),
        [0.0, 20.0, 100.0],
    ));

    let flow = FlowParams {
        x: PairFlow::symmetric_exponential(60.0, 2.0),
        y: PairFlow::symmetric_exponential(90.0, 1.0),
        z: PairFlow::symmetric_exponential(6.0, 10.0),
    };
    out.push((
        "full client flow".to_string(),
        HSolution::new(&reference(0.0, 0.0, 0.78), &section5_exec(1e6), &flow, grid).unwrap(),
        [5.0, -5.0, 200.0],
    ));

    let c = |intensity: f64, size: f64| ClientFlow { intensity, size: SizeLaw::Constant { size } };
    let flow = FlowParams {
        x: PairFlow { sell: c(30.0, 1.5), buy: c(30.0, 1.5) },
        y: PairFlow { sell: c(20.0, 2.0), buy: c(50.0, 1.0) },
        z: PairFlow { sell: c(3.0, 5.0), buy: c(3.0, 5.0) },
    };
    out.push((
        "constant sizes, negative correlation, short horizon".to_string(),
        HSolution::new(&reference(2e-4, -1e-4, -0.4), &section5_exec(2.5), &flow, TimeGrid::new(0.5, 100)).unwrap(),
        [-20.0, 10.0, 50.0],
    ));
    out
}
