//! Ambiguity-averse controls to first order in `phi`.

mod correction;
mod flow;
mod moments;

pub use correction::{
    CoefficientRow, H11Coefficients, H12Coefficients, H13Coefficients, H1Coefficients,
    H1Evaluation, RobustCorrection,
};
pub use flow::AuxiliaryFlow;
pub use moments::{MomentPropagators, MomentTrajectory, Propagator, MOMENT_ORDER};

use serde::Serialize;

use crate::error::SolveError;
use crate::neutral::{HCoefficients, HSolution};
use crate::params::{ExecutionParams, Inventory, Pair, PerPair, TripletParams};

/// Worst-case Girsanov drifts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct DriftAdjustment {
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub kappa_z: f64,
}

impl DriftAdjustment {
    /// Completes `(kappa_x, kappa_y)` with
    /// `kappa_z = (sigma_x kappa_x - sigma_y kappa_y) / sigma_z`.
    pub fn from_xy(kappa_x: f64, kappa_y: f64, params: &TripletParams) -> Self {
        let num = params.sigma_x() * kappa_x - params.sigma_y() * kappa_y;
        let kappa_z = if params.sigma_z() > 0.0 { num / params.sigma_z() } else { 0.0 };
        Self { kappa_x, kappa_y, kappa_z }
    }

    pub fn get(&self, pair: Pair) -> f64 {
        match pair {
            Pair::X => self.kappa_x,
            Pair::Y => self.kappa_y,
            Pair::Z => self.kappa_z,
        }
    }
}

/// `H0` and `H1` coefficients at one instant, enough to evaluate all
/// controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlSnapshot {
    pub h0: HCoefficients,
    pub h1: H1Coefficients,
}

impl ControlSnapshot {
    /// Approximate robust speeds
    /// `[(k - d_q H0) - phi d_q H1] / (2 a k)` with `k` the marking rate.
    pub fn speeds(&self, exec: &ExecutionParams, x: f64, y: f64, q: &Inventory, phi: f64) -> PerPair<f64> {
        let d1 = if phi != 0.0 { self.h1.evaluate(x, y, q).d_q } else { PerPair::splat(0.0) };
        PerPair::from_fn(|k| {
            let mark = k.mark().select(x, y);
            let neutral = self.h0.speed(k, exec.impact[k], q[k]);
            neutral - phi * d1[k] / (2.0 * exec.impact[k] * mark)
        })
    }

    /// Worst-case drift adjustment, truncated at first order in `H1`.
    pub fn drift_adjustment(&self, params: &TripletParams, x: f64, y: f64, q: &Inventory, phi: f64) -> DriftAdjustment {
        if phi == 0.0 {
            return DriftAdjustment::default();
        }
        let e1 = self.h1.evaluate(x, y, q);
        let vx = params.sigma_x() * x * (self.h0.d_x(q) + phi * e1.d_x);
        let vy = params.sigma_y() * y * (self.h0.d_y(q) + phi * e1.d_y);
        let rho = params.rho();
        DriftAdjustment::from_xy(-phi * (vx + rho * vy), -phi * (rho * vx + vy), params)
    }
}

/// Neutral solution together with its first-order ambiguity correction.
#[derive(Debug, Clone)]
pub struct RobustSolution {
    neutral: HSolution,
    correction: RobustCorrection,
}

impl RobustSolution {
    pub fn new(neutral: HSolution) -> Result<Self, SolveError> {
        let correction = RobustCorrection::new(&neutral)?;
        Ok(Self { neutral, correction })
    }

    pub fn neutral(&self) -> &HSolution {
        &self.neutral
    }

    pub fn correction(&self) -> &RobustCorrection {
        &self.correction
    }

    pub fn snapshot_at_knot(&self, i: usize) -> ControlSnapshot {
        ControlSnapshot { h0: self.neutral.coefficients_at_knot(i), h1: *self.correction.at_knot(i) }
    }

    pub fn snapshot(&self, t: f64) -> ControlSnapshot {
        ControlSnapshot { h0: self.neutral.coefficients_at(t), h1: self.correction.at(t) }
    }

    fn check_state(&self, t: f64, x: f64, y: f64, q: &Inventory) -> Result<(), SolveError> {
        for (what, v) in [("t", t), ("x", x), ("y", y), ("q_x", q.x), ("q_y", q.y), ("q_z", q.z)] {
            if !v.is_finite() {
                return Err(SolveError::NonFinite { what: what.into(), t });
            }
        }
        if x <= 0.0 {
            return Err(SolveError::NonPositiveMark(x));
        }
        if y <= 0.0 {
            return Err(SolveError::NonPositiveMark(y));
        }
        let horizon = self.neutral.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(SolveError::TimeOutOfRange { t, horizon });
        }
        Ok(())
    }

    /// Approximate robust speed for one pair.
    pub fn robust_speed(&self, pair: Pair, t: f64, x: f64, y: f64, q: &Inventory, phi: f64) -> Result<f64, SolveError> {
        self.check_state(t, x, y, q)?;
        Ok(self.snapshot(t).speeds(self.neutral.exec(), x, y, q, phi)[pair])
    }

    pub fn drift_adjustment(&self, t: f64, x: f64, y: f64, q: &Inventory, phi: f64) -> Result<DriftAdjustment, SolveError> {
        self.check_state(t, x, y, q)?;
        Ok(self.snapshot(t).drift_adjustment(self.neutral.reference(), x, y, q, phi))
    }

    pub fn eval_h1(&self, t: f64, x: f64, y: f64, q: &Inventory) -> Result<H1Evaluation, SolveError> {
        self.check_state(t, x, y, q)?;
        Ok(self.correction.evaluate(t, x, y, q))
    }
}

/// Near-horizon coefficients `(C_x, C_y)` of the robust speed in the
/// large-penalty, no-client-flow limit:
/// `nu^k ~ q^k / (T - t) * (1 + phi sigma_k C_k)`.
pub fn prop6_c(x: f64, y: f64, q: &Inventory, params: &TripletParams, exec: &ExecutionParams) -> (f64, f64) {
    let block_x = exec.impact.x * x * q.x * q.x + exec.impact.z * x * q.z * q.z;
    let block_y = exec.impact.y * y * q.y * q.y;
    let (sx, sy, rho) = (params.sigma_x(), params.sigma_y(), params.rho());
    (sx * block_x + rho * sy * block_y, rho * sx * block_x + sy * block_y)
}
