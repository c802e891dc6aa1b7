use serde::{Deserialize, Serialize};

/// Equispaced time grid `t_i = i * horizon / steps`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        assert!(horizon > 0.0 && horizon.is_finite(), "horizon must be positive");
        assert!(steps > 0, "grid needs at least one step");
        Self { horizon, steps }
    }

    /// Grid with step `dt`, if `dt` divides `horizon` to within rounding.
    pub fn with_step(horizon: f64, dt: f64) -> Option<Self> {
        if !(dt > 0.0 && horizon > 0.0 && dt.is_finite() && horizon.is_finite()) {
            return None;
        }
        let ratio = horizon / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
            return None;
        }
        Some(Self::new(horizon, steps as usize))
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn knots(&self) -> usize {
        self.steps + 1
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.steps as f64
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|i| self.time(i))
    }

    /// Interval index and fractional position for linear interpolation.
    /// `t` is clamped to `[0, horizon]`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let s = (t / self.horizon).clamp(0.0, 1.0) * self.steps as f64;
        let i = (s.floor() as usize).min(self.steps - 1);
        (i, s - i as f64)
    }

    pub fn interpolate(&self, table: &[f64], t: f64) -> f64 {
        debug_assert_eq!(table.len(), self.knots());
        let (i, w) = self.locate(t);
        if w == 0.0 {
            table[i]
        } else {
            table[i] * (1.0 - w) + table[i + 1] * w
        }
    }
}
