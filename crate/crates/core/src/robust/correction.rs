//! First-order ambiguity correction `H1 = H11 x^2 + H12 y^2 + H13 x y`.
//!
//! Each component is a polynomial in the inventories whose coefficients
//! are tabulated on the time grid:
//!
//! * `H11(t, q^x, q^z)`: total degree at most 4, stored as `[a][b]` for
//!   `(q^x)^a (q^z)^b`;
//! * `H12(t, q^y)`: degree at most 4;
//! * `H13(t, q)`: degree at most 2 in `(q^x, q^z)` jointly and at most 2 in
//!   `q^y`, stored as `[a][b][c]` for `(q^x)^a (q^z)^b (q^y)^c`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::SolveError;
use crate::grid::TimeGrid;
use crate::neutral::HSolution;
use crate::params::{Inventory, Pair, PerPair};
use crate::quadrature::simpson_weights;

use super::moments::{compose, identity, MomentPropagators, Propagator};

pub type H11Coefficients = [[f64; 5]; 5];
pub type H12Coefficients = [f64; 5];
pub type H13Coefficients = [[[f64; 3]; 3]; 3];

fn powers<const N: usize>(q: f64) -> [f64; N] {
    let mut p = [1.0; N];
    for i in 1..N {
        p[i] = p[i - 1] * q;
    }
    p
}

/// `H1` and its partial derivatives at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct H1Evaluation {
    pub value: f64,
    pub h11: f64,
    pub h12: f64,
    pub h13: f64,
    pub d_x: f64,
    pub d_y: f64,
    pub d_q: Inventory,
}

/// Polynomial coefficients of the three components at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct H1Coefficients {
    pub h11: H11Coefficients,
    pub h12: H12Coefficients,
    pub h13: H13Coefficients,
}

impl H1Coefficients {
    pub fn h11(&self, qx: f64, qz: f64) -> f64 {
        let (px, pz) = (powers::<5>(qx), powers::<5>(qz));
        let mut s = 0.0;
        for a in 0..5 {
            for b in 0..5 - a {
                s += self.h11[a][b] * px[a] * pz[b];
            }
        }
        s
    }

    /// `(d/dq^x, d/dq^z)` of `H11`.
    pub fn h11_gradient(&self, qx: f64, qz: f64) -> (f64, f64) {
        let (px, pz) = (powers::<5>(qx), powers::<5>(qz));
        let (mut dx, mut dz) = (0.0, 0.0);
        for a in 0..5 {
            for b in 0..5 - a {
                let c = self.h11[a][b];
                if a > 0 {
                    dx += c * a as f64 * px[a - 1] * pz[b];
                }
                if b > 0 {
                    dz += c * b as f64 * px[a] * pz[b - 1];
                }
            }
        }
        (dx, dz)
    }

    pub fn h12(&self, qy: f64) -> f64 {
        let p = powers::<5>(qy);
        (0..5).map(|n| self.h12[n] * p[n]).sum()
    }

    pub fn h12_derivative(&self, qy: f64) -> f64 {
        let p = powers::<5>(qy);
        (1..5).map(|n| self.h12[n] * n as f64 * p[n - 1]).sum()
    }

    pub fn h13(&self, q: &Inventory) -> f64 {
        let (px, pz, py) = (powers::<3>(q.x), powers::<3>(q.z), powers::<3>(q.y));
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    s += self.h13[a][b][c] * px[a] * pz[b] * py[c];
                }
            }
        }
        s
    }

    pub fn h13_gradient(&self, q: &Inventory) -> Inventory {
        let (px, pz, py) = (powers::<3>(q.x), powers::<3>(q.z), powers::<3>(q.y));
        let mut g = PerPair::splat(0.0);
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let k = self.h13[a][b][c];
                    if k == 0.0 {
                        continue;
                    }
                    if a > 0 {
                        g.x += k * a as f64 * px[a - 1] * pz[b] * py[c];
                    }
                    if b > 0 {
                        g.z += k * b as f64 * px[a] * pz[b - 1] * py[c];
                    }
                    if c > 0 {
                        g.y += k * c as f64 * px[a] * pz[b] * py[c - 1];
                    }
                }
            }
        }
        g
    }

    pub fn evaluate(&self, x: f64, y: f64, q: &Inventory) -> H1Evaluation {
        let h11 = self.h11(q.x, q.z);
        let h12 = self.h12(q.y);
        let h13 = self.h13(q);
        let (d11x, d11z) = self.h11_gradient(q.x, q.z);
        let d12y = self.h12_derivative(q.y);
        let d13 = self.h13_gradient(q);
        H1Evaluation {
            value: h11 * x * x + h12 * y * y + h13 * x * y,
            h11,
            h12,
            h13,
            d_x: 2.0 * h11 * x + h13 * y,
            d_y: 2.0 * h12 * y + h13 * x,
            d_q: PerPair::new(
                x * x * d11x + x * y * d13.x,
                y * y * d12y + x * y * d13.y,
                x * x * d11z + x * y * d13.z,
            ),
        }
    }

    fn blend(&self, other: &Self, w: f64) -> Self {
        let mut out = *self;
        for a in 0..5 {
            for b in 0..5 {
                out.h11[a][b] += w * (other.h11[a][b] - self.h11[a][b]);
            }
            out.h12[a] += w * (other.h12[a] - self.h12[a]);
        }
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    out.h13[a][b][c] += w * (other.h13[a][b][c] - self.h13[a][b][c]);
                }
            }
        }
        out
    }

    fn all_finite(&self) -> bool {
        self.h11.iter().flatten().chain(self.h12.iter()).chain(self.h13.iter().flatten().flatten()).all(|v| v.is_finite())
    }
}

/// One row of the coefficient table: component, exponents of
/// `(q^x, q^y, q^z)` and value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientRow {
    pub t: f64,
    pub component: &'static str,
    pub exponents: [usize; 3],
    pub value: f64,
}

/// Tabulated `H1` coefficients.
#[derive(Debug, Clone)]
pub struct RobustCorrection {
    grid: TimeGrid,
    table: Vec<H1Coefficients>,
}

impl RobustCorrection {
    pub fn new(sol: &HSolution) -> Result<Self, SolveError> {
        let props = MomentPropagators::new(sol)?;
        Self::with_propagators(sol, &props)
    }

    pub fn with_propagators(sol: &HSolution, props: &MomentPropagators) -> Result<Self, SolveError> {
        let grid = sol.grid();
        if props.grid() != grid {
            return Err(SolveError::Grid("moment propagators and h-tables use different grids".into()));
        }
        let table: Vec<H1Coefficients> =
            (0..grid.knots()).into_par_iter().map(|i| coefficients_from(sol, props, i)).collect();
        for (i, c) in table.iter().enumerate() {
            if !c.all_finite() {
                return Err(SolveError::NonFinite { what: "H1 coefficient".into(), t: grid.time(i) });
            }
        }
        Ok(Self { grid, table })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn at_knot(&self, i: usize) -> &H1Coefficients {
        &self.table[i]
    }

    /// Coefficients at `t`, linearly interpolated between knots.
    pub fn at(&self, t: f64) -> H1Coefficients {
        let (i, w) = self.grid.locate(t);
        if w == 0.0 {
            self.table[i]
        } else {
            self.table[i].blend(&self.table[i + 1], w)
        }
    }

    pub fn evaluate(&self, t: f64, x: f64, y: f64, q: &Inventory) -> H1Evaluation {
        self.at(t).evaluate(x, y, q)
    }

    /// Flattened coefficient table with one row per knot and monomial.
    pub fn rows(&self) -> Vec<CoefficientRow> {
        let mut rows = Vec::new();
        for (i, c) in self.table.iter().enumerate() {
            let t = self.grid.time(i);
            for a in 0..5 {
                for b in 0..5 - a {
                    rows.push(CoefficientRow { t, component: "H11", exponents: [a, 0, b], value: c.h11[a][b] });
                }
            }
            for n in 0..5 {
                rows.push(CoefficientRow { t, component: "H12", exponents: [0, n, 0], value: c.h12[n] });
            }
            for a in 0..3 {
                for b in 0..3 - a {
                    for cc in 0..3 {
                        rows.push(CoefficientRow { t, component: "H13", exponents: [a, cc, b], value: c.h13[a][b][cc] });
                    }
                }
            }
        }
        rows
    }
}

/// Outer weights of the three components at `u - t`.
fn weights(sol: &HSolution, elapsed: f64) -> (f64, f64, f64) {
    let p = sol.reference();
    let (mx, my, sx, sy, rho) = (p.mu_x(), p.mu_y(), p.sigma_x(), p.sigma_y(), p.rho());
    (
        ((2.0 * mx + sx * sx) * elapsed).exp() * 0.5 * sx * sx,
        ((2.0 * my + sy * sy) * elapsed).exp() * 0.5 * sy * sy,
        ((mx + my + rho * sx * sy) * elapsed).exp() * rho * sx * sy,
    )
}

fn coefficients_from(sol: &HSolution, props: &MomentPropagators, i: usize) -> H1Coefficients {
    let grid = sol.grid();
    let n = grid.steps();
    let mut out = H1Coefficients::default();
    if i == n {
        return out;
    }
    let w = simpson_weights(n - i, grid.dt());
    let t = grid.time(i);
    let mut phi: PerPair<Propagator> = PerPair::from_fn(|_| identity());
    for j in i..=n {
        if j > i {
            for k in Pair::ALL {
                phi[k] = compose(props.step(k, j - 1), &phi[k]);
            }
        }
        let h = sol.coefficients_at_knot(j);
        let (w11, w12, w13) = weights(sol, grid.time(j) - t);
        let wj = w[j - i];

        // d_x H0 = c0 + (1 - h1x) Qx - h2x Qx^2 + (1 - h1z) Qz - h2z Qz^2,
        // stored as p[a][b] for Qx^a Qz^b
        let mut p = [[0.0; 3]; 3];
        p[0][0] = -h.h0_x;
        p[1][0] = 1.0 - h.h1.x;
        p[2][0] = -h.h2.x;
        p[0][1] = 1.0 - h.h1.z;
        p[0][2] = -h.h2.z;
        let gy = [-h.h0_y, 1.0 - h.h1.y, -h.h2.y];

        // square of d_x H0 in (Qx, Qz)
        let mut g = [[0.0; 5]; 5];
        for a1 in 0..3 {
            for b1 in 0..3 {
                if p[a1][b1] == 0.0 {
                    continue;
                }
                for a2 in 0..3 {
                    for b2 in 0..3 {
                        g[a1 + a2][b1 + b2] += p[a1][b1] * p[a2][b2];
                    }
                }
            }
        }
        // E[Qx^a Qz^b] = m_a^x m_b^z, each a polynomial in the start inventory
        let (px, pz, py) = (&phi.x, &phi.z, &phi.y);
        let mut tmp = [[0.0; 5]; 5];
        for a in 0..5 {
            for r in 0..5 {
                tmp[a][r] = (r..5).map(|b| g[a][b] * pz[b][r]).sum();
            }
        }
        for pp in 0..5 {
            for r in 0..5 - pp {
                let e: f64 = (pp..5).map(|a| px[a][pp] * tmp[a][r]).sum();
                out.h11[pp][r] -= wj * w11 * e;
            }
        }

        let mut gy2 = [0.0; 5];
        for a in 0..3 {
            for b in 0..3 {
                gy2[a + b] += gy[a] * gy[b];
            }
        }
        for c in 0..5 {
            let e: f64 = (c..5).map(|n| gy2[n] * py[n][c]).sum();
            out.h12[c] -= wj * w12 * e;
        }

        if w13 != 0.0 {
            let mut ex = [[0.0; 3]; 3];
            for a in 0..3 {
                for b in 0..3 {
                    if p[a][b] == 0.0 {
                        continue;
                    }
                    for pp in 0..=a {
                        for r in 0..=b {
                            ex[pp][r] += p[a][b] * px[a][pp] * pz[b][r];
                        }
                    }
                }
            }
            let mut ey = [0.0; 3];
            for (c, slot) in ey.iter_mut().enumerate() {
                *slot = (c..3).map(|nn| gy[nn] * py[nn][c]).sum();
            }
            for a in 0..3 {
                for b in 0..3 {
                    for c in 0..3 {
                        out.h13[a][b][c] -= wj * w13 * ex[a][b] * ey[c];
                    }
                }
            }
        }
    }
    out
}
