//! Composite Newton-Cotes rules on uniform grids.

/// Weights of the composite Simpson rule over `intervals` equal steps of
/// width `h` (so `intervals + 1` nodes).
///
/// An odd interval count closes with the 3/8 rule on the last three
/// intervals; a single interval falls back to the trapezoid rule.
pub fn simpson_weights(intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; intervals + 1];
    match intervals {
        0 => {}
        1 => {
            w[0] = h / 2.0;
            w[1] = h / 2.0;
        }
        _ => {
            let simpson_end = if intervals % 2 == 0 { intervals } else { intervals - 3 };
            let mut i = 0;
            while i < simpson_end {
                w[i] += h / 3.0;
                w[i + 1] += 4.0 * h / 3.0;
                w[i + 2] += h / 3.0;
                i += 2;
            }
            if simpson_end < intervals {
                let c = 3.0 * h / 8.0;
                w[simpson_end] += c;
                w[simpson_end + 1] += 3.0 * c;
                w[simpson_end + 2] += 3.0 * c;
                w[simpson_end + 3] += c;
            }
        }
    }
    w
}

/// Composite Simpson integral of equally spaced samples.
pub fn simpson_samples(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    simpson_weights(values.len() - 1, h)
        .iter()
        .zip(values)
        .map(|(w, v)| w * v)
        .sum()
}

/// Composite Simpson rule for `f` on `[a, b]` with `panels` panels
/// (each panel is two intervals).
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, panels: usize) -> f64 {
    let n = 2 * panels.max(1);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Result of [`simpson_refined`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Refined {
    pub value: f64,
    pub panels: usize,
    /// Relative change between the last two refinements.
    pub change: f64,
    pub converged: bool,
}

/// Composite Simpson with panel doubling until the relative change drops
/// to `rel_tol` (against `abs_floor` for values near zero).
pub fn simpson_refined<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    start_panels: usize,
    rel_tol: f64,
    abs_floor: f64,
    max_panels: usize,
) -> Refined {
    let mut panels = start_panels.max(1);
    let mut prev = simpson(f, a, b, panels);
    loop {
        let next_panels = panels * 2;
        let next = simpson(f, a, b, next_panels);
        let change = (next - prev).abs() / next.abs().max(abs_floor);
        if change <= rel_tol {
            return Refined { value: next, panels: next_panels, change, converged: true };
        }
        if next_panels >= max_panels {
            return Refined { value: next, panels: next_panels, change, converged: false };
        }
        panels = next_panels;
        prev = next;
    }
}

/// Map `integral_0^{tau_max} f(tau) dtau` to the variable
/// `s = ln(tau + eps)`, where `tau` is the time remaining to the horizon.
///
/// Integrands with a `1 / (tau + eps)` layer at `tau = 0` become smooth in
/// `s`. Returns the transformed integrand and its bounds.
pub fn horizon_log_transform<F: Fn(f64) -> f64>(
    f: F,
    tau_lo: f64,
    tau_hi: f64,
    eps: f64,
) -> (impl Fn(f64) -> f64, f64, f64) {
    let lo = (tau_lo + eps).ln();
    let hi = (tau_hi + eps).ln();
    let g = move |s: f64| {
        let e = s.exp();
        f((e - eps).max(0.0)) * e
    };
    (g, lo, hi)
}
