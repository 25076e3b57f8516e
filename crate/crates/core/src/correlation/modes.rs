//! Trigonometric series `f(t) = c + sum_k [a_k cos(w_k t) + b_k sin(w_k t)]`
//! and their regularized (Laplace) integrals.

use gauss_quad::GaussLegendre;

/// One oscillating term; `frequency` is angular, in inverse time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub frequency: f64,
    pub cos: f64,
    pub sin: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationModes {
    pub constant: f64,
    pub modes: Vec<Mode>,
}

/// Tail fraction `e^{-s t_max}` left out by the quadrature.
pub const TAIL_FRACTION: f64 = 1e-8;

/// Gauss-Legendre nodes per panel.
const PANEL_NODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralEstimate {
    pub value: f64,
    pub error_estimate: f64,
}

impl CorrelationModes {
    pub fn eval(&self, t: f64) -> f64 {
        let mut acc = self.constant;
        for m in &self.modes {
            let (s, c) = (m.frequency * t).sin_cos();
            acc += m.cos * c + m.sin * s;
        }
        acc
    }

    /// Largest `|w_k|`, zero for a constant series.
    pub fn max_frequency(&self) -> f64 {
        self.modes.iter().fold(0.0, |a, m| a.max(m.frequency.abs()))
    }

    /// Upper bound on `|f(t)|`.
    pub fn envelope(&self) -> f64 {
        self.constant.abs() + self.modes.iter().map(|m| m.cos.abs() + m.sin.abs()).sum::<f64>()
    }

    /// `int_0^inf e^{-s t} f(t) dt` in closed form.
    pub fn laplace(&self, s: f64) -> f64 {
        let mut acc = self.constant / s;
        for m in &self.modes {
            let w = m.frequency;
            acc += (m.cos * s + m.sin * w) / (s * s + w * w);
        }
        acc
    }

    /// `lim_{s -> 0} int_0^inf e^{-s t} f(t) dt`; infinite when a constant
    /// term is present.
    pub fn laplace_limit(&self) -> f64 {
        if self.constant != 0.0 {
            return f64::INFINITY.copysign(self.constant);
        }
        self.modes
            .iter()
            .filter(|m| m.frequency != 0.0)
            .map(|m| m.sin / m.frequency)
            .sum()
    }

    /// `int_0^inf e^{-s t} f(t) dt` by panelled Gauss-Legendre quadrature on
    /// `[0, t_max]` with `e^{-s t_max} = 1e-8`.
    ///
    /// Panels span half the shortest period (20 nodes per period); the error
    /// estimate is the difference to a run with panels twice as long, plus a
    /// bound on the dropped tail and a rounding floor.
    pub fn laplace_quadrature(&self, s: f64) -> IntegralEstimate {
        let t_max = -TAIL_FRACTION.ln() / s;
        let w = self.max_frequency();
        // a non-oscillating integrand still needs to resolve e^{-st}
        let period = if w > 0.0 { 2.0 * std::f64::consts::PI / w } else { f64::INFINITY };
        let fine_len = (0.5 * period).min(1.0 / s);
        let fine_panels = (t_max / fine_len).ceil().max(1.0) as usize;
        let rule = GaussLegendre::new(PANEL_NODES).expect("degree >= 2");
        let run = |panels: usize| -> f64 {
            let h = t_max / panels as f64;
            (0..panels)
                .map(|k| {
                    let a = k as f64 * h;
                    rule.integrate(a, a + h, |t| (-s * t).exp() * self.eval(t))
                })
                .sum()
        };
        let fine = run(fine_panels);
        let coarse = run(fine_panels.div_ceil(2));
        let envelope = self.envelope();
        let tail = TAIL_FRACTION * envelope / s;
        let rounding = 16.0 * f64::EPSILON * (fine_panels as f64 * PANEL_NODES as f64).sqrt() * envelope / s;
        IntegralEstimate { value: fine, error_estimate: (fine - coarse).abs() + tail + rounding }
    }
}

/// Polynomial extrapolation in `s^2` to `s = 0` (Neville). Returns the
/// extrapolated value and its change when the largest `s` is dropped.
pub fn extrapolate_to_zero(s_values: &[f64], values: &[f64]) -> (f64, f64) {
    assert_eq!(s_values.len(), values.len());
    assert!(!values.is_empty());
    let full = neville_at_zero(s_values, values);
    if values.len() == 1 {
        return (full, f64::INFINITY);
    }
    let reduced = neville_at_zero(&s_values[1..], &values[1..]);
    (full, (full - reduced).abs())
}

fn neville_at_zero(s_values: &[f64], values: &[f64]) -> f64 {
    let x: Vec<f64> = s_values.iter().map(|s| s * s).collect();
    let mut p = values.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let (xi, xj) = (x[i], x[i + level]);
            p[i] = (xj * p[i] - xi * p[i + 1]) / (xj - xi);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(w: f64, cos: f64, sin: f64) -> CorrelationModes {
        CorrelationModes { constant: 0.0, modes: vec![Mode { frequency: w, cos, sin }] }
    }

    #[test]
    fn zero_series() {
        let z = CorrelationModes::default();
        assert_eq!(z.laplace(0.3), 0.0);
        assert_eq!(z.laplace_limit(), 0.0);
        assert_eq!(z.laplace_quadrature(0.3).value, 0.0);
    }

    #[test]
    fn single_sine_closed_form() {
        let m = single(2.0, 0.0, 1.0);
        assert_eq!(m.laplace(1.0), 2.0 / 5.0);
        assert_eq!(m.laplace_limit(), 0.5);
        let q = m.laplace_quadrature(1.0);
        assert!((q.value - 0.4).abs() <= q.error_estimate);
        assert!(q.error_estimate < 1e-7);
    }

    #[test]
    fn single_cosine_transform() {
        // int e^{-zt} cos(wt) = z / (z^2 + w^2)
        let m = single(1.0, 1.0, 0.0);
        assert!((m.laplace(1.0) - 0.5).abs() < 1e-16);
        let q = m.laplace_quadrature(0.5);
        assert!((q.value - m.laplace(0.5)).abs() <= q.error_estimate);
    }

    #[test]
    fn quadrature_matches_closed_form_for_small_s() {
        let m = CorrelationModes {
            constant: 0.0,
            modes: vec![
                Mode { frequency: 0.7, cos: 0.0, sin: -0.3 },
                Mode { frequency: 2.9, cos: 0.0, sin: 0.11 },
                Mode { frequency: -1.3, cos: 0.2, sin: 0.05 },
            ],
        };
        let exact = m.laplace(0.05);
        let q = m.laplace_quadrature(0.05);
        assert!((q.value - exact).abs() <= q.error_estimate);
        assert!((q.value - exact).abs() <= 1e-6 * exact.abs());
    }

    #[test]
    fn extrapolation_is_exact_for_polynomials_in_s_squared() {
        let f = |s: f64| 1.5 - 0.7 * s * s + 0.2 * s.powi(4);
        let s = [0.2, 0.1, 0.05];
        let v: Vec<f64> = s.iter().map(|&x| f(x)).collect();
        let (limit, err) = extrapolate_to_zero(&s, &v);
        assert!((limit - 1.5).abs() < 1e-13);
        assert!(err >= (limit - 1.5).abs());
        let v: Vec<f64> = s.iter().map(|&x| 2.0 + 3.0 * x * x).collect();
        let (limit, err) = extrapolate_to_zero(&s, &v);
        assert!((limit - 2.0).abs() < 1e-14 && err < 1e-14);
    }
}
