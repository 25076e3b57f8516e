//! Smooth U(1) gauge fields `alpha(R)` and the gauge-covariance diagnostic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::family::{HamiltonianFamily, ParameterPoint};
use crate::geometry::frame::GaugeSpec;
use crate::geometry::point::{potentials_in_gauge, OmegaRoute};

/// `alpha(R) = sum_t coeff_t prod_i R_i^{p_ti}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialGauge {
    pub terms: Vec<(Vec<u32>, f64)>,
}

impl PolynomialGauge {
    pub fn zero() -> Self {
        PolynomialGauge { terms: Vec::new() }
    }

    /// `alpha = c R_axis`.
    pub fn linear(param_dim: usize, axis: usize, c: f64) -> Self {
        let mut p = vec![0; param_dim];
        p[axis] = 1;
        PolynomialGauge { terms: vec![(p, c)] }
    }

    /// Random polynomial with every monomial of total degree 1..=3,
    /// coefficients uniform in `[-1, 1]`.
    pub fn random_cubic(param_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms = Vec::new();
        let mut powers = vec![0u32; param_dim];
        fn rec(i: usize, left: u32, powers: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if i == powers.len() {
                let deg: u32 = powers.iter().sum();
                if deg >= 1 {
                    out.push(powers.clone());
                }
                return;
            }
            for p in 0..=left {
                powers[i] = p;
                rec(i + 1, left - p, powers, out);
            }
            powers[i] = 0;
        }
        let mut monomials = Vec::new();
        rec(0, 3, &mut powers, &mut monomials);
        for p in monomials {
            terms.push((p, rng.random_range(-1.0..1.0)));
        }
        PolynomialGauge { terms }
    }

    pub fn value(&self, r: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(p, c)| c * p.iter().zip(r).map(|(&k, &x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }

    pub fn gradient(&self, r: &[f64]) -> Vec<f64> {
        (0..r.len())
            .map(|axis| {
                self.terms
                    .iter()
                    .filter(|(p, _)| p[axis] > 0)
                    .map(|(p, c)| {
                        c * p
                            .iter()
                            .zip(r)
                            .enumerate()
                            .map(|(i, (&k, &x))| {
                                if i == axis {
                                    k as f64 * x.powi(k as i32 - 1)
                                } else {
                                    x.powi(k as i32)
                                }
                            })
                            .product::<f64>()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Max deviations from the expected transformation laws
/// `A -> A - grad alpha`, `P -> P - grad alpha`, `Omega -> Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeCheckReport {
    pub a_deviation: f64,
    pub p_deviation: f64,
    pub omega_deviation: f64,
    pub a_shift: Vec<f64>,
}

/// Recomputes the gauge potentials with `|n> -> e^{i alpha}|n>` and compares
/// against the untransformed ones shifted by the analytic `grad alpha`.
pub fn gauge_transform_check(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    alpha: &PolynomialGauge,
) -> Result<GaugeCheckReport> {
    let plain = potentials_in_gauge(family, r, r0, n, OmegaRoute::AP, GaugeSpec::default())?;
    let moved = potentials_in_gauge(
        family,
        r,
        r0,
        n,
        OmegaRoute::AP,
        GaugeSpec { alpha: Some(alpha), pivot: None },
    )?;
    let grad = alpha.gradient(r.coords());
    let mut a_dev = 0.0_f64;
    let mut p_dev = 0.0_f64;
    let mut o_dev = 0.0_f64;
    for i in 0..grad.len() {
        a_dev = a_dev.max((moved.a[i] - (plain.a[i] - grad[i])).abs());
        p_dev = p_dev.max((moved.p[i] - (plain.p[i] - grad[i])).abs());
        o_dev = o_dev.max((moved.omega[i] - plain.omega[i]).abs());
    }
    let a_shift = moved.a.iter().zip(&plain.a).map(|(m, p)| m - p).collect();
    Ok(GaugeCheckReport {
        a_deviation: a_dev,
        p_deviation: p_dev,
        omega_deviation: o_dev,
        a_shift,
    })
}
