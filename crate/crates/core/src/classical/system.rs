//! Separable classical fast systems `h = sum_k p_k^2 / 2m_k + V(r; R)`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Potential energy `V(r; R)` together with the data the samplers need.
pub trait Potential: Send + Sync {
    fn dof(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn value(&self, r: &[f64], big_r: &[f64]) -> f64;
    /// `dV/dr` into `out`.
    fn gradient(&self, r: &[f64], big_r: &[f64], out: &mut [f64]);
    /// `dV/dR` into `out`.
    fn parameter_gradient(&self, r: &[f64], big_r: &[f64], out: &mut [f64]);
    fn minimum(&self, big_r: &[f64]) -> Result<f64>;
    /// Box containing `{r : V(r; R) <= energy}`.
    fn bounding_box(&self, big_r: &[f64], energy: f64) -> Result<Vec<(f64, f64)>>;
}

/// `V = sum_k m_k w_k^2 (r_k - R_k)^2 / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Harmonic {
    pub mass: Vec<f64>,
    pub omega: Vec<f64>,
}

impl Potential for Harmonic {
    fn dof(&self) -> usize {
        self.mass.len()
    }

    fn param_dim(&self) -> usize {
        self.mass.len()
    }

    fn value(&self, r: &[f64], big_r: &[f64]) -> f64 {
        (0..r.len())
            .map(|k| 0.5 * self.mass[k] * self.omega[k].powi(2) * (r[k] - big_r[k]).powi(2))
            .sum()
    }

    fn gradient(&self, r: &[f64], big_r: &[f64], out: &mut [f64]) {
        for k in 0..r.len() {
            out[k] = self.mass[k] * self.omega[k].powi(2) * (r[k] - big_r[k]);
        }
    }

    fn parameter_gradient(&self, r: &[f64], big_r: &[f64], out: &mut [f64]) {
        for k in 0..r.len() {
            out[k] = -self.mass[k] * self.omega[k].powi(2) * (r[k] - big_r[k]);
        }
    }

    fn minimum(&self, _big_r: &[f64]) -> Result<f64> {
        Ok(0.0)
    }

    fn bounding_box(&self, big_r: &[f64], energy: f64) -> Result<Vec<(f64, f64)>> {
        Ok((0..self.dof())
            .map(|k| {
                let a = (2.0 * energy.max(0.0) / (self.mass[k] * self.omega[k].powi(2))).sqrt();
                (big_r[k] - a, big_r[k] + a)
            })
            .collect())
    }
}

/// `V = R_1 r_1^2 r_2^2 + beta (r_1^4 + r_2^4) / 4`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticCoupled {
    pub beta: f64,
}

impl Potential for QuarticCoupled {
    fn dof(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn value(&self, r: &[f64], big_r: &[f64]) -> f64 {
        let (x2, y2) = (r[0] * r[0], r[1] * r[1]);
        big_r[0] * x2 * y2 + 0.25 * self.beta * (x2 * x2 + y2 * y2)
    }

    fn gradient(&self, r: &[f64], big_r: &[f64], out: &mut [f64]) {
        let (x, y) = (r[0], r[1]);
        out[0] = 2.0 * big_r[0] * x * y * y + self.beta * x * x * x;
        out[1] = 2.0 * big_r[0] * x * x * y + self.beta * y * y * y;
    }

    fn parameter_gradient(&self, r: &[f64], _big_r: &[f64], out: &mut [f64]) {
        out[0] = r[0] * r[0] * r[1] * r[1];
    }

    fn minimum(&self, big_r: &[f64]) -> Result<f64> {
        if big_r[0] < 0.0 {
            return Err(Error::InvalidInput(format!("coupling R_1 = {} makes the potential unbounded below", big_r[0])));
        }
        Ok(0.0)
    }

    fn bounding_box(&self, big_r: &[f64], energy: f64) -> Result<Vec<(f64, f64)>> {
        self.minimum(big_r)?;
        // V >= beta r_k^4 / 4 for R_1 >= 0
        let a = (4.0 * energy.max(0.0) / self.beta).powf(0.25);
        Ok(vec![(-a, a), (-a, a)])
    }
}

#[derive(Clone)]
pub enum SystemKind {
    Harmonic(Harmonic),
    QuarticCoupled(QuarticCoupled),
    Separable(Arc<dyn Potential>),
}

impl fmt::Debug for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SystemKind::Harmonic(h) => f.debug_tuple("Harmonic").field(h).finish(),
            SystemKind::QuarticCoupled(q) => f.debug_tuple("QuarticCoupled").field(q).finish(),
            SystemKind::Separable(_) => f.write_str("Separable(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassicalFastSystem {
    pub kind: SystemKind,
    pub mass: Vec<f64>,
    pub hbar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub r: Vec<f64>,
    pub p: Vec<f64>,
}

impl ClassicalFastSystem {
    /// Harmonic oscillators centered at `R` (one parameter per degree of freedom).
    pub fn harmonic(mass: Vec<f64>, omega: Vec<f64>) -> Result<Self> {
        if mass.is_empty() || mass.len() != omega.len() {
            return Err(Error::DimensionMismatch { what: "harmonic omega", expected: mass.len(), found: omega.len() });
        }
        if mass.iter().chain(&omega).any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidInput("masses and frequencies must be positive".into()));
        }
        Ok(ClassicalFastSystem { kind: SystemKind::Harmonic(Harmonic { mass: mass.clone(), omega }), mass, hbar: 1.0 })
    }

    /// Two coupled quartic oscillators with unit masses; `R_1` is the coupling.
    pub fn quartic_coupled(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        Ok(ClassicalFastSystem { kind: SystemKind::QuarticCoupled(QuarticCoupled { beta }), mass: vec![1.0, 1.0], hbar: 1.0 })
    }

    pub fn separable(mass: Vec<f64>, potential: Arc<dyn Potential>) -> Result<Self> {
        if mass.len() != potential.dof() {
            return Err(Error::DimensionMismatch { what: "masses", expected: potential.dof(), found: mass.len() });
        }
        if mass.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::InvalidInput("masses must be positive".into()));
        }
        Ok(ClassicalFastSystem { kind: SystemKind::Separable(potential), mass, hbar: 1.0 })
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidInput(format!("hbar must be positive, got {hbar}")));
        }
        self.hbar = hbar;
        Ok(self)
    }

    pub fn potential(&self) -> &dyn Potential {
        match &self.kind {
            SystemKind::Harmonic(h) => h,
            SystemKind::QuarticCoupled(q) => q,
            SystemKind::Separable(p) => p.as_ref(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SystemKind::Harmonic(_) => "builtin-harmonic",
            SystemKind::QuarticCoupled(_) => "builtin-quartic-coupled",
            SystemKind::Separable(_) => "separable-analytic",
        }
    }

    pub fn dof(&self) -> usize {
        self.mass.len()
    }

    pub fn param_dim(&self) -> usize {
        self.potential().param_dim()
    }

    pub fn check_parameters(&self, big_r: &[f64]) -> Result<()> {
        if big_r.len() != self.param_dim() {
            return Err(Error::DimensionMismatch { what: "classical parameter point", expected: self.param_dim(), found: big_r.len() });
        }
        if big_r.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("parameter point must be finite".into()));
        }
        Ok(())
    }

    pub fn kinetic(&self, p: &[f64]) -> f64 {
        p.iter().zip(&self.mass).map(|(p, m)| p * p / (2.0 * m)).sum()
    }

    pub fn energy(&self, z: &PhasePoint, big_r: &[f64]) -> f64 {
        self.kinetic(&z.p) + self.potential().value(&z.r, big_r)
    }

    /// `dh/dR_i` at `z`.
    pub fn parameter_force(&self, z: &PhasePoint, big_r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.param_dim()];
        self.potential().parameter_gradient(&z.r, big_r, &mut out);
        out
    }

    /// Step size keeping the velocity-Verlet energy drift below `1e-6` for
    /// the builtin systems at energy `energy`.
    pub fn recommended_dt(&self, big_r: &[f64], energy: f64) -> f64 {
        match &self.kind {
            SystemKind::Harmonic(h) => 2e-3 / h.omega.iter().fold(0.0_f64, |a, &w| a.max(w)),
            SystemKind::QuarticCoupled(q) => {
                // curvature bound over the sublevel box: |d2V| <= (2R + 3 beta) r_max^2
                let r_max2 = (4.0 * energy.max(1e-12) / q.beta).sqrt();
                let m = self.mass.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                let omega = ((2.0 * big_r[0] + 3.0 * q.beta) * r_max2 / m).sqrt();
                2e-3 / omega.max(1.0)
            }
            SystemKind::Separable(_) => 1e-3,
        }
    }
}

/// Scalar phase-space function.
#[derive(Clone)]
pub struct Observable {
    pub name: String,
    f: Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.name)
    }
}

impl Observable {
    pub fn from_fn<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&PhasePoint) -> f64 + Send + Sync + 'static,
    {
        Observable { name: name.into(), f: Arc::new(f) }
    }

    pub fn constant(c: f64) -> Self {
        Self::from_fn(format!("constant({c})"), move |_| c)
    }

    pub fn position(k: usize) -> Self {
        Self::from_fn(format!("r{k}"), move |z| z.r[k])
    }

    pub fn momentum(k: usize) -> Self {
        Self::from_fn(format!("p{k}"), move |z| z.p[k])
    }

    /// `exp(-|z - z0|^2 / 2 sigma^2)` over positions and momenta.
    pub fn gaussian_window(center: PhasePoint, sigma: f64) -> Self {
        let inv = 1.0 / (2.0 * sigma * sigma);
        Self::from_fn(format!("window(sigma={sigma})"), move |z| {
            let d2: f64 = z
                .r
                .iter()
                .zip(&center.r)
                .chain(z.p.iter().zip(&center.p))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            (-d2 * inv).exp()
        })
    }

    /// `dh/dR_i` at the fixed parameter point `big_r`.
    pub fn parameter_force(sys: &ClassicalFastSystem, big_r: &[f64], i: usize) -> Self {
        let sys = sys.clone();
        let big_r = big_r.to_vec();
        Self::from_fn(format!("dh/dR{i}"), move |z| sys.parameter_force(z, &big_r)[i])
    }

    /// Time derivative of `dh/dR_i` along the flow, `{dh/dR_i, h}`. The
    /// position derivatives use Richardson-corrected central differences.
    pub fn parameter_force_rate(sys: &ClassicalFastSystem, big_r: &[f64], i: usize) -> Self {
        let sys = sys.clone();
        let big_r = big_r.to_vec();
        Self::from_fn(format!("d/dt dh/dR{i}"), move |z| {
            let pot = sys.potential();
            let mut buf = vec![0.0; sys.param_dim()];
            let mut at = |r: &[f64]| {
                pot.parameter_gradient(r, &big_r, &mut buf);
                buf[i]
            };
            let mut rate = 0.0;
            let mut r = z.r.clone();
            for k in 0..r.len() {
                let x = r[k];
                let h = 1e-3 * x.abs().max(1.0);
                let mut diff = |step: f64| {
                    r[k] = x + step;
                    let up = at(&r);
                    r[k] = x - step;
                    let down = at(&r);
                    r[k] = x;
                    (up - down) / (2.0 * step)
                };
                let d = (4.0 * diff(h) - diff(2.0 * h)) / 3.0;
                rate += d * z.p[k] / sys.mass[k];
            }
            rate
        })
    }

    pub fn eval(&self, z: &PhasePoint) -> f64 {
        (self.f)(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_check(pot: &dyn Potential, r: &[f64], big_r: &[f64]) {
        let h = 1e-6;
        let mut g = vec![0.0; r.len()];
        pot.gradient(r, big_r, &mut g);
        for k in 0..r.len() {
            let mut rp = r.to_vec();
            let mut rm = r.to_vec();
            rp[k] += h;
            rm[k] -= h;
            let fd = (pot.value(&rp, big_r) - pot.value(&rm, big_r)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "dof {k}: {fd} vs {}", g[k]);
        }
        let mut gr = vec![0.0; big_r.len()];
        pot.parameter_gradient(r, big_r, &mut gr);
        for i in 0..big_r.len() {
            let mut rp = big_r.to_vec();
            let mut rm = big_r.to_vec();
            rp[i] += h;
            rm[i] -= h;
            let fd = (pot.value(r, &rp) - pot.value(r, &rm)) / (2.0 * h);
            assert!((fd - gr[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        fd_check(&Harmonic { mass: vec![1.5, 0.7], omega: vec![1.0, 2.2] }, &[0.3, -0.4], &[0.1, 0.2]);
        fd_check(&QuarticCoupled { beta: 0.05 }, &[0.8, -1.3], &[1.0]);
    }

    #[test]
    fn bounding_boxes_contain_the_sublevel_set() {
        let q = QuarticCoupled { beta: 0.05 };
        let b = q.bounding_box(&[1.0], 1.0).unwrap();
        let a = b[0].1;
        assert!((q.value(&[a, 0.0], &[1.0]) - 1.0).abs() < 1e-12);
        assert!(q.bounding_box(&[-1.0], 1.0).is_err());
    }

    #[test]
    fn force_rate_matches_closed_form() {
        let sys = ClassicalFastSystem::quartic_coupled(0.05).unwrap();
        let rate = Observable::parameter_force_rate(&sys, &[1.0], 0);
        let z = PhasePoint { r: vec![0.7, -1.2], p: vec![0.4, 0.9] };
        let (x, y) = (z.r[0], z.r[1]);
        let exact = 2.0 * x * y * y * z.p[0] + 2.0 * x * x * y * z.p[1];
        assert!((rate.eval(&z) - exact).abs() < 1e-9);
    }

    #[test]
    fn window_peaks_at_center() {
        let c = PhasePoint { r: vec![0.5], p: vec![-0.2] };
        let w = Observable::gaussian_window(c.clone(), 0.3);
        assert_eq!(w.eval(&c), 1.0);
        assert!(w.eval(&PhasePoint { r: vec![0.8], p: vec![-0.2] }) < 1.0);
    }
}
