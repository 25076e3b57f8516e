//! Time-domain view at a fixed parameter point: Heisenberg evolution,
//! the projector/force correlation function `Q(t)`, its regularized integral,
//! susceptibilities, and the force-force form of the metric diagonal.
//!
//! With `A = P_n(R0) = |n(R0)><n(R0)|`, `B_i = dh/dR_i` and
//! `O_t = e^{iht/hbar} O e^{-iht/hbar}`:
//!
//! ```text
//! C_AB(t) = 1/2 <n|A_{-t} B + B A_{-t}|n>
//! C_BA(t) = 1/2 <n|A B_t + B_t A|n>
//! Q(t)    = C_AB(-t) - C_BA(t) = -2 Im sum_m sin(w_nm t) <n|A P_m B|n>
//! ```
//!
//! where `w_nm = (e_n - e_m) / hbar`.

mod modes;

pub use modes::{extrapolate_to_zero, CorrelationModes, IntegralEstimate, Mode, TAIL_FRACTION};

use crate::error::{Error, Result};
use crate::family::{HamiltonianFamily, ParameterPoint};
use crate::geometry::frame::{check_level, Frame, GaugeSpec};
use crate::geometry::{fluctuation_data, OVERLAP_TOLERANCE};
use crate::linalg::{inner, sandwich, CMatrix, CVector, EigenDecomposition, C64};
use crate::par::{self, Execution};

/// Imaginary parts of real-valued correlators above this are reported.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// Components with `Delta B_i` at or below this are not checked by the theorem.
pub const ACTIVE_FLUCTUATION: f64 = 1e-8;

/// `(O_t)_{jk} = e^{i(e_j - e_k)t/hbar} O_{jk}` in the eigenbasis.
pub fn heisenberg_operator(eig: &EigenDecomposition, o: &CMatrix, t: f64, hbar: f64) -> CMatrix {
    if t == 0.0 {
        return o.clone();
    }
    let mut m = eig.to_eigenbasis(o);
    let e = &eig.eigenvalues;
    for j in 0..m.nrows() {
        for k in 0..m.ncols() {
            m[(j, k)] *= C64::from_polar(1.0, (e[j] - e[k]) * t / hbar);
        }
    }
    eig.from_eigenbasis(&m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QForm {
    Heisenberg,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IntegralMethod {
    ModeSum,
    Quadrature,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub level: usize,
    pub point: ParameterPoint,
    pub base_point: ParameterPoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationTrace {
    pub times: Vec<f64>,
    /// `q[i][k] = Q_i(times[k])`.
    pub q: Vec<Vec<f64>>,
    /// `C_AB(-t)`, so that `q = c_ab - c_ba` pointwise.
    pub c_ab: Vec<Vec<f64>>,
    /// `C_BA(t)`.
    pub c_ba: Vec<Vec<f64>>,
    /// Largest discarded imaginary part.
    pub max_imaginary_residue: f64,
    pub meta: TraceMeta,
}

/// Spectral data of one level at `R` relative to `R0`.
///
/// `x[i][m] = <n|n0><n0|m><m|dh_i|n>`; gauge invariant in every eigenvector.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub level: usize,
    pub hbar: f64,
    pub eig: EigenDecomposition,
    pub x: Vec<Vec<C64>>,
    /// `|<n(R0)|n(R)>|`.
    pub overlap: f64,
    reference: CVector,
    forces: Vec<CMatrix>,
}

impl SpectralData {
    pub fn new(family: &HamiltonianFamily, r: &ParameterPoint, r0: &ParameterPoint, n: usize) -> Result<Self> {
        let frame = Frame::at(family, r, GaugeSpec::default())?;
        check_level(&frame.eig, n)?;
        let base = Frame::at(family, r0, GaugeSpec::default())?;
        check_level(&base.eig, n)?;
        let n0 = base.eig.eigenvector(n);
        let forces = family.gradient(r)?.components;
        let eig = frame.eig;
        let vn = eig.eigenvector(n);
        let c = inner(&vn, &n0);
        let x = forces
            .iter()
            .map(|f| {
                let fn_ = f * &vn;
                (0..eig.dim())
                    .map(|m| {
                        let vm = eig.eigenvector(m);
                        c * inner(&n0, &vm) * inner(&vm, &fn_)
                    })
                    .collect()
            })
            .collect();
        Ok(SpectralData {
            level: n,
            hbar: family.hbar(),
            overlap: c.norm(),
            eig,
            x,
            reference: n0,
            forces,
        })
    }

    pub fn components(&self) -> usize {
        self.x.len()
    }

    fn frequency(&self, m: usize) -> f64 {
        (self.eig.eigenvalues[self.level] - self.eig.eigenvalues[m]) / self.hbar
    }

    /// `Q_i` as a pure sine series.
    pub fn q_modes(&self, i: usize) -> CorrelationModes {
        let modes = (0..self.eig.dim())
            .filter(|&m| m != self.level)
            .map(|m| Mode { frequency: self.frequency(m), cos: 0.0, sin: -2.0 * self.x[i][m].im })
            .collect();
        CorrelationModes { constant: 0.0, modes }
    }

    /// `C_AB(-t)` for component `i`.
    pub fn c_ab_modes(&self, i: usize) -> CorrelationModes {
        self.symmetrized(i, -1.0)
    }

    /// `C_BA(t)` for component `i`.
    pub fn c_ba_modes(&self, i: usize) -> CorrelationModes {
        self.symmetrized(i, 1.0)
    }

    fn symmetrized(&self, i: usize, sign: f64) -> CorrelationModes {
        let n = self.level;
        let modes = (0..self.eig.dim())
            .filter(|&m| m != n)
            .map(|m| Mode { frequency: self.frequency(m), cos: self.x[i][m].re, sin: sign * self.x[i][m].im })
            .collect();
        CorrelationModes { constant: self.x[i][n].re, modes }
    }

    /// `1/2 <n|A_t B + B A_t - A B_t - B_t A|n>` and the two symmetrized parts.
    fn heisenberg_at(&self, i: usize, t: f64) -> (C64, C64) {
        let vn = self.eig.eigenvector(self.level);
        let a = &self.reference * self.reference.adjoint();
        let b = &self.forces[i];
        let a_t = heisenberg_operator(&self.eig, &a, t, self.hbar);
        let b_t = heisenberg_operator(&self.eig, b, t, self.hbar);
        let half = C64::new(0.5, 0.0);
        let c_ab = (sandwich(&vn, &(&a_t * b), &vn) + sandwich(&vn, &(b * &a_t), &vn)) * half;
        let c_ba = (sandwich(&vn, &(&a * &b_t), &vn) + sandwich(&vn, &(&b_t * &a), &vn)) * half;
        (c_ab, c_ba)
    }
}

pub fn q_correlation(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    times: &[f64],
    form: QForm,
) -> Result<CorrelationTrace> {
    q_correlation_with(family, r, r0, n, times, form, Execution::default())
}

pub fn q_correlation_with(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    times: &[f64],
    form: QForm,
    execution: Execution,
) -> Result<CorrelationTrace> {
    if times.is_empty() {
        return Err(Error::InvalidInput("at least one time is required".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite time {t}")));
    }
    let data = SpectralData::new(family, r, r0, n)?;
    let d = data.components();
    let mut q = Vec::with_capacity(d);
    let mut c_ab = Vec::with_capacity(d);
    let mut c_ba = Vec::with_capacity(d);
    let mut residue = 0.0_f64;
    for i in 0..d {
        match form {
            QForm::Spectral => {
                let (qm, am, bm) = (data.q_modes(i), data.c_ab_modes(i), data.c_ba_modes(i));
                q.push(par::map(execution, times, |&t| qm.eval(t)));
                c_ab.push(par::map(execution, times, |&t| am.eval(t)));
                c_ba.push(par::map(execution, times, |&t| bm.eval(t)));
            }
            QForm::Heisenberg => {
                let values = par::map(execution, times, |&t| data.heisenberg_at(i, t));
                for (a, b) in &values {
                    residue = residue.max(a.im.abs()).max(b.im.abs());
                }
                c_ab.push(values.iter().map(|(a, _)| a.re).collect());
                c_ba.push(values.iter().map(|(_, b)| b.re).collect());
                q.push(values.iter().map(|(a, b)| (a - b).re).collect());
            }
        }
    }
    Ok(CorrelationTrace {
        times: times.to_vec(),
        q,
        c_ab,
        c_ba,
        max_imaginary_residue: residue,
        meta: TraceMeta { level: n, point: r.clone(), base_point: r0.clone() },
    })
}

/// Regularized `int_0^inf e^{-st} f(t) dt` for each series.
pub fn regularized_time_integral(series: &[CorrelationModes], s: f64, method: IntegralMethod) -> Result<Vec<IntegralEstimate>> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidInput(format!("s must be positive, got {s}")));
    }
    Ok(series
        .iter()
        .map(|m| match method {
            IntegralMethod::ModeSum => IntegralEstimate { value: m.laplace(s), error_estimate: 0.0 },
            IntegralMethod::Quadrature => m.laplace_quadrature(s),
        })
        .collect())
}

/// Quadrature cross-check of the theorem's left side at one `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureCheck {
    pub s: f64,
    /// `-(1/2 hbar) int e^{-st} Q_i` by quadrature.
    pub quadrature: Vec<f64>,
    /// Same quantity by mode sum.
    pub mode_sum: Vec<f64>,
    pub error_estimate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    /// `-(1/2 hbar) lim_{s->0} int e^{-st} Q_i dt`.
    pub lhs: Vec<f64>,
    /// `lambda_i Delta B_i`.
    pub rhs: Vec<f64>,
    pub residuals: Vec<f64>,
    pub method: IntegralMethod,
    pub s_values: Vec<f64>,
    pub quadrature: Vec<QuadratureCheck>,
    /// Quadrature values extrapolated to `s = 0` in `s^2`.
    pub extrapolated: Vec<f64>,
    pub extrapolation_error: Vec<f64>,
    pub delta_b: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Components with `Delta B_i > 1e-8`.
    pub active: Vec<bool>,
}

impl TheoremReport {
    pub fn max_active_residual(&self) -> f64 {
        self.residuals
            .iter()
            .zip(&self.active)
            .filter(|(_, &a)| a)
            .fold(0.0, |m, (r, _)| m.max(*r))
    }
}

fn check_s_sequence(s_values: &[f64]) -> Result<()> {
    if s_values.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
        return Err(Error::InvalidInput("s values must be positive".into()));
    }
    if s_values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("s values must be strictly descending".into()));
    }
    Ok(())
}

fn spectral_with_overlap(family: &HamiltonianFamily, r: &ParameterPoint, r0: &ParameterPoint, n: usize) -> Result<SpectralData> {
    let data = SpectralData::new(family, r, r0, n)?;
    if data.overlap <= OVERLAP_TOLERANCE {
        return Err(Error::ReferenceOverlapVanishing { overlap: data.overlap, arc_length: 0.0 });
    }
    Ok(data)
}

/// `-(1/2 hbar) int_0^inf Q_i dt = lambda_i Delta B_i`.
///
/// The left side is the exact `s -> 0` mode sum; `s_values` (descending)
/// drive the quadrature cross-check. The right side comes from the
/// generator fluctuations, computed from eigenvector derivatives.
pub fn theorem_check(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    s_values: &[f64],
) -> Result<TheoremReport> {
    check_s_sequence(s_values)?;
    let data = spectral_with_overlap(family, r, r0, n)?;
    let fluct = fluctuation_data(family, r, r0, n)?;
    let d = data.components();
    let scale = -1.0 / (2.0 * data.hbar);
    let series: Vec<CorrelationModes> = (0..d).map(|i| data.q_modes(i)).collect();
    let lhs: Vec<f64> = series.iter().map(|m| scale * m.laplace_limit()).collect();
    let rhs: Vec<f64> = (0..d).map(|i| fluct.lambda[i] * fluct.delta_b[i]).collect();
    let residuals = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).collect();

    let quadrature: Vec<QuadratureCheck> = s_values
        .iter()
        .map(|&s| {
            let q: Vec<IntegralEstimate> = series.iter().map(|m| m.laplace_quadrature(s)).collect();
            QuadratureCheck {
                s,
                quadrature: q.iter().map(|e| scale * e.value).collect(),
                mode_sum: series.iter().map(|m| scale * m.laplace(s)).collect(),
                error_estimate: q.iter().map(|e| scale.abs() * e.error_estimate).collect(),
            }
        })
        .collect();
    let mut extrapolated = Vec::with_capacity(d);
    let mut extrapolation_error = Vec::with_capacity(d);
    for i in 0..d {
        if quadrature.is_empty() {
            extrapolated.push(f64::NAN);
            extrapolation_error.push(f64::NAN);
            continue;
        }
        let values: Vec<f64> = quadrature.iter().map(|c| c.quadrature[i]).collect();
        let (v, e) = extrapolate_to_zero(s_values, &values);
        extrapolated.push(v);
        extrapolation_error.push(e);
    }
    Ok(TheoremReport {
        lhs,
        rhs,
        residuals,
        method: IntegralMethod::ModeSum,
        s_values: s_values.to_vec(),
        quadrature,
        extrapolated,
        extrapolation_error,
        active: fluct.delta_b.iter().map(|&x| x > ACTIVE_FLUCTUATION).collect(),
        delta_b: fluct.delta_b,
        lambda: fluct.lambda,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SusceptibilityReport {
    pub z_values: Vec<f64>,
    /// `chi_ab[i][k]`: Laplace transform of `C_AB(-t)` at `z_values[k]`.
    pub chi_ab: Vec<Vec<C64>>,
    /// Laplace transform of `C_BA(t)`.
    pub chi_ba: Vec<Vec<C64>>,
    /// `lim_{z->0} [chi_AB - chi_BA]`, exact.
    pub extrapolated_difference: Vec<f64>,
    /// `-2 hbar lambda_i Delta B_i` from the fluctuation data.
    pub fluctuation_value: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// Laplace transform of a series at complex `z` with `Re z > 0`.
fn laplace_complex(m: &CorrelationModes, z: C64) -> C64 {
    let mut acc = C64::new(m.constant, 0.0) / z;
    for mode in &m.modes {
        let w = mode.frequency;
        acc += (z * mode.cos + mode.sin * w) / (z * z + w * w);
    }
    acc
}

pub fn susceptibility(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    z_values: &[f64],
) -> Result<SusceptibilityReport> {
    if z_values.iter().any(|z| !(z.is_finite() && *z > 0.0)) {
        return Err(Error::InvalidInput("z values must be positive".into()));
    }
    let data = spectral_with_overlap(family, r, r0, n)?;
    let fluct = fluctuation_data(family, r, r0, n)?;
    let d = data.components();
    let mut chi_ab = Vec::with_capacity(d);
    let mut chi_ba = Vec::with_capacity(d);
    let mut diff = Vec::with_capacity(d);
    for i in 0..d {
        let (ab, ba) = (data.c_ab_modes(i), data.c_ba_modes(i));
        chi_ab.push(z_values.iter().map(|&z| laplace_complex(&ab, C64::new(z, 0.0))).collect());
        chi_ba.push(z_values.iter().map(|&z| laplace_complex(&ba, C64::new(z, 0.0))).collect());
        // the constant terms are equal and cancel; cosine parts vanish at z = 0
        let limit: f64 = ab
            .modes
            .iter()
            .zip(&ba.modes)
            .map(|(a, b)| (a.sin - b.sin) / a.frequency)
            .sum();
        diff.push(limit);
    }
    let fluctuation_value: Vec<f64> = (0..d)
        .map(|i| -2.0 * data.hbar * fluct.lambda[i] * fluct.delta_b[i])
        .collect();
    let residuals = diff.iter().zip(&fluctuation_value).map(|(a, b)| (a - b).abs()).collect();
    Ok(SusceptibilityReport {
        z_values: z_values.to_vec(),
        chi_ab,
        chi_ba,
        extrapolated_difference: diff,
        fluctuation_value,
        residuals,
    })
}

/// Force-force form of a metric diagonal element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceMetric {
    /// Value with the convergence factor `e^{-st}` kept.
    pub at_s: f64,
    /// Exact `s -> 0` limit.
    pub limit: f64,
}

/// `-(1/2 hbar^2) int_0^inf t e^{-st} <n|{(dh)_t, dh}|n>_c dt` with `dh` the
/// derivative along `direction` and connected (mean-subtracted) correlators.
pub fn force_metric_along(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    n: usize,
    s: f64,
    direction: &[f64],
) -> Result<ForceMetric> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidInput(format!("s must be positive, got {s}")));
    }
    if direction.len() != family.param_dim() {
        return Err(Error::DimensionMismatch { what: "direction", expected: family.param_dim(), found: direction.len() });
    }
    let frame = Frame::at(family, r, GaugeSpec::default())?;
    check_level(&frame.eig, n)?;
    let f = family.gradient(r)?.directional(direction);
    Ok(force_metric_from(&frame.eig, &f, n, family.hbar(), s))
}

fn force_metric_from(eig: &EigenDecomposition, f: &CMatrix, n: usize, hbar: f64, s: f64) -> ForceMetric {
    let vn = eig.eigenvector(n);
    let fn_ = f * &vn;
    let mut at_s = 0.0;
    let mut limit = 0.0;
    for m in 0..eig.dim() {
        if m == n {
            continue;
        }
        let w = (eig.eigenvalues[n] - eig.eigenvalues[m]) / hbar;
        let weight = inner(&eig.eigenvector(m), &fn_).norm_sqr();
        // <{F_t, F}>_c = 2 sum |F_mn|^2 cos(w t); int t e^{-st} cos(wt) = (s^2 - w^2)/(s^2 + w^2)^2
        let kernel = (s * s - w * w) / (s * s + w * w).powi(2);
        at_s += -weight * kernel / (hbar * hbar);
        limit += weight / (w * w * hbar * hbar);
    }
    ForceMetric { at_s, limit }
}

/// `g_ii` for every coordinate axis from the force-force correlation.
pub fn gii_from_force_correlation(family: &HamiltonianFamily, r: &ParameterPoint, n: usize, s: f64) -> Result<Vec<ForceMetric>> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidInput(format!("s must be positive, got {s}")));
    }
    let frame = Frame::at(family, r, GaugeSpec::default())?;
    check_level(&frame.eig, n)?;
    let grad = family.gradient(r)?;
    Ok(grad
        .components
        .iter()
        .map(|f| force_metric_from(&frame.eig, f, n, family.hbar(), s))
        .collect())
}

#[cfg(test)]
mod tests;
