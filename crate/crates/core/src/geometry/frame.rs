//! Gauge-fixed eigenframes and finite-difference derivatives of eigenvectors.
//!
//! Gauge convention: each eigenvector is rotated so that its largest-modulus
//! entry (the pivot; lowest index on ties) is real and positive. Derivatives
//! hold the pivot of the center point fixed across the stencil, which keeps
//! the gauge smooth inside the stencil even where the global pivot would
//! switch.

use crate::error::{Error, Result};
use crate::family::{GradientSet, HamiltonianFamily, ParameterPoint};
use crate::geometry::gauge::PolynomialGauge;
use crate::linalg::{hermitian_eigendecomposition, inner, CVector, EigenDecomposition, C64};

/// Levels closer than this (relative to `||h||`) are treated as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Largest-modulus entry, lowest index on ties.
pub fn pivot_index(v: &CVector) -> usize {
    let mut best = 0;
    let mut best_mod = -1.0;
    for (k, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mod {
            best = k;
            best_mod = m;
        }
    }
    best
}

/// Rotates `v` so that `v[pivot]` is real and positive.
pub fn fix_phase(v: &CVector, pivot: usize) -> CVector {
    let z = v[pivot];
    let m = z.norm();
    if m == 0.0 {
        return v.clone();
    }
    let phase = z.conj() / m;
    v.map(|x| x * phase)
}

pub(crate) fn check_level(eig: &EigenDecomposition, n: usize) -> Result<()> {
    if n >= eig.dim() {
        return Err(Error::InvalidInput(format!(
            "level {n} out of range for dimension {}",
            eig.dim()
        )));
    }
    if eig.dim() == 1 {
        return Ok(());
    }
    let gap = eig.gap(n);
    let tolerance = DEGENERACY_TOLERANCE * eig.norm();
    if gap < tolerance || gap == 0.0 {
        return Err(Error::DegenerateSpectrum { level: n, gap, tolerance });
    }
    Ok(())
}

pub(crate) fn check_all_levels(eig: &EigenDecomposition) -> Result<()> {
    (0..eig.dim()).try_for_each(|n| check_level(eig, n))
}

/// Gauge choices applied on top of the pivot convention.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct GaugeSpec<'a> {
    /// Extra smooth phase `e^{i alpha(R)}` applied to every eigenvector.
    pub alpha: Option<&'a PolynomialGauge>,
    /// Forces the pivot used for `(level, pivot)`.
    pub pivot: Option<(usize, usize)>,
}

impl GaugeSpec<'_> {
    fn phase_at(&self, r: &ParameterPoint) -> C64 {
        match self.alpha {
            Some(a) => C64::from_polar(1.0, a.value(r.coords())),
            None => C64::new(1.0, 0.0),
        }
    }
}

/// Eigendecomposition at a point together with gauge-fixed eigenvectors.
#[derive(Debug, Clone)]
pub(crate) struct Frame {
    pub eig: EigenDecomposition,
    pub states: Vec<CVector>,
    pub pivots: Vec<usize>,
}

impl Frame {
    pub fn at(family: &HamiltonianFamily, r: &ParameterPoint, gauge: GaugeSpec<'_>) -> Result<Frame> {
        let eig = hermitian_eigendecomposition(&family.evaluate(r)?);
        let phase = gauge.phase_at(r);
        let mut states = Vec::with_capacity(eig.dim());
        let mut pivots = Vec::with_capacity(eig.dim());
        for m in 0..eig.dim() {
            let v = eig.eigenvector(m);
            let p = match gauge.pivot {
                Some((level, p)) if level == m => p,
                _ => pivot_index(&v),
            };
            states.push(fix_phase(&v, p).map(|z| z * phase));
            pivots.push(p);
        }
        Ok(Frame { eig, states, pivots })
    }

    pub fn energy(&self, n: usize) -> f64 {
        self.eig.eigenvalues[n]
    }

    /// `d|m>/dR_i` for each `m` in `levels`, indexed `[axis][k]`.
    ///
    /// Central differences with one Richardson level. The step is
    /// `min(1e-3, 0.02 gap / ||dh_i||)` scaled by `max(1, |R_i|)` and floored
    /// at `1e-5`, so the stencil stays well inside the region where the
    /// labeled levels are smooth.
    pub fn derivatives(
        &self,
        family: &HamiltonianFamily,
        r: &ParameterPoint,
        levels: &[usize],
        grad: &GradientSet,
        gauge: GaugeSpec<'_>,
    ) -> Result<Vec<Vec<CVector>>> {
        let min_gap = levels
            .iter()
            .map(|&m| self.eig.gap(m))
            .fold(f64::INFINITY, f64::min);
        let mut out = Vec::with_capacity(r.dim());
        for axis in 0..r.dim() {
            let dh_norm = grad.components[axis].norm();
            let mut base = 1e-3_f64;
            if dh_norm > 0.0 && min_gap.is_finite() {
                base = base.min(0.02 * min_gap / dh_norm);
            }
            let step = base.max(1e-5) * r.coords()[axis].abs().max(1.0);
            let sample = |s: f64| -> Result<Vec<CVector>> {
                let rp = r.displaced(axis, s);
                let eig = hermitian_eigendecomposition(&family.evaluate(&rp)?);
                let phase = gauge.phase_at(&rp);
                levels
                    .iter()
                    .map(|&m| {
                        let v = eig.eigenvector(m);
                        // energy ordering must still label the same state
                        if inner(&self.states[m], &v).norm_sqr() < 0.5 {
                            return Err(Error::DegenerateSpectrum {
                                level: m,
                                gap: self.eig.gap(m),
                                tolerance: DEGENERACY_TOLERANCE * self.eig.norm(),
                            });
                        }
                        Ok(fix_phase(&v, self.pivots[m]).map(|z| z * phase))
                    })
                    .collect()
            };
            let p1 = sample(step)?;
            let m1 = sample(-step)?;
            let p2 = sample(2.0 * step)?;
            let m2 = sample(-2.0 * step)?;
            let d: Vec<CVector> = (0..levels.len())
                .map(|k| {
                    let d1 = (&p1[k] - &m1[k]) / C64::new(2.0 * step, 0.0);
                    let d2 = (&p2[k] - &m2[k]) / C64::new(4.0 * step, 0.0);
                    (d1 * C64::new(4.0, 0.0) - d2) / C64::new(3.0, 0.0)
                })
                .collect();
            out.push(d);
        }
        Ok(out)
    }
}
