//! Geometric quantities at a single parameter point: labeled eigenstates,
//! the reference eigenstate, Berry connection `A`, the generator operators
//! `B_i`, fluctuation data, the generalized potential `Omega = A - P` by three
//! independent routes, and the quantum geometric tensor by two routes.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::family::{GradientSet, HamiltonianFamily, ParameterPoint};
use crate::geometry::frame::{check_all_levels, check_level, Frame, GaugeSpec};
use crate::linalg::{inner, sandwich, CMatrix, CVector, C64};

/// Reference overlaps `|<n(R0)|n(R)>|` below this make the open-path phase
/// undefined.
pub const OVERLAP_TOLERANCE: f64 = 1e-6;

/// Fluctuations `Delta B_i` at or below this have no well-defined
/// perpendicular state.
pub const FLUCTUATION_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEigenpair {
    pub label: usize,
    pub energy: f64,
    pub state: CVector,
}

pub fn eigen_at(family: &HamiltonianFamily, r: &ParameterPoint, n: usize) -> Result<LabeledEigenpair> {
    let frame = Frame::at(family, r, GaugeSpec::default())?;
    check_level(&frame.eig, n)?;
    Ok(LabeledEigenpair {
        label: n,
        energy: frame.energy(n),
        state: frame.states[n].clone(),
    })
}

/// `|chi_n(R)> = (<n(R)|n(R0)> / |<n(R)|n(R0)>|) |n(R)>`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceEigenstate {
    pub base_point: ParameterPoint,
    pub state: CVector,
    /// `<n(R)|n(R0)>` in the fixed gauge.
    pub overlap: C64,
}

/// Rephases `state` against `reference`; independent of the phase of `state`.
pub fn rephase_against(state: &CVector, reference: &CVector) -> Result<CVector> {
    let c = inner(state, reference);
    let m = c.norm();
    if m <= OVERLAP_TOLERANCE {
        return Err(Error::ReferenceOverlapVanishing { overlap: m, arc_length: 0.0 });
    }
    let phase = c / m;
    Ok(state.map(|z| z * phase))
}

pub fn reference_state(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
) -> Result<ReferenceEigenstate> {
    let here = eigen_at(family, r, n)?;
    let base = eigen_at(family, r0, n)?;
    let state = rephase_against(&here.state, &base.state)?;
    Ok(ReferenceEigenstate {
        base_point: r0.clone(),
        overlap: inner(&here.state, &base.state),
        state,
    })
}

/// Everything derived from one eigenframe plus finite-difference derivatives
/// of selected levels.
pub(crate) struct LocalGeometry {
    pub frame: Frame,
    pub grad: GradientSet,
    pub n: usize,
    /// `d|m>/dR_i` as `[axis][m]` when all levels were differentiated,
    /// otherwise `[axis][0]` holds `d|n>/dR_i`.
    derivs: Vec<Vec<CVector>>,
    all_levels: bool,
}

impl LocalGeometry {
    pub fn new(
        family: &HamiltonianFamily,
        r: &ParameterPoint,
        n: usize,
        all_levels: bool,
        gauge: GaugeSpec<'_>,
    ) -> Result<Self> {
        let frame = Frame::at(family, r, gauge)?;
        if all_levels {
            check_all_levels(&frame.eig)?;
        } else {
            check_level(&frame.eig, n)?;
        }
        let grad = family.gradient(r)?;
        let levels: Vec<usize> = if all_levels { (0..frame.eig.dim()).collect() } else { vec![n] };
        let derivs = frame.derivatives(family, r, &levels, &grad, gauge)?;
        Ok(LocalGeometry { frame, grad, n, derivs, all_levels })
    }

    pub fn state(&self) -> &CVector {
        &self.frame.states[self.n]
    }

    pub fn dn(&self, axis: usize) -> &CVector {
        if self.all_levels {
            &self.derivs[axis][self.n]
        } else {
            &self.derivs[axis][0]
        }
    }

    pub fn param_dim(&self) -> usize {
        self.grad.components.len()
    }

    /// `A_i = i<n|d_i n> = -Im <n|d_i n>`.
    pub fn connection(&self) -> Vec<f64> {
        (0..self.param_dim())
            .map(|i| -inner(self.state(), self.dn(i)).im)
            .collect()
    }

    /// `B_i = -i sum_m |d_i m><m|`; needs all levels.
    pub fn b_operators(&self) -> Vec<CMatrix> {
        assert!(self.all_levels, "B operators need derivatives of every level");
        let dim = self.frame.eig.dim();
        let minus_i = C64::new(0.0, -1.0);
        (0..self.param_dim())
            .map(|axis| {
                let mut b = CMatrix::zeros(dim, dim);
                for m in 0..dim {
                    b += &self.derivs[axis][m] * self.frame.states[m].adjoint();
                }
                b.map(|z| z * minus_i)
            })
            .collect()
    }

    /// `P_i = Im(<d_i n|n0> / <n|n0>)`.
    pub fn p_potential(&self, n0: &CVector) -> Vec<f64> {
        let c = inner(self.state(), n0);
        (0..self.param_dim())
            .map(|i| (inner(self.dn(i), n0) / c).im)
            .collect()
    }

    /// `Omega_i |<n|n0>|^2 = Im sum_{m != n} <n|n0><n0|m><m|dh_i|n> / (e_n - e_m)`.
    pub fn sum_over_states_numerator(&self, n0: &CVector) -> Vec<f64> {
        let eig = &self.frame.eig;
        let n = self.n;
        let vn = eig.eigenvector(n);
        let c = inner(&vn, n0);
        (0..self.param_dim())
            .map(|axis| {
                let dh_n = &self.grad.components[axis] * &vn;
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..eig.dim() {
                    if m == n {
                        continue;
                    }
                    let vm = eig.eigenvector(m);
                    let term = c * inner(n0, &vm) * inner(&vm, &dh_n);
                    acc += term / (eig.eigenvalues[n] - eig.eigenvalues[m]);
                }
                acc.im
            })
            .collect()
    }

    /// `T_ij = sum_{m != n} <n|dh_i|m><m|dh_j|n> / (e_n - e_m)^2`.
    pub fn tensor_from_states(&self) -> DMatrix<C64> {
        let eig = &self.frame.eig;
        let n = self.n;
        let d = self.param_dim();
        let vn = eig.eigenvector(n);
        // elements[i][m] = <m|dh_i|n>
        let elements: Vec<Vec<C64>> = (0..d)
            .map(|i| {
                let dh_n = &self.grad.components[i] * &vn;
                (0..eig.dim()).map(|m| inner(&eig.eigenvector(m), &dh_n)).collect()
            })
            .collect();
        DMatrix::from_fn(d, d, |i, j| {
            let mut acc = C64::new(0.0, 0.0);
            for m in 0..eig.dim() {
                if m == n {
                    continue;
                }
                let w = eig.eigenvalues[n] - eig.eigenvalues[m];
                acc += elements[i][m].conj() * elements[j][m] / (w * w);
            }
            acc
        })
    }

    /// `T_ij = <d_i n|d_j n> - <d_i n|n><n|d_j n>` from the finite differences.
    pub fn tensor_from_derivatives(&self) -> DMatrix<C64> {
        let d = self.param_dim();
        let n = self.state();
        DMatrix::from_fn(d, d, |i, j| {
            inner(self.dn(i), self.dn(j)) - inner(self.dn(i), n) * inner(n, self.dn(j))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationData {
    pub b_ops: Vec<CMatrix>,
    pub delta_b: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `<n(R0)|n(R)>`.
    pub overlap: C64,
    pub perp_states: Vec<Option<CVector>>,
}

/// Uncertainty decomposition `B_i|n> = <B_i>|n> + Delta B_i |n_perp^(i)>`
/// per component, with `lambda_i = Re(<n0|n_perp^(i)><n|n0>)`.
///
/// `Delta B_i` is computed as `||(B_i - <B_i>)|n>||`, which equals
/// `sqrt(<B_i^2> - <B_i>^2)` for Hermitian `B_i` without the cancellation.
pub(crate) fn fluctuations(
    b_ops: &[CMatrix],
    n: &CVector,
    n0: &CVector,
) -> (Vec<f64>, Vec<f64>, Vec<Option<CVector>>) {
    let c = inner(n, n0);
    let mut delta = Vec::with_capacity(b_ops.len());
    let mut lambda = Vec::with_capacity(b_ops.len());
    let mut perp = Vec::with_capacity(b_ops.len());
    for b in b_ops {
        let bn = b * n;
        let mean = inner(n, &bn).re;
        let w = &bn - n.map(|z| z * mean);
        let db = w.norm();
        delta.push(db);
        if db > FLUCTUATION_FLOOR {
            let p = w / C64::new(db, 0.0);
            lambda.push((inner(n0, &p) * c).re);
            perp.push(Some(p));
        } else {
            lambda.push(0.0);
            perp.push(None);
        }
    }
    (delta, lambda, perp)
}

pub fn berry_connection(family: &HamiltonianFamily, r: &ParameterPoint, n: usize) -> Result<Vec<f64>> {
    Ok(LocalGeometry::new(family, r, n, false, GaugeSpec::default())?.connection())
}

/// `B_i = -i (d_i U) U^dagger` with `U(R) = sum_m |m(R)><m(R_ref)|`.
///
/// The reference basis cancels in the product, so `r_ref` only has to be a
/// valid point of the family.
pub fn b_operator(family: &HamiltonianFamily, r: &ParameterPoint, r_ref: &ParameterPoint) -> Result<Vec<CMatrix>> {
    family.evaluate(r_ref)?;
    Ok(LocalGeometry::new(family, r, 0, true, GaugeSpec::default())?.b_operators())
}

fn reference_vector(family: &HamiltonianFamily, r0: &ParameterPoint, n: usize, gauge: GaugeSpec<'_>) -> Result<CVector> {
    let frame = Frame::at(family, r0, GaugeSpec { alpha: gauge.alpha, pivot: None })?;
    check_level(&frame.eig, n)?;
    Ok(frame.states[n].clone())
}

fn check_overlap(c: C64) -> Result<()> {
    if c.norm() <= OVERLAP_TOLERANCE {
        return Err(Error::ReferenceOverlapVanishing { overlap: c.norm(), arc_length: 0.0 });
    }
    Ok(())
}

pub fn fluctuation_data(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
) -> Result<FluctuationData> {
    let n0 = reference_vector(family, r0, n, GaugeSpec::default())?;
    let geo = LocalGeometry::new(family, r, n, true, GaugeSpec::default())?;
    let overlap = inner(&n0, geo.state());
    check_overlap(overlap)?;
    let b_ops = geo.b_operators();
    let (delta_b, lambda, perp_states) = fluctuations(&b_ops, geo.state(), &n0);
    Ok(FluctuationData { b_ops, delta_b, lambda, overlap, perp_states })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OmegaRoute {
    /// `Omega = A - P` from finite-difference derivatives of `|n>`.
    AP,
    /// `Omega_i = lambda_i Delta B_i / |<n0|n>|^2`.
    Fluctuation,
    /// Energy-denominator sum over the other levels.
    SumOverStates,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaugePotentials {
    pub a: Vec<f64>,
    pub p: Vec<f64>,
    pub omega: Vec<f64>,
    /// Components where the fluctuation route had `Delta B_i` at the floor
    /// and fell back to the sum-over-states value.
    pub fallback_components: Vec<usize>,
}

/// `Omega` for one route given the reference vector; also returns `|<n|n0>|`.
pub(crate) fn omega_from(
    geo: &LocalGeometry,
    n0: &CVector,
    route: OmegaRoute,
) -> (Vec<f64>, Vec<usize>) {
    let c2 = inner(geo.state(), n0).norm_sqr();
    match route {
        OmegaRoute::AP => {
            let a = geo.connection();
            let p = geo.p_potential(n0);
            (a.iter().zip(&p).map(|(a, p)| a - p).collect(), Vec::new())
        }
        OmegaRoute::SumOverStates => (
            geo.sum_over_states_numerator(n0).into_iter().map(|x| x / c2).collect(),
            Vec::new(),
        ),
        OmegaRoute::Fluctuation => {
            let b = geo.b_operators();
            let (delta, lambda, perp) = fluctuations(&b, geo.state(), n0);
            let mut fallback = Vec::new();
            let mut sos: Option<Vec<f64>> = None;
            let omega = (0..delta.len())
                .map(|i| {
                    if perp[i].is_some() {
                        lambda[i] * delta[i] / c2
                    } else {
                        fallback.push(i);
                        let s = sos.get_or_insert_with(|| geo.sum_over_states_numerator(n0));
                        s[i] / c2
                    }
                })
                .collect();
            (omega, fallback)
        }
    }
}

pub(crate) fn potentials_in_gauge(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    route: OmegaRoute,
    gauge: GaugeSpec<'_>,
) -> Result<GaugePotentials> {
    let n0 = reference_vector(family, r0, n, gauge)?;
    let all = matches!(route, OmegaRoute::Fluctuation);
    let geo = LocalGeometry::new(family, r, n, all, gauge)?;
    check_overlap(inner(geo.state(), &n0))?;
    let a = geo.connection();
    let (omega, fallback_components) = match route {
        OmegaRoute::AP => {
            let p = geo.p_potential(&n0);
            let omega = a.iter().zip(&p).map(|(a, p)| a - p).collect();
            return Ok(GaugePotentials { a, p, omega, fallback_components: Vec::new() });
        }
        _ => omega_from(&geo, &n0, route),
    };
    let p = a.iter().zip(&omega).map(|(a, o)| a - o).collect();
    Ok(GaugePotentials { a, p, omega, fallback_components })
}

/// `A_n`, `P_n` and `Omega_n = A_n - P_n` at `R` relative to the base point
/// `R0`. `A` and `P` are convention dependent (fixed pivot gauge); `Omega`
/// is gauge invariant and agrees across routes.
pub fn gauge_potentials(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    r0: &ParameterPoint,
    n: usize,
    route: OmegaRoute,
) -> Result<GaugePotentials> {
    potentials_in_gauge(family, r, r0, n, route, GaugeSpec::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TensorRoute {
    Derivative,
    ForceStates,
}

/// `T_ij = g_ij + i v_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricTensor {
    pub g: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl GeometricTensor {
    fn from_complex(t: &DMatrix<C64>) -> Self {
        let d = t.nrows();
        // Hermitian part only; the antihermitian residue is discretization noise.
        let g = DMatrix::from_fn(d, d, |i, j| 0.5 * (t[(i, j)].re + t[(j, i)].re));
        let v = DMatrix::from_fn(d, d, |i, j| 0.5 * (t[(i, j)].im - t[(j, i)].im));
        GeometricTensor { g, v }
    }

    pub fn min_metric_eigenvalue(&self) -> f64 {
        self.g
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// `J^T T J` for a change of coordinates with Jacobian `J = dR/dq`.
    pub fn pullback(&self, jacobian: &DMatrix<f64>) -> GeometricTensor {
        GeometricTensor {
            g: jacobian.transpose() * &self.g * jacobian,
            v: jacobian.transpose() * &self.v * jacobian,
        }
    }
}

pub fn metric_and_geometric_tensor(
    family: &HamiltonianFamily,
    r: &ParameterPoint,
    n: usize,
    route: TensorRoute,
) -> Result<GeometricTensor> {
    match route {
        TensorRoute::Derivative => {
            let geo = LocalGeometry::new(family, r, n, false, GaugeSpec::default())?;
            Ok(GeometricTensor::from_complex(&geo.tensor_from_derivatives()))
        }
        TensorRoute::ForceStates => {
            let frame = Frame::at(family, r, GaugeSpec::default())?;
            check_level(&frame.eig, n)?;
            let grad = family.gradient(r)?;
            let geo = LocalGeometry::states_only(frame, grad, n);
            Ok(GeometricTensor::from_complex(&geo.tensor_from_states()))
        }
    }
}

impl LocalGeometry {
    /// Frame and gradient without finite differences; only the sum-over-states
    /// methods may be used on the result.
    pub(crate) fn states_only(frame: Frame, grad: GradientSet, n: usize) -> Self {
        LocalGeometry { frame, grad, n, derivs: Vec::new(), all_levels: false }
    }
}

/// `<n|O|n>` helper for tests and reports.
pub fn expectation(state: &CVector, op: &CMatrix) -> C64 {
    sandwich(state, op, state)
}
