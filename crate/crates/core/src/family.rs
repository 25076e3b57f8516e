//! Parameterized Hamiltonian families `h(R)` and their gradients.
//!
//! Every family is stored as a matrix polynomial
//! `h(R) = sum_t c_t(R) C_t` with monomial weights `c_t(R) = prod_i R_i^{p_ti}`
//! and Hermitian coefficient matrices `C_t`, so evaluation and analytic
//! gradients share one code path. The built-in kinds only differ in how the
//! coefficients are generated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, max_abs, CMatrix, HermitianMatrix, C64};

/// A point `R` in parameter space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterPoint(Vec<f64>);

impl ParameterPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput("parameter point must have d >= 1".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("parameter point has non-finite coordinates".into()));
        }
        Ok(ParameterPoint(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `self + step * e_axis`.
    pub fn displaced(&self, axis: usize, step: f64) -> ParameterPoint {
        let mut c = self.0.clone();
        c[axis] += step;
        ParameterPoint(c)
    }

    pub fn distance(&self, other: &ParameterPoint) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for ParameterPoint {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParameterPoint::new(v)
    }
}

impl TryFrom<&[f64]> for ParameterPoint {
    type Error = Error;
    fn try_from(v: &[f64]) -> Result<Self> {
        ParameterPoint::new(v.to_vec())
    }
}

/// One term `prod_i R_i^{powers[i]} * matrix`.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub powers: Vec<u32>,
    pub matrix: CMatrix,
}

impl Monomial {
    fn weight(&self, r: &[f64]) -> f64 {
        self.powers
            .iter()
            .zip(r)
            .map(|(&p, &x)| x.powi(p as i32))
            .product()
    }

    fn weight_derivative(&self, r: &[f64], axis: usize) -> f64 {
        let p = self.powers[axis];
        if p == 0 {
            return 0.0;
        }
        self.powers
            .iter()
            .zip(r)
            .enumerate()
            .map(|(i, (&q, &x))| {
                if i == axis {
                    p as f64 * x.powi(q as i32 - 1)
                } else {
                    x.powi(q as i32)
                }
            })
            .product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FamilyKind {
    /// `h = R . J` for spin `j`.
    Spin { spin: f64 },
    /// `h = R1 sigma_x + R2 sigma_z + delta sigma_y`.
    AvoidedCrossing { delta: f64 },
    MatrixPolynomial,
    SeededRandomPolynomial { seed: u64, degree: u32 },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Spin { .. } => "builtin-spin",
            FamilyKind::AvoidedCrossing { .. } => "builtin-avoided-crossing",
            FamilyKind::MatrixPolynomial => "matrix-polynomial",
            FamilyKind::SeededRandomPolynomial { .. } => "seeded-random-polynomial",
        }
    }
}

/// `dh/dR_i` for each parameter axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub components: Vec<CMatrix>,
}

impl GradientSet {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// `sum_i direction[i] * dh/dR_i`.
    pub fn directional(&self, direction: &[f64]) -> CMatrix {
        let dim = self.components[0].nrows();
        self.components
            .iter()
            .zip(direction)
            .fold(CMatrix::zeros(dim, dim), |acc, (g, &w)| acc + g.map(|z| z * w))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianFamily {
    dim: usize,
    param_dim: usize,
    hbar: f64,
    kind: FamilyKind,
    terms: Vec<Monomial>,
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn pauli() -> [CMatrix; 3] {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        CMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

/// Spin matrices `(J_x, J_y, J_z)` in the basis `m = j, j-1, ..., -j`.
pub fn spin_matrices(spin: f64) -> Result<[CMatrix; 3]> {
    let twice = (2.0 * spin).round();
    if spin <= 0.0 || (twice - 2.0 * spin).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!("spin must be a positive half-integer, got {spin}")));
    }
    let dim = twice as usize + 1;
    let m = |k: usize| spin - k as f64;
    let mut jz = CMatrix::zeros(dim, dim);
    let mut jp = CMatrix::zeros(dim, dim);
    for k in 0..dim {
        jz[(k, k)] = c(m(k), 0.0);
        if k > 0 {
            let mk = m(k);
            jp[(k - 1, k)] = c((spin * (spin + 1.0) - mk * (mk + 1.0)).sqrt(), 0.0);
        }
    }
    let jm = jp.adjoint();
    let jx = (&jp + &jm).map(|z| z * 0.5);
    let jy = (&jp - &jm).map(|z| z * c(0.0, -0.5));
    Ok([jx, jy, jz])
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> CMatrix {
    let mut m = CMatrix::zeros(dim, dim);
    for j in 0..dim {
        m[(j, j)] = c(scale * rng.random_range(-1.0..1.0), 0.0);
        for k in j + 1..dim {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
        }
    }
    m
}

impl HamiltonianFamily {
    /// Spin-`j` Zeeman family `h = R . J` (`j = 1/2` gives `h = R . sigma / 2`).
    pub fn spin(spin: f64) -> Result<Self> {
        let [jx, jy, jz] = spin_matrices(spin)?;
        let dim = jx.nrows();
        let terms = vec![
            Monomial { powers: vec![1, 0, 0], matrix: jx },
            Monomial { powers: vec![0, 1, 0], matrix: jy },
            Monomial { powers: vec![0, 0, 1], matrix: jz },
        ];
        Ok(HamiltonianFamily {
            dim,
            param_dim: 3,
            hbar: 1.0,
            kind: FamilyKind::Spin { spin },
            terms,
        })
    }

    pub fn spin_half() -> Self {
        Self::spin(0.5).expect("spin 1/2 is valid")
    }

    /// Two-level avoided crossing `h = R1 sigma_x + R2 sigma_z + delta sigma_y`.
    pub fn avoided_crossing(delta: f64) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::InvalidInput("delta must be finite".into()));
        }
        let [sx, sy, sz] = pauli();
        let terms = vec![
            Monomial { powers: vec![0, 0], matrix: sy.map(|z| z * delta) },
            Monomial { powers: vec![1, 0], matrix: sx },
            Monomial { powers: vec![0, 1], matrix: sz },
        ];
        Ok(HamiltonianFamily {
            dim: 2,
            param_dim: 2,
            hbar: 1.0,
            kind: FamilyKind::AvoidedCrossing { delta },
            terms,
        })
    }

    /// General matrix polynomial. Coefficients must be Hermitian within the
    /// usual relative tolerance and are symmetrized.
    pub fn matrix_polynomial(dim: usize, param_dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        if dim == 0 || param_dim == 0 {
            return Err(Error::InvalidInput("dim and param_dim must be positive".into()));
        }
        let mut checked = Vec::with_capacity(terms.len());
        for t in terms {
            if t.powers.len() != param_dim {
                return Err(Error::DimensionMismatch {
                    what: "monomial powers length",
                    expected: param_dim,
                    found: t.powers.len(),
                });
            }
            if t.matrix.nrows() != dim || t.matrix.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    what: "coefficient matrix size",
                    expected: dim,
                    found: t.matrix.nrows().max(t.matrix.ncols()),
                });
            }
            let matrix = HermitianMatrix::new(t.matrix)?.into_inner();
            checked.push(Monomial { powers: t.powers, matrix });
        }
        Ok(HamiltonianFamily {
            dim,
            param_dim,
            hbar: 1.0,
            kind: FamilyKind::MatrixPolynomial,
            terms: checked,
        })
    }

    /// Seeded random matrix polynomial of degree `<= 2`:
    /// `C_0 + sum_i R_i C_i + sum_{i<=j} R_i R_j C_ij`.
    ///
    /// `C_0` is `diag(0, 1, ..., N-1)` plus a Hermitian perturbation of scale
    /// 0.25; linear terms have scale 0.4 and quadratic terms 0.1 (entries
    /// uniform in `[-scale, scale]`, real and imaginary parts independent).
    /// For `|R_i| <= 1` this keeps spectra generic but separated.
    pub fn seeded_random_polynomial(dim: usize, param_dim: usize, degree: u32, seed: u64) -> Result<Self> {
        if dim == 0 || param_dim == 0 {
            return Err(Error::InvalidInput("dim and param_dim must be positive".into()));
        }
        if degree > 2 {
            return Err(Error::InvalidInput(format!("degree must be <= 2, got {degree}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c0 = random_hermitian(&mut rng, dim, 0.25);
        for k in 0..dim {
            c0[(k, k)] += c(k as f64, 0.0);
        }
        let mut terms = vec![Monomial { powers: vec![0; param_dim], matrix: c0 }];
        if degree >= 1 {
            for i in 0..param_dim {
                let mut powers = vec![0; param_dim];
                powers[i] = 1;
                terms.push(Monomial { powers, matrix: random_hermitian(&mut rng, dim, 0.4) });
            }
        }
        if degree >= 2 {
            for i in 0..param_dim {
                for j in i..param_dim {
                    let mut powers = vec![0; param_dim];
                    powers[i] += 1;
                    powers[j] += 1;
                    terms.push(Monomial { powers, matrix: random_hermitian(&mut rng, dim, 0.1) });
                }
            }
        }
        Ok(HamiltonianFamily {
            dim,
            param_dim,
            hbar: 1.0,
            kind: FamilyKind::SeededRandomPolynomial { seed, degree },
            terms,
        })
    }

    pub fn with_hbar(mut self, hbar: f64) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::InvalidInput(format!("hbar must be positive, got {hbar}")));
        }
        self.hbar = hbar;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn param_dim(&self) -> usize {
        self.param_dim
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn kind(&self) -> &FamilyKind {
        &self.kind
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    fn check_point(&self, r: &ParameterPoint) -> Result<()> {
        if r.dim() != self.param_dim {
            return Err(Error::DimensionMismatch {
                what: "parameter point",
                expected: self.param_dim,
                found: r.dim(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, r: &ParameterPoint) -> Result<HermitianMatrix> {
        self.check_point(r)?;
        let x = r.coords();
        let mut h = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let w = t.weight(x);
            if w != 0.0 {
                h += t.matrix.map(|z| z * w);
            }
        }
        Ok(HermitianMatrix::from_trusted(h))
    }

    /// Analytic `dh/dR_i`.
    pub fn gradient(&self, r: &ParameterPoint) -> Result<GradientSet> {
        self.check_point(r)?;
        let x = r.coords();
        let components = (0..self.param_dim)
            .map(|axis| {
                let mut g = CMatrix::zeros(self.dim, self.dim);
                for t in &self.terms {
                    let w = t.weight_derivative(x, axis);
                    if w != 0.0 {
                        g += t.matrix.map(|z| z * w);
                    }
                }
                g
            })
            .collect();
        Ok(GradientSet { components })
    }

    /// Central differences with one Richardson level, step
    /// `max(1e-5, 1e-5 |R_i|)` per axis.
    pub fn finite_difference_gradient(&self, r: &ParameterPoint) -> Result<GradientSet> {
        self.check_point(r)?;
        let mut components = Vec::with_capacity(self.param_dim);
        for axis in 0..self.param_dim {
            let step = (1e-5 * r.coords()[axis].abs()).max(1e-5);
            let central = |h: f64| -> Result<CMatrix> {
                let plus = self.evaluate(&r.displaced(axis, h))?.into_inner();
                let minus = self.evaluate(&r.displaced(axis, -h))?.into_inner();
                Ok((plus - minus).map(|z| z / (2.0 * h)))
            };
            let d1 = central(step)?;
            let d2 = central(2.0 * step)?;
            let g = (d1.map(|z| z * 4.0) - d2).map(|z| z / 3.0);
            components.push(HermitianMatrix::from_trusted(g).into_inner());
        }
        Ok(GradientSet { components })
    }

    /// Max Hermiticity defect of `h(R)` and `dh(R)` before symmetrization.
    /// Used by the sampling property checks.
    pub fn raw_hermiticity_defect(&self, r: &ParameterPoint) -> Result<f64> {
        self.check_point(r)?;
        let x = r.coords();
        let mut h = CMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            h += t.matrix.map(|z| z * t.weight(x));
        }
        let scale = max_abs(&h).max(1.0);
        let mut defect = hermiticity_defect(&h) / scale;
        for axis in 0..self.param_dim {
            let mut g = CMatrix::zeros(self.dim, self.dim);
            for t in &self.terms {
                g += t.matrix.map(|z| z * t.weight_derivative(x, axis));
            }
            defect = defect.max(hermiticity_defect(&g) / max_abs(&g).max(1.0));
        }
        Ok(defect)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigendecomposition;

    fn pt(v: &[f64]) -> ParameterPoint {
        ParameterPoint::new(v.to_vec()).unwrap()
    }

    #[test]
    fn spin_half_at_north_pole() {
        let f = HamiltonianFamily::spin_half();
        let h = f.evaluate(&pt(&[0.0, 0.0, 1.0])).unwrap();
        assert_eq!(h.matrix()[(0, 0)], c(0.5, 0.0));
        assert_eq!(h.matrix()[(1, 1)], c(-0.5, 0.0));
        assert_eq!(h.matrix()[(0, 1)], c(0.0, 0.0));
    }

    #[test]
    fn spin_gradient_is_half_pauli() {
        let f = HamiltonianFamily::spin_half();
        let g = f.gradient(&pt(&[0.3, -1.2, 4.0])).unwrap();
        let s = pauli();
        for i in 0..3 {
            assert_eq!(g.components[i], s[i].map(|z| z * 0.5));
        }
    }

    #[test]
    fn spin_matrices_commutator() {
        for j in [0.5, 1.0, 1.5, 2.0] {
            let [jx, jy, jz] = spin_matrices(j).unwrap();
            let comm = &jx * &jy - &jy * &jx;
            let target = jz.map(|z| z * c(0.0, 1.0));
            assert!(max_abs(&(comm - target)) < 1e-12);
            let casimir = &jx * &jx + &jy * &jy + &jz * &jz;
            let dim = jx.nrows();
            assert!(max_abs(&(casimir - CMatrix::identity(dim, dim).map(|z| z * j * (j + 1.0)))) < 1e-12);
        }
        assert!(spin_matrices(0.3).is_err());
    }

    #[test]
    fn polynomial_at_zero_and_squared_term() {
        let c0 = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.5), c(0.0, -0.5), c(-1.0, 0.0)]);
        let c1 = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]);
        let lin = HamiltonianFamily::matrix_polynomial(
            2,
            1,
            vec![
                Monomial { powers: vec![0], matrix: c0.clone() },
                Monomial { powers: vec![1], matrix: c1.clone() },
            ],
        )
        .unwrap();
        assert_eq!(lin.evaluate(&pt(&[0.0])).unwrap().into_inner(), c0);

        let sq = HamiltonianFamily::matrix_polynomial(
            2,
            1,
            vec![
                Monomial { powers: vec![0], matrix: c0 },
                Monomial { powers: vec![2], matrix: c1.clone() },
            ],
        )
        .unwrap();
        let g = sq.gradient(&pt(&[3.0])).unwrap();
        assert_eq!(g.components[0], c1.map(|z| z * 6.0));
    }

    #[test]
    fn dimension_mismatch() {
        let f = HamiltonianFamily::spin_half();
        assert!(matches!(f.evaluate(&pt(&[1.0, 2.0])), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(f.gradient(&pt(&[1.0])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_non_hermitian_coefficients() {
        let bad = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let r = HamiltonianFamily::matrix_polynomial(2, 1, vec![Monomial { powers: vec![1], matrix: bad }]);
        assert!(matches!(r, Err(Error::NonHermitianInput { .. })));
    }

    #[test]
    fn seeded_random_is_deterministic() {
        let a = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 42).unwrap();
        let b = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 42).unwrap();
        let r = pt(&[0.2, -0.7, 0.9]);
        assert_eq!(a.evaluate(&r).unwrap(), b.evaluate(&r).unwrap());
        let other = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 43).unwrap();
        assert_ne!(a.evaluate(&r).unwrap(), other.evaluate(&r).unwrap());
    }

    #[test]
    fn spin_spectrum_is_half_norm() {
        let f = HamiltonianFamily::spin_half();
        for r in [[0.3_f64, -0.4, 1.2], [2.0, 0.0, 0.0], [-0.1, 0.05, -0.2]] {
            let norm = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
            let e = hermitian_eigendecomposition(&f.evaluate(&pt(&r)).unwrap());
            assert!((e.eigenvalues[0] + norm / 2.0).abs() < 1e-10);
            assert!((e.eigenvalues[1] - norm / 2.0).abs() < 1e-10);
        }
    }

    #[test]
    fn hbar_validation() {
        assert!(HamiltonianFamily::spin_half().with_hbar(0.0).is_err());
        assert_eq!(HamiltonianFamily::spin_half().with_hbar(2.0).unwrap().hbar(), 2.0);
    }
}
