//! Dense complex linear algebra for small Hermitian matrices.
//!
//! The eigensolver is nalgebra's Householder tridiagonalization followed by
//! implicit symmetric QR. On top of it this module fixes the ordering
//! (ascending, stable on ties), validates Hermiticity, and provides spectral
//! functions `f(M) = sum_k f(l_k) |v_k><v_k|`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative tolerance used when validating Hermitian input.
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;

/// Largest entry modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `max |M_jk - conj(M_kj)|`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut defect = 0.0_f64;
    for j in 0..n {
        for k in j..n {
            defect = defect.max((m[(j, k)] - m[(k, j)].conj()).norm());
        }
    }
    defect
}

/// `<a|b>`, antilinear in the first argument.
pub fn inner(a: &CVector, b: &CVector) -> C64 {
    a.dotc(b)
}

/// `<a|M|b>`.
pub fn sandwich(a: &CVector, m: &CMatrix, b: &CVector) -> C64 {
    a.dotc(&(m * b))
}

/// Outer product `|a><b|`.
pub fn outer(a: &CVector, b: &CVector) -> CMatrix {
    a * b.adjoint()
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// A square matrix that passed the Hermiticity check and was then
/// symmetrized to `(M + M^dagger)/2`, so downstream code sees exactly
/// Hermitian data.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "square matrix columns",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidInput("empty matrix".into()));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let defect = hermiticity_defect(&m);
        let tolerance = HERMITICITY_TOLERANCE * max_abs(&m);
        if defect > tolerance {
            return Err(Error::NonHermitianInput { defect, tolerance });
        }
        let sym = (&m + m.adjoint()).map(|z| z * 0.5);
        Ok(HermitianMatrix(sym))
    }

    /// Wraps a matrix that is Hermitian by construction (sums of Hermitian
    /// terms with real weights). Still symmetrized.
    pub(crate) fn from_trusted(m: CMatrix) -> Self {
        let sym = (&m + m.adjoint()).map(|z| z * 0.5);
        HermitianMatrix(sym)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }
}

impl AsRef<CMatrix> for HermitianMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors stored as
/// the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> CVector {
        self.eigenvectors.column(k).into_owned()
    }

    /// `max |l_k|`, the spectral norm of the decomposed matrix.
    pub fn norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()))
    }

    /// Smallest distance from level `n` to any other level.
    pub fn gap(&self, n: usize) -> f64 {
        self.eigenvalues
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != n)
            .map(|(_, &e)| (e - self.eigenvalues[n]).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// `sum_k f(l_k) |v_k><v_k|`.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> CMatrix {
        let v = &self.eigenvectors;
        let mut scaled = v.clone();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            let fk = f(l);
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= fk);
        }
        scaled * v.adjoint()
    }

    /// `V^dagger O V`: matrix elements of `O` between eigenvectors.
    pub fn to_eigenbasis(&self, o: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * o * &self.eigenvectors
    }

    /// `V O V^dagger`.
    pub fn from_eigenbasis(&self, o: &CMatrix) -> CMatrix {
        &self.eigenvectors * o * self.eigenvectors.adjoint()
    }
}

pub fn hermitian_eigendecomposition(m: &HermitianMatrix) -> EigenDecomposition {
    let eig = m.matrix().clone().symmetric_eigen();
    let n = m.dim();
    let mut order: Vec<usize> = (0..n).collect();
    // sort_by is stable, so equal eigenvalues keep the solver's order.
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    EigenDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// `f(M)` through the eigendecomposition of `M`.
pub fn spectral_function<F: Fn(f64) -> C64>(m: &HermitianMatrix, f: F) -> CMatrix {
    hermitian_eigendecomposition(m).apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_hermitian(dim: usize, seed: u64) -> HermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = CMatrix::zeros(dim, dim);
        for j in 0..dim {
            m[(j, j)] = c(rng.random_range(-1.0..1.0), 0.0);
            for k in j + 1..dim {
                let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                m[(j, k)] = z;
                m[(k, j)] = z.conj();
            }
        }
        HermitianMatrix::new(m).unwrap()
    }

    fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
        max_abs(&(a - b))
    }

    #[test]
    fn diagonal_matrix_is_sorted() {
        let m = CMatrix::from_diagonal(&CVector::from_vec(vec![c(2.0, 0.0), c(1.0, 0.0)]));
        let e = hermitian_eigendecomposition(&HermitianMatrix::new(m).unwrap());
        assert_eq!(e.eigenvalues, vec![1.0, 2.0]);
        // eigenvectors are e2, e1 up to phase
        assert!((e.eigenvectors[(1, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((e.eigenvectors[(0, 1)].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn half_sigma_z() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        let e = hermitian_eigendecomposition(&HermitianMatrix::new(m).unwrap());
        assert_eq!(e.eigenvalues, vec![-0.5, 0.5]);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            HermitianMatrix::new(m),
            Err(Error::NonHermitianInput { .. })
        ));
        let m = CMatrix::from_row_slice(2, 3, &[c(1.0, 0.0); 6]);
        assert!(matches!(HermitianMatrix::new(m), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn symmetrizes_small_defects() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 1e-14), c(0.5, 0.0), c(0.5, 0.0), c(1.0, 0.0)]);
        let h = HermitianMatrix::new(m).unwrap();
        assert_eq!(hermiticity_defect(h.matrix()), 0.0);
        assert_eq!(h.matrix()[(0, 0)].im, 0.0);
    }

    #[test]
    fn residuals_and_orthonormality() {
        for (dim, seed) in [(6, 1), (3, 2), (16, 3), (1, 4)] {
            let h = random_hermitian(dim, seed);
            let e = hermitian_eigendecomposition(&h);
            let norm = e.norm();
            for k in 0..dim {
                let v = e.eigenvector(k);
                let r = h.matrix() * &v - v.map(|z| z * e.eigenvalues[k]);
                assert!(r.norm() <= 1e-10 * norm, "residual {}", r.norm());
                for j in 0..dim {
                    let d = inner(&e.eigenvector(j), &v) - if j == k { 1.0 } else { 0.0 };
                    assert!(d.norm() <= 1e-10);
                }
            }
            assert!(e.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
            let rebuilt = e.apply(|l| c(l, 0.0));
            assert!(max_abs_diff(&rebuilt, h.matrix()) <= 1e-10 * norm);
        }
    }

    #[test]
    fn spectral_function_examples() {
        let d = CMatrix::from_diagonal(&CVector::from_vec(vec![c(1.0, 0.0), c(2.0, 0.0)]));
        let hd = HermitianMatrix::new(d.clone()).unwrap();
        assert!(max_abs_diff(&spectral_function(&hd, |l| c(l, 0.0)), &d) < 1e-15);

        let h = random_hermitian(5, 9);
        let u0 = spectral_function(&h, |l| (C64::i() * 0.0 * l).exp());
        assert!(max_abs_diff(&u0, &identity(5)) < 1e-14);

        // e^{i sigma_z / 2} closed form
        let sz = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
        let u = spectral_function(&HermitianMatrix::new(sz).unwrap(), |l| (C64::i() * l).exp());
        assert!((u[(0, 0)] - c(0.5f64.cos(), 0.5f64.sin())).norm() < 1e-15);
        assert!((u[(1, 1)] - c(0.5f64.cos(), -(0.5f64.sin()))).norm() < 1e-15);
        assert!(u[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn evolution_is_unitary() {
        let h = random_hermitian(8, 21);
        for &t in &[-1000.0, -3.7, 0.0, 12.5, 1000.0] {
            let u = spectral_function(&h, |l| (-C64::i() * l * t).exp());
            let defect = max_abs_diff(&(&u * u.adjoint()), &identity(8));
            assert!(defect <= 1e-10, "t = {t}: {defect}");
        }
    }

    #[test]
    fn deterministic_bits() {
        let h = random_hermitian(7, 5);
        assert_eq!(hermitian_eigendecomposition(&h), hermitian_eigendecomposition(&h));
    }

    #[test]
    fn inner_is_antilinear_in_first_slot() {
        let a = CVector::from_vec(vec![c(0.0, 1.0), c(0.0, 0.0)]);
        let b = CVector::from_vec(vec![c(1.0, 0.0), c(0.0, 0.0)]);
        assert_eq!(inner(&a, &b), c(0.0, -1.0));
    }
}
