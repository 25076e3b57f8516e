use super::*;
use crate::family::Monomial;
use crate::geometry::{metric_and_geometric_tensor, TensorRoute};
use crate::linalg::{hermitian_eigendecomposition, hermiticity_defect, identity, max_abs, HermitianMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(v: &[f64]) -> ParameterPoint {
    ParameterPoint::new(v.to_vec()).unwrap()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn random_pair(rng: &mut ChaCha8Rng, d: usize) -> (ParameterPoint, ParameterPoint) {
    let mut draw = || pt(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<_>>());
    (draw(), draw())
}

fn half_sigma_z() -> EigenDecomposition {
    let h = CMatrix::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.5, 0.0)]);
    hermitian_eigendecomposition(&HermitianMatrix::new(h).unwrap())
}

#[test]
fn heisenberg_examples() {
    let eig = half_sigma_z();
    let sx = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
    assert_eq!(heisenberg_operator(&eig, &sx, 0.0, 1.0), sx);

    let sz = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)]);
    for t in [0.3, -7.0, 120.0] {
        assert!(max_abs(&(heisenberg_operator(&eig, &sz, t, 1.0) - &sz)) < 1e-12);
    }

    // off-diagonal phases e^{+-i pi}
    let rotated = heisenberg_operator(&eig, &sx, std::f64::consts::PI, 1.0);
    assert!(max_abs(&(rotated + &sx)) < 1e-12);
}

#[test]
fn evolution_preserves_hermiticity_and_unitarity() {
    let fam = HamiltonianFamily::seeded_random_polynomial(6, 2, 2, 3).unwrap();
    let r = pt(&[0.4, -0.3]);
    let eig = hermitian_eigendecomposition(&fam.evaluate(&r).unwrap());
    let f = &fam.gradient(&r).unwrap().components[0];
    for t in [-1000.0, -1.0, 0.5, 999.0] {
        assert!(hermiticity_defect(&heisenberg_operator(&eig, f, t, 1.0)) < 1e-10);
        let u = eig.apply(|e| C64::from_polar(1.0, -e * t));
        assert!(max_abs(&(&u * u.adjoint() - identity(6))) < 1e-10);
    }
}

#[test]
fn q_vanishes_at_base_point_and_time_zero() {
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 1).unwrap();
    let r = pt(&[0.2, 0.3, -0.1]);
    let times: Vec<f64> = (0..40).map(|k| k as f64 * 0.7).collect();
    for form in [QForm::Heisenberg, QForm::Spectral] {
        let same = q_correlation(&fam, &r, &r, 0, &times, form).unwrap();
        assert!(same.q.iter().flatten().all(|x| x.abs() < 1e-10), "{form:?}");
        let other = q_correlation(&fam, &r, &pt(&[-0.5, 0.1, 0.6]), 2, &[0.0, 1.0], form).unwrap();
        for qi in &other.q {
            assert!(qi[0].abs() < 1e-12);
        }
    }
}

#[test]
fn heisenberg_and_spectral_forms_agree() {
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 77).unwrap();
    let times: Vec<f64> = (0..100).map(|k| 50.0 * k as f64 / 99.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 0..5 {
        let (r, r0) = random_pair(&mut rng, 3);
        let h = q_correlation(&fam, &r, &r0, n, &times, QForm::Heisenberg).unwrap();
        let s = q_correlation(&fam, &r, &r0, n, &times, QForm::Spectral).unwrap();
        assert!(h.max_imaginary_residue < IMAGINARY_TOLERANCE);
        for i in 0..3 {
            for k in 0..times.len() {
                assert!((h.q[i][k] - s.q[i][k]).abs() <= 1e-10);
                assert!((h.c_ab[i][k] - s.c_ab[i][k]).abs() <= 1e-10);
                assert!((h.c_ba[i][k] - s.c_ba[i][k]).abs() <= 1e-10);
                assert!((s.q[i][k] - (s.c_ab[i][k] - s.c_ba[i][k])).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn q_series_is_odd() {
    let fam = HamiltonianFamily::seeded_random_polynomial(4, 2, 2, 9).unwrap();
    let data = SpectralData::new(&fam, &pt(&[0.3, 0.1]), &pt(&[-0.2, 0.4]), 1).unwrap();
    for i in 0..2 {
        let q = data.q_modes(i);
        assert_eq!(q.constant, 0.0);
        assert!(q.modes.iter().all(|m| m.cos == 0.0));
        for t in [0.4, 3.0, 17.0] {
            assert!((q.eval(-t) + q.eval(t)).abs() < 1e-14);
        }
    }
}

#[test]
fn quadrature_agrees_with_mode_sum_on_seeded_family() {
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 12).unwrap();
    let data = SpectralData::new(&fam, &pt(&[0.5, -0.4, 0.2]), &pt(&[0.1, 0.2, -0.3]), 0).unwrap();
    let series: Vec<CorrelationModes> = (0..3).map(|i| data.q_modes(i)).collect();
    let exact = regularized_time_integral(&series, 0.05, IntegralMethod::ModeSum).unwrap();
    let quad = regularized_time_integral(&series, 0.05, IntegralMethod::Quadrature).unwrap();
    for (e, q) in exact.iter().zip(&quad) {
        assert!((e.value - q.value).abs() <= 1e-6 * e.value.abs(), "{e:?} {q:?}");
        assert!((e.value - q.value).abs() <= q.error_estimate);
    }
    assert!(regularized_time_integral(&series, 0.0, IntegralMethod::ModeSum).is_err());
}

#[test]
fn theorem_holds_at_base_point() {
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 2).unwrap();
    let r = pt(&[0.1, 0.7, -0.3]);
    let rep = theorem_check(&fam, &r, &r, 1, &[0.2, 0.1]).unwrap();
    for i in 0..3 {
        assert!(rep.lhs[i].abs() < 1e-10 && rep.rhs[i].abs() < 1e-10);
    }
}

#[test]
fn theorem_on_seeded_family() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 6).unwrap();
    let mut trials = 0;
    while trials < 20 {
        let (r, r0) = random_pair(&mut rng, 3);
        let n = trials % 5;
        let rep = match theorem_check(&fam, &r, &r0, n, &[0.2, 0.1, 0.05]) {
            Ok(rep) => rep,
            Err(Error::ReferenceOverlapVanishing { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        trials += 1;
        assert!(rep.max_active_residual() <= 1e-8, "{rep:?}");
        for check in &rep.quadrature {
            for i in 0..3 {
                assert!((check.quadrature[i] - check.mode_sum[i]).abs() <= check.error_estimate[i]);
            }
        }
        for i in 0..3 {
            assert!((rep.extrapolated[i] - rep.lhs[i]).abs() <= 10.0 * rep.extrapolation_error[i] + 1e-9);
        }
    }
}

#[test]
fn theorem_on_spin_family() {
    let fam = HamiltonianFamily::spin_half();
    let r0 = pt(&[0.0, 0.0, 1.0]);
    let r = pt(&[0.5f64.sin(), 0.0, 0.5f64.cos()]);
    let rep = theorem_check(&fam, &r, &r0, 0, &[0.2, 0.1, 0.05]).unwrap();
    assert!(rep.residuals.iter().all(|&x| x <= 1e-8), "{rep:?}");
}

#[test]
fn theorem_scales_with_hbar() {
    let fam = HamiltonianFamily::seeded_random_polynomial(4, 2, 2, 8).unwrap().with_hbar(0.37).unwrap();
    let rep = theorem_check(&fam, &pt(&[0.3, -0.6]), &pt(&[-0.1, 0.2]), 0, &[0.2]).unwrap();
    assert!(rep.max_active_residual() <= 1e-8);
    let chi = susceptibility(&fam, &pt(&[0.3, -0.6]), &pt(&[-0.1, 0.2]), 0, &[0.1]).unwrap();
    assert!(chi.residuals.iter().all(|&x| x <= 1e-8));
}

#[test]
fn theorem_rejects_bad_input() {
    let fam = HamiltonianFamily::spin_half();
    let north = pt(&[0.0, 0.0, 1.0]);
    let south = pt(&[0.0, 0.0, -1.0]);
    assert!(matches!(theorem_check(&fam, &south, &north, 0, &[0.1]), Err(Error::ReferenceOverlapVanishing { .. })));
    assert!(matches!(theorem_check(&fam, &north, &north, 0, &[0.1, 0.2]), Err(Error::InvalidInput(_))));
    assert!(matches!(
        theorem_check(&fam, &pt(&[0.0, 0.0, 0.0]), &north, 0, &[0.1]),
        Err(Error::DegenerateSpectrum { .. })
    ));
}

#[test]
fn susceptibility_examples() {
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 19).unwrap();
    let r = pt(&[0.3, 0.3, 0.3]);
    let same = susceptibility(&fam, &r, &r, 0, &[1.0, 0.1]).unwrap();
    assert!(same.extrapolated_difference.iter().all(|x| x.abs() < 1e-10));

    let r0 = pt(&[-0.2, 0.4, 0.0]);
    let rep = susceptibility(&fam, &r, &r0, 0, &[1.0, 0.1, 0.01]).unwrap();
    let theorem = theorem_check(&fam, &r, &r0, 0, &[0.1]).unwrap();
    let data = SpectralData::new(&fam, &r, &r0, 0).unwrap();
    for i in 0..3 {
        assert!(rep.residuals[i] <= 1e-8);
        // lim [chi_AB - chi_BA] is the regularized integral of Q
        let q_integral = data.q_modes(i).laplace_limit();
        assert!((rep.extrapolated_difference[i] - q_integral).abs() < 1e-12);
        assert!((q_integral + 2.0 * theorem.rhs[i]).abs() < 1e-8);
        // finite-z difference approaches the limit
        let diff = |k: usize| (rep.chi_ab[i][k] - rep.chi_ba[i][k]).re;
        assert!((diff(2) - q_integral).abs() < (diff(0) - q_integral).abs() + 1e-15);
        assert!(rep.chi_ab[i].iter().all(|z| z.im == 0.0));
    }
}

#[test]
fn single_mode_susceptibility() {
    let m = CorrelationModes { constant: 0.0, modes: vec![Mode { frequency: 1.0, cos: 1.0, sin: 0.0 }] };
    // z / (z^2 + w^2) at z = w = 1
    assert_eq!(laplace_complex(&m, C64::new(1.0, 0.0)), C64::new(0.5, 0.0));
    let m = CorrelationModes { constant: 0.0, modes: vec![Mode { frequency: 1.0, cos: 0.0, sin: 1.0 }] };
    assert_eq!(laplace_complex(&m, C64::new(1.0, 0.0)), C64::new(0.5, 0.0));
}

#[test]
fn force_metric_examples() {
    let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.0), c(0.2, 0.0), c(-1.0, 0.0)]);
    let constant = HamiltonianFamily::matrix_polynomial(2, 2, vec![Monomial { powers: vec![0, 0], matrix: m }]).unwrap();
    let g = gii_from_force_correlation(&constant, &pt(&[0.5, 0.5]), 0, 0.1).unwrap();
    assert!(g.iter().all(|x| x.limit == 0.0 && x.at_s == 0.0));

    let fam = HamiltonianFamily::spin_half();
    let theta: f64 = 1.0;
    let r = pt(&[theta.sin(), 0.0, theta.cos()]);
    let g = force_metric_along(&fam, &r, 0, 1e-3, &[theta.cos(), 0.0, -theta.sin()]).unwrap();
    assert!((g.limit - 0.25).abs() < 1e-8);
    assert!((g.at_s - 0.25).abs() < 1e-5);

    let fam = HamiltonianFamily::seeded_random_polynomial(5, 3, 2, 31).unwrap();
    let r = pt(&[-0.3, 0.8, 0.1]);
    for n in 0..5 {
        let g = gii_from_force_correlation(&fam, &r, n, 0.05).unwrap();
        let t = metric_and_geometric_tensor(&fam, &r, n, TensorRoute::Derivative).unwrap();
        for i in 0..3 {
            assert!((g[i].limit - t.g[(i, i)]).abs() < 1e-8, "{} {}", g[i].limit, t.g[(i, i)]);
        }
    }
}
