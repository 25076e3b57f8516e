//! Invariants checked over randomly drawn families, points and gauges.

use geomflux::classical::{sample_energy_shell, ClassicalFastSystem};
use geomflux::correlation::{q_correlation, QForm, SpectralData};
use geomflux::geometry::{
    fluctuation_data, gauge_potentials, gauge_transform_check, metric_and_geometric_tensor, wrap_phase, OmegaRoute,
    PolynomialGauge, TensorRoute,
};
use geomflux::par::Execution;
use geomflux::{Error, HamiltonianFamily, ParameterPoint};
use proptest::prelude::*;

fn point(c: Vec<f64>) -> ParameterPoint {
    ParameterPoint::new(c).unwrap()
}

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.6..0.6f64, dim)
}

/// Skips draws that land on a near-degeneracy or a vanishing overlap; those
/// are reported as errors by design and covered elsewhere.
fn usable<T>(r: geomflux::Result<T>) -> Option<T> {
    match r {
        Ok(v) => Some(v),
        Err(Error::DegenerateSpectrum { .. }) | Err(Error::ReferenceOverlapVanishing { .. }) => None,
        Err(e) => panic!("unexpected error: {e}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn evaluated_matrices_are_hermitian(seed in 0u64..1000, r in coords(3)) {
        let fam = HamiltonianFamily::seeded_random_polynomial(4, 3, 2, seed).unwrap();
        let h = fam.evaluate(&point(r)).unwrap();
        let m = h.matrix();
        prop_assert_eq!(m.clone(), m.adjoint());
    }

    #[test]
    fn seeded_families_are_reproducible(seed in 0u64..1000) {
        let a = HamiltonianFamily::seeded_random_polynomial(3, 2, 2, seed).unwrap();
        let b = HamiltonianFamily::seeded_random_polynomial(3, 2, 2, seed).unwrap();
        prop_assert_eq!(a.terms(), b.terms());
    }

    #[test]
    fn wrapped_phase_is_in_range_and_congruent(x in -100.0..100.0f64) {
        let w = wrap_phase(x);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let k = (x - w) / std::f64::consts::TAU;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn omega_is_gauge_invariant(seed in 0u64..500, gauge_seed in 0u64..500, r in coords(2)) {
        let fam = HamiltonianFamily::seeded_random_polynomial(4, 2, 2, seed).unwrap();
        let gauge = PolynomialGauge::random_cubic(2, gauge_seed);
        if let Some(rep) = usable(gauge_transform_check(&fam, &point(r), &point(vec![0.0, 0.0]), 0, &gauge)) {
            prop_assert!(rep.omega_deviation <= 1e-9, "{:?}", rep);
            prop_assert!(rep.a_deviation <= 1e-6 && rep.p_deviation <= 1e-6, "{:?}", rep);
        }
    }

    #[test]
    fn omega_routes_agree(seed in 0u64..500, r in coords(2), r0 in coords(2)) {
        let fam = HamiltonianFamily::seeded_random_polynomial(4, 2, 2, seed).unwrap();
        let (r, r0) = (point(r), point(r0));
        let routes = [OmegaRoute::AP, OmegaRoute::Fluctuation, OmegaRoute::SumOverStates];
        let values: Option<Vec<_>> = routes.iter().map(|&rt| usable(gauge_potentials(&fam, &r, &r0, 0, rt))).collect();
        let overlap = usable(fluctuation_data(&fam, &r, &r0, 0)).map(|f| f.overlap.norm());
        if let (Some(values), Some(overlap)) = (values, overlap) {
            if overlap > 1e-3 {
                for v in &values[1..] {
                    for (a, b) in values[0].omega.iter().zip(&v.omega) {
                        prop_assert!((a - b).abs() <= 1e-7, "{a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn fluctuation_squared_is_metric_diagonal(seed in 0u64..500, r in coords(2), r0 in coords(2)) {
        let fam = HamiltonianFamily::seeded_random_polynomial(3, 2, 2, seed).unwrap();
        let (r, r0) = (point(r), point(r0));
        if let (Some(f), Some(t)) = (
            usable(fluctuation_data(&fam, &r, &r0, 0)),
            usable(metric_and_geometric_tensor(&fam, &r, 0, TensorRoute::ForceStates)),
        ) {
            for i in 0..2 {
                prop_assert!((f.delta_b[i].powi(2) - t.g[(i, i)]).abs() <= 1e-8);
            }
            prop_assert!(t.min_metric_eigenvalue() >= -1e-12);
        }
    }

    #[test]
    fn q_is_odd_and_vanishes_at_zero(seed in 0u64..500, r in coords(2), t in 0.0..40.0f64) {
        let fam = HamiltonianFamily::seeded_random_polynomial(3, 2, 2, seed).unwrap();
        if let Some(data) = usable(SpectralData::new(&fam, &point(r), &point(vec![0.0, 0.0]), 0)) {
            for i in 0..data.components() {
                let q = data.q_modes(i);
                prop_assert_eq!(q.eval(0.0), 0.0);
                prop_assert!((q.eval(t) + q.eval(-t)).abs() <= 1e-14 * (1.0 + q.eval(t).abs()));
            }
        }
    }

    #[test]
    fn spectral_and_heisenberg_forms_agree(seed in 0u64..200, r in coords(2)) {
        let fam = HamiltonianFamily::seeded_random_polynomial(3, 2, 2, seed).unwrap();
        let times: Vec<f64> = (0..10).map(|k| 1.7 * k as f64).collect();
        let (r, r0) = (point(r), point(vec![0.1, -0.1]));
        if let (Some(a), Some(b)) = (
            usable(q_correlation(&fam, &r, &r0, 0, &times, QForm::Spectral)),
            usable(q_correlation(&fam, &r, &r0, 0, &times, QForm::Heisenberg)),
        ) {
            for (x, y) in a.q.iter().flatten().zip(b.q.iter().flatten()) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn shell_ensembles_are_seed_deterministic(seed in 0u64..1_000_000, energy in 0.2..3.0f64) {
        let sys = ClassicalFastSystem::quartic_coupled(0.05).unwrap();
        let a = sample_energy_shell(&sys, &[1.0], energy, 50, seed, Execution::Sequential).unwrap();
        let b = sample_energy_shell(&sys, &[1.0], energy, 50, seed, Execution::default()).unwrap();
        prop_assert_eq!(&a.samples, &b.samples);
        for z in &a.samples {
            let e = sys.energy(z, &[1.0]);
            prop_assert!((e - energy).abs() <= 1e-3 * energy + 1e-12);
        }
    }
}
