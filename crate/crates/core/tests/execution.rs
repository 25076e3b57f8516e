//! Sequential and parallel sweeps must give bitwise-identical results.
#![cfg(feature = "parallel")]

use geomflux::classical::{classical_correlation, sample_energy_shell, ClassicalFastSystem, Observable};
use geomflux::correlation::{q_correlation_with, QForm};
use geomflux::geometry::{cyclic_berry_phase_with, open_path_phase_with, ParameterPath, PhaseOptions, PhaseRoute};
use geomflux::par::Execution;
use geomflux::{HamiltonianFamily, ParameterPoint};

fn options(execution: Execution) -> PhaseOptions {
    PhaseOptions { execution, gauge: None }
}

#[test]
fn path_phases() {
    let fam = HamiltonianFamily::seeded_random_polynomial(4, 2, 2, 17).unwrap();
    let path = ParameterPath::circle(&[0.1, 0.0], &[0.3, 0.0], &[0.0, 0.3], (0.0, 1.0), 257).unwrap();
    let seq = cyclic_berry_phase_with(&fam, &path, 0, &options(Execution::Sequential)).unwrap();
    let par = cyclic_berry_phase_with(&fam, &path, 0, &options(Execution::Parallel)).unwrap();
    assert_eq!(seq, par);
    for route in PhaseRoute::ALL {
        let seq = open_path_phase_with(&fam, &path, 0, route, &options(Execution::Sequential)).unwrap();
        let par = open_path_phase_with(&fam, &path, 0, route, &options(Execution::Parallel)).unwrap();
        assert_eq!(seq, par, "{}", route.name());
    }
}

#[test]
fn correlation_traces() {
    let fam = HamiltonianFamily::seeded_random_polynomial(5, 2, 2, 3).unwrap();
    let r = ParameterPoint::new(vec![0.2, -0.3]).unwrap();
    let r0 = ParameterPoint::new(vec![0.0, 0.0]).unwrap();
    let times: Vec<f64> = (0..64).map(|k| 0.5 * k as f64).collect();
    for form in [QForm::Spectral, QForm::Heisenberg] {
        let seq = q_correlation_with(&fam, &r, &r0, 1, &times, form, Execution::Sequential).unwrap();
        let par = q_correlation_with(&fam, &r, &r0, 1, &times, form, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }
}

#[test]
fn classical_traces() {
    let sys = ClassicalFastSystem::quartic_coupled(0.05).unwrap();
    let seq_ens = sample_energy_shell(&sys, &[1.0], 1.0, 64, 5, Execution::Sequential).unwrap();
    let par_ens = sample_energy_shell(&sys, &[1.0], 1.0, 64, 5, Execution::Parallel).unwrap();
    assert_eq!(seq_ens.samples, par_ens.samples);
    let a = Observable::gaussian_window(seq_ens.samples[0].clone(), 0.5);
    let b = Observable::parameter_force(&sys, &[1.0], 0);
    let times: Vec<f64> = (0..=20).map(|k| 0.25 * k as f64).collect();
    let dt = sys.recommended_dt(&[1.0], 1.0);
    let seq = classical_correlation(&sys, &seq_ens, &a, std::slice::from_ref(&b), &times, dt, Execution::Sequential).unwrap();
    let par = classical_correlation(&sys, &par_ens, &a, &[b], &times, dt, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
}
