//! Classical counterpart of the fast system: phase-space ensembles,
//! symplectic trajectories and the classical correlation function.

mod dynamics;
mod sampling;
mod system;

pub use dynamics::{
    classical_correlation, classical_theorem_check, envelope_decay, trajectory, ClassicalTheoremInput,
    ClassicalTheoremReport, ClassicalTrace, DRIFT_BOUND,
};
pub use sampling::{
    ensemble_average, mean_and_stderr, microcanonical_average, sample_energy_shell, sample_torus, torus_average,
    ClassicalEnsemble, EnsembleKind, Estimate, MIN_ACCEPTANCE, SHELL_WIDTH,
};
pub use system::{ClassicalFastSystem, Harmonic, Observable, PhasePoint, Potential, QuarticCoupled, SystemKind};
