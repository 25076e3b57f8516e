//! Adiabatic geometry of a family's eigenstates: Berry connection, the
//! reference eigenstate and generalized potential `Omega = A - P`, the
//! generator operators `B_i` and their fluctuations, the quantum geometric
//! tensor, and open-path / cyclic geometric phases.

pub mod frame;
pub mod gauge;
pub mod path;
pub mod point;


pub use frame::{fix_phase, pivot_index, DEGENERACY_TOLERANCE};
pub use gauge::{gauge_transform_check, GaugeCheckReport, PolynomialGauge};
pub use path::{
    cyclic_berry_phase, cyclic_berry_phase_with, open_path_phase, open_path_phase_with, wrap_phase, CyclicPhase,
    ParameterPath, PathPhase, PhaseOptions, PhaseRoute,
};
pub use point::{
    b_operator, berry_connection, eigen_at, expectation, fluctuation_data, gauge_potentials,
    metric_and_geometric_tensor, reference_state, rephase_against, FluctuationData, GaugePotentials,
    GeometricTensor, LabeledEigenpair, OmegaRoute, ReferenceEigenstate, TensorRoute, FLUCTUATION_FLOOR,
    OVERLAP_TOLERANCE,
};
