//! Simulator for teleportation of a photon's polarization using a
//! path-entangled photon pair, together with the classical
//! measure-and-resend bound it has to beat.
//!
//! - [`qstate`]: labeled multi-mode pure states, unitaries and measurement.
//! - [`optics`]: Jones matrices and mode-level optical elements.
//! - [`teleport`]: the protocol itself, from EPR source to Bob's analyzer.
//! - [`classical`]: classical strategies, the `T` functional and its maximum.
//! - [`counts`]: noisy coincidence counts and the fidelity estimators.

pub mod classical;
pub mod counts;
pub mod error;
pub mod optics;
pub mod qstate;
pub mod teleport;

pub use classical::{
    max_t, optimize_strategy, s_value, t_value, validate_povm, ClassicalStrategy, Ensemble, MaxT,
    OmegaState, Optimized, Povm, PovmDiagnostics,
};
pub use counts::{
    estimate_s, fidelity_from_counts, fit_fringe, simulate_sweep, simulate_trine_experiment,
    visibility_of, CellCounts, CountRecord, FringeFit, NoiseModel, SEstimate,
};
pub use error::{Error, Result};
pub use optics::{ElementKind, ElementSpec, Jones, JonesVector, LinearPol};
pub use qstate::{Amplitude, BasisLabel, ModeLabel, Path, Photon, Pol, PureState, UnitaryOp};
pub use teleport::{
    corrective_unitary, decompose, fidelity, make_epr, prepare_unknown, verifier_setting,
    BellOutcome, PolState, PrepSpec, VerifierSetting,
};
