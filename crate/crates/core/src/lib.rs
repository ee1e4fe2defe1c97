//! Exact few-photon linear-optics simulation and analysis.
//!
//! The crate models polarization-encoded photons as sparse bosonic Fock
//! states and propagates them exactly through wave-plates and polarizing
//! beam splitters. On top of that core it provides the heralded-CNOT gate
//! preset, realistic source and detector models (including multiplexed
//! pseudo photon-number-resolving detectors), the heralding-efficiency
//! budget with its closed forms, complementary-basis gate-fidelity
//! estimation, and the pulse demultiplexer schedule.
//!
//! Everything numeric is generic over the real scalar type via [`Real`];
//! the `*64` aliases below fix `f64`, which all shipped tolerances assume.
//!
//! # Example
//!
//! Ideal photons through the gate preset give the exact truth table:
//!
//! ```
//! use heraldix_core::devices::{DetectorModel, SourceModel};
//! use heraldix_core::fidelity::{hofmann_f1, simulate_tomography, Protocol};
//! use heraldix_core::network::heralded_cnot_network;
//!
//! let net = heralded_cnot_network::<f64>();
//! let table = simulate_tomography(
//!     &net,
//!     &SourceModel::ideal(),
//!     &DetectorModel::ideal(),
//!     Protocol::F1,
//! )
//! .unwrap();
//! assert!((hofmann_f1(&table).unwrap() - 1.0).abs() < 1e-10);
//! ```

pub mod demux;
pub mod devices;
pub mod fidelity;
pub mod fock;
pub mod herald;
pub mod network;
pub mod optics;
pub mod scalar;

pub use fock::{
    approx_eq_up_to_phase, bell_state, fidelity as state_fidelity, inner_product,
    make_product_input, BellKind, FockError, FockState, Jones, MixedEnsemble, Mode, Path,
    PhotonSpec, Pol, StateVector, MAX_PHOTONS,
};
pub use optics::{BasisName, ModeLinearMap, OpticsError, PolarizationBasis, WavePlateKind};
pub use scalar::Real;

/// Complex amplitude over the default scalar.
pub type Amplitude = num_complex::Complex<f64>;
/// Sparse state vector over `f64` amplitudes.
pub type StateVector64 = fock::StateVector<f64>;
/// Classical mixture of `f64` pure states.
pub type MixedEnsemble64 = fock::MixedEnsemble<f64>;
/// Unitary mode map over `f64`.
pub type ModeLinearMap64 = optics::ModeLinearMap<f64>;
/// Polarization basis over `f64`.
pub type PolarizationBasis64 = optics::PolarizationBasis<f64>;
/// Gate network over `f64`.
pub type Network64 = network::Network<f64>;

/// Single-precision variants, for quick exploratory sweeps.
pub type StateVector32 = fock::StateVector<f32>;
pub type MixedEnsemble32 = fock::MixedEnsemble<f32>;
pub type ModeLinearMap32 = optics::ModeLinearMap<f32>;
