//! Photon-added coherent states of travelling pulses: photon statistics,
//! correlations, quadratures and fidelity under waveguide loss.

pub mod correlations;
pub mod error;
pub mod fidelity;
pub mod integrate;
pub mod oracle;
pub mod propagation;
pub mod photon_statistics;
pub mod pulses;
pub mod quadratures;
pub mod special;
pub mod sweep;

pub use error::{Error, Result};
pub use propagation::{EtaResult, LossChannel, PresetTable, Transmittance};
pub use pulses::{GaussianConvention, PacState, PacStateSpec, PulseProfile};
