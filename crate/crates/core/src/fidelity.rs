//! Fidelity against the ideal PAC state, whose photon shares the coherent
//! pulse's mode `α/√n_α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::Transmittance;
use crate::pulses::PacState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityResult {
    pub value: f64,
    pub eta_used: f64,
    pub sigma_sq: f64,
    pub norm: f64,
    pub n_alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// `F = |σ|²(1 + n_α) / (n_α(1 + |σ|²))`.
pub fn fidelity(state: &PacState) -> Result<FidelityResult> {
    fidelity_lossy(state, Transmittance::LOSSLESS)
}

/// Fidelity after loss, against the lossless ideal state moved to the retarded frame.
pub fn fidelity_lossy(state: &PacState, eta: Transmittance) -> Result<FidelityResult> {
    let n = state.n_alpha;
    if n == 0.0 {
        return Err(Error::UndefinedReference);
    }
    let s = state.sigma_sq();
    let norm = state.norm();
    let e = eta.value();
    let (value, note) = if eta.is_opaque() {
        (0.0, Some("all photons lost; the output is vacuum".to_string()))
    } else if eta.is_lossless() {
        (s * (1.0 + n) / (n * (1.0 + s)), None)
    } else {
        let r = e.sqrt();
        let value = e * (-2.0 * n * (1.0 - r)).exp() * (norm / (1.0 + n)) * (s / n) * (1.0 + r * n).powi(2);
        (value, None)
    };
    Ok(FidelityResult {
        value: value.clamp(0.0, 1.0),
        eta_used: e,
        sigma_sq: s,
        norm,
        n_alpha: n,
        note,
    })
}
