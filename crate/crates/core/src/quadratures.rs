//! Time-integrated quadrature mean and variance.
//!
//! The quadrature phase is the carrier phase of the pulse plus a constant
//! offset `c`, so every result depends on the window only through
//! `X = ∫|ξ(t'+τ)|dt'` and `A = ∫|α(t')|dt'`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::EtaResult;
use crate::pulses::{PacState, PacStateSpec, PulseProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PhaseChoice {
    /// `φ = θ`, the squeezed quadrature.
    #[default]
    Theta,
    /// `φ = θ + π/2`.
    ThetaPlusHalfPi,
    /// `φ = θ + c`.
    Offset(f64),
}

impl PhaseChoice {
    pub fn offset(self) -> f64 {
        match self {
            PhaseChoice::Theta => 0.0,
            PhaseChoice::ThetaPlusHalfPi => FRAC_PI_2,
            PhaseChoice::Offset(c) => c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureWindow {
    pub start: f64,
    pub duration: f64,
    #[serde(default)]
    pub phase: PhaseChoice,
}

impl QuadratureWindow {
    pub fn new(start: f64, duration: f64, phase: PhaseChoice) -> Result<Self> {
        let w = Self {
            start,
            duration,
            phase,
        };
        w.validate()?;
        Ok(w)
    }

    /// `[c - 10/Ω_min - |d|, c + 10/Ω_min + |d|]` about the coherent centre `c`,
    /// where `d` is the photon's offset from it.
    pub fn covering(state: &PacState, phase: PhaseChoice) -> Self {
        let width = 10.0 / state.photon.bandwidth.min(state.coherent.bandwidth);
        let centre = state.coherent.center_time;
        let offset = (state.photon.center_time - state.tau - centre).abs();
        Self {
            start: centre - width - offset,
            duration: 2.0 * (width + offset),
            phase,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::param("duration", format!("must be > 0, got {}", self.duration)));
        }
        if !self.start.is_finite() {
            return Err(Error::param("start", "must be finite"));
        }
        if !self.phase.offset().is_finite() {
            return Err(Error::param("phase", "offset must be finite"));
        }
        Ok(())
    }

    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn baseline(&self) -> f64 {
        self.duration / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub mean: f64,
    pub variance: f64,
    /// Coherent-state variance `T/4`.
    pub baseline: f64,
    /// `variance - T/4`; negative means squeezed.
    pub squeezing_depth: f64,
    pub eta_used: f64,
    /// Lab-time start of the window actually integrated.
    pub window_start: f64,
    pub duration: f64,
    pub phase_offset: f64,
}

impl QuadratureResult {
    fn lossless(window: &QuadratureWindow, mean: f64, excess: f64) -> Self {
        let baseline = window.baseline();
        Self {
            mean,
            variance: baseline + excess,
            baseline,
            squeezing_depth: excess,
            eta_used: 1.0,
            window_start: window.start,
            duration: window.duration,
            phase_offset: window.phase.offset(),
        }
    }

    pub fn is_squeezed(&self) -> bool {
        self.squeezing_depth < 0.0
    }
}

/// `(X, A)` over the window.
fn window_integrals(state: &PacState, window: &QuadratureWindow) -> (f64, f64) {
    let (a, b) = (window.start, window.end());
    (
        state.photon.abs_integral(a + state.tau, b + state.tau),
        state.coherent.abs_integral(a, b),
    )
}

/// Mean and variance of the lossless PAC state.
pub fn pac_quadrature(state: &PacState, window: &QuadratureWindow) -> Result<QuadratureResult> {
    window.validate()?;
    let (x, a) = window_integrals(state, window);
    let c = window.phase.offset();
    let (cos, sin) = (c.cos(), c.sin());
    let n = state.norm();
    let ns = n * state.sigma_sq();
    let mean = (n * state.sigma_abs() * x + a) * cos;
    let excess = n * (0.5 - ns) * (x * cos).powi(2) + 0.5 * n * (x * sin).powi(2);
    Ok(QuadratureResult::lossless(window, mean, excess))
}

pub fn pac_quadrature_mean(state: &PacState, window: &QuadratureWindow) -> Result<f64> {
    Ok(pac_quadrature(state, window)?.mean)
}

pub fn pac_quadrature_variance(state: &PacState, window: &QuadratureWindow) -> Result<QuadratureResult> {
    pac_quadrature(state, window)
}

/// Coherent pulse: variance is exactly `T/4`.
pub fn coherent_quadrature(profile: &PulseProfile, window: &QuadratureWindow) -> Result<QuadratureResult> {
    window.validate()?;
    let mean = profile.abs_integral(window.start, window.end()) * window.phase.offset().cos();
    Ok(QuadratureResult::lossless(window, mean, 0.0))
}

/// `n`-photon pulse in the normalised profile `profile`. Zero mean; the
/// variance does not depend on the phase offset.
pub fn fock_quadrature_variance(n: u64, profile: &PulseProfile, window: &QuadratureWindow) -> Result<QuadratureResult> {
    window.validate()?;
    if n == 0 {
        return Err(Error::param("n", "need at least one photon"));
    }
    let x = profile.abs_integral(window.start, window.end());
    Ok(QuadratureResult::lossless(window, 0.0, 0.5 * n as f64 * x * x))
}

/// Quadrature after propagation. The window is read in the retarded frame,
/// so the reported lab-time start moves by the group delay.
pub fn lossy_quadrature(state: &PacState, window: &QuadratureWindow, loss: &EtaResult) -> Result<QuadratureResult> {
    let lossless = pac_quadrature(state, window)?;
    Ok(apply_loss(lossless, loss))
}

/// `⟨X⟩ → |η|^{1/2}⟨X⟩`, `(ΔX)² → T/4 + |η|((ΔX)² - T/4)`.
pub fn apply_loss(lossless: QuadratureResult, loss: &EtaResult) -> QuadratureResult {
    let e = loss.magnitude.value();
    let depth = e * lossless.squeezing_depth;
    QuadratureResult {
        mean: e.sqrt() * lossless.mean,
        variance: lossless.baseline + depth,
        squeezing_depth: depth,
        eta_used: e,
        window_start: lossless.window_start + loss.retarded_shift,
        ..lossless
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NalphaScan {
    pub n_alpha: Vec<f64>,
    pub squeezing_depth: Vec<f64>,
    pub argmin: f64,
    pub min_depth: f64,
}

/// Squeezing depth of `base` with `n_alpha` replaced by each grid value,
/// over a window covering both pulses.
pub fn optimal_nalpha_scan(base: &PacStateSpec, grid: &[f64]) -> Result<NalphaScan> {
    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo <= 0.5 && hi >= 10.0) {
        return Err(Error::param("n_alpha grid", format!("must span [0.5, 10], got [{lo}, {hi}]")));
    }
    let mut depths = Vec::with_capacity(grid.len());
    for &n in grid {
        let state = PacStateSpec { n_alpha: n, ..*base }.state()?;
        let window = QuadratureWindow::covering(&state, PhaseChoice::Theta);
        depths.push(pac_quadrature(&state, &window)?.squeezing_depth);
    }
    let (i, min_depth) = depths
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, d)| if d < acc.1 { (i, d) } else { acc });
    Ok(NalphaScan {
        n_alpha: grid.to_vec(),
        squeezing_depth: depths,
        argmin: grid[i],
        min_depth,
    })
}

/// `lo, lo + step, ...` up to and including `hi` (within half a step).
pub fn linear_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 0.5).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}
