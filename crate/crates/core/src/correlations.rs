//! Photon flux, coincidence rate and second-order correlations.
//!
//! Pointwise quantities are built from the moduli `|α(t)|` and `|ξ(t+τ)|`.
//! The grid evaluates `g²` from amplitudes rescaled by `max(|α|, |ξ|)` at
//! each time, so the ratio stays exact far into the tails where the flux
//! itself underflows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::propagation::{EtaResult, Transmittance};
use crate::pulses::PacState;

/// `f₁(t)` of the lossless state.
pub fn pac_flux(state: &PacState, t: f64) -> f64 {
    let a = state.coherent_modulus(t);
    let x = state.photon_modulus(t);
    let n = state.norm();
    a * a + 2.0 * n * state.sigma_abs() * x * a + n * x * x
}

/// `f₂(t₁, t₂)` of the lossless state.
pub fn pac_coincidence(state: &PacState, t1: f64, t2: f64) -> f64 {
    coincidence_terms(
        state.norm(),
        state.sigma_abs(),
        (state.coherent_modulus(t1), state.photon_modulus(t1)),
        (state.coherent_modulus(t2), state.photon_modulus(t2)),
    )
}

fn flux_terms(norm: f64, sigma_abs: f64, (a, x): (f64, f64)) -> f64 {
    a * a + 2.0 * norm * sigma_abs * x * a + norm * x * x
}

fn coincidence_terms(norm: f64, sigma_abs: f64, (a1, x1): (f64, f64), (a2, x2): (f64, f64)) -> f64 {
    norm * (x1 * x1 * a2 * a2 + x2 * x2 * a1 * a1 + 2.0 * x1 * x2 * a1 * a2)
        + a1 * a1 * a2 * a2
        + 2.0 * norm * sigma_abs * a1 * a2 * (x1 * a2 + x2 * a1)
}

/// `∫f₁ dt` after transmittance `eta`.
pub fn flux_integral(state: &PacState, eta: Transmittance) -> f64 {
    eta.value() * (1.0 + state.n_alpha + state.norm() * state.sigma_sq())
}

/// `∬f₂ dt₁dt₂` after transmittance `eta`.
pub fn coincidence_integral(state: &PacState, eta: Transmittance) -> f64 {
    let n = state.n_alpha;
    let e = eta.value();
    e * e * (n * n + 2.0 * n + 2.0 * state.norm() * state.sigma_sq() * (n + 1.0))
}

/// Time-integrated `g²[0]`. Loss cancels; a bare photon gives 0.
pub fn g2_zero(state: &PacState) -> f64 {
    if state.n_alpha == 0.0 {
        return 0.0;
    }
    let ns = state.norm() * state.sigma_sq();
    let mean = 1.0 + state.n_alpha + ns;
    1.0 - (1.0 + ns * ns) / (mean * mean)
}

pub fn coherent_g2() -> f64 {
    1.0
}

/// `1 - 1/n`, constant in time. Zero photons have no defined correlation.
pub fn fock_g2(n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("n", "g2 of the vacuum is undefined"));
    }
    Ok(1.0 - 1.0 / n as f64)
}

/// Log-scaled moduli at one time: `(m, |α|e^{-m}, |ξ|e^{-m})` with `m = ln max(|α|, |ξ|)`.
fn scaled(state: &PacState, t: f64) -> Option<(f64, f64, f64)> {
    let la = state.coherent.ln_modulus(t);
    let lx = state.photon.ln_modulus(t + state.tau);
    let m = la.max(lx);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return None;
    }
    Some((m, (la - m).exp(), (lx - m).exp()))
}

/// `g²(t₁, t₂)` of the lossless state; `None` where both pulses vanish identically.
pub fn pac_g2(state: &PacState, t1: f64, t2: f64) -> Option<f64> {
    let (_, a1, x1) = scaled(state, t1)?;
    let (_, a2, x2) = scaled(state, t2)?;
    let (n, s) = (state.norm(), state.sigma_abs());
    Some(coincidence_terms(n, s, (a1, x1), (a2, x2)) / (flux_terms(n, s, (a1, x1)) * flux_terms(n, s, (a2, x2))))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub resolution: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_min: -5.0,
            t_max: 8.0,
            resolution: 201,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.resolution < 2 {
            return Err(Error::param("resolution", format!("must be >= 2, got {}", self.resolution)));
        }
        if !(self.t_min.is_finite() && self.t_max.is_finite() && self.t_max > self.t_min) {
            return Err(Error::param(
                "bounds",
                format!("need finite t_min < t_max, got [{}, {}]", self.t_min, self.t_max),
            ));
        }
        Ok(())
    }

    pub fn axis(&self) -> Vec<f64> {
        let step = (self.t_max - self.t_min) / (self.resolution - 1) as f64;
        (0..self.resolution)
            .map(|i| {
                if i + 1 == self.resolution {
                    self.t_max
                } else {
                    self.t_min + step * i as f64
                }
            })
            .collect()
    }
}

/// `g²(t₁, t₂)` on a square grid in lab time. `NaN` marks a missing value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationGrid {
    pub t1_axis: Vec<f64>,
    pub t2_axis: Vec<f64>,
    /// Row-major, one row per `t1`.
    #[serde(with = "nan_as_null")]
    pub values: Vec<f64>,
    /// `f₁` on `t1_axis`, including the loss factor.
    pub flux: Vec<f64>,
    pub eta: f64,
    pub retarded_shift: f64,
}

impl CorrelationGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.t2_axis.len() + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.t1_axis.len().min(self.t2_axis.len())).map(|i| self.get(i, i)).collect()
    }

    pub fn missing(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }

    /// `t1,t2,g2` rows; missing values are left empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# t1 and t2 in units of 1/Omega; g2 dimensionless\nt1,t2,g2\n");
        for (i, t1) in self.t1_axis.iter().enumerate() {
            for (j, t2) in self.t2_axis.iter().enumerate() {
                let v = self.get(i, j);
                let v = if v.is_nan() { String::new() } else { format!("{v:.11e}") };
                out.push_str(&format!("{t1:.11e},{t2:.11e},{v}\n"));
            }
        }
        out
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| if x.is_nan() { None } else { Some(*x) })
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let v: Vec<Option<f64>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

/// Evaluates `g²` and the flux on `grid`. With `loss`, times are lab times
/// and the state is sampled at the retarded time `t - L/v_g`.
pub fn g2_grid(state: &PacState, grid: &GridSpec, loss: Option<&EtaResult>) -> Result<CorrelationGrid> {
    grid.validate()?;
    let loss = loss.copied().unwrap_or_else(EtaResult::identity);
    let shift = loss.retarded_shift;
    let axis = grid.axis();
    let scaled_axis: Vec<_> = axis.iter().map(|t| scaled(state, t - shift)).collect();
    let (n, s) = (state.norm(), state.sigma_abs());
    let f1: Vec<Option<f64>> = scaled_axis
        .iter()
        .map(|p| p.map(|(_, a, x)| flux_terms(n, s, (a, x))))
        .collect();
    let len = axis.len();
    let mut values = vec![f64::NAN; len * len];
    values.par_chunks_mut(len).enumerate().for_each(|(i, row)| {
        let (Some(p1), Some(f1i)) = (scaled_axis[i], f1[i]) else { return };
        for (j, slot) in row.iter_mut().enumerate() {
            if let (Some(p2), Some(f1j)) = (scaled_axis[j], f1[j]) {
                *slot = coincidence_terms(n, s, (p1.1, p1.2), (p2.1, p2.2)) / (f1i * f1j);
            }
        }
    });
    let eta = loss.magnitude.value();
    let flux = axis.iter().map(|t| eta * pac_flux(state, t - shift)).collect();
    Ok(CorrelationGrid {
        t1_axis: axis.clone(),
        t2_axis: axis,
        values,
        flux,
        eta,
        retarded_shift: shift,
    })
}
