//! Photon-number distributions for PAC, coherent and Fock wavepackets.

use serde::{Deserialize, Serialize};

use crate::propagation::Transmittance;
use crate::pulses::PacState;
use crate::special::{binomial_weight, pow_over_factorial};

/// Cumulative mass at which distributions are truncated.
pub const MASS_TARGET: f64 = 1.0 - 1e-12;
/// Hard cap on the number of retained components.
pub const N_MAX: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonDistribution {
    pub label: String,
    /// `P_0 ..= P_nmax`.
    pub probabilities: Vec<f64>,
    /// Upper bound on the mass beyond `nmax`.
    pub tail_bound: f64,
    /// Closed-form mean.
    pub mean: f64,
    /// Closed-form variance.
    pub variance: f64,
    pub eta: f64,
}

impl PhotonDistribution {
    fn from_pmf(
        label: &str,
        eta: f64,
        moments: (f64, f64),
        min_len: usize,
        pmf: impl Fn(u64) -> f64,
    ) -> Self {
        let mut probabilities = Vec::new();
        let mut total = 0.0;
        for n in 0..=N_MAX as u64 {
            let p = pmf(n);
            probabilities.push(p);
            total += p;
            if total >= MASS_TARGET && probabilities.len() >= min_len {
                break;
            }
        }
        Self {
            label: label.to_string(),
            probabilities,
            tail_bound: (1.0 - total).max(0.0),
            mean: moments.0,
            variance: moments.1,
            eta,
        }
    }

    pub fn n_max(&self) -> usize {
        self.probabilities.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn get(&self, n: usize) -> f64 {
        self.probabilities.get(n).copied().unwrap_or(0.0)
    }

    /// Mean and variance summed from the retained vector.
    pub fn vector_moments(&self) -> (f64, f64) {
        let (mut m1, mut m2) = (0.0, 0.0);
        for (n, p) in self.probabilities.iter().enumerate() {
            let n = n as f64;
            m1 += n * p;
            m2 += n * n * p;
        }
        (m1, m2 - m1 * m1)
    }

    pub fn fano(&self) -> f64 {
        self.variance / self.mean
    }
}

/// Lossless PAC probability. `P_0` is identically zero.
pub fn pac_pn(state: &PacState, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let a = state.n_alpha;
    let s = state.sigma_sq();
    let ln_pre = state.norm().ln() - a;
    let k = n as i64;
    pow_over_factorial(a, k - 1, ln_pre) + s * pow_over_factorial(a, k - 2, ln_pre)
}

/// PAC probability after a channel of transmittance `eta`.
pub fn pac_pn_lossy(state: &PacState, n: u64, eta: Transmittance) -> f64 {
    let e = eta.value();
    if eta.is_lossless() {
        return pac_pn(state, n);
    }
    if eta.is_opaque() {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let a = state.n_alpha;
    let s = state.sigma_sq();
    let k = n as i64;
    let ln_pre = n as f64 * e.ln() + state.norm().ln() - e * a;
    let q = 1.0 - e;
    let lost = q
        * (pow_over_factorial(a, k, ln_pre) * (1.0 + q * s)
            + 2.0 * s * pow_over_factorial(a, k - 1, ln_pre));
    let kept = pow_over_factorial(a, k - 1, ln_pre) + s * pow_over_factorial(a, k - 2, ln_pre);
    lost + kept
}

/// `⟨n⟩` and `(Δn)²` of the PAC state after transmittance `eta`.
///
/// The variance is `⟨n⟩ - (1 + |σ|⁴|N|²)|η|²`, the second central moment of
/// the lossy distribution.
pub fn pac_mean_variance(state: &PacState, eta: Transmittance) -> (f64, f64) {
    let e = eta.value();
    let s = state.sigma_sq();
    let norm = state.norm();
    let mean = e * (1.0 + state.n_alpha + s * norm);
    let variance = mean - (1.0 + s * s * norm * norm) * e * e;
    (mean, variance)
}

pub fn coherent_pn(n_alpha: f64, n: u64, eta: Transmittance) -> f64 {
    let m = eta.value() * n_alpha;
    pow_over_factorial(m, n as i64, -m)
}

pub fn coherent_mean_variance(n_alpha: f64, eta: Transmittance) -> (f64, f64) {
    let m = eta.value() * n_alpha;
    (m, m)
}

/// Binomial thinning of an `m`-photon state. Zero for `n > m`.
pub fn fock_pn(m: u64, n: u64, eta: Transmittance) -> f64 {
    binomial_weight(m, n, eta.value())
}

pub fn fock_mean_variance(m: u64, eta: Transmittance) -> (f64, f64) {
    let e = eta.value();
    (e * m as f64, e * (1.0 - e) * m as f64)
}

pub fn pac_distribution(state: &PacState, eta: Transmittance) -> PhotonDistribution {
    let min_len = if eta.is_opaque() { 1 } else { 2 };
    PhotonDistribution::from_pmf("pac", eta.value(), pac_mean_variance(state, eta), min_len, |n| {
        pac_pn_lossy(state, n, eta)
    })
}

pub fn coherent_distribution(n_alpha: f64, eta: Transmittance) -> PhotonDistribution {
    PhotonDistribution::from_pmf(
        "coherent",
        eta.value(),
        coherent_mean_variance(n_alpha, eta),
        1,
        |n| coherent_pn(n_alpha, n, eta),
    )
}

pub fn fock_distribution(m: u64, eta: Transmittance) -> PhotonDistribution {
    let probabilities: Vec<f64> = (0..=m).map(|n| fock_pn(m, n, eta)).collect();
    let (mean, variance) = fock_mean_variance(m, eta);
    PhotonDistribution {
        label: "fock".into(),
        probabilities,
        tail_bound: 0.0,
        mean,
        variance,
        eta: eta.value(),
    }
}

/// Loss applied to an arbitrary distribution: each photon survives with probability `|η|`.
pub fn bernoulli_transform(lossless: &PhotonDistribution, eta: Transmittance) -> PhotonDistribution {
    let e = eta.value();
    let input = &lossless.probabilities;
    let probabilities: Vec<f64> = (0..input.len())
        .map(|n| {
            input
                .iter()
                .enumerate()
                .skip(n)
                .map(|(m, p)| p * binomial_weight(m as u64, n as u64, e))
                .sum()
        })
        .collect();
    PhotonDistribution {
        label: lossless.label.clone(),
        probabilities,
        tail_bound: lossless.tail_bound,
        mean: e * lossless.mean,
        variance: e * e * lossless.variance + e * (1.0 - e) * lossless.mean,
        eta: lossless.eta * e,
    }
}
