//! Brute-force numerical checks of every closed form.
//!
//! Each oracle samples the complex pulse amplitudes on a composite
//! Gauss-Kronrod rule and evaluates the defining expectation values
//! directly: probability densities as tensor-product sums, flux and
//! coincidences from operator matrix elements, quadrature moments from
//! their normal-ordered double integrals. The overlap `σ`, the
//! normalisation `|N|` and `n_α` are recomputed from the samples, never
//! taken from the state.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::factorial::{binomial, factorial};

use crate::correlations;
use crate::error::{Error, Result};
use crate::fidelity;
use crate::integrate::CompositeRule;
use crate::photon_statistics as ps;
use crate::propagation::{EtaResult, Transmittance};
use crate::pulses::{PacState, PacStateSpec, PulseProfile};
use crate::quadratures::{self, PhaseChoice, QuadratureWindow};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
const RULE_TOLERANCE: f64 = 1e-13;
const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub label: String,
    pub closed_form: f64,
    pub quadrature: f64,
    pub abs_error: f64,
    /// `abs_error / max(|closed_form|, scale)`, or `abs_error` when that is below 1e-300.
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub n_alpha: f64,
    pub tau: f64,
    pub omega1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    n_alpha: f64,
    tau: f64,
    omega1: f64,
}

impl Point {
    fn of(state: &PacState) -> Self {
        Self {
            n_alpha: state.n_alpha,
            tau: state.tau,
            omega1: state.photon.bandwidth,
        }
    }
}

impl OracleReport {
    /// `scale` is the magnitude of the largest term that cancels into
    /// `closed_form`; it keeps near-zero results from inflating the relative error.
    fn compare(label: impl Into<String>, closed: f64, quad: f64, scale: f64, tol: f64, at: Point) -> Self {
        let abs_error = (closed - quad).abs();
        let denom = closed.abs().max(scale);
        let rel_error = if denom < 1e-300 { abs_error } else { abs_error / denom };
        Self {
            label: label.into(),
            closed_form: closed,
            quadrature: quad,
            abs_error,
            rel_error,
            tolerance: tol,
            pass: rel_error <= tol,
            n_alpha: at.n_alpha,
            tau: at.tau,
            omega1: at.omega1,
            note: None,
        }
    }

    /// Worst of several comparisons under one label.
    fn worst(label: impl Into<String>, cases: impl IntoIterator<Item = (f64, f64, f64)>, tol: f64, at: Point) -> Self {
        let label = label.into();
        cases
            .into_iter()
            .map(|(c, q, s)| Self::compare(label.clone(), c, q, s, tol, at))
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error).then(a.pass.cmp(&b.pass).reverse()))
            .expect("at least one comparison")
    }

    fn failed(label: impl Into<String>, closed: f64, err: &Error, tol: f64, at: Point) -> Self {
        Self {
            label: label.into(),
            closed_form: closed,
            quadrature: f64::NAN,
            abs_error: f64::NAN,
            rel_error: f64::NAN,
            tolerance: tol,
            pass: false,
            n_alpha: at.n_alpha,
            tau: at.tau,
            omega1: at.omega1,
            note: Some(err.to_string()),
        }
    }
}

/// Pulse amplitudes sampled on a rule, plus the integrals every oracle needs.
struct Samples {
    t: Vec<f64>,
    w: Vec<f64>,
    /// `ξ(t + τ)`.
    xi: Vec<Complex64>,
    /// `α(t)`.
    al: Vec<Complex64>,
    n_alpha: f64,
    sigma: Complex64,
    norm: f64,
    omega0: f64,
}

impl Samples {
    /// Nodes on `[a, b]`; `σ`, `n_α` and `|N|` always come from the full support.
    fn on(state: &PacState, a: f64, b: f64) -> Result<Self> {
        let mut smp = Self::sampled(state, a, b)?;
        let (lo, hi) = state.default_window();
        if a > lo || b < hi {
            let whole = Self::sampled(state, lo, hi)?;
            smp.n_alpha = whole.n_alpha;
            smp.sigma = whole.sigma;
            smp.norm = whole.norm;
        }
        Ok(smp)
    }

    fn sampled(state: &PacState, a: f64, b: f64) -> Result<Self> {
        let tau = state.tau;
        let px = |t: f64| state.photon.modulus(t + tau).powi(2);
        let pa = |t: f64| state.coherent.modulus(t).powi(2);
        let cross = |t: f64| state.photon.modulus(t + tau) * state.coherent.modulus(t);
        let rule = CompositeRule::adapted(a, b, &[&px, &pa, &cross], RULE_TOLERANCE, MAX_PANELS)?;
        let xi: Vec<Complex64> = rule.nodes.iter().map(|&t| state.photon.amplitude(t + tau)).collect();
        let al: Vec<Complex64> = rule.nodes.iter().map(|&t| state.coherent.amplitude(t)).collect();
        let mut n_alpha = 0.0;
        let mut sigma = Complex64::new(0.0, 0.0);
        for ((w, x), a) in rule.weights.iter().zip(&xi).zip(&al) {
            n_alpha += w * a.norm_sqr();
            sigma += x.conj() * a * w;
        }
        Ok(Self {
            t: rule.nodes,
            w: rule.weights,
            xi,
            al,
            n_alpha,
            sigma,
            norm: 1.0 / (1.0 + sigma.norm_sqr()),
            omega0: state.coherent.omega0,
        })
    }

    fn whole(state: &PacState) -> Result<Self> {
        let (a, b) = state.default_window();
        Self::on(state, a, b)
    }

    fn len(&self) -> usize {
        self.t.len()
    }

    fn s(&self) -> f64 {
        self.sigma.norm_sqr()
    }

    /// `‖(c + d a†_ξ)|α⟩‖²`.
    fn norm_sq(&self, c: Complex64, d: Complex64) -> f64 {
        c.norm_sqr() + 2.0 * (c.conj() * d * self.sigma.conj()).re + d.norm_sqr() * (1.0 + self.s())
    }

    fn flux(&self, i: usize) -> f64 {
        self.norm * self.norm_sq(self.xi[i], self.al[i])
    }

    fn coincidence(&self, i: usize, j: usize) -> f64 {
        let c = self.xi[i] * self.al[j] + self.xi[j] * self.al[i];
        self.norm * self.norm_sq(c, self.al[i] * self.al[j])
    }

    /// `⟨a(tᵢ)⟩`.
    fn field(&self, i: usize) -> Complex64 {
        (self.xi[i] * self.sigma + self.al[i] * (1.0 + self.s())) * self.norm
    }

    /// `⟨a(tᵢ)a(tⱼ)⟩`.
    fn pair(&self, i: usize, j: usize) -> Complex64 {
        ((self.xi[j] * self.al[i] + self.al[j] * self.xi[i]) * self.sigma + self.al[i] * self.al[j] * (1.0 + self.s()))
            * self.norm
    }

    /// `⟨a†(tⱼ)a(tᵢ)⟩`.
    fn hop(&self, i: usize, j: usize) -> Complex64 {
        let (xi, xj, ai, aj) = (self.xi[i], self.xi[j].conj(), self.al[i], self.al[j].conj());
        (xj * xi + xj * ai * self.sigma.conj() + aj * xi * self.sigma + aj * ai * (1.0 + self.s())) * self.norm
    }

    fn phase(&self, i: usize, offset: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.omega0 * self.t[i] + offset)
    }

    /// `Σ wᵢ f(i)` over the rule.
    fn sum(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.len()).map(|i| self.w[i] * f(i)).sum()
    }

    fn sum2(&self, f: impl Fn(usize, usize) -> f64 + Sync) -> f64 {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.w[i] * (0..self.len()).map(|j| self.w[j] * f(i, j)).sum::<f64>())
            .sum()
    }
}

/// `n`-photon probability from the density `(|N|/n!)|Σ_k ξ(t_k+τ)Π_{i≠k}α(t_i)|² e^{-n_α}`.
fn density_pn(smp: &Samples, n: u64) -> f64 {
    let m = smp.len();
    let (x, a, w) = (&smp.xi, &smp.al, &smp.w);
    let total: f64 = match n {
        1 => (0..m).map(|i| w[i] * x[i].norm_sqr()).sum(),
        2 => (0..m)
            .into_par_iter()
            .map(|i| w[i] * (0..m).map(|j| w[j] * (x[i] * a[j] + a[i] * x[j]).norm_sqr()).sum::<f64>())
            .sum(),
        3 => (0..m)
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..m {
                    let p = x[i] * a[j] + a[i] * x[j];
                    let q = a[i] * a[j];
                    let inner: f64 = (0..m).map(|k| w[k] * (p * a[k] + q * x[k]).norm_sqr()).sum();
                    acc += w[j] * inner;
                }
                w[i] * acc
            })
            .sum(),
        _ => unreachable!("density oracle is limited to n <= 3"),
    };
    smp.norm * total * (-smp.n_alpha).exp() / factorial(n)
}

/// `n`-photon probability of a coherent pulse `√η α` from its product density.
fn density_coherent(smp: &Samples, n: u64, eta: f64) -> f64 {
    let intensity: f64 = smp.sum(|i| eta * smp.al[i].norm_sqr());
    // The density factorises, so the n-fold tensor sum is the n-th power of the 1-D sum.
    intensity.powi(n as i32) * (-intensity).exp() / factorial(n)
}

/// Lossless photon-number probability, `n ∈ {1, 2, 3}`.
pub fn oracle_pn(state: &PacState, n: u64, tol: f64) -> OracleReport {
    let at = Point::of(state);
    let label = format!("pac.pn.lossless[n={n}]");
    let closed = ps::pac_pn(state, n);
    if !(1..=3).contains(&n) {
        return OracleReport::failed(label, closed, &Error::param("n", "oracle covers n = 1..=3"), tol, at);
    }
    match Samples::whole(state) {
        Ok(smp) => OracleReport::compare(label, closed, density_pn(&smp, n), 0.0, tol, at),
        Err(e) => OracleReport::failed(label, closed, &e, tol, at),
    }
}

/// `g²[0]` from `∬f₂ / (∫f₁)²`.
pub fn oracle_g2zero(state: &PacState, tol: f64) -> OracleReport {
    let at = Point::of(state);
    let closed = correlations::g2_zero(state);
    match Samples::whole(state) {
        Ok(smp) => {
            let f1 = smp.sum(|i| smp.flux(i));
            let f2 = smp.sum2(|i, j| smp.coincidence(i, j));
            OracleReport::compare("pac.g2_zero", closed, f2 / (f1 * f1), 0.0, tol, at)
        }
        Err(e) => OracleReport::failed("pac.g2_zero", closed, &e, tol, at),
    }
}

/// `⟨X⟩` and `⟨:X²:⟩` over the sampled window, after attenuation by `eta`.
fn quadrature_moments(smp: &Samples, offset: f64, eta: f64) -> (f64, f64) {
    let c = offset;
    let mean = eta.sqrt() * smp.sum(|i| (smp.field(i) * smp.phase(i, c)).re);
    let normal = 0.5
        * eta
        * smp.sum2(|i, j| {
            (smp.pair(i, j) * smp.phase(i, c) * smp.phase(j, c)).re
                + (smp.hop(i, j) * smp.phase(i, c) * smp.phase(j, c).conj()).re
        });
    (mean, normal)
}

fn phase_tag(phase: PhaseChoice) -> String {
    match phase {
        PhaseChoice::Theta => "theta".to_string(),
        PhaseChoice::ThetaPlusHalfPi => "theta+pi/2".to_string(),
        PhaseChoice::Offset(c) => format!("theta+{c}"),
    }
}

/// Quadrature mean and variance over `window`, from `⟨a⟩`, `⟨aa⟩` and `⟨a†a⟩`.
/// The first report checks the mean, the second the excess variance.
pub fn oracle_quadrature(state: &PacState, window: &QuadratureWindow, tol: f64) -> Vec<OracleReport> {
    oracle_quadrature_lossy(state, window, Transmittance::LOSSLESS, tol)
}

/// As [`oracle_quadrature`], with the field attenuated to `√η a + √(1-η) b` and `b` in vacuum.
pub fn oracle_quadrature_lossy(state: &PacState, window: &QuadratureWindow, eta: Transmittance, tol: f64) -> Vec<OracleReport> {
    let at = Point::of(state);
    let tag = if eta.is_lossless() {
        phase_tag(window.phase)
    } else {
        format!("{},eta={}", phase_tag(window.phase), eta.value())
    };
    let mean_label = format!("pac.quadrature.mean[{tag}]");
    let var_label = format!("pac.quadrature.variance[{tag}]");
    let closed = match quadratures::lossy_quadrature(state, window, &EtaResult::from_transmittance(eta)) {
        Ok(r) => r,
        Err(e) => return vec![OracleReport::failed(mean_label, f64::NAN, &e, tol, at)],
    };
    let smp = match Samples::on(state, window.start, window.end()) {
        Ok(s) => s,
        Err(e) => {
            return vec![
                OracleReport::failed(mean_label, closed.mean, &e, tol, at),
                OracleReport::failed(var_label, closed.squeezing_depth, &e, tol, at),
            ];
        }
    };
    let e = eta.value();
    let (mean, normal) = quadrature_moments(&smp, window.phase.offset(), e);
    let x = smp.sum(|i| smp.xi[i].norm());
    let a = smp.sum(|i| smp.al[i].norm());
    vec![
        OracleReport::compare(mean_label, closed.mean, mean, e.sqrt() * (smp.norm * smp.sigma.norm() * x + a), tol, at),
        OracleReport::compare(var_label, closed.squeezing_depth, normal - mean * mean, e * smp.norm * x * x, tol, at),
    ]
}

fn fidelity_overlaps(smp: &Samples, eta: f64) -> f64 {
    let n = smp.n_alpha;
    // ξ₀ = α/√n_α
    let xi0_xi = smp.sum_c(|i| smp.al[i].conj() * smp.xi[i]) / n.sqrt();
    let xi0_al = smp.sum_c(|i| smp.al[i].conj() * smp.al[i]) / n.sqrt();
    let ideal_norm = 1.0 / (1.0 + xi0_al.norm_sqr());
    let root = eta.sqrt();
    let env_vacuum = (-(1.0 - eta) * n / 2.0).exp();
    let mu = smp.sum_c(|i| smp.al[i].conj() * smp.al[i] * root);
    let guided = (-n / 2.0 - eta * n / 2.0 + mu).exp();
    let bracket = xi0_xi + smp.sigma.conj() * xi0_al * root;
    let amplitude = bracket * guided * env_vacuum * (root * (smp.norm * ideal_norm).sqrt());
    amplitude.norm_sqr()
}

impl Samples {
    fn sum_c(&self, f: impl Fn(usize) -> Complex64) -> Complex64 {
        (0..self.len()).map(|i| f(i) * self.w[i]).sum()
    }
}

fn run_point(state: &PacState, tol: f64, eta: Transmittance) -> Vec<OracleReport> {
    let at = Point::of(state);
    let mut out = Vec::new();
    for n in 1..=3 {
        out.push(oracle_pn(state, n, tol));
    }
    out.push(oracle_g2zero(state, tol));
    for phase in [PhaseChoice::Theta, PhaseChoice::ThetaPlusHalfPi, PhaseChoice::Offset(0.7)] {
        out.extend(oracle_quadrature(state, &QuadratureWindow::covering(state, phase), tol));
    }
    out.extend(oracle_quadrature_lossy(state, &QuadratureWindow::covering(state, PhaseChoice::Theta), eta, tol));
    // A window holding only the leading half of the coherent pulse.
    let c = state.coherent.center_time;
    if let Ok(half) = QuadratureWindow::new(c - 10.0 / state.coherent.bandwidth, 10.0 / state.coherent.bandwidth, PhaseChoice::Theta) {
        out.extend(oracle_quadrature(state, &half, tol).into_iter().map(|mut r| {
            r.label = r.label.replacen('[', "[half-window,", 1);
            r
        }));
    }

    let smp = match Samples::whole(state) {
        Ok(s) => s,
        Err(e) => {
            out.push(OracleReport::failed("samples", f64::NAN, &e, tol, at));
            return out;
        }
    };
    let e = eta.value();

    // Flux, coincidences and their integrals.
    let probes: Vec<usize> = (0..8).map(|k| k * (smp.len() - 1) / 7).collect();
    out.push(OracleReport::worst(
        "pac.flux.pointwise",
        probes.iter().map(|&i| (correlations::pac_flux(state, smp.t[i]), smp.flux(i), 0.0)),
        tol,
        at,
    ));
    out.push(OracleReport::worst(
        "pac.coincidence.pointwise",
        probes.iter().flat_map(|&i| {
            let smp = &smp;
            probes
                .iter()
                .map(move |&j| (correlations::pac_coincidence(state, smp.t[i], smp.t[j]), smp.coincidence(i, j), 0.0))
        }),
        tol,
        at,
    ));
    let f1 = smp.sum(|i| smp.flux(i));
    let f2 = smp.sum2(|i, j| smp.coincidence(i, j));
    match oracle_g2_pointwise(state, tol) {
        Ok(r) => out.push(r),
        Err(err) => out.push(OracleReport::failed("pac.g2.pointwise", f64::NAN, &err, tol, at)),
    }
    out.push(OracleReport::compare(
        "pac.flux.integral",
        correlations::flux_integral(state, Transmittance::LOSSLESS),
        f1,
        0.0,
        tol,
        at,
    ));
    out.push(OracleReport::compare(
        "pac.coincidence.integral",
        correlations::coincidence_integral(state, Transmittance::LOSSLESS),
        f2,
        0.0,
        tol,
        at,
    ));

    // Moments: <n> = ∫f₁, <n(n-1)> = ∬f₂, thinned by η and η².
    for (tag, eta) in [("lossless", Transmittance::LOSSLESS), ("lossy", eta)] {
        let e = eta.value();
        let mean = e * f1;
        let var = e * e * f2 + mean - mean * mean;
        let (cm, cv) = ps::pac_mean_variance(state, eta);
        out.push(OracleReport::compare(format!("pac.mean.{tag}"), cm, mean, 0.0, tol, at));
        out.push(OracleReport::compare(format!("pac.variance.{tag}"), cv, var, 0.0, tol, at));
    }

    // Lossy distribution by summing the binomial series over the lossless one.
    let lossless = |m: u64| -> f64 {
        if m == 0 {
            return 0.0;
        }
        let (a, s) = (smp.n_alpha, smp.s());
        let mut t = a.powi(m as i32 - 1) / factorial(m - 1);
        if m >= 2 {
            t += s * a.powi(m as i32 - 2) / factorial(m - 2);
        }
        smp.norm * (-a).exp() * t
    };
    let m_max = 170u64;
    out.push(OracleReport::worst(
        "pac.pn.lossy",
        (0..=6u64).map(|n| {
            let series: f64 = (n..m_max)
                .map(|m| binomial(m, n) * e.powi(n as i32) * (1.0 - e).powi((m - n) as i32) * lossless(m))
                .sum();
            (ps::pac_pn_lossy(state, n, eta), series, 0.0)
        }),
        tol,
        at,
    ));

    // Fidelity against the ideal state, built from overlaps.
    if state.n_alpha > 0.0 {
        match (fidelity::fidelity(state), fidelity::fidelity_lossy(state, eta)) {
            (Ok(f), Ok(fl)) => {
                out.push(OracleReport::compare("pac.fidelity.lossless", f.value, fidelity_overlaps(&smp, 1.0), 0.0, tol, at));
                out.push(OracleReport::compare("pac.fidelity.lossy", fl.value, fidelity_overlaps(&smp, e), 0.0, tol, at));
            }
            (Err(err), _) | (_, Err(err)) => out.push(OracleReport::failed("pac.fidelity", f64::NAN, &err, tol, at)),
        }
    }

    // Coherent and single-photon references in the same pulse shapes.
    let coherent_cases = (1..=3u64).map(|n| (ps::coherent_pn(state.n_alpha, n, Transmittance::LOSSLESS), density_coherent(&smp, n, 1.0), 0.0));
    out.push(OracleReport::worst("coherent.pn.lossless", coherent_cases, tol, at));
    let coherent_lossy = (0..=3u64).map(|n| (ps::coherent_pn(state.n_alpha, n, eta), density_coherent(&smp, n, e), 0.0));
    out.push(OracleReport::worst("coherent.pn.lossy", coherent_lossy, tol, at));

    out.extend(reference_correlations(state, &smp, tol, at));
    out
}

fn reference_correlations(state: &PacState, smp: &Samples, tol: f64, at: Point) -> Vec<OracleReport> {
    let mut out = Vec::new();
    // Coherent pulse: f₂ = |α₁|²|α₂|², f₁ = |α|².
    if state.n_alpha > 0.0 {
        let f1 = smp.sum(|i| smp.al[i].norm_sqr());
        let g = smp.sum2(|i, j| smp.al[i].norm_sqr() * smp.al[j].norm_sqr()) / (f1 * f1);
        out.push(OracleReport::compare("coherent.g2", correlations::coherent_g2(), g, 0.0, tol, at));
    }
    // n-photon pulse in the photon mode: f₂ = n(n-1)|ξ₁|²|ξ₂|², f₁ = n|ξ|².
    let photon_norm = smp.sum(|i| smp.xi[i].norm_sqr());
    out.push(OracleReport::worst(
        "fock.g2",
        [2u64, 3, 4].map(|n| {
            let nf = n as f64;
            let f2 = nf * (nf - 1.0) * smp.sum2(|i, j| smp.xi[i].norm_sqr() * smp.xi[j].norm_sqr());
            let f1 = nf * photon_norm;
            (correlations::fock_g2(n).unwrap_or(f64::NAN), f2 / (f1 * f1), 0.0)
        }),
        tol,
        at,
    ));

    // Coherent quadrature: <:X²:> - <X>² vanishes, leaving T/4.
    let window = QuadratureWindow::covering(state, PhaseChoice::Offset(0.3));
    if let (Ok(cs), Ok(w)) = (
        quadratures::coherent_quadrature(&state.coherent, &window),
        Samples::on(state, window.start, window.end()),
    ) {
        let c = window.phase.offset();
        let mean = w.sum(|i| (w.al[i] * w.phase(i, c)).re);
        let normal = 0.5
            * w.sum2(|i, j| {
                (w.al[i] * w.al[j] * w.phase(i, c) * w.phase(j, c)).re
                    + (w.al[j].conj() * w.al[i] * w.phase(i, c) * w.phase(j, c).conj()).re
            });
        let scale = w.sum(|i| w.al[i].norm()).powi(2);
        out.push(OracleReport::compare("coherent.quadrature.variance", cs.squeezing_depth, normal - mean * mean, scale, tol, at));
        out.push(OracleReport::compare("coherent.quadrature.mean", cs.mean, mean, 0.0, tol, at));
    }

    // Single-photon quadrature in its own frame.
    let photon = &state.photon;
    let half = 10.0 / photon.bandwidth;
    if let Ok(window) = QuadratureWindow::new(photon.center_time - half, 2.0 * half, PhaseChoice::Theta) {
        out.push(fock_quadrature_report(photon, &window, 1, tol, at));
    }
    out
}

fn fock_quadrature_report(profile: &PulseProfile, window: &QuadratureWindow, n: u64, tol: f64, at: Point) -> OracleReport {
    let label = "fock.quadrature.variance";
    let closed = match quadratures::fock_quadrature_variance(n, profile, window) {
        Ok(r) => r.squeezing_depth,
        Err(e) => return OracleReport::failed(label, f64::NAN, &e, tol, at),
    };
    let env = |t: f64| profile.modulus(t).powi(2);
    let rule = match CompositeRule::adapted(window.start, window.end(), &[&env], RULE_TOLERANCE, MAX_PANELS) {
        Ok(r) => r,
        Err(e) => return OracleReport::failed(label, closed, &e, tol, at),
    };
    let c = window.phase.offset();
    let amp: Vec<Complex64> = rule
        .nodes
        .iter()
        .map(|&t| profile.amplitude(t) * Complex64::from_polar(1.0, profile.omega0 * t + c))
        .collect();
    // <a†(t'')a(t')> = n ξ*(t'')ξ(t'); <aa> = 0 and <X> = 0.
    let s: Complex64 = amp.iter().zip(&rule.weights).map(|(a, w)| a * w).sum();
    let normal = 0.5 * n as f64 * s.norm_sqr();
    OracleReport::compare(label, closed, normal, 0.0, tol, at)
}

/// Thinning of an `m`-photon state by convolving `m` independent Bernoulli trials.
fn fock_reports(tol: f64) -> Vec<OracleReport> {
    let at = Point {
        n_alpha: 0.0,
        tau: 0.0,
        omega1: 1.0,
    };
    let mut out = Vec::new();
    for m in [1u64, 4, 9] {
        for e in [0.25, 0.5, 0.75] {
            let mut dist = vec![1.0];
            for _ in 0..m {
                let mut next = vec![0.0; dist.len() + 1];
                for (k, p) in dist.iter().enumerate() {
                    next[k] += p * (1.0 - e);
                    next[k + 1] += p * e;
                }
                dist = next;
            }
            let eta = Transmittance::new(e).expect("eta in range");
            out.push(OracleReport::worst(
                format!("fock.pn.lossy[m={m},eta={e}]"),
                dist.iter().enumerate().map(|(n, p)| (ps::fock_pn(m, n as u64, eta), *p, 0.0)),
                tol,
                at,
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub tau: Vec<f64>,
    pub omega1: Vec<f64>,
    pub n_alpha: Vec<f64>,
    pub eta: f64,
    pub tolerance: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            tau: (0..5).map(|i| 1.25 * i as f64).collect(),
            omega1: vec![0.2, 0.5, 1.0, 2.0, 5.0],
            n_alpha: vec![1.0, 3.0, 5.0],
            eta: 0.5,
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub tolerance: f64,
    pub total: usize,
    pub failed: usize,
    pub worst_rel_error: f64,
    pub reports: Vec<OracleReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failed == 0
    }

    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self
            .reports
            .iter()
            .map(|r| r.label.split('[').next().unwrap_or(&r.label).to_string())
            .collect();
        labels.sort();
        labels.dedup();
        labels
    }
}

/// Every oracle over the `(τ, Ω₁, n_α)` grid, sorted by label then parameters.
pub fn run_full_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    let eta = Transmittance::new(cfg.eta)?;
    let mut points = Vec::new();
    for &n_alpha in &cfg.n_alpha {
        for &tau in &cfg.tau {
            for &omega1 in &cfg.omega1 {
                points.push(PacStateSpec::new(n_alpha, omega1, tau));
            }
        }
    }
    let states: Vec<(PacStateSpec, PacState)> = points.iter().map(|p| Ok((*p, p.state()?))).collect::<Result<_>>()?;
    let mut reports: Vec<OracleReport> = states
        .par_iter()
        .flat_map_iter(|(spec, st)| {
            // Label by the requested grid point, not the recomputed pulse energy.
            run_point(st, cfg.tolerance, eta).into_iter().map(move |mut r| {
                r.n_alpha = spec.n_alpha;
                r.tau = spec.tau;
                r.omega1 = spec.omega1;
                r
            })
        })
        .collect();
    reports.extend(fock_reports(cfg.tolerance));
    reports.sort_by(|a, b| {
        a.label
            .cmp(&b.label)
            .then(a.n_alpha.total_cmp(&b.n_alpha))
            .then(a.tau.total_cmp(&b.tau))
            .then(a.omega1.total_cmp(&b.omega1))
    });
    let failed = reports.iter().filter(|r| !r.pass).count();
    let worst_rel_error = reports
        .iter()
        .map(|r| if r.rel_error.is_nan() { f64::INFINITY } else { r.rel_error })
        .fold(0.0, f64::max);
    Ok(SuiteReport {
        tolerance: cfg.tolerance,
        total: reports.len(),
        failed,
        worst_rel_error,
        reports,
    })
}

/// Pointwise `g²` at a lattice of rule nodes against `f₂/(f₁f₁)` from the operator forms.
pub fn oracle_g2_pointwise(state: &PacState, tol: f64) -> Result<OracleReport> {
    let smp = Samples::whole(state)?;
    // Probe only where the flux is resolvable; far tails underflow in the direct product.
    let peak = (0..smp.len()).map(|i| smp.flux(i)).fold(0.0, f64::max);
    let lit: Vec<usize> = (0..smp.len()).filter(|&i| smp.flux(i) > 1e-12 * peak).collect();
    let stride = (lit.len() / 9).max(1);
    let probes: Vec<(f64, f64)> = lit
        .iter()
        .step_by(stride)
        .flat_map(|&i| {
            let smp = &smp;
            lit.iter().step_by(stride).map(move |&j| {
                let direct = smp.coincidence(i, j) / (smp.flux(i) * smp.flux(j));
                (correlations::pac_g2(state, smp.t[i], smp.t[j]).unwrap_or(f64::NAN), direct)
            })
        })
        .collect();
    Ok(OracleReport::worst("pac.g2.pointwise", probes.into_iter().map(|(c, q)| (c, q, 0.0)), tol, Point::of(state)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn state(n_alpha: f64, omega1: f64, tau: f64) -> PacState {
        PacStateSpec::new(n_alpha, omega1, tau).state().unwrap()
    }

    #[test]
    fn single_photon_probability() {
        let r = oracle_pn(&state(3.0, 1.0, 0.0), 1, 1e-8);
        assert!(r.pass, "{r:?}");
        assert_relative_eq!(r.quadrature, (-3.0f64).exp() / 4.0, max_relative = 1e-8);
    }

    #[test]
    fn two_photon_probability_offset() {
        let st = state(3.0, 1.0, 1.0);
        assert_relative_eq!(st.sigma_sq(), 3.0 * (-1.0f64).exp(), max_relative = 1e-13);
        let r = oracle_pn(&st, 2, 1e-8);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn three_photons() {
        let r = oracle_pn(&state(5.0, 2.0, 1.25), 3, 1e-8);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn bare_photon_has_no_pairs() {
        let r = oracle_pn(&state(0.0, 1.0, 0.0), 2, 1e-8);
        assert_eq!(r.closed_form, 0.0);
        assert_eq!(r.quadrature, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn out_of_range_n_fails() {
        assert!(!oracle_pn(&state(3.0, 1.0, 0.0), 4, 1e-6).pass);
    }

    #[test]
    fn g2_zero_values() {
        let r = oracle_g2zero(&state(3.0, 1.0, 0.0), 1e-7);
        assert!(r.pass, "{r:?}");
        assert_relative_eq!(r.quadrature, 336.0 / 361.0, max_relative = 1e-7);
        let r = oracle_g2zero(&state(3.0, 5.0, 5.0), 1e-6);
        assert!(r.pass && (r.quadrature - 0.9375).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn quadrature_depth() {
        let st = state(3.0, 1.0, 0.0);
        let w = QuadratureWindow::covering(&st, PhaseChoice::Theta);
        let reps = oracle_quadrature(&st, &w, 1e-6);
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        assert!((reps[1].quadrature + 0.15666426716443743).abs() < 1e-6);
    }

    #[test]
    fn partial_window() {
        let st = state(3.0, 1.0, 1.0);
        let w = QuadratureWindow::new(-1.0, 1.5, PhaseChoice::Offset(0.4)).unwrap();
        let reps = oracle_quadrature(&st, &w, 1e-8);
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
    }

    #[test]
    fn lossy_quadrature_halves_depth() {
        let st = state(3.0, 1.0, 0.0);
        let w = QuadratureWindow::covering(&st, PhaseChoice::Theta);
        let reps = oracle_quadrature_lossy(&st, &w, Transmittance::new(0.5).unwrap(), 1e-8);
        assert!(reps.iter().all(|r| r.pass), "{reps:?}");
        assert!((reps[1].quadrature + 0.07833213358221871).abs() < 1e-8);
    }

    #[test]
    fn coherent_and_single_photon_quadratures() {
        let st = state(3.0, 1.0, 0.0);
        let reps = reference_correlations(&st, &Samples::whole(&st).unwrap(), 1e-9, Point::of(&st));
        let find = |l: &str| reps.iter().find(|r| r.label == l).unwrap();
        let coh = find("coherent.quadrature.variance");
        assert!(coh.pass && coh.closed_form == 0.0 && coh.quadrature.abs() < 1e-9, "{coh:?}");
        let g = find("coherent.g2");
        assert!(g.pass && (g.quadrature - 1.0).abs() < 1e-9);
        let fock = find("fock.quadrature.variance");
        assert!(fock.pass);
        assert!((fock.quadrature - (2.0 * std::f64::consts::PI).sqrt() / 2.0).abs() < 1e-6, "{fock:?}");
    }

    #[test]
    fn wrong_convention_misses_fidelity_anchor() {
        let spec = PacStateSpec {
            convention: crate::pulses::GaussianConvention::Wide,
            ..PacStateSpec::new(3.0, 1.0, 1.0)
        };
        let f = crate::fidelity::fidelity(&spec.state().unwrap()).unwrap().value;
        assert!((f - 0.70).abs() > 0.005, "{f}");
    }

    #[test]
    fn pointwise_g2() {
        let r = oracle_g2_pointwise(&state(3.0, 3.0, 3.0), 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn fock_thinning() {
        assert!(fock_reports(1e-12).iter().all(|r| r.pass));
    }

    #[test]
    fn relative_error_fallback() {
        let at = Point { n_alpha: 1.0, tau: 0.0, omega1: 1.0 };
        let r = OracleReport::compare("x", 0.0, 1e-320, 0.0, 1e-6, at);
        assert_eq!(r.rel_error, 1e-320);
        assert!(r.pass);
        let r = OracleReport::compare("x", 1e-3, 1.1e-3, 0.0, 1e-6, at);
        assert!(!r.pass);
    }

    #[test]
    fn small_suite_passes_and_is_sorted() {
        let cfg = SuiteConfig {
            tau: vec![0.0, 2.0],
            omega1: vec![1.0, 3.0],
            n_alpha: vec![3.0],
            ..SuiteConfig::default()
        };
        let rep = run_full_suite(&cfg).unwrap();
        let bad: Vec<_> = rep.reports.iter().filter(|r| !r.pass).collect();
        assert!(bad.is_empty(), "{bad:#?}");
        assert!(rep.labels().len() >= 12);
        let labels: Vec<_> = rep.reports.iter().map(|r| r.label.clone()).collect();
        let mut sorted = labels.clone();
        sorted.sort();
        assert_eq!(labels, sorted);
        let tight = run_full_suite(&SuiteConfig { tolerance: 1e-15, ..cfg }).unwrap();
        assert!(!tight.passed());
    }
}
