//! Numerical integration engine shared by every module.
//!
//! Three tools live here:
//!
//! * [`integrate`] / [`integrate_2d`]: globally adaptive 21-point Gauss–Kronrod
//!   quadrature for real or complex integrands of one or two time variables.
//! * [`CompositeRule`]: a one-dimensional composite Gauss–Kronrod rule whose
//!   panels are refined until a *set* of envelope functions is resolved. Its
//!   tensor powers integrate products of those envelopes in two or three
//!   dimensions without nested adaptivity.
//! * [`trapezoid`]: for profiles that only exist as samples on a uniform grid.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values that can be integrated: reals and complex numbers.
pub trait Integrand:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn magnitude(self) -> f64;
}

impl Integrand for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Integrand for Complex64 {
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    /// Half-width of the default integration window, in pulse widths (1/bandwidth).
    pub window_halfwidth: f64,
    pub relative_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            window_halfwidth: 10.0,
            relative_tolerance: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

impl IntegrationConfig {
    pub fn with_tolerance(mut self, relative_tolerance: f64) -> Self {
        self.relative_tolerance = relative_tolerance;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::param("relative_tolerance", "must be > 0"));
        }
        if !(self.window_halfwidth > 0.0) {
            return Err(Error::param("window_halfwidth", "must be > 0"));
        }
        if self.max_subdivisions == 0 {
            return Err(Error::param("max_subdivisions", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub subdivisions: usize,
}

// Kronrod abscissae; odd indices are the embedded 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_404_561_010,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    abs_value: f64,
}

/// One Gauss–Kronrod 21 panel: (Kronrod estimate, |K - G|, integral of |f|).
fn gk21<T: Integrand, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> Panel<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::default();
    let mut abs_sum = fc.magnitude() * WGK[10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        let pair = f1 + f2;
        kronrod = kronrod + pair * WGK[j];
        abs_sum += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = (kronrod - gauss).magnitude() * half.abs();
    Panel {
        a,
        b,
        value,
        error,
        abs_value: abs_sum * half.abs(),
    }
}

struct ByError<T>(Panel<T>);

impl<T> PartialEq for ByError<T> {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}
impl<T> Eq for ByError<T> {}
impl<T> PartialOrd for ByError<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for ByError<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

/// Globally adaptive Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Converged when the summed panel error is below
/// `max(relative_tolerance * |I|, 50 eps * ∫|f|)`; the second term lets
/// integrals that cancel to zero terminate.
pub fn integrate<T, F>(f: F, a: f64, b: f64, cfg: &IntegrationConfig) -> Result<Estimate<T>>
where
    T: Integrand,
    F: Fn(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::param("window", "integration limits must be finite"));
    }
    if a == b {
        return Ok(Estimate {
            value: T::default(),
            error: 0.0,
            subdivisions: 0,
        });
    }
    if a > b {
        let est = integrate(f, b, a, cfg)?;
        return Ok(Estimate {
            value: est.value * -1.0,
            ..est
        });
    }

    let first = gk21(&f, a, b);
    if !first.value.magnitude().is_finite() {
        return Err(Error::param("integrand", "non-finite value inside the window"));
    }
    let mut heap = BinaryHeap::new();
    heap.push(ByError(first));
    let mut subdivisions = 1;

    loop {
        let (value, error, abs_value) = heap.iter().fold(
            (T::default(), 0.0, 0.0),
            |(v, e, s), p| (v + p.0.value, e + p.0.error, s + p.0.abs_value),
        );
        let target = (cfg.relative_tolerance * value.magnitude()).max(50.0 * f64::EPSILON * abs_value);
        if error <= target {
            return Ok(Estimate {
                value,
                error,
                subdivisions,
            });
        }
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Convergence {
                estimate: value.magnitude(),
                error_bound: error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap is never empty").0;
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::Convergence {
                estimate: value.magnitude(),
                error_bound: error,
                subdivisions,
            });
        }
        heap.push(ByError(gk21(&f, worst.a, mid)));
        heap.push(ByError(gk21(&f, mid, worst.b)));
        subdivisions += 1;
    }
}

/// Iterated adaptive quadrature over the rectangle `x × y`.
pub fn integrate_2d<T, F>(
    f: F,
    x: (f64, f64),
    y: (f64, f64),
    cfg: &IntegrationConfig,
) -> Result<Estimate<T>>
where
    T: Integrand,
    F: Fn(f64, f64) -> T,
{
    let inner_failure = std::cell::RefCell::new(None);
    let inner_error = std::cell::Cell::new(0.0_f64);
    let outer = integrate(
        |xv| match integrate(|yv| f(xv, yv), y.0, y.1, cfg) {
            Ok(est) => {
                inner_error.set(inner_error.get().max(est.error));
                est.value
            }
            Err(e) => {
                inner_failure.borrow_mut().get_or_insert(e);
                T::default()
            }
        },
        x.0,
        x.1,
        cfg,
    );
    if let Some(e) = inner_failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    Ok(Estimate {
        error: outer.error + inner_error.get() * (x.1 - x.0).abs(),
        ..outer
    })
}

/// Trapezoidal rule over uniformly spaced samples.
pub fn trapezoid<T: Integrand>(values: &[T], step: f64) -> T {
    match values.len() {
        0 | 1 => T::default(),
        n => {
            let interior = values[1..n - 1]
                .iter()
                .fold(T::default(), |acc, &v| acc + v);
            (interior + (values[0] + values[n - 1]) * 0.5) * step
        }
    }
}

/// Gauss–Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut slope = 1.0;
        for _ in 0..100 {
            // three-term recurrence: p1 = P_n(z), p2 = P_{n-1}(z)
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * z * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            slope = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let step = p1 / slope;
            z -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * slope * slope);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// A fixed composite quadrature rule on one axis.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Largest relative panel error seen over all envelopes when the rule was built.
    pub relative_error: f64,
}

impl CompositeRule {
    /// Builds a composite 21-point rule on `[a, b]`, bisecting panels until every
    /// envelope in `envelopes` is integrated to `relative_tolerance` of its total.
    ///
    /// Nodes where every envelope is below `1e-30` of its peak are dropped.
    pub fn adapted(
        a: f64,
        b: f64,
        envelopes: &[&dyn Fn(f64) -> f64],
        relative_tolerance: f64,
        max_panels: usize,
    ) -> Result<Self> {
        if !(a < b) {
            return Err(Error::param("window", "rule needs a < b"));
        }
        const SEED_PANELS: usize = 8;
        let width = b - a;
        let seed: Vec<(f64, f64)> = (0..SEED_PANELS)
            .map(|i| {
                (
                    a + width * i as f64 / SEED_PANELS as f64,
                    a + width * (i + 1) as f64 / SEED_PANELS as f64,
                )
            })
            .collect();
        let totals: Vec<f64> = envelopes
            .iter()
            .map(|f| seed.iter().map(|&(l, r)| gk21(f, l, r).abs_value).sum::<f64>())
            .collect();

        let mut accepted = Vec::new();
        let mut pending = seed;
        let mut worst = 0.0_f64;
        while let Some((l, r)) = pending.pop() {
            let share = (r - l) / width;
            let mut ok = true;
            let mut local = 0.0_f64;
            for (f, &total) in envelopes.iter().zip(&totals) {
                if total <= 0.0 {
                    continue;
                }
                let p = gk21(f, l, r);
                let rel = p.error / total;
                local = local.max(rel / share);
                if p.error > relative_tolerance * total * share.max(1e-3) {
                    ok = false;
                }
            }
            if ok {
                worst = worst.max(local * share);
                accepted.push((l, r));
            } else {
                if accepted.len() + pending.len() > max_panels {
                    return Err(Error::Convergence {
                        estimate: totals.iter().cloned().fold(0.0, f64::max),
                        error_bound: relative_tolerance,
                        subdivisions: max_panels,
                    });
                }
                let m = 0.5 * (l + r);
                pending.push((l, m));
                pending.push((m, r));
            }
        }
        accepted.sort_by(|x, y| x.0.total_cmp(&y.0));

        let mut nodes = Vec::with_capacity(accepted.len() * 21);
        let mut weights = Vec::with_capacity(accepted.len() * 21);
        for (l, r) in accepted {
            let c = 0.5 * (l + r);
            let h = 0.5 * (r - l);
            for j in 0..10 {
                nodes.push(c - h * XGK[j]);
                weights.push(h * WGK[j]);
            }
            nodes.push(c);
            weights.push(h * WGK[10]);
            for j in (0..10).rev() {
                nodes.push(c + h * XGK[j]);
                weights.push(h * WGK[j]);
            }
        }

        let peaks: Vec<f64> = envelopes
            .iter()
            .map(|f| nodes.iter().map(|&t| f(t).abs()).fold(0.0, f64::max))
            .collect();
        let keep: Vec<bool> = nodes
            .iter()
            .map(|&t| {
                envelopes
                    .iter()
                    .zip(&peaks)
                    .any(|(f, &p)| f(t).abs() > 1e-30 * p)
            })
            .collect();
        let (nodes, weights) = nodes
            .into_iter()
            .zip(weights)
            .zip(keep)
            .filter_map(|(nw, k)| k.then_some(nw))
            .unzip();

        Ok(Self {
            nodes,
            weights,
            relative_error: worst,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<T: Integrand>(&self, f: impl Fn(f64) -> T) -> T {
        self.nodes
            .iter()
            .zip(&self.weights)
            .fold(T::default(), |acc, (&t, &w)| acc + f(t) * w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kronrod_and_gauss_weights_sum_to_two() {
        let k: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert_relative_eq!(k, 2.0, epsilon = 1e-15);
        assert_relative_eq!(g, 2.0, epsilon = 1e-15);
    }

    #[test]
    fn single_panel_exact_for_polynomials() {
        for deg in 0..=31 {
            let p = gk21(&|x: f64| x.powi(deg), 0.0, 1.0);
            assert_relative_eq!(p.value, 1.0 / (deg as f64 + 1.0), max_relative = 1e-14);
            if deg <= 19 {
                assert!(p.error < 1e-15, "degree {deg}: gauss part not exact");
            }
        }
    }

    #[test]
    fn embedded_gauss_nodes_match_newton_nodes() {
        let (x, w) = gauss_legendre(10);
        for j in 0..5 {
            assert_relative_eq!(x[9 - j], XGK[2 * j + 1], epsilon = 1e-15);
            assert_relative_eq!(w[9 - j], WG[j], epsilon = 1e-14);
        }
    }

    #[test]
    fn gaussian_over_window() {
        let est = integrate(|t: f64| (-t * t).exp(), -10.0, 10.0, &IntegrationConfig::default()).unwrap();
        assert_relative_eq!(est.value, std::f64::consts::PI.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn odd_function_integrates_to_zero() {
        let est = integrate(
            |t: f64| t * (-t * t).exp() * (3.0 * t).cos(),
            -8.0,
            8.0,
            &IntegrationConfig::default(),
        )
        .unwrap();
        assert!(est.value.abs() < 1e-14);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let cfg = IntegrationConfig::default();
        let fwd = integrate(|t: f64| t.exp(), 0.0, 1.0, &cfg).unwrap().value;
        let back = integrate(|t: f64| t.exp(), 1.0, 0.0, &cfg).unwrap().value;
        assert_relative_eq!(fwd, -back);
    }

    #[test]
    fn complex_integrand() {
        // ∫ e^{-t²} e^{i t} dt = √π e^{-1/4}
        let est = integrate(
            |t: f64| Complex64::new(0.0, t).exp() * (-t * t).exp(),
            -12.0,
            12.0,
            &IntegrationConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(est.value.re, std::f64::consts::PI.sqrt() * (-0.25f64).exp(), max_relative = 1e-12);
        assert!(est.value.im.abs() < 1e-14);
    }

    #[test]
    fn non_convergence_reports_best_estimate() {
        let cfg = IntegrationConfig {
            max_subdivisions: 3,
            ..Default::default()
        };
        let err = integrate(|t: f64| (50.0 * t).sin().abs(), 0.0, 10.0, &cfg).unwrap_err();
        match err {
            Error::Convergence {
                estimate,
                error_bound,
                subdivisions,
            } => {
                assert_eq!(subdivisions, 3);
                assert!(estimate > 0.0 && error_bound > 0.0);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn two_dimensional_gaussian() {
        let est = integrate_2d(
            |x: f64, y: f64| (-x * x - 2.0 * y * y).exp(),
            (-10.0, 10.0),
            (-10.0, 10.0),
            &IntegrationConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(est.value, std::f64::consts::PI / 2f64.sqrt(), max_relative = 1e-11);
    }

    #[test]
    fn deterministic() {
        let cfg = IntegrationConfig::default();
        let f = |t: f64| (-(t - 0.3).powi(2)).exp() * (1.0 + t.sin());
        let a = integrate(f, -9.0, 11.0, &cfg).unwrap();
        let b = integrate(f, -9.0, 11.0, &cfg).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn trapezoid_matches_linear_exactly() {
        let v: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * 0.1 + 1.0).collect();
        assert_relative_eq!(trapezoid(&v, 0.1), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn composite_rule_resolves_narrow_and_wide_envelopes() {
        let narrow = |t: f64| (-25.0 * (t + 3.0).powi(2)).exp();
        let wide = |t: f64| (-0.04 * t * t).exp();
        let rule = CompositeRule::adapted(-60.0, 60.0, &[&narrow, &wide], 1e-12, 4096).unwrap();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(rule.integrate(narrow), (pi / 25.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(rule.integrate(wide), (pi / 0.04).sqrt(), max_relative = 1e-12);
        // products of envelopes ride on the same nodes
        let prod = rule.integrate(|t| narrow(t) * wide(t));
        let exact = (pi / 25.04).sqrt() * (-25.0 * 0.04 * 9.0 / 25.04f64).exp();
        assert_relative_eq!(prod, exact, max_relative = 1e-10);
    }
}
