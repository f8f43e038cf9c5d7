//! Travelling-wave loss in a waveguide.
//!
//! Lengths are in micrometres throughout. The loss factor after a length `L`
//! has magnitude `exp(-k_i L)`, phase `2 [k_r L - ω₀ L / v_g]` and delays the
//! pulse by `L / v_g`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Magnitude `|η| ∈ [0, 1]` of a loss factor.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Transmittance(f64);

impl Transmittance {
    pub const LOSSLESS: Transmittance = Transmittance(1.0);
    pub const OPAQUE: Transmittance = Transmittance(0.0);

    pub fn new(eta: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&eta) {
            Ok(Self(eta))
        } else {
            Err(Error::param("eta", format!("must lie in [0, 1], got {eta}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_lossless(self) -> bool {
        self.0 == 1.0
    }

    pub fn is_opaque(self) -> bool {
        self.0 == 0.0
    }
}

impl TryFrom<f64> for Transmittance {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Transmittance> for f64 {
    fn from(t: Transmittance) -> f64 {
        t.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossChannel {
    pub label: String,
    /// Imaginary wavenumber at the carrier, 1/μm.
    pub k_i: f64,
    /// Real wavenumber at the carrier, 1/μm. `None` means phase-matched
    /// (`k_r = ω₀ / v_g`), which zeroes the loss-factor phase.
    #[serde(default)]
    pub k_r: Option<f64>,
    /// Group velocity, μm per unit time.
    #[serde(default = "unit_velocity")]
    pub v_g: f64,
}

fn unit_velocity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaResult {
    pub length: f64,
    pub magnitude: Transmittance,
    /// Loss-factor phase φ_η in radians.
    pub phase: f64,
    /// Group delay `L / v_g`.
    pub retarded_shift: f64,
}

impl EtaResult {
    /// No propagation at all.
    pub fn identity() -> Self {
        Self {
            length: 0.0,
            magnitude: Transmittance::LOSSLESS,
            phase: 0.0,
            retarded_shift: 0.0,
        }
    }

    /// A bare transmittance with no delay or phase, for callers that only care about |η|.
    pub fn from_transmittance(eta: Transmittance) -> Self {
        Self {
            magnitude: eta,
            ..Self::identity()
        }
    }
}

impl LossChannel {
    pub fn new(label: impl Into<String>, k_i: f64) -> Result<Self> {
        let ch = Self {
            label: label.into(),
            k_i,
            k_r: None,
            v_g: 1.0,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k_i >= 0.0 && self.k_i.is_finite()) {
            return Err(Error::param("k_i", format!("must be >= 0, got {}", self.k_i)));
        }
        if !(self.v_g > 0.0 && self.v_g.is_finite()) {
            return Err(Error::param("v_g", format!("must be > 0, got {}", self.v_g)));
        }
        Ok(())
    }

    /// Loss factor after `length` μm, for a pulse with carrier `omega0`.
    pub fn eta_of_length(&self, length: f64, omega0: f64) -> Result<EtaResult> {
        if !(length >= 0.0) {
            return Err(Error::param("length", format!("must be >= 0, got {length}")));
        }
        let magnitude = if length.is_infinite() {
            0.0
        } else {
            (-self.k_i * length).exp()
        };
        let phase = match self.k_r {
            Some(k_r) if length.is_finite() => 2.0 * (k_r * length - omega0 * length / self.v_g),
            _ => 0.0,
        };
        Ok(EtaResult {
            length,
            magnitude: Transmittance::new(magnitude)?,
            phase,
            retarded_shift: length / self.v_g,
        })
    }

    /// Length at which `|η|` falls to `target`.
    pub fn length_for_eta(&self, target: f64) -> Result<f64> {
        if target == 0.0 {
            return Err(Error::InfiniteLength);
        }
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::param("target_eta", format!("must lie in (0, 1], got {target}")));
        }
        if target == 1.0 {
            return Ok(0.0);
        }
        if self.k_i == 0.0 {
            return Err(Error::NoLoss(self.label.clone()));
        }
        Ok(-target.ln() / self.k_i)
    }
}

/// Nanowire, stripe and fibre channels with `k_i` of `1/1.2`, `1/15` and `1e-10` per μm.
pub fn presets() -> Vec<LossChannel> {
    vec![
        LossChannel {
            label: "nanowire".into(),
            k_i: 1.0 / 1.2,
            k_r: None,
            v_g: 1.0,
        },
        LossChannel {
            label: "stripe".into(),
            k_i: 1.0 / 15.0,
            k_r: None,
            v_g: 1.0,
        },
        LossChannel {
            label: "fibre".into(),
            k_i: 1e-10,
            k_r: None,
            v_g: 1.0,
        },
    ]
}

/// Preset table, optionally overridden from a TOML file of `[[channel]]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetTable {
    #[serde(rename = "channel")]
    pub channels: Vec<LossChannel>,
}

impl Default for PresetTable {
    fn default() -> Self {
        Self {
            channels: presets(),
        }
    }
}

impl PresetTable {
    pub fn parse(text: &str) -> Result<Self> {
        let table: PresetTable = toml::from_str(text)?;
        for ch in &table.channels {
            ch.validate()?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Built-in presets with entries from `overrides` replacing or extending them by label.
    pub fn with_overrides(mut self, overrides: PresetTable) -> Self {
        for ch in overrides.channels {
            match self.channels.iter_mut().find(|c| c.label == ch.label) {
                Some(slot) => *slot = ch,
                None => self.channels.push(ch),
            }
        }
        self
    }

    pub fn get(&self, label: &str) -> Result<&LossChannel> {
        self.channels
            .iter()
            .find(|c| c.label == label)
            .ok_or_else(|| Error::Unknown {
                kind: "preset",
                name: label.to_string(),
            })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("preset table always serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn preset(label: &str) -> LossChannel {
        PresetTable::default().get(label).unwrap().clone()
    }

    #[test]
    fn nanowire_half_transmission_length() {
        let eta = preset("nanowire").eta_of_length(0.83, 20.0).unwrap();
        assert!((eta.magnitude.value() - 0.5).abs() < 0.005);
    }

    #[test]
    fn zero_length_is_identity() {
        for ch in presets() {
            let eta = ch.eta_of_length(0.0, 20.0).unwrap();
            assert_eq!(eta.magnitude.value(), 1.0);
            assert_eq!(eta.retarded_shift, 0.0);
            assert_eq!(eta.phase, 0.0);
        }
    }

    #[test]
    fn stripe_quarter_transmission() {
        let eta = preset("stripe").eta_of_length(20.79, 20.0).unwrap();
        assert!((eta.magnitude.value() - 0.25).abs() < 0.001);
    }

    #[test]
    fn inverse_lengths() {
        assert!((preset("nanowire").length_for_eta(0.75).unwrap() - 0.345).abs() < 0.001);
        assert_eq!(preset("stripe").length_for_eta(1.0).unwrap(), 0.0);
        let fibre = preset("fibre").length_for_eta(0.5).unwrap();
        assert!((fibre / 1e9 - 6.93).abs() < 0.005, "fibre length {fibre}");
        let fibre = preset("fibre").eta_of_length(2.88e9, 20.0).unwrap();
        assert!((fibre.magnitude.value() - 0.75).abs() < 0.001);
    }

    #[test]
    fn inverse_errors() {
        assert!(matches!(preset("stripe").length_for_eta(0.0), Err(Error::InfiniteLength)));
        let lossless = LossChannel::new("vacuum", 0.0).unwrap();
        assert!(matches!(lossless.length_for_eta(0.5), Err(Error::NoLoss(_))));
        assert!(preset("stripe").length_for_eta(1.5).is_err());
    }

    #[test]
    fn negative_length_rejected() {
        assert!(preset("stripe").eta_of_length(-1.0, 20.0).is_err());
    }

    #[test]
    fn preset_values() {
        assert_relative_eq!(preset("nanowire").k_i, 1.0 / 1.2);
        assert_relative_eq!(preset("stripe").k_i, 1.0 / 15.0);
        assert_relative_eq!(preset("fibre").k_i, 1e-10);
    }

    #[test]
    fn explicit_phase_and_delay() {
        let ch = LossChannel {
            label: "x".into(),
            k_i: 0.1,
            k_r: Some(3.0),
            v_g: 0.5,
        };
        let eta = ch.eta_of_length(2.0, 1.0).unwrap();
        assert_relative_eq!(eta.phase, 2.0 * (3.0 * 2.0 - 1.0 * 2.0 / 0.5));
        assert_relative_eq!(eta.retarded_shift, 4.0);
    }

    #[test]
    fn override_file() {
        let text = r#"
            [[channel]]
            label = "stripe"
            k_i = 0.05
            v_g = 2.0

            [[channel]]
            label = "ridge"
            k_i = 0.001
        "#;
        let table = PresetTable::default().with_overrides(PresetTable::parse(text).unwrap());
        assert_eq!(table.get("stripe").unwrap().k_i, 0.05);
        assert_eq!(table.get("stripe").unwrap().v_g, 2.0);
        assert_eq!(table.get("ridge").unwrap().v_g, 1.0);
        assert_eq!(table.channels.len(), 4);
        assert!(matches!(table.get("nope"), Err(Error::Unknown { .. })));
        let round = PresetTable::parse(&table.to_toml()).unwrap();
        assert_eq!(round, table);
    }

    #[test]
    fn override_file_rejects_bad_values() {
        assert!(PresetTable::parse("[[channel]]\nlabel = \"a\"\nk_i = -1.0\n").is_err());
        assert!(PresetTable::parse("[[channel]]\nlabel = \"a\"\nk_i = 1.0\nv_g = 0.0\n").is_err());
    }

    proptest! {
        #[test]
        fn multiplicative(k in 0.0f64..2.0, l1 in 0.0f64..5.0, l2 in 0.0f64..5.0) {
            let ch = LossChannel::new("p", k).unwrap();
            let a = ch.eta_of_length(l1, 20.0).unwrap().magnitude.value();
            let b = ch.eta_of_length(l2, 20.0).unwrap().magnitude.value();
            let ab = ch.eta_of_length(l1 + l2, 20.0).unwrap().magnitude.value();
            prop_assert!((ab - a * b).abs() <= 1e-14 * ab.max(1e-300) + 1e-300);
        }

        #[test]
        fn strictly_decreasing(k in 1e-3f64..2.0, l in 0.0f64..5.0, dl in 1e-3f64..1.0) {
            let ch = LossChannel::new("p", k).unwrap();
            let a = ch.eta_of_length(l, 20.0).unwrap().magnitude.value();
            let b = ch.eta_of_length(l + dl, 20.0).unwrap().magnitude.value();
            prop_assert!(b < a);
        }

        #[test]
        fn inverse_round_trip(k in 1e-3f64..2.0, target in 1e-6f64..1.0) {
            let ch = LossChannel::new("p", k).unwrap();
            let l = ch.length_for_eta(target).unwrap();
            let back = ch.eta_of_length(l, 20.0).unwrap().magnitude.value();
            prop_assert!((back - target).abs() <= 1e-12 * target);
        }
    }
}
