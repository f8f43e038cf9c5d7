//! Parameter sweeps over one or two axes, written as plot-ready tables.
//!
//! A [`SweepSpec`] is read from TOML. Rows are emitted axis1-major with
//! every float at 12 significant digits, so identical specs give identical
//! bytes.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::correlations::{self, GridSpec};
use crate::error::{Error, Result};
use crate::fidelity;
use crate::photon_statistics as ps;
use crate::propagation::{EtaResult, PresetTable, Transmittance};
use crate::pulses::{GaussianConvention, PacState, PacStateSpec};
use crate::quadratures::{self, PhaseChoice, QuadratureWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Pn,
    MeanVar,
    G2grid,
    G2zero,
    QuadDepth,
    Fidelity,
    /// Loss factor along a waveguide.
    Eta,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Pn => "pn",
            Quantity::MeanVar => "mean_var",
            Quantity::G2grid => "g2grid",
            Quantity::G2zero => "g2zero",
            Quantity::QuadDepth => "quad_depth",
            Quantity::Fidelity => "fidelity",
            Quantity::Eta => "eta",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "tau")]
    Tau,
    #[serde(rename = "omega1")]
    Omega1,
    #[serde(rename = "n_alpha")]
    NAlpha,
    #[serde(rename = "eta")]
    Eta,
    #[serde(rename = "L")]
    Length,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Tau => "tau",
            Axis::Omega1 => "omega1",
            Axis::NAlpha => "n_alpha",
            Axis::Eta => "eta",
            Axis::Length => "L",
        }
    }

    fn unit(self) -> &'static str {
        match self {
            Axis::Tau => "1/Omega",
            Axis::Omega1 => "Omega",
            Axis::NAlpha | Axis::Eta => "dimensionless",
            Axis::Length => "um",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    #[default]
    Pac,
    Coherent,
    Fock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Either an inclusive `start..=stop` range with `step`, or explicit `values`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisRange {
    pub name: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

impl AxisRange {
    pub fn range(name: Axis, start: f64, stop: f64, step: f64) -> Self {
        Self {
            name,
            start: Some(start),
            stop: Some(stop),
            step: Some(step),
            values: None,
        }
    }

    pub fn list(name: Axis, values: Vec<f64>) -> Self {
        Self {
            name,
            start: None,
            stop: None,
            step: None,
            values: Some(values),
        }
    }

    pub fn points(&self) -> Result<Vec<f64>> {
        let axis = self.name.name();
        match (self.values.as_ref(), self.start, self.stop, self.step) {
            (Some(v), None, None, None) => {
                if v.is_empty() {
                    return Err(Error::param(axis, "values must be non-empty"));
                }
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(Error::param(axis, "values must be finite"));
                }
                Ok(v.clone())
            }
            (None, Some(start), Some(stop), Some(step)) => {
                if !(step > 0.0 && step.is_finite()) {
                    return Err(Error::param(axis, format!("step must be > 0, got {step}")));
                }
                if !(start.is_finite() && stop.is_finite() && stop >= start) {
                    return Err(Error::param(axis, format!("need start <= stop, got [{start}, {stop}]")));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                if count > 1_000_000 {
                    return Err(Error::param(axis, "more than 10^6 points"));
                }
                Ok((0..count).map(|i| start + step * i as f64).collect())
            }
            _ => Err(Error::param(axis, "give either values, or start, stop and step")),
        }
    }
}

/// Parameters held fixed across the sweep. Axes override the matching field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedParams {
    pub state: StateKind,
    pub n_alpha: f64,
    pub omega: f64,
    pub omega1: f64,
    pub tau: f64,
    pub omega0: f64,
    pub convention: GaussianConvention,
    /// Photon number of the Fock reference.
    pub m: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Propagation length in μm; needs a preset.
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Largest photon number listed by `pn`.
    pub n_max: u64,
    pub phase: PhaseChoice,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_duration: Option<f64>,
    /// Append the coherent, Fock and out-of-phase reference columns.
    pub references: bool,
    pub grid: GridSpec,
}

impl Default for FixedParams {
    fn default() -> Self {
        let s = PacStateSpec::default();
        Self {
            state: StateKind::Pac,
            n_alpha: s.n_alpha,
            omega: s.omega,
            omega1: s.omega1,
            tau: s.tau,
            omega0: s.omega0,
            convention: s.convention,
            m: 1,
            eta: None,
            length: None,
            n_max: 12,
            phase: PhaseChoice::Theta,
            window_start: None,
            window_duration: None,
            references: false,
            grid: GridSpec::default(),
        }
    }
}

impl FixedParams {
    fn with(&self, axis: Axis, v: f64) -> Self {
        let mut p = self.clone();
        match axis {
            Axis::Tau => p.tau = v,
            Axis::Omega1 => p.omega1 = v,
            Axis::NAlpha => p.n_alpha = v,
            Axis::Eta => p.eta = Some(v),
            Axis::Length => p.length = Some(v),
        }
        p
    }

    pub fn state_spec(&self) -> PacStateSpec {
        PacStateSpec {
            n_alpha: self.n_alpha,
            omega: self.omega,
            omega1: self.omega1,
            tau: self.tau,
            omega0: self.omega0,
            convention: self.convention,
        }
    }

    fn window(&self, state: &PacState, phase: PhaseChoice) -> Result<QuadratureWindow> {
        match (self.window_start, self.window_duration) {
            (None, None) => Ok(QuadratureWindow::covering(state, phase)),
            (Some(start), Some(duration)) => QuadratureWindow::new(start, duration, phase),
            _ => Err(Error::param("window", "give both window_start and window_duration, or neither")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub name: String,
    pub quantity: Quantity,
    #[serde(default)]
    pub axes: Vec<AxisRange>,
    #[serde(default)]
    pub fixed: FixedParams,
    /// Loss channel label for `L`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axes.len() > 2 {
            return Err(Error::param("axes", format!("at most 2, got {}", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].name == self.axes[1].name {
            return Err(Error::param("axes", "the two axes must differ"));
        }
        for a in &self.axes {
            a.points()?;
        }
        let has = |axis: Axis| self.axes.iter().any(|a| a.name == axis);
        let uses_length = has(Axis::Length) || self.fixed.length.is_some();
        let uses_eta = has(Axis::Eta) || self.fixed.eta.is_some();
        if uses_length && uses_eta {
            return Err(Error::param("eta", "give either eta or L, not both"));
        }
        if uses_length && self.preset.is_none() {
            return Err(Error::param("preset", "L needs a loss preset"));
        }
        if self.quantity == Quantity::Eta {
            if self.preset.is_none() {
                return Err(Error::param("preset", "the eta quantity needs a loss preset"));
            }
            if self.axes.iter().any(|a| a.name != Axis::Length) {
                return Err(Error::param("axes", "the eta quantity sweeps L only"));
            }
        }
        if self.quantity == Quantity::Fidelity && self.fixed.state != StateKind::Pac {
            return Err(Error::param("state", "fidelity is defined for the PAC state only"));
        }
        if self.quantity == Quantity::G2grid && self.fixed.state != StateKind::Pac {
            return Err(Error::param("state", "g2grid is defined for the PAC state only"));
        }
        self.fixed.grid.validate()?;
        Ok(())
    }

    fn loss(&self, p: &FixedParams, presets: &PresetTable) -> Result<EtaResult> {
        match (p.eta, p.length) {
            (Some(e), None) => Ok(EtaResult::from_transmittance(Transmittance::new(e)?)),
            (None, Some(l)) => {
                let label = self.preset.as_deref().ok_or_else(|| Error::param("preset", "L needs a loss preset"))?;
                presets.get(label)?.eta_of_length(l, p.omega0)
            }
            (None, None) => Ok(EtaResult::identity()),
            (Some(_), Some(_)) => Err(Error::param("eta", "give either eta or L, not both")),
        }
    }

    fn columns(&self) -> Vec<Column> {
        let mut cols: Vec<Column> = self.axes.iter().map(|a| Column::float(a.name.name(), a.name.unit())).collect();
        let refs = self.fixed.references;
        let dimless = |name: &str| Column::float(name, "dimensionless");
        match self.quantity {
            Quantity::Pn => {
                cols.push(Column::integer("n", "photons"));
                cols.extend([dimless("probability"), Column::float("mean", "photons"), Column::float("variance", "photons^2")]);
            }
            Quantity::MeanVar => {
                cols.extend([Column::float("mean", "photons"), Column::float("variance", "photons^2"), dimless("ratio")]);
                if refs {
                    cols.extend([dimless("ratio_fock"), dimless("ratio_coherent")]);
                }
            }
            Quantity::G2grid => {
                cols.extend([Column::float("t1", "1/Omega"), Column::float("t2", "1/Omega"), dimless("g2")]);
            }
            Quantity::G2zero => {
                cols.push(dimless("g2_zero"));
                if refs {
                    cols.push(dimless("g2_zero_coherent"));
                }
            }
            Quantity::QuadDepth => {
                cols.extend([
                    Column::float("mean", "sqrt(1/Omega)"),
                    Column::float("variance", "1/Omega"),
                    Column::float("depth", "1/Omega"),
                ]);
                if refs {
                    cols.extend([Column::float("depth_fock", "1/Omega"), Column::float("depth_out_of_phase", "1/Omega")]);
                }
            }
            Quantity::Fidelity => cols.push(dimless("fidelity")),
            Quantity::Eta => {
                if self.axes.is_empty() {
                    cols.push(Column::float("L", "um"));
                }
                cols.extend([dimless("eta"), Column::float("phase", "rad"), Column::float("retarded_shift", "1/Omega")]);
            }
        }
        cols
    }

    /// Evaluate every grid point in parallel and assemble the rows in axis1-major order.
    pub fn run(&self, presets: &PresetTable) -> Result<SweepTable> {
        self.validate()?;
        if let Some(label) = &self.preset {
            presets.get(label)?;
        }
        let mut points = vec![(Vec::<f64>::new(), self.fixed.clone())];
        for axis in &self.axes {
            let values = axis.points()?;
            points = points
                .into_iter()
                .flat_map(|(coords, p)| {
                    values.iter().map(move |&v| {
                        let mut c = coords.clone();
                        c.push(v);
                        (c, p.with(axis.name, v))
                    })
                })
                .collect();
        }
        let blocks: Vec<Vec<Vec<f64>>> = points
            .par_iter()
            .map(|(coords, p)| {
                let rows = self.evaluate(p, presets)?;
                Ok(rows
                    .into_iter()
                    .map(|r| coords.iter().copied().chain(r).collect())
                    .collect())
            })
            .collect::<Result<_>>()?;
        Ok(SweepTable {
            name: self.name.clone(),
            quantity: self.quantity,
            columns: self.columns(),
            rows: blocks.into_iter().flatten().collect(),
        })
    }

    /// Value columns for one parameter point, one or more rows.
    fn evaluate(&self, p: &FixedParams, presets: &PresetTable) -> Result<Vec<Vec<f64>>> {
        let loss = self.loss(p, presets)?;
        let eta = loss.magnitude;
        let e = eta.value();
        let state = || p.state_spec().state();
        let refs = p.references;
        let rows = match self.quantity {
            Quantity::Pn => {
                let dist = match p.state {
                    StateKind::Pac => ps::pac_distribution(&state()?, eta),
                    StateKind::Coherent => ps::coherent_distribution(p.n_alpha, eta),
                    StateKind::Fock => ps::fock_distribution(p.m, eta),
                };
                (0..=p.n_max)
                    .map(|n| vec![n as f64, dist.get(n as usize), dist.mean, dist.variance])
                    .collect()
            }
            Quantity::MeanVar => {
                let (mean, var) = match p.state {
                    StateKind::Pac => ps::pac_mean_variance(&state()?, eta),
                    StateKind::Coherent => ps::coherent_mean_variance(p.n_alpha, eta),
                    StateKind::Fock => ps::fock_mean_variance(p.m, eta),
                };
                let mut row = vec![mean, var, var / mean];
                if refs {
                    let (fm, fv) = ps::fock_mean_variance(p.m, eta);
                    let (cm, cv) = ps::coherent_mean_variance(p.n_alpha, eta);
                    row.extend([fv / fm, cv / cm]);
                }
                vec![row]
            }
            Quantity::G2grid => {
                let grid = correlations::g2_grid(&state()?, &p.grid, Some(&loss))?;
                let n = grid.t1_axis.len();
                (0..n)
                    .flat_map(|i| {
                        let grid = &grid;
                        (0..n).map(move |j| vec![grid.t1_axis[i], grid.t2_axis[j], grid.get(i, j)])
                    })
                    .collect()
            }
            Quantity::G2zero => {
                // Loss scales f₂ and f₁² alike, so g²[0] does not depend on η.
                let g = match p.state {
                    StateKind::Pac => correlations::g2_zero(&state()?),
                    StateKind::Coherent => correlations::coherent_g2(),
                    StateKind::Fock => correlations::fock_g2(p.m)?,
                };
                let mut row = vec![g];
                if refs {
                    row.push(correlations::coherent_g2());
                }
                vec![row]
            }
            Quantity::QuadDepth => {
                let st = state()?;
                let window = p.window(&st, p.phase)?;
                let r = match p.state {
                    StateKind::Pac => quadratures::lossy_quadrature(&st, &window, &loss)?,
                    StateKind::Coherent => quadratures::apply_loss(quadratures::coherent_quadrature(&st.coherent, &window)?, &loss),
                    StateKind::Fock => quadratures::apply_loss(fock_in_photon_frame(&st, p.m, &window)?, &loss),
                };
                let mut row = vec![r.mean, r.variance, r.squeezing_depth];
                if refs {
                    let fock = quadratures::apply_loss(fock_in_photon_frame(&st, p.m, &window)?, &loss);
                    let out = p.window(&st, PhaseChoice::ThetaPlusHalfPi)?;
                    let quad = quadratures::lossy_quadrature(&st, &out, &loss)?;
                    row.extend([fock.squeezing_depth, quad.squeezing_depth]);
                }
                vec![row]
            }
            Quantity::Fidelity => vec![vec![fidelity::fidelity_lossy(&state()?, eta)?.value]],
            Quantity::Eta => {
                let mut row = Vec::new();
                if self.axes.is_empty() {
                    row.push(loss.length);
                }
                row.extend([e, loss.phase, loss.retarded_shift]);
                vec![row]
            }
        };
        Ok(rows)
    }
}

/// Fock reference over the PAC window, with the photon pulse read at `t + τ`.
fn fock_in_photon_frame(state: &PacState, m: u64, window: &QuadratureWindow) -> Result<quadratures::QuadratureResult> {
    let shifted = QuadratureWindow {
        start: window.start + state.tau,
        ..*window
    };
    let mut r = quadratures::fock_quadrature_variance(m, &state.photon, &shifted)?;
    r.window_start = window.start;
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub unit: String,
    pub integer: bool,
}

impl Column {
    fn float(name: &str, unit: &str) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
            integer: false,
        }
    }

    fn integer(name: &str, unit: &str) -> Self {
        Self {
            integer: true,
            ..Self::float(name, unit)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub name: String,
    pub quantity: Quantity,
    pub columns: Vec<Column>,
    /// One entry per column; NaN marks a missing value.
    pub rows: Vec<Vec<f64>>,
}

/// 12 significant digits, the form every output uses.
pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

fn cell(col: &Column, v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else if col.integer {
        format!("{}", v as i64)
    } else {
        format_value(v)
    }
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn units_line(&self) -> String {
        let units: Vec<String> = self.columns.iter().map(|c| format!("{} [{}]", c.name, c.unit)).collect();
        format!("# {} ({}): {}", self.name, self.quantity.name(), units.join(", "))
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.units_line();
        out.push('\n');
        let header: Vec<&str> = self.columns.iter().map(|c| c.name.as_str()).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = self.columns.iter().zip(row).map(|(c, &v)| cell(c, v)).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn to_json_value(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                Value::Array(
                    self.columns
                        .iter()
                        .zip(row)
                        .map(|(c, &v)| {
                            if v.is_nan() {
                                Value::Null
                            } else if c.integer {
                                json!(v as i64)
                            } else {
                                // Round through the text form so JSON and CSV agree.
                                json!(format_value(v).parse::<f64>().expect("formatted float parses"))
                            }
                        })
                        .collect(),
                )
            })
            .collect();
        json!({
            "name": self.name,
            "quantity": self.quantity.name(),
            "columns": self.columns,
            "rows": rows,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json_value()).expect("table serialises");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}
