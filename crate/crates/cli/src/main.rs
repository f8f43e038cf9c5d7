use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{debug, info};

use pacstate::correlations::{self, GridSpec};
use pacstate::fidelity;
use pacstate::oracle::{self, SuiteConfig};
use pacstate::quadratures::{self, PhaseChoice, QuadratureWindow};
use pacstate::sweep::{format_value, Axis, AxisRange, FixedParams, Format, Quantity, StateKind, SweepSpec};
use pacstate::{EtaResult, GaussianConvention, PacState, PacStateSpec, PresetTable, Transmittance};

const THREADS_ENV: &str = "PACSTATE_THREADS";

#[derive(Parser, Debug)]
#[command(name = "pacstate", version, about = "Photon-added coherent state pulses: statistics, correlations, quadratures and fidelity")]
struct Cli {
    /// TOML file of [[channel]] tables that replace or extend the built-in loss presets.
    #[arg(long, global = true, value_name = "FILE")]
    presets: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Photon-number distribution with mean and variance, at one or more loss levels.
    Pnum(PnumArgs),
    /// Tabulate a quantity over one or two parameter axes.
    Sweep(SweepArgs),
    /// g2(t1, t2) on a square time grid.
    G2grid(G2gridArgs),
    /// Quadrature mean and variance over a window.
    Quad(QuadArgs),
    /// Fidelity against the ideal PAC state.
    Fidelity(FidelityArgs),
    /// Check every closed form against brute-force quadrature; exits 1 on any failure.
    Oracle(OracleArgs),
    /// List loss presets with the lengths giving eta = 0.75, 0.5 and 0.25.
    Presets(PresetsArgs),
}

#[derive(Args, Debug, Clone)]
struct StateArgs {
    /// Mean photon number of the coherent pulse.
    #[arg(long = "nalpha", default_value_t = 3.0)]
    n_alpha: f64,
    /// Photon offset in units of 1/Omega.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,
    /// Photon bandwidth in units of Omega.
    #[arg(long, default_value_t = 1.0)]
    omega1: f64,
    /// Coherent pulse bandwidth.
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    /// Central frequency.
    #[arg(long, default_value_t = 20.0)]
    omega0: f64,
    #[arg(long, value_enum, default_value_t = ConventionArg::Standard)]
    convention: ConventionArg,
}

impl StateArgs {
    fn spec(&self) -> PacStateSpec {
        PacStateSpec {
            n_alpha: self.n_alpha,
            omega: self.omega,
            omega1: self.omega1,
            tau: self.tau,
            omega0: self.omega0,
            convention: self.convention.into(),
        }
    }

    fn state(&self) -> Result<PacState> {
        Ok(self.spec().state()?)
    }

    fn fixed(&self) -> FixedParams {
        FixedParams {
            n_alpha: self.n_alpha,
            omega: self.omega,
            omega1: self.omega1,
            tau: self.tau,
            omega0: self.omega0,
            convention: self.convention.into(),
            ..FixedParams::default()
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ConventionArg {
    /// Envelope exp(-Omega^2 t^2).
    Standard,
    /// Envelope exp(-Omega^2 t^2 / 2).
    Wide,
}

impl From<ConventionArg> for GaussianConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Standard => GaussianConvention::Standard,
            ConventionArg::Wide => GaussianConvention::Wide,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct LossArgs {
    /// Loss factor |eta| in [0, 1].
    #[arg(long, conflicts_with_all = ["preset", "length"])]
    eta: Option<f64>,
    /// Loss preset label (see `presets`).
    #[arg(long, requires = "length")]
    preset: Option<String>,
    /// Propagation length in um.
    #[arg(long = "L", requires = "preset")]
    length: Option<f64>,
}

impl LossArgs {
    fn resolve(&self, table: &PresetTable, omega0: f64) -> Result<EtaResult> {
        Ok(match (self.eta, &self.preset, self.length) {
            (Some(e), _, _) => EtaResult::from_transmittance(Transmittance::new(e)?),
            (None, Some(p), Some(l)) => table.get(p)?.eta_of_length(l, omega0)?,
            _ => EtaResult::identity(),
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write here instead of stdout.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum StateArg {
    Pac,
    Coherent,
    Fock,
}

impl From<StateArg> for StateKind {
    fn from(s: StateArg) -> Self {
        match s {
            StateArg::Pac => StateKind::Pac,
            StateArg::Coherent => StateKind::Coherent,
            StateArg::Fock => StateKind::Fock,
        }
    }
}

#[derive(Args, Debug)]
struct PnumArgs {
    #[arg(long, value_enum, default_value_t = StateArg::Pac)]
    state: StateArg,
    #[command(flatten)]
    pulse: StateArgs,
    /// Photon number of the Fock state.
    #[arg(long, default_value_t = 1)]
    m: u64,
    /// Loss factors, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["preset", "length"])]
    eta: Vec<f64>,
    #[arg(long, requires = "length")]
    preset: Option<String>,
    /// Propagation lengths in um, comma separated.
    #[arg(long = "L", value_delimiter = ',', requires = "preset")]
    length: Vec<f64>,
    /// Largest photon number listed.
    #[arg(long, default_value_t = 12)]
    n_max: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    /// Sweep config (TOML); see scenarios/ for examples.
    #[arg(long, value_name = "FILE", conflicts_with_all = ["quantity", "axis", "set"], required_unless_present = "quantity")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    quantity: Option<QuantityArg>,
    /// `name=start:stop:step` or `name=v1,v2,...`; name is one of tau, omega1, n_alpha, eta, L. At most two.
    #[arg(long, value_name = "AXIS")]
    axis: Vec<String>,
    /// Fixed parameter as `key=value`, e.g. `n_alpha=3`, `state=fock`, `grid.resolution=51`.
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Loss preset for L axes.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
#[value(rename_all = "snake_case")]
enum QuantityArg {
    Pn,
    MeanVar,
    G2grid,
    G2zero,
    QuadDepth,
    Fidelity,
    Eta,
}

impl From<QuantityArg> for Quantity {
    fn from(q: QuantityArg) -> Self {
        match q {
            QuantityArg::Pn => Quantity::Pn,
            QuantityArg::MeanVar => Quantity::MeanVar,
            QuantityArg::G2grid => Quantity::G2grid,
            QuantityArg::G2zero => Quantity::G2zero,
            QuantityArg::QuadDepth => Quantity::QuadDepth,
            QuantityArg::Fidelity => Quantity::Fidelity,
            QuantityArg::Eta => Quantity::Eta,
        }
    }
}

#[derive(Args, Debug)]
struct G2gridArgs {
    #[command(flatten)]
    pulse: StateArgs,
    #[command(flatten)]
    loss: LossArgs,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    t_min: f64,
    #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
    t_max: f64,
    #[arg(long, default_value_t = 201)]
    resolution: usize,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct QuadArgs {
    #[command(flatten)]
    pulse: StateArgs,
    #[command(flatten)]
    loss: LossArgs,
    /// `theta`, `theta+pi/2`, or a numeric offset c for phi = theta + c.
    #[arg(long, default_value = "theta", allow_hyphen_values = true)]
    phase: String,
    /// Window start in 1/Omega; defaults to a window covering both pulses.
    #[arg(long, requires = "duration", allow_hyphen_values = true)]
    window_start: Option<f64>,
    /// Window length T in 1/Omega.
    #[arg(long, requires = "window_start")]
    duration: Option<f64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct FidelityArgs {
    #[command(flatten)]
    pulse: StateArgs,
    #[command(flatten)]
    loss: LossArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Relative tolerance for every comparison.
    #[arg(long, default_value_t = oracle::DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Offsets tau, comma separated.
    #[arg(long, value_delimiter = ',')]
    tau: Vec<f64>,
    /// Photon bandwidths, comma separated.
    #[arg(long, value_delimiter = ',')]
    omega1: Vec<f64>,
    /// Coherent photon numbers, comma separated.
    #[arg(long = "nalpha", value_delimiter = ',')]
    n_alpha: Vec<f64>,
    /// Loss factor for the lossy comparisons.
    #[arg(long, default_value_t = 0.5)]
    eta: f64,
    /// JSON report path; stdout when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PresetsArgs {
    /// Print the table as TOML instead of CSV.
    #[arg(long)]
    toml: bool,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        None => match std::io::stdout().lock().write_all(text.as_bytes()) {
            // A closed pipe (e.g. `| head`) is not an error.
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
            other => other?,
        },
    }
    Ok(())
}

fn load_presets(path: Option<&Path>) -> Result<PresetTable> {
    let table = PresetTable::default();
    Ok(match path {
        Some(p) => table.with_overrides(PresetTable::load(p).with_context(|| format!("loading presets from {}", p.display()))?),
        None => table,
    })
}

fn parse_phase(s: &str) -> Result<PhaseChoice> {
    Ok(match s {
        "theta" => PhaseChoice::Theta,
        "theta+pi/2" => PhaseChoice::ThetaPlusHalfPi,
        other => PhaseChoice::Offset(other.parse().with_context(|| format!("bad phase {other:?}"))?),
    })
}

fn parse_axis(s: &str) -> Result<AxisRange> {
    let (name, range) = s.split_once('=').with_context(|| format!("axis {s:?} is not name=range"))?;
    let axis = match name {
        "tau" => Axis::Tau,
        "omega1" => Axis::Omega1,
        "n_alpha" => Axis::NAlpha,
        "eta" => Axis::Eta,
        "L" => Axis::Length,
        other => bail!("unknown axis {other:?}; expected tau, omega1, n_alpha, eta or L"),
    };
    let nums = |sep: char| -> Result<Vec<f64>> {
        range
            .split(sep)
            .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad number {v:?} in axis {name}")))
            .collect()
    };
    if range.contains(':') {
        match nums(':')?.as_slice() {
            [a, b, c] => Ok(AxisRange::range(axis, *a, *b, *c)),
            _ => bail!("axis {name}: expected start:stop:step"),
        }
    } else {
        Ok(AxisRange::list(axis, nums(',')?))
    }
}

/// `key=value` as a TOML line; bare words become strings.
fn set_line(s: &str) -> Result<String> {
    let (key, value) = s.split_once('=').with_context(|| format!("--set {s:?} is not key=value"))?;
    let value = value.trim();
    let literal = if format!("v = {value}").parse::<toml::Table>().is_ok() {
        value.to_string()
    } else {
        format!("{value:?}")
    };
    Ok(format!("{} = {literal}", key.trim()))
}

fn sweep_spec(args: &SweepArgs) -> Result<SweepSpec> {
    let mut spec = match (&args.config, args.quantity) {
        (Some(path), _) => SweepSpec::load(path).with_context(|| format!("reading {}", path.display()))?,
        (None, Some(q)) => {
            let mut text = format!("name = \"cli\"\nquantity = \"{}\"\n", Quantity::from(q).name());
            if let Some(p) = &args.preset {
                text.push_str(&format!("preset = {p:?}\n"));
            }
            text.push_str("[fixed]\n");
            for s in &args.set {
                text.push_str(&set_line(s)?);
                text.push('\n');
            }
            debug!("sweep spec:\n{text}");
            let mut spec = SweepSpec::parse(&text)?;
            spec.axes = args.axis.iter().map(|a| parse_axis(a)).collect::<Result<_>>()?;
            spec
        }
        (None, None) => bail!("give --config or --quantity"),
    };
    if args.config.is_some() {
        if let Some(p) = &args.preset {
            spec.preset = Some(p.clone());
        }
    }
    if let Some(f) = args.format {
        spec.format = f.into();
    }
    spec.validate()?;
    Ok(spec)
}

fn cmd_pnum(args: &PnumArgs, table: &PresetTable) -> Result<()> {
    let axis = match &args.preset {
        Some(_) => AxisRange::list(Axis::Length, args.length.clone()),
        None if args.eta.is_empty() => AxisRange::list(Axis::Eta, vec![1.0, 0.75, 0.5, 0.25, 0.0]),
        None => AxisRange::list(Axis::Eta, args.eta.clone()),
    };
    let spec = SweepSpec {
        name: "pnum".into(),
        quantity: Quantity::Pn,
        axes: vec![axis],
        fixed: FixedParams {
            state: args.state.into(),
            m: args.m,
            n_max: args.n_max,
            ..args.pulse.fixed()
        },
        preset: args.preset.clone(),
        format: args.output.format.into(),
        output: None,
    };
    let result = spec.run(table)?;
    emit(args.output.out.as_deref(), &result.render(spec.format))
}

fn cmd_sweep(args: &SweepArgs, table: &PresetTable) -> Result<()> {
    let spec = sweep_spec(args)?;
    let result = spec.run(table)?;
    info!("{}: {} rows", spec.name, result.rows.len());
    let out = args.out.as_deref().or(spec.output.as_deref());
    emit(out, &result.render(spec.format))
}

fn cmd_g2grid(args: &G2gridArgs, table: &PresetTable) -> Result<()> {
    let state = args.pulse.state()?;
    let loss = args.loss.resolve(table, args.pulse.omega0)?;
    let grid = GridSpec {
        t_min: args.t_min,
        t_max: args.t_max,
        resolution: args.resolution,
    };
    let g = correlations::g2_grid(&state, &grid, Some(&loss))?;
    let text = match args.output.format {
        FormatArg::Csv => g.to_csv(),
        FormatArg::Json => serde_json::to_string(&g)? + "\n",
    };
    emit(args.output.out.as_deref(), &text)
}

fn cmd_quad(args: &QuadArgs, table: &PresetTable) -> Result<()> {
    let state = args.pulse.state()?;
    let loss = args.loss.resolve(table, args.pulse.omega0)?;
    let phase = parse_phase(&args.phase)?;
    let window = match (args.window_start, args.duration) {
        (Some(s), Some(d)) => QuadratureWindow::new(s, d, phase)?,
        _ => QuadratureWindow::covering(&state, phase),
    };
    let r = quadratures::lossy_quadrature(&state, &window, &loss)?;
    let text = match args.output.format {
        FormatArg::Json => serde_json::to_string_pretty(&r)? + "\n",
        FormatArg::Csv => {
            let cells = [r.mean, r.variance, r.baseline, r.squeezing_depth, r.eta_used, r.window_start, r.duration, r.phase_offset];
            format!(
                "# times in 1/Omega; mean in sqrt(1/Omega); variance, baseline and depth in 1/Omega; phase in rad\n\
                 mean,variance,baseline,squeezing_depth,eta,window_start,duration,phase_offset\n{}\n",
                cells.map(format_value).join(",")
            )
        }
    };
    emit(args.output.out.as_deref(), &text)
}

fn cmd_fidelity(args: &FidelityArgs, table: &PresetTable) -> Result<()> {
    let state = args.pulse.state()?;
    let loss = args.loss.resolve(table, args.pulse.omega0)?;
    let f = fidelity::fidelity_lossy(&state, loss.magnitude)?;
    let text = match args.output.format {
        FormatArg::Json => serde_json::to_string_pretty(&f)? + "\n",
        FormatArg::Csv => format!(
            "# all columns dimensionless\nfidelity,eta,sigma_sq,norm,n_alpha\n{}\n",
            [f.value, f.eta_used, f.sigma_sq, f.norm, f.n_alpha].map(format_value).join(",")
        ),
    };
    emit(args.output.out.as_deref(), &text)
}

fn cmd_oracle(args: &OracleArgs) -> Result<bool> {
    let defaults = SuiteConfig::default();
    let pick = |given: &Vec<f64>, default: Vec<f64>| if given.is_empty() { default } else { given.clone() };
    let cfg = SuiteConfig {
        tau: pick(&args.tau, defaults.tau.clone()),
        omega1: pick(&args.omega1, defaults.omega1.clone()),
        n_alpha: pick(&args.n_alpha, defaults.n_alpha.clone()),
        eta: args.eta,
        tolerance: args.tolerance,
    };
    let report = oracle::run_full_suite(&cfg)?;
    emit(args.out.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    eprintln!(
        "oracle: {}/{} passed at tolerance {:e}; worst relative error {:e}",
        report.total - report.failed,
        report.total,
        report.tolerance,
        report.worst_rel_error
    );
    for r in report.reports.iter().filter(|r| !r.pass).take(20) {
        eprintln!(
            "  FAIL {} (n_alpha={}, tau={}, omega1={}): closed {:e}, quadrature {:e}, rel {:e}",
            r.label, r.n_alpha, r.tau, r.omega1, r.closed_form, r.quadrature, r.rel_error
        );
    }
    Ok(report.passed())
}

fn cmd_presets(args: &PresetsArgs, table: &PresetTable) -> Result<()> {
    if args.toml {
        return emit(None, &table.to_toml());
    }
    let mut text = String::from("# k_i and k_r in 1/um; v_g in um per (1/Omega); lengths in um\nlabel,k_i,k_r,v_g,L_eta_0.75,L_eta_0.5,L_eta_0.25\n");
    for ch in &table.channels {
        let lengths: Vec<String> = [0.75, 0.5, 0.25]
            .iter()
            .map(|&e| ch.length_for_eta(e).map(format_value).unwrap_or_default())
            .collect();
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            ch.label,
            format_value(ch.k_i),
            ch.k_r.map(format_value).unwrap_or_default(),
            format_value(ch.v_g),
            lengths.join(",")
        ));
    }
    emit(None, &text)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().with_context(|| format!("{THREADS_ENV}={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        debug!("using {n} threads");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    configure_threads()?;
    let table = load_presets(cli.presets.as_deref())?;
    match &cli.command {
        Command::Pnum(a) => cmd_pnum(a, &table)?,
        Command::Sweep(a) => cmd_sweep(a, &table)?,
        Command::G2grid(a) => cmd_g2grid(a, &table)?,
        Command::Quad(a) => cmd_quad(a, &table)?,
        Command::Fidelity(a) => cmd_fidelity(a, &table)?,
        Command::Oracle(a) => return cmd_oracle(a),
        Command::Presets(a) => cmd_presets(a, &table)?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
