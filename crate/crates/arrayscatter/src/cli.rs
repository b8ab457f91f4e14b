//! Command-line front end: TOML run configurations, parameter sweeps and
//! deterministic CSV/JSON tables.

use crate::cross_section::{cross_sections, CrossSectionOptions, IncomingConfig};
use crate::error::Error;
use crate::lattice::{ArrayConfig, Classification, Dimension, Dispersion, LatticeMomentum};
use crate::oracle::{
    appendix_c_check, dispersion_report, dos_histogram, dos_report, propagator_report, HistogramOptions,
    OracleReport,
};
use crate::propagator::{ChannelIndex, PairPropagator, PropagatorOptions, Side};
use crate::single_excitation::{atomic_amplitude, lorentzian, transmission};
use crate::two_excitation::{Fig4Grid, OnShellSMatrix, TwoPhotonState};
use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "arrayscatter", version, about = "Two-excitation scattering in subwavelength atomic arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file (standard output when absent).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Relative quadrature tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Print the output columns and configuration keys, then exit.
    #[arg(long, global = true)]
    pub schema: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Δ(p) and Γ(p) over a momentum grid.
    Dispersion,
    /// L(ω, P) and its channel decomposition.
    Propagator,
    /// On-shell channel S-matrix.
    Smatrix,
    /// Partial and total two-excitation cross sections.
    CrossSection,
    /// Two-photon wavefunction on a (q, Δ_ph) grid.
    TwoPhotonWf,
    /// Single-photon transmission and atomic amplitude.
    Transmission,
    /// Brute-force validation reports.
    Oracle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Dispersion => "dispersion",
            Command::Propagator => "propagator",
            Command::Smatrix => "smatrix",
            Command::CrossSection => "cross-section",
            Command::TwoPhotonWf => "two-photon-wf",
            Command::Transmission => "transmission",
            Command::Oracle => "oracle",
        }
    }

    fn sweep_variables(self) -> &'static [&'static str] {
        match self {
            Command::Dispersion => &["p_x", "p_y"],
            Command::Propagator => &["energy", "eta", "total_x", "total_y"],
            Command::Smatrix => &["energy", "q_x", "q_y", "total_x", "total_y"],
            Command::CrossSection => &["q_x", "q_y", "total_x", "total_y", "photon_energy"],
            Command::TwoPhotonWf | Command::Oracle => &[],
            Command::Transmission => &["energy", "p_x", "p_y"],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub variable: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    fn validate(&self) -> Result<(), Error> {
        if self.count < 1 {
            return Err(Error::InvalidConfig(format!("sweep over {} needs count ≥ 1", self.variable)));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return Err(Error::InvalidConfig(format!("sweep over {} has non-finite bounds", self.variable)));
        }
        if self.spacing == Spacing::Log && !(self.start * self.stop > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "log sweep over {} needs bounds of one sign",
                self.variable
            )));
        }
        Ok(())
    }

    /// Sample values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|k| {
                let t = k as f64 / n;
                match self.spacing {
                    Spacing::Linear => self.start + (self.stop - self.start) * t,
                    Spacing::Log => {
                        let s = self.start.signum();
                        s * (self.start.abs().ln() + (self.stop.abs().ln() - self.start.abs().ln()) * t).exp()
                    }
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Format,
    /// Significant decimal digits of every number.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            path: None,
            format: Format::Csv,
            precision: 12,
        }
    }
}

/// The sweep point held fixed unless an axis varies a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PointConfig {
    /// Total pair momentum P.
    pub total: [f64; 2],
    /// Single-excitation momentum p.
    pub momentum: [f64; 2],
    /// Relative momentum q of an incoming dark pair.
    pub relative: Option<[f64; 2]>,
    /// Energy; for pair commands it defaults to Δ⁽²⁾(P, q).
    pub energy: Option<f64>,
    /// Imaginary part of ω for the propagator.
    pub eta: f64,
    pub side: Side,
}

impl Default for PointConfig {
    fn default() -> Self {
        PointConfig {
            total: [0.0, 0.0],
            momentum: [0.0, 0.0],
            relative: None,
            energy: None,
            eta: 0.0,
            side: Side::AboveCut,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncomingSpec {
    pub channel: usize,
    pub p1: [f64; 2],
    pub p2: [f64; 2],
    #[serde(default)]
    pub photon_energies: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    /// Largest q; defaults to π/(2d).
    pub q_max: Option<f64>,
    pub n_q: usize,
    pub delta_max: f64,
    pub n_delta: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            q_max: None,
            n_q: 256,
            delta_max: 3.0,
            n_delta: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    /// Momenta per BZ axis compared against the direct sum.
    pub dispersion_points: usize,
    pub sites: usize,
    /// Riemann grid per axis; 4096 for chains and 160 for square lattices by default.
    pub propagator_grid: Option<usize>,
    pub propagator_energy: f64,
    pub propagator_eta: f64,
    pub histogram: HistogramOptions,
    /// Histogram bins closer than this to a critical energy are skipped.
    pub critical_exclusion: f64,
    pub identity_energy: f64,
    pub identity_cutoff: f64,
    pub tolerances: OracleTolerances,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            dispersion_points: 8,
            sites: 1_000_000,
            propagator_grid: None,
            propagator_energy: 1.4,
            propagator_eta: 1.0,
            histogram: HistogramOptions {
                bins: 20,
                ..HistogramOptions::default()
            },
            critical_exclusion: 0.05,
            identity_energy: 0.4,
            identity_cutoff: 1e3,
            tolerances: OracleTolerances::default(),
        }
    }
}

/// Relative tolerances; unset entries depend on the lattice dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleTolerances {
    pub dispersion: Option<f64>,
    pub propagator: Option<f64>,
    pub dos: Option<f64>,
    pub identity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_array")]
    pub array: ArrayConfig,
    #[serde(default)]
    pub tolerances: PropagatorOptions,
    #[serde(default)]
    pub velocity_floor: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub point: PointConfig,
    #[serde(default)]
    pub incoming: Option<IncomingSpec>,
    #[serde(default)]
    pub sweep: Vec<Axis>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_array() -> ArrayConfig {
    ArrayConfig::chain(0.25)
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            array: default_array(),
            tolerances: PropagatorOptions::default(),
            velocity_floor: None,
            threads: None,
            point: PointConfig::default(),
            incoming: None,
            sweep: Vec::new(),
            grid: GridConfig::default(),
            oracle: OracleConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.array.validate()?;
        self.tolerances.validate()?;
        for a in &self.sweep {
            a.validate()?;
        }
        if !(6..=17).contains(&self.output.precision) {
            return Err(Error::InvalidConfig("output precision must lie in [6, 17]".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::InvalidConfig("threads must be positive".into()));
        }
        Ok(())
    }

    fn cross_section_options(&self) -> CrossSectionOptions {
        let mut o = CrossSectionOptions {
            propagator: self.tolerances,
            ..Default::default()
        };
        if let Some(f) = self.velocity_floor {
            o.velocity_floor = f;
        }
        o
    }
}

/// One table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    /// Closed channel or undefined entry.
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Extra JSON payload (oracle reports).
    pub reports: Vec<OracleReport>,
}

/// x rounded to `precision` significant digits, printed in shortest round-trip form.
pub fn format_number(x: f64, precision: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{:?}", round_sig(x, precision))
}

fn round_sig(x: f64, precision: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", precision - 1, x).parse().unwrap_or(x)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(cmd: Command, cfg: &RunConfig, table: &Table) -> Result<String, Error> {
    let prec = cfg.output.precision;
    let resolved = serde_json::to_string(cfg).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    match cfg.output.format {
        Format::Csv => {
            let mut out = format!("# arrayscatter {VERSION} {}\n# config: {resolved}\n", cmd.name());
            out.push_str(&table.columns.iter().map(|c| csv_field(c)).collect::<Vec<_>>().join(","));
            out.push('\n');
            for row in &table.rows {
                let cells: Vec<String> = row
                    .iter()
                    .map(|c| match c {
                        Cell::Num(v) => format_number(*v, prec),
                        Cell::Int(v) => v.to_string(),
                        Cell::Text(s) => csv_field(s),
                        Cell::Empty => String::new(),
                    })
                    .collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            Ok(out)
        }
        Format::Json => {
            use serde_json::{json, Value};
            let num = |v: f64| {
                serde_json::Number::from_f64(round_sig(v, prec)).map_or(Value::Null, Value::Number)
            };
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|r| {
                    Value::Array(
                        r.iter()
                            .map(|c| match c {
                                Cell::Num(v) => num(*v),
                                Cell::Int(v) => json!(v),
                                Cell::Text(s) => json!(s),
                                Cell::Empty => Value::Null,
                            })
                            .collect(),
                    )
                })
                .collect();
            let mut doc = json!({
                "program": "arrayscatter",
                "version": VERSION,
                "command": cmd.name(),
                "config": serde_json::from_str::<Value>(&resolved).unwrap_or(Value::Null),
                "columns": table.columns,
                "rows": rows,
            });
            if !table.reports.is_empty() {
                doc["reports"] = serde_json::to_value(&table.reports).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            }
            let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Values of the sweep variables at one point.
#[derive(Debug, Clone, Copy, Default)]
struct Sample {
    p: [f64; 2],
    total: [f64; 2],
    q: Option<[f64; 2]>,
    energy: Option<f64>,
    eta: f64,
    photon_energy: Option<f64>,
}

fn sweep(cmd: Command, cfg: &RunConfig) -> Result<Vec<Sample>, Error> {
    let base = Sample {
        p: cfg.point.momentum,
        total: cfg.point.total,
        q: cfg.point.relative,
        energy: cfg.point.energy,
        eta: cfg.point.eta,
        photon_energy: None,
    };
    let allowed = cmd.sweep_variables();
    for a in &cfg.sweep {
        if !allowed.contains(&a.variable.as_str()) {
            return Err(Error::InvalidConfig(format!(
                "{} cannot sweep '{}' (allowed: {})",
                cmd.name(),
                a.variable,
                if allowed.is_empty() { "none".to_string() } else { allowed.join(", ") }
            )));
        }
    }
    let mut points = vec![base];
    for a in &cfg.sweep {
        let vals = a.values();
        let mut next = Vec::with_capacity(points.len() * vals.len());
        for s in &points {
            for &v in &vals {
                let mut t = *s;
                match a.variable.as_str() {
                    "p_x" => t.p[0] = v,
                    "p_y" => t.p[1] = v,
                    "total_x" => t.total[0] = v,
                    "total_y" => t.total[1] = v,
                    "q_x" => t.q = Some([v, t.q.map_or(0.0, |q| q[1])]),
                    "q_y" => t.q = Some([t.q.map_or(0.0, |q| q[0]), v]),
                    "energy" => t.energy = Some(v),
                    "eta" => t.eta = v,
                    "photon_energy" => t.photon_energy = Some(v),
                    _ => unreachable!(),
                }
                next.push(t);
            }
        }
        points = next;
    }
    Ok(points)
}

fn momentum(cfg: &ArrayConfig, v: [f64; 2]) -> Result<LatticeMomentum, Error> {
    match cfg.dimension {
        Dimension::OneD if v[1] != 0.0 => Err(Error::InvalidConfig("chain momenta have no y component".into())),
        Dimension::OneD => Ok(LatticeMomentum::chain(v[0])),
        Dimension::TwoDSquare => Ok(LatticeMomentum::planar(v[0], v[1])),
    }
}

fn pair_energy(disp: &Dispersion, s: &Sample) -> Result<f64, Error> {
    if let Some(e) = s.energy {
        return Ok(e);
    }
    let q = s
        .q
        .ok_or_else(|| Error::InvalidConfig("set point.energy or point.relative".into()))?;
    let total = momentum(disp.config(), s.total)?;
    let q = momentum(disp.config(), q)?;
    let half = total.scale(0.5);
    let (a, b) = (half + q, half - q);
    if disp.classify(a) == Classification::Bright || disp.classify(b) == Classification::Bright {
        return Err(Error::InvalidInput("point.relative does not describe a dark pair".into()));
    }
    Ok(disp.delta(a) + disp.delta(b))
}

fn run_points<F>(points: &[Sample], f: F) -> Result<Vec<Vec<Cell>>, Error>
where
    F: Fn(&Sample) -> Result<Vec<Cell>, Error> + Sync + Send,
{
    points.par_iter().map(f).collect()
}

fn columns(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn cmd_dispersion(cfg: &RunConfig, disp: &Dispersion) -> Result<Table, Error> {
    let mut run = cfg.clone();
    if run.sweep.is_empty() {
        let edge = cfg.array.zone_edge();
        let (nx, ny) = match cfg.array.dimension {
            Dimension::OneD => (1024, 0),
            Dimension::TwoDSquare => (64, 64),
        };
        run.sweep.push(Axis {
            variable: "p_x".into(),
            start: -edge,
            stop: edge,
            count: nx,
            spacing: Spacing::Linear,
        });
        if ny > 0 {
            run.sweep.push(Axis {
                variable: "p_y".into(),
                start: -edge,
                stop: edge,
                count: ny,
                spacing: Spacing::Linear,
            });
        }
    }
    let points = sweep(Command::Dispersion, &run)?;
    let rows = run_points(&points, |s| {
        let p = momentum(&cfg.array, s.p)?;
        let e = disp.try_epsilon(p)?;
        Ok(vec![
            s.p[0].into(),
            s.p[1].into(),
            e.re.into(),
            disp.gamma(p).into(),
            (disp.classify(p) == Classification::Dark).into(),
        ])
    })?;
    Ok(Table {
        columns: columns(&["p_x", "p_y", "delta", "gamma", "dark"]),
        rows,
        reports: vec![],
    })
}

fn complex_cells(z: Complex64) -> [Cell; 2] {
    [z.re.into(), z.im.into()]
}

fn cmd_propagator(cfg: &RunConfig, disp: &Dispersion) -> Result<Table, Error> {
    let points = sweep(Command::Propagator, cfg)?;
    let rows = run_points(&points, |s| {
        let e = pair_energy(disp, s)?;
        let total = momentum(&cfg.array, s.total)?;
        let prop = PairPropagator::new(disp, total, cfg.tolerances);
        let dec = prop.evaluate(Complex64::new(e, s.eta), cfg.point.side)?;
        let side = cfg.point.side;
        let mut row: Vec<Cell> = vec![e.into(), s.eta.into(), s.total[0].into(), s.total[1].into()];
        row.extend(complex_cells(dec.value(side)));
        row.extend(complex_cells(dec.l0(side)));
        row.extend(complex_cells(dec.l[1]));
        row.extend(complex_cells(dec.l[2]));
        row.extend(dec.rho.iter().map(|r| Cell::Num(*r)));
        row.push(dec.critical.is_some().into());
        row.push(dec.critical.map(|c| c.distance).into());
        row.push(dec.error_estimate.into());
        Ok(row)
    })?;
    Ok(Table {
        columns: columns(&[
            "energy", "eta", "total_x", "total_y", "l_re", "l_im", "l0_re", "l0_im", "l1_re", "l1_im", "l2_re",
            "l2_im", "rho0", "rho1", "rho2", "critical", "critical_distance", "error_estimate",
        ]),
        rows,
        reports: vec![],
    })
}

fn cmd_smatrix(cfg: &RunConfig, disp: &Dispersion) -> Result<Table, Error> {
    let points = sweep(Command::Smatrix, cfg)?;
    let rows = run_points(&points, |s| {
        let e = pair_energy(disp, s)?;
        let total = momentum(&cfg.array, s.total)?;
        let dec = PairPropagator::new(disp, total, cfg.tolerances).evaluate(Complex64::new(e, 0.0), Side::AboveCut)?;
        let sm = OnShellSMatrix::from_decomposition(dec)?;
        let mut row: Vec<Cell> = vec![e.into(), s.total[0].into(), s.total[1].into()];
        for a in 0..3 {
            for b in 0..3 {
                match sm.s[a][b] {
                    Some(z) => row.extend(complex_cells(z)),
                    None => row.extend([Cell::Empty, Cell::Empty]),
                }
            }
        }
        row.extend(sm.propagator.rho.iter().map(|r| Cell::Num(*r)));
        row.extend(sm.open.iter().map(|o| Cell::from(*o)));
        row.push(sm.unitarity_defect().into());
        row.push(sm.propagator.critical.is_some().into());
        Ok(row)
    })?;
    let mut names: Vec<String> = ["energy", "total_x", "total_y"].iter().map(|s| s.to_string()).collect();
    for a in 0..3 {
        for b in 0..3 {
            names.push(format!("s{a}{b}_re"));
            names.push(format!("s{a}{b}_im"));
        }
    }
    names.extend(columns(&["rho0", "rho1", "rho2", "open0", "open1", "open2", "unitarity_defect", "critical"]));
    Ok(Table {
        columns: names,
        rows,
        reports: vec![],
    })
}

fn incoming_for(cfg: &RunConfig, disp: &Dispersion, s: &Sample) -> Result<IncomingConfig, Error> {
    match &cfg.incoming {
        Some(spec) if s.q.is_none() || spec.channel != 0 => {
            let channel = ChannelIndex::new(spec.channel).map_err(|e| Error::InvalidConfig(e.to_string()))?;
            let mut energies = spec.photon_energies.clone();
            if let Some(v) = s.photon_energy {
                energies = vec![v; channel.index()];
            }
            IncomingConfig::new(
                disp,
                channel,
                momentum(&cfg.array, spec.p1)?,
                momentum(&cfg.array, spec.p2)?,
                energies,
            )
        }
        _ => {
            let q = s
                .q
                .ok_or_else(|| Error::InvalidConfig("set [incoming] or point.relative".into()))?;
            let total = momentum(&cfg.array, s.total)?;
            let q = momentum(&cfg.array, q)?;
            let half = total.scale(0.5);
            IncomingConfig::dark_pair(disp, half + q, half - q)
        }
    }
}

fn cmd_cross_section(cfg: &RunConfig, disp: &Dispersion) -> Result<Table, Error> {
    let points = sweep(Command::CrossSection, cfg)?;
    let opts = cfg.cross_section_options();
    let rows = run_points(&points, |s| {
        let inc = incoming_for(cfg, disp, s)?;
        let set = cross_sections(disp, &inc, &opts)?;
        let mut row: Vec<Cell> = vec![set.energy.into(), Cell::Int(set.channel.index() as i64), set.group_velocity.into()];
        row.extend(set.partial.iter().map(|v| Cell::Num(*v)));
        row.push(set.total.into());
        row.push(Cell::Int(set.unit.length_power as i64));
        row.push(set.critical.into());
        Ok(row)
    })?;
    Ok(Table {
        columns: columns(&[
            "energy", "channel", "group_velocity", "sigma0", "sigma1", "sigma2", "sigma_total", "length_power",
            "critical",
        ]),
        rows,
        reports: vec![],
    })
}

fn cmd_two_photon_wf(cfg: &RunConfig, disp: &Dispersion) -> Result<Table, Error> {
    if cfg.array.dimension != Dimension::OneD {
        return Err(Error::InvalidConfig("the two-photon grid is defined for chains".into()));
    }
    let s = sweep(Command::TwoPhotonWf, cfg)?[0];
    let e = pair_energy(disp, &s)?;
    let total = momentum(&cfg.array, s.total)?;
    let prop = PairPropagator::new(disp, total, cfg.tolerances);
    let state = TwoPhotonState::new(&prop, e)?;
    let g = &cfg.grid;
    let q_max = g.q_max.unwrap_or(0.5 * cfg.array.zone_edge());
    let grid = Fig4Grid::compute(&state, q_max, g.n_q, g.delta_max, g.n_delta)?;
    let mut rows = Vec::with_capacity(g.n_q * g.n_delta);
    for (i, q) in grid.q.iter().enumerate() {
        for (j, d) in grid.delta_ph.iter().enumerate() {
            rows.push(vec![(*q).into(), (*d).into(), grid.modulus[i][j].into(), grid.phase[i][j].into()]);
        }
    }
    Ok(Table {
        columns: columns(&["q", "delta_ph", "modulus", "phase"]),
        rows,
        reports: vec![],
    })
}

fn cmd_transmission(cfg: &RunConfig, disp: &Dispersion) -> Result<Table, Error> {
    let points = sweep(Command::Transmission, cfg)?;
    let rows = run_points(&points, |s| {
        let p = momentum(&cfg.array, s.p)?;
        let e = s
            .energy
            .ok_or_else(|| Error::InvalidConfig("transmission needs point.energy or an energy sweep".into()))?;
        let t = transmission(disp, p, e)?;
        let a = atomic_amplitude(disp, p, e)?;
        let mut row: Vec<Cell> = vec![s.p[0].into(), s.p[1].into(), e.into()];
        row.extend(complex_cells(t));
        row.extend(complex_cells(a));
        row.push(lorentzian(disp, p, e)?.into());
        Ok(row)
    })?;
    Ok(Table {
        columns: columns(&["p_x", "p_y", "energy", "t_re", "t_im", "a_re", "a_im", "lorentzian"]),
        rows,
        reports: vec![],
    })
}

/// Runs every oracle and reports (report, tolerance) pairs.
pub fn oracle_suite(cfg: &RunConfig, disp: &Dispersion) -> Result<Vec<(OracleReport, f64)>, Error> {
    let o = &cfg.oracle;
    let one_d = cfg.array.dimension == Dimension::OneD;
    let pick = |v: Option<f64>, a: f64, b: f64| v.unwrap_or(if one_d { a } else { b });
    let tol = &o.tolerances;
    let mut out = Vec::new();

    let n = o.dispersion_points.max(1);
    let g = 2.0 * cfg.array.zone_edge();
    let node = |k: usize| -0.5 * g + (k as f64 + 0.5) * g / n as f64;
    let momenta: Vec<LatticeMomentum> = if one_d {
        (0..n).map(|k| LatticeMomentum::chain(node(k))).collect()
    } else {
        (0..n).map(|k| LatticeMomentum::planar(node(k), 0.37 * node(n - 1 - k))).collect()
    };
    let dt = pick(tol.dispersion, 1e-6, 1e-3);
    for p in momenta {
        out.push((dispersion_report(disp, p, o.sites)?, dt));
    }

    let total = momentum(&cfg.array, cfg.point.total)?;
    let prop = PairPropagator::new(disp, total, cfg.tolerances);
    let grid = o.propagator_grid.unwrap_or(if one_d { 4096 } else { 160 });
    let omega = Complex64::new(o.propagator_energy, o.propagator_eta);
    out.push((propagator_report(&prop, omega, grid)?, pick(tol.propagator, 1e-4, 1e-2)));

    let hist = dos_histogram(disp, total, &o.histogram)?;
    out.push((
        dos_report(&prop, &hist, o.critical_exclusion)?.with("seed", o.histogram.seed as f64),
        pick(tol.dos, 1e-2, 5e-2),
    ));

    let k = 0.3 * cfg.array.k0();
    let (p1, p2) = if one_d {
        (LatticeMomentum::chain(k), LatticeMomentum::chain(-0.5 * k))
    } else {
        (LatticeMomentum::planar(k, 0.0), LatticeMomentum::planar(0.0, -0.5 * k))
    };
    let it = tol.identity.unwrap_or(1e-3);
    out.push((appendix_c_check(disp, &[p1], o.identity_energy, o.identity_cutoff)?, it));
    out.push((appendix_c_check(disp, &[p1, p2], o.identity_energy, o.identity_cutoff)?, it));
    Ok(out)
}

fn cmd_oracle(cfg: &RunConfig, disp: &Dispersion) -> Result<(Table, bool), Error> {
    let suite = oracle_suite(cfg, disp)?;
    let mut rows = Vec::new();
    let mut ok = true;
    for (r, tol) in &suite {
        let pass = r.passes(*tol);
        ok &= pass;
        let mut row = vec![Cell::Text(r.quantity.clone())];
        row.extend(complex_cells(r.reference));
        row.extend(complex_cells(r.oracle));
        row.extend([r.discrepancy.into(), r.relative.into(), (*tol).into(), pass.into()]);
        rows.push(row);
    }
    let table = Table {
        columns: columns(&[
            "quantity", "reference_re", "reference_im", "oracle_re", "oracle_im", "discrepancy", "relative",
            "tolerance", "pass",
        ]),
        rows,
        reports: suite.into_iter().map(|(r, _)| r).collect(),
    };
    Ok((table, ok))
}

const SCHEMA_COMMON: &str = "\
Configuration (TOML; flags override file values):
  [array]       dimension = \"1d\" | \"2d_square\", spacing (λ₀), polarization =
                \"parallel_to_array\" | \"perpendicular_to_plane\" | \"circular_in_plane\",
                quality_factor, sum_tolerance, ewald_eta
  [tolerances]  rel_tol, abs_tol, critical_window, scan_points, scan_points_planar,
                contour_grid, critical_seed_grid, max_intervals, max_nodes
  [point]       total = [x, y], momentum = [x, y], relative = [x, y], energy, eta,
                side = \"above_cut\" | \"below_cut\"
  [incoming]    channel, p1 = [x, y], p2 = [x, y], photon_energies = [..]
  [[sweep]]     variable, start, stop, count, spacing = \"linear\" | \"log\"
  [grid]        q_max, n_q, delta_max, n_delta
  [oracle]      dispersion_points, sites, propagator_grid, propagator_energy,
                propagator_eta, critical_exclusion, identity_energy, identity_cutoff,
                [oracle.histogram] samples, bins, range, seed
                [oracle.tolerances] dispersion, propagator, dos, identity
  [output]      path, format = \"csv\" | \"json\", precision (6..=17)
  threads, velocity_floor
Output: CSV starts with two '#' header lines (version, resolved config); empty
fields mark closed channels. JSON holds the same data under \"rows\" (null for empty).
Energies in Γ₀, momenta in 1/λ₀, cross sections in λ₀^length_power.
";

fn schema(cmd: Command) -> String {
    let cols: &[(&str, &str)] = match cmd {
        Command::Dispersion => &[
            ("p_x, p_y", "momentum"),
            ("delta", "collective shift Δ(p)"),
            ("gamma", "collective decay rate Γ(p)"),
            ("dark", "1 outside the light cone"),
        ],
        Command::Propagator => &[
            ("energy, eta", "ω = energy + i·eta"),
            ("total_x, total_y", "pair momentum P"),
            ("l_re, l_im", "L(ω, P)"),
            ("l0_re .. l2_im", "channel parts L_α"),
            ("rho0 .. rho2", "channel densities ρ_α"),
            ("critical", "1 inside the critical-energy window"),
            ("critical_distance", "distance to the nearest critical energy (empty if none)"),
            ("error_estimate", "quadrature error estimate"),
        ],
        Command::Smatrix => &[
            ("energy, total_x, total_y", "E, P"),
            ("sAB_re, sAB_im", "s_{αβ}; empty when a channel is closed"),
            ("rho0 .. rho2", "channel densities"),
            ("open0 .. open2", "open-channel mask"),
            ("unitarity_defect", "‖S†S − 1‖ on the open block"),
            ("critical", "critical-energy flag"),
        ],
        Command::CrossSection => &[
            ("energy", "incoming pair energy"),
            ("channel", "incoming channel α"),
            ("group_velocity", "incoming flux velocity"),
            ("sigma0 .. sigma2", "partial cross sections σ_{α,β}"),
            ("sigma_total", "total cross section"),
            ("length_power", "σ is in units of λ₀^length_power"),
            ("critical", "1 when the incoming velocity is below the floor"),
        ],
        Command::TwoPhotonWf => &[
            ("q", "relative momentum"),
            ("delta_ph", "photon detuning Δ_ph"),
            ("modulus", "|η̄₂(q, Δ_ph)| / |η̄₂(0, 0)|"),
            ("phase", "arg η̄₂(q, Δ_ph)"),
        ],
        Command::Transmission => &[
            ("p_x, p_y, energy", "photon momentum and energy"),
            ("t_re, t_im", "transmission coefficient t_p(E)"),
            ("a_re, a_im", "atomic amplitude a_p(E)"),
            ("lorentzian", "−Im 1/(E + i0 − ε(p))"),
        ],
        Command::Oracle => &[
            ("quantity", "compared quantity"),
            ("reference_re .. oracle_im", "main-path and oracle values"),
            ("discrepancy, relative", "absolute and relative difference"),
            ("tolerance, pass", "configured tolerance and verdict"),
        ],
    };
    let mut s = format!("arrayscatter {} columns:\n", cmd.name());
    for (c, d) in cols {
        s.push_str(&format!("  {c:<26} {d}\n"));
    }
    let vars = cmd.sweep_variables();
    s.push_str(&format!(
        "Sweep variables: {}\n\n",
        if vars.is_empty() { "none".to_string() } else { vars.join(", ") }
    ));
    s.push_str(SCHEMA_COMMON);
    s
}

/// Failure of a CLI run, mapped to an exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

/// Resolves the file configuration and flag overrides.
pub fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            RunConfig::from_toml(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = &cli.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(t) = cli.tol {
        cfg.tolerances.rel_tol = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs a command and returns the rendered output.
pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<String, CliError> {
    let disp = Dispersion::new(cfg.array)?;
    let work = || -> Result<String, CliError> {
        let (table, ok) = match cmd {
            Command::Dispersion => (cmd_dispersion(cfg, &disp)?, true),
            Command::Propagator => (cmd_propagator(cfg, &disp)?, true),
            Command::Smatrix => (cmd_smatrix(cfg, &disp)?, true),
            Command::CrossSection => (cmd_cross_section(cfg, &disp)?, true),
            Command::TwoPhotonWf => (cmd_two_photon_wf(cfg, &disp)?, true),
            Command::Transmission => (cmd_transmission(cfg, &disp)?, true),
            Command::Oracle => cmd_oracle(cfg, &disp)?,
        };
        let text = render(cmd, cfg, &table)?;
        if ok {
            Ok(text)
        } else {
            Err(CliError::Numerical(format!("oracle discrepancies above tolerance\n{text}")))
        }
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Parses arguments, runs the command and writes the result. Returns the exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    if cli.schema {
        print!("{}", schema(cli.command));
        return 0;
    }
    let result = resolve(&cli).and_then(|cfg| {
        let text = execute(cli.command, &cfg)?;
        match &cfg.output.path {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("{}: {e}", p.display()))),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Config(e.to_string())),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("arrayscatter: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_values() {
        let a = Axis {
            variable: "energy".into(),
            start: 1.0,
            stop: 100.0,
            count: 3,
            spacing: Spacing::Log,
        };
        let v = a.values();
        assert!((v[1] - 10.0).abs() < 1e-12 && (v[2] - 100.0).abs() < 1e-12);
        let one = Axis { count: 1, ..a.clone() };
        assert_eq!(one.values(), vec![1.0]);
        assert!(Axis { count: 0, ..a.clone() }.validate().is_err());
        assert!(Axis { start: -1.0, ..a }.validate().is_err());
    }

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.1 + 0.2, 12), "0.3");
        assert_eq!(format_number(1.0, 6), "1.0");
        assert_eq!(format_number(-2.5e-9, 17), "-2.5e-9");
        assert_eq!(format_number(f64::NAN, 6), "nan");
        assert_eq!(format_number(1234567.0, 6), "1234570.0");
    }

    #[test]
    fn config_round_trip() {
        let text = r#"
            threads = 2
            [array]
            dimension = "1d"
            spacing = 0.25
            polarization = "parallel_to_array"
            [point]
            relative = [8.37758040957278, 0.0]
            [[sweep]]
            variable = "energy"
            start = 0.5
            stop = 1.5
            count = 3
            [output]
            format = "json"
            precision = 8
        "#;
        let cfg = RunConfig::from_toml(text).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.output.format, Format::Json);
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(RunConfig::from_toml("[array]\nspacing = 0.25\nbogus = 1").is_err());
        let mut bad = cfg.clone();
        bad.output.precision = 3;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sweep_rejects_foreign_variables() {
        let mut cfg = RunConfig::default();
        cfg.sweep.push(Axis {
            variable: "energy".into(),
            start: 0.0,
            stop: 1.0,
            count: 2,
            spacing: Spacing::Linear,
        });
        assert!(sweep(Command::Dispersion, &cfg).is_err());
        assert_eq!(sweep(Command::Propagator, &cfg).unwrap().len(), 2);
    }

    #[test]
    fn dispersion_table_is_deterministic() {
        let mut cfg = RunConfig::default();
        cfg.sweep.push(Axis {
            variable: "p_x".into(),
            start: -12.0,
            stop: 12.0,
            count: 33,
            spacing: Spacing::Linear,
        });
        let a = execute(Command::Dispersion, &cfg).unwrap();
        cfg.threads = Some(3);
        let b = execute(Command::Dispersion, &cfg);
        let b = b.unwrap();
        // the header differs only in the recorded thread count
        assert_eq!(a.lines().skip(2).collect::<Vec<_>>(), b.lines().skip(2).collect::<Vec<_>>());
        for line in a.lines().skip(3) {
            let f: Vec<&str> = line.split(',').collect();
            let p: f64 = f[0].parse().unwrap();
            let dark = f[4] == "1";
            assert_eq!(dark, p.abs() > crate::lattice::K0);
            if dark {
                assert_eq!(f[3], "0.0");
            }
        }
    }

    #[test]
    fn closed_channels_are_empty() {
        let mut cfg = RunConfig::default();
        cfg.point.relative = Some([2.0 / 3.0 * std::f64::consts::PI / 0.25, 0.0]);
        let out = execute(Command::Smatrix, &cfg).unwrap();
        let row: Vec<&str> = out.lines().nth(3).unwrap().split(',').collect();
        // s01 is closed at P = 0
        assert_eq!(row[5], "");
        assert_eq!(row[6], "");
        assert!(!row[3].is_empty());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main_with_args(["arrayscatter", "dispersion", "--tol", "5"]), 2);
        assert_eq!(main_with_args(["arrayscatter", "bogus"]), 2);
        assert_eq!(main_with_args(["arrayscatter", "smatrix", "--schema"]), 0);
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.toml");
        std::fs::write(&cfg, "[point]\nenergy = 0.3\nmomentum = [9.0, 0.0]\n").unwrap();
        let out = dir.path().join("t.csv");
        let args = ["arrayscatter", "transmission", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
        assert_eq!(main_with_args(args), 2);
        std::fs::write(&cfg, "[point]\nenergy = 0.3\nmomentum = [1.0, 0.0]\n").unwrap();
        assert_eq!(main_with_args(args), 0);
        assert!(std::fs::read_to_string(&out).unwrap().contains("t_re"));
    }
}
