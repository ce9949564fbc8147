//! Configuration, command implementations and file output for the
//! `lodedamage` command-line tool.
//!
//! Every command writes one table. Tables are CSV (a `#` comment line with
//! units and the full parameter set, then a header row) or JSON (an object
//! carrying the same metadata next to the rows).

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use lodedamage::drivers::{
    damage_locus_sweep, default_eta_grid, default_theta0_grid, fit_hardening, fit_power_law, fracture_strain,
    peak_stress, run_path_partial, yield_surface_sweep, LocusMode, LocusTable, PathSpec, SimRecord,
};
use lodedamage::tensors::stress_state;
use lodedamage::{Error as ModelError, MaterialParams, SymTensor};
use serde::{Deserialize, Serialize};

pub const UNITS: &str = "stress in MPa, strain dimensionless";

/// Columns of a records table.
pub const RECORD_COLUMNS: [&str; 20] = [
    "step", "eps11", "eps22", "eps33", "eps12", "eps23", "eps13", "sig11", "sig22", "sig33", "sig12", "sig23",
    "sig13", "ebar_p", "D", "h", "eta", "theta0", "f_res", "plastic",
];
const FRACTURED_COLUMN: &str = "fractured";

/// Failure of a command, split by the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input data. Exit code 1.
    Usage(anyhow::Error),
    /// A numerical solve did not converge. Exit code 2.
    NonConvergence(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::NonConvergence(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(e) | CliError::NonConvergence(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Usage(e)
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        if is_non_convergence(&e) {
            CliError::NonConvergence(e.into())
        } else {
            CliError::Usage(e.into())
        }
    }
}

fn is_non_convergence(e: &ModelError) -> bool {
    matches!(
        e,
        ModelError::ReturnMapNonConvergence { .. }
            | ModelError::MixedControlNonConvergence { .. }
            | ModelError::FitNonConvergence { .. }
    )
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Parsed configuration file. Every section is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Material preset the `[material]` keys are applied on top of.
    pub preset: Option<String>,
    pub material: Option<toml::Table>,
    pub path: PathConfig,
    pub yield_surface: YieldSurfaceConfig,
    pub locus: LocusConfig,
    pub fit: FitConfig,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    /// Named load path. Ignored when `controls` is given.
    pub preset: String,
    pub steps: usize,
    /// Explicit controls for the six components `(11, 22, 33, 12, 23, 13)`.
    pub controls: Option<[lodedamage::drivers::Control; 6]>,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig { preset: "uniaxial_tension".into(), steps: 2000, controls: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct YieldSurfaceConfig {
    pub eta: f64,
    pub ebar_p: f64,
    pub samples: usize,
}

impl Default for YieldSurfaceConfig {
    fn default() -> Self {
        YieldSurfaceConfig { eta: 0.0, ebar_p: 0.0, samples: 181 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocusConfig {
    pub eta: Option<Vec<f64>>,
    pub theta0: Option<Vec<f64>>,
    /// Explicit `(η, θ0)` cells, used instead of the grid when present.
    pub pairs: Option<Vec<(f64, f64)>>,
    pub mode: LocusMode,
}

impl Default for LocusConfig {
    fn default() -> Self {
        LocusConfig { eta: None, theta0: None, pairs: None, mode: LocusMode::PowerLaw }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// `σ̄ = A + B ε̄pⁿ` from `(ε̄p, σ̄)` pairs.
    #[default]
    Hardening,
    /// `ε̄f = c hᵏ` from `(h, ε̄f)` pairs.
    PowerLaw,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub kind: FitKind,
    pub points: Option<Vec<(f64, f64)>>,
    /// Two-column CSV file, relative to the configuration file.
    pub data: Option<PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        toml::from_str(text).context("invalid configuration")
    }

    /// Reads a configuration file. Relative data paths inside it are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let mut cfg = Self::parse(&text).with_context(|| format!("in {}", path.display()))?;
        if let (Some(data), Some(dir)) = (cfg.fit.data.as_mut(), path.parent()) {
            if data.is_relative() {
                *data = dir.join(&*data);
            }
        }
        Ok(cfg)
    }

    /// Material parameters: the preset (`preset_override`, then the config's
    /// `preset`, then `al2024`) with `[material]` keys on top.
    /// Keys left out of `[material]` are logged.
    pub fn material(&self, preset_override: Option<&str>) -> anyhow::Result<MaterialParams> {
        let name = preset_override.or(self.preset.as_deref()).unwrap_or("al2024");
        let base = MaterialParams::preset(name).ok_or_else(|| {
            anyhow!("unknown material preset `{name}` (expected one of {})", lodedamage::material::PRESET_NAMES.join(", "))
        })?;
        let Some(overrides) = &self.material else {
            log::info!("no [material] section; using preset `{name}`");
            base.validate()?;
            return Ok(base);
        };
        let mut merged = toml::Table::try_from(&base).context("cannot serialize material preset")?;
        let mut missing = Vec::new();
        for key in merged.keys() {
            if !overrides.contains_key(key) {
                missing.push(key.clone());
            }
        }
        for (k, v) in overrides {
            if !merged.contains_key(k) {
                bail!("unknown material key `{k}`");
            }
            merged.insert(k.clone(), v.clone());
        }
        if !missing.is_empty() {
            log::info!("material keys not set, taken from preset `{name}`: {}", missing.join(", "));
        }
        let params: MaterialParams = merged.try_into().context("invalid [material] section")?;
        params.validate()?;
        Ok(params)
    }

    pub fn path_spec(&self, steps_override: Option<usize>) -> anyhow::Result<PathSpec> {
        let steps = steps_override.unwrap_or(self.path.steps);
        let spec = match self.path.controls {
            Some(controls) => PathSpec { steps, controls },
            None => PathSpec::preset(&self.path.preset, steps).ok_or_else(|| {
                anyhow!(
                    "unknown path preset `{}` (expected one of {})",
                    self.path.preset,
                    lodedamage::drivers::path::PATH_PRESETS.join(", ")
                )
            })?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fit_points(&self) -> anyhow::Result<Vec<(f64, f64)>> {
        match (&self.fit.points, &self.fit.data) {
            (Some(_), Some(_)) => bail!("[fit] takes either `points` or `data`, not both"),
            (Some(p), None) => Ok(p.clone()),
            (None, Some(path)) => read_pairs_csv(path),
            (None, None) => bail!("[fit] needs `points` or `data`"),
        }
    }
}

/// An output table ready to be written as CSV or JSON.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub command: String,
    pub params: MaterialParams,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Set when the run ended early; written as a final marker row.
    pub truncated: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Text(String),
    Missing,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl Table {
    fn new(command: &str, params: &MaterialParams, columns: &[&str]) -> Self {
        Table {
            command: command.into(),
            params: params.clone(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            truncated: None,
        }
    }

    pub fn comment(&self) -> String {
        format!("# lodedamage {}; {}; params: {}", self.command, UNITS, self.params.echo())
    }

    pub fn to_csv(&self) -> anyhow::Result<String> {
        let mut out = String::new();
        writeln!(out, "{}", self.comment())?;
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner()?)?);
        if let Some(reason) = &self.truncated {
            writeln!(out, "# TRUNCATED: {reason}")?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> anyhow::Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            command: &'a str,
            units: &'a str,
            params: &'a MaterialParams,
            columns: &'a [String],
            rows: &'a [Vec<Cell>],
            truncated: &'a Option<String>,
        }
        let doc = Doc {
            command: &self.command,
            units: UNITS,
            params: &self.params,
            columns: &self.columns,
            rows: &self.rows,
            truncated: &self.truncated,
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn render(&self, format: Format) -> anyhow::Result<String> {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes `text` to `out`, or to standard output when `out` is `None`.
pub fn emit(text: &str, out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

/// `sigma_m,sigma_eq,eta,chi,theta,theta0` header and value row.
pub fn invariants_row(components: &[f64]) -> anyhow::Result<String> {
    let c: [f64; 6] = components
        .try_into()
        .map_err(|_| anyhow!("expected 6 tensor components, got {}", components.len()))?;
    if c.iter().any(|v| !v.is_finite()) {
        bail!("tensor components must be finite");
    }
    let st = stress_state(&SymTensor(c));
    Ok(format!(
        "sigma_m,sigma_eq,eta,chi,theta,theta0\n{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
        st.sigma_m, st.sigma_eq, st.eta, st.chi, st.theta, st.theta0
    ))
}

pub fn records_table(params: &MaterialParams, records: &[SimRecord]) -> Table {
    let mut columns: Vec<&str> = RECORD_COLUMNS.to_vec();
    columns.push(FRACTURED_COLUMN);
    let mut t = Table::new("simulate", params, &columns);
    for r in records {
        let mut row = vec![Cell::Int(r.step as u64)];
        row.extend(r.eps.0.iter().chain(r.sigma.0.iter()).map(|&v| Cell::Float(v)));
        row.extend([r.ebar_p, r.d, r.h, r.eta, r.theta0, r.f_residual].map(Cell::Float));
        row.push(Cell::Int(r.plastic as u64));
        row.push(Cell::Int(r.fractured as u64));
        t.rows.push(row);
    }
    t
}

/// Parses a records CSV written by [`records_table`]. Comment lines,
/// including a truncation marker, are skipped.
pub fn read_records_csv(text: &str) -> anyhow::Result<Vec<SimRecord>> {
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let expected: Vec<&str> = RECORD_COLUMNS.iter().copied().chain([FRACTURED_COLUMN]).collect();
    if header.iter().ne(expected.iter().copied()) {
        bail!("unexpected records header: {}", header.iter().collect::<Vec<_>>().join(","));
    }
    let mut out = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| -> anyhow::Result<f64> {
            rec[i].parse().with_context(|| format!("row {}: bad number in column {}", line + 1, expected[i]))
        };
        let flag = |i: usize| -> anyhow::Result<bool> {
            match &rec[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                other => bail!("row {}: bad flag `{other}` in column {}", line + 1, expected[i]),
            }
        };
        let tensor = |start: usize| -> anyhow::Result<SymTensor> {
            let mut t = SymTensor::ZERO;
            for k in 0..6 {
                t[k] = f(start + k)?;
            }
            Ok(t)
        };
        out.push(SimRecord {
            step: rec[0].parse().with_context(|| format!("row {}: bad step", line + 1))?,
            eps: tensor(1)?,
            sigma: tensor(7)?,
            ebar_p: f(13)?,
            d: f(14)?,
            h: f(15)?,
            eta: f(16)?,
            theta0: f(17)?,
            f_residual: f(18)?,
            plastic: flag(19)?,
            fractured: flag(20)?,
        });
    }
    Ok(out)
}

/// Reads `(x, y)` pairs from a CSV file. A header row and `#` comments are
/// allowed; extra columns are ignored.
pub fn read_pairs_csv(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut out = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            bail!("{}: row {} has fewer than two columns", path.display(), i + 1);
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(y)) => out.push((x, y)),
            // A leading header row.
            _ if i == 0 && out.is_empty() => continue,
            _ => bail!("{}: row {} is not numeric", path.display(), i + 1),
        }
    }
    Ok(out)
}

/// Outcome of `simulate`: the table to write, a summary for standard output
/// and the error that ended the path early, if any.
pub struct Simulation {
    pub table: Table,
    pub summary: String,
    pub failure: Option<ModelError>,
}

pub fn simulate(params: &MaterialParams, path: &PathSpec) -> Result<Simulation, CliError> {
    let run = run_path_partial(params, path)?;
    let mut table = records_table(params, &run.records);
    table.truncated = run.failure.as_ref().map(|e| {
        let last = run.records.last().map_or(0, |r| r.step);
        format!("after step {last} of {}: {e}", path.steps)
    });
    let mut summary = String::new();
    if let Some(peak) = peak_stress(&run.records) {
        let _ = writeln!(summary, "peak sigma_eq = {:.4} MPa at ebar_p = {:.6} (step {})", peak.sigma_eq(), peak.ebar_p, peak.step);
    }
    match fracture_strain(&run.records, params.dc) {
        Some(ef) => {
            let _ = writeln!(summary, "fracture ebar_p = {ef:.6}");
        }
        None => {
            let last = run.records.last().expect("a run always has the initial record");
            let _ = writeln!(summary, "no fracture (final ebar_p = {:.6}, D = {:.6})", last.ebar_p, last.d);
        }
    }
    Ok(Simulation { table, summary, failure: run.failure })
}

pub fn yield_surface_table(params: &MaterialParams, cfg: &YieldSurfaceConfig) -> Result<Table, CliError> {
    let points = yield_surface_sweep(params, cfg.ebar_p, cfg.eta, cfg.samples)?;
    let mut t = Table::new("yield-surface", params, &["theta0", "theta", "radius"]);
    let tag = format!("yield-surface eta={} ebar_p={}", cfg.eta, cfg.ebar_p);
    t.command = tag;
    t.rows = points.iter().map(|p| vec![Cell::Float(p.theta0), Cell::Float(p.theta), Cell::Float(p.radius)]).collect();
    Ok(t)
}

pub fn locus(params: &MaterialParams, cfg: &LocusConfig) -> Result<LocusTable, CliError> {
    match &cfg.pairs {
        Some(pairs) => {
            let mut rows = Vec::with_capacity(pairs.len());
            for &(eta, theta0) in pairs {
                rows.extend(damage_locus_sweep(params, &[eta], &[theta0], cfg.mode)?.rows);
            }
            Ok(LocusTable { rows })
        }
        None => {
            let eta = cfg.eta.clone().unwrap_or_else(default_eta_grid);
            let theta0 = cfg.theta0.clone().unwrap_or_else(default_theta0_grid);
            Ok(damage_locus_sweep(params, &eta, &theta0, cfg.mode)?)
        }
    }
}

pub fn locus_table(params: &MaterialParams, table: &LocusTable) -> Table {
    let mut t = Table::new("locus", params, &["eta", "theta0", "h", "ebar_f", "failure"]);
    t.rows = table
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Float(r.eta),
                Cell::Float(r.theta0),
                Cell::Float(r.h),
                r.ebar_f.map_or(Cell::Missing, Cell::Float),
                r.failure.clone().map_or(Cell::Missing, Cell::Text),
            ]
        })
        .collect();
    t
}

pub fn calibrate(params: &MaterialParams, kind: FitKind, points: &[(f64, f64)]) -> Result<Table, CliError> {
    Ok(match kind {
        FitKind::Hardening => {
            let fit = fit_hardening(points)?;
            let mut t = Table::new("calibrate hardening", params, &["a", "b", "n", "rms_residual", "iterations"]);
            t.rows.push(vec![
                Cell::Float(fit.a),
                Cell::Float(fit.b),
                Cell::Float(fit.n),
                Cell::Float(fit.rms_residual),
                Cell::Int(fit.iterations as u64),
            ]);
            t
        }
        FitKind::PowerLaw => {
            let (c, k) = fit_power_law(points)?;
            let mut t = Table::new("calibrate power_law", params, &["c", "k"]);
            t.rows.push(vec![Cell::Float(c), Cell::Float(k)]);
            t
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::parse("bogus = 1").is_err());
        assert!(RunConfig::parse("[path]\nstepz = 3").is_err());
        let cfg = RunConfig::parse("[material]\nyoung = 1.0").unwrap();
        assert!(cfg.material(None).is_err());
    }

    #[test]
    fn material_overrides_apply_on_preset() {
        let cfg = RunConfig::parse("preset = \"classical\"\n[material]\na = 400.0\nm = 8").unwrap();
        let p = cfg.material(None).unwrap();
        assert_eq!(p.a, 400.0);
        assert_eq!(p.m, 8);
        assert!(p.gamma.is_infinite());
        assert_eq!(cfg.material(Some("al2024")).unwrap().gamma, 12.8);
    }

    #[test]
    fn invalid_material_rejected() {
        let cfg = RunConfig::parse("[material]\nnu = 0.7").unwrap();
        assert!(cfg.material(None).is_err());
    }

    #[test]
    fn path_from_controls() {
        let cfg = RunConfig::parse(
            "[path]\nsteps = 4\ncontrols = [{mode = \"strain\", value = 0.01}, {mode = \"stress\", value = 0.0}, \
             {mode = \"stress\", value = 0.0}, {mode = \"strain\", value = 0.0}, {mode = \"strain\", value = 0.0}, \
             {mode = \"strain\", value = 0.0}]",
        )
        .unwrap();
        let spec = cfg.path_spec(None).unwrap();
        assert_eq!(spec, PathSpec::uniaxial(4, 0.01));
        assert_eq!(cfg.path_spec(Some(9)).unwrap().steps, 9);
    }

    #[test]
    fn invariants_examples() {
        let row = invariants_row(&[100.0, 50.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(row.lines().nth(1).unwrap().starts_with("50.000000,86.602540,"));
        assert!(invariants_row(&[1.0; 5]).is_err());
    }

    #[test]
    fn csv_cells_carry_seventeen_digits() {
        assert_eq!(Cell::Float(0.1).csv(), "1.0000000000000001e-1");
        assert_eq!(Cell::Float(0.1).csv().parse::<f64>().unwrap(), 0.1);
    }
}
