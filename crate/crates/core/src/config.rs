//! TOML configuration for the three commands.
//!
//! Every table has defaults, so an empty file (or no file) is a valid config.
//! Overrides are `dotted.key=value` pairs applied to the parsed table before
//! deserialization; values are read as TOML and fall back to plain strings.
//! Errors name the offending field as `config:<path>`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::check::CheckConfig;
use crate::energy::ModelParams;
use crate::error::{Error, Result};
use crate::fields::PeriodicGrid;
use crate::harness::{aligned_steps, initial_fields, StudyConfig};
use crate::io::read_snapshot;
use crate::stepper::{Scheme, SimState};

pub const DEFAULT_SEED: u64 = 20240917;
pub const DEFAULT_STEPS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    #[serde(rename = "J")]
    pub nodes: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { nodes: 128, length: std::f64::consts::TAU }
    }
}

impl GridConfig {
    fn desk() -> Self {
        GridConfig { nodes: 64, ..Default::default() }
    }

    pub fn build(&self, dim: usize) -> Result<PeriodicGrid> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::config("grid.L", format!("must be positive, got {}", self.length)));
        }
        PeriodicGrid::new(dim, self.nodes, self.length).map_err(|e| Error::config("grid.J", e.to_string()))
    }
}

/// At most one of `T` and `n_steps`; neither means [`DEFAULT_STEPS`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub tau: f64,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig { tau: 0.01, t_final: None, n_steps: None }
    }
}

impl TimeConfig {
    pub fn steps(&self) -> Result<usize> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::config("time.tau", format!("must be positive, got {}", self.tau)));
        }
        match (self.t_final, self.n_steps) {
            (Some(_), Some(_)) => Err(Error::config("time", "set either T or n_steps, not both")),
            (None, None) => Ok(DEFAULT_STEPS),
            (None, Some(n)) => Ok(n),
            (Some(t), None) => {
                aligned_steps(t, self.tau).ok_or_else(|| Error::config("time.T", format!("{t} is not a multiple of tau")))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    pub method: Scheme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Amplitude of the cosine density profile.
    pub amplitude: f64,
    /// Wave number of the density profile; the model's `q` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavenumber: Option<f64>,
    /// Snapshot header to restart from instead of the analytic data.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restart: Option<PathBuf>,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig { amplitude: 0.25, wavenumber: None, restart: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub diagnostics: String,
    /// Snapshot every this many steps; 0 keeps only the first and last.
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out"), diagnostics: "diagnostics.csv".into(), snapshot_every: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub model: ModelParams,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub scheme: SchemeConfig,
    pub init: InitConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: DEFAULT_SEED,
            model: ModelParams::default(),
            grid: GridConfig::default(),
            time: TimeConfig::default(),
            scheme: SchemeConfig::default(),
            init: InitConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    /// Analytic data, or the restart snapshot when one is configured.
    pub fn initial_state(&self) -> Result<SimState> {
        let p = &self.model;
        let grid = self.grid.build(p.dim)?;
        match &self.init.restart {
            Some(path) => {
                let snap = read_snapshot(path).map_err(|e| Error::config("init.restart", e.to_string()))?;
                if snap.header.d != p.dim || snap.header.nodes != grid.nodes_per_axis() {
                    return Err(Error::config(
                        "init.restart",
                        format!(
                            "snapshot is {}D with J = {}, config wants {}D with J = {}",
                            snap.header.d,
                            snap.header.nodes,
                            p.dim,
                            grid.nodes_per_axis()
                        ),
                    ));
                }
                snap.into_state(p)
            }
            None => {
                let (q, u) = initial_fields(grid, self.init.amplitude, self.init.wavenumber.unwrap_or(p.q))?;
                SimState::initial(q, u, p)
            }
        }
    }
}

impl Validate for RunConfig {
    fn validate(&self) -> Result<()> {
        validate_model(&self.model)?;
        self.grid.build(self.model.dim)?;
        self.time.steps()?;
        if !self.init.amplitude.is_finite() {
            return Err(Error::config("init.amplitude", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeOutput {
    pub dir: PathBuf,
    pub table: String,
    pub text: String,
}

impl Default for ConvergeOutput {
    fn default() -> Self {
        ConvergeOutput { dir: PathBuf::from("out"), table: "convergence.csv".into(), text: "convergence.txt".into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeSection {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub taus: Vec<f64>,
    pub tau_ref: f64,
}

impl Default for ConvergeSection {
    fn default() -> Self {
        let d = StudyConfig::desk_scale();
        ConvergeSection { t_final: d.t_final, taus: d.taus, tau_ref: d.tau_ref }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeConfig {
    pub seed: u64,
    pub model: ModelParams,
    pub grid: GridConfig,
    pub converge: ConvergeSection,
    pub scheme: SchemeConfig,
    pub init: InitConfig,
    pub output: ConvergeOutput,
}

impl Default for ConvergeConfig {
    fn default() -> Self {
        ConvergeConfig {
            seed: DEFAULT_SEED,
            model: ModelParams::default(),
            grid: GridConfig::desk(),
            converge: ConvergeSection::default(),
            scheme: SchemeConfig::default(),
            init: InitConfig::default(),
            output: ConvergeOutput::default(),
        }
    }
}

impl ConvergeConfig {
    pub fn study(&self) -> Result<StudyConfig> {
        if self.init.restart.is_some() {
            return Err(Error::config("init.restart", "convergence studies start from the analytic data"));
        }
        Ok(StudyConfig {
            params: self.model,
            grid: self.grid.build(self.model.dim)?,
            t_final: self.converge.t_final,
            taus: self.converge.taus.clone(),
            tau_ref: self.converge.tau_ref,
            scheme: self.scheme.method,
            amplitude: self.init.amplitude,
            wavenumber: self.init.wavenumber.unwrap_or(self.model.q),
        })
    }
}

impl Validate for ConvergeConfig {
    fn validate(&self) -> Result<()> {
        validate_model(&self.model)?;
        let c = &self.converge;
        if !(c.t_final > 0.0 && c.t_final.is_finite()) {
            return Err(Error::config("converge.T", format!("must be positive, got {}", c.t_final)));
        }
        if let Some(t) = c.taus.iter().find(|t| !(**t > 0.0)) {
            return Err(Error::config("converge.taus", format!("steps must be positive, got {t}")));
        }
        self.study()?.validate().map(|_| ())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckFileConfig {
    pub seed: u64,
    pub model: ModelParams,
    /// Grid of the relaxation-feasibility runs.
    pub grid: GridConfig,
    pub sizes: CheckConfig,
}

impl Default for CheckFileConfig {
    fn default() -> Self {
        CheckFileConfig { seed: DEFAULT_SEED, model: ModelParams::default(), grid: GridConfig::desk(), sizes: CheckConfig::default() }
    }
}

impl Validate for CheckFileConfig {
    fn validate(&self) -> Result<()> {
        validate_model(&self.model)?;
        self.grid.build(self.model.dim)?;
        if let Some(t) = self.sizes.equivalence_taus.iter().chain(&self.sizes.feasibility_taus).find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::config("sizes", format!("step sizes must be positive, got {t}")));
        }
        Ok(())
    }
}

pub trait Validate {
    fn validate(&self) -> Result<()>;
}

fn validate_model(p: &ModelParams) -> Result<()> {
    p.validate().map_err(|e| match e {
        Error::Param { name, reason } => Error::config(format!("model.{name}"), reason),
        other => other,
    })
}

/// Power-of-two grids are fastest; other sizes work.
pub fn grid_warning(grid: &GridConfig) -> Option<String> {
    (!grid.nodes.is_power_of_two()).then(|| format!("warning: J = {} is not a power of two; transforms will be slower", grid.nodes))
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies one `a.b.c=value` override to a parsed table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment.trim(), "override must look like key=value"))?;
    let key = key.trim();
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let mut cur = table;
    for (i, part) in parts[..parts.len() - 1].iter().enumerate() {
        let entry = cur.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::config(parts[..=i].join("."), "not a table"))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Deserializes a table, reporting the failing path.
pub fn from_table<T: DeserializeOwned>(table: toml::Table) -> Result<T> {
    let de = toml::Value::Table(table);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." || path.is_empty() { "root".to_string() } else { path };
        Error::config(field, e.into_inner().to_string().trim().replace('\n', " "))
    })
}

/// Reads `path` (if any), applies the overrides, deserializes and validates.
pub fn load<T: DeserializeOwned + Validate>(path: Option<&Path>, overrides: &[String]) -> Result<T> {
    let text = match path {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::config("file", format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    parse(&text, overrides)
}

/// [`load`] from TOML text.
pub fn parse<T: DeserializeOwned + Validate>(text: &str, overrides: &[String]) -> Result<T> {
    let mut table = toml::from_str::<toml::Table>(text).map_err(|e| Error::config("syntax", e.message().replace('\n', " ")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: T = from_table(table)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn to_toml<T: Serialize>(cfg: &T) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::config("root", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str<T: DeserializeOwned + Validate>(text: &str, overrides: &[&str]) -> Result<T> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        fs::write(&path, text).unwrap();
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        load(Some(&path), &o)
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("not a config error: {other}"),
        }
    }

    #[test]
    fn empty_file_is_defaults() {
        let c: RunConfig = load_str("", &[]).unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.grid.nodes, 128);
        assert_eq!(c.time.steps().unwrap(), DEFAULT_STEPS);
        let c: ConvergeConfig = load(None, &[]).unwrap();
        assert_eq!(c.grid.nodes, 64);
        assert_eq!(c.converge.taus.len(), 6);
    }

    #[test]
    fn bad_fields_are_named() {
        let e = load_str::<RunConfig>("[model]\nkappa1 = \"eight\"\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "model.kappa1");
        let e = load_str::<RunConfig>("[model]\nkapa1 = 8.0\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "model.kapa1");
        let e = load_str::<RunConfig>("[model]\nkappa1 = 0.0\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "model.kappa1");
        let e = load_str::<RunConfig>("[time]\ntau = -1.0\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "time.tau");
        let e = load_str::<RunConfig>("[time]\nT = 1.0\nn_steps = 3\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "time");
        let e = load_str::<RunConfig>("[time]\nT = 0.015\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "time.T");
        let e = load_str::<RunConfig>("[scheme]\nmethod = \"rk4\"\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "scheme.method");
        let e = load_str::<RunConfig>("[model\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "syntax");
        let e = load::<RunConfig>(Some(Path::new("/nonexistent/x.toml")), &[]).unwrap_err();
        assert_eq!(field_of(e), "file");
        let e = load_str::<ConvergeConfig>("[converge]\ntaus = [0.3]\n", &[]).unwrap_err();
        assert_eq!(field_of(e), "converge.taus");
    }

    #[test]
    fn overrides_beat_the_file() {
        let c: RunConfig = load_str(
            "[model]\nkappa1 = 4.0\n[time]\nn_steps = 7\n",
            &["model.kappa1=9", "scheme.method=implicit", "output.dir=/tmp/x", "grid.J = 32"],
        )
        .unwrap();
        assert_eq!(c.model.kappa1, 9.0);
        assert_eq!(c.scheme.method, Scheme::Implicit);
        assert_eq!(c.output.dir, PathBuf::from("/tmp/x"));
        assert_eq!(c.grid.nodes, 32);
        assert_eq!(c.time.steps().unwrap(), 7);
        let e = load_str::<RunConfig>("", &["model"]).unwrap_err();
        assert_eq!(field_of(e), "model");
        let e = load_str::<RunConfig>("", &["seed.x=1"]).unwrap_err();
        assert_eq!(field_of(e), "seed");
    }

    #[test]
    fn effective_config_round_trips() {
        let c = RunConfig::default();
        let text = to_toml(&c).unwrap();
        let back: RunConfig = from_table(toml::from_str(&text).unwrap()).unwrap();
        assert_eq!(back, c);

        let c = RunConfig {
            time: TimeConfig { tau: 0.125, t_final: Some(0.5), n_steps: None },
            init: InitConfig { restart: Some("a/b.json".into()), wavenumber: Some(3.0), amplitude: 0.1 },
            ..Default::default()
        };
        let back: RunConfig = from_table(toml::from_str(&to_toml(&c).unwrap()).unwrap()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.time.steps().unwrap(), 4);

        let c = ConvergeConfig::default();
        let back: ConvergeConfig = from_table(toml::from_str(&to_toml(&c).unwrap()).unwrap()).unwrap();
        assert_eq!(back, c);
        let c = CheckFileConfig::default();
        let back: CheckFileConfig = from_table(toml::from_str(&to_toml(&c).unwrap()).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn warns_on_odd_grid() {
        assert!(grid_warning(&GridConfig { nodes: 48, ..Default::default() }).is_some());
        assert!(grid_warning(&GridConfig::default()).is_none());
    }

    #[test]
    fn corrupted_kappa_rejected_for_check() {
        let e = load::<CheckFileConfig>(None, &["model.kappa1=0".into()]).unwrap_err();
        assert_eq!(field_of(e), "model.kappa1");
    }

}
