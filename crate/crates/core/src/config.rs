//! Run configuration: a flat `key = value` TOML document.
//!
//! ```toml
//! problem = "cantilever"
//! nelx = 120
//! nely = 80
//! volfrac = 0.5
//! model = "ersatz"
//! target = "smooth"
//! ```
//!
//! Everything else has a default. Custom problems list their boundary
//! conditions as strings: `supports = ["0,*:xy"]` fixes both directions of
//! every node on the left edge, `loads = ["60,40:0,-1"]` applies a unit
//! downward force at node (60, 40). Node indices count from the top-left
//! corner.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::fea::{NodeIndex, PointLoad, Problem, Support, DEFAULT_POISSON};
use crate::material::{MaterialModel, ModelKind, DEFAULT_PENALTY, DEFAULT_X_MIN};
use crate::optimizer::{FptoConfig, Target, Tolerances};
use crate::smooth::DEFAULT_NGRID;

/// Default parent directory for run outputs when `output_dir` is unset.
pub const OUTPUT_ROOT_ENV: &str = "FPTO_OUTPUT_ROOT";

pub const REQUIRED_KEYS: [&str; 6] = ["problem", "nelx", "nely", "volfrac", "model", "target"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunTarget {
    Smooth,
    ZeroOne,
    /// SIMP exponent continuation with β frozen.
    Continuation,
}

impl RunTarget {
    pub fn name(self) -> &'static str {
        match self {
            RunTarget::Smooth => "smooth",
            RunTarget::ZeroOne => "zero_one",
            RunTarget::Continuation => "continuation",
        }
    }
}

fn d_penalty() -> f64 {
    DEFAULT_PENALTY
}
fn d_young() -> f64 {
    1.0
}
fn d_poisson() -> f64 {
    DEFAULT_POISSON
}
fn d_x_min() -> f64 {
    DEFAULT_X_MIN
}
fn d_r_min() -> f64 {
    2.0
}
fn d_move_limit() -> f64 {
    0.02
}
fn d_beta_start() -> f64 {
    1e-6
}
fn d_beta_step() -> f64 {
    1.0
}
fn d_penalty_step() -> f64 {
    0.2
}
fn d_max_iter() -> usize {
    1000
}
fn d_ngrid() -> usize {
    DEFAULT_NGRID
}
fn d_tol_loose() -> f64 {
    Tolerances::default().loose
}
fn d_tol_smooth_stop() -> f64 {
    Tolerances::default().smooth_stop
}
fn d_tol_zero_one_stop() -> f64 {
    Tolerances::default().zero_one_stop
}
fn d_tol_tau() -> f64 {
    Tolerances::default().tau
}
fn d_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `cantilever`, `mbb` or `custom`.
    pub problem: String,
    pub nelx: usize,
    pub nely: usize,
    pub volfrac: f64,
    pub model: ModelKind,
    pub target: RunTarget,
    #[serde(default = "d_penalty")]
    pub penalty: f64,
    #[serde(default = "d_young")]
    pub young: f64,
    #[serde(default = "d_poisson")]
    pub poisson: f64,
    #[serde(default = "d_x_min")]
    pub x_min: f64,
    #[serde(default = "d_r_min")]
    pub r_min: f64,
    #[serde(default = "d_move_limit")]
    pub move_limit: f64,
    #[serde(default = "d_beta_start")]
    pub beta_start: f64,
    #[serde(default = "d_beta_step")]
    pub beta_step: f64,
    #[serde(default)]
    pub freeze_beta: bool,
    #[serde(default = "d_penalty_step")]
    pub penalty_step: f64,
    #[serde(default = "d_max_iter")]
    pub max_iter: usize,
    #[serde(default = "d_ngrid")]
    pub ngrid: usize,
    #[serde(default = "d_tol_loose")]
    pub tol_loose: f64,
    #[serde(default = "d_tol_smooth_stop")]
    pub tol_smooth_stop: f64,
    #[serde(default = "d_tol_zero_one_stop")]
    pub tol_zero_one_stop: f64,
    #[serde(default = "d_tol_tau")]
    pub tol_tau: f64,
    #[serde(default)]
    pub allow_penalized_smooth: bool,
    #[serde(default)]
    pub smooth_diagnostic: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub supports: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loads: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "d_true")]
    pub emit_density: bool,
    #[serde(default = "d_true")]
    pub emit_contours: bool,
    #[serde(default = "d_true")]
    pub emit_history: bool,
}

impl RunConfig {
    /// A configuration with every optional key at its default.
    pub fn new(problem: &str, nelx: usize, nely: usize, volfrac: f64, model: ModelKind, target: RunTarget) -> Self {
        let mut t = Table::new();
        t.insert("problem".into(), Value::String(problem.into()));
        t.insert("nelx".into(), Value::Integer(nelx as i64));
        t.insert("nely".into(), Value::Integer(nely as i64));
        t.insert("volfrac".into(), Value::Float(volfrac));
        t.insert("model".into(), Value::String(model.name().into()));
        t.insert("target".into(), Value::String(target.name().into()));
        t.try_into().expect("complete table")
    }

    /// Builds a configuration from already-parsed keys, reporting every
    /// missing required key at once.
    pub fn from_table(table: Table) -> Result<Self> {
        check_required(&table)?;
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.nelx < 2 || self.nely < 2 {
            return Err(Error::param(
                "nelx/nely",
                format!("mesh must be at least 2x2 elements, got {}x{}", self.nelx, self.nely),
            ));
        }
        self.problem()?;
        self.fpto_config()?.validate_for(self.target)
    }

    pub fn problem(&self) -> Result<Problem> {
        match self.problem.as_str() {
            "custom" => {
                if self.supports.is_empty() || self.loads.is_empty() {
                    return Err(Error::Config("a custom problem needs at least one support and one load".into()));
                }
                let supports = self.supports.iter().map(|s| parse_support(s)).collect::<Result<_>>()?;
                let loads = self.loads.iter().map(|s| parse_load(s)).collect::<Result<_>>()?;
                Ok(Problem::Custom { supports, loads })
            }
            name => {
                if !self.supports.is_empty() || !self.loads.is_empty() {
                    return Err(Error::Config(format!(
                        "supports/loads are only read for problem = \"custom\", not `{name}`"
                    )));
                }
                Problem::from_name(name)
            }
        }
    }

    pub fn material(&self) -> Result<MaterialModel> {
        MaterialModel::new(self.model, self.penalty, self.young, self.x_min)
    }

    pub fn fpto_config(&self) -> Result<FptoConfig> {
        let target = match self.target {
            RunTarget::Smooth => Target::Smooth,
            RunTarget::ZeroOne | RunTarget::Continuation => Target::ZeroOne,
        };
        let mut c = FptoConfig::new(self.volfrac, self.material()?, target);
        c.r_min = self.r_min;
        c.poisson = self.poisson;
        c.beta_start = self.beta_start;
        c.beta_step = self.beta_step;
        c.freeze_beta = self.freeze_beta;
        c.move_limit = self.move_limit;
        c.tol = Tolerances {
            loose: self.tol_loose,
            smooth_stop: self.tol_smooth_stop,
            zero_one_stop: self.tol_zero_one_stop,
            tau: self.tol_tau,
        };
        c.max_iter = self.max_iter;
        c.ngrid = self.ngrid;
        c.allow_penalized_smooth = self.allow_penalized_smooth;
        c.smooth_diagnostic = self.smooth_diagnostic;
        c.penalty_step = self.penalty_step;
        Ok(c)
    }

    /// Short identifier used for default output directories.
    pub fn run_name(&self) -> String {
        format!(
            "{}_{}x{}_{}_{}",
            self.problem,
            self.nelx,
            self.nely,
            self.model.name(),
            self.target.name()
        )
    }

    /// `output_dir` if set, else `$FPTO_OUTPUT_ROOT/<run name>`, else
    /// `fpto-out/<run name>`.
    pub fn resolved_output_dir(&self) -> PathBuf {
        if let Some(d) = &self.output_dir {
            return d.clone();
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV)
            .filter(|v| !v.is_empty())
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("fpto-out"));
        root.join(self.run_name())
    }
}

impl FptoConfig {
    fn validate_for(&self, target: RunTarget) -> Result<()> {
        if target == RunTarget::Continuation && self.model.kind() != ModelKind::Simp {
            return Err(Error::Config(format!(
                "target = \"continuation\" needs model = \"simp\", got `{}`",
                self.model.kind().name()
            )));
        }
        self.validate()
    }
}

fn check_required(table: &Table) -> Result<()> {
    let missing: Vec<&str> = REQUIRED_KEYS.iter().copied().filter(|k| !table.contains_key(*k)).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(format!("missing required keys: {}", missing.join(", "))))
    }
}

/// Parses configuration text; `origin` names the source in error messages.
pub fn parse_config_str(text: &str, origin: &Path) -> Result<RunConfig> {
    let table = parse_table(text, origin)?;
    check_required(&table)?;
    let cfg: RunConfig = toml::from_str(text).map_err(|e| toml_error(text, origin, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config_file(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, path)
}

/// Raw key table of a configuration file, for layering flag overrides on
/// top before building a [`RunConfig`].
pub fn parse_table(text: &str, origin: &Path) -> Result<Table> {
    text.parse::<Table>().map_err(|e| toml_error(text, origin, &e))
}

/// Inserts `key = raw`, reading `raw` as a TOML value when it parses as one
/// and as a bare string otherwise.
pub fn set_override(table: &mut Table, key: &str, raw: &str) {
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    table.insert(key.to_string(), value);
}

/// Reads `file` (if any), applies `overrides` in order via [`set_override`]
/// and validates the result.
pub fn load_config(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut table = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let table = parse_table(&text, path)?;
            if overrides.is_empty() {
                return parse_config_str(&text, path);
            }
            table
        }
        None => Table::new(),
    };
    for (k, v) in overrides {
        set_override(&mut table, k, v);
    }
    RunConfig::from_table(table)
}

fn toml_error(text: &str, origin: &Path, e: &toml::de::Error) -> Error {
    let line = e
        .span()
        .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
        .unwrap_or(0);
    Error::Parse {
        path: origin.to_path_buf(),
        line,
        reason: e.message().to_string(),
    }
}

fn parse_index(s: &str, what: &str, spec: &str) -> Result<NodeIndex> {
    match s.trim() {
        "*" => Ok(NodeIndex::All),
        t => t
            .parse()
            .map(NodeIndex::At)
            .map_err(|_| Error::Config(format!("bad {what} index `{t}` in `{spec}`"))),
    }
}

/// `"ix,iy:axes"` with `axes` one of `x`, `y`, `xy` and `*` for every index.
pub fn parse_support(spec: &str) -> Result<Support> {
    let bad = || Error::Config(format!("support `{spec}` is not of the form \"ix,iy:xy\""));
    let (at, axes) = spec.split_once(':').ok_or_else(bad)?;
    let (ix, iy) = at.split_once(',').ok_or_else(bad)?;
    let (fix_x, fix_y) = match axes.trim() {
        "x" => (true, false),
        "y" => (false, true),
        "xy" | "yx" => (true, true),
        _ => return Err(bad()),
    };
    Ok(Support {
        ix: parse_index(ix, "x", spec)?,
        iy: parse_index(iy, "y", spec)?,
        fix_x,
        fix_y,
    })
}

/// `"ix,iy:fx,fy"`.
pub fn parse_load(spec: &str) -> Result<PointLoad> {
    let bad = || Error::Config(format!("load `{spec}` is not of the form \"ix,iy:fx,fy\""));
    let (at, force) = spec.split_once(':').ok_or_else(bad)?;
    let (ix, iy) = at.split_once(',').ok_or_else(bad)?;
    let (fx, fy) = force.split_once(',').ok_or_else(bad)?;
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| bad());
    Ok(PointLoad {
        ix: idx(ix)?,
        iy: idx(iy)?,
        fx: num(fx)?,
        fy: num(fy)?,
    })
}
