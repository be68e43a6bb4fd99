//! One complete run: mesh, optimization, post-processing, artifacts.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::config::{RunConfig, RunTarget};
use crate::error::{Error, Result};
use crate::fea::Mesh;
use crate::io;
use crate::optimizer::{count_intermediate, run_continuation_with, run_fpto_with, IterationRecord, RunOutcome};
use crate::smooth::tau;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    NotConverged,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Converged => 0,
            RunStatus::NotConverged => 2,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::NotConverged => "not_converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub problem: String,
    pub nelx: usize,
    pub nely: usize,
    pub model: String,
    pub target: String,
    pub status: RunStatus,
    pub compliance: f64,
    pub smooth_compliance: f64,
    pub tau: Option<f64>,
    pub level_threshold: f64,
    pub volume: f64,
    pub intermediate: usize,
    pub iterations: usize,
    pub final_beta: f64,
    pub final_penalty: Option<f64>,
    pub wall_time_s: f64,
}

impl RunSummary {
    pub fn to_text(&self) -> String {
        self.to_string()
    }

    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let kv = io::parse_key_values(text, origin)?;
        let get = |k: &str| -> Result<&str> {
            kv.iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::Parse {
                    path: origin.to_path_buf(),
                    line: 0,
                    reason: format!("missing key `{k}`"),
                })
        };
        let bad = |k: &str, v: &str| Error::Parse {
            path: origin.to_path_buf(),
            line: 0,
            reason: format!("bad value `{v}` for `{k}`"),
        };
        let num = |k: &str| -> Result<f64> {
            let v = get(k)?;
            v.parse().map_err(|_| bad(k, v))
        };
        let int = |k: &str| -> Result<usize> {
            let v = get(k)?;
            v.parse().map_err(|_| bad(k, v))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match get(k)? {
                "none" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(k, v)),
            }
        };
        let status = match get("status")? {
            "converged" => RunStatus::Converged,
            "not_converged" => RunStatus::NotConverged,
            v => return Err(bad("status", v)),
        };
        Ok(Self {
            problem: get("problem")?.to_string(),
            nelx: int("nelx")?,
            nely: int("nely")?,
            model: get("model")?.to_string(),
            target: get("target")?.to_string(),
            status,
            compliance: num("compliance")?,
            smooth_compliance: num("smooth_compliance")?,
            tau: opt("tau")?,
            level_threshold: num("level_threshold")?,
            volume: num("volume")?,
            intermediate: int("intermediate_elements")?,
            iterations: int("iterations")?,
            final_beta: num("final_beta")?,
            final_penalty: opt("final_penalty")?,
            wall_time_s: num("wall_time_s")?,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

impl fmt::Display for RunSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        writeln!(f, "problem: {}", self.problem)?;
        writeln!(f, "nelx: {}", self.nelx)?;
        writeln!(f, "nely: {}", self.nely)?;
        writeln!(f, "model: {}", self.model)?;
        writeln!(f, "target: {}", self.target)?;
        writeln!(f, "status: {}", self.status.as_str())?;
        writeln!(f, "compliance: {}", self.compliance)?;
        writeln!(f, "smooth_compliance: {}", self.smooth_compliance)?;
        writeln!(f, "tau: {}", opt(self.tau))?;
        writeln!(f, "level_threshold: {}", self.level_threshold)?;
        writeln!(f, "volume: {}", self.volume)?;
        writeln!(f, "intermediate_elements: {}", self.intermediate)?;
        writeln!(f, "iterations: {}", self.iterations)?;
        writeln!(f, "final_beta: {}", self.final_beta)?;
        writeln!(f, "final_penalty: {}", opt(self.final_penalty))?;
        writeln!(f, "wall_time_s: {}", self.wall_time_s)
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub summary: RunSummary,
    pub outcome: RunOutcome,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Fixed-width progress line. `err` is the most
/// recent τ, 1 until the first smooth evaluation.
pub fn format_iteration(r: &IterationRecord, err: f64) -> String {
    format!(
        "It.:{:3} Obj.:{:8.4} Vol.:{:4.3} ch.:{:4.5} err.:{:4.5} beta.:{:4.5}",
        r.iter, r.compliance, r.volume, r.change, err, r.beta
    )
}

pub fn run(cfg: &RunConfig) -> Result<RunReport> {
    run_with(cfg, |_| {})
}

/// Runs `cfg` and writes its artifacts, passing each progress line to `log`.
pub fn run_with(cfg: &RunConfig, mut log: impl FnMut(&str)) -> Result<RunReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mesh = Mesh::build(&cfg.problem()?, cfg.nelx, cfg.nely)?;
    let fcfg = cfg.fpto_config()?;
    let mut err = 1.0;
    let observer = |r: &IterationRecord| {
        if let Some(t) = r.tau {
            err = t;
        }
        log(&format_iteration(r, err));
    };
    let outcome = match cfg.target {
        RunTarget::Continuation => run_continuation_with(&fcfg, &mesh, observer)?,
        _ => run_fpto_with(&fcfg, &mesh, observer)?,
    };
    let n = outcome.design.len() as f64;
    let summary = RunSummary {
        problem: cfg.problem.clone(),
        nelx: cfg.nelx,
        nely: cfg.nely,
        model: cfg.model.name().to_string(),
        target: cfg.target.name().to_string(),
        status: if outcome.converged {
            RunStatus::Converged
        } else {
            RunStatus::NotConverged
        },
        compliance: outcome.compliance,
        smooth_compliance: outcome.smooth.compliance,
        tau: Some(tau(outcome.smooth.compliance, outcome.compliance)),
        level_threshold: outcome.smooth.ls,
        volume: outcome.design.iter().sum::<f64>() / n,
        intermediate: count_intermediate(&outcome.design, cfg.x_min),
        iterations: outcome.state.it,
        final_beta: outcome.state.beta,
        final_penalty: outcome.state.penalty,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let output_dir = cfg.resolved_output_dir();
    let files = emit_artifacts(&output_dir, cfg, &outcome, &summary)?;
    Ok(RunReport {
        summary,
        outcome,
        output_dir,
        files,
    })
}

/// Writes the enabled artifacts plus the summary and the effective config.
pub fn emit_artifacts(dir: &Path, cfg: &RunConfig, outcome: &RunOutcome, summary: &RunSummary) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (nelx, nely) = (cfg.nelx, cfg.nely);
    let mut files = Vec::new();
    if cfg.emit_history {
        files.push(io::emit(dir, io::HISTORY_FILE, io::history_csv(&outcome.state.history).as_bytes())?);
    }
    if cfg.emit_density {
        files.push(io::emit(dir, io::DENSITY_CSV_FILE, io::field_csv(&outcome.design, nelx, nely).as_bytes())?);
        files.push(io::emit(dir, io::DENSITY_PGM_FILE, &io::density_pgm(&outcome.design, nelx, nely))?);
        files.push(io::emit(dir, io::SMOOTH_CSV_FILE, io::field_csv(&outcome.smooth.v, nelx, nely).as_bytes())?);
    }
    if cfg.emit_contours {
        let lines = outcome.smooth.contours();
        files.push(io::emit(dir, io::CONTOUR_SVG_FILE, io::contours_svg(&lines, nelx, nely).as_bytes())?);
        files.push(io::emit(dir, io::CONTOUR_CSV_FILE, io::contours_csv(&lines).as_bytes())?);
    }
    files.push(io::emit(dir, io::SUMMARY_FILE, summary.to_text().as_bytes())?);
    Ok(files)
}
