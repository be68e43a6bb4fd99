//! The floating projection optimization loop.
//!
//! Each iteration analyses the current design, damps the compliance
//! sensitivities with the previous iteration's, and performs one
//! optimality-criteria update under bound, filter, projection and move-limit
//! constraints. The projection steepness β starts near zero and is raised by
//! a fixed step whenever the loose convergence test passes: for a smooth
//! target only while the design is still measurably different from its
//! smooth counterpart, for a 0/1 target unconditionally.

pub mod filter;
pub mod projection;
pub mod spring;
pub mod update;

use serde::{Deserialize, Serialize};

pub use filter::FilterKernel;
pub use projection::{floating_projection, project_value};
pub use spring::{two_spring_toy, SpringOptimum};
pub use update::{
    compute_sensitivities, convergence_epsilon, count_intermediate, damp_sensitivities, oc_update, OcUpdate,
    UpdateParams,
};

use crate::error::{Error, Result};
use crate::fea::{ElementStiffness, FeaSolver, Mesh, DEFAULT_POISSON};
use crate::material::{MaterialModel, ModelKind};
use crate::smooth::{smooth_design, tau, SmoothDesign, DEFAULT_NGRID};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Smooth,
    ZeroOne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// ε threshold that triggers a β (or p) increment.
    pub loose: f64,
    pub smooth_stop: f64,
    pub zero_one_stop: f64,
    /// τ below which a design counts as equivalent to its smooth design.
    pub tau: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            loose: 1e-3,
            smooth_stop: 1e-4,
            zero_one_stop: 1e-5,
            tau: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FptoConfig {
    pub volfrac: f64,
    pub r_min: f64,
    pub model: MaterialModel,
    pub poisson: f64,
    pub target: Target,
    pub beta_start: f64,
    pub beta_step: f64,
    /// Keep β at `beta_start` for the whole run.
    pub freeze_beta: bool,
    pub move_limit: f64,
    pub tol: Tolerances,
    pub max_iter: usize,
    pub ngrid: usize,
    /// Permit a smooth target with a penalization model (diagnostic runs).
    pub allow_penalized_smooth: bool,
    /// For 0/1 targets, evaluate the smooth design before every β increment.
    pub smooth_diagnostic: bool,
    /// SIMP exponent increment of the continuation baseline.
    pub penalty_step: f64,
}

impl FptoConfig {
    pub fn new(volfrac: f64, model: MaterialModel, target: Target) -> Self {
        Self {
            volfrac,
            r_min: 2.0,
            model,
            poisson: DEFAULT_POISSON,
            target,
            beta_start: 1e-6,
            beta_step: 1.0,
            freeze_beta: false,
            move_limit: 0.02,
            tol: Tolerances::default(),
            max_iter: 1000,
            ngrid: DEFAULT_NGRID,
            allow_penalized_smooth: false,
            smooth_diagnostic: false,
            penalty_step: 0.2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.volfrac > self.model.x_min() && self.volfrac < 1.0) {
            return Err(Error::param("volfrac", format!("must lie in (x_min, 1), got {}", self.volfrac)));
        }
        if !(self.r_min > 0.0) {
            return Err(Error::param("r_min", format!("must be positive, got {}", self.r_min)));
        }
        if !(self.move_limit > 0.0) {
            return Err(Error::param("move_limit", format!("must be positive, got {}", self.move_limit)));
        }
        if !(self.beta_start > 0.0 && self.beta_start.is_finite()) {
            return Err(Error::param("beta_start", format!("must be positive, got {}", self.beta_start)));
        }
        if !(self.beta_step > 0.0) {
            return Err(Error::param("beta_step", format!("must be positive, got {}", self.beta_step)));
        }
        if !(self.penalty_step > 0.0) {
            return Err(Error::param("penalty_step", format!("must be positive, got {}", self.penalty_step)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if self.ngrid < 2 {
            return Err(Error::param("ngrid", format!("must be at least 2, got {}", self.ngrid)));
        }
        let t = &self.tol;
        if !(t.loose > 0.0 && t.smooth_stop > 0.0 && t.zero_one_stop > 0.0 && t.tau > 0.0) {
            return Err(Error::param("tolerances", "all tolerances must be positive"));
        }
        ElementStiffness::new(self.poisson)?;
        match (self.target, self.model.kind()) {
            (Target::Smooth, kind) if kind.is_penalized() && !self.allow_penalized_smooth => Err(Error::Config(format!(
                "a smooth target needs the ersatz model; the {} model overestimates the compliance of \
                 intermediate boundary elements (set allow_penalized_smooth = true for diagnostic runs)",
                kind.name()
            ))),
            (Target::ZeroOne, ModelKind::Ersatz) => Err(Error::Config(
                "a zero_one target needs a penalization model (simp or hs)".into(),
            )),
            _ => Ok(()),
        }
    }

    fn update_params(&self) -> UpdateParams {
        UpdateParams {
            volfrac: self.volfrac,
            x_min: self.model.x_min(),
            move_limit: self.move_limit,
        }
    }
}

/// One line of the optimization history.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    /// Compliance of the design analysed in this iteration.
    pub compliance: f64,
    /// Mean density after the update.
    pub volume: f64,
    /// ε between the analysed and updated designs.
    pub change: f64,
    pub tau: Option<f64>,
    pub smooth_compliance: Option<f64>,
    /// β after any increment made in this iteration.
    pub beta: f64,
    /// Material exponent used for the analysis (SIMP only).
    pub penalty: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub it: usize,
    pub beta: f64,
    pub penalty: Option<f64>,
    pub lambda: f64,
    pub threshold: f64,
    /// Damped sensitivities of the last iteration.
    pub prev_sensitivities: Vec<f64>,
    /// Design analysed in the last iteration.
    pub prev_x: Vec<f64>,
    pub history: Vec<IterationRecord>,
    pub phase: Target,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Design analysed in the final iteration; `compliance` belongs to it.
    pub design: Vec<f64>,
    /// Design produced by the final update.
    pub updated: Vec<f64>,
    pub compliance: f64,
    pub state: OptimizerState,
    /// Smooth counterpart of `design`.
    pub smooth: SmoothDesign,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Schedule {
    Projection,
    Continuation { p_max: f64 },
}

/// Floating projection optimization with the β schedule of `cfg.target`.
pub fn run_fpto(cfg: &FptoConfig, mesh: &Mesh) -> Result<RunOutcome> {
    run_fpto_with(cfg, mesh, |_| {})
}

pub fn run_fpto_with(cfg: &FptoConfig, mesh: &Mesh, observer: impl FnMut(&IterationRecord)) -> Result<RunOutcome> {
    optimize(cfg, mesh, Schedule::Projection, observer)
}

/// SIMP continuation baseline: β stays at `beta_start` while the exponent
/// grows from 1 by `penalty_step` up to the configured value, then follows
/// the 0/1 schedule (or stays put with `freeze_beta`).
pub fn run_continuation(cfg: &FptoConfig, mesh: &Mesh) -> Result<RunOutcome> {
    run_continuation_with(cfg, mesh, |_| {})
}

pub fn run_continuation_with(
    cfg: &FptoConfig,
    mesh: &Mesh,
    observer: impl FnMut(&IterationRecord),
) -> Result<RunOutcome> {
    if cfg.model.kind() != ModelKind::Simp {
        return Err(Error::Config("continuation requires the simp model".into()));
    }
    optimize(
        cfg,
        mesh,
        Schedule::Continuation {
            p_max: cfg.model.penalty(),
        },
        observer,
    )
}

fn optimize(
    cfg: &FptoConfig,
    mesh: &Mesh,
    schedule: Schedule,
    mut observer: impl FnMut(&IterationRecord),
) -> Result<RunOutcome> {
    match schedule {
        Schedule::Projection => cfg.validate()?,
        Schedule::Continuation { .. } => {
            let mut c = cfg.clone();
            c.target = Target::ZeroOne;
            c.validate()?
        }
    }
    let n = mesh.element_count();
    let ke = ElementStiffness::new(cfg.poisson)?;
    let mut solver = FeaSolver::new(mesh, ke);
    let kernel = FilterKernel::new(mesh, cfg.r_min)?;
    let params = cfg.update_params();
    let x_min = cfg.model.x_min();
    let young = cfg.model.young();

    let mut penalty_steps = 0u32;
    let mut model = match schedule {
        Schedule::Projection => cfg.model,
        Schedule::Continuation { .. } => cfg.model.with_penalty(1.0),
    };
    let phase = match schedule {
        Schedule::Projection => cfg.target,
        Schedule::Continuation { .. } => Target::ZeroOne,
    };

    let mut x = vec![cfg.volfrac; n];
    let mut state = OptimizerState {
        it: 0,
        beta: cfg.beta_start,
        penalty: (model.kind() == ModelKind::Simp).then_some(model.penalty()),
        lambda: 0.0,
        threshold: 0.0,
        prev_sensitivities: Vec::new(),
        prev_x: x.clone(),
        history: Vec::new(),
        phase,
    };
    let mut last_tau: Option<f64> = None;
    let mut last_smooth: Option<(usize, SmoothDesign)> = None;
    let mut compliance = f64::NAN;
    let mut converged = false;

    while state.it < cfg.max_iter {
        state.it += 1;
        let it = state.it;
        let moduli: Vec<f64> = x.iter().map(|&xi| model.modulus_unchecked(xi)).collect();
        let sol = solver.solve(&moduli)?;
        compliance = sol.compliance;

        let raw = compute_sensitivities(&x, &sol.ce, &model)?;
        let prev = (!state.prev_sensitivities.is_empty()).then_some(state.prev_sensitivities.as_slice());
        let dc = damp_sensitivities(&raw, prev, it)?;
        let up = oc_update(&x, &dc, &kernel, state.beta, &params)?;
        let eps = convergence_epsilon(&up.x, &x)?;

        let mut record_tau = None;
        let mut record_cs = None;
        let used_penalty = state.penalty;
        match (schedule, phase) {
            (Schedule::Projection, Target::Smooth) => {
                if eps <= cfg.tol.loose && !cfg.freeze_beta {
                    let sd = smooth_design(&mut solver, &x, x_min, young, cfg.ngrid)?;
                    let t = tau(sd.compliance, compliance);
                    record_tau = Some(t);
                    record_cs = Some(sd.compliance);
                    last_tau = Some(t);
                    last_smooth = Some((it, sd));
                    if t > cfg.tol.tau {
                        state.beta += cfg.beta_step;
                    }
                }
                converged = eps <= cfg.tol.smooth_stop && (cfg.freeze_beta || last_tau.is_some_and(|t| t <= cfg.tol.tau));
            }
            (Schedule::Projection, Target::ZeroOne) => {
                if eps <= cfg.tol.zero_one_stop {
                    converged = true;
                } else if eps <= cfg.tol.loose && !cfg.freeze_beta {
                    if cfg.smooth_diagnostic {
                        let sd = smooth_design(&mut solver, &x, x_min, young, cfg.ngrid)?;
                        record_tau = Some(tau(sd.compliance, compliance));
                        record_cs = Some(sd.compliance);
                        last_smooth = Some((it, sd));
                    }
                    state.beta += cfg.beta_step;
                }
            }
            (Schedule::Continuation { p_max }, _) => {
                if model.penalty() < p_max {
                    if eps <= cfg.tol.loose {
                        penalty_steps += 1;
                        let p = (1.0 + cfg.penalty_step * penalty_steps as f64).min(p_max);
                        model = model.with_penalty(p);
                        state.penalty = Some(p);
                    }
                } else if eps <= cfg.tol.zero_one_stop {
                    converged = true;
                } else if eps <= cfg.tol.loose && !cfg.freeze_beta {
                    state.beta += cfg.beta_step;
                }
            }
        }

        let record = IterationRecord {
            iter: it,
            compliance,
            volume: up.x.iter().sum::<f64>() / n as f64,
            change: eps,
            tau: record_tau,
            smooth_compliance: record_cs,
            beta: state.beta,
            penalty: used_penalty,
        };
        observer(&record);
        state.history.push(record);
        state.lambda = up.lambda;
        state.threshold = up.threshold;
        state.prev_sensitivities = dc;
        state.prev_x = std::mem::replace(&mut x, up.x);

        if converged {
            break;
        }
    }

    let design = state.prev_x.clone();
    let smooth = match last_smooth {
        Some((it, sd)) if it == state.it => sd,
        _ => smooth_design(&mut solver, &design, x_min, young, cfg.ngrid)?,
    };
    Ok(RunOutcome {
        design,
        updated: x,
        compliance,
        state,
        smooth,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fea::Problem;

    fn small_cantilever() -> Mesh {
        Mesh::build(&Problem::Cantilever, 30, 20).unwrap()
    }

    #[test]
    fn config_validation() {
        let ok = FptoConfig::new(0.5, MaterialModel::ersatz(), Target::Smooth);
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.volfrac = 1.5;
        assert!(bad.validate().is_err());
        let simp = MaterialModel::simp(3.0).unwrap();
        let mut smooth_simp = FptoConfig::new(0.5, simp, Target::Smooth);
        assert!(matches!(smooth_simp.validate(), Err(Error::Config(_))));
        smooth_simp.allow_penalized_smooth = true;
        assert!(smooth_simp.validate().is_ok());
        let ersatz_01 = FptoConfig::new(0.5, MaterialModel::ersatz(), Target::ZeroOne);
        assert!(ersatz_01.validate().is_err());
        let mut no_move = ok.clone();
        no_move.move_limit = 0.0;
        assert!(no_move.validate().is_err());
    }

    #[test]
    fn max_iter_exhaustion_is_flagged() {
        let mut cfg = FptoConfig::new(0.5, MaterialModel::ersatz(), Target::Smooth);
        cfg.max_iter = 3;
        let out = run_fpto(&cfg, &small_cantilever()).unwrap();
        assert!(!out.converged);
        assert_eq!(out.state.history.len(), 3);
        assert_eq!(out.state.it, 3);
    }

    #[test]
    fn small_smooth_run_invariants() {
        let mesh = small_cantilever();
        let cfg = FptoConfig::new(0.5, MaterialModel::ersatz(), Target::Smooth);
        let mut seen = 0;
        let out = run_fpto_with(&cfg, &mesh, |_| seen += 1).unwrap();
        assert!(out.converged, "{} iterations", out.state.it);
        assert_eq!(seen, out.state.history.len());
        let h = &out.state.history;
        for w in h.windows(2) {
            assert!(w[1].beta >= w[0].beta);
            assert_eq!(w[1].iter, w[0].iter + 1);
        }
        // every β increment happens on an iteration with ε within the loose bound
        for (i, r) in h.iter().enumerate() {
            let before = if i == 0 { cfg.beta_start } else { h[i - 1].beta };
            if r.beta > before {
                assert!(r.change <= 1e-3);
                assert!(r.tau.unwrap() > 1e-2);
            }
        }
        let last = h.last().unwrap();
        assert!(last.change <= 1e-4);
        assert!(last.tau.unwrap() <= 1e-2);
        assert!(tau(out.smooth.compliance, out.compliance) <= 1e-2);
        let mean = out.updated.iter().sum::<f64>() / out.updated.len() as f64;
        assert!(mean <= 0.5 + 1e-9);
        assert!(out.updated.iter().all(|&v| (1e-3..=1.0).contains(&v)));
    }

    #[test]
    fn symmetric_problem_gives_symmetric_design() {
        let mesh = Mesh::build(&Problem::Mbb, 20, 6).unwrap();
        let mut cfg = FptoConfig::new(0.5, MaterialModel::simp(3.0).unwrap(), Target::ZeroOne);
        cfg.max_iter = 60;
        let out = run_fpto(&cfg, &mesh).unwrap();
        let (nelx, nely) = (20, 6);
        let mut asym: f64 = 0.0;
        for ix in 0..nelx {
            for iy in 0..nely {
                let a = out.updated[ix * nely + iy];
                let b = out.updated[(nelx - 1 - ix) * nely + iy];
                asym = asym.max((a - b).abs());
            }
        }
        assert!(asym <= 1e-6, "asymmetry {asym}");
    }

    #[test]
    fn continuation_penalty_schedule() {
        let mesh = small_cantilever();
        let cfg = FptoConfig::new(0.5, MaterialModel::simp(3.0).unwrap(), Target::ZeroOne);
        let out = run_continuation(&cfg, &mesh).unwrap();
        let ps: Vec<f64> = out.state.history.iter().map(|r| r.penalty.unwrap()).collect();
        assert_eq!(ps[0], 1.0);
        assert!(ps.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out.state.penalty, Some(3.0));
        // β only moves once the exponent has reached its cap
        for r in &out.state.history {
            if r.penalty.unwrap() < 3.0 {
                assert_eq!(r.beta, cfg.beta_start);
            }
        }
        assert!(out.converged);
        let mut frozen = cfg.clone();
        frozen.freeze_beta = true;
        let out = run_continuation(&frozen, &mesh).unwrap();
        assert!(out.state.history.iter().all(|r| r.beta == cfg.beta_start));
        assert!(run_continuation(&FptoConfig::new(0.5, MaterialModel::hs_upper_2d(), Target::ZeroOne), &mesh).is_err());
    }

    #[test]
    fn oc_ratio_is_one_at_converged_unfiltered_design() {
        // Without filtering and with a frozen, inactive projection the
        // update is the plain multiplicative OC rule, whose fixed point
        // satisfies -dC/dx_i / (Λ V_i) = 1 on every non-bound element.
        let mesh = Mesh::build(&Problem::Cantilever, 12, 8).unwrap();
        let mut cfg = FptoConfig::new(0.5, MaterialModel::ersatz(), Target::Smooth);
        cfg.r_min = 1.0;
        cfg.freeze_beta = true;
        cfg.tol.smooth_stop = 1e-7;
        cfg.max_iter = 3000;
        let out = run_fpto(&cfg, &mesh).unwrap();
        assert!(out.converged);
        let lambda = out.state.lambda;
        let mut checked = 0;
        for (xi, dc) in out.design.iter().zip(&out.state.prev_sensitivities) {
            if *xi > 1e-3 + 0.02 && *xi < 1.0 - 0.02 {
                let ratio = -dc / lambda;
                assert!((ratio - 1.0).abs() <= 0.05, "x={xi} ratio={ratio}");
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
