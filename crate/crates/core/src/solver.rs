//! Gradient-Eigenstep on the penalty `g`, region-preserving backtracking, the
//! plateau scheme for an unknown penalty parameter, and a gradient flow that
//! restores feasibility.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::criticality::{certify, CriticalityCertificate};
use crate::error::{Error, Result};
use crate::numerics;
use crate::penalty::{self, default_fd_step, in_region, penalty_value, BetaThresholds, PenaltyEval};
use crate::problem::{ProblemSpec, RegionParams};

/// Plateaus tried by [`plateau`] before giving up.
pub const MAX_PLATEAUS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub eps1: f64,
    /// `∞` (JSON `null`) selects the first-order method.
    #[serde(with = "crate::json::inf_as_null")]
    pub eps2: f64,
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub alpha01: f64,
    pub alpha02: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    /// Relative step of the finite-difference `∇²g`.
    pub fd_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eps1: 1e-6,
            eps2: 1e-4,
            beta: 1.0,
            c1: 1e-4,
            c2: 0.4,
            tau1: 0.5,
            tau2: 0.5,
            alpha01: 1.0,
            alpha02: 1.0,
            max_iters: 10_000,
            max_backtracks: 60,
            fd_step: default_fd_step(),
        }
    }
}

impl SolverConfig {
    pub fn new(eps1: f64, eps2: f64, beta: f64) -> Self {
        Self { eps1, eps2, beta, ..Self::default() }
    }

    /// Checks the parameter ranges, including `ε₁ ≤ R/2` for the region.
    pub fn validate(&self, region: &RegionParams) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let open01 = |v: f64| v > 0.0 && v < 1.0;
        if !(self.eps1 > 0.0 && self.eps1 <= region.r / 2.0) {
            return bad(format!("eps1 must lie in (0, R/2] = (0, {}], got {}", region.r / 2.0, self.eps1));
        }
        if self.eps2.is_nan() || self.eps2 <= 0.0 {
            return bad(format!("eps2 must be positive or infinite, got {}", self.eps2));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        if !open01(self.c1) {
            return bad(format!("c1 must lie in (0, 1), got {}", self.c1));
        }
        if !(self.c2 > 0.0 && self.c2 < 0.5) {
            return bad(format!("c2 must lie in (0, 1/2), got {}", self.c2));
        }
        if !open01(self.tau1) || !open01(self.tau2) {
            return bad("tau1 and tau2 must lie in (0, 1)".into());
        }
        if !(self.alpha01 > 0.0 && self.alpha01.is_finite() && self.alpha02 > 0.0 && self.alpha02.is_finite()) {
            return bad("initial step sizes must be positive".into());
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return bad(format!("fd_step must be positive, got {}", self.fd_step));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Gradient,
    Eigen,
    Terminal,
}

/// One iteration. Norms refer to the iterate before the step; the final
/// `terminal` record describes the returned point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub kind: StepKind,
    /// Accepted `α` (the step is `−α∇g` or `αd` with `‖d‖ = 1`).
    pub step_len: f64,
    pub g_before: f64,
    pub g_after: f64,
    pub grad_norm: f64,
    pub h_norm: f64,
    /// `⟨d, ∇²g d⟩` on eigensteps; the smallest eigenvalue of `∇²g` on a
    /// terminal record when it was computed.
    pub curvature: Option<f64>,
    pub backtracks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIters,
    RankDeficient,
    BetaTooSmall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub config: SolverConfig,
    pub records: Vec<IterationRecord>,
    pub final_x: Vec<f64>,
    /// Layered criticality of `final_x` against `(ε₁, 2ε₁, ε₂)`.
    pub certificate: CriticalityCertificate,
    pub termination: Termination,
}

impl RunTrace {
    pub fn final_point(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.final_x)
    }

    pub fn steps(&self) -> impl Iterator<Item = &IterationRecord> {
        self.records.iter().filter(|r| r.kind != StepKind::Terminal)
    }

    pub fn count(&self, kind: StepKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    pub fn terminal(&self) -> Option<&IterationRecord> {
        self.records.last().filter(|r| r.kind == StepKind::Terminal)
    }
}

/// An accepted backtracking step.
#[derive(Debug, Clone)]
pub struct Backtracked {
    pub alpha: f64,
    pub x_next: DVector<f64>,
    pub backtracks: usize,
    pub g_before: f64,
    pub g_after: f64,
}

#[allow(clippy::too_many_arguments)]
fn backtrack(
    p: &ProblemSpec,
    x: &DVector<f64>,
    beta: f64,
    dir: &DVector<f64>,
    alpha0: f64,
    tau: f64,
    max_backtracks: usize,
    kind: &'static str,
    required: impl Fn(f64) -> f64,
) -> Result<Backtracked> {
    let g_before = penalty_value(p, x, beta)?;
    let mut alpha = alpha0;
    for j in 0..=max_backtracks {
        let trial = x + dir * alpha;
        if in_region(p, &trial) {
            match penalty_value(p, &trial, beta) {
                Ok(g_after) if g_before - g_after >= required(alpha) => {
                    return Ok(Backtracked { alpha, x_next: trial, backtracks: j, g_before, g_after });
                }
                Ok(_) | Err(Error::NonFinite(_)) => {}
                Err(e) => return Err(e),
            }
        }
        alpha *= tau;
    }
    Err(Error::BacktrackFailure { kind, backtracks: max_backtracks })
}

/// Armijo backtracking along `−∇g` that only accepts points of the region.
pub fn gradient_backtrack(
    p: &ProblemSpec,
    x: &DVector<f64>,
    beta: f64,
    grad_g: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<Backtracked> {
    let gn = grad_g.norm();
    if !(gn > 0.0 && gn.is_finite()) {
        return Err(Error::InvalidArgument("gradient backtracking needs a nonzero finite gradient".into()));
    }
    let dir = -grad_g;
    backtrack(p, x, beta, &dir, cfg.alpha01, cfg.tau1, cfg.max_backtracks, "gradient", |a| {
        cfg.c1 * a * (gn * gn)
    })
}

/// Backtracking along a unit negative-curvature direction `d` with
/// `hess_quad = ⟨d, ∇²g d⟩ < 0`.
pub fn eigen_backtrack(
    p: &ProblemSpec,
    x: &DVector<f64>,
    beta: f64,
    d: &DVector<f64>,
    hess_quad: f64,
    cfg: &SolverConfig,
) -> Result<Backtracked> {
    if (d.norm() - 1.0).abs() > 1e-10 || hess_quad.is_nan() || hess_quad >= 0.0 {
        return Err(Error::InvalidArgument(
            "eigenstep needs a unit direction of negative curvature".into(),
        ));
    }
    backtrack(p, x, beta, d, cfg.alpha02, cfg.tau2, cfg.max_backtracks, "eigen", |a| {
        -cfg.c2 * a * a * hess_quad
    })
}

/// Step sizes below which the gradient step `x − t∇g` provably stays in the
/// region, given the pointwise thresholds at `x`. Non-positive when
/// `β ≤ β₁(x)`.
pub fn gradient_step_floor(region: &RegionParams, ev: &PenaltyEval, th: &BetaThresholds) -> f64 {
    let gn = ev.grad_norm();
    let (r, ch, beta) = (region.r, region.c_h, ev.beta);
    let curvature_limit = (r / (2.0 * ch)).sqrt() / gn;
    let decrease_limit = (2.0 * beta * th.sigma_min * th.sigma_min - th.sigma_max * th.c_lambda) * r
        / (2.0 * ch * gn * gn);
    let stability_limit = 1.0 / (2.0 * beta * th.sigma_max * th.sigma_max);
    curvature_limit.min(decrease_limit).min(stability_limit)
}

/// Step size below which a unit step `x + td` stays in the region.
pub fn eigen_step_floor(region: &RegionParams, sigma_max: f64) -> f64 {
    let (r, ch) = (region.r, region.c_h);
    (-sigma_max + (sigma_max * sigma_max + 2.0 * ch * r).sqrt()) / (2.0 * ch)
}

enum Exit {
    Converged,
    MaxIters,
    RankDeficient,
    BacktrackFailure,
    /// Plateau trigger `B(x) ≥ β`, with the measured `B`.
    Threshold(f64),
    /// Plateau iteration budget spent.
    Budget,
}

struct InnerRun {
    x: DVector<f64>,
    eval: PenaltyEval,
    exit: Exit,
    /// `λ_min(∇²g)` at the returned point if it was computed.
    min_eig: Option<f64>,
    steps: usize,
}

type StopRule<'a> = dyn FnMut(&PenaltyEval, usize) -> Result<Option<Exit>> + 'a;

/// The Gradient-Eigenstep loop. `stop` sees every accepted iterate (and the
/// start) with the number of steps taken in this run, before the
/// convergence test.
fn run_inner(
    p: &ProblemSpec,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    budget: usize,
    records: &mut Vec<IterationRecord>,
    stop: &mut StopRule<'_>,
) -> Result<InnerRun> {
    let beta = cfg.beta;
    let mut x = x0.clone();
    let mut ev = PenaltyEval::new(p, &x, beta)?;
    let mut steps = 0;
    let done = |x, eval, exit, min_eig, steps| Ok(InnerRun { x, eval, exit, min_eig, steps });
    loop {
        if let Some(exit) = stop(&ev, steps)? {
            return done(x, ev, exit, None, steps);
        }
        let gn = ev.grad_norm();
        let (kind, curvature, step) = if gn > cfg.eps1 {
            if steps >= budget {
                return done(x, ev, Exit::MaxIters, None, steps);
            }
            (StepKind::Gradient, None, gradient_backtrack(p, &x, beta, &ev.grad_g, cfg))
        } else if cfg.eps2.is_finite() {
            let hess = match penalty::penalty_hess(p, &x, beta, cfg.fd_step) {
                Err(Error::RankDeficient { .. }) => return done(x, ev, Exit::RankDeficient, None, steps),
                r => r?,
            };
            let (lmin, v) = numerics::sym_eig_min(&hess)?;
            if lmin >= -cfg.eps2 {
                return done(x, ev, Exit::Converged, Some(lmin), steps);
            }
            if steps >= budget {
                return done(x, ev, Exit::MaxIters, Some(lmin), steps);
            }
            let d = if v.dot(&ev.grad_g) > 0.0 { -v } else { v };
            let quad = d.dot(&(&hess * &d));
            (StepKind::Eigen, Some(quad), eigen_backtrack(p, &x, beta, &d, quad, cfg))
        } else {
            return done(x, ev, Exit::Converged, None, steps);
        };
        let step = match step {
            Ok(s) => s,
            Err(Error::BacktrackFailure { .. }) => return done(x, ev, Exit::BacktrackFailure, None, steps),
            Err(Error::RankDeficient { .. }) => return done(x, ev, Exit::RankDeficient, None, steps),
            Err(e) => return Err(e),
        };
        let next = match PenaltyEval::new(p, &step.x_next, beta) {
            Ok(n) => n,
            Err(Error::RankDeficient { .. }) => return done(x, ev, Exit::RankDeficient, None, steps),
            Err(e) => return Err(e),
        };
        records.push(IterationRecord {
            k: records.len(),
            kind,
            step_len: step.alpha,
            g_before: step.g_before,
            g_after: step.g_after,
            grad_norm: gn,
            h_norm: ev.h_norm(),
            curvature,
            backtracks: step.backtracks,
        });
        x = step.x_next;
        ev = next;
        steps += 1;
    }
}

fn finish(
    p: &ProblemSpec,
    cfg: SolverConfig,
    mut records: Vec<IterationRecord>,
    run: &InnerRun,
    termination: Termination,
) -> Result<RunTrace> {
    records.push(IterationRecord {
        k: records.len(),
        kind: StepKind::Terminal,
        step_len: 0.0,
        g_before: run.eval.g_val,
        g_after: run.eval.g_val,
        grad_norm: run.eval.grad_norm(),
        h_norm: run.eval.h_norm(),
        curvature: run.min_eig,
        backtracks: 0,
    });
    let certificate = certify(p, &run.x, cfg.eps1, 2.0 * cfg.eps1, cfg.eps2)?;
    Ok(RunTrace {
        config: cfg,
        records,
        final_x: run.x.as_slice().to_vec(),
        certificate,
        termination,
    })
}

fn check_start(p: &ProblemSpec, x0: &DVector<f64>, cfg: &SolverConfig) -> Result<()> {
    cfg.validate(&p.region())?;
    if x0.len() != p.dim_x() {
        return Err(Error::InvalidArgument(format!(
            "start point has length {}, expected {}",
            x0.len(),
            p.dim_x()
        )));
    }
    if !in_region(p, x0) {
        return Err(Error::InvalidArgument("start point is outside the region ‖h‖ ≤ R".into()));
    }
    Ok(())
}

/// Runs Gradient-Eigenstep with the fixed penalty parameter `cfg.beta`.
///
/// Fails outright only on invalid input (bad config, a start outside the
/// region or where `Dh` is rank deficient); everything else is reported
/// through [`RunTrace::termination`].
pub fn gradient_eigenstep(p: &ProblemSpec, x0: &DVector<f64>, cfg: &SolverConfig) -> Result<RunTrace> {
    check_start(p, x0, cfg)?;
    let mut records = Vec::new();
    let run = run_inner(p, x0, cfg, cfg.max_iters, &mut records, &mut |_, _| Ok(None))?;
    let termination = match run.exit {
        Exit::Converged => Termination::Converged,
        Exit::MaxIters => Termination::MaxIters,
        Exit::RankDeficient => Termination::RankDeficient,
        Exit::BacktrackFailure => Termination::BetaTooSmall,
        Exit::Threshold(_) | Exit::Budget => unreachable!("no stop rule installed"),
    };
    finish(p, *cfg, records, &run, termination)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateauTrigger {
    /// `B(x) ≥ β` at an iterate.
    Threshold,
    /// More than `LP` iterations in the plateau.
    IterationBudget,
    /// Backtracking failed; handled like a threshold trigger with `B = β`.
    BacktrackFailure,
    Converged,
    MaxIters,
    RankDeficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauRecord {
    pub index: usize,
    pub beta: f64,
    /// Iteration budget `LP`; kept real since it grows geometrically.
    pub lp: f64,
    pub steps: usize,
    pub trigger: PlateauTrigger,
    /// `B` at the point where the plateau stopped, when measured.
    pub b_measured: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauOutcome {
    /// Records of all plateaus concatenated; `config.beta` is the last `β`.
    pub trace: RunTrace,
    pub plateaus: Vec<PlateauRecord>,
}

/// Plateau scheme: Gradient-Eigenstep with `β` raised whenever `B(x) ≥ β` or
/// the plateau's iteration budget runs out.
pub fn plateau(
    p: &ProblemSpec,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    gamma: f64,
    beta0: f64,
    lp0: usize,
) -> Result<PlateauOutcome> {
    plateau_capped(p, x0, cfg, gamma, beta0, lp0, MAX_PLATEAUS)
}

pub fn plateau_capped(
    p: &ProblemSpec,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    gamma: f64,
    beta0: f64,
    lp0: usize,
    max_plateaus: usize,
) -> Result<PlateauOutcome> {
    if !(gamma > 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidArgument(format!("gamma must exceed 1, got {gamma}")));
    }
    if lp0 == 0 {
        return Err(Error::InvalidArgument("lp0 must be at least 1".into()));
    }
    let mut run_cfg = SolverConfig { beta: beta0, ..*cfg };
    check_start(p, x0, &run_cfg)?;

    let mut beta = beta0;
    let mut lp = lp0 as f64;
    let mut x = x0.clone();
    let mut records = Vec::new();
    let mut plateaus = Vec::new();
    let mut used = 0usize;
    for index in 0..max_plateaus {
        run_cfg.beta = beta;
        let mut b_seen = None;
        let run = run_inner(p, &x, &run_cfg, cfg.max_iters - used, &mut records, &mut |ev, k| {
            let b = ev.thresholds()?.b_max;
            b_seen = Some(b);
            if b >= beta {
                Ok(Some(Exit::Threshold(b)))
            } else if k as f64 > lp {
                Ok(Some(Exit::Budget))
            } else {
                Ok(None)
            }
        })?;
        used += run.steps;
        let (trigger, next) = match run.exit {
            Exit::Threshold(b) => (PlateauTrigger::Threshold, Some(((gamma * b / beta).powi(4) * lp, gamma * b))),
            Exit::Budget => (PlateauTrigger::IterationBudget, Some((gamma.powi(4) * lp, gamma * beta))),
            Exit::BacktrackFailure => (PlateauTrigger::BacktrackFailure, Some((gamma.powi(4) * lp, gamma * beta))),
            Exit::Converged => (PlateauTrigger::Converged, None),
            Exit::MaxIters => (PlateauTrigger::MaxIters, None),
            Exit::RankDeficient => (PlateauTrigger::RankDeficient, None),
        };
        plateaus.push(PlateauRecord { index, beta, lp, steps: run.steps, trigger, b_measured: b_seen });
        match next {
            Some((lp_next, beta_next)) => {
                lp = lp_next;
                beta = beta_next;
                x = run.x;
            }
            None => {
                let termination = match trigger {
                    PlateauTrigger::Converged => Termination::Converged,
                    PlateauTrigger::MaxIters => Termination::MaxIters,
                    _ => Termination::RankDeficient,
                };
                let trace = finish(p, run_cfg, records, &run, termination)?;
                return Ok(PlateauOutcome { trace, plateaus });
            }
        }
    }
    Err(Error::NonTermination(max_plateaus))
}

/// `(t, φ(x(t)))` samples of the feasibility flow.
pub type DecayLog = Vec<(f64, f64)>;

/// `φ` below which the flow is considered feasible; `‖h‖ ≤ 1e-8`.
pub const FEASIBLE_PHI: f64 = 0.5e-16;

const MAX_STEP_HALVINGS: u32 = 40;

fn flow_field(p: &ProblemSpec, x: &DVector<f64>) -> DVector<f64> {
    -p.jac_h(x).tr_mul(&p.h(x))
}

fn phi(p: &ProblemSpec, x: &DVector<f64>) -> f64 {
    0.5 * p.h(x).norm_squared()
}

/// Integrates `ẋ = −Dh(x)ᵀh(x)` with classical RK4, halving the step
/// whenever `φ = ½‖h‖²` would increase. Stops at `t_end` or once
/// `φ ≤ FEASIBLE_PHI`. Returns the end point and the `(t, φ)` log, starting
/// with `(0, φ(x0))`.
pub fn restore_feasibility(
    p: &ProblemSpec,
    x0: &DVector<f64>,
    step: f64,
    t_end: f64,
) -> Result<(DVector<f64>, DecayLog)> {
    if !(step > 0.0 && step.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument("step must be positive and t_end nonnegative".into()));
    }
    if x0.len() != p.dim_x() || !in_region(p, x0) {
        return Err(Error::InvalidArgument("start point must lie in the region ‖h‖ ≤ R".into()));
    }
    let mut x = x0.clone();
    let mut t = 0.0;
    let mut phi_x = phi(p, &x);
    let mut log = vec![(t, phi_x)];
    let mut dt = step;
    let min_dt = step * 0.5f64.powi(MAX_STEP_HALVINGS as i32);
    while phi_x > FEASIBLE_PHI && t < t_end {
        let h = dt.min(t_end - t);
        let k1 = flow_field(p, &x);
        let k2 = flow_field(p, &(&x + &k1 * (h / 2.0)));
        let k3 = flow_field(p, &(&x + &k2 * (h / 2.0)));
        let k4 = flow_field(p, &(&x + &k3 * h));
        let trial = &x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        let phi_trial = phi(p, &trial);
        if !phi_trial.is_finite() {
            return Err(Error::NonFinite("feasibility flow".into()));
        }
        if phi_trial > phi_x {
            dt /= 2.0;
            if dt < min_dt {
                return Err(Error::StepSize(format!(
                    "phi keeps increasing at t = {t} even with step {dt:e}"
                )));
            }
            continue;
        }
        x = trial;
        t += h;
        phi_x = phi_trial;
        log.push((t, phi_x));
    }
    Ok((x, log))
}
