//! Command-line front end: built-in problems, run specifications and the
//! `solve`, `plateau`, `restore`, `check` and `sweep` commands.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criticality::layered_hess;
use crate::error::{Error, Result};
use crate::fdcheck::{check_problem, DerivativeReport};
use crate::problem::{
    gaussian_vector, sample_in_region, Constraint, LinearCost, ProblemSpec, QuadraticCost,
    StiefelConstraint, ProductConstraint, DEFAULT_RADIUS,
};
use crate::solver::{
    gradient_eigenstep, plateau, restore_feasibility, RunTrace, SolverConfig, StepKind, Termination,
    FEASIBLE_PHI,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_USAGE: i32 = 64;

/// Environment variable that overrides `--seed`.
pub const SEED_ENV: &str = "FLETCHER_SEED";

pub const BUILTIN_IDS: [&str; 4] = ["sphere", "rayleigh", "stiefel", "product"];

const DEFAULT_PRODUCT: &str = "sphere:3,stiefel:4x2";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProblemParams {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub r: Option<f64>,
    pub seed: u64,
    /// Dense comma-separated matrix for `rayleigh`; `diag(1..n)` otherwise.
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Solve,
    Plateau,
    Restore,
    Check,
    Sweep,
}

/// Parameters of the individual commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModeParams {
    pub beta0: f64,
    pub gamma: f64,
    pub lp0: usize,
    pub step: f64,
    pub t_end: f64,
    pub seeds: usize,
    pub eps: Vec<f64>,
    /// Sweep with `ε₂ = ε` instead of the first-order method.
    pub second_order: bool,
}

impl Default for ModeParams {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            gamma: 2.0,
            lp0: 100,
            step: 1e-3,
            t_end: 5.0,
            seeds: 10,
            eps: vec![1e-2, 1e-3, 1e-4],
            second_order: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub problem_id: String,
    pub problem_params: ProblemParams,
    pub solver: SolverConfig,
    pub mode: Mode,
    pub output_path: Option<PathBuf>,
    pub mode_params: ModeParams,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            problem_id: "sphere".into(),
            problem_params: ProblemParams::default(),
            solver: SolverConfig::default(),
            mode: Mode::Solve,
            output_path: None,
            mode_params: ModeParams::default(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn cost_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0xC057_C057)
}

fn unit(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

/// Reads a dense matrix, one comma-separated row per line.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|c| c.trim().parse::<f64>().map_err(|e| usage(format!("{}: bad entry {c:?}: {e}", path.display()))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(usage(format!("{}: expected a square matrix", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn product_blocks(desc: &str, r: f64) -> Result<Vec<Arc<dyn Constraint>>> {
    desc.split(',')
        .map(|part| {
            let bad = || usage(format!("bad product block {part:?}; use sphere:N or stiefel:NxP"));
            let (kind, dims) = part.trim().split_once(':').ok_or_else(bad)?;
            let (n, p) = match kind {
                "sphere" => (dims.parse().map_err(|_| bad())?, 1),
                "stiefel" => {
                    let (n, p) = dims.split_once('x').ok_or_else(bad)?;
                    (n.parse().map_err(|_| bad())?, p.parse().map_err(|_| bad())?)
                }
                _ => return Err(bad()),
            };
            Ok(Arc::new(StiefelConstraint::new(n, p, r)?) as Arc<dyn Constraint>)
        })
        .collect()
}

/// Resolves a built-in problem id.
///
/// * `sphere`: unit sphere in `R^n` (default 10), cost `⟨x, e₁⟩`.
/// * `rayleigh`: `½⟨x, Ax⟩` on the sphere, `A = diag(1..n)` or read from
///   `matrix`.
/// * `stiefel`: `St(n, p)` (default 8×2) with a seeded random linear cost.
/// * `product[:blocks]`: product of `sphere:N` and `stiefel:NxP` blocks
///   (default `sphere:3,stiefel:4x2`) with a seeded random linear cost.
pub fn build_problem(id: &str, params: &ProblemParams) -> Result<ProblemSpec> {
    let r = params.r.unwrap_or(DEFAULT_RADIUS);
    let (name, rest) = id.split_once(':').unwrap_or((id, ""));
    let spec = match name {
        "sphere" => {
            let n = params.n.unwrap_or(10);
            ProblemSpec::new(
                Arc::new(StiefelConstraint::new(n, 1, r)?),
                Arc::new(LinearCost { c: unit(n, 0) }),
            )?
        }
        "rayleigh" => {
            let a = match &params.matrix {
                Some(path) => read_matrix_csv(path)?,
                None => {
                    let n = params.n.unwrap_or(10);
                    DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| (i + 1) as f64))
                }
            };
            if params.n.is_some_and(|n| n != a.nrows()) {
                return Err(usage("--n disagrees with the matrix size"));
            }
            let n = a.nrows();
            ProblemSpec::new(
                Arc::new(StiefelConstraint::new(n, 1, r)?),
                Arc::new(QuadraticCost::new(a, DVector::zeros(n))?),
            )?
        }
        "stiefel" => {
            let (n, p) = (params.n.unwrap_or(8), params.p.unwrap_or(2));
            let c = gaussian_vector(&mut cost_rng(params.seed), n * p);
            ProblemSpec::new(Arc::new(StiefelConstraint::new(n, p, r)?), Arc::new(LinearCost { c }))?
        }
        "product" => {
            let desc = if rest.is_empty() { DEFAULT_PRODUCT } else { rest };
            let constraint = ProductConstraint::new(product_blocks(desc, r)?)?;
            let c = gaussian_vector(&mut cost_rng(params.seed), constraint.dim_x());
            ProblemSpec::new(Arc::new(constraint), Arc::new(LinearCost { c }))?
        }
        _ => {
            return Err(usage(format!(
                "unknown problem {id:?}; expected one of {}",
                BUILTIN_IDS.join(", ")
            )))
        }
    };
    if !rest.is_empty() && name != "product" {
        return Err(usage(format!("problem {name:?} takes no block list")));
    }
    Ok(spec)
}

#[derive(Parser, Debug)]
#[command(name = "fletcher", version, about = "Smooth exact penalty solver for equality-constrained problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Gradient-Eigenstep with a fixed penalty parameter; writes the trace.
    Solve(Common),
    /// Plateau scheme with growing penalty parameter.
    Plateau {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        beta0: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        lp0: Option<usize>,
    },
    /// Feasibility-restoring gradient flow from a seeded infeasible point.
    Restore {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        step: Option<f64>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Finite-difference check of every derivative.
    Check {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at `--seed`.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// One solve per tolerance; writes a CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        eps: Option<Vec<f64>>,
        /// Use `eps2 = eps` instead of the first-order method.
        #[arg(long)]
        second_order: bool,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON run specification; flags override its values.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use `diag(1..n)` for rayleigh (the default without `--matrix`).
    #[arg(long, conflicts_with = "matrix")]
    diag: bool,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    eps1: Option<f64>,
    /// `inf` selects the first-order method.
    #[arg(long)]
    eps2: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c1: Option<f64>,
    #[arg(long)]
    c2: Option<f64>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long)]
    alpha01: Option<f64>,
    #[arg(long)]
    alpha02: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    max_backtracks: Option<usize>,
    #[arg(long)]
    fd_step: Option<f64>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl Common {
    fn resolve(self, mode: Mode) -> Result<RunSpec> {
        let mut spec = match &self.spec {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?
            }
            None => RunSpec::default(),
        };
        spec.mode = mode;
        set(&mut spec.problem_id, self.problem);
        let pp = &mut spec.problem_params;
        if self.n.is_some() {
            pp.n = self.n;
        }
        if self.p.is_some() {
            pp.p = self.p;
        }
        if self.r.is_some() {
            pp.r = self.r;
        }
        set(&mut pp.seed, self.seed);
        if self.diag {
            pp.matrix = None;
        }
        if self.matrix.is_some() {
            pp.matrix = self.matrix;
        }
        if let Ok(v) = std::env::var(SEED_ENV) {
            pp.seed = v.trim().parse().map_err(|_| usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}")))?;
        }
        if self.output.is_some() {
            spec.output_path = self.output;
        }
        let s = &mut spec.solver;
        set(&mut s.eps1, self.eps1);
        set(&mut s.eps2, self.eps2);
        set(&mut s.beta, self.beta);
        set(&mut s.c1, self.c1);
        set(&mut s.c2, self.c2);
        set(&mut s.tau1, self.tau1);
        set(&mut s.tau2, self.tau2);
        set(&mut s.alpha01, self.alpha01);
        set(&mut s.alpha02, self.alpha02);
        set(&mut s.max_iters, self.max_iters);
        set(&mut s.max_backtracks, self.max_backtracks);
        set(&mut s.fd_step, self.fd_step);
        Ok(spec)
    }
}

fn error_code(e: &Error) -> i32 {
    match e {
        Error::InvalidArgument(_) => EXIT_USAGE,
        Error::NonTermination(_) => EXIT_NOT_CONVERGED,
        _ => EXIT_NUMERICAL,
    }
}

fn emit(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| usage(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| usage(format!("cannot write to stdout: {e}"))),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable output");
    s.push('\n');
    s
}

fn termination_code(t: Termination) -> i32 {
    match t {
        Termination::Converged => EXIT_OK,
        Termination::MaxIters => EXIT_NOT_CONVERGED,
        Termination::RankDeficient | Termination::BetaTooSmall => EXIT_NUMERICAL,
    }
}

fn termination_name(t: Termination) -> &'static str {
    match t {
        Termination::Converged => "converged",
        Termination::MaxIters => "max_iters",
        Termination::RankDeficient => "rank_deficient",
        Termination::BetaTooSmall => "beta_too_small",
    }
}

/// `λ_min` of the layered Hessian at the final point, `NaN` if unavailable.
fn final_min_eig(p: &ProblemSpec, trace: &RunTrace) -> f64 {
    layered_hess(p, &trace.final_point()).map_or(f64::NAN, |lq| lq.min_eig)
}

fn summary(p: &ProblemSpec, trace: &RunTrace) -> String {
    format!(
        "{}: iters={} (gradient {}, eigen {}) h_norm={:.3e} riem_grad_norm={:.3e} min_eig={:.6e}",
        termination_name(trace.termination),
        trace.steps().count(),
        trace.count(StepKind::Gradient),
        trace.count(StepKind::Eigen),
        trace.certificate.eps0_measured,
        trace.certificate.eps1_measured,
        final_min_eig(p, trace),
    )
}

fn cmd_solve(spec: &RunSpec) -> Result<i32> {
    let p = build_problem(&spec.problem_id, &spec.problem_params)?;
    let x0 = p.init_point(spec.problem_params.seed);
    let trace = gradient_eigenstep(&p, &x0, &spec.solver)?;
    emit(spec.output_path.as_deref(), &to_json(&trace))?;
    eprintln!("{}", summary(&p, &trace));
    Ok(termination_code(trace.termination))
}

fn cmd_plateau(spec: &RunSpec) -> Result<i32> {
    let p = build_problem(&spec.problem_id, &spec.problem_params)?;
    let x0 = p.init_point(spec.problem_params.seed);
    let mp = &spec.mode_params;
    let out = plateau(&p, &x0, &spec.solver, mp.gamma, mp.beta0, mp.lp0)?;
    emit(spec.output_path.as_deref(), &to_json(&out))?;
    eprintln!("plateaus={} final_beta={:.6e} {}", out.plateaus.len(), out.trace.config.beta, summary(&p, &out.trace));
    Ok(termination_code(out.trace.termination))
}

#[derive(Serialize)]
struct RestoreOutput {
    final_x: Vec<f64>,
    final_h_norm: f64,
    decay_log: Vec<(f64, f64)>,
}

fn cmd_restore(spec: &RunSpec) -> Result<i32> {
    let p = build_problem(&spec.problem_id, &spec.problem_params)?;
    let x0 = sample_in_region(p.constraint.as_ref(), spec.problem_params.seed);
    let (x, decay_log) = restore_feasibility(&p, &x0, spec.mode_params.step, spec.mode_params.t_end)?;
    let out = RestoreOutput { final_h_norm: p.h(&x).norm(), final_x: x.as_slice().to_vec(), decay_log };
    emit(spec.output_path.as_deref(), &to_json(&out))?;
    let phi_end = out.decay_log.last().map_or(f64::NAN, |l| l.1);
    eprintln!(
        "restore: steps={} t={} h_norm={:.3e}",
        out.decay_log.len() - 1,
        out.decay_log.last().map_or(0.0, |l| l.0),
        out.final_h_norm
    );
    Ok(if phi_end <= FEASIBLE_PHI { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_check(spec: &RunSpec) -> Result<i32> {
    let p = build_problem(&spec.problem_id, &spec.problem_params)?;
    let n = spec.mode_params.seeds;
    if n == 0 {
        return Err(usage("--seeds must be at least 1"));
    }
    let first = spec.problem_params.seed;
    let seeds: Vec<u64> = (0..n as u64).map(|i| first.wrapping_add(i)).collect();
    let reports: Vec<DerivativeReport> = check_problem(&p, &seeds);
    emit(spec.output_path.as_deref(), &to_json(&reports))?;
    let failed: Vec<&str> = reports.iter().filter(|r| !r.pass).map(|r| r.target.as_str()).collect();
    if failed.is_empty() {
        eprintln!("check: all {} derivative targets pass over {n} seeds", reports.len());
        Ok(EXIT_OK)
    } else {
        eprintln!("check: failing targets: {}", failed.join(", "));
        Ok(EXIT_NOT_CONVERGED)
    }
}

/// Positional notation with 12 significant digits.
pub fn format_sig12(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() { "nan".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0.00000000000".into();
    }
    let sci = format!("{v:.11e}");
    let exp: i32 = sci.rsplit_once('e').and_then(|(_, e)| e.parse().ok()).unwrap_or(0);
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

pub const SWEEP_HEADER: &str =
    "eps,iters_total,iters_grad,iters_eigen,final_h_norm,final_grad_norm,final_min_eig,g_final,termination";

/// One CSV row of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub eps: f64,
    pub trace: RunTrace,
    pub min_eig: f64,
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let t = &self.trace;
        let last = t.terminal().expect("traces end with a terminal record");
        format!(
            "{},{},{},{},{},{},{},{},{}",
            format_sig12(self.eps),
            t.steps().count(),
            t.count(StepKind::Gradient),
            t.count(StepKind::Eigen),
            format_sig12(last.h_norm),
            format_sig12(last.grad_norm),
            format_sig12(self.min_eig),
            format_sig12(last.g_after),
            termination_name(t.termination),
        )
    }
}

/// One solve per tolerance from the same start, run concurrently; rows come
/// back in order of decreasing `ε`.
pub fn sweep(p: &ProblemSpec, x0: &DVector<f64>, base: &SolverConfig, eps: &[f64], second_order: bool) -> Result<Vec<SweepRow>> {
    if eps.is_empty() {
        return Err(usage("--eps needs at least one tolerance"));
    }
    let mut eps = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let runs: Vec<Result<SweepRow>> = std::thread::scope(|s| {
        let handles: Vec<_> = eps
            .iter()
            .map(|&e| {
                s.spawn(move || {
                    let cfg = SolverConfig { eps1: e, eps2: if second_order { e } else { f64::INFINITY }, ..*base };
                    let trace = gradient_eigenstep(p, x0, &cfg)?;
                    let min_eig = final_min_eig(p, &trace);
                    Ok(SweepRow { eps: e, trace, min_eig })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    runs.into_iter().collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

fn cmd_sweep(spec: &RunSpec) -> Result<i32> {
    let p = build_problem(&spec.problem_id, &spec.problem_params)?;
    let x0 = p.init_point(spec.problem_params.seed);
    let mp = &spec.mode_params;
    let rows = sweep(&p, &x0, &spec.solver, &mp.eps, mp.second_order)?;
    emit(spec.output_path.as_deref(), &sweep_csv(&rows))?;
    let converged = rows.iter().filter(|r| r.trace.termination == Termination::Converged).count();
    eprintln!(
        "sweep: {converged}/{} converged, iterations {}",
        rows.len(),
        rows.iter().map(|r| r.trace.steps().count().to_string()).collect::<Vec<_>>().join(" ")
    );
    Ok(if converged == rows.len() { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

/// Runs a fully resolved specification and returns the exit code.
pub fn execute(spec: &RunSpec) -> i32 {
    let result = match spec.mode {
        Mode::Solve => cmd_solve(spec),
        Mode::Plateau => cmd_plateau(spec),
        Mode::Restore => cmd_restore(spec),
        Mode::Check => cmd_check(spec),
        Mode::Sweep => cmd_sweep(spec),
    };
    result.unwrap_or_else(|e| {
        eprintln!("fletcher: {e}");
        error_code(&e)
    })
}

fn resolve(cmd: Command) -> Result<RunSpec> {
    Ok(match cmd {
        Command::Solve(common) => common.resolve(Mode::Solve)?,
        Command::Plateau { common, beta0, gamma, lp0 } => {
            let mut s = common.resolve(Mode::Plateau)?;
            set(&mut s.mode_params.beta0, beta0);
            set(&mut s.mode_params.gamma, gamma);
            set(&mut s.mode_params.lp0, lp0);
            s
        }
        Command::Restore { common, step, t_end } => {
            let mut s = common.resolve(Mode::Restore)?;
            set(&mut s.mode_params.step, step);
            set(&mut s.mode_params.t_end, t_end);
            s
        }
        Command::Check { common, seeds } => {
            let mut s = common.resolve(Mode::Check)?;
            set(&mut s.mode_params.seeds, seeds);
            s
        }
        Command::Sweep { common, eps, second_order } => {
            let mut s = common.resolve(Mode::Sweep)?;
            set(&mut s.mode_params.eps, eps);
            s.mode_params.second_order |= second_order;
            s
        }
    })
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match resolve(cli.command) {
        Ok(spec) => execute(&spec),
        Err(e) => {
            eprintln!("fletcher: {e}");
            error_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        let pp = ProblemParams::default();
        assert_eq!(build_problem("sphere", &pp).unwrap().dim_x(), 10);
        assert_eq!(build_problem("rayleigh", &ProblemParams { n: Some(4), ..pp.clone() }).unwrap().dim_x(), 4);
        let st = build_problem("stiefel", &pp).unwrap();
        assert_eq!((st.dim_x(), st.dim_h()), (16, 3));
        let pr = build_problem("product", &pp).unwrap();
        assert_eq!((pr.dim_x(), pr.dim_h()), (11, 4));
        let pr = build_problem("product:sphere:2,stiefel:3x3", &pp).unwrap();
        assert_eq!((pr.dim_x(), pr.dim_h()), (11, 7));
        assert!(matches!(build_problem("torus", &pp), Err(Error::InvalidArgument(_))));
        assert!(build_problem("product:cube:3", &pp).is_err());
        assert!(build_problem("sphere:3", &pp).is_err());
    }

    #[test]
    fn seeded_costs_are_reproducible() {
        let pp = ProblemParams { seed: 9, ..Default::default() };
        let a = build_problem("stiefel", &pp).unwrap();
        let b = build_problem("stiefel", &pp).unwrap();
        let x = a.init_point(0);
        assert_eq!(a.grad_f(&x), b.grad_f(&x));
    }

    #[test]
    fn matrix_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        fs::write(&path, "2, 1\n1, 3\n").unwrap();
        let a = read_matrix_csv(&path).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]));
        fs::write(&path, "1,2\n3\n").unwrap();
        assert!(read_matrix_csv(&path).is_err());
        fs::write(&path, "1,2\n3,4\n").unwrap();
        let pp = ProblemParams { matrix: Some(path), ..Default::default() };
        assert!(build_problem("rayleigh", &pp).is_err());
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(0.5), "0.500000000000");
        assert_eq!(format_sig12(1e-4), "0.000100000000000");
        assert_eq!(format_sig12(123.456), "123.456000000");
        assert_eq!(format_sig12(9.9999999999996), "10.0000000000");
        assert_eq!(format_sig12(-2.0), "-2.00000000000");
        assert_eq!(format_sig12(f64::NAN), "nan");
        assert!(!format_sig12(3.2e-7).contains('e'));
    }

    #[test]
    fn run_spec_defaults_fill_missing_fields() {
        let s: RunSpec = serde_json::from_str(r#"{"problem_id":"rayleigh","solver":{"beta":10}}"#).unwrap();
        assert_eq!(s.problem_id, "rayleigh");
        assert_eq!(s.solver.beta, 10.0);
        assert_eq!(s.solver.c1, 1e-4);
        assert_eq!(s.mode_params, ModeParams::default());
    }

    #[test]
    fn parse_errors_are_usage_errors() {
        assert_eq!(run(["fletcher", "solve", "--n", "abc"]), EXIT_USAGE);
        assert_eq!(run(["fletcher", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["fletcher", "solve", "--problem", "nope"]), EXIT_USAGE);
    }
}
