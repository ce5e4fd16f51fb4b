//! Central-difference oracles and a derivative checker for problems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::{dlambda_jacobian, multipliers, penalty_grad, penalty_value};
use crate::problem::{sample_in_region, ProblemSpec};

/// `ε^(1/3)`, for first derivatives.
pub fn first_order_step() -> f64 {
    f64::EPSILON.cbrt()
}

/// `ε^(1/4)`, for second derivatives.
pub fn second_order_step() -> f64 {
    f64::EPSILON.sqrt().sqrt()
}

pub const FIRST_ORDER_TOL: f64 = 1e-6;
pub const SECOND_ORDER_TOL: f64 = 1e-4;

/// Central-difference gradient with `δ = step · (1 + ‖x‖)`.
pub fn fd_grad<F>(fun: F, x: &DVector<f64>, step: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<f64>,
{
    let jac = fd_jacobian(|y| Ok(DVector::from_element(1, fun(y)?)), x, step)?;
    Ok(jac.row(0).transpose())
}

/// Central-difference Jacobian, column `j` from perturbing `x_j`.
pub fn fd_jacobian<F>(fun: F, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {step}")));
    }
    let delta = step * (1.0 + x.norm());
    let mut xp = x.clone();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        xp[j] = x[j] + delta;
        let up = fun(&xp)?;
        xp[j] = x[j] - delta;
        let down = fun(&xp)?;
        xp[j] = x[j];
        if up.len() != down.len() || !up.iter().chain(down.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite(format!("finite-difference stencil in coordinate {j}")));
        }
        cols.push((up - down) / (2.0 * delta));
    }
    if cols.is_empty() {
        return Ok(DMatrix::zeros(fun(x)?.len(), 0));
    }
    Ok(DMatrix::from_columns(&cols))
}

/// `‖a − b‖ / (1 + max(‖a‖, ‖b‖))`.
pub fn rel_err(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / (1.0 + a.norm().max(b.norm()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivativeReport {
    pub target: String,
    /// `null` in JSON when some evaluation failed.
    #[serde(with = "crate::json::nan_as_null")]
    pub max_rel_err: f64,
    pub worst_point_seed: u64,
    pub step_used: f64,
    pub pass: bool,
}

fn col(v: DVector<f64>) -> DMatrix<f64> {
    let n = v.len();
    DMatrix::from_column_slice(n, 1, v.as_slice())
}

type Comparison<'a> = dyn Fn(&DVector<f64>, f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> + 'a;

/// Checks every analytic derivative of `p` against central differences at
/// `init_point(seed)` and at a seeded infeasible point of the region, for
/// each seed. Failures are reported, never raised.
pub fn check_problem(p: &ProblemSpec, seeds: &[u64]) -> Vec<DerivativeReport> {
    check_problem_with_steps(p, seeds, first_order_step(), second_order_step())
}

pub fn check_problem_with_steps(p: &ProblemSpec, seeds: &[u64], first: f64, second: f64) -> Vec<DerivativeReport> {
    let m = p.dim_h();
    let targets: Vec<(&str, f64, f64, Box<Comparison<'_>>)> = vec![
        (
            "grad_f",
            first,
            FIRST_ORDER_TOL,
            Box::new(|x, s| Ok((col(p.grad_f(x)), col(fd_grad(|y| Ok(p.f(y)), x, s)?)))),
        ),
        (
            "hess_f",
            second,
            SECOND_ORDER_TOL,
            Box::new(|x, s| Ok((p.hess_f(x), fd_jacobian(|y| Ok(p.grad_f(y)), x, s)?))),
        ),
        (
            "jac_h",
            first,
            FIRST_ORDER_TOL,
            Box::new(|x, s| Ok((p.jac_h(x), fd_jacobian(|y| Ok(p.h(y)), x, s)?))),
        ),
        (
            "hess_h",
            second,
            SECOND_ORDER_TOL,
            Box::new(move |x, s| {
                let mut worst: Option<(f64, DMatrix<f64>, DMatrix<f64>)> = None;
                for i in 0..m {
                    let fd = fd_jacobian(|y| Ok(p.jac_h(y).row(i).transpose()), x, s)?;
                    let an = p.hess_h(x, i);
                    let e = rel_err(&an, &fd);
                    if worst.as_ref().is_none_or(|w| e > w.0) {
                        worst = Some((e, an, fd));
                    }
                }
                let (_, an, fd) = worst.expect("at least one constraint");
                Ok((an, fd))
            }),
        ),
        (
            "penalty_grad",
            first,
            FIRST_ORDER_TOL,
            Box::new(|x, s| Ok((col(penalty_grad(p, x, 1.0)?), col(fd_grad(|y| penalty_value(p, y, 1.0), x, s)?)))),
        ),
        (
            "dlambda_jacobian",
            first,
            FIRST_ORDER_TOL,
            Box::new(|x, s| Ok((dlambda_jacobian(p, x)?, fd_jacobian(|y| Ok(multipliers(p, y)?.0), x, s)?))),
        ),
    ];

    let points: Vec<(u64, DVector<f64>)> = seeds
        .iter()
        .flat_map(|&s| [(s, p.init_point(s)), (s, sample_in_region(p.constraint.as_ref(), s))])
        .collect();

    targets
        .iter()
        .map(|(name, step, tol, compare)| {
            let mut max_rel_err = if points.is_empty() { f64::NAN } else { 0.0 };
            let mut worst_point_seed = seeds.first().copied().unwrap_or(0);
            for (seed, x) in &points {
                let e = match compare(x, *step) {
                    Ok((an, fd)) if an.shape() == fd.shape() => rel_err(&an, &fd),
                    _ => f64::NAN,
                };
                if e.is_nan() || e > max_rel_err {
                    max_rel_err = e;
                    worst_point_seed = *seed;
                    if e.is_nan() {
                        break;
                    }
                }
            }
            DerivativeReport {
                target: name.to_string(),
                max_rel_err,
                worst_point_seed,
                step_used: *step,
                pass: max_rel_err <= *tol,
            }
        })
        .collect()
}
