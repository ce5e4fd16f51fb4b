//! Fletcher's augmented Lagrangian
//!
//! ```text
//! g(x) = f(x) − ⟨h(x), λ(x)⟩ + β‖h(x)‖²,    λ(x) = (Dh(x)ᵀ)† ∇f(x)
//! ```
//!
//! together with its gradient, the Jacobian of the multiplier map and the
//! pointwise penalty thresholds `β₁, β₂, β₃`. Everything at a point shares a
//! single SVD of `Dh(x)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, SvdResult};
use crate::problem::{MultiplierJacobian, ProblemSpec};

/// Default relative step of the finite-difference Hessian, `ε^(1/3)`.
pub fn default_fd_step() -> f64 {
    f64::EPSILON.cbrt()
}

fn ensure_finite_vec(v: &DVector<f64>, what: &str) -> Result<()> {
    if v.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// SVD of `Dh(x)` with the full-row-rank check applied.
pub fn constraint_svd(p: &ProblemSpec, x: &DVector<f64>, jac: &DMatrix<f64>) -> Result<SvdResult> {
    let dec = numerics::svd(jac)?;
    let (m, n) = jac.shape();
    let tol = numerics::default_rank_tol(m, n);
    let (smin, smax) = (dec.sigma_min(), dec.sigma_max());
    if dec.singular_values.len() < p.dim_h() || smax <= 0.0 || smin <= tol * smax {
        return Err(Error::RankDeficient {
            point: x.as_slice().to_vec(),
            sigma_min: smin,
            sigma_max: smax,
        });
    }
    Ok(dec)
}

/// `λ = U Σ⁻¹ Vᵀ ∇f` for `Dh = U Σ Vᵀ`.
fn lambda_from_svd(dec: &SvdResult, grad_f: &DVector<f64>) -> DVector<f64> {
    let mut coeffs = dec.v.tr_mul(grad_f);
    for (c, s) in coeffs.iter_mut().zip(dec.singular_values.iter()) {
        *c /= s;
    }
    &dec.u * coeffs
}

/// Least-squares multipliers `λ(x)` and the SVD of `Dh(x)` they came from.
pub fn multipliers(p: &ProblemSpec, x: &DVector<f64>) -> Result<(DVector<f64>, SvdResult)> {
    ensure_finite_vec(x, "point")?;
    let jac = p.jac_h(x);
    let dec = constraint_svd(p, x, &jac)?;
    let grad_f = p.grad_f(x);
    ensure_finite_vec(&grad_f, "grad_f")?;
    Ok((lambda_from_svd(&dec, &grad_f), dec))
}

/// `∇²f(x) − Σᵢ λᵢ ∇²hᵢ(x)`.
pub fn lagrangian_hessian(p: &ProblemSpec, x: &DVector<f64>, lambda: &DVector<f64>) -> DMatrix<f64> {
    let mut hl = p.hess_f(x);
    for (i, &li) in lambda.iter().enumerate() {
        if li != 0.0 {
            hl -= p.hess_h(x, i) * li;
        }
    }
    hl
}

/// Orthogonal projection onto `ker Dh(x)`, given the SVD of `Dh(x)`.
pub fn project_tangent(dec: &SvdResult, v: &DVector<f64>) -> DVector<f64> {
    v - &dec.v * dec.v.tr_mul(v)
}

/// Orthogonal projection onto the row space of `Dh(x)`.
pub fn project_normal(dec: &SvdResult, v: &DVector<f64>) -> DVector<f64> {
    &dec.v * dec.v.tr_mul(v)
}

fn dlambda_analytic(
    p: &ProblemSpec,
    x: &DVector<f64>,
    jac: &DMatrix<f64>,
    dec: &SvdResult,
    lambda: &DVector<f64>,
    riem_grad: &DVector<f64>,
) -> DMatrix<f64> {
    // Differentiating (Dh Dhᵀ) λ = Dh ∇f along v gives
    //   (Dh Dhᵀ) Dλ[v] = Ḋh (∇f − Dhᵀλ) + Dh (∇²f − Σ λᵢ∇²hᵢ) v
    // with row i of Ḋh equal to (∇²hᵢ v)ᵀ.
    let m = jac.nrows();
    let mut rhs = jac * lagrangian_hessian(p, x, lambda);
    for i in 0..m {
        let hv = p.hess_h(x, i) * riem_grad;
        let mut row = rhs.row_mut(i);
        row += hv.transpose();
    }
    // (Dh Dhᵀ)⁻¹ = U Σ⁻² Uᵀ
    let mut coeffs = dec.u.tr_mul(&rhs);
    for (i, s) in dec.singular_values.iter().enumerate() {
        coeffs.row_mut(i).scale_mut(1.0 / (s * s));
    }
    &dec.u * coeffs
}

fn dlambda_fd(p: &ProblemSpec, x: &DVector<f64>, step: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let delta = step * (1.0 + x.norm());
    let mut out = DMatrix::zeros(p.dim_h(), n);
    let mut xp = x.clone();
    for j in 0..n {
        xp[j] = x[j] + delta;
        let (up, _) = multipliers(p, &xp)?;
        xp[j] = x[j] - delta;
        let (down, _) = multipliers(p, &xp)?;
        xp[j] = x[j];
        out.set_column(j, &((up - down) / (2.0 * delta)));
    }
    Ok(out)
}

/// Cached quantities of the penalty at one point.
#[derive(Debug, Clone)]
pub struct PenaltyEval {
    pub x: DVector<f64>,
    pub beta: f64,
    pub f_val: f64,
    pub grad_f: DVector<f64>,
    pub h_val: DVector<f64>,
    pub jac: DMatrix<f64>,
    pub jac_svd: SvdResult,
    pub lambda_val: DVector<f64>,
    /// `grad_{M_x} f(x) = ∇f − Dhᵀλ`.
    pub riem_grad: DVector<f64>,
    /// `Dλ(x)`, `m × n`.
    pub dlambda: DMatrix<f64>,
    pub g_val: f64,
    pub grad_g: DVector<f64>,
}

impl PenaltyEval {
    pub fn new(p: &ProblemSpec, x: &DVector<f64>, beta: f64) -> Result<Self> {
        ensure_finite_vec(x, "point")?;
        let jac = p.jac_h(x);
        let jac_svd = constraint_svd(p, x, &jac)?;
        let h_val = p.h(x);
        let grad_f = p.grad_f(x);
        let f_val = p.f(x);
        ensure_finite_vec(&h_val, "h")?;
        ensure_finite_vec(&grad_f, "grad_f")?;
        if !f_val.is_finite() {
            return Err(Error::NonFinite("f".into()));
        }
        let lambda_val = lambda_from_svd(&jac_svd, &grad_f);
        let riem_grad = &grad_f - jac.tr_mul(&lambda_val);
        let dlambda = match p.multiplier_jacobian {
            MultiplierJacobian::Analytic => {
                dlambda_analytic(p, x, &jac, &jac_svd, &lambda_val, &riem_grad)
            }
            MultiplierJacobian::FiniteDifference { step } => dlambda_fd(p, x, step)?,
        };
        let g_val = f_val - h_val.dot(&lambda_val) + beta * h_val.norm_squared();
        let grad_g = &riem_grad + jac.tr_mul(&h_val) * (2.0 * beta) - dlambda.tr_mul(&h_val);
        Ok(Self {
            x: x.clone(),
            beta,
            f_val,
            grad_f,
            h_val,
            jac,
            jac_svd,
            lambda_val,
            riem_grad,
            dlambda,
            g_val,
            grad_g,
        })
    }

    pub fn h_norm(&self) -> f64 {
        self.h_val.norm()
    }

    pub fn grad_norm(&self) -> f64 {
        self.grad_g.norm()
    }

    /// Tangent and normal parts of `∇g`:
    /// `grad_{M_x} f − Proj(Dλᵀh)` and `(2βDhᵀ − Proj⊥ Dλᵀ) h`.
    pub fn gradient_split(&self) -> (DVector<f64>, DVector<f64>) {
        let dlh = self.dlambda.tr_mul(&self.h_val);
        let tangent = &self.riem_grad - project_tangent(&self.jac_svd, &dlh);
        let normal = self.jac.tr_mul(&self.h_val) * (2.0 * self.beta)
            - project_normal(&self.jac_svd, &dlh);
        (tangent, normal)
    }

    pub fn thresholds(&self) -> Result<BetaThresholds> {
        BetaThresholds::from_parts(&self.jac_svd, &self.dlambda)
    }
}

/// `g(x)`; only needs `λ(x)`, not its Jacobian.
pub fn penalty_value(p: &ProblemSpec, x: &DVector<f64>, beta: f64) -> Result<f64> {
    let (lambda, _) = multipliers(p, x)?;
    let h = p.h(x);
    let g = p.f(x) - h.dot(&lambda) + beta * h.norm_squared();
    if g.is_finite() {
        Ok(g)
    } else {
        Err(Error::NonFinite("penalty value".into()))
    }
}

pub fn penalty_grad(p: &ProblemSpec, x: &DVector<f64>, beta: f64) -> Result<DVector<f64>> {
    Ok(PenaltyEval::new(p, x, beta)?.grad_g)
}

pub fn dlambda_jacobian(p: &ProblemSpec, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    Ok(PenaltyEval::new(p, x, 0.0)?.dlambda)
}

/// Symmetrized central-difference Jacobian of `∇g` with step
/// `fd_step · (1 + ‖x‖)`.
pub fn penalty_hess(p: &ProblemSpec, x: &DVector<f64>, beta: f64, fd_step: f64) -> Result<DMatrix<f64>> {
    if fd_step.is_nan() || fd_step <= 0.0 {
        return Err(Error::InvalidArgument("fd_step must be positive".into()));
    }
    let n = x.len();
    let delta = fd_step * (1.0 + x.norm());
    let mut hess = DMatrix::zeros(n, n);
    let mut xp = x.clone();
    for j in 0..n {
        xp[j] = x[j] + delta;
        let up = penalty_grad(p, &xp, beta)?;
        xp[j] = x[j] - delta;
        let down = penalty_grad(p, &xp, beta)?;
        xp[j] = x[j];
        hess.set_column(j, &((up - down) / (2.0 * delta)));
    }
    Ok(numerics::symmetrize(&hess))
}

/// Pointwise penalty thresholds and the quantities they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaThresholds {
    pub beta1: f64,
    pub beta2: f64,
    pub beta3: f64,
    /// `B(x) = max(β₁, β₂, β₃)`.
    pub b_max: f64,
    /// `C_λ(x) = σ₁(Dλ(x))`.
    pub c_lambda: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl BetaThresholds {
    pub fn from_parts(jac_svd: &SvdResult, dlambda: &DMatrix<f64>) -> Result<Self> {
        let c_lambda = numerics::svd(dlambda)?.sigma_max();
        let sigma_min = jac_svd.sigma_min();
        let sigma_max = jac_svd.sigma_max();
        let beta1 = sigma_max * c_lambda / (2.0 * sigma_min * sigma_min);
        let beta2 = c_lambda / sigma_min;
        let beta3 = 1.0 / sigma_min;
        Ok(Self {
            beta1,
            beta2,
            beta3,
            b_max: beta1.max(beta2).max(beta3),
            c_lambda,
            sigma_min,
            sigma_max,
        })
    }
}

pub fn beta_thresholds(p: &ProblemSpec, x: &DVector<f64>) -> Result<BetaThresholds> {
    PenaltyEval::new(p, x, 0.0)?.thresholds()
}

/// `‖h(x)‖ ≤ R`, inclusive. Non-finite constraint values are outside.
pub fn in_region(p: &ProblemSpec, x: &DVector<f64>) -> bool {
    let hn = p.h(x).norm();
    hn.is_finite() && hn <= p.region().r
}
