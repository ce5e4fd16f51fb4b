//! Riemannian quantities of the layer `M_x = {y : h(y) = h(x)}` and
//! approximate-criticality certificates.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::numerics;
use crate::penalty::{lagrangian_hessian, multipliers};
use crate::problem::ProblemSpec;

/// Gradient and Hessian of `f` restricted to the layer through `x`.
#[derive(Debug, Clone)]
pub struct LayeredQuantities {
    pub h_norm: f64,
    pub riem_grad: DVector<f64>,
    pub riem_grad_norm: f64,
    /// Orthonormal basis of `ker Dh(x)`, `n × (n − m)`.
    pub tangent_basis: DMatrix<f64>,
    pub reduced_hess: DMatrix<f64>,
    pub min_eig: f64,
    /// Unit tangent vector attaining `min_eig`.
    pub min_eig_vec: DVector<f64>,
}

/// `∇f(x) − Dh(x)ᵀλ(x)`.
pub fn layered_grad(p: &ProblemSpec, x: &DVector<f64>) -> Result<DVector<f64>> {
    let (lambda, _) = multipliers(p, x)?;
    Ok(p.grad_f(x) - p.jac_h(x).tr_mul(&lambda))
}

fn kernel_of(jac: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (m, n) = jac.shape();
    numerics::kernel_basis(jac, numerics::default_rank_tol(m, n))
}

/// `Qᵀ H Q` and its smallest eigenpair, the eigenvector lifted back by `Q`.
fn reduced(q: &DMatrix<f64>, hl: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64, DVector<f64>)> {
    let reduced_hess = numerics::symmetrize(&(q.transpose() * hl * q));
    if reduced_hess.nrows() == 0 {
        return Ok((reduced_hess, f64::INFINITY, DVector::zeros(q.nrows())));
    }
    let (min_eig, v) = numerics::sym_eig_min(&reduced_hess)?;
    Ok((reduced_hess, min_eig, q * v))
}

pub fn layered_hess(p: &ProblemSpec, x: &DVector<f64>) -> Result<LayeredQuantities> {
    let (lambda, _) = multipliers(p, x)?;
    let jac = p.jac_h(x);
    let riem_grad = p.grad_f(x) - jac.tr_mul(&lambda);
    let tangent_basis = kernel_of(&jac)?;
    let hl = lagrangian_hessian(p, x, &lambda);
    let (reduced_hess, min_eig, min_eig_vec) = reduced(&tangent_basis, &hl)?;
    Ok(LayeredQuantities {
        h_norm: p.h(x).norm(),
        riem_grad_norm: riem_grad.norm(),
        riem_grad,
        tangent_basis,
        reduced_hess,
        min_eig,
        min_eig_vec,
    })
}

/// Measured criticality of a point against targets `(ε₀, ε₁, ε₂)`.
///
/// `eps2_measured` is `max(0, −λ_min)`; it is `NaN` (JSON `null`) when
/// `ε₂ = ∞` and the Hessian was not computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalityCertificate {
    pub eps0_measured: f64,
    pub eps1_measured: f64,
    #[serde(with = "crate::json::nan_as_null")]
    pub eps2_measured: f64,
    #[serde(with = "crate::json::targets")]
    pub targets: (f64, f64, f64),
    pub focp_pass: bool,
    pub socp_pass: bool,
}

fn check_targets(eps0: f64, eps1: f64, eps2: f64) -> Result<()> {
    for (name, e) in [("eps0", eps0), ("eps1", eps1), ("eps2", eps2)] {
        if e.is_nan() || e < 0.0 {
            return Err(crate::Error::InvalidArgument(format!("{name} must be >= 0, got {e}")));
        }
    }
    Ok(())
}

pub fn certify(p: &ProblemSpec, x: &DVector<f64>, eps0: f64, eps1: f64, eps2: f64) -> Result<CriticalityCertificate> {
    check_targets(eps0, eps1, eps2)?;
    let (eps0_measured, eps1_measured, eps2_measured) = if eps2.is_infinite() {
        let g = layered_grad(p, x)?;
        (p.h(x).norm(), g.norm(), f64::NAN)
    } else {
        let lq = layered_hess(p, x)?;
        (lq.h_norm, lq.riem_grad_norm, (-lq.min_eig).max(0.0))
    };
    let focp_pass = eps0_measured <= eps0 && eps1_measured <= eps1;
    let socp_pass = focp_pass && (eps2.is_infinite() || eps2_measured <= eps2);
    Ok(CriticalityCertificate {
        eps0_measured,
        eps1_measured,
        eps2_measured,
        targets: (eps0, eps1, eps2),
        focp_pass,
        socp_pass,
    })
}

/// Criticality in the classical Lagrangian sense for a caller-chosen `λ`:
/// `(‖h‖ ≤ ε₀ ∧ ‖∇f − Dhᵀλ‖ ≤ ε₁, … ∧ Qᵀ(∇²f − Σλᵢ∇²hᵢ)Q ⪰ −ε₂ I)`.
///
/// Any failure to evaluate counts as not passing.
pub fn lagrangian_check(
    p: &ProblemSpec,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    eps0: f64,
    eps1: f64,
    eps2: f64,
) -> (bool, bool) {
    if lambda.len() != p.dim_h() || !lambda.iter().chain(x.iter()).all(|v| v.is_finite()) {
        return (false, false);
    }
    let jac = p.jac_h(x);
    let first = p.h(x).norm() <= eps0 && (p.grad_f(x) - jac.tr_mul(lambda)).norm() <= eps1;
    if !first || eps2.is_infinite() {
        return (first, first);
    }
    let second = kernel_of(&jac)
        .and_then(|q| reduced(&q, &lagrangian_hessian(p, x, lambda)))
        .map(|(_, min_eig, _)| min_eig >= -eps2)
        .unwrap_or(false);
    (first, second)
}
