//! Dense linear-algebra primitives.
//!
//! Thin wrappers around `nalgebra` decompositions with the tolerance
//! conventions used throughout the crate: singular values sorted descending,
//! numerical rank measured relative to the largest singular value, and
//! symmetric eigenproblems solved on the symmetrized input.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

use crate::error::{Error, Result};

const SWEEP_BUDGET: usize = 10_000;

/// Default relative rank tolerance: `1e-12 * max(rows, cols)`.
pub fn default_rank_tol(rows: usize, cols: usize) -> f64 {
    1e-12 * rows.max(cols) as f64
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
///
/// With `k = min(rows, cols)`, `u` is `rows × k` and `v` is `cols × k`, both
/// with orthonormal columns; `singular_values` is nonincreasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub singular_values: DVector<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl SvdResult {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.get(0).copied().unwrap_or(0.0)
    }

    /// Smallest of the `min(rows, cols)` singular values.
    pub fn sigma_min(&self) -> f64 {
        self.singular_values.iter().copied().last().unwrap_or(0.0)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        &self.u * DMatrix::from_diagonal(&self.singular_values) * self.v.transpose()
    }

    /// Number of singular values strictly above `rank_tol * sigma_max`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        let cut = rank_tol * self.sigma_max();
        self.singular_values.iter().filter(|&&s| s > cut).count()
    }
}

fn check_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn svd(a: &DMatrix<f64>) -> Result<SvdResult> {
    check_finite(a, "svd input")?;
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvdResult {
            singular_values: DVector::zeros(0),
            u: DMatrix::zeros(rows, 0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let dec = SVD::try_new(a.clone(), true, true, f64::EPSILON, SWEEP_BUDGET)
        .ok_or_else(|| Error::NumericalFailure("SVD did not converge".into()))?;
    let u = dec.u.expect("u requested");
    let v = dec.v_t.expect("v requested").transpose();
    Ok(SvdResult {
        singular_values: dec.singular_values,
        u,
        v,
    })
}

/// Applies the truncated pseudo-inverse of an already decomposed matrix.
pub fn pinv_apply_svd(dec: &SvdResult, b: &DVector<f64>, rank_tol: f64) -> DVector<f64> {
    let cut = rank_tol * dec.sigma_max();
    let mut coeffs = dec.u.tr_mul(b);
    for (c, &s) in coeffs.iter_mut().zip(dec.singular_values.iter()) {
        *c = if s > cut && s > 0.0 { *c / s } else { 0.0 };
    }
    &dec.v * coeffs
}

/// `A† b`, discarding singular values `σ_i ≤ rank_tol · σ₁`.
pub fn pinv_apply(a: &DMatrix<f64>, b: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::InvalidArgument(format!(
            "pinv_apply: rhs has length {} but matrix has {} rows",
            b.len(),
            a.nrows()
        )));
    }
    if rank_tol < 0.0 {
        return Err(Error::InvalidArgument("rank_tol must be nonnegative".into()));
    }
    check_finite(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()), "pinv rhs")?;
    Ok(pinv_apply_svd(&svd(a)?, b, rank_tol))
}

pub fn symmetrize(h: &DMatrix<f64>) -> DMatrix<f64> {
    (h + h.transpose()) * 0.5
}

/// Smallest eigenvalue of `(H + Hᵀ)/2` together with a unit eigenvector.
pub fn sym_eig_min(h: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    if !h.is_square() || h.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "sym_eig_min needs a nonempty square matrix, got {:?}",
            h.shape()
        )));
    }
    check_finite(h, "eigensolver input")?;
    let eig = SymmetricEigen::try_new(symmetrize(h), f64::EPSILON, SWEEP_BUDGET)
        .ok_or_else(|| Error::NumericalFailure("symmetric eigensolver did not converge".into()))?;
    // first index wins on ties so the result is reproducible
    let mut best = 0;
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev < eig.eigenvalues[best] {
            best = i;
        }
    }
    let v = eig.eigenvectors.column(best).normalize();
    Ok((eig.eigenvalues[best], v))
}

/// Orthonormal basis of the numerical kernel of `A` (`m × n`, `m ≤ n`).
///
/// The matrix is zero-padded to `n × n` so a single SVD yields a complete set
/// of right singular vectors; columns whose singular value is at most
/// `rank_tol · σ₁` are returned.
pub fn kernel_basis(a: &DMatrix<f64>, rank_tol: f64) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    if m > n {
        return Err(Error::InvalidArgument(format!(
            "kernel_basis expects rows <= cols, got {m}x{n}"
        )));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let mut padded = DMatrix::zeros(n, n);
    padded.view_mut((0, 0), (m, n)).copy_from(a);
    let dec = svd(&padded)?;
    let cut = rank_tol * dec.sigma_max();
    let keep: Vec<usize> = (0..n).filter(|&i| dec.singular_values[i] <= cut).collect();
    let mut q = DMatrix::zeros(n, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        q.set_column(j, &dec.v.column(i));
    }
    Ok(q)
}
