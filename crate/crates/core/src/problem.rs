//! Problem definitions: smooth costs, smooth equality constraints and the
//! constants describing the region `C = {x : ‖h(x)‖ ≤ R}` in which the
//! constraint Jacobian keeps full row rank.
//!
//! Points are plain vectors. Matrix-valued variables (Stiefel) are stored
//! column-major, so column `c` of an `n × p` matrix occupies `x[c*n..(c+1)*n]`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics;

/// Radius of the region and the two constants attached to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionParams {
    /// Radius of `C` measured in the constraint norm.
    pub r: f64,
    /// Lower bound on `σ_min(Dh(x))` over `C`.
    pub sigma_lb: f64,
    /// Constant of the quadratic Taylor remainder of `h`.
    pub c_h: f64,
}

impl RegionParams {
    pub fn new(r: f64, sigma_lb: f64, c_h: f64) -> Result<Self> {
        let params = Self { r, sigma_lb, c_h };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.r) && ok(self.sigma_lb) && ok(self.c_h) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "region constants must be finite and positive, got {self:?}"
            )))
        }
    }

    /// Constants of a Cartesian product of regions.
    pub fn product<I: IntoIterator<Item = RegionParams>>(parts: I) -> Option<Self> {
        parts.into_iter().fold(None, |acc, p| {
            Some(match acc {
                None => p,
                Some(a) => RegionParams {
                    r: a.r.min(p.r),
                    sigma_lb: a.sigma_lb.min(p.sigma_lb),
                    c_h: a.c_h.max(p.c_h),
                },
            })
        })
    }
}

/// A smooth cost `f` with gradient and Hessian.
pub trait Cost: Send + Sync {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// A smooth constraint map `h: R^n -> R^m` with its first two derivatives.
pub trait Constraint: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_h(&self) -> usize;
    fn region(&self) -> RegionParams;
    fn value(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `Dh(x)` as an `m × n` matrix.
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// `∇²h_i(x)`. The default differentiates row `i` of the Jacobian by
    /// central differences, for constraints that only supply `Dh`.
    fn hessian(&self, x: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let n = x.len();
        let delta = f64::EPSILON.cbrt() * (1.0 + x.norm());
        let mut out = DMatrix::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            xp[j] = x[j] + delta;
            let up = self.jacobian(&xp).row(i).transpose();
            xp[j] = x[j] - delta;
            let down = self.jacobian(&xp).row(i).transpose();
            xp[j] = x[j];
            out.set_column(j, &((up - down) / (2.0 * delta)));
        }
        numerics::symmetrize(&out)
    }

    /// A point of `C` chosen from `seed`.
    fn init_point(&self, seed: u64) -> DVector<f64>;
}

/// Cost `⟨c, x⟩`.
#[derive(Debug, Clone)]
pub struct LinearCost {
    pub c: DVector<f64>,
}

impl Cost for LinearCost {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.c.dot(x)
    }
    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.c.clone()
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// Cost `½⟨x, Ax⟩ + ⟨b, x⟩` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl QuadraticCost {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        check_symmetric(&a)?;
        if b.len() != a.nrows() {
            return Err(Error::InvalidArgument("quadratic cost: b has the wrong length".into()));
        }
        Ok(Self { a, b })
    }
}

impl Cost for QuadraticCost {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }
    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// The zero cost; every feasible point is a global minimizer.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroCost;

impl Cost for ZeroCost {
    fn value(&self, _x: &DVector<f64>) -> f64 {
        0.0
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(x.len())
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

type ScalarFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
type MatrixFn = dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync;

/// A cost assembled from user closures.
pub struct FnCost {
    value: Box<ScalarFn>,
    gradient: Box<VectorFn>,
    hessian: Box<MatrixFn>,
}

impl FnCost {
    pub fn new(
        value: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        hessian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }
    }
}

impl Cost for FnCost {
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hessian)(x)
    }
}

/// `h(X) = XᵀX − I_p` on `R^{n×p}`, expressed in an orthonormal basis of
/// `Sym(p)` so that the vector 2-norm of `h` equals the Frobenius norm.
///
/// Component order is `(i, j)` with `i ≤ j`, row by row. Diagonal entries are
/// taken as is; off-diagonal entries are scaled by `√2`.
#[derive(Debug, Clone)]
pub struct StiefelConstraint {
    n: usize,
    p: usize,
    region: RegionParams,
    pairs: Vec<(usize, usize)>,
}

impl StiefelConstraint {
    pub fn new(n: usize, p: usize, r: f64) -> Result<Self> {
        if p == 0 || p > n {
            return Err(Error::InvalidArgument(format!(
                "stiefel: need 1 <= p <= n, got n = {n}, p = {p}"
            )));
        }
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "stiefel: region radius must satisfy 0 < R < 1, got {r}"
            )));
        }
        let region = RegionParams::new(r, 2.0 * (1.0 - r).sqrt(), 1.0)?;
        let pairs = (0..p).flat_map(|i| (i..p).map(move |j| (i, j))).collect();
        Ok(Self { n, p, region, pairs })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.p)
    }

    fn column<'a>(&self, x: &'a DVector<f64>, c: usize) -> nalgebra::DVectorView<'a, f64> {
        x.rows(c * self.n, self.n)
    }

    /// Reshapes a point into its `n × p` matrix.
    pub fn as_matrix(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.n, self.p, x.as_slice())
    }

    /// Coordinates of a symmetric `p × p` matrix in the orthonormal basis.
    pub fn sym_coords(&self, s: &DMatrix<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.pairs.len(),
            self.pairs.iter().map(|&(i, j)| {
                if i == j {
                    s[(i, i)]
                } else {
                    std::f64::consts::SQRT_2 * 0.5 * (s[(i, j)] + s[(j, i)])
                }
            }),
        )
    }
}

impl Constraint for StiefelConstraint {
    fn dim_x(&self) -> usize {
        self.n * self.p
    }
    fn dim_h(&self) -> usize {
        self.pairs.len()
    }
    fn region(&self) -> RegionParams {
        self.region
    }

    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        let xm = self.as_matrix(x);
        let s = xm.tr_mul(&xm) - DMatrix::identity(self.p, self.p);
        self.sym_coords(&s)
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n;
        let mut jac = DMatrix::zeros(self.pairs.len(), n * self.p);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            if i == j {
                let xi = self.column(x, i) * 2.0;
                jac.view_mut((k, i * n), (1, n)).copy_from(&xi.transpose());
            } else {
                let s = std::f64::consts::SQRT_2;
                let xj = self.column(x, j) * s;
                let xi = self.column(x, i) * s;
                jac.view_mut((k, i * n), (1, n)).copy_from(&xj.transpose());
                jac.view_mut((k, j * n), (1, n)).copy_from(&xi.transpose());
            }
        }
        jac
    }

    fn hessian(&self, _x: &DVector<f64>, k: usize) -> DMatrix<f64> {
        let n = self.n;
        let dim = n * self.p;
        let mut hess = DMatrix::zeros(dim, dim);
        let (i, j) = self.pairs[k];
        if i == j {
            hess.view_mut((i * n, i * n), (n, n))
                .fill_diagonal(2.0);
        } else {
            let s = std::f64::consts::SQRT_2;
            hess.view_mut((i * n, j * n), (n, n)).fill_diagonal(s);
            hess.view_mut((j * n, i * n), (n, n)).fill_diagonal(s);
        }
        hess
    }

    fn init_point(&self, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(self.n, self.p, |_, _| StandardNormal.sample(&mut rng));
        let q = g.qr().q();
        DVector::from_column_slice(q.as_slice())
    }
}

/// Stacked constraints `h(x₁, …, x_k) = (h₁(x₁), …, h_k(x_k))`.
#[derive(Clone)]
pub struct ProductConstraint {
    blocks: Vec<Arc<dyn Constraint>>,
    x_offsets: Vec<usize>,
    h_offsets: Vec<usize>,
    region: RegionParams,
}

impl ProductConstraint {
    pub fn new(blocks: Vec<Arc<dyn Constraint>>) -> Result<Self> {
        let region = RegionParams::product(blocks.iter().map(|b| b.region()))
            .ok_or_else(|| Error::InvalidArgument("product needs at least one block".into()))?;
        let mut x_offsets = vec![0];
        let mut h_offsets = vec![0];
        for b in &blocks {
            x_offsets.push(x_offsets.last().unwrap() + b.dim_x());
            h_offsets.push(h_offsets.last().unwrap() + b.dim_h());
        }
        Ok(Self {
            blocks,
            x_offsets,
            h_offsets,
            region,
        })
    }

    pub fn blocks(&self) -> &[Arc<dyn Constraint>] {
        &self.blocks
    }

    /// The slice of `x` belonging to block `b`.
    pub fn block_point(&self, x: &DVector<f64>, b: usize) -> DVector<f64> {
        x.rows(self.x_offsets[b], self.blocks[b].dim_x()).into_owned()
    }
}

impl fmt::Debug for ProductConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProductConstraint")
            .field("blocks", &self.blocks.len())
            .field("x_offsets", &self.x_offsets)
            .field("region", &self.region)
            .finish()
    }
}

impl Constraint for ProductConstraint {
    fn dim_x(&self) -> usize {
        *self.x_offsets.last().unwrap()
    }
    fn dim_h(&self) -> usize {
        *self.h_offsets.last().unwrap()
    }
    fn region(&self) -> RegionParams {
        self.region
    }

    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim_h());
        for (b, block) in self.blocks.iter().enumerate() {
            let hb = block.value(&self.block_point(x, b));
            out.rows_mut(self.h_offsets[b], block.dim_h()).copy_from(&hb);
        }
        out
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim_h(), self.dim_x());
        for (b, block) in self.blocks.iter().enumerate() {
            let jb = block.jacobian(&self.block_point(x, b));
            out.view_mut((self.h_offsets[b], self.x_offsets[b]), jb.shape())
                .copy_from(&jb);
        }
        out
    }

    fn hessian(&self, x: &DVector<f64>, i: usize) -> DMatrix<f64> {
        let b = self.h_offsets.partition_point(|&off| off <= i) - 1;
        let block = &self.blocks[b];
        let hb = block.hessian(&self.block_point(x, b), i - self.h_offsets[b]);
        let mut out = DMatrix::zeros(self.dim_x(), self.dim_x());
        out.view_mut((self.x_offsets[b], self.x_offsets[b]), hb.shape())
            .copy_from(&hb);
        out
    }

    fn init_point(&self, seed: u64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim_x());
        for (b, block) in self.blocks.iter().enumerate() {
            let xb = block.init_point(seed.wrapping_mul(0x9E37_79B9).wrapping_add(b as u64));
            out.rows_mut(self.x_offsets[b], block.dim_x()).copy_from(&xb);
        }
        out
    }
}

/// How the Jacobian of the multiplier map is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MultiplierJacobian {
    /// Differentiate the normal equations using `∇²f` and `∇²h_i`.
    #[default]
    Analytic,
    /// Central differences of `λ(x)` with the given relative step.
    FiniteDifference { step: f64 },
}

/// A cost paired with a constraint.
#[derive(Clone)]
pub struct ProblemSpec {
    pub cost: Arc<dyn Cost>,
    pub constraint: Arc<dyn Constraint>,
    pub multiplier_jacobian: MultiplierJacobian,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("dim_x", &self.dim_x())
            .field("dim_h", &self.dim_h())
            .field("region", &self.region())
            .field("multiplier_jacobian", &self.multiplier_jacobian)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(constraint: Arc<dyn Constraint>, cost: Arc<dyn Cost>) -> Result<Self> {
        let (n, m) = (constraint.dim_x(), constraint.dim_h());
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= m < n constraints, got m = {m}, n = {n}"
            )));
        }
        constraint.region().validate()?;
        Ok(Self {
            cost,
            constraint,
            multiplier_jacobian: MultiplierJacobian::Analytic,
        })
    }

    pub fn with_multiplier_jacobian(mut self, mode: MultiplierJacobian) -> Self {
        self.multiplier_jacobian = mode;
        self
    }

    pub fn dim_x(&self) -> usize {
        self.constraint.dim_x()
    }
    pub fn dim_h(&self) -> usize {
        self.constraint.dim_h()
    }
    pub fn region(&self) -> RegionParams {
        self.constraint.region()
    }
    pub fn f(&self, x: &DVector<f64>) -> f64 {
        self.cost.value(x)
    }
    pub fn grad_f(&self, x: &DVector<f64>) -> DVector<f64> {
        self.cost.gradient(x)
    }
    pub fn hess_f(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.cost.hessian(x)
    }
    pub fn h(&self, x: &DVector<f64>) -> DVector<f64> {
        self.constraint.value(x)
    }
    pub fn jac_h(&self, x: &DVector<f64>) -> DMatrix<f64> {
        self.constraint.jacobian(x)
    }
    pub fn hess_h(&self, x: &DVector<f64>, i: usize) -> DMatrix<f64> {
        self.constraint.hessian(x, i)
    }
    pub fn init_point(&self, seed: u64) -> DVector<f64> {
        self.constraint.init_point(seed)
    }
}

pub fn check_symmetric(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::InvalidArgument(format!("matrix must be square, got {:?}", a.shape())));
    }
    let asym = (a - a.transpose()).amax();
    if asym > 1e-12 {
        return Err(Error::InvalidArgument(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    Ok(())
}

/// Default radius of the built-in sphere and Stiefel regions.
pub const DEFAULT_RADIUS: f64 = 0.5;

/// Unit sphere in `R^n` with cost `⟨x, w⟩`.
pub fn make_sphere(n: usize, w: DVector<f64>) -> Result<ProblemSpec> {
    if n < 2 {
        return Err(Error::InvalidArgument("sphere needs n >= 2".into()));
    }
    if w.len() != n || (w.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("sphere: w must be a unit vector of length n".into()));
    }
    ProblemSpec::new(
        Arc::new(StiefelConstraint::new(n, 1, DEFAULT_RADIUS)?),
        Arc::new(LinearCost { c: w }),
    )
}

/// Rayleigh quotient `½⟨x, Ax⟩` on the unit sphere.
pub fn make_rayleigh_sphere(a: DMatrix<f64>) -> Result<ProblemSpec> {
    check_symmetric(&a)?;
    let n = a.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument("rayleigh needs n >= 2".into()));
    }
    ProblemSpec::new(
        Arc::new(StiefelConstraint::new(n, 1, DEFAULT_RADIUS)?),
        Arc::new(QuadraticCost::new(a, DVector::zeros(n))?),
    )
}

pub fn make_stiefel(n: usize, p: usize, r: f64, cost: Arc<dyn Cost>) -> Result<ProblemSpec> {
    ProblemSpec::new(Arc::new(StiefelConstraint::new(n, p, r)?), cost)
}

/// Product of the constraint blocks of `blocks` under a single cost.
pub fn make_product(blocks: &[ProblemSpec], cost: Arc<dyn Cost>) -> Result<ProblemSpec> {
    let constraint = ProductConstraint::new(blocks.iter().map(|b| b.constraint.clone()).collect())?;
    ProblemSpec::new(Arc::new(constraint), cost)
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// A seeded point of `C`, usually infeasible: a feasible start perturbed by a
/// random Gaussian, shrunk until `‖h‖ ≤ R`.
pub fn sample_in_region(constraint: &dyn Constraint, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5EED);
    let base = constraint.init_point(seed);
    let dir = gaussian_vector(&mut rng, base.len()).normalize();
    let u: f64 = rand::Rng::random_range(&mut rng, 0.05..1.0);
    let r = constraint.region().r;
    let mut scale = u * r / (2.0 * constraint.jacobian(&base).norm().max(1.0));
    loop {
        let x = &base + &dir * scale;
        if constraint.value(&x).norm() <= r {
            return x;
        }
        scale *= 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::svd;

    fn e(n: usize, i: usize) -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        v
    }

    #[test]
    fn sphere_closed_forms() {
        let w = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let p = make_sphere(3, w.clone()).unwrap();
        assert_eq!(p.dim_h(), 1);
        assert!(p.h(&w)[0].abs() < 1e-15);
        assert_eq!(p.jac_h(&e(3, 0)).as_slice(), &[2.0, 0.0, 0.0]);
        assert_eq!(p.hess_h(&w, 0), DMatrix::identity(3, 3) * 2.0);
        let reg = p.region();
        assert_eq!(reg.r, 0.5);
        assert!((reg.sigma_lb - 2.0 * 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(reg.c_h, 1.0);
    }

    #[test]
    fn sphere_rejects_non_unit_w() {
        let w = DVector::from_vec(vec![1.0, 1e-5]);
        assert!(matches!(make_sphere(2, w), Err(Error::InvalidArgument(_))));
        assert!(make_sphere(1, DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn sphere_sigma_min_over_region() {
        let p = make_sphere(4, e(4, 0)).unwrap();
        for seed in 0..100 {
            let x = sample_in_region(p.constraint.as_ref(), seed);
            assert!(p.h(&x).norm() <= 0.5);
            let s = svd(&p.jac_h(&x)).unwrap().sigma_min();
            assert!(s >= 2.0 * 0.5f64.sqrt() - 1e-12, "seed {seed}: {s}");
        }
    }

    #[test]
    fn sphere_init_is_unit() {
        let p = make_sphere(5, e(5, 0)).unwrap();
        for seed in 0..20 {
            assert!((p.init_point(seed).norm() - 1.0).abs() < 1e-14);
        }
        assert_ne!(p.init_point(1), p.init_point(2));
    }

    #[test]
    fn rayleigh_values() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let p = make_rayleigh_sphere(a).unwrap();
        assert_eq!(p.f(&e(3, 0)), 0.5);
        assert_eq!(p.grad_f(&e(3, 1)).as_slice(), &[0.0, 2.0, 0.0]);
    }

    #[test]
    fn rayleigh_rejects_asymmetric() {
        let mut a = DMatrix::identity(3, 3);
        a[(0, 2)] = 1e-9;
        assert!(make_rayleigh_sphere(a).is_err());
    }

    #[test]
    fn stiefel_feasible_points() {
        let st = StiefelConstraint::new(6, 3, 0.5).unwrap();
        assert_eq!(st.dim_h(), 6);
        for seed in 0..10 {
            let x = st.init_point(seed);
            assert!(st.value(&x).norm() < 1e-14);
            let s = svd(&st.jacobian(&x)).unwrap();
            for &sv in s.singular_values.iter() {
                assert!((sv - 2.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn stiefel_h_norm_is_frobenius() {
        let st = StiefelConstraint::new(4, 3, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = gaussian_vector(&mut rng, 12);
        let xm = st.as_matrix(&x);
        let s = xm.tr_mul(&xm) - DMatrix::identity(3, 3);
        assert!((st.value(&x).norm() - s.norm()).abs() < 1e-12);
    }

    #[test]
    fn stiefel_rejects_bad_arguments() {
        assert!(StiefelConstraint::new(3, 4, 0.5).is_err());
        assert!(StiefelConstraint::new(3, 2, 1.0).is_err());
        assert!(StiefelConstraint::new(3, 0, 0.5).is_err());
        // m >= n is rejected by the problem wrapper
        assert!(make_stiefel(1, 1, 0.5, Arc::new(ZeroCost)).is_err());
    }

    #[test]
    fn stiefel_taylor_remainder_is_vtv() {
        let st = StiefelConstraint::new(5, 2, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x = gaussian_vector(&mut rng, 10);
            let v = gaussian_vector(&mut rng, 10) * 0.3;
            let rem = st.value(&(&x + &v)) - st.value(&x) - st.jacobian(&x) * &v;
            let vm = st.as_matrix(&v);
            let vtv = vm.tr_mul(&vm);
            assert!((rem.norm() - vtv.norm()).abs() < 1e-12);
            assert!(rem.norm() <= v.norm_squared() + 1e-12);
        }
    }

    #[test]
    fn product_constants() {
        let s1 = make_sphere(3, e(3, 0)).unwrap();
        let s2 = make_sphere(3, e(3, 1)).unwrap();
        let prod = make_product(&[s1.clone(), s2], Arc::new(ZeroCost)).unwrap();
        let reg = prod.region();
        assert_eq!((reg.r, reg.c_h), (0.5, 1.0));
        assert!((reg.sigma_lb - 2.0 * 0.5f64.sqrt()).abs() < 1e-15);

        let single = make_product(std::slice::from_ref(&s1), Arc::new(ZeroCost)).unwrap();
        assert_eq!(single.region(), s1.region());
        assert!(make_product(&[], Arc::new(ZeroCost)).is_err());
    }

    #[test]
    fn product_mixed_radii() {
        let a: Arc<dyn Constraint> = Arc::new(StiefelConstraint::new(4, 2, 0.3).unwrap());
        let b: Arc<dyn Constraint> = Arc::new(StiefelConstraint::new(3, 1, 0.6).unwrap());
        let prod = ProductConstraint::new(vec![a.clone(), b.clone()]).unwrap();
        let reg = prod.region();
        assert_eq!(reg.r, 0.3);
        assert_eq!(reg.sigma_lb, b.region().sigma_lb.min(a.region().sigma_lb));
    }

    #[test]
    fn product_sigma_min_is_block_minimum() {
        let a: Arc<dyn Constraint> = Arc::new(StiefelConstraint::new(4, 2, 0.5).unwrap());
        let b: Arc<dyn Constraint> = Arc::new(StiefelConstraint::new(3, 1, 0.5).unwrap());
        let prod = ProductConstraint::new(vec![a.clone(), b.clone()]).unwrap();
        for seed in 0..20 {
            let x = sample_in_region(&prod, seed);
            let whole = svd(&prod.jacobian(&x)).unwrap().sigma_min();
            let parts = [a.clone(), b.clone()]
                .iter()
                .enumerate()
                .map(|(i, c)| svd(&c.jacobian(&prod.block_point(&x, i))).unwrap().sigma_min())
                .fold(f64::INFINITY, f64::min);
            assert!((whole - parts).abs() < 1e-10);
            assert!(whole >= prod.region().sigma_lb - 1e-12);
        }
    }

    #[test]
    fn product_hessian_lands_in_block() {
        let a: Arc<dyn Constraint> = Arc::new(StiefelConstraint::new(3, 1, 0.5).unwrap());
        let b: Arc<dyn Constraint> = Arc::new(StiefelConstraint::new(2, 1, 0.5).unwrap());
        let prod = ProductConstraint::new(vec![a, b]).unwrap();
        let x = prod.init_point(0);
        let h1 = prod.hessian(&x, 1);
        assert_eq!(h1[(3, 3)], 2.0);
        assert_eq!(h1[(0, 0)], 0.0);
        assert_eq!(h1.sum(), 4.0);
    }

    #[test]
    fn default_constraint_hessian_matches_analytic() {
        struct NoHess(StiefelConstraint);
        impl Constraint for NoHess {
            fn dim_x(&self) -> usize { self.0.dim_x() }
            fn dim_h(&self) -> usize { self.0.dim_h() }
            fn region(&self) -> RegionParams { self.0.region() }
            fn value(&self, x: &DVector<f64>) -> DVector<f64> { self.0.value(x) }
            fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> { self.0.jacobian(x) }
            fn init_point(&self, seed: u64) -> DVector<f64> { self.0.init_point(seed) }
        }
        let st = StiefelConstraint::new(4, 2, 0.5).unwrap();
        let wrapped = NoHess(st.clone());
        let x = sample_in_region(&st, 4);
        for k in 0..st.dim_h() {
            assert!((wrapped.hessian(&x, k) - st.hessian(&x, k)).norm() < 1e-8);
        }
    }

    #[test]
    fn init_points_land_in_region() {
        let st = StiefelConstraint::new(8, 3, 0.5).unwrap();
        for seed in 0..50 {
            assert!(st.value(&st.init_point(seed)).norm() <= 0.5);
            assert!(st.value(&sample_in_region(&st, seed)).norm() <= 0.5);
        }
    }
}
