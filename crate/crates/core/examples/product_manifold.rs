//! A user-defined constraint (a circle cut out of the unit sphere in R³ by a
//! plane) combined with a Stiefel block, solved with second-order steps.

use std::sync::Arc;

use fletcher::problem::{
    Constraint, LinearCost, ProblemSpec, ProductConstraint, RegionParams, StiefelConstraint,
};
use fletcher::solver::{gradient_eigenstep, SolverConfig};
use nalgebra::{DMatrix, DVector};

/// `{x ∈ R³ : ‖x‖² = 1, x₃ = height}`.
struct Circle {
    height: f64,
}

impl Constraint for Circle {
    fn dim_x(&self) -> usize {
        3
    }
    fn dim_h(&self) -> usize {
        2
    }
    fn region(&self) -> RegionParams {
        RegionParams::new(0.1, 0.5, 1.0).unwrap()
    }
    fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(vec![x.norm_squared() - 1.0, x[2] - self.height])
    }
    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 3, &[2.0 * x[0], 2.0 * x[1], 2.0 * x[2], 0.0, 0.0, 1.0])
    }
    // second derivatives fall back to differences of the Jacobian
    fn init_point(&self, seed: u64) -> DVector<f64> {
        let r = (1.0 - self.height * self.height).sqrt();
        let t = seed as f64;
        DVector::from_vec(vec![r * t.cos(), r * t.sin(), self.height])
    }
}

fn main() -> fletcher::Result<()> {
    let blocks: Vec<Arc<dyn Constraint>> = vec![
        Arc::new(Circle { height: 0.6 }),
        Arc::new(StiefelConstraint::new(4, 2, 0.5)?),
    ];
    let constraint = ProductConstraint::new(blocks)?;
    let c = DVector::from_fn(constraint.dim_x(), |i, _| ((i * 7 % 5) as f64 - 2.0) / 3.0);
    let p = ProblemSpec::new(Arc::new(constraint.clone()), Arc::new(LinearCost { c }))?;

    let x0 = p.init_point(2);
    let trace = gradient_eigenstep(&p, &x0, &SolverConfig::new(1e-6, 1e-4, 20.0))?;
    let x = trace.final_point();
    println!("termination {:?} after {} steps", trace.termination, trace.steps().count());
    println!("circle block: {:?}", constraint.block_point(&x, 0).as_slice());
    println!("‖h‖ = {:.2e}, f = {:.9}", p.h(&x).norm(), p.f(&x));
    println!("second-order certificate: {}", trace.certificate.socp_pass);
    Ok(())
}
