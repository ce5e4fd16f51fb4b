//! Gradient-Eigenstep on ½⟨x, Ax⟩ over the unit sphere with A = diag(1..10).
//! The minimum is ½ at ±e₁.

use fletcher::penalty::beta_thresholds;
use fletcher::problem::make_rayleigh_sphere;
use fletcher::solver::{gradient_eigenstep, SolverConfig, StepKind};
use nalgebra::{DMatrix, DVector};

fn main() -> fletcher::Result<()> {
    let a = DMatrix::from_diagonal(&DVector::from_fn(10, |i, _| (i + 1) as f64));
    let p = make_rayleigh_sphere(a)?;
    let x0 = p.init_point(1);

    let cfg = SolverConfig::new(1e-5, 1e-4, 10.0);
    let trace = gradient_eigenstep(&p, &x0, &cfg)?;
    let x = trace.final_point();

    println!("termination: {:?}", trace.termination);
    println!(
        "{} gradient steps, {} eigensteps",
        trace.count(StepKind::Gradient),
        trace.count(StepKind::Eigen)
    );
    println!("f(x) = {:.9}, |x₁| = {:.9}", p.f(&x), x[0].abs());
    println!("certificate: {:?}", trace.certificate);

    let th = beta_thresholds(&p, &x)?;
    println!(
        "at the solution β₁ = {:.3}, β₂ = {:.3}, β₃ = {:.3}; the run used β = {}",
        th.beta1, th.beta2, th.beta3, cfg.beta
    );
    Ok(())
}
