//! Gradient flow of ½‖h‖² from an infeasible point of St(8, 3), compared
//! against the exponential decay rate 2σ̲².

use fletcher::cli::{build_problem, ProblemParams};
use fletcher::problem::sample_in_region;
use fletcher::solver::restore_feasibility;

fn main() -> fletcher::Result<()> {
    let p = build_problem("stiefel", &ProblemParams { n: Some(8), p: Some(3), ..Default::default() })?;
    let x0 = sample_in_region(p.constraint.as_ref(), 3);
    let sigma = p.region().sigma_lb;

    let (x, log) = restore_feasibility(&p, &x0, 1e-3, 3.0)?;
    let phi0 = log[0].1;
    println!("{:>8} {:>14} {:>14}", "t", "φ", "bound");
    for &(t, phi) in log.iter().step_by(250) {
        println!("{t:>8.3} {phi:>14.6e} {:>14.6e}", phi0 * (-2.0 * sigma * sigma * t).exp());
    }
    println!("final ‖h‖ = {:.3e} after t = {:.3}", p.h(&x).norm(), log.last().unwrap().0);
    Ok(())
}
