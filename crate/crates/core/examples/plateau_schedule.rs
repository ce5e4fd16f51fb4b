//! The plateau scheme on St(8, 2) with a random linear cost, starting from a
//! penalty parameter far too small to be valid.

use fletcher::cli::{build_problem, ProblemParams};
use fletcher::solver::{plateau, SolverConfig};

fn main() -> fletcher::Result<()> {
    let p = build_problem("stiefel", &ProblemParams { n: Some(8), p: Some(2), seed: 5, ..Default::default() })?;
    let x0 = p.init_point(1);
    let cfg = SolverConfig::new(1e-5, 1e-4, 1.0);

    let out = plateau(&p, &x0, &cfg, 2.0, 1e-3, 50)?;
    println!("{:>3} {:>12} {:>14} {:>6} {:>12}  trigger", "ℓ", "β", "LP", "steps", "B");
    for pl in &out.plateaus {
        println!(
            "{:>3} {:>12.6} {:>14.4e} {:>6} {:>12}  {:?}",
            pl.index,
            pl.beta,
            pl.lp,
            pl.steps,
            pl.b_measured.map_or("-".into(), |b| format!("{b:.6}")),
            pl.trigger
        );
    }
    println!("termination: {:?}, f = {:.9}", out.trace.termination, p.f(&out.trace.final_point()));
    Ok(())
}
