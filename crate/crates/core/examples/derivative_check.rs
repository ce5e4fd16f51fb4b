//! Finite-difference checks of every derivative the solver relies on, for the
//! built-in problems and for a cost with a deliberately wrong gradient.

use std::sync::Arc;

use fletcher::cli::{build_problem, ProblemParams, BUILTIN_IDS};
use fletcher::fdcheck::check_problem;
use fletcher::problem::{make_stiefel, FnCost};
use nalgebra::DMatrix;

fn main() -> fletcher::Result<()> {
    let seeds: Vec<u64> = (0..10).collect();
    for id in BUILTIN_IDS {
        let p = build_problem(id, &ProblemParams::default())?;
        for r in check_problem(&p, &seeds) {
            println!("{id:>9} {:<17} {:.2e} {}", r.target, r.max_rel_err, if r.pass { "ok" } else { "FAIL" });
        }
    }

    let sloppy = FnCost::new(
        |x| x.norm_squared().powi(2),
        |x| x * (4.0 * x.norm_squared() + 1e-3),
        |x| DMatrix::identity(x.len(), x.len()) * 4.0 * x.norm_squared() + x * x.transpose() * 8.0,
    );
    let p = make_stiefel(4, 2, 0.5, Arc::new(sloppy))?;
    for r in check_problem(&p, &seeds[..3]) {
        println!("   sloppy {:<17} {:.2e} {}", r.target, r.max_rel_err, if r.pass { "ok" } else { "FAIL" });
    }
    Ok(())
}
