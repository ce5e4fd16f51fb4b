//! Iteration counts of the first-order method as the tolerance shrinks,
//! written as CSV.

use fletcher::cli::{sweep, sweep_csv};
use fletcher::problem::make_rayleigh_sphere;
use fletcher::solver::SolverConfig;
use nalgebra::{DMatrix, DVector};

fn main() -> fletcher::Result<()> {
    let a = DMatrix::from_diagonal(&DVector::from_fn(10, |i, _| (i + 1) as f64));
    let p = make_rayleigh_sphere(a)?;
    let x0 = p.init_point(1);
    let base = SolverConfig { beta: 10.0, ..SolverConfig::default() };

    let rows = sweep(&p, &x0, &base, &[1e-2, 1e-3, 1e-4, 1e-5, 1e-6], false)?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
