#![allow(dead_code)]

use fletcher::cli::{build_problem, ProblemParams, BUILTIN_IDS};
use fletcher::problem::{gaussian_vector, ProblemSpec, StiefelConstraint, Constraint};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// All built-in problems at their default sizes, cost seeded with `seed`.
pub fn builtins(seed: u64) -> Vec<(&'static str, ProblemSpec)> {
    BUILTIN_IDS
        .iter()
        .map(|&id| {
            let pp = ProblemParams { seed, ..Default::default() };
            (id, build_problem(id, &pp).unwrap())
        })
        .collect()
}

pub fn rayleigh(n: usize) -> ProblemSpec {
    build_problem("rayleigh", &ProblemParams { n: Some(n), ..Default::default() }).unwrap()
}

/// `X = Q diag(s)` with orthonormal `Q` and `‖diag(s²) − I‖_F = level`, so
/// `‖h(X)‖ = level` exactly up to roundoff.
pub fn stiefel_point_at(st: &StiefelConstraint, seed: u64, level: f64) -> DVector<f64> {
    let (n, p) = st.shape();
    let q = DMatrix::from_column_slice(n, p, st.init_point(seed).as_slice());
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    let z = gaussian_vector(&mut rng, p).normalize();
    let s = DVector::from_fn(p, |i, _| (1.0 + level * z[i]).sqrt());
    let x = q * DMatrix::from_diagonal(&s);
    DVector::from_column_slice(x.as_slice())
}

pub fn random_level(seed: u64, lo: f64, hi: f64) -> f64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(lo..=hi)
}
