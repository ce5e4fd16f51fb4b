//! Region constants of the Stiefel manifold: σ_min(Dh) stays above
//! 2√(1 − R) on ‖XᵀX − I‖ ≤ R, and the Taylor remainder of h is bounded by
//! ‖V‖².

use fletcher::numerics::svd;
use fletcher::problem::{gaussian_vector, sample_in_region, Constraint, StiefelConstraint};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> fletcher::Result<()> {
    let st = StiefelConstraint::new(8, 3, 0.5)?;
    let region = st.region();
    println!("R = {}, σ̲ = {:.6}, C_h = {}", region.r, region.sigma_lb, region.c_h);

    let feasible = st.init_point(0);
    println!("σ_min at an orthonormal X: {:.12}", svd(&st.jacobian(&feasible))?.sigma_min());

    let mut lowest = f64::INFINITY;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..100 {
        let x = sample_in_region(&st, seed);
        lowest = lowest.min(svd(&st.jacobian(&x))?.sigma_min());
        let v = gaussian_vector(&mut rng, x.len()) * 0.1;
        let rem = st.value(&(&x + &v)) - st.value(&x) - st.jacobian(&x) * &v;
        worst_ratio = worst_ratio.max(rem.norm() / v.norm_squared());
    }
    println!("lowest σ_min over 100 points of the region: {lowest:.6}");
    println!("largest ‖remainder‖ / ‖V‖²: {worst_ratio:.4}");
    Ok(())
}
