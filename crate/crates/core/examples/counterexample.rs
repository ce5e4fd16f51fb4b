//! The maximizer of a linear function on the sphere passes the classical
//! Lagrangian first-order test but has a negative-definite layered Hessian.

use fletcher::criticality::{certify, lagrangian_check, layered_hess};
use fletcher::problem::make_sphere;
use nalgebra::DVector;

fn main() -> fletcher::Result<()> {
    let w = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
    let p = make_sphere(5, w.clone())?;

    let lq = layered_hess(&p, &w)?;
    println!("‖h(w)‖ = {:.1e}", lq.h_norm);
    println!("‖grad f(w)‖ = {:.1e}", lq.riem_grad_norm);
    println!("λ_min(Hess f(w)) = {}", lq.min_eig);

    let cert = certify(&p, &w, 0.5, 0.5, 0.5)?;
    println!("{}", serde_json::to_string_pretty(&cert).unwrap());

    for lambda in [0.5, 0.25] {
        let flags = lagrangian_check(&p, &w, &DVector::from_element(1, lambda), 0.5, 0.5, 0.5);
        println!("lagrangian check with λ = {lambda}: {flags:?}");
    }
    Ok(())
}
