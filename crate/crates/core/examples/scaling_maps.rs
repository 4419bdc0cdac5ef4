//! The coordinate changes in action: the scale family and its quadrature
//! invariance, the unit-Jacobian maps τ_θ and σ_{θ,u}, and the
//! Euler–Lagrange rescaling.
//!
//! Run with: cargo run --example scaling_maps

use anisodecay::closed_forms::isotropic_extremal;
use anisodecay::exponents::ExponentVector;
use anisodecay::grid::{grad_integrals, integrate_pow, sample, TensorGrid};
use anisodecay::transforms::{
    apply_map, euler_lagrange_rescale, scale_family, sigma_theta, tau_theta, Evaluator,
    ThetaVector,
};

fn main() {
    let ev = ExponentVector::from_strs(&["2", "2", "2"]).unwrap();
    let u = isotropic_extremal(3, 2.0, 1.0, 1.0).unwrap();

    // Quadrature invariance of the scale family: integrate the scaled
    // function on the pullback grid (extents divided by the scales) so the
    // change of variables is exact.
    let grid = TensorGrid::new(vec![20.0; 3], vec![81; 3]).unwrap();
    let base = sample(&grid, &u).unwrap();
    let mass0 = integrate_pow(&base, 6.0);
    println!("mass of u:          {mass0:.12}");
    for lambda in [0.5, 2.0] {
        let map = scale_family(&ev, lambda).unwrap();
        let pull =
            TensorGrid::new(map.scales.iter().map(|s| 20.0 / s).collect(), vec![81; 3]).unwrap();
        let moved = sample(&pull, &apply_map(&map, |x: &[f64]| u.eval(x))).unwrap();
        let mass = integrate_pow(&moved, 6.0);
        println!(
            "mass of u_{lambda:<4}: {mass:.12}  (rel dev {:.2e})",
            (mass - mass0).abs() / mass0
        );
    }

    // tau and sigma have unit Jacobian for any admissible theta
    let aniso = ExponentVector::from_strs(&["3/2", "3/2", "5"]).unwrap();
    let n_over_p = 3.0 / 45.0 * 23.0; // n/p = 23/15
    let theta = ThetaVector::new(&aniso, vec![3.0 / n_over_p, 3.0 / n_over_p, 3.0 / n_over_p])
        .unwrap();
    let tau = tau_theta(&aniso, &theta).unwrap();
    println!("\ntau scales    = {:?}", tau.scales);
    println!("tau jacobian  = {:.15}", tau.jacobian());

    let field = sample(&grid, &u).unwrap();
    let grads = grad_integrals(&field, &ev).unwrap();
    let theta_iso = ThetaVector::new(&ev, vec![2.0; 3]).unwrap();
    let sigma = sigma_theta(&ev, &theta_iso, &grads).unwrap();
    println!("sigma scales  = {:?}", sigma.scales);
    println!("sigma jacobian= {:.15}", sigma.jacobian());

    // Euler-Lagrange normalization of the sampled profile
    let mass = integrate_pow(&field, 6.0);
    let (lambda_u, rescale) = euler_lagrange_rescale(&ev, &grads, mass).unwrap();
    println!("\nlambda(u) = {lambda_u:.6}");
    println!("rescale   = {:?}", rescale.scales);
}
