//! Minimize the constrained energy on a small isotropic grid and compare the
//! result against the closed-form extremal profile.
//!
//! Run with: cargo run --release --example minimize_extremal

use anisodecay::exponents::ExponentVector;
use anisodecay::grid::TensorGrid;
use anisodecay::solver::{minimize, SolverConfig};

fn main() {
    let ev = ExponentVector::from_strs(&["2", "2", "2"]).unwrap();
    let grid = TensorGrid::new(vec![8.0; 3], vec![25; 3]).unwrap();
    let mut config = SolverConfig::new(ev, grid.clone()).unwrap();
    config.max_iters = 40;

    let report = minimize(&config).unwrap();
    println!("iterations     = {}", report.stats.iterations);
    println!("converged      = {}", report.stats.converged);
    println!("energy         = {:.8}", report.energy);
    println!("mass           = {:.14}", report.mass);
    println!("lambda(u)      = {:.8}", report.lambda_u);
    println!("rescale scales = {:?}", report.rescale.scales);
    println!("residual       = {:.3e}", report.stats.residual);

    // center-line profile against the two-parameter family (a + b x^2)^(-1/2)
    // fitted from the center node and its first axis neighbor
    let m = grid.counts()[0];
    let c = (m - 1) / 2;
    let u0 = report.field.values()[grid.flat_index(&[c, c, c])];
    let x1 = grid.coord(0, c + 1);
    let u1 = report.field.values()[grid.flat_index(&[c + 1, c, c])];
    let a = u0.powi(-2);
    let b = (u1.powi(-2) - a) / (x1 * x1);
    println!("\nfitted profile parameters: a = {a:.5}, b = {b:.5}");
    println!("   x      solver    (a+b x^2)^(-1/2)");
    for i in (c..m).step_by(2) {
        let x = grid.coord(0, i);
        let v = report.field.values()[grid.flat_index(&[i, c, c])];
        let closed = (a + b * x * x).powf(-0.5);
        println!("{x:6.2}  {v:9.5}  {closed:9.5}");
    }
}
