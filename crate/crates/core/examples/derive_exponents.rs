//! Walk the exponent calculus for a few anisotropy vectors: harmonic mean,
//! critical and Serrin exponents, the index set Θ, the vanishing thresholds
//! p̄₀ and q₀, and the regime classification.
//!
//! Run with: cargo run --example derive_exponents

use anisodecay::exponents::{DerivedExponents, ExponentVector};
use anisodecay::rational::format_rational;
use num::traits::ToPrimitive;

fn show(parts: &[&str]) {
    let ev = ExponentVector::from_strs(parts).expect("valid exponent vector");
    let d = DerivedExponents::compute(&ev).expect("derivation");
    println!("p = ({})", parts.join(", "));
    println!(
        "  harmonic p = {} ({:.6})",
        format_rational(&d.core.p_harmonic),
        d.core.p_harmonic.to_f64().unwrap()
    );
    println!(
        "  p* = {}, p_* = {}, p+ = {}, p- = {}",
        format_rational(&d.core.p_critical),
        format_rational(&d.core.p_serrin),
        format_rational(&d.core.p_max),
        format_rational(&d.core.p_min),
    );
    println!("  regime = {}", d.core.regime.as_str());
    println!("  theta = {:?}, p_bar0 = {}", d.theta, format_rational(&d.p_bar0));
    println!(
        "  q0 = {} (exact: {}), I0 = {:?}, I0^c = {:?}",
        format_rational(&d.q0.value),
        d.q0.exact,
        d.i0,
        d.i0_complement
    );
    println!(
        "  q0 quadratic: {}q^2 + {}q + {} (discriminant {})",
        d.q0.quadratic.a,
        d.q0.quadratic.b,
        d.q0.quadratic.c,
        d.q0.quadratic.discriminant()
    );
    println!();
}

fn main() {
    // isotropic: everything collapses to the classical exponents
    show(&["2", "2", "2"]);
    // the vanishing showcase: p_* < p+ < p*, one compactly supported axis
    show(&["3/2", "3/2", "5"]);
    // two dimensions
    show(&["3/2", "3/2"]);
    // recomputation guard: swapping in the previous p* changes everything
    show(&["3/2", "3/2", "45/8"]);
}
