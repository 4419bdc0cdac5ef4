//! Support detection and the anisotropic tail radius: construct a field
//! truncated along one axis, recover the truncation extent, and compute
//! tail radii of the untruncated profile.
//!
//! Run with: cargo run --example vanishing_support

use std::collections::BTreeSet;

use anisodecay::closed_forms::{aniso_distance, isotropic_extremal};
use anisodecay::decay::{detect_support, tail_radius};
use anisodecay::exponents::ExponentVector;
use anisodecay::grid::{integrate_pow, sample, TensorGrid};

fn main() {
    let ev = ExponentVector::from_strs(&["2", "2", "2"]).unwrap();
    let grid = TensorGrid::new(vec![6.0; 3], vec![49; 3]).unwrap();
    let u = isotropic_extremal(3, 2.0, 1.0, 1.0).unwrap();
    let field = sample(&grid, &u).unwrap();

    // strictly positive profile: support fills the box
    let rep = detect_support(&field, 1e-12, None).unwrap();
    println!("positive profile extents: {:?}", rep.extents);

    // truncate along axis 3 at |x_3| <= 2 and recover the extent
    let mut truncated = field.clone();
    let mut x = vec![0.0; 3];
    for k in 0..grid.len() {
        grid.node(k, &mut x);
        if x[2].abs() > 2.0 {
            truncated.values_mut()[k] = 0.0;
        }
    }
    let i0: BTreeSet<usize> = [3].into();
    let rep = detect_support(&truncated, 1e-12, Some(&i0)).unwrap();
    println!(
        "truncated at |x3| <= 2: extents {:?}, r0 estimate {:?} (spacing {})",
        rep.extents,
        rep.r0_estimate,
        grid.spacing(2)
    );

    // tail radii shrink as the allowed tail norm grows
    let total = integrate_pow(&field, 6.0).powf(1.0 / 6.0);
    let d = aniso_distance(&ev).unwrap();
    println!("\ntotal p*-norm = {total:.5}, d_p exponents = {:?}", d.exponents());
    for frac in [0.25, 0.5, 0.75, 0.99] {
        let r = tail_radius(&field, &ev, total * frac).unwrap();
        println!("  kappa = {:>5.2} * total  ->  r_kappa = {r:.4}", frac);
    }
}
