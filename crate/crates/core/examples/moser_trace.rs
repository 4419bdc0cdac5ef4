//! Enumerate the Moser iteration bookkeeping for a worked instance: the
//! stopping threshold, the iteration-count bounds k±, the stopped paths
//! grouped by length, the λ-ladder, and the net-exponent identity.
//!
//! Run with: cargo run --example moser_trace

use std::collections::BTreeSet;

use anisodecay::exponents::ExponentVector;
use anisodecay::moser::{enumerate_phi, net_exponent_identity};
use anisodecay::rational::{format_rational, from_i64, ratio};
use num::traits::ToPrimitive;

fn main() {
    let ev = ExponentVector::from_strs(&["3/2", "2", "3"]).unwrap();
    let i2: BTreeSet<usize> = [1, 2, 3].into();
    let gamma = from_i64(12);
    let eps = ratio(1, 4);

    let trace = enumerate_phi(&ev, &BTreeSet::new(), &i2, &gamma, &eps, None).unwrap();
    println!(
        "gamma = {}, eps = {}, p0 = {}, threshold = {} ({:.4})",
        format_rational(&trace.gamma0),
        format_rational(&trace.eps),
        format_rational(&trace.p0),
        format_rational(&trace.threshold),
        trace.threshold.to_f64().unwrap()
    );
    println!("k- = {}, k+ = {}, stopped paths = {}", trace.kminus, trace.kplus, trace.path_count());
    for (k, paths) in &trace.phi {
        println!("  phi[{k}]: {} paths", paths.len());
        for (path, g) in paths.iter().take(4) {
            println!("    {:?} -> gamma = {}", path, format_rational(g));
        }
        if paths.len() > 4 {
            println!("    ...");
        }
    }
    println!(
        "ladder: {:?}",
        trace
            .ladder
            .iter()
            .map(|l| l.to_f64().unwrap())
            .collect::<Vec<_>>()
    );
    if !trace.boundary_hits.is_empty() {
        println!("boundary hits (gamma exactly on the threshold): {:?}", trace.boundary_hits);
    }

    // the net-exponent identity holds exactly on every stopped path
    let (path, _) = &trace.phi.values().next().unwrap()[0];
    let (lhs, rhs) = net_exponent_identity(&ev, &gamma, path);
    println!(
        "\nnet exponent identity on {:?}: tau - sigma = {} = {}",
        path,
        format_rational(&lhs),
        format_rational(&rhs)
    );
    assert_eq!(lhs, rhs);
}
