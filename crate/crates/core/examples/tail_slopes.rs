//! Fit log-log tail slopes of closed forms along axis rays and compare them
//! with the rates the decay envelopes imply.
//!
//! Run with: cargo run --example tail_slopes

use std::collections::BTreeSet;

use anisodecay::closed_forms::{decay_envelope, isotropic_extremal, EnvelopeSpec};
use anisodecay::decay::{fit_tail_slope, EvalRay};
use anisodecay::exponents::ExponentVector;
use anisodecay::transforms::Evaluator;

fn main() {
    // the isotropic profile decays like |x|^{-(n-p)/(p-1)} = |x|^-1 on axes
    let ev = ExponentVector::from_strs(&["2", "2", "2"]).unwrap();
    let u = isotropic_extremal(3, 2.0, 1.0, 1.0).unwrap();
    let src = EvalRay { n: 3, eval: &u };
    let rep = fit_tail_slope(&src, &ev, 1, (10.0, 100.0), 32, 4.0, 0.02).unwrap();
    println!(
        "isotropic extremal, axis 1, window [10,100]: slope {:.4} +- {:.4} (predicted {:.4}, pass {})",
        rep.fitted_slope, rep.slope_stderr, rep.predicted_slope, rep.pass
    );
    println!("minimal envelope constant over the window: {:.4}", rep.fitted_c);

    // envelope evaluators reproduce -p_i/(q-p_i) on each axis
    let aniso = ExponentVector::from_strs(&["3/2", "3/2", "5"]).unwrap();
    let q = 4.5;
    let spec = EnvelopeSpec::new(&aniso, q, &BTreeSet::from([1, 2]), 1.0).unwrap();
    let env = decay_envelope(&spec);
    let as_u = |x: &[f64]| env.eval(x).powf(1.0 / q);
    let esrc = EvalRay { n: 3, eval: &as_u };
    for axis in [1usize, 2] {
        let rep = fit_tail_slope(&esrc, &aniso, axis, (1e3, 1e6), 16, q, 1e-3).unwrap();
        println!(
            "envelope q={q}, axis {axis}: slope {:.6} (predicted {:.6})",
            rep.fitted_slope, rep.predicted_slope
        );
    }
}
