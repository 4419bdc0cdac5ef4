//! Exact computation of the exponents and index sets attached to an
//! anisotropy vector.
//!
//! All quantities here are exact rationals except `q0`, which is the largest
//! real root of a rational quadratic: when the discriminant is a perfect
//! square the root is exact, otherwise it is enclosed by rational bisection
//! to width 1e-12. Index sets are 1-based throughout the public surface.

use std::collections::BTreeSet;

use num::traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{
    format_rational, parse_rational, ratio, IntQuadratic, RootBracket,
};
use crate::Rational;

/// The anisotropy data p⃗ = (p₁,…,pₙ).
///
/// Invariants: n ≥ 2, every pᵢ > 1, and Σ 1/pᵢ > 1 (equivalently the
/// harmonic mean is below n).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExponentVector {
    p: Vec<Rational>,
}

impl ExponentVector {
    pub fn new(p: Vec<Rational>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::invalid("n must be at least 2"));
        }
        let one = ratio(1, 1);
        if p.iter().any(|pi| *pi <= one) {
            return Err(Error::invalid("p_i must exceed 1"));
        }
        let recip_sum: Rational = p.iter().map(|pi| pi.recip()).sum();
        if recip_sum <= one {
            return Err(Error::invalid(
                "sum of reciprocals 1/p_i must exceed 1 (harmonic mean must stay below n)",
            ));
        }
        Ok(ExponentVector { p })
    }

    pub fn from_strs<S: AsRef<str>>(parts: &[S]) -> Result<Self> {
        let p = parts
            .iter()
            .map(|s| parse_rational(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        ExponentVector::new(p)
    }

    /// Parse the JSON form `{"n": 3, "p": ["3/2", "3/2", 5]}` with rationals
    /// as `num/den` strings or integers. `n` must match the list length.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let list = value
            .get("p")
            .and_then(|p| p.as_array())
            .ok_or_else(|| Error::invalid("exponent JSON needs a \"p\" array"))?;
        if let Some(n) = value.get("n") {
            if n.as_u64() != Some(list.len() as u64) {
                return Err(Error::invalid(format!(
                    "\"n\" = {n} does not match the {} exponents given",
                    list.len()
                )));
            }
        }
        let p = list
            .iter()
            .map(|entry| match entry {
                serde_json::Value::String(s) => parse_rational(s),
                serde_json::Value::Number(num) => num
                    .as_i64()
                    .map(|k| Rational::from_integer(k.into()))
                    .ok_or_else(|| {
                        Error::invalid(format!(
                            "exponent {num} is not an integer; write rationals as \"a/b\""
                        ))
                    }),
                other => Err(Error::invalid(format!("bad exponent entry {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        ExponentVector::new(p)
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn exponents(&self) -> &[Rational] {
        &self.p
    }

    /// 1-based access matching the 1-based index sets in reports.
    pub fn p_i(&self, i: usize) -> &Rational {
        &self.p[i - 1]
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.p.iter().map(|r| r.to_f64().unwrap()).collect()
    }

    pub fn recip_sum(&self) -> Rational {
        self.p.iter().map(|pi| pi.recip()).sum()
    }

    /// Harmonic mean p: n / Σ 1/pᵢ.
    pub fn p_harmonic(&self) -> Rational {
        Rational::from_integer(self.n().into()) / self.recip_sum()
    }
}

/// Growth regime of the anisotropy, classified by where p₊ sits relative to
/// the Serrin exponent p_* and the critical exponent p*.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// p₊ < p_*: full decay estimates hold along every axis.
    Subserrin,
    /// p₊ = p_* exactly.
    SerrinLimit,
    /// p_* < p₊ < p*: solutions vanish along the I₀ directions.
    Vanishing,
    /// p₊ ≥ p*: outside the scope of the decay theorems.
    Supercritical,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Subserrin => "SUBSERRIN",
            Regime::SerrinLimit => "SERRIN_LIMIT",
            Regime::Vanishing => "VANISHING",
            Regime::Supercritical => "SUPERCRITICAL",
        }
    }
}

/// The core exponents computable directly from the vector.
#[derive(Debug, Clone)]
pub struct CoreExponents {
    pub p_harmonic: Rational,
    pub p_critical: Rational,
    pub p_serrin: Rational,
    pub p_max: Rational,
    pub p_min: Rational,
    pub regime: Regime,
}

/// q₀ as the clamped largest root of the defining quadratic, with the raw
/// root kept for auditability and the primitive integer quadratic exposed.
#[derive(Debug, Clone)]
pub struct QZero {
    /// max(p_*, largest real root); midpoint of the bracket when inexact.
    pub value: Rational,
    /// Whether `value` is exact (rational root, or the p_* clamp engaged).
    pub exact: bool,
    /// Enclosure of the unclamped largest root, absent when no real root.
    pub raw_root: Option<RootBracket>,
    /// The quadratic φ, normalized to primitive integer coefficients with
    /// positive leading term. The normalization flips the sign of φ, so the
    /// decay condition φ(q) < 0 reads `quadratic.eval(q) > 0` here.
    pub quadratic: IntQuadratic,
}

/// Everything derived from an exponent vector in one record.
#[derive(Debug, Clone)]
pub struct DerivedExponents {
    pub core: CoreExponents,
    pub theta: BTreeSet<usize>,
    pub p_bar0: Rational,
    pub q0: QZero,
    pub i0: BTreeSet<usize>,
    pub i0_complement: BTreeSet<usize>,
}

/// Core exponents: p, p* = np/(n−p), p_* = (n−1)p/(n−p), p±, and the regime.
pub fn derive(ev: &ExponentVector) -> CoreExponents {
    let n = Rational::from_integer(ev.n().into());
    let p = ev.p_harmonic();
    let denom = ev.recip_sum() - ratio(1, 1);
    let p_critical = &n / &denom;
    let p_serrin = (&n - ratio(1, 1)) / &denom;
    let p_max = ev.exponents().iter().max().unwrap().clone();
    let p_min = ev.exponents().iter().min().unwrap().clone();
    let mut core = CoreExponents {
        p_harmonic: p,
        p_critical,
        p_serrin,
        p_max,
        p_min,
        regime: Regime::Subserrin,
    };
    core.regime = classify_regime(&core);
    core
}

/// Regime tag from exact comparisons of p₊ against p_* and p*.
pub fn classify_regime(core: &CoreExponents) -> Regime {
    if core.p_max < core.p_serrin {
        Regime::Subserrin
    } else if core.p_max == core.p_serrin {
        Regime::SerrinLimit
    } else if core.p_max < core.p_critical {
        Regime::Vanishing
    } else {
        Regime::Supercritical
    }
}

/// The set Θ of indices i with
/// (pᵢ − p₋ − (n/p)(pᵢ − p_*))·Σⱼ max((pᵢ−pⱼ)/pⱼ, 0) ≥ (p_*−1)(pᵢ−p₋),
/// evaluated exactly. The index attaining p₋ is always a member (both sides
/// vanish).
pub fn theta_set(ev: &ExponentVector, core: &CoreExponents) -> BTreeSet<usize> {
    let n_over_p = Rational::from_integer(ev.n().into()) / &core.p_harmonic;
    let mut out = BTreeSet::new();
    for i in 1..=ev.n() {
        let pi = ev.p_i(i);
        let factor = pi - &core.p_min - &n_over_p * (pi - &core.p_serrin);
        let spread: Rational = ev
            .exponents()
            .iter()
            .map(|pj| {
                let d = (pi - pj) / pj;
                if d.is_positive() {
                    d
                } else {
                    Rational::zero()
                }
            })
            .sum();
        let lhs = factor * spread;
        let rhs = (&core.p_serrin - ratio(1, 1)) * (pi - &core.p_min);
        if lhs >= rhs {
            out.insert(i);
        }
    }
    out
}

/// p̄₀ = max(p_*, max{pᵢ : i ∈ Θ}).
pub fn p_bar0(ev: &ExponentVector, theta: &BTreeSet<usize>, core: &CoreExponents) -> Rational {
    let theta_max = theta.iter().map(|&i| ev.p_i(i)).max();
    match theta_max {
        Some(m) if *m > core.p_serrin => m.clone(),
        _ => core.p_serrin.clone(),
    }
}

/// I₀ = {i : pᵢ > p̄₀} and its complement.
pub fn index_sets(
    ev: &ExponentVector,
    p_bar0: &Rational,
) -> (BTreeSet<usize>, BTreeSet<usize>) {
    let mut i0 = BTreeSet::new();
    let mut i0c = BTreeSet::new();
    for i in 1..=ev.n() {
        if ev.p_i(i) > p_bar0 {
            i0.insert(i);
        } else {
            i0c.insert(i);
        }
    }
    (i0, i0c)
}

/// q₀ from the quadratic
/// φ(q) = (q − p₋ − (n/p)(q − p_*))·Σ_{i∈I₀ᶜ}(q−pᵢ)/pᵢ − (p_*−1)(q−p₋),
/// clamped below by p_*. φ has negative leading coefficient since I₀ᶜ is
/// never empty; when I₀ = ∅ the largest root is p_* itself, so the clamp is
/// inactive exactly when it should be.
pub fn q_zero(
    ev: &ExponentVector,
    core: &CoreExponents,
    i0_complement: &BTreeSet<usize>,
) -> Result<QZero> {
    if i0_complement.is_empty() {
        return Err(Error::invalid("I0 complement must be nonempty"));
    }
    let n_over_p = Rational::from_integer(ev.n().into()) / &core.p_harmonic;
    // φ(q) = (αq + β)(sq − t) − (p_*−1)(q − p₋)
    let alpha = ratio(1, 1) - &n_over_p;
    let beta = &n_over_p * &core.p_serrin - &core.p_min;
    let s: Rational = i0_complement.iter().map(|&i| ev.p_i(i).recip()).sum();
    let t = Rational::from_integer(i0_complement.len().into());
    let serrin_m1 = &core.p_serrin - ratio(1, 1);
    let a = &alpha * &s;
    let b = &beta * &s - &alpha * &t - &serrin_m1;
    let c = &serrin_m1 * &core.p_min - &beta * &t;
    let quadratic = IntQuadratic::from_rational(&a, &b, &c)?;
    let width = ratio(1, 1_000_000_000_000);
    let raw_root = quadratic.largest_root(&width);
    let (value, exact) = match &raw_root {
        None => (core.p_serrin.clone(), true),
        Some(r) if r.exact => {
            if r.lo <= core.p_serrin {
                (core.p_serrin.clone(), true)
            } else {
                (r.lo.clone(), true)
            }
        }
        Some(r) => {
            if r.hi <= core.p_serrin {
                (core.p_serrin.clone(), true)
            } else {
                (r.midpoint(), false)
            }
        }
    };
    Ok(QZero {
        value,
        exact,
        raw_root,
        quadratic,
    })
}

impl DerivedExponents {
    /// Run the whole calculus: core exponents, Θ, p̄₀, q₀, and I₀.
    pub fn compute(ev: &ExponentVector) -> Result<Self> {
        let core = derive(ev);
        let theta = theta_set(ev, &core);
        let p_bar0 = p_bar0(ev, &theta, &core);
        let (i0, i0_complement) = index_sets(ev, &p_bar0);
        let q0 = q_zero(ev, &core, &i0_complement)?;
        Ok(DerivedExponents {
            core,
            theta,
            p_bar0,
            q0,
            i0,
            i0_complement,
        })
    }
}

fn rational_json(r: &Rational) -> serde_json::Value {
    serde_json::json!({
        "exact": format_rational(r),
        "decimal": r.to_f64().unwrap(),
    })
}

impl DerivedExponents {
    /// JSON record with both exact and decimal renderings of every exponent.
    pub fn to_json(&self, ev: &ExponentVector) -> serde_json::Value {
        let q0 = &self.q0;
        let raw = q0.raw_root.as_ref().map(|r| {
            serde_json::json!({
                "lo": format_rational(&r.lo),
                "hi": format_rational(&r.hi),
                "exact": r.exact,
                "decimal": r.midpoint().to_f64().unwrap(),
            })
        });
        serde_json::json!({
            "n": ev.n(),
            "p": ev.exponents().iter().map(format_rational).collect::<Vec<_>>(),
            "p_harmonic": rational_json(&self.core.p_harmonic),
            "p_critical": rational_json(&self.core.p_critical),
            "p_serrin": rational_json(&self.core.p_serrin),
            "p_max": rational_json(&self.core.p_max),
            "p_min": rational_json(&self.core.p_min),
            "theta": self.theta.iter().copied().collect::<Vec<_>>(),
            "p_bar0": rational_json(&self.p_bar0),
            "q0": {
                "value_exact": format_rational(&q0.value),
                "value": q0.value.to_f64().unwrap(),
                "is_exact": q0.exact,
                "raw_root": raw,
                "quadratic": {
                    "a": q0.quadratic.a.to_string(),
                    "b": q0.quadratic.b.to_string(),
                    "c": q0.quadratic.c.to_string(),
                },
            },
            "i0": self.i0.iter().copied().collect::<Vec<_>>(),
            "i0_complement": self.i0_complement.iter().copied().collect::<Vec<_>>(),
            "regime": self.core.regime.as_str(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::from_i64;
    use proptest::prelude::*;

    fn ev(parts: &[&str]) -> ExponentVector {
        ExponentVector::from_strs(parts).unwrap()
    }

    #[test]
    fn rejects_invalid_vectors() {
        assert!(ExponentVector::from_strs(&["2"]).is_err());
        let err = ExponentVector::from_strs(&["1", "2"]).unwrap_err();
        assert!(err.to_string().contains("p_i must exceed 1"));
        // harmonic mean too large: sum of reciprocals <= 1
        assert!(ExponentVector::from_strs(&["4", "4", "4"]).is_err());
    }

    #[test]
    fn parses_json_form() {
        let v = serde_json::json!({"n": 3, "p": ["3/2", "3/2", 5]});
        let ev = ExponentVector::from_json(&v).unwrap();
        assert_eq!(ev.p_i(3), &from_i64(5));
        assert_eq!(ev.p_i(1), &ratio(3, 2));
        // mismatched n rejected
        let bad = serde_json::json!({"n": 2, "p": ["3/2", "3/2", "5"]});
        assert!(ExponentVector::from_json(&bad).is_err());
        // non-integer bare numbers rejected (decimals go in strings)
        let bad = serde_json::json!({"p": [1.5, 2]});
        assert!(ExponentVector::from_json(&bad).is_err());
    }

    #[test]
    fn isotropic_three_two() {
        let v = ev(&["2", "2", "2"]);
        let core = derive(&v);
        assert_eq!(core.p_harmonic, from_i64(2));
        assert_eq!(core.p_critical, from_i64(6));
        assert_eq!(core.p_serrin, from_i64(4));
        assert_eq!(core.regime, Regime::Subserrin);
        let theta = theta_set(&v, &core);
        assert_eq!(theta, BTreeSet::from([1, 2, 3]));
        assert_eq!(p_bar0(&v, &theta, &core), from_i64(4));
        let d = DerivedExponents::compute(&v).unwrap();
        assert_eq!(d.q0.value, from_i64(4));
        assert!(d.q0.exact);
        assert!(d.i0.is_empty());
    }

    #[test]
    fn golden_vanishing_vector() {
        let v = ev(&["3/2", "3/2", "5"]);
        let d = DerivedExponents::compute(&v).unwrap();
        assert_eq!(d.core.p_harmonic, ratio(45, 23));
        assert_eq!(d.core.p_critical, ratio(45, 8));
        assert_eq!(d.core.p_serrin, ratio(15, 4));
        assert_eq!(d.core.p_max, from_i64(5));
        assert_eq!(d.core.regime, Regime::Vanishing);
        assert_eq!(d.theta, BTreeSet::from([1, 2]));
        assert_eq!(d.p_bar0, ratio(15, 4));
        assert_eq!(d.i0, BTreeSet::from([3]));
        assert_eq!(d.i0_complement, BTreeSet::from([1, 2]));
        assert!(d.q0.exact);
        assert_eq!(d.q0.value, ratio(525, 128));
    }

    #[test]
    fn theta_inequality_sides_for_index_three() {
        // Index 3 of (3/2, 3/2, 5) fails Θ with LHS = 133/18 < RHS = 77/8.
        let v = ev(&["3/2", "3/2", "5"]);
        let core = derive(&v);
        let n_over_p = from_i64(3) / &core.p_harmonic;
        let pi = v.p_i(3);
        let factor = pi - &core.p_min - &n_over_p * (pi - &core.p_serrin);
        let spread: Rational = v
            .exponents()
            .iter()
            .map(|pj| {
                let d = (pi - pj) / pj;
                if d > Rational::zero() {
                    d
                } else {
                    Rational::zero()
                }
            })
            .sum();
        assert_eq!(factor * spread, ratio(133, 18));
        let rhs = (&core.p_serrin - ratio(1, 1)) * (pi - &core.p_min);
        assert_eq!(rhs, ratio(77, 8));
    }

    #[test]
    fn two_dimensional_case() {
        let v = ev(&["3/2", "3/2"]);
        let d = DerivedExponents::compute(&v).unwrap();
        assert_eq!(d.core.p_harmonic, ratio(3, 2));
        assert_eq!(d.core.p_critical, from_i64(6));
        assert_eq!(d.core.p_serrin, from_i64(3));
        assert_eq!(d.core.regime, Regime::Subserrin);
        assert_eq!(d.p_bar0, from_i64(3));
        assert_eq!(d.q0.value, from_i64(3));
    }

    #[test]
    fn regime_recomputed_from_vector_not_stale() {
        // Swapping in p* of the previous vector changes every derived
        // exponent; classification must recompute rather than reuse.
        let v = ev(&["3/2", "3/2", "45/8"]);
        let d = DerivedExponents::compute(&v).unwrap();
        assert_eq!(d.core.p_harmonic, ratio(135, 68));
        assert_eq!(d.core.p_critical, ratio(135, 23));
        assert_eq!(d.core.p_serrin, ratio(90, 23));
        // 90/23 < 45/8 < 135/23
        assert_eq!(d.core.regime, Regime::Vanishing);
    }

    #[test]
    fn serrin_identity_exact() {
        // p_* - 1 = n(p-1)/(n-p)
        for parts in [
            vec!["2", "2", "2"],
            vec!["3/2", "3/2", "5"],
            vec!["7/5", "9/4", "3", "11/6"],
        ] {
            let v = ev(&parts);
            let core = derive(&v);
            let n = from_i64(v.n() as i64);
            let lhs = &core.p_serrin - ratio(1, 1);
            let rhs = &n * (&core.p_harmonic - ratio(1, 1))
                / (&n - &core.p_harmonic);
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn quadratic_matches_acceptance_form() {
        let v = ev(&["3/2", "3/2", "5"]);
        let d = DerivedExponents::compute(&v).unwrap();
        assert_eq!(d.q0.quadratic.a, num::BigInt::from(256));
        assert_eq!(d.q0.quadratic.b, num::BigInt::from(-1434));
        assert_eq!(d.q0.quadratic.c, num::BigInt::from(1575));
        // grid scan of the defining inequality: φ(q) < 0 strictly above the
        // root, fails strictly below it (down to p_*)
        let root = ratio(525, 128);
        for k in 1..=40 {
            let q = &root + ratio(k, 10);
            assert!(d.q0.quadratic.eval(&q).is_positive(), "phi(q) < 0 above q0");
        }
        let mut q = &root - ratio(1, 100);
        while q > d.core.p_serrin {
            assert!(!d.q0.quadratic.eval(&q).is_positive(), "phi(q) >= 0 below q0");
            q -= ratio(1, 10);
        }
    }

    proptest! {
        #[test]
        fn permutation_equivariance(perm_seed in 0u64..1000) {
            let v = ev(&["3/2", "9/5", "5", "2"]);
            let mut idx: Vec<usize> = (0..4).collect();
            // cheap deterministic shuffle
            let mut s = perm_seed;
            for i in (1..4).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
                idx.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let permuted: Vec<Rational> =
                idx.iter().map(|&k| v.exponents()[k].clone()).collect();
            let w = ExponentVector::new(permuted).unwrap();
            let dv = DerivedExponents::compute(&v).unwrap();
            let dw = DerivedExponents::compute(&w).unwrap();
            prop_assert_eq!(&dv.core.p_harmonic, &dw.core.p_harmonic);
            prop_assert_eq!(&dv.core.p_critical, &dw.core.p_critical);
            prop_assert_eq!(&dv.p_bar0, &dw.p_bar0);
            prop_assert_eq!(&dv.q0.value, &dw.q0.value);
            prop_assert_eq!(dv.core.regime, dw.core.regime);
            // index sets permute: i is in dw's theta iff idx[i-1]+1 in dv's
            let mapped: BTreeSet<usize> =
                dw.theta.iter().map(|&i| idx[i - 1] + 1).collect();
            prop_assert_eq!(mapped, dv.theta.clone());
            let mapped_i0: BTreeSet<usize> =
                dw.i0.iter().map(|&i| idx[i - 1] + 1).collect();
            prop_assert_eq!(mapped_i0, dv.i0.clone());
        }

        #[test]
        fn min_index_always_in_theta(nums in proptest::collection::vec(11u32..80, 2..5)) {
            let p: Vec<Rational> = nums.iter().map(|&x| ratio(x as i64, 10)).collect();
            if let Ok(v) = ExponentVector::new(p) {
                let core = derive(&v);
                let theta = theta_set(&v, &core);
                let arg_min = (1..=v.n())
                    .min_by(|&a, &b| v.p_i(a).cmp(v.p_i(b)))
                    .unwrap();
                prop_assert!(theta.contains(&arg_min));
                prop_assert!(p_bar0(&v, &theta, &core) >= core.p_serrin);
            }
        }
    }
}
