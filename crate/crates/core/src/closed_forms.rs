//! Closed-form evaluators: the isotropic extremal profile, the decay
//! envelopes bounding |u|^q and the gradient powers, the anisotropic
//! quasi-distance d_p, and membership in the annular product domains Ω_q.
//!
//! Evaluators are pure closures over validated specs; quadrature drives them
//! millions of times, so they hold no state. |0|^e evaluates to 0 for e > 0;
//! specs with nonpositive exponents are rejected at construction.

use std::collections::{BTreeMap, BTreeSet};

use num::traits::ToPrimitive;

use crate::error::{Error, Result};
use crate::exponents::{derive, ExponentVector};
use crate::transforms::Evaluator;

/// The profile (a + b·Σᵢ|xᵢ|^{p/(p−1)})^{(p−n)/p} attaining the isotropic
/// best constant. Requires 1 < p < n.
#[derive(Debug, Clone)]
pub struct IsotropicExtremal {
    n: usize,
    inner_exp: f64,
    outer_exp: f64,
    a: f64,
    b: f64,
}

impl IsotropicExtremal {
    pub fn new(n: usize, p: f64, a: f64, b: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid("dimension must be at least 2"));
        }
        if !(p > 1.0 && p < n as f64) {
            return Err(Error::invalid(format!(
                "extremal profile needs 1 < p < n, got p = {p}, n = {n}"
            )));
        }
        if !(a > 0.0 && b > 0.0) {
            return Err(Error::invalid("profile parameters a, b must be positive"));
        }
        Ok(IsotropicExtremal {
            n,
            inner_exp: p / (p - 1.0),
            outer_exp: (p - n as f64) / p,
            a,
            b,
        })
    }

    /// Partial derivative along `axis` (1-based), available in closed form.
    pub fn partial(&self, axis: usize) -> IsotropicExtremalPartial {
        assert!(axis >= 1 && axis <= self.n, "axis out of range");
        IsotropicExtremalPartial {
            profile: self.clone(),
            axis: axis - 1,
        }
    }
}

impl Evaluator for IsotropicExtremal {
    fn eval(&self, x: &[f64]) -> f64 {
        let s: f64 = x.iter().map(|xi| xi.abs().powf(self.inner_exp)).sum();
        (self.a + self.b * s).powf(self.outer_exp)
    }
}

/// ∂ᵢ of the isotropic extremal:
/// (p−n)/p·(a+bΣ|x|^{p/(p−1)})^{(p−n)/p−1}·b·(p/(p−1))·|xᵢ|^{1/(p−1)}·sgn(xᵢ).
#[derive(Debug, Clone)]
pub struct IsotropicExtremalPartial {
    profile: IsotropicExtremal,
    axis: usize,
}

impl Evaluator for IsotropicExtremalPartial {
    fn eval(&self, x: &[f64]) -> f64 {
        let p = &self.profile;
        let s: f64 = x.iter().map(|xi| xi.abs().powf(p.inner_exp)).sum();
        let xi = x[self.axis];
        if xi == 0.0 {
            return 0.0;
        }
        p.outer_exp
            * (p.a + p.b * s).powf(p.outer_exp - 1.0)
            * p.b
            * p.inner_exp
            * xi.abs().powf(p.inner_exp - 1.0)
            * xi.signum()
    }
}

pub fn isotropic_extremal(n: usize, p: f64, a: f64, b: f64) -> Result<IsotropicExtremal> {
    IsotropicExtremal::new(n, p, a, b)
}

/// Parameters of the decay envelope c·(1 + Σ_{i∈axes}|xᵢ|^{qpᵢ/(q−pᵢ)})^{−1}.
///
/// `axes` runs over all indices in the sub-Serrin and Serrin-limit regimes
/// and over I₀ᶜ in the vanishing regime; `q` must exceed every pᵢ on those
/// axes so the exponents stay positive.
#[derive(Debug, Clone)]
pub struct EnvelopeSpec {
    exponents: Vec<(usize, f64)>, // (0-based axis, q·pᵢ/(q−pᵢ))
    n: usize,
    pub q: f64,
    pub c: f64,
}

impl EnvelopeSpec {
    pub fn new(ev: &ExponentVector, q: f64, axes: &BTreeSet<usize>, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid("envelope constant must be positive"));
        }
        if axes.is_empty() {
            return Err(Error::invalid("envelope axes must be nonempty"));
        }
        let pf = ev.as_f64();
        let mut exponents = Vec::new();
        for &i in axes {
            if i < 1 || i > ev.n() {
                return Err(Error::invalid(format!("axis {i} out of range")));
            }
            let pi = pf[i - 1];
            if q <= pi {
                return Err(Error::invalid(format!(
                    "envelope needs q > p_i on every axis; q = {q} <= p_{i} = {pi}"
                )));
            }
            exponents.push((i - 1, q * pi / (q - pi)));
        }
        Ok(EnvelopeSpec {
            exponents,
            n: ev.n(),
            q,
            c,
        })
    }

    pub fn axis_exponent(&self, axis: usize) -> Option<f64> {
        self.exponents
            .iter()
            .find(|(i, _)| *i == axis - 1)
            .map(|(_, e)| *e)
    }
}

/// Evaluator of the envelope right-hand side.
#[derive(Debug, Clone)]
pub struct DecayEnvelope {
    spec: EnvelopeSpec,
}

impl Evaluator for DecayEnvelope {
    fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.spec.n);
        let s: f64 = self
            .spec
            .exponents
            .iter()
            .map(|(i, e)| x[*i].abs().powf(*e))
            .sum();
        self.spec.c / (1.0 + s)
    }
}

pub fn decay_envelope(spec: &EnvelopeSpec) -> DecayEnvelope {
    DecayEnvelope { spec: spec.clone() }
}

/// The quasi-distance d_p(x,y) = Σᵢ|xᵢ−yᵢ|^{δpᵢ/(p*−pᵢ)} with
/// δ = (p*−p₊)/p₊. Defined only below the critical regime (p₊ < p*).
#[derive(Debug, Clone)]
pub struct AnisoDistance {
    exponents: Vec<f64>,
    pub delta: f64,
}

impl AnisoDistance {
    pub fn new(ev: &ExponentVector) -> Result<Self> {
        let core = derive(ev);
        if core.p_max >= core.p_critical {
            return Err(Error::invalid(
                "anisotropic distance needs p_max < p_critical (delta > 0)",
            ));
        }
        let p_critical = core.p_critical.to_f64().unwrap();
        let p_max = core.p_max.to_f64().unwrap();
        let delta = (p_critical - p_max) / p_max;
        let exponents = ev
            .as_f64()
            .iter()
            .map(|pi| delta * pi / (p_critical - pi))
            .collect();
        Ok(AnisoDistance { exponents, delta })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.exponents.len());
        debug_assert_eq!(y.len(), self.exponents.len());
        x.iter()
            .zip(y)
            .zip(&self.exponents)
            .map(|((xi, yi), e)| (xi - yi).abs().powf(*e))
            .sum()
    }

    pub fn from_origin(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.exponents)
            .map(|(xi, e)| xi.abs().powf(*e))
            .sum()
    }

    pub fn exponents(&self) -> &[f64] {
        &self.exponents
    }
}

pub fn aniso_distance(ev: &ExponentVector) -> Result<AnisoDistance> {
    AnisoDistance::new(ev)
}

/// The annular product domain
/// Ω_q = {x : Σ_{I₁}|xᵢ|^{qᵢ} < (1+λ)R₁ and |Σ_{I₂}|xᵢ|^{qᵢ} − R₂| < λR₂}.
#[derive(Debug, Clone)]
pub struct OmegaSpec {
    pub i1: BTreeSet<usize>,
    pub i2: BTreeSet<usize>,
    pub r1: f64,
    pub r2: f64,
    pub lam: f64,
    pub qweights: BTreeMap<usize, f64>,
}

impl OmegaSpec {
    pub fn new(
        i1: BTreeSet<usize>,
        i2: BTreeSet<usize>,
        r1: f64,
        r2: f64,
        lam: f64,
        qweights: BTreeMap<usize, f64>,
    ) -> Result<Self> {
        if i2.is_empty() {
            return Err(Error::invalid("I2 must be nonempty"));
        }
        if !i1.is_disjoint(&i2) {
            return Err(Error::invalid("I1 and I2 must be disjoint"));
        }
        if !(r1 > 0.0 && r2 > 0.0) {
            return Err(Error::invalid("R1 and R2 must be positive"));
        }
        if !(lam > 0.0 && lam < 1.0) {
            return Err(Error::invalid("lambda must lie in (0, 1)"));
        }
        for &i in i1.iter().chain(&i2) {
            match qweights.get(&i) {
                Some(q) if *q > 1.0 => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "every index in I1 union I2 needs a weight q_{i} > 1"
                    )))
                }
            }
        }
        Ok(OmegaSpec {
            i1,
            i2,
            r1,
            r2,
            lam,
            qweights,
        })
    }

    /// Same domain at a different λ (the nesting parameter).
    pub fn with_lambda(&self, lam: f64) -> Result<Self> {
        OmegaSpec::new(
            self.i1.clone(),
            self.i2.clone(),
            self.r1,
            self.r2,
            lam,
            self.qweights.clone(),
        )
    }
}

/// Membership test for Ω_q (indices 1-based into `x`).
pub fn omega_contains(spec: &OmegaSpec, x: &[f64]) -> bool {
    let s1: f64 = spec
        .i1
        .iter()
        .map(|&i| x[i - 1].abs().powf(spec.qweights[&i]))
        .sum();
    if s1 >= (1.0 + spec.lam) * spec.r1 {
        return false;
    }
    let s2: f64 = spec
        .i2
        .iter()
        .map(|&i| x[i - 1].abs().powf(spec.qweights[&i]))
        .sum();
    (s2 - spec.r2).abs() < spec.lam * spec.r2
}
