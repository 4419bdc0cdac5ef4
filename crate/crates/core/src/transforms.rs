//! The explicit coordinate changes of the anisotropic theory: the scale
//! family u ↦ λu(λ^{(p*−pᵢ)/pᵢ}xᵢ), the unit-Jacobian maps τ_θ and σ_{θ,u},
//! and the Euler–Lagrange rescaling of constrained minimizers.
//!
//! A [`DiagonalMap`] carries an amplitude separately from the coordinate
//! scales so the scale family (which multiplies the function value) and the
//! τ/σ maps (which do not) share one composable type.

use num::traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{derive, ExponentVector};

/// Coordinate-wise scaling x ↦ (μ₁x₁,…,μₙxₙ) plus an amplitude prefactor on
/// the function value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalMap {
    pub amplitude: f64,
    pub scales: Vec<f64>,
}

impl DiagonalMap {
    pub fn new(amplitude: f64, scales: Vec<f64>) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::invalid("map amplitude must be positive and finite"));
        }
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::invalid("map scales must be positive and finite"));
        }
        Ok(DiagonalMap { amplitude, scales })
    }

    pub fn identity(n: usize) -> Self {
        DiagonalMap {
            amplitude: 1.0,
            scales: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.scales.len()
    }

    /// Composition in the sense of `apply`: applying `self ∘ other` equals
    /// applying `other` first to the evaluator produced by `self`.
    pub fn compose(&self, other: &DiagonalMap) -> Result<DiagonalMap> {
        if self.n() != other.n() {
            return Err(Error::invalid("composed maps must share the dimension"));
        }
        DiagonalMap::new(
            self.amplitude * other.amplitude,
            self.scales
                .iter()
                .zip(&other.scales)
                .map(|(a, b)| a * b)
                .collect(),
        )
    }

    pub fn jacobian(&self) -> f64 {
        self.scales.iter().product()
    }
}

/// Weights θ⃗ with Σ 1/θᵢ = n/p, the free parameter of the summed form of the
/// inequality.
#[derive(Debug, Clone)]
pub struct ThetaVector {
    theta: Vec<f64>,
}

impl ThetaVector {
    /// Validates Σ 1/θᵢ = n/p to relative 1e-12.
    pub fn new(ev: &ExponentVector, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != ev.n() {
            return Err(Error::invalid("theta length must equal the dimension"));
        }
        if theta.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("theta entries must be positive"));
        }
        let target = ev.n() as f64 / ev.p_harmonic().to_f64().unwrap();
        let sum: f64 = theta.iter().map(|t| 1.0 / t).sum();
        if ((sum - target) / target).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "sum of 1/theta_i is {sum}, must equal n/p = {target} (rel 1e-12)"
            )));
        }
        Ok(ThetaVector { theta })
    }

    pub fn values(&self) -> &[f64] {
        &self.theta
    }
}

/// The scale family of the inequality: amplitude λ, scaleᵢ = λ^{(p*−pᵢ)/pᵢ}.
/// Composes multiplicatively: `scale_family(λ₁) ∘ scale_family(λ₂) =
/// scale_family(λ₁λ₂)`.
pub fn scale_family(ev: &ExponentVector, lambda: f64) -> Result<DiagonalMap> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid("lambda must be positive and finite"));
    }
    let core = derive(ev);
    let p_critical = core.p_critical.to_f64().unwrap();
    let scales = ev
        .as_f64()
        .iter()
        .map(|pi| lambda.powf((p_critical - pi) / pi))
        .collect();
    DiagonalMap::new(lambda, scales)
}

/// τ_θ: scaleᵢ = θᵢ^{1/θᵢ}·Πⱼ θⱼ^{−p/(nθᵢθⱼ)}, amplitude 1. The scales
/// multiply to 1 (unit Jacobian) by the constraint Σ 1/θⱼ = n/p.
pub fn tau_theta(ev: &ExponentVector, theta: &ThetaVector) -> Result<DiagonalMap> {
    let n = ev.n() as f64;
    let p = ev.p_harmonic().to_f64().unwrap();
    let th = theta.values();
    let log_sum: f64 = th.iter().map(|tj| tj.ln() / tj).sum();
    let scales = th
        .iter()
        .map(|ti| (ti.ln() / ti - (p / (n * ti)) * log_sum).exp())
        .collect();
    DiagonalMap::new(1.0, scales)
}

/// σ_{θ,u}: scaleᵢ = Πⱼ Gⱼ^{p/(nθᵢpⱼ)} / Gᵢ^{1/pᵢ} where Gᵢ = ∫|∂ᵢu|^{pᵢ}.
/// Unit Jacobian by the same cancellation as τ_θ.
pub fn sigma_theta(
    ev: &ExponentVector,
    theta: &ThetaVector,
    grad_integrals: &[f64],
) -> Result<DiagonalMap> {
    if grad_integrals.len() != ev.n() {
        return Err(Error::invalid(
            "gradient integral count must equal the dimension",
        ));
    }
    if grad_integrals.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
        return Err(Error::invalid(
            "gradient integrals must be strictly positive (degenerate field)",
        ));
    }
    let n = ev.n() as f64;
    let p = ev.p_harmonic().to_f64().unwrap();
    let pf = ev.as_f64();
    let log_sum: f64 = grad_integrals
        .iter()
        .zip(&pf)
        .map(|(gj, pj)| gj.ln() / pj)
        .sum();
    let scales = theta
        .values()
        .iter()
        .zip(&pf)
        .zip(grad_integrals)
        .map(|((ti, pi), gi)| ((p / (n * ti)) * log_sum - gi.ln() / pi).exp())
        .collect();
    DiagonalMap::new(1.0, scales)
}

/// The Euler–Lagrange normalization of a constrained minimizer:
/// λ(u) = Σᵢ pᵢGᵢ / ∫|u|^{p*}, scaleᵢ = (λ(u)/pᵢ)^{1/pᵢ}.
pub fn euler_lagrange_rescale(
    ev: &ExponentVector,
    grad_integrals: &[f64],
    mass_integral: f64,
) -> Result<(f64, DiagonalMap)> {
    if grad_integrals.len() != ev.n() {
        return Err(Error::invalid(
            "gradient integral count must equal the dimension",
        ));
    }
    if !(mass_integral.is_finite() && mass_integral > 0.0) {
        return Err(Error::invalid("mass integral must be strictly positive"));
    }
    if grad_integrals.iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
        return Err(Error::invalid("gradient integrals must be nonnegative"));
    }
    let pf = ev.as_f64();
    let lambda_u: f64 = pf
        .iter()
        .zip(grad_integrals)
        .map(|(pi, gi)| pi * gi)
        .sum::<f64>()
        / mass_integral;
    if !(lambda_u.is_finite() && lambda_u > 0.0) {
        return Err(Error::invalid(
            "Euler-Lagrange multiplier is degenerate (zero-gradient field)",
        ));
    }
    let scales = pf.iter().map(|pi| (lambda_u / pi).powf(1.0 / pi)).collect();
    Ok((lambda_u, DiagonalMap::new(1.0, scales)?))
}

/// Pointwise evaluator over coordinates, the shape shared by closed forms
/// and mapped closed forms.
pub trait Evaluator: Sync {
    fn eval(&self, x: &[f64]) -> f64;
}

impl<F> Evaluator for F
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    fn eval(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

/// An evaluator composed with a diagonal map:
/// x ↦ amplitude·inner(μ₁x₁,…,μₙxₙ).
pub struct MappedEvaluator<E> {
    map: DiagonalMap,
    inner: E,
}

impl<E: Evaluator> Evaluator for MappedEvaluator<E> {
    fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.map.n());
        if x.len() > 8 {
            return self.eval_alloc(x);
        }
        let mut y = [0.0; 8];
        let scaled = &mut y[..x.len()];
        for (yi, (xi, mi)) in scaled.iter_mut().zip(x.iter().zip(&self.map.scales)) {
            *yi = xi * mi;
        }
        self.map.amplitude * self.inner.eval(scaled)
    }
}

impl<E: Evaluator> MappedEvaluator<E> {
    fn eval_alloc(&self, x: &[f64]) -> f64 {
        let scaled: Vec<f64> = x
            .iter()
            .zip(&self.map.scales)
            .map(|(xi, mi)| xi * mi)
            .collect();
        self.map.amplitude * self.inner.eval(&scaled)
    }
}

/// x ↦ amplitude·evaluator(μ₁x₁,…,μₙxₙ).
pub fn apply_map<E: Evaluator>(map: &DiagonalMap, evaluator: E) -> MappedEvaluator<E> {
    MappedEvaluator {
        map: map.clone(),
        inner: evaluator,
    }
}
