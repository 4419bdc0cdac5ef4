//! Executable bookkeeping of the Moser-type iteration: the exponent
//! recursion γ ↦ ((n−p)/n)γ + pᵢ − p, the stopping sets Φ_k, the
//! iteration-count bounds k±, the λ-ladder of nested domains, and the
//! per-path exponent budgets σ and τ.
//!
//! Everything here is exact: γ, ε, and all thresholds are rationals, and the
//! enumeration is exhaustive (no sampling) behind a 10⁷-node guard.

use std::collections::{BTreeMap, BTreeSet};

use num::traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{derive, ExponentVector};
use crate::rational::{format_rational, ratio};
use crate::Rational;

/// One application of the recursion: ((n−p)/n)·γ + pᵢ − p (1-based index).
pub fn gamma_next(ev: &ExponentVector, gamma: &Rational, i: usize) -> Rational {
    let n = Rational::from_integer(ev.n().into());
    let p = ev.p_harmonic();
    (&n - &p) / &n * gamma + ev.p_i(i) - &p
}

/// The closed form of k applications along a path:
/// ((n−p)/n)^k γ + Σⱼ ((n−p)/n)^{k−j}(p_{iⱼ} − p). The empty path returns γ.
pub fn gamma_closed(ev: &ExponentVector, gamma: &Rational, path: &[usize]) -> Rational {
    let n = Rational::from_integer(ev.n().into());
    let p = ev.p_harmonic();
    let shrink = (&n - &p) / &n;
    let k = path.len();
    let mut shrink_pows = Vec::with_capacity(k + 1);
    let mut pw = ratio(1, 1);
    for _ in 0..=k {
        shrink_pows.push(pw.clone());
        pw = &pw * &shrink;
    }
    let mut acc = &shrink_pows[k] * gamma;
    for (j, &i) in path.iter().enumerate() {
        acc += &shrink_pows[k - (j + 1)] * (ev.p_i(i) - &p);
    }
    acc
}

/// Stopping parameters for an index universe I₁ ∪ I₂.
#[derive(Debug, Clone)]
pub struct StoppingData {
    pub p0: Rational,
    pub p_eps: Rational,
    /// (n/p)(p_ε − p); the recursion stops on the first γ below this.
    pub threshold: Rational,
}

/// p₀ = max(p_*, {pᵢ : i ∈ I₁∪I₂}), p_ε = (1+ε)p₀, threshold = (n/p)(p_ε−p).
pub fn stopping_data(
    ev: &ExponentVector,
    i1: &BTreeSet<usize>,
    i2: &BTreeSet<usize>,
    eps: &Rational,
) -> Result<StoppingData> {
    if i2.is_empty() {
        return Err(Error::invalid("I2 must be nonempty"));
    }
    if !i1.is_disjoint(i2) {
        return Err(Error::invalid("I1 and I2 must be disjoint"));
    }
    for &i in i1.iter().chain(i2) {
        if i < 1 || i > ev.n() {
            return Err(Error::invalid(format!("index {i} out of range")));
        }
    }
    if !(eps > &Rational::from_integer(0.into()) && eps < &ratio(1, 1)) {
        return Err(Error::invalid("eps must lie in (0, 1)"));
    }
    let core = derive(ev);
    let universe_max = i1.iter().chain(i2).map(|&i| ev.p_i(i)).max().unwrap();
    let p0 = if *universe_max > core.p_serrin {
        universe_max.clone()
    } else {
        core.p_serrin.clone()
    };
    let p_eps = (ratio(1, 1) + eps) * &p0;
    let n = Rational::from_integer(ev.n().into());
    let threshold = &n / &core.p_harmonic * (&p_eps - &core.p_harmonic);
    Ok(StoppingData {
        p0,
        p_eps,
        threshold,
    })
}

/// The smallest and largest iteration counts k⁻ ≤ k ≤ k⁺ outside of which
/// Φ_k is empty: k⁻ is the smallest k ≥ 1 with
/// γ < (n/p)(n/(n−p))^k (p_ε − p₋) and k⁺ the largest k ≥ 1 with
/// (n/p)(n/(n−p))^{k−1} ε p₀ < γ. Requires γ at or above the threshold.
pub fn k_bounds(
    ev: &ExponentVector,
    gamma: &Rational,
    eps: &Rational,
    p0: &Rational,
) -> Result<(usize, usize)> {
    let core = derive(ev);
    let n = Rational::from_integer(ev.n().into());
    let p = &core.p_harmonic;
    let n_over_p = &n / p;
    let grow = &n / (&n - p);
    let p_eps = (ratio(1, 1) + eps) * p0;
    let threshold = &n_over_p * (&p_eps - p);
    if gamma < &threshold {
        return Err(Error::invalid(format!(
            "gamma = {} is below the stopping threshold {}",
            format_rational(gamma),
            format_rational(&threshold)
        )));
    }
    let mut kminus = 1usize;
    let mut bound = &n_over_p * &grow * (&p_eps - &core.p_min);
    while *gamma >= bound {
        bound = &bound * &grow;
        kminus += 1;
        if kminus > 10_000 {
            return Err(Error::numerics("k_minus search failed to terminate"));
        }
    }
    let mut kplus = 1usize;
    let mut lhs = &n_over_p * eps * p0;
    // largest k with lhs(k) < gamma; lhs grows geometrically
    loop {
        let next = &lhs * &grow;
        if next < *gamma {
            lhs = next;
            kplus += 1;
            if kplus > 10_000 {
                return Err(Error::numerics("k_plus search failed to terminate"));
            }
        } else {
            break;
        }
    }
    Ok((kminus, kplus))
}

/// λ_k = (1/4)(1 + 2^{k−k⁺−1}) for k = 0..k⁺; strictly increasing, ends at
/// 3/8, all values in (1/4, 3/8].
pub fn lambda_ladder(kplus: usize) -> Vec<Rational> {
    (0..=kplus)
        .map(|k| {
            let e = (kplus + 1 - k) as u32;
            ratio(1, 4) * (ratio(1, 1) + Rational::new(1.into(), num::BigInt::from(2u8).pow(e)))
        })
        .collect()
}

/// σ = (1/(γq))·Σⱼ (n/(n−p))^j (q − p_{iⱼ}) over a stopped path.
pub fn sigma_exponent(
    ev: &ExponentVector,
    q: &Rational,
    gamma: &Rational,
    path: &[usize],
) -> Rational {
    let n = Rational::from_integer(ev.n().into());
    let p = ev.p_harmonic();
    let grow = &n / (&n - &p);
    let mut power = ratio(1, 1);
    let mut sum = Rational::from_integer(0.into());
    for &i in path {
        power = &power * &grow;
        sum += &power * (q - ev.p_i(i));
    }
    sum / (gamma * q)
}

/// Both sides of the net-exponent identity at q = p_*: the left side is
/// τ − σ computed from the definitions (τ = (p_*−1−γ_path)/(p_*γ)·(n/(n−p))^k),
/// the right side is the closed form −(1/p_*)(1 − (p_*−1)/γ). They agree
/// exactly for every path.
pub fn net_exponent_identity(
    ev: &ExponentVector,
    gamma: &Rational,
    path: &[usize],
) -> (Rational, Rational) {
    let core = derive(ev);
    let n = Rational::from_integer(ev.n().into());
    let p = &core.p_harmonic;
    let serrin = &core.p_serrin;
    let grow = &n / (&n - p);
    let mut growth_k = ratio(1, 1);
    for _ in 0..path.len() {
        growth_k = &growth_k * &grow;
    }
    let gamma_path = gamma_closed(ev, gamma, path);
    let tau = (serrin - ratio(1, 1) - &gamma_path) / (serrin * gamma) * &growth_k;
    let sigma = sigma_exponent(ev, serrin, gamma, path);
    let lhs = tau - sigma;
    let rhs = -(ratio(1, 1) - (serrin - ratio(1, 1)) / gamma) / serrin;
    (lhs, rhs)
}

/// Full record of one exhaustive enumeration of the iteration scheme.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub gamma0: Rational,
    pub eps: Rational,
    pub p0: Rational,
    pub threshold: Rational,
    pub index_universe: BTreeSet<usize>,
    /// Stopped paths grouped by length, each with its final γ value.
    pub phi: BTreeMap<usize, Vec<(Vec<usize>, Rational)>>,
    pub kminus: usize,
    pub kplus: usize,
    pub ladder: Vec<Rational>,
    /// Paths whose γ landed exactly on the threshold at some prefix; the
    /// strict-inequality convention keeps iterating there, and these hits
    /// are surfaced rather than silently classified.
    pub boundary_hits: Vec<Vec<usize>>,
}

/// Exhaustive depth-first enumeration of all index paths, pruned at the
/// stopping condition. `kmax` defaults to k⁺, which bounds every stopped
/// path; the node guard rejects |I₁∪I₂|^{k⁺} > 10⁷.
pub fn enumerate_phi(
    ev: &ExponentVector,
    i1: &BTreeSet<usize>,
    i2: &BTreeSet<usize>,
    gamma: &Rational,
    eps: &Rational,
    kmax: Option<usize>,
) -> Result<IterationTrace> {
    let stopping = stopping_data(ev, i1, i2, eps)?;
    let (kminus, kplus) = k_bounds(ev, gamma, eps, &stopping.p0)?;
    let kmax = kmax.unwrap_or(kplus);
    if kmax < kplus {
        return Err(Error::invalid(format!(
            "kmax = {kmax} is below k_plus = {kplus}; enumeration would truncate"
        )));
    }
    let universe: Vec<usize> = i1.union(i2).copied().collect();
    let mut nodes: u128 = 1;
    for _ in 0..kplus {
        nodes = nodes.saturating_mul(universe.len() as u128);
        if nodes > 10_000_000 {
            return Err(Error::invalid(format!(
                "enumeration size |universe|^k_plus = {}^{} exceeds the 1e7 node guard",
                universe.len(),
                kplus
            )));
        }
    }

    let mut phi: BTreeMap<usize, Vec<(Vec<usize>, Rational)>> = BTreeMap::new();
    let mut boundary_hits = Vec::new();
    let mut path: Vec<usize> = Vec::new();
    dfs(
        ev,
        &universe,
        &stopping.threshold,
        gamma,
        kmax,
        &mut path,
        &mut phi,
        &mut boundary_hits,
    )?;

    for (&k, paths) in &phi {
        if (k < kminus || k > kplus) && !paths.is_empty() {
            return Err(Error::numerics(format!(
                "iteration-count sandwich violated: {} paths stopped at k = {k}, \
                 expected range [{kminus}, {kplus}]",
                paths.len()
            )));
        }
    }

    Ok(IterationTrace {
        gamma0: gamma.clone(),
        eps: eps.clone(),
        p0: stopping.p0,
        threshold: stopping.threshold,
        index_universe: universe.into_iter().collect(),
        phi,
        kminus,
        kplus,
        ladder: lambda_ladder(kplus),
        boundary_hits,
    })
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    ev: &ExponentVector,
    universe: &[usize],
    threshold: &Rational,
    gamma: &Rational,
    kmax: usize,
    path: &mut Vec<usize>,
    phi: &mut BTreeMap<usize, Vec<(Vec<usize>, Rational)>>,
    boundary_hits: &mut Vec<Vec<usize>>,
) -> Result<()> {
    if path.len() == kmax {
        return Err(Error::numerics(
            "a path reached kmax without stopping; the k_plus bound is violated",
        ));
    }
    for &i in universe {
        path.push(i);
        let next = gamma_next(ev, gamma, i);
        if next < *threshold {
            phi.entry(path.len())
                .or_default()
                .push((path.clone(), next));
        } else {
            if next == *threshold {
                boundary_hits.push(path.clone());
            }
            dfs(ev, universe, threshold, &next, kmax, path, phi, boundary_hits)?;
        }
        path.pop();
    }
    Ok(())
}

#[derive(Serialize)]
struct PathJson {
    path: Vec<usize>,
    gamma_exact: String,
    gamma: f64,
}

impl IterationTrace {
    pub fn path_count(&self) -> usize {
        self.phi.values().map(Vec::len).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let phi: BTreeMap<String, Vec<PathJson>> = self
            .phi
            .iter()
            .map(|(k, paths)| {
                (
                    k.to_string(),
                    paths
                        .iter()
                        .map(|(p, g)| PathJson {
                            path: p.clone(),
                            gamma_exact: format_rational(g),
                            gamma: g.to_f64().unwrap(),
                        })
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({
            "gamma0": format_rational(&self.gamma0),
            "eps": format_rational(&self.eps),
            "p0": format_rational(&self.p0),
            "threshold": {
                "exact": format_rational(&self.threshold),
                "decimal": self.threshold.to_f64().unwrap(),
            },
            "index_universe": self.index_universe.iter().copied().collect::<Vec<_>>(),
            "kminus": self.kminus,
            "kplus": self.kplus,
            "path_count": self.path_count(),
            "phi": serde_json::to_value(phi).unwrap(),
            "ladder": self.ladder.iter().map(|l| serde_json::json!({
                "exact": format_rational(l),
                "decimal": l.to_f64().unwrap(),
            })).collect::<Vec<_>>(),
            "boundary_hits": self.boundary_hits,
        })
    }
}
