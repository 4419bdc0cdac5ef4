//! Discrete extremal functions by normalized projected gradient descent on
//! the constrained energy Σᵢ(1/pᵢ)∫|∂ᵢu|^{pᵢ} with ∫|u|^{p*} = 1.
//!
//! The nonsmooth |t|^{pᵢ} is replaced by (t²+ε²)^{pᵢ/2} with a decreasing
//! ε schedule; within each stage the energy is monotone across accepted
//! steps. The iterate is renormalized to unit p*-mass after every step.
//! Backtracking halves the step up to 30 times; the step is never regrown,
//! which keeps late iterations from racing down the scaling valley of the
//! critical-exponent problem (the discrete global minimizer is a few-node
//! spike, not the resolved profile).

use num::traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_forms::isotropic_extremal;
use crate::error::{Error, Result};
use crate::exponents::{derive, ExponentVector, Regime};
use crate::grid::{constrained_energy, grad_integrals, integrate_pow, sample, ScalarField, TensorGrid};
use crate::transforms::{euler_lagrange_rescale, DiagonalMap};

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub ev: ExponentVector,
    pub grid: TensorGrid,
    /// Λ of the growth bound; only used to report the residual scale.
    pub lambda_growth: f64,
    /// Strictly decreasing positive regularization parameters.
    pub eps_schedule: Vec<f64>,
    pub step0: f64,
    /// Relative energy-decrease stopping tolerance per stage.
    pub tol: f64,
    /// Total accepted-step budget across all stages.
    pub max_iters: usize,
    pub seed: u64,
    /// Amplitude of the seeded perturbation added to the initializer.
    pub init_noise: f64,
    /// Starting field; the sampled isotropic bump when absent.
    pub init_field: Option<ScalarField>,
}

impl SolverConfig {
    pub fn new(ev: ExponentVector, grid: TensorGrid) -> Result<Self> {
        if ev.n() != grid.n() {
            return Err(Error::invalid("exponent vector and grid dimension differ"));
        }
        Ok(SolverConfig {
            ev,
            grid,
            lambda_growth: 1.0,
            eps_schedule: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            step0: 1.0,
            tol: 1e-9,
            max_iters: 500,
            seed: 0,
            init_noise: 0.0,
            init_field: None,
        })
    }

    fn validate(&self) -> Result<()> {
        let core = derive(&self.ev);
        if core.regime == Regime::Supercritical {
            return Err(Error::invalid(
                "minimization requires p_max < p_critical (supercritical regime rejected)",
            ));
        }
        if self.eps_schedule.is_empty()
            || self.eps_schedule.iter().any(|e| !(e.is_finite() && *e > 0.0))
            || self.eps_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return Err(Error::invalid(
                "eps schedule must be strictly decreasing and positive",
            ));
        }
        if !self.tol.is_finite() || self.tol <= 0.0 {
            return Err(Error::invalid("tol must be positive"));
        }
        if !(self.step0 > 0.0 && self.step0.is_finite()) {
            return Err(Error::invalid("step0 must be positive"));
        }
        if !self.lambda_growth.is_finite() || self.lambda_growth <= 0.0 {
            return Err(Error::invalid("lambda_growth must be positive"));
        }
        if let Some(f) = &self.init_field {
            if f.grid() != &self.grid {
                return Err(Error::invalid("init field grid does not match config grid"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
    /// residual / Λ, the growth-bound scale of the report.
    pub residual_scale: f64,
    pub backtrack_halvings: usize,
}

/// Result of a minimization: the unit-mass field plus diagnostics.
#[derive(Debug, Clone)]
pub struct SolverReport {
    pub field: ScalarField,
    /// Unregularized constrained energy Σᵢ(1/pᵢ)Gᵢ of the final field.
    pub energy: f64,
    pub mass: f64,
    /// λ(u) = Σᵢ pᵢGᵢ / mass of the final field.
    pub lambda_u: f64,
    pub rescale: DiagonalMap,
    pub stats: SolverStats,
}

/// Regularized energy Σᵢ(1/pᵢ)Σ_cells(Dᵢu² + ε²)^{pᵢ/2}·vol with the same
/// forward-difference cells as `grid::partial_diff`.
pub fn regularized_energy(field: &ScalarField, ev: &ExponentVector, eps: f64) -> f64 {
    let grid = field.grid();
    let values = field.values();
    let pf = ev.as_f64();
    let vol = grid.cell_volume();
    let n = grid.n();
    let strides: Vec<usize> = (0..n).map(|a| grid.stride(a)).collect();
    let counts = grid.counts();
    let hs: Vec<f64> = grid.spacings();
    let e2 = eps * eps;
    let sum = pairwise(0, values.len(), &|k| {
        let mut acc = 0.0;
        for i in 0..n {
            let pos = (k / strides[i]) % counts[i];
            let upper = if pos + 1 == counts[i] {
                0.0
            } else {
                values[k + strides[i]]
            };
            let d = (upper - values[k]) / hs[i];
            acc += (d * d + e2).powf(pf[i] / 2.0) / pf[i];
        }
        acc
    });
    sum * vol
}

/// Closed-form gradient of the regularized energy with respect to the node
/// values: vol·Σᵢ (Fᵢ[k−eᵢ] − Fᵢ[k])/hᵢ with Fᵢ = Dᵢu·(Dᵢu² + ε²)^{(pᵢ−2)/2}.
pub fn regularized_gradient(field: &ScalarField, ev: &ExponentVector, eps: f64) -> Vec<f64> {
    let grid = field.grid();
    let values = field.values();
    let pf = ev.as_f64();
    let vol = grid.cell_volume();
    let n = grid.n();
    let strides: Vec<usize> = (0..n).map(|a| grid.stride(a)).collect();
    let counts = grid.counts();
    let hs: Vec<f64> = grid.spacings();
    let e2 = eps * eps;
    let flux = |i: usize, k: usize, pos: usize| -> f64 {
        let upper = if pos + 1 == counts[i] {
            0.0
        } else {
            values[k + strides[i]]
        };
        let d = (upper - values[k]) / hs[i];
        d * (d * d + e2).powf((pf[i] - 2.0) / 2.0)
    };
    (0..values.len())
        .into_par_iter()
        .map(|k| {
            let mut g = 0.0;
            for i in 0..n {
                let pos = (k / strides[i]) % counts[i];
                let f_here = flux(i, k, pos);
                let f_below = if pos == 0 {
                    0.0
                } else {
                    flux(i, k - strides[i], pos - 1)
                };
                g += (f_below - f_here) / hs[i];
            }
            g * vol
        })
        .collect()
}

fn pairwise<F: Fn(usize) -> f64 + Sync>(lo: usize, hi: usize, f: &F) -> f64 {
    const SEQ: usize = 4096;
    if hi - lo <= SEQ {
        let mut acc = 0.0;
        for k in lo..hi {
            acc += f(k);
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let (a, b) = rayon::join(|| pairwise(lo, mid, f), || pairwise(mid, hi, f));
    a + b
}

fn normalize(field: &mut ScalarField, p_critical: f64) -> Result<f64> {
    let mass = integrate_pow(field, p_critical);
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::numerics(
            "mass degenerated during normalization (zero or non-finite)",
        ));
    }
    let scale = mass.powf(-1.0 / p_critical);
    for v in field.values_mut() {
        *v *= scale;
    }
    Ok(integrate_pow(field, p_critical))
}

fn default_initializer(config: &SolverConfig) -> Result<ScalarField> {
    let p = config.ev.p_harmonic().to_f64().unwrap();
    let bump = isotropic_extremal(config.ev.n(), p, 1.0, 1.0)?;
    let mut field = sample(&config.grid, &bump)?;
    if config.init_noise > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed);
        for v in field.values_mut() {
            *v += config.init_noise * rng.gen_range(-1.0..1.0);
        }
    }
    Ok(field)
}

/// Norm of the component of the gradient tangent to the mass constraint.
fn projected_residual(field: &ScalarField, ev: &ExponentVector, eps: f64, p_critical: f64) -> f64 {
    let g = regularized_gradient(field, ev, eps);
    let vol = field.grid().cell_volume();
    let w: Vec<f64> = field
        .values()
        .iter()
        .map(|&u| p_critical * u.abs().powf(p_critical - 2.0) * u * vol)
        .collect();
    let gw: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
    let ww: f64 = w.iter().map(|b| b * b).sum();
    let mu = if ww > 0.0 { gw / ww } else { 0.0 };
    g.iter()
        .zip(&w)
        .map(|(a, b)| {
            let t = a - mu * b;
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Minimize the regularized constrained energy. Energy decreases weakly
/// across accepted steps within each ε stage; divergence (no decrease after
/// 30 halvings) and NaNs abort with diagnostics.
pub fn minimize(config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let core = derive(&config.ev);
    let p_critical = core.p_critical.to_f64().unwrap();

    let mut u = match &config.init_field {
        Some(f) => f.clone(),
        None => default_initializer(config)?,
    };
    normalize(&mut u, p_critical)?;

    let stages = config.eps_schedule.len();
    let mut iterations = 0usize;
    let mut halvings = 0usize;
    let mut step = config.step0;
    let mut converged = false;
    let mut last_eps = config.eps_schedule[0];

    for (stage, &eps) in config.eps_schedule.iter().enumerate() {
        last_eps = eps;
        let remaining = config.max_iters.saturating_sub(iterations);
        let budget = if stage + 1 == stages {
            remaining
        } else {
            remaining / (stages - stage)
        };
        let mut energy = regularized_energy(&u, &config.ev, eps);
        if !energy.is_finite() {
            return Err(Error::numerics("energy is non-finite at stage start"));
        }
        converged = false;
        for _ in 0..budget {
            let g = regularized_gradient(&u, &config.ev, eps);
            let mut accepted = None;
            let mut trial = step;
            for _ in 0..=30 {
                let mut v = u.clone();
                for (vi, gi) in v.values_mut().iter_mut().zip(&g) {
                    *vi -= trial * gi;
                }
                normalize(&mut v, p_critical)?;
                let e_new = regularized_energy(&v, &config.ev, eps);
                if e_new.is_nan() {
                    return Err(Error::numerics("energy became NaN during line search"));
                }
                if e_new <= energy {
                    accepted = Some((v, e_new));
                    break;
                }
                trial *= 0.5;
                halvings += 1;
            }
            let Some((v, e_new)) = accepted else {
                return Err(Error::numerics(format!(
                    "energy increase after exhausting backtracking at iteration {iterations} \
                     (stage eps = {eps:.3e}, energy = {energy:.12e}, step floor = {trial:.3e})"
                )));
            };
            step = trial;
            let rel = (energy - e_new) / energy.abs().max(f64::MIN_POSITIVE);
            u = v;
            energy = e_new;
            iterations += 1;
            if rel < config.tol {
                converged = true;
                break;
            }
        }
    }

    let mass = integrate_pow(&u, p_critical);
    if (mass - 1.0).abs() > 1e-10 {
        return Err(Error::numerics(format!(
            "unit-mass invariant violated at exit: |mass - 1| = {:e}",
            (mass - 1.0).abs()
        )));
    }
    let residual = projected_residual(&u, &config.ev, last_eps, p_critical);
    let (energy, _) = constrained_energy(&u, &config.ev)?;
    let grads = grad_integrals(&u, &config.ev)?;
    let (lambda_u, rescale) = euler_lagrange_rescale(&config.ev, &grads, mass)?;
    Ok(SolverReport {
        field: u,
        energy,
        mass,
        lambda_u,
        rescale,
        stats: SolverStats {
            iterations,
            converged,
            residual,
            residual_scale: residual / config.lambda_growth,
            backtrack_halvings: halvings,
        },
    })
}

/// The Euler–Lagrange data of a report's field: λ(u) and the diagonal map
/// whose pullback turns the minimizer into a candidate solution of the
/// pure-power equation.
pub fn report_euler_lagrange(
    report: &SolverReport,
    ev: &ExponentVector,
) -> Result<(f64, DiagonalMap)> {
    let grads = grad_integrals(&report.field, ev)?;
    euler_lagrange_rescale(ev, &grads, report.mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::ratio;

    fn ev(parts: &[&str]) -> ExponentVector {
        ExponentVector::from_strs(parts).unwrap()
    }

    fn small_config() -> SolverConfig {
        let v = ev(&["2", "2", "2"]);
        let grid = TensorGrid::new(vec![6.0; 3], vec![17; 3]).unwrap();
        let mut c = SolverConfig::new(v, grid).unwrap();
        c.max_iters = 60;
        c
    }

    #[test]
    fn rejects_supercritical_and_bad_schedules() {
        let v = ev(&["6/5", "6/5", "6"]);
        let grid = TensorGrid::new(vec![2.0; 3], vec![5; 3]).unwrap();
        let c = SolverConfig::new(v, grid.clone()).unwrap();
        assert!(minimize(&c).is_err());

        let mut c = SolverConfig::new(ev(&["2", "2", "2"]), grid).unwrap();
        c.eps_schedule = vec![1e-3, 1e-2];
        assert!(minimize(&c).is_err());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let v = ev(&["3/2", "2", "5"]);
        let grid = TensorGrid::new(vec![2.0; 3], vec![5; 3]).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for &eps in &[1e-2, 1e-4] {
            // values on a ramp plus noise keep the differences away from the
            // kink region so the central difference is well conditioned
            let mut vals = vec![0.0; grid.len()];
            let mut mi = [0usize; 3];
            for (k, val) in vals.iter_mut().enumerate() {
                grid.multi_index(k, &mut mi);
                *val = 1.0
                    + 0.35 * (mi[0] as f64 + 2.0 * mi[1] as f64 + 3.0 * mi[2] as f64)
                    + 0.25 * rng.gen_range(-1.0..1.0);
            }
            let f = ScalarField::new(grid.clone(), vals).unwrap();
            let g = regularized_gradient(&f, &v, eps);
            let delta = 1e-5;
            let mut g_fd = vec![0.0; g.len()];
            for (k, slot) in g_fd.iter_mut().enumerate() {
                let mut fp = f.clone();
                fp.values_mut()[k] += delta;
                let mut fm = f.clone();
                fm.values_mut()[k] -= delta;
                *slot = (regularized_energy(&fp, &v, eps)
                    - regularized_energy(&fm, &v, eps))
                    / (2.0 * delta);
            }
            let num: f64 = g
                .iter()
                .zip(&g_fd)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let den: f64 = g.iter().map(|a| a * a).sum::<f64>().sqrt();
            assert!(num / den <= 1e-5, "rel grad error {} at eps {}", num / den, eps);
        }
    }

    #[test]
    fn minimize_keeps_unit_mass_and_decreases_energy() {
        let c = small_config();
        let init = default_initializer(&c).unwrap();
        let mut init_n = init;
        normalize(&mut init_n, 6.0).unwrap();
        let e0 = regularized_energy(&init_n, &c.ev, c.eps_schedule[0]);
        let report = minimize(&c).unwrap();
        assert!((report.mass - 1.0).abs() <= 1e-10);
        assert!(report.stats.iterations > 0);
        let e_end = regularized_energy(&report.field, &c.ev, c.eps_schedule[0]);
        assert!(e_end <= e0);
        assert!(report.lambda_u > 0.0);
        assert_eq!(report.rescale.scales.len(), 3);
    }

    #[test]
    fn euler_lagrange_report_consistent() {
        let c = small_config();
        let report = minimize(&c).unwrap();
        let (lambda, map) = report_euler_lagrange(&report, &c.ev).unwrap();
        assert!((lambda - report.lambda_u).abs() / lambda < 1e-12);
        // isotropic: all scales equal
        for w in map.scales.windows(2) {
            assert!((w[0] - w[1]).abs() < 1e-12);
        }
        let grads = grad_integrals(&report.field, &c.ev).unwrap();
        let direct: f64 = grads.iter().map(|g| 2.0 * g).sum::<f64>() / report.mass;
        assert!((lambda - direct).abs() / lambda < 1e-12);
    }

    #[test]
    fn axis_permutation_equivariance() {
        // permuting axes of the config permutes the solution field
        let v = ev(&["3/2", "2", "3"]);
        let grid = TensorGrid::new(vec![3.0, 4.0, 5.0], vec![9, 11, 13]).unwrap();
        let mut c = SolverConfig::new(v, grid.clone()).unwrap();
        c.max_iters = 25;
        let a = minimize(&c).unwrap();

        let perm = [2usize, 0, 1]; // axis k of B is axis perm[k] of A
        let pv = ExponentVector::new(
            perm.iter()
                .map(|&k| [ratio(3, 2), ratio(2, 1), ratio(3, 1)][k].clone())
                .collect(),
        )
        .unwrap();
        let pgrid = TensorGrid::new(
            perm.iter().map(|&k| grid.extents()[k]).collect(),
            perm.iter().map(|&k| grid.counts()[k]).collect(),
        )
        .unwrap();
        let mut pc = SolverConfig::new(pv, pgrid.clone()).unwrap();
        pc.max_iters = 25;
        let b = minimize(&pc).unwrap();

        let mut mi = [0usize; 3];
        let mut worst: f64 = 0.0;
        for k in 0..pgrid.len() {
            pgrid.multi_index(k, &mut mi);
            let mut orig = [0usize; 3];
            for (bk, &ak) in perm.iter().enumerate() {
                orig[ak] = mi[bk];
            }
            let va = a.field.values()[grid.flat_index(&orig)];
            let vb = b.field.values()[k];
            worst = worst.max((va - vb).abs());
        }
        // reductions run in a different flat order after permutation, so
        // equality holds to accumulated-rounding rather than bitwise
        assert!(worst < 1e-10, "worst deviation {worst}");
    }

    #[test]
    fn init_field_override_and_noise_determinism() {
        let mut c = small_config();
        c.max_iters = 5;
        c.init_noise = 0.01;
        c.seed = 9;
        let r1 = minimize(&c).unwrap();
        let r2 = minimize(&c).unwrap();
        assert_eq!(r1.field.values(), r2.field.values());

        let mut c2 = small_config();
        c2.max_iters = 3;
        c2.init_field = Some(r1.field.clone());
        let r3 = minimize(&c2).unwrap();
        assert!((r3.mass - 1.0).abs() <= 1e-10);
    }
}

