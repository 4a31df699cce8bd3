//! Thresholds, derived constants, the regions 𝕍, 𝕎, 𝕌_η and the projections
//! onto 𝕎 and 𝕌_η.

mod projection;

pub use projection::{project_paraboloid, project_u_eta, project_w, Projection};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem};

/// `κ√δ·max_i βᵀA(X_i)⁻¹β`: below it `f_δ = +∞`.
pub fn lambda_thr(problem: &DroProblem, beta: &DVector<f64>) -> f64 {
    problem.loss().kappa() * problem.sqrt_delta() * problem.max_quadratic_form(beta)
}

/// `(M/2)√δ·max_i βᵀA(X_i)⁻¹β`: above it the inner problem is concave.
/// Piecewise-affine losses use `M = 0`.
pub fn lambda_thr_prime(problem: &DroProblem, beta: &DVector<f64>) -> f64 {
    0.5 * problem.loss().piece_curvature() * problem.sqrt_delta() * problem.max_quadratic_form(beta)
}

/// Extremes of `β ↦ E_n[ℓ'(βᵀX)²]` over the decision ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LBounds {
    pub lower: f64,
    pub upper: f64,
    /// True when found by search rather than supplied.
    pub estimated: bool,
}

impl LBounds {
    pub fn supplied(lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && upper >= lower && upper.is_finite()) {
            return Err(DroError::InvalidConfig(format!(
                "need 0 < L_lower <= L_upper, got {lower}, {upper}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            estimated: false,
        })
    }
}

/// `E_n[ℓ'(βᵀX)²]` and its gradient in β.
fn mean_sq_slope(problem: &DroProblem, beta: &DVector<f64>) -> (f64, DVector<f64>) {
    let loss = problem.loss();
    let mut value = 0.0;
    let mut grad = DVector::zeros(problem.d());
    for (i, x) in problem.data().points().iter().enumerate() {
        let y = problem.data().label(i);
        let u = beta.dot(x);
        let d = loss.dplus(u, y);
        let d2 = loss.d2(u, y).unwrap_or(0.0);
        value += d * d;
        grad += x * (2.0 * d * d2);
    }
    let n = problem.n() as f64;
    (value / n, grad / n)
}

fn clip_ball(beta: DVector<f64>, radius: f64) -> DVector<f64> {
    let norm = beta.norm();
    if norm > radius {
        beta * (radius / norm)
    } else {
        beta
    }
}

/// Projected gradient steps with backtracking; `sign = 1` ascends, `-1` descends.
fn polish(problem: &DroProblem, start: DVector<f64>, sign: f64, steps: usize) -> f64 {
    let r = problem.r_beta();
    let (mut value, mut grad) = mean_sq_slope(problem, &start);
    let mut beta = start;
    let mut step = r;
    for _ in 0..steps {
        if grad.norm() == 0.0 || step < 1e-14 * r {
            break;
        }
        let trial = clip_ball(&beta + &grad * (sign * step / grad.norm()), r);
        let (tv, tg) = mean_sq_slope(problem, &trial);
        if sign * (tv - value) > 0.0 {
            beta = trial;
            value = tv;
            grad = tg;
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    value
}

/// Searches the ball `‖β‖ ≤ R_β` for the extremes of `E_n[ℓ'(βᵀX)²]`:
/// `sphere_samples` random directions at radius `R_β` plus `β = 0`, then
/// `refine_steps` projected-gradient steps from the best candidates.
pub fn estimate_l_bounds(problem: &DroProblem, sphere_samples: usize, refine_steps: usize, seed: u64) -> Result<LBounds> {
    if !problem.loss().is_smooth() {
        return Err(DroError::NonsmoothLoss(problem.loss().kind().to_string()));
    }
    let d = problem.d();
    let r = problem.r_beta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidates = vec![DVector::zeros(d)];
    for _ in 0..sphere_samples {
        let dir = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(&mut rng)));
        let norm: f64 = dir.norm();
        if norm > 0.0 {
            candidates.push(dir * (r / norm));
        }
    }
    let scored: Vec<(f64, &DVector<f64>)> = candidates.iter().map(|b| (mean_sq_slope(problem, b).0, b)).collect();
    let argmin = scored.iter().min_by(|a, b| a.0.total_cmp(&b.0)).expect("candidates");
    let argmax = scored.iter().max_by(|a, b| a.0.total_cmp(&b.0)).expect("candidates");
    let lower = polish(problem, argmin.1.clone(), -1.0, refine_steps).min(argmin.0);
    let upper = polish(problem, argmax.1.clone(), 1.0, refine_steps).max(argmax.0);
    if !(lower > 1e-12) {
        return Err(DroError::Degenerate(format!(
            "E[l'(beta^T X)^2] vanishes on the decision ball (estimate {lower:e})"
        )));
    }
    Ok(LBounds {
        lower,
        upper,
        estimated: true,
    })
}

/// Derived constants of the smooth regime.
#[derive(Debug, Clone, Serialize)]
pub struct ConstantsBundle {
    #[serde(rename = "L_lower")]
    pub l_lower: f64,
    #[serde(rename = "L_upper")]
    pub l_upper: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    #[serde(rename = "K2")]
    pub k2: f64,
    /// Alternative `K2 = √δ·M·R_β/ρ_min + ρ_min^{-1/2}·L_upper`.
    #[serde(rename = "K2_table")]
    pub k2_table: f64,
    pub delta0: f64,
    /// Needs the nondegeneracy constants.
    pub delta1: Option<f64>,
    pub phi_min: f64,
    pub kappa0: f64,
    pub estimated: bool,
    /// `δ < δ0`: smoothness and β-strong convexity are guaranteed.
    pub smooth_regime: bool,
    pub delta: f64,
    pub r_beta: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub kappa: f64,
}

pub fn build_constants(problem: &DroProblem, l: LBounds) -> Result<ConstantsBundle> {
    if !(l.lower > 0.0) {
        return Err(DroError::Degenerate("L_lower must be positive".into()));
    }
    let m = problem
        .loss()
        .m()
        .ok_or_else(|| DroError::NonsmoothLoss(problem.loss().kind().to_string()))?;
    let (rho_min, rho_max) = (problem.cost().rho_min(), problem.cost().rho_max());
    let (delta, sd, r) = (problem.delta(), problem.sqrt_delta(), problem.r_beta());

    let k1 = 0.5 * (l.lower / rho_max).sqrt();
    let k2 = 0.5 * sd * m * r / rho_min + (l.upper / rho_min).sqrt();
    let k2_table = sd * m * r / rho_min + l.upper / rho_min.sqrt();
    let delta0 = if m > 0.0 {
        rho_min * rho_min * l.lower / (r * r * m * m * rho_max)
    } else {
        f64::INFINITY
    };
    let delta1 = problem.nondegeneracy().map(|nd| {
        let core = (nd.c1 * nd.c2 * nd.p * rho_min).powi(2) / rho_max * l.lower / (l.upper * l.upper) / 256.0;
        core.min(delta0 / 4.0)
    });
    let phi_min = l.lower.sqrt() / rho_max.sqrt() - sd * r * m / rho_min;
    Ok(ConstantsBundle {
        l_lower: l.lower,
        l_upper: l.upper,
        k1,
        k2,
        k2_table,
        delta0,
        delta1,
        phi_min,
        kappa0: 0.5 * l.lower / rho_max,
        estimated: l.estimated,
        smooth_regime: delta < delta0,
        delta,
        r_beta: r,
        rho_min,
        rho_max,
        m,
        kappa: problem.loss().kappa(),
    })
}

impl ConstantsBundle {
    /// `𝕎 = {K1‖β‖ ≤ λ ≤ K2·R_β, ‖β‖ ≤ R_β}` up to `tol`.
    pub fn in_w(&self, theta: &Decision, tol: f64) -> bool {
        let nb = theta.beta.norm();
        nb <= self.r_beta + tol && self.k1 * nb <= theta.lambda + tol && theta.lambda <= self.k2 * self.r_beta + tol
    }

    /// `𝕍 = {K1‖β‖ ≤ λ ≤ K2‖β‖, ‖β‖ ≤ R_β}` up to `tol`.
    pub fn in_v(&self, theta: &Decision, tol: f64) -> bool {
        let nb = theta.beta.norm();
        nb <= self.r_beta + tol && self.k1 * nb <= theta.lambda + tol && theta.lambda <= self.k2 * nb + tol
    }
}

/// Bracket `[λ_min(β), λ_max(β)]` for the optimal multiplier at fixed β.
/// `λ_max` needs the curvature bound `M`.
pub fn lambda_star_bounds(problem: &DroProblem, beta: &DVector<f64>) -> (f64, Option<f64>) {
    let loss = problem.loss();
    let mean_sq = problem
        .data()
        .points()
        .iter()
        .enumerate()
        .map(|(i, x)| loss.dplus(beta.dot(x), problem.data().label(i)).powi(2))
        .sum::<f64>()
        / problem.n() as f64;
    let nb = beta.norm();
    let (rho_min, rho_max) = (problem.cost().rho_min(), problem.cost().rho_max());
    let lo = 0.5 / rho_max.sqrt() * nb * mean_sq.sqrt();
    let hi = loss
        .m()
        .map(|m| nb * mean_sq.sqrt() / rho_min.sqrt() + 0.5 * problem.sqrt_delta() * m * nb * nb / rho_min);
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gaussian_classes, single_atom};
    use crate::model::{CostField, LossSpec, Nondegeneracy, SampleSet};
    use approx::assert_relative_eq;

    #[test]
    fn thresholds() {
        let logistic = gaussian_classes(5, 2, 0, LossSpec::logistic(), 0.5);
        assert_eq!(lambda_thr(&logistic, &DVector::from_vec(vec![3.0, 1.0])), 0.0);
        let p = single_atom();
        let b = DVector::from_vec(vec![1.0]);
        assert_relative_eq!(lambda_thr(&p, &b), 0.5);
        assert_relative_eq!(lambda_thr_prime(&p, &b), 0.5);
        let z = DVector::zeros(1);
        assert_eq!((lambda_thr(&p, &z), lambda_thr_prime(&p, &z)), (0.0, 0.0));
    }

    #[test]
    fn l_bounds_constant_for_single_atom() {
        let l = estimate_l_bounds(&single_atom(), 32, 20, 0).unwrap();
        assert_relative_eq!(l.lower, 4.0);
        assert_relative_eq!(l.upper, 4.0);
        assert!(l.estimated);
        let s = LBounds::supplied(0.5, 1.0).unwrap();
        assert!(!s.estimated);
    }

    #[test]
    fn logistic_l_upper_at_most_one() {
        let p = gaussian_classes(40, 3, 1, LossSpec::logistic(), 0.1);
        let l = estimate_l_bounds(&p, 64, 50, 1).unwrap();
        assert!(l.upper <= 1.0 && l.lower > 0.0 && l.lower <= l.upper);
    }

    #[test]
    fn degenerate_and_nonsmooth_rejected() {
        let data = SampleSet::scalar(&[0.0], Some(vec![0.0])).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::squared(), 0.1, 1.0).unwrap();
        assert!(matches!(estimate_l_bounds(&p, 8, 5, 0), Err(DroError::Degenerate(_))));
        let hinge = gaussian_classes(5, 2, 0, LossSpec::hinge(), 0.1);
        assert!(matches!(estimate_l_bounds(&hinge, 8, 5, 0), Err(DroError::NonsmoothLoss(_))));
    }

    #[test]
    fn constant_formulas() {
        let p = single_atom();
        let c = build_constants(&p, LBounds::supplied(1.0, 1.0).unwrap()).unwrap();
        assert_relative_eq!(c.k1, 0.5);

        let data = SampleSet::scalar(&[1.0], Some(vec![1.0])).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::logistic(), 0.1, 1.0).unwrap();
        let c = build_constants(&p, LBounds::supplied(0.04, 0.2).unwrap()).unwrap();
        assert_relative_eq!(c.delta0, 0.64, epsilon = 1e-14);
        assert!(c.smooth_regime);
        assert_relative_eq!(c.kappa0, 0.02);
        assert_relative_eq!(c.phi_min, 0.2 - 0.1f64.sqrt() * 0.25);
        assert_relative_eq!(c.k2, 0.5 * 0.1f64.sqrt() * 0.25 + 0.2f64.sqrt());
        assert!(c.delta1.is_none());
    }

    #[test]
    fn delta1_shrinks_with_nondegeneracy() {
        let data = SampleSet::scalar(&[1.0], Some(vec![1.0])).unwrap();
        let base = DroProblem::new(data, CostField::identity(1), LossSpec::logistic(), 0.1, 1.0).unwrap();
        let l = LBounds::supplied(0.1, 0.2).unwrap();
        let d1 = |c1: f64| {
            let p = base.clone().with_nondegeneracy(Nondegeneracy { c1, c2: 0.5, p: 0.5 }).unwrap();
            build_constants(&p, l).unwrap().delta1.unwrap()
        };
        assert!(d1(1e-3) < d1(1e-2));
        assert!(d1(1e-8) < 1e-15);
    }

    #[test]
    fn v_inside_w() {
        let p = gaussian_classes(20, 2, 3, LossSpec::logistic(), 0.05);
        let c = build_constants(&p, estimate_l_bounds(&p, 32, 20, 0).unwrap()).unwrap();
        for k in 0..200 {
            let ang = k as f64 * 0.1;
            let r = c.r_beta * (k % 10) as f64 / 10.0;
            let beta = DVector::from_vec(vec![r * ang.cos(), r * ang.sin()]);
            for t in [0.0, 0.3, 1.0] {
                let lam = c.k1 * r + t * (c.k2 - c.k1) * r;
                let th = Decision::new(beta.clone(), lam);
                assert!(c.in_v(&th, 1e-12));
                assert!(c.in_w(&th, 1e-12));
            }
        }
    }

    #[test]
    fn lambda_bounds_single_atom() {
        let p = single_atom();
        let (lo, hi) = lambda_star_bounds(&p, &DVector::from_vec(vec![1.0]));
        assert_relative_eq!(lo, 1.0);
        assert_relative_eq!(hi.unwrap(), 2.5);
    }
}
