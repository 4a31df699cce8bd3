//! The multiplier: root of the budget equation at fixed β, and the outer
//! search over λ with β optimized inside.

use nalgebra::DVector;
use serde::Serialize;

use crate::dual_objective::{f_delta, solve_inner, ORACLE_CUTS};
use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem};
use crate::numeric::golden_section_min;
use crate::regions::{lambda_star_bounds, lambda_thr, ConstantsBundle};

use super::{sgd_beta_only, RunOptions, StepSchedule};

/// Which end of the bracket the root was clamped to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketEnd {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaStar {
    pub lambda: f64,
    /// `E_n[g²a] − 1` at `lambda`.
    pub residual: f64,
    /// Set when the budget equation has no root inside the bracket and the
    /// first-order condition holds with inequality.
    pub clamped: Option<BracketEnd>,
    /// The lower end equals `λ_thr(β)` (the objective is infinite below).
    pub at_threshold: bool,
    /// Every inner solve used the certified bisection.
    pub certified: bool,
    /// `(λ, E_n[g²a] − 1)` at every probe, in evaluation order.
    pub probes: Vec<(f64, f64)>,
}

/// `E_n[g²·a] − 1` and whether every inner solve was certified.
fn budget_gap(problem: &DroProblem, beta: &DVector<f64>, lambda: f64) -> Result<(f64, bool)> {
    let theta = Decision::new(beta.clone(), lambda);
    let mut total = 0.0;
    let mut certified = true;
    for i in 0..problem.n() {
        let sol = solve_inner(problem, &theta, i, ORACLE_CUTS)?;
        certified &= sol.certified;
        total += sol.g * sol.g * problem.quadratic_form(i, beta);
    }
    Ok((total / problem.n() as f64 - 1.0, certified))
}

/// Bisection on the decreasing map `λ ↦ E_n[g²a] − 1` over
/// `[max(λ_min, λ_thr), λ_max]`; without a curvature bound the upper end is
/// found by doubling.
pub fn solve_lambda_star(problem: &DroProblem, beta: &DVector<f64>, tol: f64) -> Result<LambdaStar> {
    if beta.iter().all(|&b| b == 0.0) || problem.delta() == 0.0 {
        return Ok(LambdaStar {
            lambda: 0.0,
            residual: 0.0,
            clamped: None,
            at_threshold: false,
            certified: true,
            probes: Vec::new(),
        });
    }
    let (lam_min, lam_max) = lambda_star_bounds(problem, beta);
    let thr = lambda_thr(problem, beta);
    // the objective is infinite at the threshold itself
    let thr_open = if thr > 0.0 { thr * (1.0 + 1e-12) } else { 0.0 };
    let mut lo = lam_min.max(thr_open);
    let at_threshold = thr_open >= lam_min;
    if lo == 0.0 {
        lo = f64::MIN_POSITIVE;
    }
    let mut probes = Vec::new();
    let mut certified = true;
    let mut probe = |lambda: f64, probes: &mut Vec<(f64, f64)>| -> Result<f64> {
        let (gap, cert) = budget_gap(problem, beta, lambda)?;
        certified &= cert;
        probes.push((lambda, gap));
        Ok(gap)
    };

    let f_lo = probe(lo, &mut probes)?;
    if f_lo <= tol {
        let result = LambdaStar {
            lambda: lo,
            residual: f_lo,
            clamped: (f_lo < -tol).then_some(BracketEnd::Lower),
            at_threshold,
            certified,
            probes,
        };
        return Ok(result);
    }
    let mut hi = match lam_max {
        Some(h) if h > lo => h,
        _ => 2.0 * lo.max(1e-6),
    };
    let mut f_hi = probe(hi, &mut probes)?;
    if lam_max.is_none() {
        let mut doublings = 0;
        while f_hi > 0.0 && doublings < 200 {
            lo = hi;
            hi *= 2.0;
            f_hi = probe(hi, &mut probes)?;
            doublings += 1;
        }
    }
    if f_hi >= -tol {
        let clamped = (f_hi > tol).then_some(BracketEnd::Upper);
        check_monotone(&probes)?;
        return Ok(LambdaStar {
            lambda: hi,
            residual: f_hi,
            clamped,
            at_threshold: false,
            certified,
            probes,
        });
    }
    let (mut best, mut best_gap) = (hi, f_hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let gap = probe(mid, &mut probes)?;
        if gap.abs() < best_gap.abs() {
            best = mid;
            best_gap = gap;
        }
        if gap.abs() <= tol {
            break;
        }
        if gap > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    check_monotone(&probes)?;
    Ok(LambdaStar {
        lambda: best,
        residual: best_gap,
        clamped: None,
        at_threshold: false,
        certified,
        probes,
    })
}

fn check_monotone(probes: &[(f64, f64)]) -> Result<()> {
    let mut sorted = probes.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].1 > w[0].1 + 1e-9 * (1.0 + w[0].1.abs()) {
            return Err(DroError::Numerical(format!(
                "E[g^2 a] increased in lambda between {} and {}",
                w[0].0, w[1].0
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LineSearchResult {
    pub lambda_star: f64,
    pub beta_star: Vec<f64>,
    /// `f_δ(β̄, λ*)` for the averaged β of the final inner run.
    pub value: f64,
    /// `(λ, h(λ))` at every probe.
    pub probes: Vec<(f64, f64)>,
    /// Bracket width after each section step.
    pub widths: Vec<f64>,
}

/// Golden-section search over `λ ∈ [0, K2·R_β]` on
/// `h(λ) = inf_β f_δ(β, λ)`, each `h` approximated by averaged SGD over β on
/// `‖β‖ ≤ min(R_β, λ/K1)` with the same seed.
pub fn line_search_outer(
    problem: &DroProblem,
    consts: &ConstantsBundle,
    schedule: StepSchedule,
    inner_iterations: u64,
    lambda_tol: f64,
    seed: u64,
) -> Result<LineSearchResult> {
    if !(lambda_tol > 0.0) {
        return Err(DroError::InvalidConfig("lambda_tol must be positive".into()));
    }
    let r = problem.r_beta();
    let opts = RunOptions::new(inner_iterations, seed);
    let mut failure: Option<DroError> = None;
    let inner = |lambda: f64| -> Result<(f64, DVector<f64>)> {
        let radius = if consts.k1 > 0.0 { r.min(lambda / consts.k1) } else { r };
        let trace = sgd_beta_only(problem, lambda, radius, schedule, &opts)?;
        let beta = trace.final_theta_bar.beta;
        let value = f_delta(problem, &Decision::new(beta.clone(), lambda), ORACLE_CUTS)?;
        if !value.is_finite() {
            return Err(DroError::Numerical(format!("inner run at lambda = {lambda} ended outside the domain")));
        }
        Ok((value, beta))
    };
    let section = golden_section_min(
        |lambda| match inner(lambda) {
            Ok((v, _)) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        0.0,
        consts.k2 * r,
        lambda_tol,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (value, beta) = inner(section.x)?;
    Ok(LineSearchResult {
        lambda_star: section.x,
        beta_star: beta.iter().copied().collect(),
        value,
        probes: section.probes,
        widths: section.widths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gaussian_classes, single_atom};
    use crate::model::{CostField, LossSpec, SampleSet};
    use crate::regions::{build_constants, LBounds};

    #[test]
    fn single_atom_root() {
        let p = single_atom();
        let s = solve_lambda_star(&p, &DVector::from_vec(vec![1.0]), 1e-12).unwrap();
        assert!((s.lambda - 1.5).abs() <= 1e-9, "{}", s.lambda);
        assert!(s.clamped.is_none() && s.certified);
        let (gap, _) = budget_gap(&p, &DVector::from_vec(vec![1.0]), 1.5).unwrap();
        assert!(gap.abs() <= 1e-12);
    }

    #[test]
    fn zero_beta_gives_zero() {
        let p = single_atom();
        assert_eq!(solve_lambda_star(&p, &DVector::zeros(1), 1e-10).unwrap().lambda, 0.0);
    }

    #[test]
    fn root_is_grid_argmin() {
        let p = gaussian_classes(8, 2, 4, LossSpec::logistic(), 0.2);
        let beta = DVector::from_vec(vec![0.9, -0.6]);
        let s = solve_lambda_star(&p, &beta, 1e-12).unwrap();
        let (lo, hi) = (0.01, 3.0);
        let n = 3000;
        let step = (hi - lo) / n as f64;
        let (arg, _) = (0..=n)
            .map(|j| lo + j as f64 * step)
            .map(|l| (l, f_delta(&p, &Decision::new(beta.clone(), l), 60).unwrap()))
            .fold((0.0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
        assert!((s.lambda - arg).abs() <= step, "{} vs {}", s.lambda, arg);
    }

    #[test]
    fn probes_are_monotone() {
        let p = gaussian_classes(12, 3, 2, LossSpec::logistic(), 0.3);
        let s = solve_lambda_star(&p, &DVector::from_vec(vec![0.3, 0.5, -0.2]), 1e-10).unwrap();
        assert!(check_monotone(&s.probes).is_ok());
        assert!(check_monotone(&[(1.0, 0.5), (2.0, 0.7)]).is_err());
    }

    #[test]
    fn hinge_doubles_for_upper_end() {
        let p = gaussian_classes(10, 2, 7, LossSpec::hinge(), 0.2);
        let s = solve_lambda_star(&p, &DVector::from_vec(vec![0.5, 0.5]), 1e-10).unwrap();
        assert!(s.lambda > 0.0);
    }

    #[test]
    fn outer_search_single_atom_joint_optimum() {
        // x = 0: h(λ) = λ√δ + 1, minimized at the left end
        let p = single_atom();
        let c = build_constants(&p, LBounds::supplied(4.0, 4.0).unwrap()).unwrap();
        let s = StepSchedule::new(1.0, 0.55).unwrap();
        let r = line_search_outer(&p, &c, s, 2000, 1e-3, 0).unwrap();
        assert!(r.lambda_star <= 2e-3);
        assert!((r.value - 1.0).abs() <= 2e-3);
        assert!(r.widths.windows(2).all(|w| w[1] <= 0.7 * w[0]));
    }

    #[test]
    fn outer_search_matches_grid_on_shifted_atom() {
        let data = SampleSet::scalar(&[1.0, -0.5], Some(vec![2.0, -0.4])).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::squared(), 0.04, 2.0).unwrap();
        let l = crate::regions::estimate_l_bounds(&p, 32, 50, 0).unwrap();
        let c = build_constants(&p, l).unwrap();
        let s = StepSchedule::new(0.5, 0.55).unwrap();
        let r = line_search_outer(&p, &c, s, 20_000, 1e-3, 1).unwrap();
        let (theta, f) = crate::oracle::grid_min_fdelta(&p, &[(-2.0, 2.0)], (0.0, c.k2 * 2.0), 81, 6).unwrap();
        assert!((r.value - f).abs() <= 1e-2, "{} vs {}", r.value, f);
        assert!((r.lambda_star - theta.lambda).abs() <= 5e-2);
        // unimodality spot check on the recorded probes
        let mut probes = r.probes.clone();
        probes.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (imin, _) = probes.iter().enumerate().min_by(|a, b| a.1 .1.total_cmp(&b.1 .1)).unwrap();
        assert!(probes[0].1 >= probes[imin].1 && probes.last().unwrap().1 >= probes[imin].1);
    }
}
