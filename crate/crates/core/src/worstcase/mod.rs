//! The adversarial distribution at fixed β: every atom moves along
//! `A(X)⁻¹β` to `X* = X + √δ·G·A(X)⁻¹β`.

use nalgebra::DVector;
use serde::Serialize;

use crate::dual_objective::{f_delta, maximizer_set, solve_inner, ORACLE_CUTS};
use crate::error::Result;
use crate::model::{Decision, DroProblem};
use crate::optimizer::{solve_lambda_star, BracketEnd};
use crate::regions::{lambda_thr, lambda_thr_prime};

/// Grid used to pick extreme maximizers when they are not unique.
pub const SELECTOR_GRID: usize = 100_000;
const SELECTOR_RESTARTS: usize = 16;
/// Values within this relative distance of the best count as maximizers.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `λ* > λ'_thr`: one maximizer per atom.
    Unique,
    /// `λ_thr < λ* ≤ λ'_thr`: a two-point mixture per atom.
    Randomized,
    /// `λ* = λ_thr`: the supremum need not be attained.
    Nonexistent,
    /// `β = 0`: every distribution in the ball attains the same value.
    ConstantLoss,
}

/// Mixture used in the randomized regime: with probability `p_low` atom `i`
/// moves by `g_low[i]`, otherwise by `g_high[i]`.
#[derive(Debug, Clone, Serialize)]
pub struct Randomization {
    pub g_low: Vec<f64>,
    pub g_high: Vec<f64>,
    /// `E_n[g_low²·a]` and `E_n[g_high²·a]`.
    pub c_low: f64,
    pub c_high: f64,
    /// `(c_high − 1)/(c_high − c_low)`.
    pub p_low: f64,
    #[serde(serialize_with = "points_as_rows")]
    pub x_star_low: Vec<DVector<f64>>,
    pub grid_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WorstCaseTransport {
    pub delta: f64,
    pub regime: Regime,
    pub lambda_star: f64,
    pub lambda_thr: f64,
    pub lambda_thr_prime: f64,
    /// Per-atom displacement scalars (the `g_high` branch when randomized).
    pub g: Vec<f64>,
    #[serde(serialize_with = "points_as_rows")]
    pub x_star: Vec<DVector<f64>>,
    /// `E_n[c(X, X*)]`, mixture-averaged when randomized.
    pub budget: f64,
    /// `E_n[ℓ(βᵀX*)]`, mixture-averaged when randomized.
    pub primal_value: f64,
    /// `f_δ(β, λ*)`.
    pub dual_value: f64,
    pub randomization: Option<Randomization>,
    /// False when any inner solve used the uncertified fallback.
    pub certified: bool,
    pub note: Option<String>,
}

fn points_as_rows<S: serde::Serializer>(points: &[DVector<f64>], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(points.iter().map(|p| p.as_slice()))
}

fn mean_loss(problem: &DroProblem, beta: &DVector<f64>, points: &[DVector<f64>]) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, x)| problem.loss().value(beta.dot(x), problem.data().label(i)))
        .sum::<f64>()
        / problem.n() as f64
}

fn mean_cost(problem: &DroProblem, points: &[DVector<f64>]) -> f64 {
    points
        .iter()
        .enumerate()
        .map(|(i, x)| problem.cost().transport_cost(i, problem.data().point(i), x))
        .sum::<f64>()
        / problem.n() as f64
}

fn displaced(problem: &DroProblem, beta: &DVector<f64>, i: usize, g: f64) -> DVector<f64> {
    problem.data().point(i) + problem.cost().inverse_apply(i, beta) * (problem.sqrt_delta() * g)
}

/// Worst-case transport at β, solving for `λ*(β)` first.
pub fn worst_case(problem: &DroProblem, beta: &DVector<f64>, tol: f64) -> Result<WorstCaseTransport> {
    let n = problem.n();
    let thr = lambda_thr(problem, beta);
    let thr_prime = lambda_thr_prime(problem, beta);
    let identity = problem.data().points().to_vec();
    let base = WorstCaseTransport {
        delta: problem.delta(),
        regime: Regime::ConstantLoss,
        lambda_star: 0.0,
        lambda_thr: thr,
        lambda_thr_prime: thr_prime,
        g: vec![0.0; n],
        primal_value: mean_loss(problem, beta, &identity),
        dual_value: f64::NAN,
        x_star: identity,
        budget: 0.0,
        randomization: None,
        certified: true,
        note: None,
    };
    if beta.iter().all(|&b| b == 0.0) {
        let dual_value = f_delta(problem, &Decision::new(beta.clone(), 0.0), ORACLE_CUTS)?;
        return Ok(WorstCaseTransport {
            dual_value,
            note: Some("beta = 0: the loss is constant in X, every distribution in the ball is worst-case".into()),
            ..base
        });
    }
    if problem.delta() == 0.0 {
        let dual_value = f_delta(problem, &Decision::new(beta.clone(), 0.0), ORACLE_CUTS)?;
        return Ok(WorstCaseTransport {
            regime: Regime::Unique,
            dual_value,
            ..base
        });
    }
    let ls = solve_lambda_star(problem, beta, tol)?;
    let lambda = ls.lambda;
    let theta = Decision::new(beta.clone(), lambda);
    if ls.at_threshold && ls.clamped == Some(BracketEnd::Lower) {
        return Ok(WorstCaseTransport {
            regime: Regime::Nonexistent,
            lambda_star: lambda,
            dual_value: f_delta(problem, &theta, ORACLE_CUTS)?,
            g: Vec::new(),
            x_star: Vec::new(),
            budget: f64::NAN,
            primal_value: f64::NAN,
            certified: ls.certified,
            note: Some(
                "lambda* sits at the finiteness threshold: the supremum is approached by sending mass to infinity and need not be attained"
                    .into(),
            ),
            ..base
        });
    }
    let dual_value = f_delta(problem, &theta, ORACLE_CUTS)?;

    if lambda > thr_prime {
        let mut certified = ls.certified;
        let mut g = Vec::with_capacity(n);
        let mut x_star = Vec::with_capacity(n);
        for i in 0..n {
            let sol = solve_inner(problem, &theta, i, ORACLE_CUTS)?;
            certified &= sol.certified;
            g.push(sol.g);
            x_star.push(sol.x_tilde);
        }
        return Ok(WorstCaseTransport {
            regime: Regime::Unique,
            lambda_star: lambda,
            budget: mean_cost(problem, &x_star),
            primal_value: mean_loss(problem, beta, &x_star),
            dual_value,
            g,
            x_star,
            certified,
            note: ls.clamped.map(|end| format!("budget equation has no root; lambda* clamped to the {end:?} bracket end")),
            ..base
        });
    }

    let mut g_low = Vec::with_capacity(n);
    let mut g_high = Vec::with_capacity(n);
    for i in 0..n {
        let set = maximizer_set(problem, &theta, i, SELECTOR_GRID, SELECTOR_RESTARTS, TIE_TOLERANCE)?;
        let (lo, hi) = if set.g_min.abs() <= set.g_max.abs() {
            (set.g_min, set.g_max)
        } else {
            (set.g_max, set.g_min)
        };
        g_low.push(lo);
        g_high.push(hi);
    }
    let weighted = |gs: &[f64]| gs.iter().enumerate().map(|(i, g)| g * g * problem.quadratic_form(i, beta)).sum::<f64>() / n as f64;
    let (c_low, c_high) = (weighted(&g_low), weighted(&g_high));
    let p_low = mixing_weight(c_low, c_high);
    let x_low: Vec<DVector<f64>> = (0..n).map(|i| displaced(problem, beta, i, g_low[i])).collect();
    let x_high: Vec<DVector<f64>> = (0..n).map(|i| displaced(problem, beta, i, g_high[i])).collect();
    let mix = |low: f64, high: f64| p_low * low + (1.0 - p_low) * high;
    Ok(WorstCaseTransport {
        regime: Regime::Randomized,
        lambda_star: lambda,
        budget: mix(mean_cost(problem, &x_low), mean_cost(problem, &x_high)),
        primal_value: mix(mean_loss(problem, beta, &x_low), mean_loss(problem, beta, &x_high)),
        dual_value,
        g: g_high.clone(),
        x_star: x_high,
        randomization: Some(Randomization {
            g_low,
            g_high,
            c_low,
            c_high,
            p_low,
            x_star_low: x_low,
            grid_points: SELECTOR_GRID,
        }),
        certified: false,
        note: Some(format!(
            "maximizers selected on a {SELECTOR_GRID}-point grid; the budget identity holds to grid resolution"
        )),
        ..base
    })
}

/// Probability of the low branch that makes the mixture spend exactly the
/// budget: `p·c_low + (1 − p)·c_high = 1`.
fn mixing_weight(c_low: f64, c_high: f64) -> f64 {
    if c_high - c_low > 1e-15 {
        ((c_high - 1.0) / (c_high - c_low)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Worst-case transports over a δ grid with the per-atom checks.
#[derive(Debug, Clone, Serialize)]
pub struct StaticsReport {
    pub transports: Vec<WorstCaseTransport>,
    /// Atom/δ pairs whose displacement shrank as δ grew.
    pub monotonicity_violations: usize,
    /// Smallest `|cos|` between `X* − X` and `A(X)⁻¹β` over moved atoms.
    pub min_cosine: f64,
    /// Grid values at or above the supplied `δ1` estimate.
    pub flagged: Vec<f64>,
}

/// Runs [`worst_case`] for each δ (sorted ascending) at fixed β.
pub fn comparative_statics(
    problem: &DroProblem,
    beta: &DVector<f64>,
    delta_grid: &[f64],
    delta1: Option<f64>,
    tol: f64,
) -> Result<StaticsReport> {
    let mut grid = delta_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let transports = grid
        .iter()
        .map(|&d| worst_case(&problem.with_delta(d)?, beta, tol))
        .collect::<Result<Vec<_>>>()?;
    let flagged = delta1.map_or_else(Vec::new, |d1| grid.iter().copied().filter(|&d| d >= d1).collect());

    let mut violations = 0;
    let mut min_cosine = 1.0_f64;
    for i in 0..problem.n() {
        let x = problem.data().point(i);
        let direction = problem.cost().inverse_apply(i, beta);
        let mut previous = 0.0;
        for t in transports.iter().filter(|t| !t.x_star.is_empty()) {
            let shift = &t.x_star[i] - x;
            let len = shift.norm();
            if len < previous * (1.0 - 1e-12) {
                violations += 1;
            }
            previous = len;
            if len > 0.0 && direction.norm() > 0.0 {
                min_cosine = min_cosine.min(shift.dot(&direction).abs() / (len * direction.norm()));
            }
        }
    }
    Ok(StaticsReport {
        transports,
        monotonicity_violations: violations,
        min_cosine,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gaussian_classes, single_atom};
    use crate::model::{CostField, LossSpec, SampleSet};
    use approx::assert_relative_eq;

    #[test]
    fn single_atom_transport() {
        let p = single_atom();
        let w = worst_case(&p, &DVector::from_vec(vec![1.0]), 1e-12).unwrap();
        assert_eq!(w.regime, Regime::Unique);
        assert_relative_eq!(w.lambda_star, 1.5, epsilon = 1e-9);
        assert_relative_eq!(w.g[0], -1.0, epsilon = 1e-9);
        assert_relative_eq!(w.x_star[0][0], -0.5, epsilon = 1e-9);
        assert_relative_eq!(w.budget, 0.25, epsilon = 1e-9);
        assert_relative_eq!(w.primal_value, 2.25, epsilon = 1e-9);
        assert_relative_eq!(w.dual_value, 2.25, epsilon = 1e-9);
    }

    #[test]
    fn zero_beta_is_constant_loss() {
        let p = single_atom();
        let w = worst_case(&p, &DVector::zeros(1), 1e-10).unwrap();
        assert_eq!(w.regime, Regime::ConstantLoss);
        assert_eq!(w.budget, 0.0);
        assert_eq!(w.x_star[0][0], 0.0);
    }

    #[test]
    fn logistic_budget_and_signs() {
        let p = gaussian_classes(64, 2, 5, LossSpec::logistic(), 0.01);
        let beta = DVector::from_vec(vec![0.6, 0.5]);
        let w = worst_case(&p, &beta, 1e-12).unwrap();
        assert_eq!(w.regime, Regime::Unique);
        assert!((w.budget - 0.01).abs() <= 1e-6 * 0.01);
        assert!((w.primal_value - w.dual_value).abs() <= 1e-6);
        for i in 0..p.n() {
            let d = p.loss().dplus(beta.dot(p.data().point(i)), p.data().label(i));
            assert_eq!(w.g[i].signum(), d.signum());
        }
    }

    #[test]
    fn single_atom_statics() {
        let p = single_atom();
        let rep = comparative_statics(&p, &DVector::from_vec(vec![1.0]), &[0.04, 0.01, 0.09], None, 1e-12).unwrap();
        let shifts: Vec<f64> = rep.transports.iter().map(|t| t.x_star[0][0].abs()).collect();
        for (s, want) in shifts.iter().zip([0.1, 0.2, 0.3]) {
            assert_relative_eq!(*s, want, epsilon = 1e-9);
        }
        assert_eq!(rep.monotonicity_violations, 0);
        assert!(rep.min_cosine >= 1.0 - 1e-10);
    }

    #[test]
    fn flat_atom_does_not_move() {
        // squared loss with βx = y has zero slope at the atom
        let data = SampleSet::scalar(&[1.0, 0.0], Some(vec![1.0, 1.0])).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::squared(), 0.01, 2.0).unwrap();
        let rep = comparative_statics(&p, &DVector::from_vec(vec![1.0]), &[0.01, 0.04, 0.09], None, 1e-12).unwrap();
        for t in &rep.transports {
            assert_eq!(t.g[0], 0.0);
        }
    }

    #[test]
    fn flags_large_delta() {
        let p = single_atom();
        let rep = comparative_statics(&p, &DVector::from_vec(vec![1.0]), &[0.01, 0.2], Some(0.1), 1e-12).unwrap();
        assert_eq!(rep.flagged, vec![0.2]);
    }

    #[test]
    fn randomized_regime_on_symmetric_atom() {
        // two symmetric global maxima ±g for every λ below the concavity threshold
        let data = SampleSet::scalar(&[0.0], None).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::quadratic_cosine(), 0.25, 2.0).unwrap();
        let w = worst_case(&p, &DVector::from_vec(vec![1.0]), 1e-10).unwrap();
        assert_eq!(w.regime, Regime::Randomized);
        assert!(w.lambda_star > w.lambda_thr && w.lambda_star <= w.lambda_thr_prime);
        let r = w.randomization.as_ref().unwrap();
        assert_relative_eq!(r.g_low[0].abs(), r.g_high[0].abs(), epsilon = 1e-6);
        assert!((w.budget - 0.25).abs() <= 1e-6);
        assert!((w.primal_value - w.dual_value).abs() <= 1e-6);
        assert!(!w.certified);
    }

    proptest::proptest! {
        #[test]
        fn mixing_weight_spends_budget(c_low in 0.0..1.0f64, excess in 1e-6..10.0f64) {
            let c_high = 1.0 + excess;
            let p = mixing_weight(c_low, c_high);
            proptest::prop_assert!((p * c_low + (1.0 - p) * c_high - 1.0).abs() <= 1e-12);
        }
    }
}
