//! The dual objective. For a sample `x` and decision `(β, λ)`,
//!
//! `F(γ) = ℓ(βᵀx + γ√δ·a) − λ√δ(γ²a − 1)`, `a = βᵀA(x)⁻¹β`,
//!
//! `ℓ_rob = sup_γ F(γ)` and `f_δ(β, λ)` is the empirical mean of `ℓ_rob`.

mod fallback;

pub use fallback::{compact_half_width, fallback_maximize, maximizer_set, MaximizerSet};

use nalgebra::DVector;
use rand::Rng;
use serde::Serialize;

use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem, LossKind, Piece};
use crate::regions::lambda_thr;

/// Default number of bisection halvings for oracle-grade solves.
pub const ORACLE_CUTS: u32 = 60;
/// Grid size used when the concave solver has to hand over to the fallback.
pub const FALLBACK_GRID: usize = 2001;
pub const FALLBACK_RESTARTS: usize = 8;

/// Solution of the inner maximization for one sample.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    /// Maximizer γ.
    pub g: f64,
    /// `ℓ_rob(β, λ; x)`.
    pub lrob: f64,
    /// Transported point `x + √δ·g·A(x)⁻¹β`.
    pub x_tilde: DVector<f64>,
    /// `|2λg − ℓ'(βᵀx̃)|` for the active piece.
    pub residual: f64,
    pub cuts_used: u32,
    /// False when produced by the grid fallback.
    pub certified: bool,
    /// Index of the loss piece attaining the max.
    pub piece: usize,
}

/// One element of the (sub)gradient set of `ℓ_rob` at `(β, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgradientSample {
    pub d_beta: DVector<f64>,
    pub d_lambda: f64,
    /// The chosen element of `∂ℓ(βᵀx̃)`.
    pub lprime_choice: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    /// `λ > λ_thr(β)`: finite objective with an attained maximizer.
    Interior,
    Boundary,
    /// `λ < λ_thr(β)`: objective is `+∞`.
    Infeasible,
}

/// Per-sample quantities at fixed β.
#[derive(Debug, Clone)]
pub(crate) struct Geometry {
    /// `βᵀx`.
    pub u0: f64,
    pub y: f64,
    /// `βᵀA⁻¹β`.
    pub a: f64,
    /// `√δ·a`, the rate at which γ moves `βᵀx̃`.
    pub s: f64,
    /// `A⁻¹β`.
    pub direction: DVector<f64>,
}

impl Geometry {
    pub fn new(problem: &DroProblem, beta: &DVector<f64>, index: usize) -> Self {
        let x = problem.data().point(index);
        let direction = problem.cost().inverse_apply(index, beta);
        let a = beta.dot(&direction);
        Self {
            u0: beta.dot(x),
            y: problem.data().label(index),
            a,
            s: problem.sqrt_delta() * a,
            direction,
        }
    }

    /// Value of `F` restricted to one piece.
    pub fn piece_value(&self, piece: &dyn Piece, lambda: f64, sqrt_delta: f64, gamma: f64) -> f64 {
        piece.value(self.u0 + gamma * self.s, self.y) - lambda * sqrt_delta * (gamma * gamma * self.a - 1.0)
    }

    /// `F'(γ)/s` for one piece: `ℓ'(u0 + γs) − 2λγ`.
    pub fn piece_slope(&self, piece: &dyn Piece, lambda: f64, gamma: f64) -> f64 {
        piece.deriv(self.u0 + gamma * self.s, self.y) - 2.0 * lambda * gamma
    }

    /// Derivative of [`Geometry::piece_slope`] in γ.
    pub fn piece_slope_deriv(&self, piece: &dyn Piece, lambda: f64, gamma: f64) -> f64 {
        piece.second(self.u0 + gamma * self.s, self.y) * self.s - 2.0 * lambda
    }
}

pub(crate) fn transported(problem: &DroProblem, index: usize, geo: &Geometry, g: f64) -> DVector<f64> {
    problem.data().point(index) + &geo.direction * (problem.sqrt_delta() * g)
}

/// `F(γ, β, λ; X_i)`.
pub fn eval_f(problem: &DroProblem, theta: &Decision, index: usize, gamma: f64) -> f64 {
    let geo = Geometry::new(problem, &theta.beta, index);
    problem.loss().value(geo.u0 + gamma * geo.s, geo.y)
        - theta.lambda * problem.sqrt_delta() * (gamma * gamma * geo.a - 1.0)
}

pub fn classify_domain(problem: &DroProblem, theta: &Decision) -> Domain {
    let thr = lambda_thr(problem, &theta.beta);
    let tol = 1e-12 * thr.max(1.0);
    if (theta.lambda - thr).abs() <= tol {
        Domain::Boundary
    } else if theta.lambda > thr {
        Domain::Interior
    } else {
        Domain::Infeasible
    }
}

/// Solution when γ has no effect (`β = 0` or `δ = 0`).
fn inert_solution(problem: &DroProblem, theta: &Decision, index: usize, geo: &Geometry) -> InnerSolution {
    let loss = problem.loss();
    let piece = best_piece(problem, geo.u0, geo.y);
    InnerSolution {
        g: 0.0,
        lrob: loss.value(geo.u0, geo.y) + theta.lambda * problem.sqrt_delta(),
        x_tilde: problem.data().point(index).clone(),
        residual: 0.0,
        cuts_used: 0,
        certified: true,
        piece,
    }
}

fn best_piece(problem: &DroProblem, u: f64, y: f64) -> usize {
    problem
        .loss()
        .pieces()
        .iter()
        .enumerate()
        .map(|(k, p)| (k, p.value(u, y)))
        .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
        .0
}

/// Checks pointwise finiteness of `ℓ_rob` for a sample.
fn check_finite(problem: &DroProblem, lambda: f64, geo: &Geometry) -> Result<()> {
    let threshold = problem.loss().kappa() * geo.s;
    if lambda <= threshold || lambda <= 0.0 {
        return Err(DroError::Infeasible { lambda, threshold });
    }
    Ok(())
}

/// Bisection on the sign of `∂F/∂γ`, piece by piece, in the concave regime.
///
/// For a piece with curvature bound `M_p`, the maximizer lies between
/// `ℓ'(βᵀx)/(2λ)` and `ℓ'(βᵀx)/(2λ − M_p·√δ·a)`; that bracket is halved
/// `cuts` times.
pub fn inner_maximize(problem: &DroProblem, theta: &Decision, index: usize, cuts: u32) -> Result<InnerSolution> {
    let geo = Geometry::new(problem, &theta.beta, index);
    if geo.s == 0.0 {
        return Ok(inert_solution(problem, theta, index, &geo));
    }
    let lambda = theta.lambda;
    check_finite(problem, lambda, &geo)?;
    let pieces = problem.loss().pieces();
    for p in pieces {
        let threshold = 0.5 * p.curvature_bound() * geo.s;
        if lambda <= threshold {
            return Err(DroError::NonconcaveRegime { lambda, threshold });
        }
    }

    let sd = problem.sqrt_delta();
    let mut best: Option<(usize, f64, f64)> = None;
    for (k, p) in pieces.iter().enumerate() {
        let g = bisect_piece(&geo, p.as_ref(), lambda, cuts);
        let v = geo.piece_value(p.as_ref(), lambda, sd, g);
        if best.is_none_or(|(_, _, bv)| v > bv) {
            best = Some((k, g, v));
        }
    }
    let (k, g, lrob) = best.expect("at least one piece");
    let piece = pieces[k].as_ref();
    let residual = geo.piece_slope(piece, lambda, g).abs();
    Ok(InnerSolution {
        g,
        lrob,
        x_tilde: transported(problem, index, &geo, g),
        residual,
        cuts_used: cuts * pieces.len() as u32,
        certified: true,
        piece: k,
    })
}

fn bisect_piece(geo: &Geometry, piece: &dyn Piece, lambda: f64, cuts: u32) -> f64 {
    let d0 = piece.deriv(geo.u0, geo.y);
    if d0 == 0.0 {
        return 0.0;
    }
    let near = d0 / (2.0 * lambda);
    let far = d0 / (2.0 * lambda - piece.curvature_bound() * geo.s);
    // widen by a few ulps so rounding cannot exclude the root
    let widen = 1e-12;
    let (mut lo, mut hi) = if d0 > 0.0 {
        (near * (1.0 - widen), far * (1.0 + widen) + f64::MIN_POSITIVE)
    } else {
        (far * (1.0 + widen) - f64::MIN_POSITIVE, near * (1.0 - widen))
    };
    for _ in 0..cuts {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let slope = geo.piece_slope(piece, lambda, mid);
        if slope > 0.0 {
            lo = mid;
        } else if slope < 0.0 {
            hi = mid;
        } else {
            return mid;
        }
    }
    let g = 0.5 * (lo + hi);
    debug_assert!(g.abs() >= near.abs() * (1.0 - 1e-9), "|g| below |l'(u0)|/(2 lambda)");
    g
}

/// [`inner_maximize`], handing over to [`fallback_maximize`] outside the
/// concave regime.
pub fn solve_inner(problem: &DroProblem, theta: &Decision, index: usize, cuts: u32) -> Result<InnerSolution> {
    match inner_maximize(problem, theta, index, cuts) {
        Err(DroError::NonconcaveRegime { .. }) => {
            fallback_maximize(problem, theta, index, FALLBACK_GRID, FALLBACK_RESTARTS)
        }
        other => other,
    }
}

/// Gradient of `ℓ_rob` via the envelope formula. Fails at kinks of the loss.
pub fn grad_lrob(problem: &DroProblem, theta: &Decision, index: usize, inner: &InnerSolution) -> Result<SubgradientSample> {
    let y = problem.data().label(index);
    let u = theta.beta.dot(&inner.x_tilde);
    let loss = problem.loss();
    let (dp, dm) = (loss.dplus(u, y), loss.dminus(u, y));
    if dp - dm > 1e-12 * (1.0 + dp.abs()) {
        return Err(DroError::Kink { u, dminus: dm, dplus: dp });
    }
    Ok(envelope(problem, theta, index, inner, dp))
}

/// A random element of the subgradient set: `L'` uniform between the one-sided
/// derivatives of the loss at `βᵀx̃`.
pub fn subgrad_lrob<R: Rng + ?Sized>(
    problem: &DroProblem,
    theta: &Decision,
    index: usize,
    inner: &InnerSolution,
    rng: &mut R,
) -> SubgradientSample {
    let y = problem.data().label(index);
    let u = theta.beta.dot(&inner.x_tilde);
    let loss = problem.loss();
    let (dp, dm) = (loss.dplus(u, y), loss.dminus(u, y));
    // always draw, so the stream position does not depend on kinks
    let w: f64 = rng.random();
    let choice = if dp > dm { dm + w * (dp - dm) } else { dp };
    envelope(problem, theta, index, inner, choice)
}

fn envelope(problem: &DroProblem, theta: &Decision, index: usize, inner: &InnerSolution, lprime: f64) -> SubgradientSample {
    let a = problem.quadratic_form(index, &theta.beta);
    SubgradientSample {
        d_beta: &inner.x_tilde * lprime,
        d_lambda: problem.sqrt_delta() * (1.0 - inner.g * inner.g * a),
        lprime_choice: lprime,
    }
}

/// `f_δ(β, λ)`; `+∞` outside the effective domain.
pub fn f_delta(problem: &DroProblem, theta: &Decision, cuts: u32) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..problem.n() {
        match solve_inner(problem, theta, i, cuts) {
            Ok(sol) => total += sol.lrob,
            Err(DroError::Infeasible { .. }) | Err(DroError::UnboundedInterval { .. }) => {
                return Ok(f64::INFINITY)
            }
            Err(e) => return Err(e),
        }
    }
    Ok(total / problem.n() as f64)
}

/// Full gradient `(∇_β f_δ, ∂_λ f_δ)` for smooth losses.
pub fn grad_f_delta(problem: &DroProblem, theta: &Decision, cuts: u32) -> Result<(DVector<f64>, f64)> {
    let mut d_beta = DVector::zeros(problem.d());
    let mut d_lambda = 0.0;
    for i in 0..problem.n() {
        let sol = solve_inner(problem, theta, i, cuts)?;
        let g = grad_lrob(problem, theta, i, &sol)?;
        d_beta += g.d_beta;
        d_lambda += g.d_lambda;
    }
    let n = problem.n() as f64;
    Ok((d_beta / n, d_lambda / n))
}

/// Closed form of `ℓ_rob` for the squared loss:
/// `λ√δ + λ(βᵀx − y)²/(λ − √δ·a)`.
pub fn squared_loss_lrob_closed_form(problem: &DroProblem, theta: &Decision, index: usize) -> Result<f64> {
    if problem.loss().kind() != LossKind::Squared {
        return Err(DroError::InvalidConfig("closed form needs the squared loss".into()));
    }
    let geo = Geometry::new(problem, &theta.beta, index);
    let lambda = theta.lambda;
    if lambda <= geo.s {
        return Err(DroError::Infeasible { lambda, threshold: geo.s });
    }
    let r = geo.u0 - geo.y;
    Ok(lambda * problem.sqrt_delta() + lambda * r * r / (lambda - geo.s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gaussian_classes, single_atom};
    use crate::model::{CostField, LossSpec, SampleSet};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn running() -> (DroProblem, Decision) {
        (single_atom(), Decision::from_slice(&[1.0], 2.0))
    }

    #[test]
    fn eval_f_examples() {
        let (p, t) = running();
        assert_relative_eq!(eval_f(&p, &t, 0, 0.0), 1.0 + 2.0 * 0.5);
        assert_relative_eq!(eval_f(&p, &t, 0, -2.0 / 3.0), 7.0 / 3.0, epsilon = 1e-14);
        let zero = Decision::from_slice(&[0.0], 2.0);
        assert_relative_eq!(eval_f(&p, &zero, 0, 17.0), 1.0 + 1.0);
    }

    #[test]
    fn domain_examples() {
        let logistic = gaussian_classes(8, 2, 1, LossSpec::logistic(), 0.25);
        assert_eq!(classify_domain(&logistic, &Decision::from_slice(&[0.3, -2.0], 0.1)), Domain::Interior);
        let p = single_atom();
        assert_eq!(classify_domain(&p, &Decision::from_slice(&[1.0], 0.4)), Domain::Infeasible);
        assert_eq!(classify_domain(&p, &Decision::from_slice(&[1.0], 0.5)), Domain::Boundary);
    }

    #[test]
    fn running_instance_inner_solution() {
        let (p, t) = running();
        let sol = inner_maximize(&p, &t, 0, ORACLE_CUTS).unwrap();
        assert_relative_eq!(sol.g, -2.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(sol.lrob, 7.0 / 3.0, epsilon = 1e-12);
        assert_relative_eq!(sol.x_tilde[0], -1.0 / 3.0, epsilon = 1e-12);
        let grad = grad_lrob(&p, &t, 0, &sol).unwrap();
        assert_relative_eq!(grad.d_beta[0], 8.0 / 9.0, epsilon = 1e-11);
        assert_relative_eq!(grad.d_lambda, 5.0 / 18.0, epsilon = 1e-11);
        assert_relative_eq!(squared_loss_lrob_closed_form(&p, &t, 0).unwrap(), 7.0 / 3.0, epsilon = 1e-14);
        assert_relative_eq!(f_delta(&p, &t, ORACLE_CUTS).unwrap(), 7.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_beta_is_inert() {
        let p = single_atom();
        let t = Decision::from_slice(&[0.0], 2.0);
        let sol = inner_maximize(&p, &t, 0, 60).unwrap();
        assert_eq!(sol.g, 0.0);
        assert_relative_eq!(sol.lrob, 1.0 + 2.0 * 0.5);
        let g = grad_lrob(&p, &t, 0, &sol).unwrap();
        assert_relative_eq!(g.d_lambda, 0.5);
    }

    #[test]
    fn logistic_residual_after_60_cuts() {
        let data = SampleSet::scalar(&[1.0], Some(vec![1.0])).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::logistic(), 0.25, 2.0).unwrap();
        let sol = inner_maximize(&p, &Decision::from_slice(&[1.0], 1.0), 0, 60).unwrap();
        assert!(sol.residual <= 1e-10, "residual {}", sol.residual);
    }

    #[test]
    fn infeasible_and_nonconcave_are_signalled() {
        let p = single_atom();
        assert!(matches!(
            inner_maximize(&p, &Decision::from_slice(&[1.0], 0.4), 0, 60),
            Err(DroError::Infeasible { .. })
        ));
        assert_eq!(f_delta(&p, &Decision::from_slice(&[1.0], 0.4), 60).unwrap(), f64::INFINITY);
        let data = SampleSet::scalar(&[0.0], None).unwrap();
        let cos = DroProblem::new(data, CostField::identity(1), LossSpec::quadratic_cosine(), 1.0, 2.0).unwrap();
        assert!(matches!(
            inner_maximize(&cos, &Decision::from_slice(&[1.0], 1.2), 0, 60),
            Err(DroError::NonconcaveRegime { .. })
        ));
        // dispatch hands it to the fallback
        assert!(!solve_inner(&cos, &Decision::from_slice(&[1.0], 1.2), 0, 60).unwrap().certified);
    }

    #[test]
    fn hinge_kink_subgradient_spans_interval() {
        // choose λ so the maximizer lands exactly on the kink u = 1
        let data = SampleSet::scalar(&[0.5], Some(vec![1.0])).unwrap();
        let p = DroProblem::new(data, CostField::identity(1), LossSpec::hinge(), 0.25, 2.0).unwrap();
        let t = Decision::from_slice(&[1.0], 1.0);
        let mut sol = inner_maximize(&p, &t, 0, 60).unwrap();
        sol.x_tilde[0] = 1.0;
        assert!(matches!(grad_lrob(&p, &t, 0, &sol), Err(DroError::Kink { .. })));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws: Vec<f64> = (0..2000).map(|_| subgrad_lrob(&p, &t, 0, &sol, &mut rng).lprime_choice).collect();
        assert!(draws.iter().all(|d| (-1.0..=0.0).contains(d)));
        assert!(draws.iter().cloned().fold(f64::INFINITY, f64::min) < -0.99);
        assert!(draws.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > -0.01);
    }

    #[test]
    fn subgradient_equals_gradient_at_smooth_points() {
        let p = gaussian_classes(6, 2, 4, LossSpec::logistic(), 0.1);
        let t = Decision::from_slice(&[0.4, -0.2], 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for i in 0..p.n() {
            let sol = inner_maximize(&p, &t, i, 60).unwrap();
            let g = grad_lrob(&p, &t, i, &sol).unwrap();
            let s = subgrad_lrob(&p, &t, i, &sol, &mut rng);
            assert_eq!(g, s);
            assert!(s.d_lambda <= p.sqrt_delta());
        }
    }

    #[test]
    fn tiny_delta_recovers_empirical_loss() {
        let p = gaussian_classes(20, 2, 5, LossSpec::logistic(), 1e-12);
        let t = Decision::from_slice(&[0.5, 0.5], 1.0);
        let nominal: f64 = (0..p.n())
            .map(|i| p.loss().value(t.beta.dot(p.data().point(i)), p.data().label(i)))
            .sum::<f64>()
            / p.n() as f64;
        assert!((f_delta(&p, &t, 60).unwrap() - nominal).abs() <= 1e-5);
    }

    #[test]
    fn lambda_envelope_brackets_directional_derivative() {
        let p = gaussian_classes(10, 2, 6, LossSpec::logistic(), 0.2);
        let t = Decision::from_slice(&[0.8, -0.3], 0.9);
        let h = 1e-6;
        for i in 0..p.n() {
            let sol = inner_maximize(&p, &t, i, 60).unwrap();
            let d = grad_lrob(&p, &t, i, &sol).unwrap().d_lambda;
            let up = inner_maximize(&p, &Decision::new(t.beta.clone(), t.lambda + h), i, 60).unwrap().lrob;
            let down = inner_maximize(&p, &Decision::new(t.beta.clone(), t.lambda - h), i, 60).unwrap().lrob;
            let fwd = (up - sol.lrob) / h;
            let bwd = (sol.lrob - down) / h;
            assert!(bwd - 1e-6 <= d && d <= fwd + 1e-6, "{bwd} {d} {fwd}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn squared_closed_form_matches_bisection(
            x in -3.0..3.0f64, y in -3.0..3.0f64, beta in -2.0..2.0f64, extra in 0.01..5.0f64, delta in 0.01..1.0f64,
        ) {
            let data = SampleSet::scalar(&[x], Some(vec![y])).unwrap();
            let p = DroProblem::new(data, CostField::identity(1), LossSpec::squared(), delta, 3.0).unwrap();
            let lambda = delta.sqrt() * beta * beta + extra;
            let t = Decision::from_slice(&[beta], lambda);
            let bis = inner_maximize(&p, &t, 0, 60).unwrap().lrob;
            let cf = squared_loss_lrob_closed_form(&p, &t, 0).unwrap();
            prop_assert!((bis - cf).abs() <= 1e-8 * (1.0 + cf.abs()));
        }

        #[test]
        fn inner_solution_invariants(
            seed in 0u64..1000, b0 in -2.0..2.0f64, b1 in -2.0..2.0f64, lambda in 0.05..4.0f64,
        ) {
            let p = gaussian_classes(4, 2, seed, LossSpec::logistic(), 0.3);
            let beta = DVector::from_vec(vec![b0, b1]);
            let lambda = crate::regions::lambda_thr_prime(&p, &beta) + lambda;
            let t = Decision::new(beta, lambda);
            for i in 0..p.n() {
                let sol = inner_maximize(&p, &t, i, 60).unwrap();
                let geo = Geometry::new(&p, &t.beta, i);
                let d0 = p.loss().dplus(geo.u0, geo.y);
                prop_assert!(sol.residual <= 1e-8);
                prop_assert!(sol.lrob >= eval_f(&p, &t, i, 0.0) - 1e-12);
                prop_assert!(sol.g.abs() >= d0.abs() / (2.0 * lambda) * (1.0 - 1e-9));
            }
        }

        #[test]
        fn lrob_minus_lambda_term_nonincreasing(seed in 0u64..500, l1 in 0.05..3.0f64, dl in 0.0..3.0f64) {
            let p = gaussian_classes(3, 2, seed, LossSpec::logistic(), 0.5);
            let beta = [0.7, -1.1];
            let l1 = crate::regions::lambda_thr_prime(&p, &DVector::from_vec(beta.to_vec())) + l1;
            for i in 0..p.n() {
                let lo = inner_maximize(&p, &Decision::from_slice(&beta, l1), i, 60).unwrap().lrob - l1 * p.sqrt_delta();
                let l2 = l1 + dl;
                let hi = inner_maximize(&p, &Decision::from_slice(&beta, l2), i, 60).unwrap().lrob - l2 * p.sqrt_delta();
                prop_assert!(hi <= lo + 1e-10);
            }
        }

        #[test]
        fn lrob_convex_along_chords(
            seed in 0u64..500,
            a in prop::collection::vec(-1.5..1.5f64, 2), b in prop::collection::vec(-1.5..1.5f64, 2),
            la in 0.05..3.0f64, lb in 0.05..3.0f64, w in 0.0..1.0f64,
        ) {
            let p = gaussian_classes(3, 2, seed, LossSpec::logistic(), 0.2);
            // the concavity threshold is convex in β, so the midpoint stays concave
            let shift = |v: &[f64]| crate::regions::lambda_thr_prime(&p, &DVector::from_vec(v.to_vec()));
            let (la, lb) = (la + shift(&a), lb + shift(&b));
            let ta = Decision::from_slice(&a, la);
            let tb = Decision::from_slice(&b, lb);
            let tm = Decision::new(&ta.beta * w + &tb.beta * (1.0 - w), w * la + (1.0 - w) * lb);
            for i in 0..p.n() {
                let fa = inner_maximize(&p, &ta, i, 60).unwrap().lrob;
                let fb = inner_maximize(&p, &tb, i, 60).unwrap().lrob;
                let fm = inner_maximize(&p, &tm, i, 60).unwrap().lrob;
                prop_assert!(fm <= w * fa + (1.0 - w) * fb + 1e-9);
            }
        }
    }
}
