//! Brute-force reference computations used to validate the fast paths.
//!
//! None of these call the bisection solver except [`fd_gradient`], whose
//! subject is the envelope formula rather than the inner solve.

pub mod suite;

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::dual_objective::{f_delta, grad_f_delta};
use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem};
use crate::numeric::golden_section_min;

/// Outcome of one oracle comparison.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub oracle: f64,
    pub fast_path: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub params: BTreeMap<String, f64>,
}

impl OracleReport {
    /// Passes when the absolute error is within `tolerance`.
    pub fn absolute(quantity: impl Into<String>, oracle: f64, fast_path: f64, tolerance: f64) -> Self {
        let abs_error = (oracle - fast_path).abs();
        let rel_error = abs_error / oracle.abs().max(f64::MIN_POSITIVE);
        Self {
            quantity: quantity.into(),
            oracle,
            fast_path,
            abs_error,
            rel_error,
            tolerance,
            pass: abs_error <= tolerance,
            params: BTreeMap::new(),
        }
    }

    /// Passes when `fast_path ≤ oracle + tolerance` (one-sided bounds).
    pub fn upper_bound(quantity: impl Into<String>, bound: f64, fast_path: f64, tolerance: f64) -> Self {
        let mut r = Self::absolute(quantity, bound, fast_path, tolerance);
        r.pass = fast_path <= bound + tolerance;
        r
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_owned(), value);
        self
    }
}

/// `F` at one sample, computed from the loss directly.
fn objective_at<'a>(problem: &'a DroProblem, theta: &Decision, index: usize) -> impl Fn(f64) -> f64 + 'a {
    let x = problem.data().point(index);
    let y = problem.data().label(index);
    let a = problem.quadratic_form(index, &theta.beta);
    let u0 = theta.beta.dot(x);
    let sd = problem.sqrt_delta();
    let lambda = theta.lambda;
    move |g: f64| problem.loss().value(u0 + g * sd * a, y) - lambda * sd * (g * g * a - 1.0)
}

/// Dense-grid maximization of `F` over an interval found by doubling until
/// `F` falls below `F(0)` on three successive scales, followed by a local
/// golden-section polish.
pub fn grid_inner_max(problem: &DroProblem, theta: &Decision, index: usize, points: usize) -> (f64, f64) {
    let f = objective_at(problem, theta, index);
    let base = f(0.0);
    if problem.quadratic_form(index, &theta.beta) * problem.sqrt_delta() == 0.0 {
        return (0.0, base);
    }
    let below = |w: f64| f(w) < base && f(-w) < base;
    let mut width = 1e-6;
    while width < 1e12 && !(below(width) && below(2.0 * width) && below(4.0 * width)) {
        width *= 2.0;
    }
    let width = 4.0 * width;
    let n = points.max(3);
    let step = 2.0 * width / (n - 1) as f64;
    let (g, _) = (0..n)
        .map(|j| -width + j as f64 * step)
        .map(|g| (g, f(g)))
        .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
    let polished = golden_section_min(|t| -f(t), g - step, g + step, 1e-14 * (1.0 + g.abs()));
    if -polished.value >= f(g) {
        (polished.x, -polished.value)
    } else {
        (g, f(g))
    }
}

/// Central differences of `f_δ` with oracle-grade (80-cut) inner solves.
pub fn fd_gradient(problem: &DroProblem, theta: &Decision, h: f64) -> Result<(DVector<f64>, f64)> {
    let base = theta.to_vec();
    let partial = |j: usize| -> Result<f64> {
        let mut up = base.clone();
        let mut down = base.clone();
        up[j] += h;
        down[j] -= h;
        let fu = f_delta(problem, &Decision::from_flat(&up), 80)?;
        let fd = f_delta(problem, &Decision::from_flat(&down), 80)?;
        Ok((fu - fd) / (2.0 * h))
    };
    let d = theta.dim();
    let d_beta = DVector::from_iterator(d, (0..d).map(partial).collect::<Result<Vec<_>>>()?);
    Ok((d_beta, partial(d)?))
}

/// Default FD step `1e−5·(1+‖θ‖)`.
pub fn default_fd_step(theta: &Decision) -> f64 {
    1e-5 * (1.0 + theta.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Nested-grid minimization of `f_δ` over a box in `(β, λ)`, `d ≤ 2`.
/// Each level re-centers a grid of `resolution` points per axis on the
/// incumbent, clipped to the original box; the incumbent value never
/// increases.
pub fn grid_min_fdelta(
    problem: &DroProblem,
    beta_box: &[(f64, f64)],
    lambda_interval: (f64, f64),
    resolution: usize,
    levels: usize,
) -> Result<(Decision, f64)> {
    let d = problem.d();
    if d > 2 || beta_box.len() != d {
        return Err(DroError::InvalidConfig("grid minimization supports d <= 2 with one interval per coordinate".into()));
    }
    let mut bounds: Vec<(f64, f64)> = beta_box.to_vec();
    bounds.push(lambda_interval);
    let outer = bounds.clone();
    let res = resolution.max(2);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..levels.max(1) {
        let axes: Vec<Vec<f64>> = bounds
            .iter()
            .map(|&(lo, hi)| {
                if hi <= lo {
                    vec![lo]
                } else {
                    (0..res).map(|j| lo + (hi - lo) * j as f64 / (res - 1) as f64).collect()
                }
            })
            .collect();
        let total: usize = axes.iter().map(Vec::len).product();
        for flat in 0..total {
            let mut rem = flat;
            let point: Vec<f64> = axes
                .iter()
                .map(|axis| {
                    let v = axis[rem % axis.len()];
                    rem /= axis.len();
                    v
                })
                .collect();
            let value = f_delta(problem, &Decision::from_flat(&point), 60)?;
            if best.as_ref().is_none_or(|b| value < b.1) {
                best = Some((point, value));
            }
        }
        let (center, _) = best.as_ref().expect("grid is nonempty");
        bounds = bounds
            .iter()
            .zip(&outer)
            .zip(center)
            .map(|((&(lo, hi), &(olo, ohi)), &c)| {
                let span = 2.0 * (hi - lo) / (res - 1) as f64;
                ((c - span).max(olo), (c + span).min(ohi))
            })
            .collect();
    }
    let (point, value) = best.expect("grid is nonempty");
    Ok((Decision::from_flat(&point), value))
}

/// Lower bound on `sup_P E_P[ℓ(βᵀX)]` from transport plans restricted to a
/// finite support grid (`d = 1`, `n ≤ 5`).
///
/// With a single budget constraint the plan LP is a separable concave
/// resource allocation: each atom follows the upper concave hull of its
/// `(cost, value)` candidates, and hull segments are bought greedily by slope.
pub fn primal_bound(problem: &DroProblem, beta: &DVector<f64>, support: &[f64]) -> Result<f64> {
    if problem.d() != 1 || problem.n() > 5 {
        return Err(DroError::InvalidConfig("primal bound needs d = 1 and n <= 5".into()));
    }
    if support.is_empty() {
        return Err(DroError::InvalidConfig("empty support grid".into()));
    }
    let n = problem.n();
    let budget = n as f64 * problem.delta();
    let mut value = 0.0;
    let mut spent = 0.0;
    let mut segments: Vec<(f64, f64)> = Vec::new();
    for i in 0..n {
        let x = problem.data().point(i);
        let y = problem.data().label(i);
        let mut cands: Vec<(f64, f64)> = support
            .iter()
            .map(|&z| {
                let target = DVector::from_element(1, z);
                (problem.cost().transport_cost(i, x, &target), problem.loss().value(beta[0] * z, y))
            })
            .collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
        let hull = upper_hull(&cands);
        value += hull[0].1;
        spent += hull[0].0;
        for w in hull.windows(2) {
            let (dc, dv) = (w[1].0 - w[0].0, w[1].1 - w[0].1);
            if dv <= 0.0 {
                break;
            }
            segments.push((dv / dc, dc));
        }
    }
    if spent > budget * (1.0 + 1e-12) + 1e-15 {
        return Err(DroError::InvalidConfig("support grid has no plan within the budget".into()));
    }
    segments.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut remaining = budget - spent;
    for (slope, dc) in segments {
        if remaining <= 0.0 {
            break;
        }
        let take = dc.min(remaining);
        value += slope * take;
        remaining -= take;
    }
    Ok(value / n as f64)
}

/// Upper concave hull of points sorted by x (ties: larger y first).
fn upper_hull(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for &p in points {
        if hull.last().is_some_and(|q| q.0 == p.0) {
            continue;
        }
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

/// Finite-difference Hessian probe of `f_δ`.
#[derive(Debug, Clone, Serialize)]
pub struct HessianProbe {
    /// Minimum eigenvalue at each evaluated sample.
    pub min_eigenvalues: Vec<f64>,
    /// Samples skipped because a perturbed point left the domain.
    pub skipped: usize,
    #[serde(skip)]
    pub hessians: Vec<DMatrix<f64>>,
    /// Smallest `8((f(a)+f(b))/2 − f((a+b)/2))/‖a−b‖²` over consecutive sample pairs.
    pub chord_modulus: Option<f64>,
}

/// Central differences of the analytic gradient at each sample, symmetrized.
pub fn hessian_probe(problem: &DroProblem, theta_samples: &[Decision], h: f64) -> Result<HessianProbe> {
    let mut min_eigenvalues = Vec::new();
    let mut hessians = Vec::new();
    let mut skipped = 0;
    for theta in theta_samples {
        match fd_hessian(problem, theta, h) {
            Ok(hess) => {
                min_eigenvalues.push(SymmetricEigen::new(hess.clone()).eigenvalues.min());
                hessians.push(hess);
            }
            Err(DroError::Infeasible { .. } | DroError::NonconcaveRegime { .. } | DroError::UnboundedInterval { .. }) => {
                skipped += 1
            }
            Err(e) => return Err(e),
        }
    }
    let mut chord: Option<f64> = None;
    for pair in theta_samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mid = Decision::new((&a.beta + &b.beta) / 2.0, 0.5 * (a.lambda + b.lambda));
        let vals = [a, b, &mid].map(|t| f_delta(problem, t, 60));
        if let [Ok(fa), Ok(fb), Ok(fm)] = vals {
            let dist2 = a.distance(b).powi(2);
            if dist2 > 0.0 && fa.is_finite() && fb.is_finite() && fm.is_finite() {
                let m = 8.0 * (0.5 * (fa + fb) - fm) / dist2;
                chord = Some(chord.map_or(m, |c: f64| c.min(m)));
            }
        }
    }
    Ok(HessianProbe {
        min_eigenvalues,
        skipped,
        hessians,
        chord_modulus: chord,
    })
}

fn fd_hessian(problem: &DroProblem, theta: &Decision, h: f64) -> Result<DMatrix<f64>> {
    let base = theta.to_vec();
    let dim = base.len();
    let grad = |v: &[f64]| -> Result<Vec<f64>> {
        let (gb, gl) = grad_f_delta(problem, &Decision::from_flat(v), 60)?;
        Ok(gb.iter().copied().chain(std::iter::once(gl)).collect())
    };
    let mut hess = DMatrix::zeros(dim, dim);
    for j in 0..dim {
        let mut up = base.clone();
        let mut down = base.clone();
        up[j] += h;
        down[j] -= h;
        let (gu, gd) = (grad(&up)?, grad(&down)?);
        for k in 0..dim {
            hess[(k, j)] = (gu[k] - gd[k]) / (2.0 * h);
        }
    }
    Ok((&hess + hess.transpose()) / 2.0)
}

/// `Bᵀ H B` for a basis `B` given as columns.
pub fn restrict_hessian(hessian: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    basis.transpose() * hessian * basis
}

/// 2-D feasible regions in `(β, λ)` with scalar β, for projection checks.
#[derive(Debug, Clone, Copy)]
pub enum GridRegion {
    /// `{k1|β| ≤ λ ≤ cap, |β| ≤ r_beta}`.
    Cone { k1: f64, cap: f64, r_beta: f64 },
    /// `{λ ≥ curvature·β² + eta, |β| ≤ r_beta}`.
    Epigraph { curvature: f64, eta: f64, r_beta: f64 },
}

impl GridRegion {
    fn contains(&self, b: f64, l: f64) -> bool {
        match *self {
            GridRegion::Cone { k1, cap, r_beta } => b.abs() <= r_beta && k1 * b.abs() <= l && l <= cap,
            GridRegion::Epigraph { curvature, eta, r_beta } => b.abs() <= r_beta && l >= curvature * b * b + eta,
        }
    }

    /// Boundary pieces as parametrized curves `t ∈ [lo, hi] ↦ (β, λ)`.
    fn boundary(&self, theta: &Decision) -> Vec<BoundaryPiece> {
        match *self {
            GridRegion::Cone { k1, cap, r_beta } => {
                let reach = r_beta.min(cap / k1);
                let mut pieces: Vec<BoundaryPiece> = vec![
                    (0.0, reach, Box::new(move |t| (t, k1 * t))),
                    (0.0, reach, Box::new(move |t| (-t, k1 * t))),
                    (-reach, reach, Box::new(move |t| (t, cap))),
                ];
                if k1 * r_beta < cap {
                    pieces.push((k1 * r_beta, cap, Box::new(move |t| (r_beta, t))));
                    pieces.push((k1 * r_beta, cap, Box::new(move |t| (-r_beta, t))));
                }
                pieces
            }
            GridRegion::Epigraph { curvature, eta, r_beta } => {
                let floor = curvature * r_beta * r_beta + eta;
                let top = theta.lambda.max(floor) + 1.0;
                vec![
                    (-r_beta, r_beta, Box::new(move |t| (t, curvature * t * t + eta))),
                    (floor, top, Box::new(move |t| (r_beta, t))),
                    (floor, top, Box::new(move |t| (-r_beta, t))),
                ]
            }
        }
    }
}

type BoundaryPiece = (f64, f64, Box<dyn Fn(f64) -> (f64, f64)>);

/// Nearest point of a region: the point itself when feasible, otherwise the
/// closest point over nested 2001-point grids along each boundary piece,
/// `levels` deep, each level re-centered on the incumbent with a ±4-spacing
/// window.
pub fn grid_project(region: &GridRegion, theta: &Decision, levels: usize) -> Decision {
    const RES: usize = 2001;
    let (tb, tl) = (theta.beta[0], theta.lambda);
    if region.contains(tb, tl) {
        return theta.clone();
    }
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for (lo0, hi0, curve) in region.boundary(theta) {
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..levels.max(1) {
            let step = (hi - lo) / (RES - 1) as f64;
            let mut local = (f64::INFINITY, lo);
            for j in 0..RES {
                let t = lo + j as f64 * step;
                let (b, l) = curve(t);
                let dist = (b - tb).powi(2) + (l - tl).powi(2);
                if dist < local.0 {
                    local = (dist, t);
                }
            }
            let (b, l) = curve(local.1);
            if local.0 < best.0 {
                best = (local.0, b, l);
            }
            lo = (local.1 - 4.0 * step).max(lo0);
            hi = (local.1 + 4.0 * step).min(hi0);
        }
    }
    Decision::from_slice(&[best.1], best.2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual_objective::inner_maximize;
    use crate::model::fixtures::{gaussian_classes, single_atom};
    use crate::model::{CostField, LossSpec, SampleSet};
    use approx::assert_relative_eq;

    #[test]
    fn grid_inner_max_running_instance() {
        let p = single_atom();
        let (g, v) = grid_inner_max(&p, &Decision::from_slice(&[1.0], 2.0), 0, 1_000_000);
        assert!((g + 2.0 / 3.0).abs() <= 1e-6);
        assert!((v - 7.0 / 3.0).abs() <= 1e-9);
        let (g0, v0) = grid_inner_max(&p, &Decision::from_slice(&[0.0], 2.0), 0, 100);
        assert_eq!((g0, v0), (0.0, 2.0));
    }

    #[test]
    fn grid_inner_max_agrees_with_bisection_on_logistic() {
        let p = gaussian_classes(20, 3, 11, LossSpec::logistic(), 0.4);
        let t = Decision::from_slice(&[0.5, -1.0, 0.7], 0.8);
        for i in 0..p.n() {
            let (g, v) = grid_inner_max(&p, &t, i, 20_000);
            let sol = inner_maximize(&p, &t, i, 60).unwrap();
            assert!((v - sol.lrob).abs() <= 1e-6);
            assert!((g - sol.g).abs() <= 1e-6);
        }
    }

    #[test]
    fn fd_gradient_at_zero_beta() {
        let p = gaussian_classes(10, 2, 1, LossSpec::logistic(), 0.3);
        let t = Decision::from_slice(&[0.0, 0.0], 1.0);
        let (_, dl) = fd_gradient(&p, &t, 1e-5).unwrap();
        assert_relative_eq!(dl, p.sqrt_delta(), epsilon = 1e-8);
    }

    #[test]
    fn fd_error_is_second_order() {
        let p = gaussian_classes(10, 2, 2, LossSpec::logistic(), 0.3);
        let t = Decision::from_slice(&[0.6, -0.4], 0.9);
        let (reference, _) = fd_gradient(&p, &t, 1e-6).unwrap();
        let err = |h: f64| (fd_gradient(&p, &t, h).unwrap().0 - &reference).norm();
        let ratio = err(0.02) / err(0.01);
        assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn grid_min_single_atom_slice() {
        let p = single_atom();
        let (theta, f) = grid_min_fdelta(&p, &[(1.0, 1.0)], (0.6, 4.0), 101, 6).unwrap();
        assert!((f - 2.25).abs() <= 1e-9);
        assert!((theta.lambda - 1.5).abs() <= 1e-4);
        let (_, coarse) = grid_min_fdelta(&p, &[(1.0, 1.0)], (0.6, 4.0), 11, 1).unwrap();
        assert!(f <= coarse);
    }

    #[test]
    fn primal_bound_duality() {
        let p = single_atom();
        let beta = DVector::from_vec(vec![1.0]);
        let grid: Vec<f64> = (0..=400).map(|j| -2.0 + 0.01 * j as f64).collect();
        let lb = primal_bound(&p, &beta, &grid).unwrap();
        assert!(lb <= 2.25 + 1e-9);
        assert!(2.25 - lb <= 1e-3);
        let nominal = p.with_delta(0.0).unwrap();
        assert_relative_eq!(primal_bound(&nominal, &beta, &[0.0]).unwrap(), 1.0);
        assert!(primal_bound(&p, &beta, &[5.0]).is_err());
    }

    #[test]
    fn primal_bound_several_atoms_below_dual() {
        let data = SampleSet::scalar(&[-1.0, 0.3, 1.2], Some(vec![1.0, -1.0, 1.0])).unwrap();
        let p = DroProblem::new(data, CostField::scaled_identity(1, vec![1.0, 2.0, 0.5]).unwrap(), LossSpec::logistic(), 0.2, 3.0).unwrap();
        let beta = DVector::from_vec(vec![0.8]);
        let grid: Vec<f64> = (0..=600).map(|j| -4.0 + 0.0133 * j as f64).collect();
        let lb = primal_bound(&p, &beta, &grid).unwrap();
        let dual = golden_section_min(
            |l| f_delta(&p, &Decision::new(beta.clone(), l), 60).unwrap(),
            1e-3,
            10.0,
            1e-10,
        )
        .value;
        assert!(lb <= dual + 1e-9);
        assert!(dual - lb <= 1e-2);
    }

    #[test]
    fn upper_hull_drops_interior_points() {
        let pts = [(0.0, 0.0), (1.0, 0.2), (2.0, 2.0), (3.0, 2.1)];
        assert_eq!(upper_hull(&pts), vec![(0.0, 0.0), (2.0, 2.0), (3.0, 2.1)]);
    }

    #[test]
    fn grid_project_finds_corner() {
        let region = GridRegion::Cone { k1: 0.5, cap: 2.0, r_beta: 1.0 };
        let p = grid_project(&region, &Decision::from_slice(&[3.0], 5.0), 5);
        assert!((p.beta[0] - 1.0).abs() < 1e-7 && (p.lambda - 2.0).abs() < 1e-7);
    }
}
