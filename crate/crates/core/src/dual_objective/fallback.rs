//! Grid + Newton search for the inner maximum when `F` may be nonconcave in γ.

use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem, Piece};

use super::{transported, Geometry, InnerSolution};

/// Half-width `Γ` of an interval `[−Γ, Γ]` holding every maximizer of one
/// piece of `F`.
///
/// Uses the growth bound `ℓ_p(u) ≤ C_ε + (κ+ε)u²` to get
/// `F(γ) ≤ K + λ√δ − cγ²` with `c > 0` whenever `λ > κ√δa`, and compares
/// with `F(0)`.
pub fn compact_half_width(problem: &DroProblem, theta: &Decision, index: usize, piece: usize) -> Result<f64> {
    let geo = Geometry::new(problem, &theta.beta, index);
    half_width(problem, theta.lambda, &geo, problem.loss().pieces()[piece].as_ref())
}

fn half_width(problem: &DroProblem, lambda: f64, geo: &Geometry, piece: &dyn Piece) -> Result<f64> {
    if geo.s == 0.0 {
        return Ok(0.0);
    }
    let kappa = problem.loss().kappa();
    let excess = lambda - kappa * geo.s;
    if !(excess > 0.0) {
        return Err(DroError::UnboundedInterval { lambda });
    }
    // split the excess: (κ+ε)(1+ρ) = κ + e, leaving half of it as curvature
    let e = excess / (2.0 * geo.s);
    let eps = 0.5 * e;
    let rho = 0.5 * e / (kappa + 0.5 * e);
    let c = 0.5 * geo.s * excess;
    let k = piece.growth_offset(eps, geo.y) + (kappa + eps) * (1.0 + 1.0 / rho) * geo.u0 * geo.u0;
    let slack = (k - piece.value(geo.u0, geo.y)).max(0.0);
    Ok((slack / c).sqrt() * (1.0 + 1e-9) + 1e-12)
}

/// Local maxima of one piece found by grid scan plus safeguarded Newton.
fn piece_maxima(
    problem: &DroProblem,
    lambda: f64,
    geo: &Geometry,
    piece: &dyn Piece,
    grid_points: usize,
    restarts: usize,
) -> Result<Vec<(f64, f64)>> {
    let sd = problem.sqrt_delta();
    let width = half_width(problem, lambda, geo, piece)?;
    let value = |g: f64| geo.piece_value(piece, lambda, sd, g);
    if width == 0.0 {
        return Ok(vec![(0.0, value(0.0))]);
    }
    let n = grid_points.max(1);
    let (grid, spacing): (Vec<f64>, f64) = if n == 1 {
        (vec![0.0], width)
    } else {
        let h = 2.0 * width / (n - 1) as f64;
        ((0..n).map(|j| -width + j as f64 * h).collect(), h)
    };
    let values: Vec<f64> = grid.iter().map(|&g| value(g)).collect();
    let mut candidates: Vec<usize> = (0..grid.len())
        .filter(|&j| {
            let left = j == 0 || values[j] >= values[j - 1];
            let right = j + 1 == grid.len() || values[j] >= values[j + 1];
            left && right
        })
        .collect();
    candidates.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    candidates.truncate(restarts.max(1));

    let maxima = candidates
        .into_iter()
        .map(|j| {
            let lo = (grid[j] - spacing).max(-width);
            let hi = (grid[j] + spacing).min(width);
            let polished = newton_polish(geo, piece, lambda, lo, hi, grid[j]);
            let pv = value(polished);
            if pv >= values[j] {
                (polished, pv)
            } else {
                (grid[j], values[j])
            }
        })
        .collect();
    Ok(maxima)
}

/// Newton on `F'` with bisection safeguard, inside `[lo, hi]`. Returns `start`
/// when the bracket does not straddle a local maximum.
fn newton_polish(geo: &Geometry, piece: &dyn Piece, lambda: f64, lo: f64, hi: f64, start: f64) -> f64 {
    let slope = |g: f64| geo.piece_slope(piece, lambda, g);
    let (mut lo, mut hi) = (lo, hi);
    if !(slope(lo) >= 0.0 && slope(hi) <= 0.0) {
        return start;
    }
    let mut x = start.clamp(lo, hi);
    for _ in 0..200 {
        let f = slope(x);
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let df = geo.piece_slope_deriv(piece, lambda, x);
        let newton = x - f / df;
        let next = if df < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0);
        x = next;
        if done {
            break;
        }
    }
    x
}

/// Best local maximum of `F` from a grid over the compact interval followed
/// by Newton polishing of the best `newton_restarts` grid candidates.
/// The result is not certified.
pub fn fallback_maximize(
    problem: &DroProblem,
    theta: &Decision,
    index: usize,
    grid_points: usize,
    newton_restarts: usize,
) -> Result<InnerSolution> {
    let set = maximizer_set(problem, theta, index, grid_points, newton_restarts, 0.0)?;
    Ok(set.best)
}

/// Global maximizers found by the fallback search.
#[derive(Debug, Clone)]
pub struct MaximizerSet {
    pub best: InnerSolution,
    /// Smallest and largest γ whose value is within tolerance of the best.
    pub g_min: f64,
    pub g_max: f64,
}

/// Like [`fallback_maximize`], also reporting the extreme maximizers whose
/// value lies within `rel_tol·(1+|best|)` of the best.
pub fn maximizer_set(
    problem: &DroProblem,
    theta: &Decision,
    index: usize,
    grid_points: usize,
    newton_restarts: usize,
    rel_tol: f64,
) -> Result<MaximizerSet> {
    let geo = Geometry::new(problem, &theta.beta, index);
    let lambda = theta.lambda;
    if geo.s != 0.0 && !(lambda > problem.loss().kappa() * geo.s && lambda > 0.0) {
        return Err(DroError::UnboundedInterval { lambda });
    }
    let mut found: Vec<(usize, f64, f64)> = Vec::new();
    for (k, p) in problem.loss().pieces().iter().enumerate() {
        for (g, v) in piece_maxima(problem, lambda, &geo, p.as_ref(), grid_points, newton_restarts)? {
            found.push((k, g, v));
        }
    }
    let &(k, g, v) = found
        .iter()
        .max_by(|a, b| a.2.total_cmp(&b.2))
        .expect("at least one candidate");
    let cutoff = v - rel_tol * (1.0 + v.abs());
    let ties = found.iter().filter(|c| c.2 >= cutoff).map(|c| c.1);
    let g_min = ties.clone().fold(f64::INFINITY, f64::min);
    let g_max = ties.fold(f64::NEG_INFINITY, f64::max);
    let piece = problem.loss().pieces()[k].as_ref();
    let best = InnerSolution {
        g,
        lrob: v,
        x_tilde: transported(problem, index, &geo, g),
        residual: if geo.s == 0.0 { 0.0 } else { geo.piece_slope(piece, lambda, g).abs() },
        cuts_used: 0,
        certified: false,
        piece: k,
    };
    Ok(MaximizerSet { best, g_min, g_max })
}
