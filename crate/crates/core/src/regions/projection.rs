//! Euclidean projections onto 𝕎 and 𝕌_η.
//!
//! Both sets depend on β only through rotation-invariant or quadratic
//! quantities, so most cases reduce to a 2-D problem in `(‖β‖, λ)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::Result;
use crate::model::{Decision, DroProblem};

use super::ConstantsBundle;

/// Result of a projection that may be iterative.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub theta: Decision,
    /// False when computed by alternating projections.
    pub exact: bool,
}

fn with_radius(beta: &DVector<f64>, radius: f64) -> DVector<f64> {
    let norm = beta.norm();
    if norm > 0.0 {
        beta * (radius / norm)
    } else {
        DVector::zeros(beta.len())
    }
}

/// Five-case closed form for the projection of `(r, λ)` onto the triangle
/// `{k1·r ≤ λ ≤ cap}`, `r ≥ 0`.
fn project_cone(r: f64, lambda: f64, k1: f64, cap: f64) -> (f64, f64) {
    if k1 * r <= lambda && lambda <= cap {
        (r, lambda)
    } else if r <= cap / k1 && lambda > cap {
        (r, cap)
    } else if lambda < -r / k1 {
        (0.0, 0.0)
    } else if lambda < (k1 * r).min(cap * (1.0 + 1.0 / (k1 * k1)) - r / k1) {
        let t = (r + k1 * lambda) / (1.0 + k1 * k1);
        (t, k1 * t)
    } else {
        (cap / k1, cap)
    }
}

/// Projection onto `𝕎 = {K1‖β‖ ≤ λ ≤ K2·R_β} ∩ {‖β‖ ≤ R_β}`.
///
/// The cone formula is applied first; if its answer leaves the ball, the
/// ball constraint is active at the true projection, which then sits on the
/// edge `‖β‖ = R_β` at the clamped multiplier.
pub fn project_w(theta: &Decision, consts: &ConstantsBundle, r_beta: f64) -> Decision {
    let r = theta.beta.norm();
    let cap = consts.k2 * r_beta;
    let (mut r_new, mut l_new) = project_cone(r, theta.lambda, consts.k1, cap);
    if r_new > r_beta {
        r_new = r_beta;
        l_new = theta.lambda.clamp(consts.k1 * r_beta, cap);
    }
    Decision::new(with_radius(&theta.beta, r_new), l_new)
}

/// Epigraph `{λ ≥ βᵀQβ + η}` with `Q` stored by its eigendecomposition.
struct Epigraph {
    vectors: DMatrix<f64>,
    values: DVector<f64>,
    eta: f64,
}

impl Epigraph {
    fn new(q: DMatrix<f64>, eta: f64) -> Self {
        let eig = SymmetricEigen::new(q);
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues,
            eta,
        }
    }

    fn level(&self, beta: &DVector<f64>) -> f64 {
        let c = self.vectors.transpose() * beta;
        c.iter().zip(self.values.iter()).map(|(c, q)| q * c * c).sum::<f64>() + self.eta
    }

    /// KKT: `β(μ) = (I + 2μQ)⁻¹b`, `λ = l + μ`, root of
    /// `l + μ − β(μ)ᵀQβ(μ) − η`, which is increasing in μ.
    fn project(&self, theta: &Decision) -> Decision {
        if theta.lambda >= self.level(&theta.beta) {
            return theta.clone();
        }
        let coords = self.vectors.transpose() * &theta.beta;
        let gap = |mu: f64| {
            let quad: f64 = coords
                .iter()
                .zip(self.values.iter())
                .map(|(c, q)| q * (c / (1.0 + 2.0 * mu * q)).powi(2))
                .sum();
            theta.lambda + mu - quad - self.eta
        };
        let (mut lo, mut hi) = (0.0, self.level(&theta.beta) - theta.lambda);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if gap(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mu = hi;
        let scaled = DVector::from_iterator(
            coords.len(),
            coords.iter().zip(self.values.iter()).map(|(c, q)| c / (1.0 + 2.0 * mu * q)),
        );
        Decision::new(&self.vectors * scaled, theta.lambda + mu)
    }
}

fn clip_beta(theta: &Decision, r_beta: f64) -> Decision {
    let r = theta.beta.norm();
    if r <= r_beta {
        theta.clone()
    } else {
        Decision::new(with_radius(&theta.beta, r_beta), theta.lambda)
    }
}

/// Projection onto `𝕌_η = {‖β‖ ≤ R_β, λ ≥ λ_thr(β) + η}`.
///
/// * `κ = 0`: a box, projected coordinatewise.
/// * isotropic cost: a paraboloid in `(‖β‖, λ)`, exact via a 1-D root.
/// * other costs: Dykstra's alternating projections, flagged inexact.
pub fn project_u_eta(theta: &Decision, problem: &DroProblem, eta: f64) -> Result<Projection> {
    let r_beta = problem.r_beta();
    let scale = problem.loss().kappa() * problem.sqrt_delta();
    if scale == 0.0 {
        let beta = clip_beta(theta, r_beta).beta;
        return Ok(Projection {
            theta: Decision::new(beta, theta.lambda.max(eta)),
            exact: true,
        });
    }
    if let Some(c) = problem.cost().isotropic_factor() {
        return Ok(Projection {
            theta: project_paraboloid(theta, scale * c, eta, r_beta),
            exact: true,
        });
    }

    let sets: Vec<Epigraph> = match problem.cost().constant_inverse() {
        Some(inv) => vec![Epigraph::new(inv * scale, eta)],
        None => (0..problem.n())
            .map(|i| Epigraph::new(problem.cost().inverse_at(i) * scale, eta))
            .collect(),
    };
    if sets.len() == 1 {
        let p = sets[0].project(theta);
        if p.beta.norm() <= r_beta {
            return Ok(Projection { theta: p, exact: true });
        }
    }
    Ok(Projection {
        theta: dykstra(theta, &sets, r_beta),
        exact: false,
    })
}

/// Projection onto `{λ ≥ q‖β‖² + floor, ‖β‖ ≤ radius}`.
pub fn project_paraboloid(theta: &Decision, q: f64, floor: f64, radius: f64) -> Decision {
    let d = theta.dim();
    let p = Epigraph::new(DMatrix::identity(d, d) * q, floor).project(theta);
    if p.beta.norm() <= radius {
        return p;
    }
    // ball active at the optimum
    let beta = with_radius(&theta.beta, radius);
    Decision::new(beta, theta.lambda.max(q * radius * radius + floor))
}

fn dykstra(theta: &Decision, sets: &[Epigraph], r_beta: f64) -> Decision {
    let dim = theta.dim() + 1;
    let mut x = theta.to_vec();
    let mut corrections = vec![vec![0.0; dim]; sets.len() + 1];
    for _ in 0..100_000 {
        let before = x.clone();
        for (k, corr) in corrections.iter_mut().enumerate() {
            let shifted: Vec<f64> = x.iter().zip(corr.iter()).map(|(a, b)| a + b).collect();
            let point = Decision::from_flat(&shifted);
            let projected = match sets.get(k) {
                Some(set) => set.project(&point),
                None => clip_beta(&point, r_beta),
            }
            .to_vec();
            for j in 0..dim {
                corr[j] = shifted[j] - projected[j];
            }
            x = projected;
        }
        let moved: f64 = x.iter().zip(&before).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        if moved <= 1e-15 * (1.0 + x.iter().map(|v| v * v).sum::<f64>().sqrt()) {
            break;
        }
    }
    Decision::from_flat(&x)
}
