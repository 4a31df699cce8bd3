//! Deterministic full-batch solvers used as `f*` references.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dual_objective::{f_delta, grad_f_delta, solve_inner, subgrad_lrob, ORACLE_CUTS};
use crate::error::Result;
use crate::model::{Decision, DroProblem};
use crate::regions::{project_u_eta, project_w, ConstantsBundle};

/// Feasible set of a reference solve.
#[derive(Debug, Clone, Copy)]
pub enum ReferenceRegion<'a> {
    W(&'a ConstantsBundle),
    UEta(f64),
    /// Decision ball with λ pinned to 0 (the nominal problem).
    Ball,
}

impl ReferenceRegion<'_> {
    fn project(&self, problem: &DroProblem, theta: &Decision) -> Result<Decision> {
        Ok(match *self {
            ReferenceRegion::W(c) => project_w(theta, c, problem.r_beta()),
            ReferenceRegion::UEta(eta) => project_u_eta(theta, problem, eta)?.theta,
            ReferenceRegion::Ball => {
                let n = theta.beta.norm();
                let r = problem.r_beta();
                let beta = if n > r { &theta.beta * (r / n) } else { theta.beta.clone() };
                Decision::new(beta, 0.0)
            }
        })
    }
}

/// Projected gradient with backtracking for smooth losses; projected
/// subgradient with `1/√k` steps, best iterate kept, otherwise.
pub fn reference_minimum(
    problem: &DroProblem,
    region: ReferenceRegion<'_>,
    start: &Decision,
    iterations: usize,
) -> Result<(Decision, f64)> {
    let mut x = region.project(problem, start)?;
    let mut fx = f_delta(problem, &x, ORACLE_CUTS)?;
    if problem.loss().is_smooth() {
        let mut t = 1.0;
        for _ in 0..iterations {
            let (gb, gl) = grad_f_delta(problem, &x, ORACLE_CUTS)?;
            let mut accepted = false;
            while t > 1e-20 {
                let trial = region.project(problem, &Decision::new(&x.beta - &gb * t, x.lambda - t * gl))?;
                let ft = f_delta(problem, &trial, ORACLE_CUTS)?;
                let db = &trial.beta - &x.beta;
                let dl = trial.lambda - x.lambda;
                let model = fx + gb.dot(&db) + gl * dl + (db.norm_squared() + dl * dl) / (2.0 * t);
                if ft <= model {
                    let moved = (db.norm_squared() + dl * dl).sqrt();
                    x = trial;
                    fx = ft;
                    accepted = moved > 1e-13 * (1.0 + x.beta.norm() + x.lambda.abs());
                    t *= 1.5;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        return Ok((x, fx));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut best = (x.clone(), fx);
    let scale = 0.5 * (1.0 + problem.r_beta());
    for k in 1..=iterations {
        let mut gb = DVector::zeros(problem.d());
        let mut gl = 0.0;
        for i in 0..problem.n() {
            let inner = solve_inner(problem, &x, i, ORACLE_CUTS)?;
            let g = subgrad_lrob(problem, &x, i, &inner, &mut rng);
            gb += g.d_beta;
            gl += g.d_lambda;
        }
        let n = problem.n() as f64;
        let (gb, gl) = (gb / n, gl / n);
        let norm = (gb.norm_squared() + gl * gl).sqrt().max(1e-12);
        let step = scale / (norm * (k as f64).sqrt());
        x = region.project(problem, &Decision::new(&x.beta - &gb * step, x.lambda - step * gl))?;
        let fx = f_delta(problem, &x, ORACLE_CUTS)?;
        if fx < best.1 {
            best = (x.clone(), fx);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{gaussian_classes, single_atom};
    use crate::model::LossSpec;
    use crate::oracle::grid_min_fdelta;
    use crate::regions::{build_constants, LBounds};

    #[test]
    fn smooth_reference_finds_single_atom_corner() {
        let p = single_atom();
        let c = build_constants(&p, LBounds::supplied(4.0, 4.0).unwrap()).unwrap();
        let (_, f) = reference_minimum(&p, ReferenceRegion::W(&c), &Decision::from_slice(&[1.0], 3.0), 500).unwrap();
        assert!((f - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn hinge_reference_matches_grid() {
        let p = gaussian_classes(16, 2, 3, LossSpec::hinge(), 0.05);
        let (_, f) = reference_minimum(&p, ReferenceRegion::UEta(1e-3), &Decision::from_slice(&[0.0, 0.0], 1.0), 3000).unwrap();
        let (_, grid) = grid_min_fdelta(&p, &[(-1.0, 1.0), (-1.0, 1.0)], (1e-3, 3.0), 21, 5).unwrap();
        assert!(f >= grid - 1e-3 && f - grid <= 2e-2, "{f} vs {grid}");
    }
}
