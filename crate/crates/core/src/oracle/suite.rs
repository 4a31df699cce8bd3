//! The oracle checks bundled for the `check` command, at sizes that finish
//! in seconds.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{fd_gradient, grid_project, primal_bound, GridRegion, OracleReport};
use crate::dual_objective::{grad_f_delta, inner_maximize, squared_loss_lrob_closed_form, ORACLE_CUTS};
use crate::error::Result;
use crate::experiments::synthetic::class_gaussians;
use crate::model::{CostField, Decision, DroProblem, LossSpec, SampleSet};
use crate::regions::{build_constants, lambda_thr, project_w, LBounds};
use crate::worstcase::worst_case;

/// Random SPD matrix with eigenvalues in `[0.5, 2]`.
pub fn random_spd(d: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let eig = DMatrix::from_diagonal(&DVector::from_fn(d, |_, _| rng.random_range(0.5..2.0)));
    let m = &q * eig * q.transpose();
    (&m + m.transpose()) * 0.5
}

/// Squared-loss single-atom instance with `λ` strictly above the threshold.
pub fn random_squared_instance(rng: &mut impl Rng) -> Result<(DroProblem, Decision)> {
    let d = rng.random_range(1..=4);
    let x = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
    let y = rng.random_range(-2.0..2.0);
    let cost = CostField::constant(random_spd(d, rng))?;
    let delta = rng.random_range(0.01..1.0);
    let p = DroProblem::new(SampleSet::new(vec![x], Some(vec![y]))?, cost, LossSpec::squared(), delta, 5.0)?;
    let beta = DVector::from_fn(d, |_, _| rng.random_range(-1.5..1.5));
    let lambda = lambda_thr(&p, &beta) + rng.random_range(0.01..2.0);
    Ok((p, Decision::new(beta, lambda)))
}

pub fn check_suite(seed: u64) -> Result<Vec<OracleReport>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();

    let mut worst = 0.0_f64;
    for _ in 0..200 {
        let (p, t) = random_squared_instance(&mut rng)?;
        let fast = inner_maximize(&p, &t, 0, ORACLE_CUTS)?.lrob;
        worst = worst.max((fast - squared_loss_lrob_closed_form(&p, &t, 0)?).abs());
    }
    reports.push(OracleReport::absolute("squared_closed_form_max_error", 0.0, worst, 1e-8).with_param("instances", 200.0));

    let logistic = DroProblem::new(class_gaussians(30, 3, 1.0, seed), CostField::identity(3), LossSpec::logistic(), 0.05, 1.0)?;
    let consts = build_constants(&logistic, LBounds::supplied(0.05, 1.0)?)?;
    let mut worst_rel = 0.0_f64;
    for _ in 0..10 {
        let raw = Decision::new(
            DVector::from_fn(3, |_, _| rng.random_range(-1.0..1.0)),
            rng.random_range(0.0..consts.k2 * logistic.r_beta()),
        );
        let theta = project_w(&raw, &consts, logistic.r_beta());
        let (gb, gl) = grad_f_delta(&logistic, &theta, ORACLE_CUTS)?;
        let (fb, fl) = fd_gradient(&logistic, &theta, 1e-5 * (1.0 + theta.to_vec().iter().map(|v| v * v).sum::<f64>().sqrt()))?;
        let diff = ((&gb - &fb).norm_squared() + (gl - fl).powi(2)).sqrt();
        let scale = (fb.norm_squared() + fl * fl).sqrt().max(1e-12);
        worst_rel = worst_rel.max(diff / scale);
    }
    reports.push(OracleReport::absolute("logistic_gradient_max_rel_error", 0.0, worst_rel, 1e-5).with_param("points", 10.0));

    let atom = DroProblem::new(SampleSet::scalar(&[0.0], Some(vec![1.0]))?, CostField::identity(1), LossSpec::squared(), 0.25, 2.0)?;
    let beta1 = DVector::from_vec(vec![1.0]);
    let wc = worst_case(&atom, &beta1, 1e-13)?;
    reports.push(OracleReport::absolute("single_atom_lambda_star", 1.5, wc.lambda_star, 1e-6));
    reports.push(OracleReport::absolute("single_atom_value", 2.25, wc.dual_value, 1e-6));
    reports.push(OracleReport::absolute("single_atom_x_star", -0.5, wc.x_star[0][0], 1e-6));
    let support: Vec<f64> = (0..=400).map(|j| -2.0 + 0.01 * j as f64).collect();
    let lb = primal_bound(&atom, &beta1, &support)?;
    reports.push(OracleReport::upper_bound("single_atom_weak_duality", wc.dual_value, lb, 1e-9));
    reports.push(OracleReport::absolute("single_atom_duality_gap", wc.dual_value, lb, 1e-3));

    let small = logistic.with_delta(0.01)?;
    let beta = DVector::from_vec(vec![0.6, -0.3, 0.5]);
    let wc = worst_case(&small, &beta, 1e-13)?;
    reports.push(OracleReport::absolute("logistic_budget", small.delta(), wc.budget, 1e-6 * small.delta()));
    reports.push(OracleReport::absolute("logistic_complementary_slackness", wc.dual_value, wc.primal_value, 1e-6));

    let region_consts = build_constants(&atom, LBounds::supplied(1.0, 4.0)?)?;
    let region = GridRegion::Cone {
        k1: region_consts.k1,
        cap: region_consts.k2 * atom.r_beta(),
        r_beta: atom.r_beta(),
    };
    let mut worst_proj = 0.0_f64;
    for _ in 0..20 {
        let theta = Decision::from_slice(&[rng.random_range(-4.0..4.0)], rng.random_range(-2.0..8.0));
        let fast = project_w(&theta, &region_consts, atom.r_beta());
        worst_proj = worst_proj.max(fast.distance(&grid_project(&region, &theta, 6)));
    }
    reports.push(OracleReport::absolute("projection_w_grid_max_error", 0.0, worst_proj, 1e-6).with_param("points", 20.0));
    Ok(reports)
}
