//! Robust vs non-robust training on the same sample stream.

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem, LossKind};
use crate::optimizer::{sgd_nominal, sgd_nonsmooth, sgd_smooth, RunOptions, RunTrace, StepSchedule};
use crate::regions::{build_constants, estimate_l_bounds, ConstantsBundle, LBounds};

use super::reference::{reference_minimum, ReferenceRegion};
use super::write_csv;

#[derive(Debug, Clone)]
pub struct SupervisedConfig {
    pub problem: DroProblem,
    pub schedule: StepSchedule,
    pub options: RunOptions,
    /// Floor above `λ_thr` for the nonsmooth method.
    pub eta: f64,
    /// Supplied bounds skip the sphere search.
    pub l_bounds: Option<LBounds>,
    pub reference_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SupervisedOutcome {
    pub method: String,
    pub dro: RunTrace,
    pub nominal: RunTrace,
    /// Reference minima from full-batch solves.
    pub dro_reference: f64,
    pub nominal_reference: f64,
    pub constants: Option<ConstantsBundle>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub k: u64,
    pub dro_f: f64,
    pub dro_gap: f64,
    pub nominal_f: f64,
    pub nominal_gap: f64,
}

/// A robust training run with the method picked from the loss.
#[derive(Debug, Clone, Serialize)]
pub struct DroRun {
    pub method: String,
    pub trace: RunTrace,
    pub constants: Option<ConstantsBundle>,
    /// Effective step schedule and averaging after method overrides.
    pub schedule: StepSchedule,
    pub xi: f64,
    pub notes: Vec<String>,
}

/// Smooth SGD on 𝕎 for differentiable losses; subgradient descent on 𝕌_η
/// with `τ = 1/2` and `ξ ≥ 1` for piecewise ones.
pub fn train_dro(
    problem: &DroProblem,
    schedule: StepSchedule,
    options: &RunOptions,
    eta: f64,
    l_bounds: Option<LBounds>,
) -> Result<DroRun> {
    let mut notes = Vec::new();
    if problem.loss().is_smooth() {
        let l = match l_bounds {
            Some(l) => l,
            None => estimate_l_bounds(problem, 256, 100, options.seed)?,
        };
        let consts = build_constants(problem, l)?;
        let trace = sgd_smooth(problem, &consts, schedule, options)?;
        return Ok(DroRun {
            method: "sgd_smooth".into(),
            trace,
            constants: Some(consts),
            schedule,
            xi: options.xi,
            notes,
        });
    }
    let mut schedule = schedule;
    if schedule.tau() != 0.5 {
        notes.push(format!("tau {} replaced by 0.5 for the nonsmooth method", schedule.tau()));
        schedule = StepSchedule::new(schedule.alpha(), 0.5)?;
    }
    let mut options = options.clone();
    if options.xi < 1.0 {
        notes.push(format!("xi {} raised to 1 for the nonsmooth method", options.xi));
        options.xi = 1.0;
    }
    let trace = sgd_nonsmooth(problem, schedule, eta, &options)?;
    Ok(DroRun {
        method: "sgd_nonsmooth".into(),
        trace,
        constants: None,
        schedule,
        xi: options.xi,
        notes,
    })
}

/// Runs [`train_dro`] and plain projected SGD at δ = 0 with the same steps
/// and seed, then the full-batch references for both.
pub fn run_supervised_experiment(cfg: &SupervisedConfig) -> Result<SupervisedOutcome> {
    let problem = &cfg.problem;
    if !matches!(problem.loss().kind(), LossKind::Logistic | LossKind::Squared | LossKind::Hinge) {
        return Err(DroError::InvalidConfig(format!(
            "supervised experiments take logistic, squared or hinge loss, got {}",
            problem.loss().kind()
        )));
    }
    let run = train_dro(problem, cfg.schedule, &cfg.options, cfg.eta, cfg.l_bounds)?;
    let start = Decision::new(DVector::zeros(problem.d()), 1.0);
    let region = match &run.constants {
        Some(c) => ReferenceRegion::W(c),
        None => ReferenceRegion::UEta(cfg.eta),
    };
    let (_, dro_reference) = reference_minimum(problem, region, &start, cfg.reference_iterations)?;
    let nominal = sgd_nominal(problem, cfg.schedule, &cfg.options)?;
    let nominal_problem = problem.with_delta(0.0)?;
    let (_, nominal_reference) =
        reference_minimum(&nominal_problem, ReferenceRegion::Ball, &start, cfg.reference_iterations)?;
    Ok(SupervisedOutcome {
        method: run.method,
        dro: run.trace,
        nominal,
        dro_reference,
        nominal_reference,
        constants: run.constants,
        notes: run.notes,
    })
}

impl SupervisedOutcome {
    /// One row per checkpoint; both arms share checkpoint positions.
    pub fn gap_rows(&self) -> Vec<GapRow> {
        self.dro
            .checkpoints
            .iter()
            .zip(&self.nominal.checkpoints)
            .map(|(d, n)| GapRow {
                k: d.k,
                dro_f: d.f_delta,
                dro_gap: d.f_delta - self.dro_reference,
                nominal_f: n.f_delta,
                nominal_gap: n.f_delta - self.nominal_reference,
            })
            .collect()
    }

    pub fn write_gap_csv(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.gap_rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::gaussian_classes;
    use crate::model::LossSpec;
    use crate::optimizer::Spacing;

    fn config(loss: LossSpec) -> SupervisedConfig {
        SupervisedConfig {
            problem: gaussian_classes(64, 3, 2, loss, 0.01),
            schedule: StepSchedule::new(1.0, 0.55).unwrap(),
            options: RunOptions::new(3000, 7).spacing(Spacing::Log { per_decade: 5 }),
            eta: 1e-3,
            l_bounds: None,
            reference_iterations: 300,
        }
    }

    #[test]
    fn logistic_arms_share_checkpoints() {
        let out = run_supervised_experiment(&config(LossSpec::logistic())).unwrap();
        assert_eq!(out.method, "sgd_smooth");
        let rows = out.gap_rows();
        assert_eq!(rows.len(), out.dro.checkpoints.len());
        assert!(rows.last().unwrap().dro_gap < rows[0].dro_gap);
        assert!(rows.last().unwrap().nominal_gap < rows[0].nominal_gap);
    }

    #[test]
    fn hinge_dispatches_to_nonsmooth() {
        let out = run_supervised_experiment(&config(LossSpec::hinge())).unwrap();
        assert_eq!(out.method, "sgd_nonsmooth");
        assert_eq!(out.notes.len(), 2);
    }

    #[test]
    fn csv_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        run_supervised_experiment(&config(LossSpec::logistic())).unwrap().write_gap_csv(&a).unwrap();
        run_supervised_experiment(&config(LossSpec::logistic())).unwrap().write_gap_csv(&b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
