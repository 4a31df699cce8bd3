//! Worst-case trajectories at a fixed decision boundary.

use std::path::Path;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{DroError, Result};
use crate::model::{DroProblem, LossKind};
use crate::worstcase::{comparative_statics, Regime, StaticsReport, WorstCaseTransport};

use super::write_csv;

#[derive(Debug, Clone, Serialize)]
pub struct MisclassificationRow {
    pub delta: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceOutcome {
    pub statics: StaticsReport,
    /// Empty for regression losses.
    pub misclassification: Vec<MisclassificationRow>,
}

/// Holds β fixed and sweeps δ. Misclassification counts `y·βᵀX* ≤ 0`,
/// averaged over the mixture branches when the worst case is randomized.
pub fn run_worstcase_trace(
    problem: &DroProblem,
    beta: &DVector<f64>,
    delta_grid: &[f64],
    delta1: Option<f64>,
    tol: f64,
) -> Result<TraceOutcome> {
    if beta.len() != problem.d() {
        return Err(DroError::Dimension {
            expected: problem.d(),
            got: beta.len(),
        });
    }
    if delta_grid.is_empty() || delta_grid.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err(DroError::InvalidConfig("delta grid must be non-empty and non-negative".into()));
    }
    let statics = comparative_statics(problem, beta, delta_grid, delta1, tol)?;
    let classification = matches!(problem.loss().kind(), LossKind::Logistic | LossKind::Hinge);
    let misclassification = if classification {
        statics
            .transports
            .iter()
            .map(|t| MisclassificationRow {
                delta: t.delta,
                rate: misclassification_rate(problem, beta, t),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(TraceOutcome {
        statics,
        misclassification,
    })
}

fn misclassification_rate(problem: &DroProblem, beta: &DVector<f64>, t: &WorstCaseTransport) -> f64 {
    if t.x_star.is_empty() {
        return f64::NAN;
    }
    let wrong = |points: &[DVector<f64>]| {
        points
            .iter()
            .enumerate()
            .filter(|(i, x)| problem.data().label(*i) * beta.dot(x) <= 0.0)
            .count() as f64
            / problem.n() as f64
    };
    match &t.randomization {
        Some(r) => r.p_low * wrong(&r.x_star_low) + (1.0 - r.p_low) * wrong(&t.x_star),
        None => wrong(&t.x_star),
    }
}

impl TraceOutcome {
    /// One row per (δ, atom, branch) with the original point, the transported
    /// point, `‖X* − X‖` and the loss before and after. Unique regimes have a
    /// single branch of weight 1; randomized ones list both with their mixture
    /// weights.
    pub fn write_trajectories(&self, problem: &DroProblem, beta: &DVector<f64>, path: &Path) -> Result<()> {
        let d = problem.d();
        let mut header: Vec<String> = ["delta", "i", "regime", "branch", "weight"].map(String::from).to_vec();
        header.extend((1..=d).map(|j| format!("x_{j}")));
        header.push("g".into());
        header.extend((1..=d).map(|j| format!("x_star_{j}")));
        header.extend(["displacement", "loss_before", "loss_after"].map(String::from));
        let ser = |e: csv::Error| DroError::Serialize(e.to_string());
        let mut w = csv::Writer::from_path(path).map_err(ser)?;
        w.write_record(&header).map_err(ser)?;
        let loss = problem.loss();
        for t in &self.statics.transports {
            let regime = regime_name(t.regime);
            let branches: Vec<(&str, f64, &[f64], &[DVector<f64>])> = match &t.randomization {
                Some(r) => vec![
                    ("low", r.p_low, &r.g_low, &r.x_star_low),
                    ("high", 1.0 - r.p_low, &r.g_high, &t.x_star),
                ],
                None => vec![("single", 1.0, &t.g, &t.x_star)],
            };
            for (branch, weight, gs, xs) in branches {
                for (i, (g, xs)) in gs.iter().zip(xs).enumerate() {
                    let x = problem.data().point(i);
                    let y = problem.data().label(i);
                    let mut rec = vec![t.delta.to_string(), i.to_string(), regime.to_owned(), branch.to_owned(), weight.to_string()];
                    rec.extend(x.iter().map(f64::to_string));
                    rec.push(g.to_string());
                    rec.extend(xs.iter().map(f64::to_string));
                    rec.push((xs - x).norm().to_string());
                    rec.push(loss.value(beta.dot(x), y).to_string());
                    rec.push(loss.value(beta.dot(xs), y).to_string());
                    w.write_record(&rec).map_err(ser)?;
                }
            }
        }
        w.flush().map_err(|e| DroError::io(path, e))
    }

    pub fn write_misclassification(&self, path: &Path) -> Result<()> {
        write_csv(path, &self.misclassification)
    }
}

fn regime_name(r: Regime) -> &'static str {
    match r {
        Regime::Unique => "unique",
        Regime::Randomized => "randomized",
        Regime::Nonexistent => "nonexistent",
        Regime::ConstantLoss => "constant_loss",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::gaussian_classes;
    use crate::model::LossSpec;

    fn outcome() -> (DroProblem, TraceOutcome) {
        let p = gaussian_classes(40, 2, 11, LossSpec::logistic(), 0.0);
        let beta = DVector::from_vec(vec![0.8, 0.6]);
        let grid = [0.0, 0.01, 0.05, 0.1, 0.25, 0.5];
        let out = run_worstcase_trace(&p, &beta, &grid, None, 1e-12).unwrap();
        (p, out)
    }

    #[test]
    fn zero_delta_is_raw_data_and_rates_grow() {
        let (p, out) = outcome();
        let first = &out.statics.transports[0];
        assert_eq!(first.delta, 0.0);
        for (i, x) in first.x_star.iter().enumerate() {
            assert_eq!(x, p.data().point(i));
        }
        assert_eq!(out.statics.monotonicity_violations, 0);
        let rates: Vec<f64> = out.misclassification.iter().map(|r| r.rate).collect();
        assert!(rates.windows(2).all(|w| w[1] >= w[0]), "{rates:?}");
        assert!(rates.last().unwrap() > &rates[0]);
    }

    #[test]
    fn trajectory_csv_has_one_row_per_atom_and_delta() {
        let (p, out) = outcome();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        out.write_trajectories(&p, &DVector::from_vec(vec![0.8, 0.6]), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let header = "delta,i,regime,branch,weight,x_1,x_2,g,x_star_1,x_star_2,displacement,loss_before,loss_after\n";
        assert!(text.starts_with(header));
        assert_eq!(text.lines().count(), 1 + 6 * p.n());
    }

    #[test]
    fn regression_loss_has_no_rates() {
        let data = crate::experiments::synthetic::linear_regression(20, 2, 0.1, 3);
        let p = DroProblem::new(data, crate::model::CostField::identity(2), LossSpec::squared(), 0.0, 2.0).unwrap();
        let out = run_worstcase_trace(&p, &DVector::from_vec(vec![0.5, 0.5]), &[0.0, 0.1], None, 1e-12).unwrap();
        assert!(out.misclassification.is_empty());
        assert!(run_worstcase_trace(&p, &DVector::from_vec(vec![0.5]), &[0.1], None, 1e-12).is_err());
    }
}
