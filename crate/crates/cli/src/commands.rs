use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use ot_dro_core::experiments::portfolio::{write_frontier_csv, PortfolioData};
use ot_dro_core::experiments::{
    run_portfolio_frontier, run_supervised_experiment, run_worstcase_trace, train_dro, write_csv, CostKind, FrontierConfig,
    SupervisedConfig,
};
use ot_dro_core::optimizer::RunTrace;
use ot_dro_core::oracle::suite::check_suite;
use ot_dro_core::regions::{build_constants, estimate_l_bounds};
use ot_dro_core::{DroError, Result};
use serde::Serialize;

use crate::config::Config;

const DEFAULT_DELTA_GRID: [f64; 8] = [0.0, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2, 0.25];

pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| DroError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).map_err(|e| DroError::Serialize(e.to_string()))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| DroError::Io { path, source: e })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

#[derive(Serialize)]
struct TraceRow {
    k: u64,
    f_delta: f64,
    cuts: u64,
    lambda_bar: f64,
    beta_bar_norm: f64,
}

fn trace_rows(trace: &RunTrace) -> Vec<TraceRow> {
    trace
        .checkpoints
        .iter()
        .map(|c| TraceRow {
            k: c.k,
            f_delta: c.f_delta,
            cuts: c.cuts,
            lambda_bar: c.theta_bar.lambda,
            beta_bar_norm: c.theta_bar.beta.norm(),
        })
        .collect()
}

/// `trace.json`, `trace.csv`, and `constants.json` for smooth losses.
pub fn train(cfg: &Config, out: &mut Output) -> Result<()> {
    let problem = cfg.problem()?;
    let run = train_dro(&problem, cfg.schedule()?, &cfg.run_options()?, cfg.eta(), cfg.l_bounds()?)?;
    write_csv(&out.path("trace.csv"), &trace_rows(&run.trace))?;
    if let Some(c) = &run.constants {
        out.json("constants.json", c)?;
    }
    out.json("trace.json", &run)
}

/// `gap.csv` and `compare.json`.
pub fn compare(cfg: &Config, out: &mut Output) -> Result<()> {
    let sup = SupervisedConfig {
        problem: cfg.problem()?,
        schedule: cfg.schedule()?,
        options: cfg.run_options()?,
        eta: cfg.eta(),
        l_bounds: cfg.l_bounds()?,
        reference_iterations: cfg.reference_iterations.unwrap_or(500),
    };
    let outcome = run_supervised_experiment(&sup)?;
    outcome.write_gap_csv(&out.path("gap.csv"))?;
    out.json("compare.json", &outcome)
}

/// Trains first unless `beta` is supplied. Writes `worstcase.csv`,
/// `statics.json` and, for classification losses, `misclassification.csv`.
pub fn worstcase(cfg: &Config, out: &mut Output) -> Result<()> {
    let problem = cfg.problem()?;
    let beta: DVector<f64> = match cfg.beta(problem.d())? {
        Some(b) => b,
        None => {
            let run = train_dro(&problem, cfg.schedule()?, &cfg.run_options()?, cfg.eta(), cfg.l_bounds()?)?;
            run.trace.final_theta_bar.beta
        }
    };
    let grid = cfg.delta_grid.clone().unwrap_or_else(|| DEFAULT_DELTA_GRID.to_vec());
    let trace = run_worstcase_trace(&problem, &beta, &grid, cfg.delta1, cfg.tol())?;
    trace.write_trajectories(&problem, &beta, &out.path("worstcase.csv"))?;
    if !trace.misclassification.is_empty() {
        trace.write_misclassification(&out.path("misclassification.csv"))?;
    }
    out.json("statics.json", &trace.statics)
}

/// `frontier.csv`, one row per (cost kind, ζ, δ).
pub fn frontier(cfg: &Config, out: &mut Output) -> Result<()> {
    let data = match (&cfg.returns_csv, &cfg.vol_csv) {
        (Some(r), Some(v)) => PortfolioData::load(&cfg.resolve(r), &cfg.resolve(v))?,
        (None, None) => PortfolioData::synthetic(
            cfg.portfolio_months.unwrap_or(120),
            cfg.portfolio_assets.unwrap_or(5),
            cfg.seed(),
        )?,
        _ => {
            return Err(DroError::InvalidConfig(
                "portfolio.returns_csv and portfolio.vol_csv go together".into(),
            ))
        }
    };
    let fc = FrontierConfig {
        window_months: cfg.window_months.unwrap_or(60),
        zeta_grid: cfg.zeta_grid.clone().unwrap_or_else(|| vec![0.0, 0.01, 0.02, 0.05, 0.1]),
        delta_grid: cfg.delta_grid.clone().unwrap_or_else(|| vec![0.0, 1e-4, 1e-3]),
        cost_kinds: cfg
            .cost_kinds
            .clone()
            .unwrap_or_else(|| vec![CostKind::Constant, CostKind::ImpliedVolScaled]),
        r_beta: cfg.r_beta.unwrap_or(2.0),
        eta: cfg.eta.unwrap_or(1e-4),
        max_iterations: cfg.portfolio_iterations.unwrap_or(500),
        tol: cfg.tol.unwrap_or(1e-9),
    };
    let points = run_portfolio_frontier(&data, &fc)?;
    write_frontier_csv(&out.path("frontier.csv"), &points)
}

/// `constants.json`; L bounds are estimated unless supplied.
pub fn constants(cfg: &Config, out: &mut Output) -> Result<()> {
    let problem = cfg.problem()?;
    let l = match cfg.l_bounds()? {
        Some(l) => l,
        None => estimate_l_bounds(&problem, 256, 100, cfg.seed())?,
    };
    out.json("constants.json", &build_constants(&problem, l)?)
}

#[derive(Serialize)]
struct CheckReport {
    pass: bool,
    reports: Vec<ot_dro_core::oracle::OracleReport>,
}

/// `check.json`; a failing oracle is a numerical failure after the report
/// is written.
pub fn check(cfg: &Config, out: &mut Output) -> Result<()> {
    let reports = check_suite(cfg.seed())?;
    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.quantity.clone()).collect();
    out.json(
        "check.json",
        &CheckReport {
            pass: failed.is_empty(),
            reports,
        },
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(DroError::Numerical(format!("oracle checks failed: {}", failed.join(", "))))
    }
}
