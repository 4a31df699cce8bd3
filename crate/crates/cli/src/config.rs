//! Flat JSON run configuration.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use ot_dro_core::experiments::synthetic::{class_gaussians, linear_regression};
use ot_dro_core::experiments::CostKind;
use ot_dro_core::model::{load_csv, CsvSchema};
use ot_dro_core::optimizer::{RunOptions, Spacing, StepSchedule};
use ot_dro_core::regions::LBounds;
use ot_dro_core::{CostField, DroError, DroProblem, LossSpec, Result, SampleSet};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    Logistic,
    Squared,
    Hinge,
    QuadraticCosine,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum CostName {
    Identity,
    Constant,
    ImpliedVol,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic,
    Csv,
}

/// Every key is optional; relative paths resolve against the config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub delta: Option<f64>,
    pub r_beta: Option<f64>,
    pub loss: Option<LossName>,
    pub cost: Option<CostName>,
    #[serde(rename = "cost.matrix")]
    pub cost_matrix: Option<Vec<Vec<f64>>>,
    /// One level per sample for `implied_vol`.
    #[serde(rename = "cost.vols")]
    pub cost_vols: Option<Vec<f64>>,
    #[serde(rename = "step.alpha")]
    pub step_alpha: Option<f64>,
    #[serde(rename = "step.tau")]
    pub step_tau: Option<f64>,
    #[serde(rename = "step.xi")]
    pub step_xi: Option<f64>,
    pub eta: Option<f64>,
    pub seed: Option<u64>,
    pub iterations: Option<u64>,
    #[serde(rename = "checkpoints.per_decade")]
    pub per_decade: Option<u32>,
    pub record_timing: Option<bool>,
    #[serde(rename = "l_bounds.lower")]
    pub l_lower: Option<f64>,
    #[serde(rename = "l_bounds.upper")]
    pub l_upper: Option<f64>,
    pub reference_iterations: Option<usize>,

    #[serde(rename = "data.source")]
    pub data_source: Option<DataSource>,
    #[serde(rename = "data.path")]
    pub data_path: Option<PathBuf>,
    #[serde(rename = "data.label")]
    pub data_label: Option<String>,
    #[serde(rename = "data.features")]
    pub data_features: Option<Vec<String>>,
    #[serde(rename = "data.n")]
    pub data_n: Option<usize>,
    #[serde(rename = "data.d")]
    pub data_d: Option<usize>,
    #[serde(rename = "data.separation")]
    pub data_separation: Option<f64>,
    #[serde(rename = "data.noise")]
    pub data_noise: Option<f64>,
    #[serde(rename = "data.seed")]
    pub data_seed: Option<u64>,

    pub beta: Option<Vec<f64>>,
    pub delta_grid: Option<Vec<f64>>,
    pub delta1: Option<f64>,
    pub tol: Option<f64>,

    #[serde(rename = "portfolio.returns_csv")]
    pub returns_csv: Option<PathBuf>,
    #[serde(rename = "portfolio.vol_csv")]
    pub vol_csv: Option<PathBuf>,
    #[serde(rename = "portfolio.months")]
    pub portfolio_months: Option<usize>,
    #[serde(rename = "portfolio.assets")]
    pub portfolio_assets: Option<usize>,
    #[serde(rename = "portfolio.window_months")]
    pub window_months: Option<usize>,
    #[serde(rename = "portfolio.zeta_grid")]
    pub zeta_grid: Option<Vec<f64>>,
    #[serde(rename = "portfolio.cost_kinds")]
    pub cost_kinds: Option<Vec<CostKind>>,
    #[serde(rename = "portfolio.max_iterations")]
    pub portfolio_iterations: Option<usize>,

    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Config {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| DroError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DroError::InvalidConfig(e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(0.01)
    }

    pub fn eta(&self) -> f64 {
        self.eta.unwrap_or(0.1)
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-12)
    }

    pub fn loss_name(&self) -> LossName {
        self.loss.unwrap_or(LossName::Logistic)
    }

    pub fn schedule(&self) -> Result<StepSchedule> {
        StepSchedule::new(self.step_alpha.unwrap_or(1.0), self.step_tau.unwrap_or(0.55))
    }

    pub fn run_options(&self) -> Result<RunOptions> {
        let iterations = self.iterations.unwrap_or(10_000);
        if iterations == 0 {
            return Err(DroError::InvalidConfig("iterations must be positive".into()));
        }
        let xi = self.step_xi.unwrap_or(0.0);
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(DroError::InvalidConfig(format!("step.xi must be >= 0, got {xi}")));
        }
        let mut opts = RunOptions::new(iterations, self.seed())
            .xi(xi)
            .spacing(Spacing::Log {
                per_decade: self.per_decade.unwrap_or(10),
            });
        opts.record_timing = self.record_timing.unwrap_or(false);
        Ok(opts)
    }

    pub fn l_bounds(&self) -> Result<Option<LBounds>> {
        match (self.l_lower, self.l_upper) {
            (Some(lo), Some(hi)) => LBounds::supplied(lo, hi).map(Some),
            (None, None) => Ok(None),
            _ => Err(DroError::InvalidConfig("l_bounds.lower and l_bounds.upper go together".into())),
        }
    }

    fn samples(&self) -> Result<SampleSet> {
        let labeled = self.loss_name() != LossName::QuadraticCosine;
        match self.data_source.unwrap_or(DataSource::Synthetic) {
            DataSource::Csv => {
                let path = self
                    .data_path
                    .as_ref()
                    .ok_or_else(|| DroError::InvalidConfig("data.path is required for csv data".into()))?;
                let schema = CsvSchema {
                    label: self.data_label.clone(),
                    features: self.data_features.clone(),
                };
                load_csv(self.resolve(path), &schema)
            }
            DataSource::Synthetic => {
                let n = self.data_n.unwrap_or(256);
                let d = self.data_d.unwrap_or(2);
                if n == 0 || d == 0 {
                    return Err(DroError::InvalidConfig("data.n and data.d must be positive".into()));
                }
                let seed = self.data_seed.unwrap_or(self.seed());
                Ok(match self.loss_name() {
                    LossName::Squared => linear_regression(n, d, self.data_noise.unwrap_or(0.5), seed),
                    _ if labeled => class_gaussians(n, d, self.data_separation.unwrap_or(1.0), seed),
                    _ => {
                        let s = linear_regression(n, d, 0.0, seed);
                        SampleSet::new(s.points().to_vec(), None)?
                    }
                })
            }
        }
    }

    fn cost_field(&self, d: usize, n: usize) -> Result<CostField> {
        match self.cost.unwrap_or(CostName::Identity) {
            CostName::Identity => Ok(CostField::identity(d)),
            CostName::Constant => {
                let rows = self
                    .cost_matrix
                    .as_ref()
                    .ok_or_else(|| DroError::InvalidConfig("cost.matrix is required for a constant cost".into()))?;
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(DroError::InvalidConfig(format!("cost.matrix must be {d}x{d}")));
                }
                CostField::constant(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
            }
            CostName::ImpliedVol => {
                let vols = self
                    .cost_vols
                    .as_ref()
                    .ok_or_else(|| DroError::InvalidConfig("cost.vols is required for an implied_vol cost".into()))?;
                if vols.len() != n {
                    return Err(DroError::Dimension { expected: n, got: vols.len() });
                }
                CostField::implied_vol(d, vols)
            }
        }
    }

    pub fn problem(&self) -> Result<DroProblem> {
        let data = self.samples()?;
        let loss = match self.loss_name() {
            LossName::Logistic => LossSpec::logistic(),
            LossName::Squared => LossSpec::squared(),
            LossName::Hinge => LossSpec::hinge(),
            LossName::QuadraticCosine => LossSpec::quadratic_cosine(),
        };
        let cost = self.cost_field(data.d(), data.n())?;
        DroProblem::new(data, cost, loss, self.delta(), self.r_beta.unwrap_or(1.0))
    }

    pub fn beta(&self, d: usize) -> Result<Option<DVector<f64>>> {
        match &self.beta {
            None => Ok(None),
            Some(b) if b.len() == d => Ok(Some(DVector::from_column_slice(b))),
            Some(b) => Err(DroError::Dimension { expected: d, got: b.len() }),
        }
    }
}
