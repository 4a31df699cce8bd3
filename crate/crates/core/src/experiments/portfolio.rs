//! Rolling-window robust mean-variance backtest.
//!
//! Weights live on the affine budget plane `1ᵀβ = 1`, parametrized as
//! `β = 1/d + N z` with `N` an orthonormal basis of `1⊥`. The target mean μ is
//! a free coordinate of the same descent, so each month is one smooth problem
//! in `(z, μ, λ)` over a paraboloid region that keeps `λ` above the
//! finiteness threshold.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dual_objective::{grad_lrob, solve_inner, ORACLE_CUTS};
use crate::error::{DroError, Result};
use crate::model::{CostField, Decision, DroProblem, LossSpec, SampleSet};
use crate::regions::project_paraboloid;

use super::synthetic::portfolio_series;
use super::write_csv;

pub const MONTHS_PER_YEAR: f64 = 12.0;
pub const MIN_WINDOW: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    /// `A = I`.
    Constant,
    /// `A_i = (V̄/V_i)·I` over the training window.
    ImpliedVolScaled,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierPoint {
    pub zeta: f64,
    pub delta: f64,
    pub cost_kind: CostKind,
    /// Annualized mean of realized monthly returns.
    pub mean_return: f64,
    /// Annualized sample standard deviation.
    pub std_return: f64,
}

/// Aligned monthly returns and volatility levels.
#[derive(Debug, Clone)]
pub struct PortfolioData {
    pub dates: Vec<String>,
    pub returns: Vec<DVector<f64>>,
    pub vols: Vec<f64>,
}

impl PortfolioData {
    pub fn new(dates: Vec<String>, returns: Vec<DVector<f64>>, vols: Vec<f64>) -> Result<Self> {
        if returns.is_empty() {
            return Err(DroError::EmptyData(None));
        }
        if returns.len() != vols.len() || returns.len() != dates.len() {
            return Err(DroError::InvalidConfig(format!(
                "misaligned series: {} return rows, {} volatility rows, {} dates",
                returns.len(),
                vols.len(),
                dates.len()
            )));
        }
        let d = returns[0].len();
        if d < 2 {
            return Err(DroError::InvalidConfig("a portfolio needs at least two assets".into()));
        }
        for (t, r) in returns.iter().enumerate() {
            if r.len() != d {
                return Err(DroError::Dimension { expected: d, got: r.len() });
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(DroError::InvalidConfig(format!("non-finite return at month {t}, asset {j}")));
            }
        }
        if let Some(t) = vols.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(DroError::InvalidConfig(format!("volatility at month {t} must be finite and positive")));
        }
        Ok(Self { dates, returns, vols })
    }

    pub fn synthetic(months: usize, assets: usize, seed: u64) -> Result<Self> {
        let (returns, vols) = portfolio_series(months, assets, seed);
        let dates = (1..=months).map(|m| format!("m{m:04}")).collect();
        Self::new(dates, returns, vols)
    }

    /// Returns CSV: `date,<asset>,...`; volatility CSV: `date,<level>`. Dates
    /// must agree row by row.
    pub fn load(returns_csv: &Path, vol_csv: &Path) -> Result<Self> {
        let (dates, rows) = read_dated(returns_csv)?;
        let (vol_dates, vol_rows) = read_dated(vol_csv)?;
        if let Some(t) = (0..dates.len().min(vol_dates.len())).find(|&t| dates[t] != vol_dates[t]) {
            return Err(DroError::InvalidConfig(format!(
                "misaligned series at row {}: {} vs {}",
                t + 1,
                dates[t],
                vol_dates[t]
            )));
        }
        if vol_rows.iter().any(|r| r.len() != 1) {
            return Err(DroError::InvalidConfig(format!("{} must have exactly one value column", vol_csv.display())));
        }
        let vols = vol_rows.into_iter().map(|r| r[0]).collect();
        Self::new(dates, rows.into_iter().map(DVector::from_vec).collect(), vols)
    }

    pub fn months(&self) -> usize {
        self.returns.len()
    }

    pub fn assets(&self) -> usize {
        self.returns[0].len()
    }
}

fn read_dated(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => DroError::io(path, source),
        other => DroError::Serialize(format!("{other:?}")),
    })?;
    let header = reader.headers().map_err(|e| DroError::Serialize(e.to_string()))?.clone();
    let mut dates = Vec::new();
    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| DroError::Serialize(e.to_string()))?;
        let row = r + 1;
        let mut fields = record.iter();
        dates.push(fields.next().unwrap_or_default().to_owned());
        let values = fields
            .enumerate()
            .map(|(j, s)| {
                let column = header.get(j + 1).unwrap_or("?").to_owned();
                let bad = |message: String| DroError::Data {
                    path: path.to_path_buf(),
                    row,
                    column: column.clone(),
                    message,
                };
                let v: f64 = s.trim().parse().map_err(|_| bad(format!("not a number: {s:?}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad("NaN or infinite value".into()))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(values);
    }
    if rows.is_empty() {
        return Err(DroError::EmptyData(Some(path.to_path_buf())));
    }
    Ok((dates, rows))
}

#[derive(Debug, Clone)]
pub struct FrontierConfig {
    pub window_months: usize,
    pub zeta_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub cost_kinds: Vec<CostKind>,
    pub r_beta: f64,
    /// Margin kept above the finiteness threshold, in standardized units.
    pub eta: f64,
    pub max_iterations: usize,
    pub tol: f64,
}

impl FrontierConfig {
    pub fn validate(&self, data: &PortfolioData) -> Result<()> {
        let invalid = |m: String| Err(DroError::InvalidConfig(m));
        if self.window_months < MIN_WINDOW {
            return invalid(format!("window must be at least {MIN_WINDOW} months, got {}", self.window_months));
        }
        if self.window_months + 2 > data.months() {
            return invalid(format!(
                "window of {} months exceeds the {}-month history (two held-out months are needed)",
                self.window_months,
                data.months()
            ));
        }
        if self.zeta_grid.is_empty() || self.delta_grid.is_empty() || self.cost_kinds.is_empty() {
            return invalid("zeta grid, delta grid and cost kinds must be non-empty".into());
        }
        if self.zeta_grid.iter().any(|z| !z.is_finite()) {
            return invalid("zeta values must be finite".into());
        }
        if self.delta_grid.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return invalid("delta values must be finite and >= 0".into());
        }
        let d = data.assets() as f64;
        if !(self.r_beta.is_finite() && self.r_beta * self.r_beta > 1.0 / d) {
            return invalid(format!("r_beta must exceed 1/sqrt(d) = {}", d.sqrt().recip()));
        }
        if !(self.eta > 0.0 && self.max_iterations > 0 && self.tol > 0.0) {
            return invalid("eta, iterations and tol must be positive".into());
        }
        Ok(())
    }
}

/// Solution of one training window, in the caller's units.
#[derive(Debug, Clone)]
pub struct WindowSolution {
    pub weights: DVector<f64>,
    pub mu: f64,
    /// Multiplier of the standardized problem.
    pub lambda: f64,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Warm-start state carried from month to month.
#[derive(Debug, Clone)]
struct Warm {
    z: DVector<f64>,
    mu: f64,
    lambda: f64,
}

/// Orthonormal basis of `1⊥` from the Householder reflector that sends
/// `1/√d` to `e_1`.
fn budget_basis(d: usize) -> DMatrix<f64> {
    let mut v = DVector::from_element(d, 1.0 / (d as f64).sqrt());
    v[0] -= 1.0;
    let h = DMatrix::identity(d, d) - &v * v.transpose() * (2.0 / v.norm_squared());
    h.columns(1, d - 1).into_owned()
}

struct WindowProblem {
    base: DroProblem,
    zeta: f64,
    basis: DMatrix<f64>,
    center: DVector<f64>,
    q: f64,
    floor: f64,
    radius: f64,
    /// Returns were divided by this before solving.
    scale: f64,
}

struct Eval {
    value: f64,
    gz: DVector<f64>,
    gmu: f64,
    glambda: f64,
}

impl WindowProblem {
    /// Standardizing by the RMS return `s` is exact: with `X' = X/s`,
    /// `μ' = μ/s`, `ζ' = ζ/s` and `δ' = δ/s²` the objective is `s²` times the
    /// original and the weights are unchanged.
    fn new(window: &[DVector<f64>], vols: &[f64], zeta: f64, delta: f64, cost: CostKind, r_beta: f64, eta: f64) -> Result<Self> {
        let d = window[0].len();
        let n = window.len() as f64;
        let ms = window.iter().map(|x| x.norm_squared()).sum::<f64>() / (n * d as f64);
        let scale = if ms > 0.0 { ms.sqrt() } else { 1.0 };
        let points: Vec<DVector<f64>> = window.iter().map(|x| x / scale).collect();
        let field = match cost {
            CostKind::Constant => CostField::identity(d),
            CostKind::ImpliedVolScaled => CostField::implied_vol(d, vols)?,
        };
        let c = field
            .isotropic_factor()
            .ok_or_else(|| DroError::Numerical("portfolio cost field must be isotropic".into()))?;
        let base = DroProblem::new(
            SampleSet::new(points, None)?,
            field,
            LossSpec::mean_variance(0.0, zeta / scale),
            delta / (scale * scale),
            r_beta,
        )?;
        let q = base.sqrt_delta() * c;
        Ok(Self {
            zeta: zeta / scale,
            basis: budget_basis(d),
            center: DVector::from_element(d, 1.0 / d as f64),
            q,
            floor: q / d as f64 + eta,
            radius: (r_beta * r_beta - 1.0 / d as f64).sqrt(),
            scale,
            base,
        })
    }

    fn weights(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.center + &self.basis * z
    }

    fn project(&self, z: &DVector<f64>, lambda: f64) -> (DVector<f64>, f64) {
        let p = project_paraboloid(&Decision::new(z.clone(), lambda), self.q, self.floor, self.radius);
        (p.beta, p.lambda)
    }

    fn eval(&self, z: &DVector<f64>, mu: f64, lambda: f64) -> Result<Eval> {
        let beta = self.weights(z);
        let problem = self.base.with_loss(LossSpec::mean_variance(mu, self.zeta));
        let theta = Decision::new(beta.clone(), lambda);
        let n = problem.n() as f64;
        let mut value = 0.0;
        let mut gbeta = DVector::zeros(beta.len());
        let mut gmu = 0.0;
        let mut glambda = 0.0;
        for i in 0..problem.n() {
            let sol = match solve_inner(&problem, &theta, i, ORACLE_CUTS) {
                Ok(s) => s,
                Err(DroError::Infeasible { .. }) | Err(DroError::UnboundedInterval { .. }) => {
                    return Ok(Eval {
                        value: f64::INFINITY,
                        gz: DVector::zeros(z.len()),
                        gmu: 0.0,
                        glambda: 0.0,
                    })
                }
                Err(e) => return Err(e),
            };
            let g = grad_lrob(&problem, &theta, i, &sol)?;
            value += sol.lrob;
            gbeta += g.d_beta;
            glambda += g.d_lambda;
            gmu -= 2.0 * (beta.dot(&sol.x_tilde) - mu);
        }
        Ok(Eval {
            value: value / n,
            gz: self.basis.transpose() * gbeta / n,
            gmu: gmu / n,
            glambda: glambda / n,
        })
    }

    /// Projected gradient with backtracking, stopped when the gradient
    /// mapping falls below `tol`.
    fn solve(&self, warm: &Warm, max_iterations: usize, tol: f64) -> Result<(Warm, f64, usize, bool)> {
        let (z0, l0) = self.project(&warm.z, warm.lambda);
        let mut x = Warm { z: z0, mu: warm.mu / self.scale, lambda: l0 };
        let mut e = self.eval(&x.z, x.mu, x.lambda)?;
        if !e.value.is_finite() {
            return Err(DroError::Numerical("portfolio start point outside the effective domain".into()));
        }
        let mut t = 1.0;
        for it in 1..=max_iterations {
            let mut accepted = None;
            while t > 1e-16 {
                let (z, lambda) = self.project(&(&x.z - &e.gz * t), x.lambda - t * e.glambda);
                let mu = x.mu - t * e.gmu;
                let dz = &z - &x.z;
                let (dmu, dl) = (mu - x.mu, lambda - x.lambda);
                let sq = dz.norm_squared() + dmu * dmu + dl * dl;
                let trial = self.eval(&z, mu, lambda)?;
                let model = e.value + e.gz.dot(&dz) + e.gmu * dmu + e.glambda * dl + sq / (2.0 * t);
                if trial.value <= model + 1e-15 * e.value.abs() {
                    accepted = Some((Warm { z, mu, lambda }, trial, sq.sqrt() / t));
                    break;
                }
                t *= 0.5;
            }
            let Some((next, trial, mapping)) = accepted else {
                return Ok((self.unscale(x), e.value, it, false));
            };
            x = next;
            e = trial;
            t *= 1.5;
            if mapping <= tol {
                return Ok((self.unscale(x), e.value, it, true));
            }
        }
        Ok((self.unscale(x), e.value, max_iterations, false))
    }

    fn unscale(&self, mut w: Warm) -> Warm {
        w.mu *= self.scale;
        w
    }
}

/// Solves one training window. The reported value is in the caller's units.
#[allow(clippy::too_many_arguments)]
pub fn solve_window(
    window: &[DVector<f64>],
    vols: &[f64],
    zeta: f64,
    delta: f64,
    cost: CostKind,
    r_beta: f64,
    eta: f64,
    max_iterations: usize,
    tol: f64,
) -> Result<WindowSolution> {
    let wp = WindowProblem::new(window, vols, zeta, delta, cost, r_beta, eta)?;
    let warm = Warm {
        z: DVector::zeros(wp.basis.ncols()),
        mu: 0.0,
        lambda: wp.floor,
    };
    let (w, value, iterations, converged) = wp.solve(&warm, max_iterations, tol)?;
    Ok(WindowSolution {
        weights: wp.weights(&w.z),
        mu: w.mu,
        lambda: w.lambda,
        value: value * wp.scale * wp.scale,
        iterations,
        converged,
    })
}

/// Per-cell record of the held weights, for inspection and tests.
#[derive(Debug, Clone)]
pub struct CellHistory {
    pub point: FrontierPoint,
    pub weights: Vec<DVector<f64>>,
    pub realized: Vec<f64>,
    pub unconverged_months: usize,
}

fn run_cell(data: &PortfolioData, cfg: &FrontierConfig, zeta: f64, delta: f64, cost: CostKind) -> Result<CellHistory> {
    let d = data.assets();
    let mut warm = Warm {
        z: DVector::zeros(d - 1),
        mu: 0.0,
        lambda: 0.0,
    };
    let mut weights = Vec::new();
    let mut realized = Vec::new();
    let mut unconverged = 0;
    for t in cfg.window_months..data.months() {
        let span = t - cfg.window_months..t;
        let wp = WindowProblem::new(&data.returns[span.clone()], &data.vols[span], zeta, delta, cost, cfg.r_beta, cfg.eta)?;
        let (w, _, _, converged) = wp.solve(&warm, cfg.max_iterations, cfg.tol)?;
        unconverged += usize::from(!converged);
        let beta = wp.weights(&w.z);
        realized.push(beta.dot(&data.returns[t]));
        weights.push(beta);
        warm = w;
    }
    let (mean, std) = annualize(&realized);
    Ok(CellHistory {
        point: FrontierPoint {
            zeta,
            delta,
            cost_kind: cost,
            mean_return: mean,
            std_return: std,
        },
        weights,
        realized,
        unconverged_months: unconverged,
    })
}

/// `(12·mean, √12·sample std)` of monthly returns.
pub fn annualize(monthly: &[f64]) -> (f64, f64) {
    let n = monthly.len() as f64;
    let mean = monthly.iter().sum::<f64>() / n;
    let var = monthly.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (MONTHS_PER_YEAR * mean, (MONTHS_PER_YEAR * var).sqrt())
}

/// All `(cost_kind, ζ, δ)` cells, ordered by that key.
pub fn run_portfolio_cells(data: &PortfolioData, cfg: &FrontierConfig) -> Result<Vec<CellHistory>> {
    cfg.validate(data)?;
    let mut kinds = cfg.cost_kinds.clone();
    kinds.sort();
    kinds.dedup();
    let keys: Vec<(CostKind, f64, f64)> = kinds
        .iter()
        .flat_map(|&k| cfg.zeta_grid.iter().flat_map(move |&z| cfg.delta_grid.iter().map(move |&dl| (k, z, dl))))
        .collect();
    keys.par_iter().map(|&(k, z, dl)| run_cell(data, cfg, z, dl, k)).collect()
}

pub fn run_portfolio_frontier(data: &PortfolioData, cfg: &FrontierConfig) -> Result<Vec<FrontierPoint>> {
    Ok(run_portfolio_cells(data, cfg)?.into_iter().map(|c| c.point).collect())
}

pub fn write_frontier_csv(path: &Path, points: &[FrontierPoint]) -> Result<()> {
    write_csv(path, points)
}
