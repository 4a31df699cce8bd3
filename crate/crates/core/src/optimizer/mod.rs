//! Projected stochastic (sub)gradient schemes on `(β, λ)`.

mod diagnostics;
mod lambda;

pub use diagnostics::{rate_diagnostic, rate_diagnostic_mean, RateFit};
pub use lambda::{line_search_outer, solve_lambda_star, BracketEnd, LambdaStar, LineSearchResult};

use std::time::Instant;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dual_objective::{f_delta, grad_lrob, solve_inner, subgrad_lrob, SubgradientSample};
use crate::error::{DroError, Result};
use crate::model::{Decision, DroProblem};
use crate::regions::{lambda_thr, project_u_eta, project_w, ConstantsBundle};

/// Floor on bisection cuts per inner solve.
pub const MIN_CUTS: u32 = 10;
/// Inner cuts used for full `f_δ` evaluations at checkpoints.
const CHECKPOINT_CUTS: u32 = 60;

/// `α_k = α·k^{−τ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepSchedule {
    alpha: f64,
    tau: f64,
}

impl StepSchedule {
    pub fn new(alpha: f64, tau: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DroError::InvalidConfig(format!("step alpha must be positive, got {alpha}")));
        }
        if !(0.5..=1.0).contains(&tau) {
            return Err(DroError::InvalidConfig(format!("step tau must lie in [0.5, 1], got {tau}")));
        }
        Ok(Self { alpha, tau })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn step(&self, k: u64) -> f64 {
        self.alpha * (k as f64).powf(-self.tau)
    }

    /// `ceil(τ·log2 k − log2 α + 2·log2(1+‖x‖))`, at least [`MIN_CUTS`].
    pub fn cuts(&self, k: u64, x_norm: f64) -> u32 {
        let raw = self.tau * (k as f64).log2() - self.alpha.log2() + 2.0 * (1.0 + x_norm).log2();
        (raw.ceil().max(MIN_CUTS as f64) as u32).min(200)
    }
}

/// When to evaluate `f_δ` in full.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    /// Every `⌈iterations/200⌉` steps.
    Linear,
    /// Geometric, this many points per decade.
    Log { per_decade: u32 },
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub iterations: u64,
    pub seed: u64,
    /// Averaging parameter ξ ≥ 0.
    pub xi: f64,
    pub batch: usize,
    pub spacing: Spacing,
    pub record_timing: bool,
    /// Starting point before projection; defaults to `(0, 1)`.
    pub init: Option<Decision>,
}

impl RunOptions {
    pub fn new(iterations: u64, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            xi: 0.0,
            batch: 1,
            spacing: Spacing::Linear,
            record_timing: false,
            init: None,
        }
    }

    pub fn xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn spacing(mut self, spacing: Spacing) -> Self {
        self.spacing = spacing;
        self
    }

    pub fn init(mut self, theta: Decision) -> Self {
        self.init = Some(theta);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(DroError::InvalidConfig("iterations must be positive".into()));
        }
        if !(self.xi >= 0.0 && self.xi.is_finite()) {
            return Err(DroError::InvalidConfig(format!("xi must be >= 0, got {}", self.xi)));
        }
        if self.batch == 0 {
            return Err(DroError::InvalidConfig("batch size must be positive".into()));
        }
        Ok(())
    }

    fn checkpoints(&self) -> Vec<u64> {
        let n = self.iterations;
        let mut ks: Vec<u64> = match self.spacing {
            Spacing::Linear => {
                let every = n.div_ceil(200).max(1);
                (1..=n).filter(|k| k % every == 0).collect()
            }
            Spacing::Log { per_decade } => {
                let per = per_decade.max(1) as f64;
                let top = (n as f64).log10() * per;
                (0..=top.floor() as u64)
                    .map(|j| 10f64.powf(j as f64 / per).round() as u64)
                    .collect()
            }
        };
        ks.push(n);
        ks.sort_unstable();
        ks.dedup();
        ks
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Checkpoint {
    pub k: u64,
    pub theta: Decision,
    pub theta_bar: Decision,
    /// `f_δ(θ̄_k)`.
    pub f_delta: f64,
    /// Cumulative bisection cuts.
    pub cuts: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub method: String,
    pub seed: u64,
    pub iterations: u64,
    pub xi: f64,
    pub checkpoints: Vec<Checkpoint>,
    pub final_theta: Decision,
    pub final_theta_bar: Decision,
    pub total_cuts: u64,
    /// Inner solves that needed the uncertified fallback.
    pub uncertified_inner: u64,
    /// Projections computed iteratively rather than in closed form.
    pub inexact_projections: u64,
    /// Preconditions that were not met; the run still completed.
    pub warnings: Vec<String>,
}

impl RunTrace {
    pub fn final_value(&self) -> f64 {
        self.checkpoints.last().map_or(f64::NAN, |c| c.f_delta)
    }
}

/// Independent streams: sample indices and subgradient tie-breaks.
struct Streams {
    sampling: ChaCha8Rng,
    ties: ChaCha8Rng,
}

impl Streams {
    fn new(seed: u64) -> Self {
        let mut ties = ChaCha8Rng::seed_from_u64(seed);
        ties.set_stream(1);
        Self {
            sampling: ChaCha8Rng::seed_from_u64(seed),
            ties,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Oracle {
    Gradient,
    Subgradient,
}

/// One draw of the stochastic (sub)gradient at `θ`, averaged over the batch.
fn stochastic_gradient(
    problem: &DroProblem,
    theta: &Decision,
    k: u64,
    schedule: &StepSchedule,
    batch: usize,
    oracle: Oracle,
    streams: &mut Streams,
    tally: &mut (u64, u64),
) -> Result<SubgradientSample> {
    let mut d_beta = DVector::zeros(problem.d());
    let mut d_lambda = 0.0;
    let mut lprime = 0.0;
    for _ in 0..batch {
        let i = streams.sampling.random_range(0..problem.n());
        let cuts = schedule.cuts(k, problem.data().point(i).norm());
        let inner = solve_inner(problem, theta, i, cuts)?;
        tally.0 += u64::from(inner.cuts_used);
        if !inner.certified {
            tally.1 += 1;
        }
        let g = match oracle {
            Oracle::Gradient => grad_lrob(problem, theta, i, &inner)?,
            Oracle::Subgradient => subgrad_lrob(problem, theta, i, &inner, &mut streams.ties),
        };
        d_beta += g.d_beta;
        d_lambda += g.d_lambda;
        lprime += g.lprime_choice;
    }
    let b = batch as f64;
    Ok(SubgradientSample {
        d_beta: d_beta / b,
        d_lambda: d_lambda / b,
        lprime_choice: lprime / b,
    })
}

/// Feasible set of a run, with its projection and membership test.
trait Region {
    fn project(&self, theta: &Decision) -> Result<(Decision, bool)>;
    fn contains(&self, theta: &Decision) -> bool;
}

struct WRegion<'a> {
    consts: &'a ConstantsBundle,
    r_beta: f64,
}

impl Region for WRegion<'_> {
    fn project(&self, theta: &Decision) -> Result<(Decision, bool)> {
        Ok((project_w(theta, self.consts, self.r_beta), true))
    }

    fn contains(&self, theta: &Decision) -> bool {
        self.consts.in_w(theta, 1e-12 * (1.0 + self.consts.k2 * self.r_beta))
    }
}

struct UEtaRegion<'a> {
    problem: &'a DroProblem,
    eta: f64,
}

impl Region for UEtaRegion<'_> {
    fn project(&self, theta: &Decision) -> Result<(Decision, bool)> {
        let p = project_u_eta(theta, self.problem, self.eta)?;
        Ok((p.theta, p.exact))
    }

    fn contains(&self, theta: &Decision) -> bool {
        let tol = 1e-9 * (1.0 + theta.lambda.abs());
        theta.beta.norm() <= self.problem.r_beta() * (1.0 + 1e-12)
            && theta.lambda >= lambda_thr(self.problem, &theta.beta) + self.eta - tol
    }
}

/// `‖β‖ ≤ radius`, λ held at a fixed value.
struct BallRegion {
    radius: f64,
    lambda: f64,
}

impl Region for BallRegion {
    fn project(&self, theta: &Decision) -> Result<(Decision, bool)> {
        let norm = theta.beta.norm();
        let beta = if norm > self.radius {
            &theta.beta * (self.radius / norm)
        } else {
            theta.beta.clone()
        };
        Ok((Decision::new(beta, self.lambda), true))
    }

    fn contains(&self, theta: &Decision) -> bool {
        theta.beta.norm() <= self.radius * (1.0 + 1e-12) && theta.lambda == self.lambda
    }
}

/// Step sizes for β and λ at iteration k.
type Steps<'a> = dyn Fn(u64) -> (f64, f64) + 'a;

struct Engine<'a> {
    method: &'static str,
    problem: &'a DroProblem,
    schedule: StepSchedule,
    steps: &'a Steps<'a>,
    region: &'a dyn Region,
    oracle: Oracle,
    warnings: Vec<String>,
}

impl Engine<'_> {
    fn run(self, opts: &RunOptions) -> Result<RunTrace> {
        opts.validate()?;
        let problem = self.problem;
        let mut streams = Streams::new(opts.seed);
        let start = opts.init.clone().unwrap_or_else(|| Decision::new(DVector::zeros(problem.d()), 1.0));
        let (mut theta, _) = self.region.project(&start)?;
        let mut theta_bar = theta.clone();
        let mut tally = (0u64, 0u64);
        let mut inexact = 0u64;
        let marks = opts.checkpoints();
        let mut next_mark = marks.iter().peekable();
        let mut checkpoints = Vec::with_capacity(marks.len());
        let clock = Instant::now();

        for k in 1..=opts.iterations {
            let g = stochastic_gradient(problem, &theta, k, &self.schedule, opts.batch, self.oracle, &mut streams, &mut tally)?;
            let (ab, al) = (self.steps)(k);
            let stepped = Decision::new(&theta.beta - &g.d_beta * ab, theta.lambda - al * g.d_lambda);
            let (next, exact) = self.region.project(&stepped)?;
            if !exact {
                inexact += 1;
            } else if !self.region.contains(&next) {
                return Err(DroError::Numerical(format!(
                    "{} iterate {k} left its projection region: {:?}",
                    self.method,
                    next.to_vec()
                )));
            }
            theta = next;
            let w = (opts.xi + 1.0) / (k as f64 + opts.xi);
            theta_bar = Decision::new(
                &theta_bar.beta * (1.0 - w) + &theta.beta * w,
                (1.0 - w) * theta_bar.lambda + w * theta.lambda,
            );
            if next_mark.peek() == Some(&&k) {
                next_mark.next();
                checkpoints.push(Checkpoint {
                    k,
                    theta: theta.clone(),
                    theta_bar: theta_bar.clone(),
                    f_delta: f_delta(problem, &theta_bar, CHECKPOINT_CUTS)?,
                    cuts: tally.0,
                    elapsed_ms: opts.record_timing.then(|| clock.elapsed().as_millis() as u64),
                });
            }
        }
        Ok(RunTrace {
            method: self.method.to_owned(),
            seed: opts.seed,
            iterations: opts.iterations,
            xi: opts.xi,
            checkpoints,
            final_theta: theta,
            final_theta_bar: theta_bar,
            total_cuts: tally.0,
            uncertified_inner: tally.1,
            inexact_projections: inexact,
            warnings: self.warnings,
        })
    }
}

fn smooth_warnings(problem: &DroProblem, consts: &ConstantsBundle) -> Result<Vec<String>> {
    if !problem.loss().is_smooth() {
        return Err(DroError::NonsmoothLoss(problem.loss().kind().to_string()));
    }
    let mut warnings = Vec::new();
    if !consts.smooth_regime {
        warnings.push(format!(
            "delta = {} is not below delta0 = {}; smoothness is not guaranteed",
            problem.delta(),
            consts.delta0
        ));
    }
    Ok(warnings)
}

/// Projected SGD onto 𝕎 with polynomial-decay averaging.
pub fn sgd_smooth(problem: &DroProblem, consts: &ConstantsBundle, schedule: StepSchedule, opts: &RunOptions) -> Result<RunTrace> {
    let warnings = smooth_warnings(problem, consts)?;
    let steps = |k: u64| (schedule.step(k), schedule.step(k));
    let region = WRegion {
        consts,
        r_beta: problem.r_beta(),
    };
    Engine {
        method: "sgd_smooth",
        problem,
        schedule,
        steps: &steps,
        region: &region,
        oracle: Oracle::Gradient,
        warnings,
    }
    .run(opts)
}

/// Projected stochastic subgradient descent onto 𝕌_η. Requires `τ = 1/2`
/// and `ξ ≥ 1`.
pub fn sgd_nonsmooth(problem: &DroProblem, schedule: StepSchedule, eta: f64, opts: &RunOptions) -> Result<RunTrace> {
    if schedule.tau() != 0.5 {
        return Err(DroError::InvalidConfig(format!("nonsmooth SGD needs tau = 0.5, got {}", schedule.tau())));
    }
    if !(eta > 0.0) {
        return Err(DroError::InvalidConfig(format!("eta must be positive, got {eta}")));
    }
    if opts.xi < 1.0 {
        return Err(DroError::InvalidConfig(format!("nonsmooth SGD needs xi >= 1, got {}", opts.xi)));
    }
    let steps = |k: u64| (schedule.step(k), schedule.step(k));
    let region = UEtaRegion { problem, eta };
    Engine {
        method: "sgd_nonsmooth",
        problem,
        schedule,
        steps: &steps,
        region: &region,
        oracle: Oracle::Subgradient,
        warnings: Vec::new(),
    }
    .run(opts)
}

/// Separate step sizes for β and λ, jointly projected onto 𝕎, with plain
/// running-mean averaging.
pub fn sgd_two_timescale(
    problem: &DroProblem,
    consts: &ConstantsBundle,
    beta_schedule: StepSchedule,
    lambda_schedule: StepSchedule,
    opts: &RunOptions,
) -> Result<RunTrace> {
    let open = |t: f64| t > 0.5 && t < 1.0;
    if !(open(beta_schedule.tau()) && open(lambda_schedule.tau())) {
        return Err(DroError::InvalidConfig("two-timescale exponents must lie in (0.5, 1)".into()));
    }
    if beta_schedule.tau() <= lambda_schedule.tau() {
        return Err(DroError::InvalidConfig(format!(
            "beta steps must decay faster than lambda steps (tau_beta = {} <= tau_lambda = {})",
            beta_schedule.tau(),
            lambda_schedule.tau()
        )));
    }
    let warnings = smooth_warnings(problem, consts)?;
    let steps = |k: u64| (beta_schedule.step(k), lambda_schedule.step(k));
    let region = WRegion {
        consts,
        r_beta: problem.r_beta(),
    };
    let opts = RunOptions { xi: 0.0, ..opts.clone() };
    Engine {
        method: "sgd_two_timescale",
        problem,
        schedule: beta_schedule,
        steps: &steps,
        region: &region,
        oracle: Oracle::Gradient,
        warnings,
    }
    .run(&opts)
}

/// SGD over β alone at fixed λ, on the ball `‖β‖ ≤ radius`.
pub fn sgd_beta_only(
    problem: &DroProblem,
    lambda: f64,
    radius: f64,
    schedule: StepSchedule,
    opts: &RunOptions,
) -> Result<RunTrace> {
    let steps = |k: u64| (schedule.step(k), 0.0);
    let region = BallRegion { radius, lambda };
    let oracle = if problem.loss().is_smooth() {
        Oracle::Gradient
    } else {
        Oracle::Subgradient
    };
    Engine {
        method: "sgd_beta_only",
        problem,
        schedule,
        steps: &steps,
        region: &region,
        oracle,
        warnings: Vec::new(),
    }
    .run(opts)
}

/// The non-robust arm: projected SGD on `E_n[ℓ(βᵀX)]` over the decision
/// ball, drawing the same sample stream as the robust run with this seed.
pub fn sgd_nominal(problem: &DroProblem, schedule: StepSchedule, opts: &RunOptions) -> Result<RunTrace> {
    let nominal = problem.with_delta(0.0)?;
    let steps = |k: u64| (schedule.step(k), 0.0);
    let region = BallRegion {
        radius: problem.r_beta(),
        lambda: 0.0,
    };
    let opts = RunOptions {
        init: opts.init.as_ref().map(|t| Decision::new(t.beta.clone(), 0.0)),
        ..opts.clone()
    };
    Engine {
        method: "sgd_nominal",
        problem: &nominal,
        schedule,
        steps: &steps,
        region: &region,
        oracle: Oracle::Subgradient,
        warnings: Vec::new(),
    }
    .run(&opts)
}
