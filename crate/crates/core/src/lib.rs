//! Optimal-transport distributionally robust optimization with affine
//! decision rules and state-dependent Mahalanobis transport costs.
//!
//! The dual objective `f_δ(β, λ) = E_n[ℓ_rob(β, λ; X)]` is evaluated through a
//! scalar inner maximization per sample ([`dual_objective`]), minimized by
//! projected stochastic gradient schemes ([`optimizer`]) over regions whose
//! constants come from [`regions`], and the adversarial distribution at the
//! optimum is extracted by [`worstcase`].

pub mod dual_objective;
pub mod error;
pub mod experiments;
pub mod model;
pub mod numeric;
pub mod optimizer;
pub mod oracle;
pub mod regions;
pub mod worstcase;

pub use error::{DroError, Result};
pub use model::{CostField, Decision, DroProblem, LossSpec, SampleSet};
