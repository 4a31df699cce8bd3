//! Problems, losses, cost fields and data.

mod cost;
mod data;
mod loss;

pub use cost::CostField;
pub use data::{load_csv, CsvSchema, SampleSet};
pub use loss::{Affine, Logistic, LossKind, LossSpec, MeanVariance, Piece, QuadraticCosine, Squared};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{DroError, Result};

/// Constants of the local strong-convexity condition: with probability at
/// least `p`, `|ℓ'(βᵀX)| > c1` and `|βᵀX| > c2‖β‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nondegeneracy {
    pub c1: f64,
    pub c2: f64,
    pub p: f64,
}

/// A DRO instance: data, loss, cost field, ambiguity radius and decision ball.
///
/// `delta = 0` is accepted and means the nominal (non-robust) problem.
#[derive(Debug, Clone)]
pub struct DroProblem {
    data: SampleSet,
    cost: CostField,
    loss: LossSpec,
    delta: f64,
    sqrt_delta: f64,
    r_beta: f64,
    nondegeneracy: Option<Nondegeneracy>,
}

impl DroProblem {
    pub fn new(data: SampleSet, cost: CostField, loss: LossSpec, delta: f64, r_beta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(DroError::InvalidConfig(format!("delta must be finite and >= 0, got {delta}")));
        }
        if !(r_beta.is_finite() && r_beta > 0.0) {
            return Err(DroError::InvalidConfig(format!("r_beta must be positive, got {r_beta}")));
        }
        if cost.dim() != data.d() {
            return Err(DroError::Dimension {
                expected: data.d(),
                got: cost.dim(),
            });
        }
        if let Some(m) = cost.sample_count() {
            if m != data.n() {
                return Err(DroError::InvalidConfig(format!(
                    "cost field has {m} entries for {} samples",
                    data.n()
                )));
            }
        }
        let needs_labels = matches!(loss.kind(), LossKind::Logistic | LossKind::Squared | LossKind::Hinge);
        if needs_labels && data.labels().is_none() {
            return Err(DroError::InvalidConfig(format!("{} loss needs labels", loss.kind())));
        }
        let loss = loss.bind_labels(data.labels());
        Ok(Self {
            data,
            cost,
            loss,
            delta,
            sqrt_delta: delta.sqrt(),
            r_beta,
            nondegeneracy: None,
        })
    }

    pub fn with_nondegeneracy(mut self, nd: Nondegeneracy) -> Result<Self> {
        if !(nd.c1 > 0.0 && nd.c2 > 0.0 && nd.p > 0.0 && nd.p < 1.0) {
            return Err(DroError::InvalidConfig(format!(
                "nondegeneracy needs c1, c2 > 0 and p in (0,1), got {nd:?}"
            )));
        }
        self.nondegeneracy = Some(nd);
        Ok(self)
    }

    /// Same problem at another radius.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let mut p = self.clone();
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(DroError::InvalidConfig(format!("delta must be finite and >= 0, got {delta}")));
        }
        p.delta = delta;
        p.sqrt_delta = delta.sqrt();
        Ok(p)
    }

    /// Same data and cost under another loss.
    pub fn with_loss(&self, loss: LossSpec) -> Self {
        let mut p = self.clone();
        p.loss = loss.bind_labels(self.data.labels());
        p
    }

    pub fn data(&self) -> &SampleSet {
        &self.data
    }

    pub fn cost(&self) -> &CostField {
        &self.cost
    }

    pub fn loss(&self) -> &LossSpec {
        &self.loss
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sqrt_delta(&self) -> f64 {
        self.sqrt_delta
    }

    pub fn r_beta(&self) -> f64 {
        self.r_beta
    }

    pub fn nondegeneracy(&self) -> Option<Nondegeneracy> {
        self.nondegeneracy
    }

    pub fn n(&self) -> usize {
        self.data.n()
    }

    pub fn d(&self) -> usize {
        self.data.d()
    }

    /// `a_i = βᵀA(X_i)⁻¹β`.
    pub fn quadratic_form(&self, index: usize, beta: &DVector<f64>) -> f64 {
        self.cost.quadratic_form(index, beta)
    }

    /// `max_i a_i(β)`, the essential supremum under the empirical measure.
    pub fn max_quadratic_form(&self, beta: &DVector<f64>) -> f64 {
        self.cost.max_quadratic_form(self.n(), beta)
    }
}

/// Optimization state `θ = (β, λ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub beta: DVector<f64>,
    pub lambda: f64,
}

impl Decision {
    pub fn new(beta: DVector<f64>, lambda: f64) -> Self {
        Self { beta, lambda }
    }

    pub fn from_slice(beta: &[f64], lambda: f64) -> Self {
        Self::new(DVector::from_column_slice(beta), lambda)
    }

    pub fn zeros(d: usize) -> Self {
        Self::new(DVector::zeros(d), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.beta.len()
    }

    /// Euclidean distance in `R^{d+1}`.
    pub fn distance(&self, other: &Decision) -> f64 {
        ((&self.beta - &other.beta).norm_squared() + (self.lambda - other.lambda).powi(2)).sqrt()
    }

    /// Flattened `(β_1, …, β_d, λ)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.beta.iter().copied().chain(std::iter::once(self.lambda)).collect()
    }

    pub fn from_flat(v: &[f64]) -> Self {
        let (beta, lambda) = v.split_at(v.len() - 1);
        Self::from_slice(beta, lambda[0])
    }
}

impl Serialize for Decision {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("Decision", 2)?;
        st.serialize_field("beta", self.beta.as_slice())?;
        st.serialize_field("lambda", &self.lambda)?;
        st.end()
    }
}
