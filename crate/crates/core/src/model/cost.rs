//! State-dependent Mahalanobis transport costs `c(x, x') = (x'−x)ᵀA(x)(x'−x)`.
//!
//! Only the matrices at the sample points matter, since the baseline
//! distribution is the empirical measure.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{DroError, Result};

/// Tolerance for the spectral-bound check on stored matrices.
const SPECTRAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Shape {
    Identity,
    Constant {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
    },
    /// `A_i = s_i·I`.
    ScaledIdentity { scales: Vec<f64> },
    /// One matrix per sample, from a user callback.
    PerSample {
        matrices: Vec<DMatrix<f64>>,
        inverses: Vec<DMatrix<f64>>,
    },
}

#[derive(Debug, Clone)]
pub struct CostField {
    dim: usize,
    shape: Shape,
    rho_min: f64,
    rho_max: f64,
}

impl CostField {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            shape: Shape::Identity,
            rho_min: 1.0,
            rho_max: 1.0,
        }
    }

    /// Same SPD matrix at every point; spectral bounds from its eigenvalues.
    pub fn constant(matrix: DMatrix<f64>) -> Result<Self> {
        let (lo, hi) = spectrum(&matrix)?;
        let inverse = matrix
            .clone()
            .cholesky()
            .ok_or_else(|| DroError::NotPositiveDefinite("Cholesky factorization failed".into()))?
            .inverse();
        Ok(Self {
            dim: matrix.nrows(),
            shape: Shape::Constant { matrix, inverse },
            rho_min: lo,
            rho_max: hi,
        })
    }

    /// `A_i = (V̄/V_i)·I` with `V̄` the mean volatility: cheap to move
    /// samples observed in volatile periods.
    pub fn implied_vol(dim: usize, vols: &[f64]) -> Result<Self> {
        if vols.is_empty() {
            return Err(DroError::EmptyData(None));
        }
        if let Some(v) = vols.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(DroError::InvalidConfig(format!(
                "volatilities must be finite and positive, got {v}"
            )));
        }
        // equal levels must give scale exactly 1, which summation rounding can miss
        let flat = vols.iter().all(|v| *v == vols[0]);
        let mean = if flat { vols[0] } else { vols.iter().sum::<f64>() / vols.len() as f64 };
        let scales: Vec<f64> = vols.iter().map(|v| mean / v).collect();
        Self::scaled_identity(dim, scales)
    }

    pub fn scaled_identity(dim: usize, scales: Vec<f64>) -> Result<Self> {
        if scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(DroError::NotPositiveDefinite("scale factors must be positive".into()));
        }
        let rho_min = scales.iter().copied().fold(f64::INFINITY, f64::min);
        let rho_max = scales.iter().copied().fold(0.0, f64::max);
        Ok(Self {
            dim,
            shape: Shape::ScaledIdentity { scales },
            rho_min,
            rho_max,
        })
    }

    /// General `A(x)` evaluated at each sample point. The caller supplies the
    /// spectral bounds; every matrix is checked against them.
    pub fn from_callback<F>(points: &[DVector<f64>], rho_min: f64, rho_max: f64, field: F) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> DMatrix<f64>,
    {
        if !(rho_min > 0.0 && rho_max >= rho_min) {
            return Err(DroError::InvalidConfig(format!(
                "need 0 < rho_min <= rho_max, got {rho_min}, {rho_max}"
            )));
        }
        let dim = points.first().map(|p| p.len()).ok_or(DroError::EmptyData(None))?;
        let mut matrices = Vec::with_capacity(points.len());
        let mut inverses = Vec::with_capacity(points.len());
        for (i, x) in points.iter().enumerate() {
            let a = field(x);
            if a.nrows() != dim || a.ncols() != dim {
                return Err(DroError::Dimension {
                    expected: dim,
                    got: a.nrows(),
                });
            }
            let (lo, hi) = spectrum(&a)?;
            if lo < rho_min - SPECTRAL_TOL || hi > rho_max + SPECTRAL_TOL {
                return Err(DroError::NotPositiveDefinite(format!(
                    "A(x_{i}) has spectrum [{lo}, {hi}] outside [{rho_min}, {rho_max}]"
                )));
            }
            let inv = a
                .clone()
                .cholesky()
                .ok_or_else(|| DroError::NotPositiveDefinite(format!("A(x_{i}) not SPD")))?
                .inverse();
            matrices.push(a);
            inverses.push(inv);
        }
        Ok(Self {
            dim,
            shape: Shape::PerSample { matrices, inverses },
            rho_min,
            rho_max,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rho_min(&self) -> f64 {
        self.rho_min
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    pub fn kind_name(&self) -> &'static str {
        match self.shape {
            Shape::Identity => "identity",
            Shape::Constant { .. } => "constant",
            Shape::ScaledIdentity { .. } => "implied_vol",
            Shape::PerSample { .. } => "callback",
        }
    }

    /// Number of per-sample entries, if the field is indexed by sample.
    pub fn sample_count(&self) -> Option<usize> {
        match &self.shape {
            Shape::ScaledIdentity { scales } => Some(scales.len()),
            Shape::PerSample { matrices, .. } => Some(matrices.len()),
            _ => None,
        }
    }

    /// `A(X_i)⁻¹ v`.
    pub fn inverse_apply(&self, index: usize, v: &DVector<f64>) -> DVector<f64> {
        match &self.shape {
            Shape::Identity => v.clone(),
            Shape::Constant { inverse, .. } => inverse * v,
            Shape::ScaledIdentity { scales } => v / scales[index],
            Shape::PerSample { inverses, .. } => &inverses[index] * v,
        }
    }

    /// `A(X_i) v`.
    pub fn apply(&self, index: usize, v: &DVector<f64>) -> DVector<f64> {
        match &self.shape {
            Shape::Identity => v.clone(),
            Shape::Constant { matrix, .. } => matrix * v,
            Shape::ScaledIdentity { scales } => v * scales[index],
            Shape::PerSample { matrices, .. } => &matrices[index] * v,
        }
    }

    /// `a = βᵀA(X_i)⁻¹β`.
    pub fn quadratic_form(&self, index: usize, beta: &DVector<f64>) -> f64 {
        match &self.shape {
            Shape::Identity => beta.norm_squared(),
            Shape::ScaledIdentity { scales } => beta.norm_squared() / scales[index],
            _ => beta.dot(&self.inverse_apply(index, beta)),
        }
    }

    /// Transport cost `(x'−x)ᵀA(X_i)(x'−x)` from sample `i` to `target`.
    pub fn transport_cost(&self, index: usize, from: &DVector<f64>, target: &DVector<f64>) -> f64 {
        let diff = target - from;
        diff.dot(&self.apply(index, &diff))
    }

    /// `max_i βᵀA(X_i)⁻¹β` over `n` samples.
    pub fn max_quadratic_form(&self, n: usize, beta: &DVector<f64>) -> f64 {
        match &self.shape {
            Shape::Identity | Shape::Constant { .. } => self.quadratic_form(0, beta),
            Shape::ScaledIdentity { .. } | Shape::PerSample { .. } => (0..n)
                .map(|i| self.quadratic_form(i, beta))
                .fold(0.0, f64::max),
        }
    }

    /// `c` such that `max_i βᵀA(X_i)⁻¹β = c‖β‖²` for every β, when one exists.
    pub fn isotropic_factor(&self) -> Option<f64> {
        match &self.shape {
            Shape::Identity => Some(1.0),
            Shape::ScaledIdentity { scales } => {
                Some(1.0 / scales.iter().copied().fold(f64::INFINITY, f64::min))
            }
            Shape::Constant { inverse, .. } => {
                let c = inverse[(0, 0)];
                let iso = DMatrix::<f64>::identity(self.dim, self.dim) * c;
                ((inverse - iso).amax() <= 1e-14 * c.abs().max(1.0)).then_some(c)
            }
            Shape::PerSample { .. } => None,
        }
    }

    /// Inverse matrix when it is the same at every point.
    pub fn constant_inverse(&self) -> Option<DMatrix<f64>> {
        match &self.shape {
            Shape::Identity => Some(DMatrix::identity(self.dim, self.dim)),
            Shape::Constant { inverse, .. } => Some(inverse.clone()),
            _ => None,
        }
    }

    /// Per-sample inverses (materialized for every kind).
    pub fn inverse_at(&self, index: usize) -> DMatrix<f64> {
        match &self.shape {
            Shape::Identity => DMatrix::identity(self.dim, self.dim),
            Shape::Constant { inverse, .. } => inverse.clone(),
            Shape::ScaledIdentity { scales } => DMatrix::identity(self.dim, self.dim) / scales[index],
            Shape::PerSample { inverses, .. } => inverses[index].clone(),
        }
    }
}

fn spectrum(matrix: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !matrix.is_square() {
        return Err(DroError::NotPositiveDefinite("matrix is not square".into()));
    }
    let asym = (matrix - matrix.transpose()).amax();
    if asym > 1e-12 * matrix.amax().max(1.0) {
        return Err(DroError::NotPositiveDefinite(format!("asymmetry {asym:e}")));
    }
    let eig = SymmetricEigen::new(matrix.clone()).eigenvalues;
    let lo = eig.min();
    let hi = eig.max();
    if !(lo > 0.0) {
        return Err(DroError::NotPositiveDefinite(format!("smallest eigenvalue {lo}")));
    }
    Ok((lo, hi))
}
