//! Univariate losses `ℓ(u; y)` where `u = βᵀx` and `y` is an untransported label.
//!
//! A loss is a pointwise maximum of smooth convex pieces. Smooth losses have
//! one piece; hinge has two affine pieces.

use std::fmt;
use std::sync::Arc;

/// One smooth convex piece of a loss.
pub trait Piece: Send + Sync + fmt::Debug {
    fn value(&self, u: f64, y: f64) -> f64;
    fn deriv(&self, u: f64, y: f64) -> f64;
    fn second(&self, u: f64, y: f64) -> f64;
    /// Upper bound on the second derivative over all `u`.
    fn curvature_bound(&self) -> f64;
    /// Quadratic growth rate: the smallest `k` with `value − k·u²` bounded above.
    fn growth_rate(&self) -> f64;
    /// A constant `C` with `value(u, y) ≤ C + (growth_rate + eps)·u²` for every `u`.
    fn growth_offset(&self, eps: f64, y: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Logistic;

impl Piece for Logistic {
    fn value(&self, u: f64, y: f64) -> f64 {
        softplus(-y * u)
    }
    fn deriv(&self, u: f64, y: f64) -> f64 {
        // −y·σ(−yu), written to avoid overflow for large |u|
        -y * sigmoid(-y * u)
    }
    fn second(&self, u: f64, y: f64) -> f64 {
        let s = sigmoid(-y * u);
        y * y * s * (1.0 - s)
    }
    fn curvature_bound(&self) -> f64 {
        0.25
    }
    fn growth_rate(&self) -> f64 {
        0.0
    }
    fn growth_offset(&self, eps: f64, y: f64) -> f64 {
        // log(1+e^{-yu}) ≤ log 2 + |y||u| ≤ log 2 + eps·u² + y²/(4 eps)
        std::f64::consts::LN_2 + y * y / (4.0 * eps)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Squared;

impl Piece for Squared {
    fn value(&self, u: f64, y: f64) -> f64 {
        (y - u) * (y - u)
    }
    fn deriv(&self, u: f64, y: f64) -> f64 {
        2.0 * (u - y)
    }
    fn second(&self, _u: f64, _y: f64) -> f64 {
        2.0
    }
    fn curvature_bound(&self) -> f64 {
        2.0
    }
    fn growth_rate(&self) -> f64 {
        1.0
    }
    fn growth_offset(&self, eps: f64, y: f64) -> f64 {
        (1.0 + 1.0 / eps) * y * y
    }
}

/// `intercept + slope·y·u`. Two of these make a hinge.
#[derive(Debug, Clone, Copy)]
pub struct Affine {
    pub intercept: f64,
    pub slope: f64,
}

impl Piece for Affine {
    fn value(&self, u: f64, y: f64) -> f64 {
        self.intercept + self.slope * y * u
    }
    fn deriv(&self, _u: f64, y: f64) -> f64 {
        self.slope * y
    }
    fn second(&self, _u: f64, _y: f64) -> f64 {
        0.0
    }
    fn curvature_bound(&self) -> f64 {
        0.0
    }
    fn growth_rate(&self) -> f64 {
        0.0
    }
    fn growth_offset(&self, eps: f64, y: f64) -> f64 {
        let b = self.slope * y;
        self.intercept + b * b / (4.0 * eps)
    }
}

/// Mean-variance portfolio loss `(u − mean)² − risk_tradeoff·u`.
#[derive(Debug, Clone, Copy)]
pub struct MeanVariance {
    pub mean: f64,
    pub risk_tradeoff: f64,
}

impl Piece for MeanVariance {
    fn value(&self, u: f64, _y: f64) -> f64 {
        (u - self.mean).powi(2) - self.risk_tradeoff * u
    }
    fn deriv(&self, u: f64, _y: f64) -> f64 {
        2.0 * (u - self.mean) - self.risk_tradeoff
    }
    fn second(&self, _u: f64, _y: f64) -> f64 {
        2.0
    }
    fn curvature_bound(&self) -> f64 {
        2.0
    }
    fn growth_rate(&self) -> f64 {
        1.0
    }
    fn growth_offset(&self, eps: f64, _y: f64) -> f64 {
        let b = 2.0 * self.mean + self.risk_tradeoff;
        b * b / (4.0 * eps) + self.mean * self.mean
    }
}

/// `u² − cos u`: smooth, convex, but with `ℓ'' ∈ [1, 3]` exceeding twice its
/// growth rate, so the inner problem can have many local maxima.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticCosine;

impl Piece for QuadraticCosine {
    fn value(&self, u: f64, _y: f64) -> f64 {
        u * u - u.cos()
    }
    fn deriv(&self, u: f64, _y: f64) -> f64 {
        2.0 * u + u.sin()
    }
    fn second(&self, u: f64, _y: f64) -> f64 {
        2.0 + u.cos()
    }
    fn curvature_bound(&self) -> f64 {
        3.0
    }
    fn growth_rate(&self) -> f64 {
        1.0
    }
    fn growth_offset(&self, _eps: f64, _y: f64) -> f64 {
        1.0
    }
}

/// Which built-in family a loss belongs to.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Logistic,
    Squared,
    Hinge,
    MeanVariance,
    Custom,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            LossKind::Logistic => "logistic",
            LossKind::Squared => "squared",
            LossKind::Hinge => "hinge",
            LossKind::MeanVariance => "mean_variance",
            LossKind::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// A convex loss `ℓ = max_i ℓ_i` with its structural constants.
#[derive(Debug, Clone)]
pub struct LossSpec {
    kind: LossKind,
    pieces: Vec<Arc<dyn Piece>>,
    kappa: f64,
    curvature: Option<f64>,
    k1: Option<f64>,
    k2: Option<f64>,
}

/// Relative tolerance for deciding which pieces are active at a point.
const ACTIVE_TOL: f64 = 1e-12;

impl LossSpec {
    /// Builds a loss from arbitrary pieces. `curvature` is the global bound on
    /// `ℓ''` and should be `None` when the loss has kinks.
    pub fn from_pieces(
        kind: LossKind,
        pieces: Vec<Arc<dyn Piece>>,
        curvature: Option<f64>,
    ) -> Self {
        assert!(!pieces.is_empty(), "a loss needs at least one piece");
        let kappa = pieces.iter().map(|p| p.growth_rate()).fold(0.0, f64::max);
        Self {
            kind,
            pieces,
            kappa,
            curvature,
            k1: None,
            k2: None,
        }
    }

    pub fn logistic() -> Self {
        let mut loss = Self::from_pieces(LossKind::Logistic, vec![Arc::new(Logistic)], Some(0.25));
        loss.k1 = Some(1.0);
        loss.k2 = Some(1.0);
        loss
    }

    /// `k1` is left unset until [`LossSpec::bind_labels`] sees the data.
    pub fn squared() -> Self {
        let mut loss = Self::from_pieces(LossKind::Squared, vec![Arc::new(Squared)], Some(2.0));
        loss.k2 = Some(1.0);
        loss
    }

    pub fn hinge() -> Self {
        Self::from_pieces(
            LossKind::Hinge,
            vec![
                Arc::new(Affine {
                    intercept: 0.0,
                    slope: 0.0,
                }),
                Arc::new(Affine {
                    intercept: 1.0,
                    slope: -1.0,
                }),
            ],
            None,
        )
    }

    pub fn mean_variance(mean: f64, risk_tradeoff: f64) -> Self {
        Self::from_pieces(
            LossKind::MeanVariance,
            vec![Arc::new(MeanVariance {
                mean,
                risk_tradeoff,
            })],
            Some(2.0),
        )
    }

    pub fn quadratic_cosine() -> Self {
        Self::from_pieces(LossKind::Custom, vec![Arc::new(QuadraticCosine)], Some(3.0))
    }

    /// Fills in data-dependent constants (`k1 = max|Y_i|` for squared loss).
    pub fn bind_labels(mut self, labels: Option<&[f64]>) -> Self {
        if self.kind == LossKind::Squared {
            let max_abs = labels
                .map(|ys| ys.iter().fold(0.0_f64, |m, y| m.max(y.abs())))
                .unwrap_or(0.0);
            self.k1 = Some(max_abs);
        }
        self
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn pieces(&self) -> &[Arc<dyn Piece>] {
        &self.pieces
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Global bound `M` on `ℓ''`; `None` for losses with kinks.
    pub fn m(&self) -> Option<f64> {
        self.curvature
    }

    /// Largest curvature among the pieces (0 for piecewise-affine losses).
    pub fn piece_curvature(&self) -> f64 {
        self.curvature.unwrap_or_else(|| {
            self.pieces
                .iter()
                .map(|p| p.curvature_bound())
                .fold(0.0, f64::max)
        })
    }

    pub fn k1(&self) -> Option<f64> {
        self.k1
    }

    pub fn k2(&self) -> Option<f64> {
        self.k2
    }

    pub fn is_smooth(&self) -> bool {
        self.pieces.len() == 1
    }

    pub fn value(&self, u: f64, y: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| p.value(u, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn active(&self, u: f64, y: f64) -> impl Iterator<Item = &Arc<dyn Piece>> + '_ {
        let top = self.value(u, y);
        let tol = ACTIVE_TOL * (1.0 + top.abs());
        self.pieces
            .iter()
            .filter(move |p| p.value(u, y) >= top - tol)
    }

    /// Right derivative.
    pub fn dplus(&self, u: f64, y: f64) -> f64 {
        self.active(u, y)
            .map(|p| p.deriv(u, y))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Left derivative.
    pub fn dminus(&self, u: f64, y: f64) -> f64 {
        self.active(u, y)
            .map(|p| p.deriv(u, y))
            .fold(f64::INFINITY, f64::min)
    }

    /// Second derivative, only for single-piece losses.
    pub fn d2(&self, u: f64, y: f64) -> Option<f64> {
        self.is_smooth().then(|| self.pieces[0].second(u, y))
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn builtins() -> Vec<LossSpec> {
        vec![
            LossSpec::logistic(),
            LossSpec::squared(),
            LossSpec::hinge(),
            LossSpec::mean_variance(0.3, 0.5),
            LossSpec::quadratic_cosine(),
        ]
    }

    #[test]
    fn logistic_values() {
        let l = LossSpec::logistic();
        assert_relative_eq!(l.value(0.0, 1.0), std::f64::consts::LN_2);
        assert_relative_eq!(l.dplus(0.0, 1.0), -0.5);
        assert_eq!(l.dplus(0.3, -1.0), l.dminus(0.3, -1.0));
        assert_eq!((l.kappa(), l.m(), l.k1(), l.k2()), (0.0, Some(0.25), Some(1.0), Some(1.0)));
        // no overflow far out
        assert!(l.value(-800.0, 1.0).is_finite());
        assert_relative_eq!(l.dplus(-800.0, 1.0), -1.0);
    }

    #[test]
    fn squared_values() {
        let l = LossSpec::squared();
        assert_eq!(l.value(1.0, 1.0), 0.0);
        assert_eq!(l.kappa(), 1.0);
        assert_eq!(l.d2(5.0, -3.0), Some(2.0));
        assert_eq!(l.m(), Some(2.0));
        let bound = l.bind_labels(Some(&[0.5, -3.0, 2.0]));
        assert_eq!(bound.k1(), Some(3.0));
        assert_eq!(bound.k2(), Some(1.0));
    }

    #[test]
    fn hinge_values() {
        let l = LossSpec::hinge();
        assert_eq!(l.value(2.0, 1.0), 0.0);
        assert_eq!(l.value(0.0, 1.0), 1.0);
        assert_eq!(l.dminus(1.0, 1.0), -1.0);
        assert_eq!(l.dplus(1.0, 1.0), 0.0);
        assert_eq!(l.kappa(), 0.0);
        assert_eq!(l.pieces().len(), 2);
        assert!(l.d2(0.0, 1.0).is_none());
        assert_eq!(l.m(), None);
    }

    #[test]
    fn derivative_matches_central_differences() {
        for loss in builtins().into_iter().filter(|l| l.is_smooth()) {
            for y in [-1.0, 1.0, 0.7] {
                for step in 0..=200 {
                    let u = -10.0 + 0.1 * step as f64;
                    let h = 1e-6;
                    let fd = (loss.value(u + h, y) - loss.value(u - h, y)) / (2.0 * h);
                    let d = loss.dplus(u, y);
                    assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{:?} u={u}", loss.kind());
                    let fd2 = (loss.dplus(u + h, y) - loss.dplus(u - h, y)) / (2.0 * h);
                    let d2 = loss.d2(u, y).unwrap();
                    assert!((d2 - fd2).abs() <= 1e-5 * (1.0 + d2.abs()));
                    assert!(d2 <= loss.m().unwrap() + 1e-12);
                }
            }
        }
    }

    #[test]
    fn growth_is_bounded_on_log_grid() {
        for loss in builtins() {
            // with y = 1 the squared loss peaks exactly at u = -1e6
            let y = 0.5;
            let k = loss.kappa() + 1e-6;
            let grid: Vec<f64> = (0..=120)
                .map(|j| 10f64.powf(-6.0 + j as f64 * 0.1))
                .flat_map(|m| [m, -m])
                .chain([0.0])
                .collect();
            let (arg, _) = grid
                .iter()
                .map(|&u| (u, loss.value(u, y) - k * u * u))
                .fold((0.0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best });
            assert!(arg.abs() < 1e6, "{:?} grows faster than kappa", loss.kind());
        }
    }

    #[test]
    fn growth_offset_bounds_value() {
        for loss in builtins() {
            for p in loss.pieces() {
                for eps in [1e-3, 0.1, 2.0] {
                    for y in [-1.5, 1.0] {
                        let c = p.growth_offset(eps, y);
                        for j in -400..=400 {
                            let u = j as f64 * 0.37;
                            assert!(p.value(u, y) <= c + (p.growth_rate() + eps) * u * u + 1e-9);
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn convex_along_chords(u1 in -50.0..50.0f64, u2 in -50.0..50.0f64, t in 0.0..1.0f64, y in prop::sample::select(vec![-1.0, 1.0, 0.4])) {
            for loss in builtins() {
                let mid = loss.value(t * u1 + (1.0 - t) * u2, y);
                let chord = t * loss.value(u1, y) + (1.0 - t) * loss.value(u2, y);
                prop_assert!(mid <= chord + 1e-12 * (1.0 + chord.abs()));
            }
        }

        #[test]
        fn one_sided_derivatives_ordered(u in -20.0..20.0f64, y in prop::sample::select(vec![-1.0, 1.0])) {
            for loss in builtins() {
                prop_assert!(loss.dminus(u, y) <= loss.dplus(u, y));
            }
        }
    }
}
