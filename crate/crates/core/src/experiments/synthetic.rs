//! Seeded data generators for tests and the CLI.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::SampleSet;

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Balanced two-class sample: labels alternate `+1, −1`; each point is
/// `N(y·separation·1/√d, I)`.
pub fn class_gaussians(n: usize, d: usize, separation: f64, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = separation / (d as f64).sqrt();
    let labels: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    let points = labels
        .iter()
        .map(|&y| DVector::from_iterator(d, (0..d).map(|_| y * shift + normal(&mut rng))))
        .collect();
    SampleSet::new(points, Some(labels)).expect("generator output is well formed")
}

/// Linear-Gaussian regression: `X ~ N(0, I)`, `Y = wᵀX + noise·ε` with
/// `w = 1/√d`.
pub fn linear_regression(n: usize, d: usize, noise: f64, seed: u64) -> SampleSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / (d as f64).sqrt();
    let mut labels = Vec::with_capacity(n);
    let points = (0..n)
        .map(|_| {
            let x = DVector::from_iterator(d, (0..d).map(|_| normal(&mut rng)));
            labels.push(w * x.sum() + noise * normal(&mut rng));
            x
        })
        .collect();
    SampleSet::new(points, Some(labels)).expect("generator output is well formed")
}

/// Monthly asset returns driven by one market factor whose volatility
/// follows a log-AR(1). Returns `(returns, vols)` with one volatility level
/// per month.
pub fn portfolio_series(months: usize, assets: usize, seed: u64) -> (Vec<DVector<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift: Vec<f64> = (0..assets).map(|j| 0.004 + 0.006 * j as f64 / assets.max(1) as f64).collect();
    let loading: Vec<f64> = (0..assets).map(|j| 0.6 + 0.8 * j as f64 / assets.max(1) as f64).collect();
    let mut log_vol = 0.0_f64;
    let mut returns = Vec::with_capacity(months);
    let mut vols = Vec::with_capacity(months);
    for _ in 0..months {
        log_vol = 0.8 * log_vol + 0.25 * normal(&mut rng);
        let vol = 0.04 * log_vol.exp();
        let factor = normal(&mut rng);
        let r = DVector::from_iterator(
            assets,
            (0..assets).map(|j| drift[j] + loading[j] * vol * factor + 0.02 * normal(&mut rng)),
        );
        returns.push(r);
        vols.push(vol);
    }
    (returns, vols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_are_balanced_and_reproducible() {
        let a = class_gaussians(9, 3, 1.0, 4);
        let b = class_gaussians(9, 3, 1.0, 4);
        assert_eq!(a.points(), b.points());
        let pos = a.labels().unwrap().iter().filter(|&&y| y > 0.0).count();
        assert_eq!(pos, 5);
    }

    #[test]
    fn series_shapes() {
        let (r, v) = portfolio_series(30, 4, 1);
        assert_eq!((r.len(), v.len(), r[0].len()), (30, 30, 4));
        assert!(v.iter().all(|&x| x > 0.0));
    }
}
