use serde::Serialize;

use super::RunTrace;

/// Least-squares fit of `log(f_δ(θ̄_k) − f*)` against `log k`.
#[derive(Debug, Clone, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Checkpoints used.
    pub used: usize,
    /// Checkpoints in the window dropped for a non-positive gap.
    pub excluded: usize,
}

/// Fits over checkpoints with `k_window.0 ≤ k ≤ k_window.1`. Fewer than two
/// usable points give a NaN slope.
pub fn rate_diagnostic(trace: &RunTrace, f_star: f64, k_window: (u64, u64)) -> RateFit {
    let mut excluded = 0;
    let points: Vec<(f64, f64)> = trace
        .checkpoints
        .iter()
        .filter(|c| c.k >= k_window.0 && c.k <= k_window.1)
        .filter_map(|c| {
            let gap = c.f_delta - f_star;
            if gap > 0.0 && gap.is_finite() {
                Some(((c.k as f64).ln(), gap.ln()))
            } else {
                excluded += 1;
                None
            }
        })
        .collect();
    let (slope, intercept) = least_squares(&points);
    RateFit {
        slope,
        intercept,
        used: points.len(),
        excluded,
    }
}

/// [`rate_diagnostic`] on the mean gap of replicate runs that share
/// checkpoint positions (for example, the same configuration under several
/// seeds).
pub fn rate_diagnostic_mean(traces: &[RunTrace], f_star: f64, k_window: (u64, u64)) -> RateFit {
    let Some(first) = traces.first() else {
        return RateFit {
            slope: f64::NAN,
            intercept: f64::NAN,
            used: 0,
            excluded: 0,
        };
    };
    let mut mean = first.clone();
    for (j, c) in mean.checkpoints.iter_mut().enumerate() {
        let values: Vec<f64> = traces
            .iter()
            .filter_map(|t| t.checkpoints.get(j).filter(|o| o.k == c.k).map(|o| o.f_delta))
            .collect();
        c.f_delta = if values.len() == traces.len() {
            values.iter().sum::<f64>() / values.len() as f64
        } else {
            f64::NAN
        };
    }
    rate_diagnostic(&mean, f_star, k_window)
}

pub(crate) fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}
