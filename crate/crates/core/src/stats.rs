//! Goodness-of-fit and regression helpers: Kolmogorov–Smirnov distances,
//! autocorrelation, exponential-rate and power-law fits.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::fsdiff::Path;

/// Outcome of a one-sample Kolmogorov–Smirnov comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KSReport {
    pub statistic: f64,
    pub n: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Least-squares line fit. For [`fit_exp_decay`] `slope` holds the decay
/// rate (positive for decaying data).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    /// Euclidean norm of the residuals in the fitted (log) coordinates.
    pub residual_norm: f64,
    pub n_points: usize,
    pub target: Option<f64>,
    pub tolerance: Option<f64>,
    pub pass: bool,
}

impl FitReport {
    /// Sets `pass` according to `|slope - target| <= tolerance`.
    pub fn check(mut self, target: f64, tolerance: f64) -> Self {
        self.target = Some(target);
        self.tolerance = Some(tolerance);
        self.pass = (self.slope - target).abs() <= tolerance;
        self
    }
}

/// Sup distance between the empirical distribution of `samples` and `cdf`.
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64, threshold: f64) -> Result<KSReport> {
    if samples.is_empty() {
        return domain("ks_distance on an empty sample");
    }
    if samples.len() < 10 {
        return domain(format!("ks_distance needs at least 10 samples, got {}", samples.len()));
    }
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let d = d.clamp(0.0, 1.0);
    Ok(KSReport { statistic: d, n: xs.len(), threshold, pass: d <= threshold })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return domain("ks_two_sample on an empty sample");
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Normalized autocovariance of `values` at integer `lags`, using the
/// plug-in mean and variance of the whole series.
pub fn autocorr_values(values: &[f64], lags: &[usize]) -> Vec<f64> {
    let n = values.len();
    if n == 0 {
        return vec![f64::NAN; lags.len()];
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = centered.iter().map(|c| c * c).sum::<f64>() / n as f64;
    lags.iter()
        .map(|&lag| {
            if lag == 0 {
                return 1.0;
            }
            if lag >= n {
                return f64::NAN;
            }
            let cov = centered[..n - lag].iter().zip(&centered[lag..]).map(|(a, b)| a * b).sum::<f64>()
                / (n - lag) as f64;
            cov / var
        })
        .collect()
}

/// [`autocorr_values`] on the values of `path`; lags count grid steps.
pub fn autocorr(path: &Path, lags: &[usize]) -> Vec<f64> {
    autocorr_values(&path.values, lags)
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let res = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum::<f64>().sqrt();
    (slope, intercept, res)
}

/// Fits `values ≈ C exp(-rate · lags)` by least squares on `ln values`,
/// using the leading run of points with `values >= 0.05`.
pub fn fit_exp_decay(lags: &[f64], values: &[f64]) -> Result<FitReport> {
    if lags.len() != values.len() {
        return domain("fit_exp_decay: lags and values differ in length");
    }
    let used = values.iter().take_while(|&&v| v >= 0.05).count();
    if used < 2 {
        return domain("fit_exp_decay: fewer than two points above 0.05");
    }
    let logs: Vec<f64> = values[..used].iter().map(|v| v.ln()).collect();
    let (slope, intercept, residual_norm) = least_squares(&lags[..used], &logs);
    Ok(FitReport {
        slope: -slope,
        intercept,
        residual_norm,
        n_points: used,
        target: None,
        tolerance: None,
        pass: slope.is_finite(),
    })
}

/// Fits `ys ≈ C xs^slope` by least squares in log-log coordinates.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<FitReport> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return domain("fit_power_law needs two or more paired points");
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0)) {
        return domain("fit_power_law requires positive data");
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let (slope, intercept, residual_norm) = least_squares(&lx, &ly);
    Ok(FitReport {
        slope,
        intercept,
        residual_norm,
        n_points: xs.len(),
        target: None,
        tolerance: None,
        pass: slope.is_finite(),
    })
}
