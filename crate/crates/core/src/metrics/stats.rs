//! Regression statistics and correlation coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionStats {
    pub mse: f64,
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    pub mrpe_percent: f64,
    pub spearman: f64,
    pub pearson: f64,
}

/// Absolute difference of two bearings, wrapped into [0, 180].
pub fn angular_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Pearson correlation; NaN when either series is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn check_lengths(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if truth.len() < 2 {
        return Err(Error::DegenerateTruth(format!("{} value(s); at least 2 needed", truth.len())));
    }
    Ok(())
}

/// Error statistics plus R² and correlations.
///
/// With `angular` set, errors are wrapped bearing differences and MRPE is
/// relative to 180°. Otherwise MRPE averages `|error| / |truth|` over the
/// cases whose truth is non-zero.
pub fn regression_stats(pred: &[f64], truth: &[f64], angular: bool) -> Result<RegressionStats> {
    check_lengths(pred, truth)?;
    let mt = mean(truth);
    if truth.iter().all(|&t| t == truth[0]) {
        return Err(Error::DegenerateTruth("truth is constant".into()));
    }
    Ok(stats_unchecked(pred, truth, angular, mt))
}

/// Like [`regression_stats`], but a constant truth series yields NaN for R²
/// and the correlations instead of an error.
pub fn regression_stats_lenient(pred: &[f64], truth: &[f64], angular: bool) -> Result<RegressionStats> {
    check_lengths(pred, truth)?;
    Ok(stats_unchecked(pred, truth, angular, mean(truth)))
}

fn stats_unchecked(pred: &[f64], truth: &[f64], angular: bool, mt: f64) -> RegressionStats {
    let n = truth.len() as f64;
    let errors: Vec<f64> =
        pred.iter().zip(truth).map(|(&p, &t)| if angular { angular_difference(p, t) } else { (p - t).abs() }).collect();
    let ss_res: f64 = errors.iter().map(|e| e * e).sum();
    let ss_tot: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
    let mse = ss_res / n;
    let mrpe_percent = if angular {
        100.0 * mean(&errors) / 180.0
    } else {
        let rel: Vec<f64> = errors.iter().zip(truth).filter(|(_, t)| **t != 0.0).map(|(e, t)| e / t.abs()).collect();
        if rel.is_empty() { f64::NAN } else { 100.0 * mean(&rel) }
    };
    RegressionStats {
        mse,
        mae: mean(&errors),
        rmse: mse.sqrt(),
        r2: if ss_tot == 0.0 { f64::NAN } else { 1.0 - ss_res / ss_tot },
        mrpe_percent,
        spearman: spearman(pred, truth),
        pearson: pearson(pred, truth),
    }
}
