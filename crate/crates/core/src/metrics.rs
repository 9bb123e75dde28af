//! Forecast quality: normalized RMSE, valid prediction time, return maps and
//! attractor overlap.

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{HqrcError, Result};

pub const DEFAULT_EPSILON: f64 = 0.3;

/// `sqrt((1/D) Σ ((pred_i − truth_i)/σ_i)²)`.
pub fn rmse_at(pred: &[f64], truth: &[f64], sigma: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() || pred.len() != sigma.len() {
        return Err(HqrcError::usage("rmse arguments differ in dimension"));
    }
    if let Some(s) = sigma.iter().find(|&&s| !(s > 0.0)) {
        return Err(HqrcError::config(format!("normalizing deviation must be positive, got {s}")));
    }
    let d = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(truth)
        .zip(sigma)
        .map(|((p, t), s)| ((p - t) / s).powi(2))
        .sum();
    Ok((sum / d).sqrt())
}

/// Population standard deviation of every component.
pub fn component_std(t: &Trajectory) -> Vec<f64> {
    let n = t.len() as f64;
    (0..t.dim())
        .map(|i| {
            let mean = t.points.iter().map(|p| p[i]).sum::<f64>() / n;
            (t.points.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

pub fn component_mean(t: &Trajectory) -> Vec<f64> {
    let n = t.len() as f64;
    (0..t.dim())
        .map(|i| t.points.iter().map(|p| p[i]).sum::<f64>() / n)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VptConfig {
    pub epsilon: f64,
    pub sigma: Vec<f64>,
    pub dt: f64,
}

impl VptConfig {
    /// σ taken from the truth segment under comparison.
    pub fn from_truth(truth: &Trajectory, epsilon: f64) -> Self {
        Self {
            epsilon,
            sigma: component_std(truth),
            dt: truth.dt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vpt {
    /// `dt ×` index of the first breach, or `dt × length` when censored.
    pub time: f64,
    pub steps: usize,
    /// The threshold was never reached inside the compared window.
    pub censored: bool,
}

/// RMSE of every step.
pub fn rmse_series(pred: &Trajectory, truth: &Trajectory, sigma: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(HqrcError::usage(format!(
            "prediction has {} points, truth has {}",
            pred.len(),
            truth.len()
        )));
    }
    pred.points
        .iter()
        .zip(&truth.points)
        .map(|(p, t)| rmse_at(p, t, sigma))
        .collect()
}

/// First time at which the normalized RMSE reaches `ε`.
pub fn vpt(pred: &Trajectory, truth: &Trajectory, cfg: &VptConfig) -> Result<Vpt> {
    if (pred.dt - truth.dt).abs() > 1e-12 * truth.dt.abs() {
        return Err(HqrcError::usage("prediction and truth use different time steps"));
    }
    let series = rmse_series(pred, truth, &cfg.sigma)?;
    Ok(match series.iter().position(|&e| e >= cfg.epsilon) {
        Some(k) => Vpt {
            time: k as f64 * cfg.dt,
            steps: k,
            censored: false,
        },
        None => Vpt {
            time: series.len() as f64 * cfg.dt,
            steps: series.len(),
            censored: true,
        },
    })
}

/// Indices of interior local maxima. On a plateau the first index is reported.
pub fn local_maxima(series: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = series.len();
    let mut k = 1;
    while k + 1 < n {
        if series[k - 1] < series[k] {
            // walk across a plateau
            let mut end = k;
            while end + 1 < n && series[end + 1] == series[k] {
                end += 1;
            }
            if end + 1 < n && series[end + 1] < series[k] {
                out.push(k);
            }
            k = end + 1;
        } else {
            k += 1;
        }
    }
    out
}

/// Consecutive local maxima `(z_i, z_{i+1})` in temporal order.
pub fn poincare_return_map(series: &[f64]) -> Vec<(f64, f64)> {
    let maxima: Vec<f64> = local_maxima(series).into_iter().map(|k| series[k]).collect();
    maxima.windows(2).map(|w| (w[0], w[1])).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    /// Share of predicted points inside the truth's bounding box grown 10% per side.
    pub fraction_inside: f64,
    pub pred_mean: Vec<f64>,
    pub pred_std: Vec<f64>,
    pub truth_mean: Vec<f64>,
    pub truth_std: Vec<f64>,
}

pub const BOX_MARGIN: f64 = 0.1;

fn expanded_box(points: &[Vec<f64>], margin: f64) -> Vec<(f64, f64)> {
    let dim = points.first().map_or(0, Vec::len);
    (0..dim)
        .map(|i| {
            let lo = points.iter().map(|p| p[i]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[i]).fold(f64::NEG_INFINITY, f64::max);
            let pad = margin * (hi - lo);
            (lo - pad, hi + pad)
        })
        .collect()
}

fn inside(p: &[f64], bounds: &[(f64, f64)]) -> bool {
    p.iter().zip(bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)
}

pub fn attractor_overlap(pred: &Trajectory, truth: &Trajectory) -> Result<OverlapReport> {
    if pred.is_empty() || truth.is_empty() {
        return Err(HqrcError::usage("attractor overlap needs nonempty trajectories"));
    }
    if pred.dim() != truth.dim() || pred.units != truth.units {
        return Err(HqrcError::usage("trajectories differ in dimension or units"));
    }
    let bounds = expanded_box(&truth.points, BOX_MARGIN);
    let hits = pred.points.iter().filter(|p| inside(p, &bounds)).count();
    Ok(OverlapReport {
        fraction_inside: hits as f64 / pred.len() as f64,
        pred_mean: component_mean(pred),
        pred_std: component_std(pred),
        truth_mean: component_mean(truth),
        truth_std: component_std(truth),
    })
}

/// Share of predicted return-map pairs inside the truth pairs' bounding box
/// grown by `margin` per side. Returns 0 when either map is empty.
pub fn return_map_containment(pred: &[(f64, f64)], truth: &[(f64, f64)], margin: f64) -> f64 {
    if pred.is_empty() || truth.is_empty() {
        return 0.0;
    }
    let pts: Vec<Vec<f64>> = truth.iter().map(|&(a, b)| vec![a, b]).collect();
    let bounds = expanded_box(&pts, margin);
    let hits = pred.iter().filter(|&&(a, b)| inside(&[a, b], &bounds)).count();
    hits as f64 / pred.len() as f64
}
