//! Reconstruction quality, performance profiles and block-activation heatmaps.

use std::ops::Range;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::ActivationMask;
use crate::solver::RunTrace;

/// `10 log10(peak^2 / MSE)` in decibels; `f64::INFINITY` when the images are
/// identical.
pub fn psnr(reference: &Array2<f64>, candidate: &Array2<f64>, peak: f64) -> Result<f64> {
    if reference.dim() != candidate.dim() {
        return Err(Error::Dimension(format!(
            "psnr of {:?} and {:?} images",
            reference.dim(),
            candidate.dim()
        )));
    }
    if !(peak > 0.0) {
        return Err(Error::Config(format!("peak must be positive, got {peak}")));
    }
    if reference.is_empty() {
        return Err(Error::Dimension("psnr of empty images".into()));
    }
    let mse = reference.iter().zip(candidate).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / reference.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

/// Cumulative distribution of one method's performance ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCurve {
    pub method: String,
    /// `(beta, rho(beta))`, beta increasing.
    pub points: Vec<(f64, f64)>,
    /// Per-instance ratio to the best method.
    pub ratios: Vec<f64>,
}

impl ProfileCurve {
    /// Fraction of instances whose ratio is at most `beta`.
    pub fn rho_at(&self, beta: f64) -> f64 {
        if self.ratios.is_empty() {
            return 0.0;
        }
        self.ratios.iter().filter(|&&r| r <= beta).count() as f64 / self.ratios.len() as f64
    }
}

/// `2^(k/4)` for `k = 0..=40`, i.e. 1 to 1024 with every power of two included.
pub fn default_betas() -> Vec<f64> {
    (0..=40).map(|k| 2f64.powf(k as f64 / 4.0)).collect()
}

/// Profiles of `scores` (method name, one positive score per instance, lower
/// is better). A final point at the largest observed ratio is appended when
/// the grid stops short of it, so every curve ends at 1.
pub fn performance_profile(scores: &[(String, Vec<f64>)], betas: &[f64]) -> Result<Vec<ProfileCurve>> {
    let Some((_, first)) = scores.first() else {
        return Ok(Vec::new());
    };
    let n = first.len();
    for (name, s) in scores {
        if s.len() != n {
            return Err(Error::Data(format!("method '{name}' has {} scores, expected {n}", s.len())));
        }
        if let Some(bad) = s.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Data(format!("method '{name}' has nonpositive score {bad}")));
        }
    }
    let best: Vec<f64> = (0..n).map(|k| scores.iter().map(|(_, s)| s[k]).fold(f64::INFINITY, f64::min)).collect();
    let mut grid: Vec<f64> = betas.iter().copied().filter(|b| b.is_finite() && *b >= 1.0).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let ratios: Vec<Vec<f64>> = scores.iter().map(|(_, s)| s.iter().zip(&best).map(|(v, b)| v / b).collect()).collect();
    let max_ratio = ratios.iter().flatten().copied().fold(1.0, f64::max);
    if grid.last().is_none_or(|&b| b < max_ratio) {
        grid.push(max_ratio);
    }

    Ok(scores
        .iter()
        .zip(ratios)
        .map(|((name, _), ratios)| {
            let mut curve = ProfileCurve { method: name.clone(), points: Vec::with_capacity(grid.len()), ratios };
            curve.points = grid.iter().map(|&b| (b, curve.rho_at(b))).collect();
            curve
        })
        .collect())
}

/// Activation frequency per block (rows) and iteration (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationHeatmap {
    pub frequencies: Array2<f64>,
    pub runs: usize,
}

impl ActivationHeatmap {
    pub fn num_blocks(&self) -> usize {
        self.frequencies.nrows()
    }

    pub fn num_iterations(&self) -> usize {
        self.frequencies.ncols()
    }

    /// Averages the masks of several runs that share block count and length.
    pub fn from_mask_runs<'a, I>(runs: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [ActivationMask]>,
    {
        let mut acc: Option<Array2<f64>> = None;
        let mut count = 0usize;
        for masks in runs {
            let blocks = masks.first().map_or(0, |m| m.bits.len());
            let acc = acc.get_or_insert_with(|| Array2::zeros((blocks, masks.len())));
            if acc.dim() != (blocks, masks.len()) {
                return Err(Error::Data(format!(
                    "run {count} has {} iterations over {blocks} blocks, expected {} over {}",
                    masks.len(),
                    acc.ncols(),
                    acc.nrows()
                )));
            }
            for (k, m) in masks.iter().enumerate() {
                if m.bits.len() != blocks {
                    return Err(Error::Data(format!("run {count}: inconsistent block count at iteration {k}")));
                }
                for (i, &on) in m.bits.iter().enumerate() {
                    if on {
                        acc[[i, k]] += 1.0;
                    }
                }
            }
            count += 1;
        }
        let Some(mut frequencies) = acc else {
            return Err(Error::Data("heatmap needs at least one run".into()));
        };
        frequencies.mapv_inplace(|v| v / count as f64);
        Ok(Self { frequencies, runs: count })
    }
}

/// Entry `(i, k)` is the fraction of `traces` whose iteration `k` activated block `i`.
pub fn activation_heatmap(traces: &[RunTrace]) -> Result<ActivationHeatmap> {
    let masks: Vec<Vec<ActivationMask>> =
        traces.iter().map(|t| t.records.iter().map(|r| r.mask.clone()).collect()).collect();
    ActivationHeatmap::from_mask_runs(masks.iter().map(Vec::as_slice))
}

/// Mean activation of the coarsest block minus that of the finest block over
/// the iteration columns in `window`.
pub fn coarse_dominance(heatmap: &ActivationHeatmap, window: Range<usize>) -> Result<f64> {
    if window.is_empty() {
        return Err(Error::Data("coarse dominance needs a nonempty iteration window".into()));
    }
    if window.end > heatmap.num_iterations() {
        return Err(Error::Data(format!(
            "window {window:?} exceeds the {} recorded iterations",
            heatmap.num_iterations()
        )));
    }
    let f = &heatmap.frequencies;
    let last = heatmap.num_blocks() - 1;
    let len = window.len() as f64;
    let coarse: f64 = window.clone().map(|k| f[[0, k]]).sum::<f64>() / len;
    let fine: f64 = window.map(|k| f[[last, k]]).sum::<f64>() / len;
    Ok(coarse - fine)
}
