//! Inter-change time distributions and kernel density estimates over them.
//!
//! Change times for a (subject, property) pair are the sorted distinct valid
//! times of its statements, expressed as fractional years. Consecutive
//! differences give inter-change times, which are pooled per property and
//! smoothed with a Gaussian kernel under Silverman's bandwidth rule. A
//! trapezoid CDF over the evaluation grid supports interval-probability
//! queries.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kb_model::{EntityId, KbTimestamp, PropertyId, Snapshot};

/// Sorted distinct change times, in fractional years, for one pair.
pub fn change_times(snapshot: &Snapshot, subject: &EntityId, property: &PropertyId) -> Vec<f64> {
    let state = snapshot.project(subject, property);
    let mut times: BTreeSet<KbTimestamp> = BTreeSet::new();
    for record in state.records() {
        if let Some(tv) = record.valid_time {
            times.insert(tv);
        }
    }
    let mut out: Vec<f64> = times.iter().map(|t| t.year_fraction()).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Differences between consecutive change times. Pairs with fewer than two
/// distinct times contribute nothing.
pub fn inter_change_times(snapshot: &Snapshot, subject: &EntityId, property: &PropertyId) -> Vec<f64> {
    let times = change_times(snapshot, subject, property);
    times.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Pool inter-change times for a property over all subjects in the snapshot.
pub fn pool_inter_change_times(snapshot: &Snapshot, property: &PropertyId) -> Vec<f64> {
    let mut pooled = Vec::new();
    for subject in snapshot.subjects() {
        pooled.extend(inter_change_times(snapshot, &subject, property));
    }
    pooled.sort_by(f64::total_cmp);
    pooled
}

/// Fixed-width histogram over [min, max] of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub bin_width: f64,
    pub counts: Vec<usize>,
}

pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot build a histogram of no samples".into()));
    }
    if bins == 0 {
        return Err(Error::Validation("histogram needs at least one bin".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in samples {
        let mut idx = ((x - lo) / width) as usize;
        if idx >= bins {
            idx = bins - 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram {
        lo,
        hi,
        bin_width: width,
        counts,
    })
}

/// Gaussian kernel density estimate evaluated on a fixed grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Trapezoid cumulative integral of `density` along `grid`.
    pub cdf: Vec<f64>,
}

pub const KDE_GRID_POINTS: usize = 1024;

fn std_dev(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Linear-interpolated quantile, matching the common "linear" convention:
/// position q * (n - 1) in the sorted samples.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Silverman's rule of thumb: `0.9 * min(sigma, IQR / 1.34) * n^(-1/5)`,
/// falling back to sigma alone when the IQR is zero, and to 1.0 when the
/// samples are all identical.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Validation("bandwidth of an empty sample is undefined".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let sigma = std_dev(samples);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let spread = if iqr > 0.0 {
        sigma.min(iqr / 1.34)
    } else {
        sigma
    };
    if spread == 0.0 {
        return Ok(1.0);
    }
    Ok(0.9 * spread * (samples.len() as f64).powf(-0.2))
}

/// Fit a Gaussian KDE on a 1024-point grid spanning
/// [min - 4h, max + 4h] where h is the Silverman bandwidth.
pub fn kde(samples: &[f64]) -> Result<DensityEstimate> {
    let h = silverman_bandwidth(samples)?;
    kde_with_bandwidth(samples, h)
}

/// Same estimator with an explicit bandwidth.
pub fn kde_with_bandwidth(samples: &[f64], h: f64) -> Result<DensityEstimate> {
    if samples.is_empty() {
        return Err(Error::Validation("cannot fit a density to no samples".into()));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Validation(format!("bandwidth must be positive, got {h}")));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * h;
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * h;
    let step = (hi - lo) / (KDE_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density: Vec<f64> = grid
        .iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&s| {
                    let u = (x - s) / h;
                    (-0.5 * u * u).exp()
                })
                .sum::<f64>()
        })
        .collect();
    let mut cdf = Vec::with_capacity(KDE_GRID_POINTS);
    let mut acc = 0.0;
    cdf.push(0.0);
    for i in 1..KDE_GRID_POINTS {
        acc += 0.5 * (density[i - 1] + density[i]) * step;
        cdf.push(acc);
    }
    Ok(DensityEstimate {
        bandwidth: h,
        grid,
        density,
        cdf,
    })
}

impl DensityEstimate {
    /// Density at `x` by linear interpolation on the grid; zero outside it.
    pub fn density_at(&self, x: f64) -> f64 {
        self.interp(&self.density, x, 0.0)
    }

    /// CDF at `x` by linear interpolation; clamps to 0 below the grid and to
    /// the total mass above it.
    pub fn cdf_at(&self, x: f64) -> f64 {
        self.interp(&self.cdf, x, f64::NAN)
    }

    /// Probability mass assigned to [a, b].
    pub fn probability(&self, a: f64, b: f64) -> Result<f64> {
        if b < a {
            return Err(Error::Validation(format!("bad interval [{a}, {b}]")));
        }
        Ok(self.cdf_at(b) - self.cdf_at(a))
    }

    fn interp(&self, values: &[f64], x: f64, outside: f64) -> f64 {
        let lo = self.grid[0];
        let hi = self.grid[self.grid.len() - 1];
        if x < lo {
            return if outside.is_nan() { 0.0 } else { outside };
        }
        if x > hi {
            return if outside.is_nan() {
                values[values.len() - 1]
            } else {
                outside
            };
        }
        let step = self.grid[1] - self.grid[0];
        let pos = (x - lo) / step;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let frac = pos - i as f64;
        values[i] + frac * (values[i + 1] - values[i])
    }
}
