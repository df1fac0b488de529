use crate::geo::{angle_to_bin, bearing, Xy};
use crate::traj_index::{Crossing, TrajIndex};

use super::TraceConfig;

/// Circular histogram of trajectory exit directions around a point.
///
/// `raw_counts[b]` is the number of oriented crossings whose exit bearing
/// falls in bin `b`; `bins` is the same mass after circular Gaussian smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarHistogram {
    pub bins: Vec<f64>,
    pub raw_counts: Vec<u32>,
}

impl PolarHistogram {
    pub fn zeros(n_bins: usize) -> Self {
        PolarHistogram {
            bins: vec![0.0; n_bins],
            raw_counts: vec![0; n_bins],
        }
    }

    pub fn from_raw(raw_counts: Vec<u32>, sigma_bins: f64) -> Self {
        let bins = smooth_circular(&raw_counts, sigma_bins);
        PolarHistogram { bins, raw_counts }
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn total_raw(&self) -> u64 {
        self.raw_counts.iter().map(|&c| c as u64).sum()
    }

    /// Raw mass in the `±half` circular window around `bin`.
    pub fn window_mass(&self, bin: usize, half: usize) -> f64 {
        let n = self.n_bins();
        (0..=2 * half)
            .map(|k| self.raw_counts[(bin + n + k - half) % n] as f64)
            .sum()
    }

    /// Index of the largest smoothed weight (lowest index on ties).
    pub fn argmax(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &w) in self.bins.iter().enumerate() {
            if best.is_none_or(|b| w > self.bins[b]) {
                best = Some(i);
            }
        }
        best
    }
}

/// Circular Gaussian kernel indexed by bin offset `0..n`, summing to 1.
///
/// Wrapped images are folded in, and offsets `d` and `n - d` share one value.
pub fn circular_gaussian_kernel(n: usize, sigma: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if sigma <= 0.0 {
        w[0] = 1.0;
        return w;
    }
    let images = (3.0 * sigma / n as f64).ceil() as i64 + 1;
    for d in 0..=n / 2 {
        let mut acc = 0.0;
        for k in -images..=images {
            let x = d as f64 + (k * n as i64) as f64;
            acc += (-(x * x) / (2.0 * sigma * sigma)).exp();
        }
        w[d] = acc;
        w[(n - d) % n] = acc;
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Mass-preserving circular smoothing.
///
/// Every output bin sums its contributions in the same offset order, so a
/// circular shift of the input shifts the output bit-for-bit.
pub fn smooth_circular(raw: &[u32], sigma: f64) -> Vec<f64> {
    let n = raw.len();
    let kernel = circular_gaussian_kernel(n, sigma);
    (0..n)
        .map(|i| {
            (0..n)
                .map(|d| raw[(i + n - d) % n] as f64 * kernel[d])
                .sum()
        })
        .collect()
}

/// Bearing from `center` to where an oriented crossing first leaves the
/// `r_hist` circle, or `None` if the trajectory ends inside it.
pub fn exit_bearing(index: &TrajIndex, crossing: &Crossing, center: Xy, cfg: &TraceConfig) -> Option<f64> {
    let (_, exit) = index.walk_to_exit(
        crossing.traj,
        crossing.enter_index,
        crossing.orientation,
        center,
        cfg.r_hist,
    )?;
    bearing(center, exit).ok()
}

/// Exit bearings of every crossing of the `r_match` disc about `center`.
pub fn exit_bearings(index: &TrajIndex, center: Xy, cfg: &TraceConfig) -> Vec<(Crossing, f64)> {
    index
        .query_crossings(center, cfg.r_match)
        .into_iter()
        .filter_map(|c| exit_bearing(index, &c, center, cfg).map(|b| (c, b)))
        .collect()
}

pub(crate) fn histogram_from_bearings(bearings: impl IntoIterator<Item = f64>, cfg: &TraceConfig) -> PolarHistogram {
    let mut raw = vec![0u32; cfg.n_bins];
    for b in bearings {
        raw[angle_to_bin(b, cfg.n_bins)] += 1;
    }
    PolarHistogram::from_raw(raw, cfg.smooth_sigma_bins)
}

/// Smoothed polar histogram of exit directions of all trajectories crossing
/// the `r_match` disc about `center`.
pub fn compute_polar_histogram(index: &TrajIndex, center: Xy, cfg: &TraceConfig) -> PolarHistogram {
    histogram_from_bearings(
        exit_bearings(index, center, cfg).into_iter().map(|(_, b)| b),
        cfg,
    )
}
