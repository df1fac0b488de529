use serde::{Deserialize, Serialize};

use crate::geo::{angle_diff, bin_center};
use crate::graph::VertexId;

use super::histogram::PolarHistogram;
use super::TraceConfig;

/// Half-width, in bins, of the peak neighborhood and of the confidence window.
pub const PEAK_HALF_WINDOW: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub bin: usize,
    /// Raw trajectory count within ±2 bins.
    pub confidence: f64,
}

/// One greedy growth decision: extend from `vertex` along bin `bin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceAction {
    pub vertex: VertexId,
    pub bin: usize,
    pub confidence: f64,
}

impl TraceAction {
    /// Total order used to pick the global best action: higher confidence
    /// first, then lower vertex id, then lower bin.
    pub fn better_than(&self, other: &TraceAction) -> bool {
        self.confidence
            .total_cmp(&other.confidence)
            .then(other.vertex.cmp(&self.vertex))
            .then(other.bin.cmp(&self.bin))
            .is_gt()
    }
}

fn is_local_max(h: &PolarHistogram, bin: usize) -> bool {
    let n = h.n_bins();
    let w = h.bins[bin];
    for k in 1..=PEAK_HALF_WINDOW {
        let hi = (bin + k) % n;
        let lo = (bin + n - k) % n;
        // equal weights: the lower index wins
        for j in [lo, hi] {
            if j == bin {
                continue;
            }
            let other = h.bins[j];
            if other > w || (other == w && j < bin) {
                return false;
            }
        }
    }
    true
}

/// Peaks of `h` not within `exclusion_halfwidth` of any explored bearing,
/// sorted by confidence descending then bin ascending.
pub fn find_unexplored_peaks(h: &PolarHistogram, explored: &[f64], cfg: &TraceConfig) -> Vec<Peak> {
    let n = h.n_bins();
    let mut out = Vec::new();
    for bin in 0..n {
        if h.bins[bin] <= 0.0 || !is_local_max(h, bin) {
            continue;
        }
        let confidence = h.window_mass(bin, PEAK_HALF_WINDOW);
        if confidence < cfg.conf_threshold {
            continue;
        }
        let center = bin_center(bin, n);
        if explored
            .iter()
            .any(|&e| angle_diff(center, e) <= cfg.exclusion_halfwidth)
        {
            continue;
        }
        out.push(Peak { bin, confidence });
    }
    out.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then(a.bin.cmp(&b.bin)));
    out
}
