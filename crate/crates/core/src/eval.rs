//! Point-sampled (GEO) precision/recall between two road graphs.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::{point_segment_distance, Xy};
use crate::graph::RoadGraph;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub sample_spacing: f64,
    pub d_match: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            sample_spacing: 5.0,
            d_match: 15.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub inferred_matched: usize,
    pub inferred_total: usize,
    pub truth_matched: usize,
    pub truth_total: usize,
}

/// Samples every edge at `spacing` intervals, including both endpoints.
///
/// Each vertex appears once however many edges share it; isolated vertices
/// contribute nothing. Order: vertices by id, then interior points edge by edge.
pub fn sample_edges(g: &RoadGraph, spacing: f64) -> Vec<Xy> {
    assert!(spacing > 0.0, "sample spacing must be positive");
    let mut used = BTreeSet::new();
    for k in g.edge_keys() {
        used.insert(k.a);
        used.insert(k.b);
    }
    let mut out: Vec<Xy> = used.iter().map(|&v| g.position(v).unwrap()).collect();
    for k in g.edge_keys() {
        let (a, b) = g.segment(k);
        let len = a.dist(b);
        let mut s = spacing;
        while s < len - 1e-9 {
            out.push(a.lerp(b, s / len));
            s += spacing;
        }
    }
    out
}

/// Uniform grid over a graph's edges for exact nearest-edge range queries.
pub struct SegmentGrid {
    cell: f64,
    segments: Vec<(Xy, Xy)>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SegmentGrid {
    pub fn new(g: &RoadGraph, cell: f64) -> Self {
        let segments: Vec<(Xy, Xy)> = g.edge_keys().map(|k| g.segment(k)).collect();
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let f = |v: f64| (v / cell).floor() as i64;
        for (i, &(a, b)) in segments.iter().enumerate() {
            for cx in f(a.x.min(b.x))..=f(a.x.max(b.x)) {
                for cy in f(a.y.min(b.y))..=f(a.y.max(b.y)) {
                    buckets.entry((cx, cy)).or_default().push(i);
                }
            }
        }
        SegmentGrid {
            cell,
            segments,
            buckets,
        }
    }

    /// Whether any segment lies within `radius` of `p`.
    pub fn any_within(&self, p: Xy, radius: f64) -> bool {
        let f = |v: f64| (v / self.cell).floor() as i64;
        for cx in f(p.x - radius)..=f(p.x + radius) {
            for cy in f(p.y - radius)..=f(p.y + radius) {
                if let Some(ids) = self.buckets.get(&(cx, cy)) {
                    for &i in ids {
                        let (a, b) = self.segments[i];
                        if point_segment_distance(p, a, b) <= radius {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Distance from `p` to the nearest segment, or infinity when empty.
    pub fn nearest_distance(&self, p: Xy) -> f64 {
        self.segments
            .iter()
            .map(|&(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

fn count_matched(samples: &[Xy], target: &RoadGraph, d_match: f64) -> usize {
    if target.edge_count() == 0 {
        return 0;
    }
    let grid = SegmentGrid::new(target, d_match.max(1.0));
    samples
        .par_iter()
        .filter(|&&p| grid.any_within(p, d_match))
        .count()
}

/// GEO precision and recall of `inferred` against `truth`.
///
/// Both graphs must share a projection plane. Empty inferred → precision 1,
/// recall 0; empty truth → precision 0 (if inferred is non-empty), recall 1.
pub fn geo_precision_recall(inferred: &RoadGraph, truth: &RoadGraph, cfg: &EvalConfig) -> EvalReport {
    if cfg.d_match < cfg.sample_spacing {
        log::warn!(
            "d_match {} is below sample spacing {}",
            cfg.d_match,
            cfg.sample_spacing
        );
    }
    let inf_samples = sample_edges(inferred, cfg.sample_spacing);
    let truth_samples = sample_edges(truth, cfg.sample_spacing);
    let inferred_matched = count_matched(&inf_samples, truth, cfg.d_match);
    let truth_matched = count_matched(&truth_samples, inferred, cfg.d_match);
    let precision = if inf_samples.is_empty() {
        1.0
    } else {
        inferred_matched as f64 / inf_samples.len() as f64
    };
    let recall = if truth_samples.is_empty() {
        1.0
    } else {
        truth_matched as f64 / truth_samples.len() as f64
    };
    let precision = if truth_samples.is_empty() && !inf_samples.is_empty() {
        0.0
    } else {
        precision
    };
    let recall = if inf_samples.is_empty() && !truth_samples.is_empty() {
        0.0
    } else {
        recall
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    EvalReport {
        precision,
        recall,
        f1,
        inferred_matched,
        inferred_total: inf_samples.len(),
        truth_matched,
        truth_total: truth_samples.len(),
    }
}

/// Root-mean-square distance from points densely sampled along `g` (every
/// `spacing` meters) to the nearest edge of `truth`.
pub fn rms_deviation(g: &RoadGraph, truth: &RoadGraph, spacing: f64) -> f64 {
    let samples = sample_edges(g, spacing);
    if samples.is_empty() {
        return 0.0;
    }
    let grid = SegmentGrid::new(truth, 50.0);
    let sum: f64 = samples
        .iter()
        .map(|&p| {
            let d = grid.nearest_distance(p);
            d * d
        })
        .sum();
    (sum / samples.len() as f64).sqrt()
}
