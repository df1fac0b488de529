//! Iterative road tracing: grow the map one segment at a time from the vertex
//! with the strongest unexplored trajectory evidence.

mod histogram;
mod oracle;
mod peaks;
mod seeds;
mod step;

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{bin_center, Xy};
use crate::graph::{RoadGraph, VertexId};

pub use histogram::{
    circular_gaussian_kernel, compute_polar_histogram, exit_bearing, exit_bearings, smooth_circular, PolarHistogram,
};
pub use oracle::{ConfidenceOracle, GpsOracle};
pub use peaks::{find_unexplored_peaks, Peak, TraceAction, PEAK_HALF_WINDOW};
pub use seeds::detect_seeds;
pub use step::{apply_step, apply_step_guarded, StepKind, StepOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid trace config: {0}")]
pub struct TraceConfigError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub n_bins: usize,
    pub step_d: f64,
    pub r_match: f64,
    pub r_hist: f64,
    pub smooth_sigma_bins: f64,
    pub conf_threshold: f64,
    pub merge_radius: f64,
    pub exclusion_halfwidth: f64,
    pub max_iterations: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            n_bins: 64,
            step_d: 20.0,
            r_match: 12.0,
            r_hist: 30.0,
            smooth_sigma_bins: 2.0,
            conf_threshold: 2.0,
            merge_radius: 10.0,
            exclusion_halfwidth: 30.0,
            max_iterations: 100_000,
        }
    }
}

impl TraceConfig {
    pub fn validate(&self) -> Result<(), TraceConfigError> {
        let err = |m: &str| Err(TraceConfigError(m.to_string()));
        let finite_pos = [
            self.step_d,
            self.r_match,
            self.r_hist,
            self.merge_radius,
        ];
        if finite_pos.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return err("distances must be positive and finite");
        }
        if !(self.smooth_sigma_bins.is_finite() && self.smooth_sigma_bins >= 0.0) {
            return err("smooth_sigma_bins must be non-negative");
        }
        if !(self.conf_threshold.is_finite() && self.conf_threshold >= 0.0) {
            return err("conf_threshold must be non-negative");
        }
        if !(0.0..180.0).contains(&self.exclusion_halfwidth) {
            return err("exclusion_halfwidth must be in [0, 180)");
        }
        if self.n_bins < 8 {
            return err("n_bins must be at least 8");
        }
        if self.step_d <= self.merge_radius {
            return err("step_d must exceed merge_radius");
        }
        if self.r_hist <= self.r_match {
            return err("r_hist must exceed r_match");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No unexplored peak reaches the confidence threshold.
    Exhausted,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct TraceResult {
    pub graph: RoadGraph,
    pub iterations: usize,
    pub edges_added: usize,
    pub stop_reason: StopReason,
}

impl TraceResult {
    pub fn truncated(&self) -> bool {
        self.stop_reason == StopReason::MaxIterations
    }
}

fn best_peak(
    graph: &RoadGraph,
    v: VertexId,
    oracle: &dyn ConfidenceOracle,
    dead_ends: &BTreeMap<VertexId, Vec<usize>>,
    cfg: &TraceConfig,
) -> Option<TraceAction> {
    let h = oracle.histogram(graph, v);
    let mut explored = graph.incident_bearings(v);
    if let Some(bins) = dead_ends.get(&v) {
        explored.extend(bins.iter().map(|&b| bin_center(b, cfg.n_bins)));
    }
    find_unexplored_peaks(&h, &explored, cfg)
        .first()
        .map(|p| TraceAction {
            vertex: v,
            bin: p.bin,
            confidence: p.confidence,
        })
}

fn pick(candidates: impl Iterator<Item = TraceAction>) -> Option<TraceAction> {
    candidates.fold(None, |best: Option<TraceAction>, a| match best {
        Some(b) if !a.better_than(&b) => Some(b),
        _ => Some(a),
    })
}

/// The globally strongest unexplored peak over `frontier`.
pub fn best_action(
    graph: &RoadGraph,
    frontier: &BTreeSet<VertexId>,
    oracle: &dyn ConfidenceOracle,
    cfg: &TraceConfig,
) -> Option<TraceAction> {
    let none = BTreeMap::new();
    let found: Vec<Option<TraceAction>> = frontier
        .par_iter()
        .filter(|v| graph.has_vertex(**v))
        .map(|&v| best_peak(graph, v, oracle, &none, cfg))
        .collect();
    pick(found.into_iter().flatten())
}

/// Grows `base` from `seeds` until no unexplored peak reaches
/// `conf_threshold` or `max_iterations` steps have run.
///
/// Each vertex's best peak is cached and re-evaluated only when the oracle
/// reports it affected by a step. Steps that change nothing mark their
/// direction explored at the source vertex.
pub fn trace(base: &RoadGraph, seeds: &[Xy], oracle: &dyn ConfidenceOracle, cfg: &TraceConfig) -> TraceResult {
    let mut graph = base.clone();
    for &s in seeds {
        if graph.nearest_vertex_within(s, cfg.merge_radius).is_none() {
            graph.add_vertex(s);
        }
    }
    let mut dead_ends: BTreeMap<VertexId, Vec<usize>> = BTreeMap::new();
    let ids: Vec<VertexId> = graph.vertex_ids().collect();
    let mut cache: BTreeMap<VertexId, Option<TraceAction>> = ids
        .par_iter()
        .map(|&v| (v, best_peak(&graph, v, oracle, &dead_ends, cfg)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let mut iterations = 0;
    let mut edges_added = 0;
    let stop_reason = loop {
        if iterations >= cfg.max_iterations {
            log::warn!("tracing stopped after {iterations} iterations without converging");
            break StopReason::MaxIterations;
        }
        let Some(action) = pick(cache.values().flatten().copied()) else {
            break StopReason::Exhausted;
        };
        let outcome = apply_step_guarded(&mut graph, &action, cfg, |g, w| {
            oracle.supports_merge(g, &action, w)
        });
        iterations += 1;
        let changed: Vec<VertexId> = match outcome.vertex {
            Some(w) if outcome.kind != StepKind::NoOp => {
                edges_added += 1;
                vec![action.vertex, w]
            }
            _ => {
                dead_ends.entry(action.vertex).or_default().push(action.bin);
                vec![action.vertex]
            }
        };
        let mut stale = oracle.affected(&graph, &changed, cfg);
        stale.extend(changed.iter().copied());
        let stale: Vec<VertexId> = stale.into_iter().filter(|v| graph.has_vertex(*v)).collect();
        let fresh: Vec<(VertexId, Option<TraceAction>)> = stale
            .par_iter()
            .map(|&v| (v, best_peak(&graph, v, oracle, &dead_ends, cfg)))
            .collect();
        cache.extend(fresh);
    };
    log::info!(
        "traced {edges_added} edges in {iterations} iterations ({} vertices)",
        graph.vertex_count()
    );
    TraceResult {
        graph,
        iterations,
        edges_added,
        stop_reason,
    }
}
