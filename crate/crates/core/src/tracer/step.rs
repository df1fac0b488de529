use crate::geo::{bin_center, Xy};
use crate::graph::{EdgeMeta, Provenance, RoadGraph, VertexId};

use super::peaks::TraceAction;
use super::TraceConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    /// A new vertex was created and connected.
    Extended,
    /// An edge to an existing vertex was added.
    Merged,
    /// Nothing changed; the direction should be marked explored.
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub kind: StepKind,
    /// The new or merged endpoint, if any.
    pub vertex: Option<VertexId>,
}

fn support_of(action: &TraceAction) -> u32 {
    action.confidence.round().max(0.0) as u32
}

fn connect(graph: &mut RoadGraph, action: &TraceAction, to: VertexId, kind: StepKind) -> StepOutcome {
    let meta = EdgeMeta::new(support_of(action), Provenance::Traced);
    let added = graph
        .add_edge(action.vertex, to, meta)
        .expect("tracer endpoints exist and differ");
    debug_assert!(added);
    StepOutcome {
        kind,
        vertex: Some(to),
    }
}

fn candidate(graph: &RoadGraph, action: &TraceAction, length: f64, cfg: &TraceConfig) -> Xy {
    let origin = graph
        .position(action.vertex)
        .expect("action vertex exists");
    origin + Xy::from_angle(bin_center(action.bin, cfg.n_bins)) * length
}

/// Adds one segment of length `step_d` along the action's bin center.
///
/// A candidate endpoint within `merge_radius` of an existing vertex merges
/// into it; a merge that would duplicate an edge is a no-op.
pub fn apply_step(graph: &mut RoadGraph, action: &TraceAction, cfg: &TraceConfig) -> StepOutcome {
    apply_step_guarded(graph, action, cfg, |_, _| true)
}

/// [`apply_step`] with a veto on merges.
///
/// When `allow_merge` rejects the merge target, shorter and longer step
/// lengths (1 m apart, within `(merge_radius, step_d + merge_radius]`) are
/// tried for a spot with no vertex within `merge_radius`. If none exists the
/// step is a no-op.
pub fn apply_step_guarded(
    graph: &mut RoadGraph,
    action: &TraceAction,
    cfg: &TraceConfig,
    allow_merge: impl Fn(&RoadGraph, VertexId) -> bool,
) -> StepOutcome {
    let noop = StepOutcome {
        kind: StepKind::NoOp,
        vertex: None,
    };
    let first = candidate(graph, action, cfg.step_d, cfg);
    match graph.nearest_vertex_within(first, cfg.merge_radius) {
        None => {
            let w = graph.add_vertex(first);
            return connect(graph, action, w, StepKind::Extended);
        }
        Some(w) if w == action.vertex || graph.has_edge(action.vertex, w) => return noop,
        Some(w) => {
            if allow_merge(graph, w) {
                return connect(graph, action, w, StepKind::Merged);
            }
        }
    }
    for length in alternative_lengths(cfg) {
        let p = candidate(graph, action, length, cfg);
        if graph.nearest_vertex_within(p, cfg.merge_radius).is_none() {
            let w = graph.add_vertex(p);
            return connect(graph, action, w, StepKind::Extended);
        }
    }
    noop
}

/// step_d + 1, step_d - 1, step_d + 2, ... restricted to the allowed range.
fn alternative_lengths(cfg: &TraceConfig) -> Vec<f64> {
    let lo = cfg.merge_radius;
    let hi = cfg.step_d + cfg.merge_radius;
    let mut out = Vec::new();
    let mut k = 1.0;
    loop {
        let up = cfg.step_d + k;
        let down = cfg.step_d - k;
        let up_ok = up <= hi;
        let down_ok = down > lo;
        if !up_ok && !down_ok {
            return out;
        }
        if up_ok {
            out.push(up);
        }
        if down_ok {
            out.push(down);
        }
        k += 1.0;
    }
}
