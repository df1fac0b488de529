use std::collections::BTreeSet;

use crate::geo::{point_segment_distance, Xy};
use crate::graph::{RoadGraph, VertexId};
use crate::traj::TrajPoint;
use crate::traj_index::{Crossing, Orientation, TrajIndex};

use super::histogram::{exit_bearing, histogram_from_bearings, PolarHistogram};
use super::peaks::TraceAction;
use super::TraceConfig;

/// Source of road-presence evidence for the tracer.
///
/// `histogram` must be a pure function of the graph and vertex for a fixed
/// dataset; the tracer caches its results and only re-queries vertices named
/// by `affected`.
pub trait ConfidenceOracle: Sync {
    fn histogram(&self, graph: &RoadGraph, vertex: VertexId) -> PolarHistogram;

    /// Vertices whose histogram may differ after `changed` were edited.
    fn affected(&self, graph: &RoadGraph, changed: &[VertexId], cfg: &TraceConfig) -> BTreeSet<VertexId> {
        let radius = cfg.r_hist + cfg.step_d;
        let centers: Vec<Xy> = changed.iter().filter_map(|&v| graph.position(v)).collect();
        graph
            .vertices()
            .filter(|(_, p)| centers.iter().any(|c| c.dist(*p) <= radius))
            .map(|(v, _)| v)
            .collect()
    }

    /// Whether extending `action` may connect to the existing vertex `target`.
    fn supports_merge(&self, _graph: &RoadGraph, _action: &TraceAction, _target: VertexId) -> bool {
        true
    }
}

/// Confidence from GPS trajectories.
///
/// Once a vertex has incident edges, only trajectories that reached it along
/// the traced road (passing its neighbor and that neighbor's neighbor) vote.
/// Trajectories that merely pass nearby on another road, such as an overpass,
/// are ignored. Merges are allowed only when enough of those trajectories go
/// on to pass the target and follow one of its edges.
pub struct GpsOracle<'a> {
    index: &'a TrajIndex,
    cfg: TraceConfig,
}

impl<'a> GpsOracle<'a> {
    pub fn new(index: &'a TrajIndex, cfg: &TraceConfig) -> Self {
        GpsOracle {
            index,
            cfg: cfg.clone(),
        }
    }

    pub fn index(&self) -> &TrajIndex {
        self.index
    }

    fn slack(&self) -> f64 {
        2.0 * self.cfg.r_match + self.cfg.step_d
    }

    fn follow_radius(&self) -> f64 {
        self.cfg.r_match / 2.0
    }

    /// Crossings at `vertex` that count as evidence, with their exit bearings.
    pub fn evidence(&self, graph: &RoadGraph, vertex: VertexId) -> Vec<(Crossing, f64)> {
        let Some(center) = graph.position(vertex) else {
            return Vec::new();
        };
        let has_edges = graph.degree(vertex) > 0;
        self.index
            .query_crossings(center, self.cfg.r_match)
            .into_iter()
            .filter(|c| !has_edges || self.arrived_along_graph(graph, vertex, c))
            .filter_map(|c| exit_bearing(self.index, &c, center, &self.cfg).map(|b| (c, b)))
            .collect()
    }

    fn arrived_along_graph(&self, graph: &RoadGraph, v: VertexId, c: &Crossing) -> bool {
        let pts = &self.index.trajectory(c.traj).points;
        let back = c.orientation.flipped();
        let pv = graph.position(v).unwrap();
        for n in graph.neighbors(v) {
            let pn = graph.position(n).unwrap();
            let budget = pv.dist(pn) + self.slack();
            let Some(i_n) = find_along(pts, c.enter_index, back, pn, self.cfg.r_match, budget) else {
                continue;
            };
            let mut beyond = graph.neighbors(n).filter(|&p| p != v).peekable();
            if beyond.peek().is_none() {
                return true;
            }
            for p in beyond {
                let pp = graph.position(p).unwrap();
                let budget = pn.dist(pp) + self.slack();
                if find_along(pts, i_n, back, pp, self.cfg.r_match, budget).is_some() {
                    return true;
                }
            }
        }
        false
    }

    fn continues_through(&self, graph: &RoadGraph, c: &Crossing, from: Xy, w: VertexId) -> bool {
        let pts = &self.index.trajectory(c.traj).points;
        let fwd = c.orientation;
        let pw = graph.position(w).unwrap();
        let tight = self.follow_radius();
        let budget = from.dist(pw) + self.slack();
        let Some(i_w) = find_along(pts, c.enter_index, fwd, pw, self.cfg.r_match, budget) else {
            return false;
        };
        for m in graph.neighbors(w) {
            let pm = graph.position(m).unwrap();
            let Some(i_m) = find_along(pts, i_w, fwd, pm, tight, pw.dist(pm) + self.slack()) else {
                continue;
            };
            let mut beyond = graph.neighbors(m).filter(|&q| q != w).peekable();
            if beyond.peek().is_none() {
                return true;
            }
            for q in beyond {
                let pq = graph.position(q).unwrap();
                if find_along(pts, i_m, fwd, pq, tight, pm.dist(pq) + self.slack()).is_some() {
                    return true;
                }
            }
        }
        false
    }
}

impl ConfidenceOracle for GpsOracle<'_> {
    fn histogram(&self, graph: &RoadGraph, vertex: VertexId) -> PolarHistogram {
        histogram_from_bearings(
            self.evidence(graph, vertex).into_iter().map(|(_, b)| b),
            &self.cfg,
        )
    }

    /// A vertex's evidence depends on its neighbors and their neighbors, so
    /// only the changed vertices and those adjacent to them need re-evaluation.
    fn affected(&self, graph: &RoadGraph, changed: &[VertexId], _cfg: &TraceConfig) -> BTreeSet<VertexId> {
        let mut out = BTreeSet::new();
        for &v in changed {
            if graph.has_vertex(v) {
                out.insert(v);
                out.extend(graph.neighbors(v));
            }
        }
        out
    }

    fn supports_merge(&self, graph: &RoadGraph, action: &TraceAction, target: VertexId) -> bool {
        if graph.degree(target) == 0 {
            return true;
        }
        let from = graph.position(action.vertex).unwrap();
        let support = self
            .evidence(graph, action.vertex)
            .into_iter()
            .filter(|(c, _)| self.continues_through(graph, c, from, target))
            .count();
        support as f64 >= self.cfg.conf_threshold
    }
}

/// Walks `pts` from `start` in direction `dir` for at most `budget` meters and
/// returns the first index whose incoming segment passes within `radius` of
/// `target` (or `start` itself if that point already does).
fn find_along(pts: &[TrajPoint], start: usize, dir: Orientation, target: Xy, radius: f64, budget: f64) -> Option<usize> {
    if pts[start].pos.dist(target) <= radius {
        return Some(start);
    }
    let mut walked = 0.0;
    let mut prev = start;
    while let Some(j) = dir.step(prev, pts.len()) {
        let (a, b) = (pts[prev].pos, pts[j].pos);
        if point_segment_distance(target, a, b) <= radius {
            return Some(j);
        }
        walked += a.dist(b);
        if walked > budget {
            return None;
        }
        prev = j;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LonLat, Projection};
    use crate::graph::{EdgeMeta, Provenance};
    use crate::traj::Trajectory;

    fn traj(id: &str, pts: impl IntoIterator<Item = (f64, f64)>) -> Trajectory {
        Trajectory {
            id: id.into(),
            points: pts
                .into_iter()
                .enumerate()
                .map(|(i, (x, y))| TrajPoint {
                    t: i as f64,
                    pos: Xy::new(x, y),
                })
                .collect(),
        }
    }

    fn ew(y: f64) -> Trajectory {
        traj("ew", (-20..=20).map(move |i| (i as f64 * 10.0, y)))
    }

    fn ns(x: f64) -> Trajectory {
        traj("ns", (-20..=20).map(move |i| (x, i as f64 * 10.0)))
    }

    fn graph() -> RoadGraph {
        RoadGraph::new(Projection::new(LonLat::new(0.0, 0.0).unwrap()))
    }

    #[test]
    fn isolated_vertex_sees_every_crossing() {
        let idx = TrajIndex::build(vec![ew(0.0), ns(0.0)], 30.0).unwrap();
        let cfg = TraceConfig::default();
        let oracle = GpsOracle::new(&idx, &cfg);
        let mut g = graph();
        let v = g.add_vertex(Xy::ORIGIN);
        assert_eq!(oracle.histogram(&g, v).total_raw(), 4);
    }

    #[test]
    fn traced_vertex_ignores_crossing_road() {
        let idx = TrajIndex::build(vec![ew(0.0), ew(1.0), ns(0.0), ns(1.0)], 30.0).unwrap();
        let cfg = TraceConfig::default();
        let oracle = GpsOracle::new(&idx, &cfg);
        let mut g = graph();
        let p = g.add_vertex(Xy::new(-40.0, 0.0));
        let n = g.add_vertex(Xy::new(-20.0, 0.0));
        let v = g.add_vertex(Xy::ORIGIN);
        let meta = EdgeMeta::new(2, Provenance::Traced);
        g.add_edge(p, n, meta).unwrap();
        g.add_edge(n, v, meta).unwrap();
        let h = oracle.histogram(&g, v);
        // only the two eastbound passes arrive via n and p
        assert_eq!(h.total_raw(), 2);
        assert_eq!(h.raw_counts[0], 2);
    }

    #[test]
    fn merge_guard_rejects_unconnected_road() {
        // north-south road traced through the origin; east-west trips never turn
        let idx = TrajIndex::build(vec![ew(0.0), ew(2.0), ew(-2.0), ns(0.0), ns(2.0)], 30.0).unwrap();
        let cfg = TraceConfig::default();
        let oracle = GpsOracle::new(&idx, &cfg);
        let mut g = graph();
        let meta = EdgeMeta::new(2, Provenance::Traced);
        let ids: Vec<VertexId> = (-3..=3)
            .map(|i| g.add_vertex(Xy::new(0.0, i as f64 * 20.0)))
            .collect();
        for w in ids.windows(2) {
            g.add_edge(w[0], w[1], meta).unwrap();
        }
        let v = g.add_vertex(Xy::new(-20.0, 0.0));
        let action = TraceAction {
            vertex: v,
            bin: 0,
            confidence: 3.0,
        };
        assert!(!oracle.supports_merge(&g, &action, ids[3]));

        // with turning trips the merge is supported
        let turn = |off: f64| {
            traj(
                "turn",
                (-20..=0)
                    .map(move |i| (i as f64 * 10.0, off))
                    .chain((1..=20).map(move |i| (off, i as f64 * 10.0))),
            )
        };
        let idx = TrajIndex::build(vec![turn(0.0), turn(1.0), turn(-1.0)], 30.0).unwrap();
        let oracle = GpsOracle::new(&idx, &cfg);
        assert!(oracle.supports_merge(&g, &action, ids[3]));
    }

    #[test]
    fn find_along_respects_budget() {
        let t = ew(0.0);
        let idx20 = 20; // x = 0
        assert_eq!(
            find_along(&t.points, idx20, Orientation::Forward, Xy::new(55.0, 3.0), 5.0, 100.0),
            Some(26)
        );
        assert_eq!(
            find_along(&t.points, idx20, Orientation::Forward, Xy::new(55.0, 3.0), 5.0, 30.0),
            None
        );
        assert_eq!(
            find_along(&t.points, idx20, Orientation::Reverse, Xy::new(55.0, 3.0), 5.0, 1000.0),
            None
        );
    }
}
