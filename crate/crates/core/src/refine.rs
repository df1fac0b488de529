//! Geometric cleanup of inferred graphs and merging accepted roads into a
//! base map.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Xy;
use crate::graph::{EdgeKey, Provenance, RoadGraph, VertexId};
use crate::simplify::{chains, collapse_chains};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefineError {
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
    #[error("accepted segment references unknown vertex {0}")]
    UnknownVertex(VertexId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefineConfig {
    pub junction_snap: f64,
    pub simplify_tol: f64,
    /// Moving-average window in vertices (odd).
    pub smooth_window: usize,
    pub min_component_len: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            junction_snap: 15.0,
            simplify_tol: 3.0,
            smooth_window: 3,
            min_component_len: 50.0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(self.junction_snap) && ok(self.simplify_tol) && ok(self.min_component_len)) {
            return Err(RefineError::InvalidConfig(
                "distances must be positive and finite".into(),
            ));
        }
        if self.smooth_window == 0 {
            return Err(RefineError::InvalidConfig(
                "smooth_window must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Vertices touching a base-map edge. Refinement never moves or removes them.
pub fn base_vertices(g: &RoadGraph) -> BTreeSet<VertexId> {
    let mut out = BTreeSet::new();
    for (k, m) in g.edges() {
        if m.provenance == Provenance::BaseMap {
            out.insert(k.a);
            out.insert(k.b);
        }
    }
    out
}

/// Merges clusters of degree ≥ 3 vertices lying within `radius` of each other
/// (single linkage), repeating until no such pair remains.
///
/// A cluster collapses onto its lowest id. It moves to the cluster centroid,
/// or stays on its lowest pinned member if it has one. Edges that would become
/// loops or duplicates are dropped.
pub fn snap_junctions(g: &RoadGraph, radius: f64, pinned: &BTreeSet<VertexId>) -> RoadGraph {
    let mut g = g.clone();
    loop {
        let junctions: Vec<(VertexId, Xy)> = g.vertices().filter(|(v, _)| g.degree(*v) >= 3).collect();
        let mut parent: Vec<usize> = (0..junctions.len()).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        let mut any = false;
        for i in 0..junctions.len() {
            for j in i + 1..junctions.len() {
                if junctions[i].1.dist(junctions[j].1) <= radius {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                        any = true;
                    }
                }
            }
        }
        if !any {
            return g;
        }
        let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..junctions.len() {
            let r = find(&mut parent, i);
            clusters.entry(r).or_default().push(i);
        }
        for members in clusters.values().filter(|m| m.len() > 1) {
            let ids: Vec<VertexId> = members.iter().map(|&i| junctions[i].0).collect();
            let keep = ids[0];
            let target = match ids.iter().find(|v| pinned.contains(v)) {
                Some(&p) => junctions[members[ids.iter().position(|&v| v == p).unwrap()]].1,
                None => {
                    let sum = members.iter().fold(Xy::ORIGIN, |acc, &i| acc + junctions[i].1);
                    sum * (1.0 / members.len() as f64)
                }
            };
            let absorbed: BTreeSet<VertexId> = ids[1..].iter().copied().collect();
            for &v in &ids[1..] {
                let edges: Vec<(VertexId, _)> = g
                    .neighbors(v)
                    .map(|n| (n, *g.edge(v, n).unwrap()))
                    .collect();
                g.remove_vertex(v);
                for (n, meta) in edges {
                    if n == keep || absorbed.contains(&n) {
                        continue;
                    }
                    g.add_edge(keep, n, meta).unwrap();
                }
            }
            g.set_position(keep, target).unwrap();
        }
    }
}

/// Moves each interior chain vertex to the centered average of its window,
/// computed from the original positions, with displacement capped at
/// `max_shift`. Chain ends and pinned vertices stay put.
pub fn smooth_chains(g: &RoadGraph, window: usize, max_shift: f64, pinned: &BTreeSet<VertexId>) -> RoadGraph {
    let half = window / 2;
    let mut out = g.clone();
    if half == 0 {
        return out;
    }
    for chain in chains(g, pinned) {
        if chain.len() <= 2 {
            continue;
        }
        let pts: Vec<Xy> = chain.iter().map(|&v| g.position(v).unwrap()).collect();
        let last = pts.len() - 1;
        for i in 1..last {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(last);
            let h = (i - lo).min(hi - i);
            let win = &pts[i - h..=i + h];
            let mean = win.iter().fold(Xy::ORIGIN, |a, &p| a + p) * (1.0 / win.len() as f64);
            let mut shift = mean - pts[i];
            let len = shift.norm();
            if len > max_shift {
                shift = shift * (max_shift / len);
            }
            out.set_position(chain[i], pts[i] + shift).unwrap();
        }
    }
    out
}

/// Drops connected components shorter than `min_len` that touch no
/// base-map edge.
pub fn drop_small_components(g: &mut RoadGraph, min_len: f64) {
    let base = base_vertices(g);
    for comp in g.components() {
        if comp.iter().any(|v| base.contains(v)) {
            continue;
        }
        let set: BTreeSet<VertexId> = comp.iter().copied().collect();
        let len: f64 = g
            .edge_keys()
            .filter(|k| set.contains(&k.a))
            .map(|k| g.edge_length(k))
            .sum();
        if len < min_len {
            for v in comp {
                g.remove_vertex(v);
            }
        }
    }
}

/// Junction snapping, chain smoothing and simplification, then removal of
/// small isolated components. Base-map vertices are never moved.
pub fn refine_geometry(g: &RoadGraph, cfg: &RefineConfig) -> RoadGraph {
    let pinned = base_vertices(g);
    let snapped = snap_junctions(g, cfg.junction_snap, &pinned);
    let mut out = smooth_chains(&snapped, cfg.smooth_window, cfg.simplify_tol, &pinned);
    collapse_chains(&mut out, cfg.simplify_tol, &pinned);
    drop_small_components(&mut out, cfg.min_component_len);
    for k in out.edge_keys().collect::<Vec<_>>() {
        let meta = out.edge(k.a, k.b).copied().unwrap();
        if meta.provenance != Provenance::BaseMap && meta.provenance != Provenance::Refined {
            out.remove_edge(k.a, k.b);
            out.add_edge(
                k.a,
                k.b,
                crate::graph::EdgeMeta::new(meta.support, Provenance::Refined),
            )
            .unwrap();
        }
    }
    out
}

/// Inserts the `accepted` edges of `inferred` into `base`.
///
/// Inferred endpoints within `weld_radius` of a base vertex are welded to the
/// nearest one (lowest id on ties); the rest become new vertices. Base edges
/// are never modified and segments that collapse to a point or duplicate an
/// existing edge are skipped.
pub fn merge_into_base(
    base: &RoadGraph,
    inferred: &RoadGraph,
    accepted: &[EdgeKey],
    weld_radius: f64,
) -> Result<RoadGraph, RefineError> {
    for k in accepted {
        for v in [k.a, k.b] {
            if !inferred.has_vertex(v) {
                return Err(RefineError::UnknownVertex(v));
            }
        }
    }
    let mut out = base.clone();
    let mut mapped: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    for k in accepted {
        let mut ends = [k.a, k.b].map(|v| {
            *mapped.entry(v).or_insert_with(|| {
                let p = inferred.position(v).unwrap();
                match base.nearest_vertex_within(p, weld_radius) {
                    Some(b) => b,
                    None => out.add_vertex(p),
                }
            })
        });
        if ends[0] == ends[1] {
            continue;
        }
        ends.sort();
        let meta = inferred
            .edge(k.a, k.b)
            .copied()
            .unwrap_or(crate::graph::EdgeMeta::new(0, Provenance::Traced));
        out.add_edge(ends[0], ends[1], meta).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LonLat, Projection};
    use crate::graph::EdgeMeta;
    use crate::synth::{make_ground_truth, GraphKind};

    fn proj() -> Projection {
        Projection::new(LonLat::new(0.0, 0.0).unwrap())
    }

    fn add(g: &mut RoadGraph, a: VertexId, b: VertexId) {
        g.add_edge(a, b, EdgeMeta::new(3, Provenance::Traced)).unwrap();
    }

    #[test]
    fn default_is_valid() {
        RefineConfig::default().validate().unwrap();
        let bad = RefineConfig {
            simplify_tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn nearby_junctions_merge_at_midpoint() {
        // two degree-3 vertices 8 m apart, each with two long arms
        let mut g = RoadGraph::new(proj());
        let a = g.add_vertex(Xy::new(0.0, 0.0));
        let b = g.add_vertex(Xy::new(8.0, 0.0));
        add(&mut g, a, b);
        for (from, dx) in [(a, -100.0), (b, 100.0)] {
            let base = g.position(from).unwrap();
            for dy in [-100.0, 100.0] {
                let t = g.add_vertex(base + Xy::new(dx / 2.0, dy));
                add(&mut g, from, t);
            }
        }
        let out = snap_junctions(&g, 15.0, &BTreeSet::new());
        assert_eq!(out.vertex_count(), 5);
        assert_eq!(out.degree(a), 4);
        assert_eq!(out.position(a), Some(Xy::new(4.0, 0.0)));
    }

    #[test]
    fn clean_grid_moves_at_most_tolerance() {
        let g = make_ground_truth(
            GraphKind::Grid {
                n_blocks: 3,
                block_m: 100.0,
            },
            proj(),
        );
        let cfg = RefineConfig::default();
        let out = refine_geometry(&g, &cfg);
        assert_eq!(out.vertex_count(), g.vertex_count());
        assert_eq!(out.edge_count(), g.edge_count());
        for (v, p) in g.vertices() {
            assert!(out.position(v).unwrap().dist(p) <= cfg.simplify_tol + 1e-9);
        }
    }

    #[test]
    fn small_islands_are_dropped() {
        let mut g = RoadGraph::new(proj());
        let a = g.add_vertex(Xy::new(0.0, 0.0));
        let b = g.add_vertex(Xy::new(20.0, 0.0));
        add(&mut g, a, b);
        let c = g.add_vertex(Xy::new(0.0, 100.0));
        let d = g.add_vertex(Xy::new(100.0, 100.0));
        add(&mut g, c, d);
        let out = refine_geometry(&g, &RefineConfig::default());
        assert!(!out.has_vertex(a) && !out.has_vertex(b));
        assert!(out.has_edge(c, d));

        // a short piece attached to the base map stays
        let mut g = RoadGraph::new(proj());
        let a = g.add_vertex(Xy::new(0.0, 0.0));
        let b = g.add_vertex(Xy::new(20.0, 0.0));
        g.add_edge(a, b, EdgeMeta::new(0, Provenance::BaseMap)).unwrap();
        let out = refine_geometry(&g, &RefineConfig::default());
        assert!(out.has_edge(a, b));
    }

    #[test]
    fn merge_with_nothing_accepted_is_base() {
        let base = make_ground_truth(GraphKind::Straight { length_m: 100.0 }, proj());
        let out = merge_into_base(&base, &RoadGraph::new(proj()), &[], 15.0).unwrap();
        assert_eq!(crate::graph_io::write_graph(&out), crate::graph_io::write_graph(&base));
    }

    #[test]
    fn merge_welds_close_endpoint() {
        let base = make_ground_truth(GraphKind::Straight { length_m: 100.0 }, proj());
        let mut inf = RoadGraph::new(proj());
        let p = inf.add_vertex(Xy::new(103.0, 4.0));
        let q = inf.add_vertex(Xy::new(103.0, 60.0));
        add(&mut inf, p, q);
        let out = merge_into_base(&base, &inf, &[EdgeKey::new(p, q)], 15.0).unwrap();
        assert_eq!(out.vertex_count(), base.vertex_count() + 1);
        assert_eq!(out.edge_count(), 2);
        assert!(out.contains_subgraph(&base));

        let err = merge_into_base(&base, &inf, &[EdgeKey::new(p, VertexId(99))], 15.0);
        assert_eq!(err.unwrap_err(), RefineError::UnknownVertex(VertexId(99)));
    }
}
