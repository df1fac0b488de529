#![allow(dead_code)]

use std::collections::BTreeSet;

use roadtrace_core::geo::{LonLat, Projection, Xy};
use roadtrace_core::graph::{EdgeKey, EdgeMeta, Provenance, RoadGraph, VertexId};
use roadtrace_edit::{Session, Status};

pub const MERGE_RADIUS: f64 = 10.0;

pub fn proj() -> Projection {
    Projection::new(LonLat::new(-71.1, 42.36).unwrap())
}

pub fn graph() -> RoadGraph {
    RoadGraph::new(proj())
}

pub fn traced() -> EdgeMeta {
    EdgeMeta::new(5, Provenance::Traced)
}

pub fn base_edge() -> EdgeMeta {
    EdgeMeta::new(0, Provenance::BaseMap)
}

/// Adds a polyline and returns its vertex ids.
pub fn polyline(g: &mut RoadGraph, pts: &[(f64, f64)], meta: EdgeMeta) -> Vec<VertexId> {
    let ids: Vec<VertexId> = pts.iter().map(|&(x, y)| g.add_vertex(Xy::new(x, y))).collect();
    for w in ids.windows(2) {
        g.add_edge(w[0], w[1], meta).unwrap();
    }
    ids
}

pub struct Comb {
    pub base: RoadGraph,
    pub inferred: RoadGraph,
    pub spine: Vec<EdgeKey>,
    pub teeth: Vec<EdgeKey>,
}

/// A 500 m spine in 20 m steps whose ends touch two north-south base roads,
/// with ten 20 m teeth pointing north from every other interior vertex.
pub fn comb() -> Comb {
    let mut base = graph();
    polyline(&mut base, &[(0.0, -100.0), (0.0, 0.0), (0.0, 100.0)], base_edge());
    polyline(&mut base, &[(500.0, -100.0), (500.0, 0.0), (500.0, 100.0)], base_edge());
    let mut inferred = graph();
    let pts: Vec<(f64, f64)> = (0..=25).map(|i| (i as f64 * 20.0, 0.0)).collect();
    let ids = polyline(&mut inferred, &pts, traced());
    let spine: Vec<EdgeKey> = ids.windows(2).map(|w| EdgeKey::new(w[0], w[1])).collect();
    let mut teeth = Vec::new();
    for t in 0..10 {
        let at = ids[2 * t + 2];
        let p = inferred.position(at).unwrap();
        let tip = inferred.add_vertex(p + Xy::new(0.0, 20.0));
        inferred.add_edge(at, tip, traced()).unwrap();
        teeth.push(EdgeKey::new(at, tip));
    }
    Comb {
        base,
        inferred,
        spine,
        teeth,
    }
}

/// Overlay ids of the given inferred edges.
pub fn ids_of(s: &Session, edges: &[EdgeKey]) -> BTreeSet<u32> {
    let want: BTreeSet<EdgeKey> = edges.iter().copied().collect();
    s.overlay()
        .iter()
        .filter(|seg| want.contains(&seg.edge))
        .map(|seg| seg.id.0)
        .collect()
}

/// Every overlay segment's status, in id order.
pub fn statuses(s: &Session) -> Vec<Status> {
    s.overlay().iter().map(|seg| seg.status).collect()
}
