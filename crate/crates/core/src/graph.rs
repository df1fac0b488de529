//! The undirected road graph shared by every stage of the pipeline.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{bearing, LonLat, Projection, Xy};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct VertexId(pub u64);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Unordered vertex pair, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeKey {
    pub a: VertexId,
    pub b: VertexId,
}

impl EdgeKey {
    pub fn new(u: VertexId, v: VertexId) -> Self {
        if u <= v {
            EdgeKey { a: u, b: v }
        } else {
            EdgeKey { a: v, b: u }
        }
    }

    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Traced,
    Baseline,
    BaseMap,
    Refined,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Traced => "traced",
            Provenance::Baseline => "baseline",
            Provenance::BaseMap => "base-map",
            Provenance::Refined => "refined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "traced" => Provenance::Traced,
            "baseline" => Provenance::Baseline,
            "base-map" => Provenance::BaseMap,
            "refined" => Provenance::Refined,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeMeta {
    pub support: u32,
    pub provenance: Provenance,
}

impl EdgeMeta {
    pub fn new(support: u32, provenance: Provenance) -> Self {
        EdgeMeta {
            support,
            provenance,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("vertex {0} does not exist")]
    MissingVertex(VertexId),
    #[error("vertex {0} already exists")]
    DuplicateVertex(VertexId),
    #[error("self-loop at vertex {0}")]
    SelfLoop(VertexId),
    #[error("non-finite position for vertex {0}")]
    NonFinite(VertexId),
}

/// Undirected spatial graph with straight-line edges.
///
/// Vertex positions live in the plane of `projection`. Iteration order is
/// always ascending by id, which keeps every consumer deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct RoadGraph {
    projection: Projection,
    vertices: BTreeMap<VertexId, Xy>,
    adjacency: BTreeMap<VertexId, BTreeSet<VertexId>>,
    edges: BTreeMap<EdgeKey, EdgeMeta>,
}

impl RoadGraph {
    pub fn new(projection: Projection) -> Self {
        RoadGraph {
            projection,
            vertices: BTreeMap::new(),
            adjacency: BTreeMap::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn projection(&self) -> &Projection {
        &self.projection
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn next_vertex_id(&self) -> VertexId {
        self.vertices
            .keys()
            .next_back()
            .map_or(VertexId(0), |v| VertexId(v.0 + 1))
    }

    pub fn add_vertex(&mut self, pos: Xy) -> VertexId {
        let id = self.next_vertex_id();
        self.insert_vertex(id, pos)
            .expect("fresh id with finite position");
        id
    }

    pub fn insert_vertex(&mut self, id: VertexId, pos: Xy) -> Result<(), GraphError> {
        if !pos.is_finite() {
            return Err(GraphError::NonFinite(id));
        }
        if self.vertices.contains_key(&id) {
            return Err(GraphError::DuplicateVertex(id));
        }
        self.vertices.insert(id, pos);
        self.adjacency.insert(id, BTreeSet::new());
        Ok(())
    }

    /// Removes a vertex and all its incident edges.
    pub fn remove_vertex(&mut self, id: VertexId) -> Option<Xy> {
        let pos = self.vertices.remove(&id)?;
        if let Some(nbrs) = self.adjacency.remove(&id) {
            for n in nbrs {
                self.edges.remove(&EdgeKey::new(id, n));
                if let Some(set) = self.adjacency.get_mut(&n) {
                    set.remove(&id);
                }
            }
        }
        Some(pos)
    }

    pub fn set_position(&mut self, id: VertexId, pos: Xy) -> Result<(), GraphError> {
        if !pos.is_finite() {
            return Err(GraphError::NonFinite(id));
        }
        let slot = self
            .vertices
            .get_mut(&id)
            .ok_or(GraphError::MissingVertex(id))?;
        *slot = pos;
        Ok(())
    }

    /// Adds an edge. Returns `Ok(false)` when the edge already exists.
    pub fn add_edge(&mut self, u: VertexId, v: VertexId, meta: EdgeMeta) -> Result<bool, GraphError> {
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        for id in [u, v] {
            if !self.vertices.contains_key(&id) {
                return Err(GraphError::MissingVertex(id));
            }
        }
        let key = EdgeKey::new(u, v);
        if self.edges.contains_key(&key) {
            return Ok(false);
        }
        self.edges.insert(key, meta);
        self.adjacency.get_mut(&u).unwrap().insert(v);
        self.adjacency.get_mut(&v).unwrap().insert(u);
        Ok(true)
    }

    pub fn remove_edge(&mut self, u: VertexId, v: VertexId) -> Option<EdgeMeta> {
        let meta = self.edges.remove(&EdgeKey::new(u, v))?;
        self.adjacency.get_mut(&u).map(|s| s.remove(&v));
        self.adjacency.get_mut(&v).map(|s| s.remove(&u));
        Some(meta)
    }

    pub fn has_vertex(&self, id: VertexId) -> bool {
        self.vertices.contains_key(&id)
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        self.edges.contains_key(&EdgeKey::new(u, v))
    }

    pub fn edge(&self, u: VertexId, v: VertexId) -> Option<&EdgeMeta> {
        self.edges.get(&EdgeKey::new(u, v))
    }

    pub fn position(&self, id: VertexId) -> Option<Xy> {
        self.vertices.get(&id).copied()
    }

    pub fn lonlat(&self, id: VertexId) -> Option<LonLat> {
        self.position(id).map(|p| self.projection.unproject(p))
    }

    pub fn vertices(&self) -> impl Iterator<Item = (VertexId, Xy)> + '_ {
        self.vertices.iter().map(|(&id, &p)| (id, p))
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.vertices.keys().copied()
    }

    pub fn edges(&self) -> impl Iterator<Item = (EdgeKey, &EdgeMeta)> + '_ {
        self.edges.iter().map(|(k, m)| (*k, m))
    }

    pub fn edge_keys(&self) -> impl Iterator<Item = EdgeKey> + '_ {
        self.edges.keys().copied()
    }

    pub fn neighbors(&self, id: VertexId) -> impl Iterator<Item = VertexId> + '_ {
        self.adjacency.get(&id).into_iter().flatten().copied()
    }

    pub fn degree(&self, id: VertexId) -> usize {
        self.adjacency.get(&id).map_or(0, |s| s.len())
    }

    /// Endpoints of an edge as positions.
    pub fn segment(&self, key: EdgeKey) -> (Xy, Xy) {
        (self.vertices[&key.a], self.vertices[&key.b])
    }

    pub fn edge_length(&self, key: EdgeKey) -> f64 {
        let (a, b) = self.segment(key);
        a.dist(b)
    }

    pub fn total_length(&self) -> f64 {
        self.edges.keys().map(|&k| self.edge_length(k)).sum()
    }

    /// Bearings of all edges leaving `id`.
    pub fn incident_bearings(&self, id: VertexId) -> Vec<f64> {
        let Some(p) = self.position(id) else {
            return Vec::new();
        };
        self.neighbors(id)
            .filter_map(|n| bearing(p, self.vertices[&n]).ok())
            .collect()
    }

    /// Nearest vertex within `radius` of `p` (ties toward the lower id).
    pub fn nearest_vertex_within(&self, p: Xy, radius: f64) -> Option<VertexId> {
        let mut best: Option<(f64, VertexId)> = None;
        for (&id, &q) in &self.vertices {
            let d = q.dist(p);
            if d <= radius && best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// Connected components as sorted vertex lists, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<VertexId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.vertices.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for n in self.neighbors(v) {
                    if seen.insert(n) {
                        comp.push(n);
                        stack.push(n);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    pub fn has_path(&self, from: VertexId, to: VertexId) -> bool {
        if !self.has_vertex(from) || !self.has_vertex(to) {
            return false;
        }
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(v) = stack.pop() {
            if v == to {
                return true;
            }
            for n in self.neighbors(v) {
                if seen.insert(n) {
                    stack.push(n);
                }
            }
        }
        false
    }

    /// Length-weighted single-source distances with predecessor links.
    ///
    /// Ties between equal-length paths resolve toward the lower predecessor id,
    /// so results are deterministic.
    pub fn dijkstra(&self, source: VertexId) -> ShortestPathTree {
        let mut dist: BTreeMap<VertexId, f64> = BTreeMap::new();
        let mut pred: BTreeMap<VertexId, VertexId> = BTreeMap::new();
        let mut heap = BinaryHeap::new();
        if self.has_vertex(source) {
            dist.insert(source, 0.0);
            heap.push(Reverse(HeapEntry(0.0, source)));
        }
        let mut done = BTreeSet::new();
        while let Some(Reverse(HeapEntry(d, v))) = heap.pop() {
            if !done.insert(v) {
                continue;
            }
            let pv = self.vertices[&v];
            for n in self.neighbors(v) {
                if done.contains(&n) {
                    continue;
                }
                let nd = d + pv.dist(self.vertices[&n]);
                let better = match dist.get(&n) {
                    None => true,
                    Some(&old) => nd < old || (nd == old && v < pred[&n]),
                };
                if better {
                    dist.insert(n, nd);
                    pred.insert(n, v);
                    heap.push(Reverse(HeapEntry(nd, n)));
                }
            }
        }
        ShortestPathTree { source, dist, pred }
    }

    /// Length-weighted shortest path as a vertex sequence from `from` to `to`.
    pub fn shortest_path(&self, from: VertexId, to: VertexId) -> Option<(f64, Vec<VertexId>)> {
        let tree = self.dijkstra(from);
        let d = tree.distance(to)?;
        Some((d, tree.path_to(to)?))
    }

    /// True if every vertex and edge of `sub` is present here with identical
    /// position and metadata.
    pub fn contains_subgraph(&self, sub: &RoadGraph) -> bool {
        sub.vertices
            .iter()
            .all(|(id, p)| self.vertices.get(id) == Some(p))
            && sub.edges.iter().all(|(k, m)| self.edges.get(k) == Some(m))
    }

    /// Copy of this graph with every position mapped through `f`.
    pub fn map_positions(&self, mut f: impl FnMut(Xy) -> Xy) -> RoadGraph {
        let mut g = self.clone();
        for p in g.vertices.values_mut() {
            *p = f(*p);
        }
        g
    }

    /// Re-expresses the graph in another projection plane, preserving lon/lat.
    pub fn reprojected(&self, projection: Projection) -> RoadGraph {
        if self.projection.same_as(&projection) {
            let mut g = self.clone();
            g.projection = projection;
            return g;
        }
        let from = self.projection;
        let mut g = self.map_positions(|p| {
            projection
                .project(from.unproject(p))
                .expect("finite coordinates stay finite")
        });
        g.projection = projection;
        g
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPathTree {
    source: VertexId,
    dist: BTreeMap<VertexId, f64>,
    pred: BTreeMap<VertexId, VertexId>,
}

impl ShortestPathTree {
    pub fn distance(&self, v: VertexId) -> Option<f64> {
        self.dist.get(&v).copied()
    }

    pub fn distances(&self) -> &BTreeMap<VertexId, f64> {
        &self.dist
    }

    pub fn path_to(&self, v: VertexId) -> Option<Vec<VertexId>> {
        self.dist.get(&v)?;
        let mut path = vec![v];
        let mut cur = v;
        while cur != self.source {
            cur = self.pred[&cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry(f64, VertexId);

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}
