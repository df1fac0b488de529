//! Review state for one base map plus one inferred graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use roadtrace_core::geo::Xy;
use roadtrace_core::graph::{EdgeKey, RoadGraph, VertexId};
use roadtrace_core::refine::merge_into_base;

use crate::prune::{fnv1a, prune_edges, PruneParams};
use crate::EditError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SegmentId(pub u32);

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pending,
    Accepted,
    Rejected,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pending => "pending",
            Status::Accepted => "accepted",
            Status::Rejected => "rejected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

/// One inferred edge under review.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlaySegment {
    pub id: SegmentId,
    pub edge: EdgeKey,
    pub status: Status,
    pub support: u32,
}

/// A state-changing request, as recorded in the action log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Accept { segment: SegmentId },
    Reject { segment: SegmentId },
    Prune { params: PruneParams },
    Teleport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// Seconds since the Unix epoch.
    pub time: f64,
    #[serde(flatten)]
    pub action: Action,
}

/// Where the reviewer should look next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeleportView {
    /// `[west, south, east, north]` in degrees.
    pub bbox: [f64; 4],
    /// `[lon, lat]` of the mean vertex position.
    pub centroid: [f64; 2],
    pub size_m: f64,
    pub segment_ids: Vec<SegmentId>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Segment(OverlaySegment),
    Pruned(Vec<SegmentId>),
    Teleport(Option<TeleportView>),
}

/// Base vertices bucketed by `radius`-sized cells for radius queries.
struct VertexGrid<'a> {
    g: &'a RoadGraph,
    radius: f64,
    cells: BTreeMap<(i64, i64), Vec<VertexId>>,
}

impl<'a> VertexGrid<'a> {
    fn new(g: &'a RoadGraph, radius: f64) -> Self {
        let mut cells: BTreeMap<(i64, i64), Vec<VertexId>> = BTreeMap::new();
        for (v, p) in g.vertices() {
            cells.entry(Self::cell(p, radius)).or_default().push(v);
        }
        VertexGrid { g, radius, cells }
    }

    fn cell(p: Xy, radius: f64) -> (i64, i64) {
        ((p.x / radius).floor() as i64, (p.y / radius).floor() as i64)
    }

    fn within(&self, p: Xy) -> Vec<VertexId> {
        let (cx, cy) = Self::cell(p, self.radius);
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for &v in self.cells.get(&(cx + dx, cy + dy)).into_iter().flatten() {
                    if self.g.position(v).unwrap().dist(p) <= self.radius {
                        out.push(v);
                    }
                }
            }
        }
        out.sort();
        out
    }
}

pub fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn round7(v: f64) -> f64 {
    (v * 1e7).round() / 1e7
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    id: String,
    base: RoadGraph,
    inferred: RoadGraph,
    merge_radius: f64,
    overlay: Vec<OverlaySegment>,
    teleport_cursor: usize,
    log: Vec<LogEntry>,
}

impl Session {
    /// Builds the overlay: every inferred edge that does not duplicate a base
    /// edge, numbered in edge-key order. An inferred edge duplicates a base
    /// edge when each endpoint lies within `merge_radius` of the matching
    /// base endpoint.
    pub fn new(id: impl Into<String>, base: RoadGraph, inferred: RoadGraph, merge_radius: f64) -> Result<Session, EditError> {
        if !(merge_radius.is_finite() && merge_radius > 0.0) {
            return Err(EditError::InvalidConfig("merge_radius must be positive".into()));
        }
        if !base.projection().same_as(inferred.projection()) {
            return Err(EditError::ProjectionMismatch);
        }
        let grid = VertexGrid::new(&base, merge_radius);
        let mut overlay = Vec::new();
        for (k, meta) in inferred.edges() {
            let near_a = grid.within(inferred.position(k.a).unwrap());
            let near_b = grid.within(inferred.position(k.b).unwrap());
            let duplicate = near_a
                .iter()
                .any(|&c| near_b.iter().any(|&d| c != d && base.has_edge(c, d)));
            if !duplicate {
                overlay.push(OverlaySegment {
                    id: SegmentId(overlay.len() as u32),
                    edge: k,
                    status: Status::Pending,
                    support: meta.support,
                });
            }
        }
        Ok(Session {
            id: id.into(),
            base,
            inferred,
            merge_radius,
            overlay,
            teleport_cursor: 0,
            log: Vec::new(),
        })
    }

    /// A fresh session with `log` applied in order, keeping the logged times.
    pub fn replay(
        id: impl Into<String>,
        base: RoadGraph,
        inferred: RoadGraph,
        merge_radius: f64,
        log: &[LogEntry],
    ) -> Result<Session, EditError> {
        let mut s = Session::new(id, base, inferred, merge_radius)?;
        for e in log {
            s.apply(e.action.clone(), e.time)?;
        }
        Ok(s)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn base(&self) -> &RoadGraph {
        &self.base
    }

    pub fn inferred(&self) -> &RoadGraph {
        &self.inferred
    }

    pub fn merge_radius(&self) -> f64 {
        self.merge_radius
    }

    pub fn overlay(&self) -> &[OverlaySegment] {
        &self.overlay
    }

    pub fn segment(&self, id: SegmentId) -> Option<&OverlaySegment> {
        self.overlay.get(id.0 as usize)
    }

    pub fn teleport_cursor(&self) -> usize {
        self.teleport_cursor
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn ids_with(&self, status: Status) -> Vec<SegmentId> {
        self.overlay
            .iter()
            .filter(|s| s.status == status)
            .map(|s| s.id)
            .collect()
    }

    /// Applies `action` stamped with `time` and appends it to the log.
    /// Failed actions leave the session untouched.
    pub fn apply(&mut self, action: Action, time: f64) -> Result<Outcome, EditError> {
        let outcome = match &action {
            Action::Accept { segment } => Outcome::Segment(self.decide(*segment, Status::Accepted)?),
            Action::Reject { segment } => Outcome::Segment(self.decide(*segment, Status::Rejected)?),
            Action::Prune { params } => {
                params.validate()?;
                Outcome::Pruned(self.run_prune(params))
            }
            Action::Teleport => Outcome::Teleport(self.run_teleport()),
        };
        self.log.push(LogEntry { time, action });
        Ok(outcome)
    }

    /// Marks a segment accepted or rejected. The latest decision wins.
    pub fn set_status(&mut self, id: SegmentId, decision: Decision) -> Result<OverlaySegment, EditError> {
        let action = match decision {
            Decision::Accept => Action::Accept { segment: id },
            Decision::Reject => Action::Reject { segment: id },
        };
        match self.apply(action, now())? {
            Outcome::Segment(s) => Ok(s),
            _ => unreachable!("status actions yield a segment"),
        }
    }

    /// Rejects pending segments off the gate-to-gate through routes and
    /// returns their ids. Accepted and rejected segments are never touched.
    pub fn prune(&mut self, params: &PruneParams) -> Result<Vec<SegmentId>, EditError> {
        match self.apply(Action::Prune { params: *params }, now())? {
            Outcome::Pruned(ids) => Ok(ids),
            _ => unreachable!("prune yields pruned ids"),
        }
    }

    /// The pending component at the cursor, advancing the cursor; `None` when
    /// nothing is pending.
    pub fn teleport(&mut self) -> Option<TeleportView> {
        match self.apply(Action::Teleport, now()) {
            Ok(Outcome::Teleport(v)) => v,
            _ => unreachable!("teleport cannot fail"),
        }
    }

    /// The base map with every accepted segment welded in.
    pub fn export(&self) -> RoadGraph {
        let accepted: Vec<EdgeKey> = self
            .overlay
            .iter()
            .filter(|s| s.status == Status::Accepted)
            .map(|s| s.edge)
            .collect();
        merge_into_base(&self.base, &self.inferred, &accepted, self.merge_radius)
            .expect("overlay edges come from the inferred graph")
    }

    fn decide(&mut self, id: SegmentId, status: Status) -> Result<OverlaySegment, EditError> {
        let seg = self
            .overlay
            .get_mut(id.0 as usize)
            .ok_or(EditError::UnknownSegment(id))?;
        seg.status = status;
        Ok(*seg)
    }

    /// Subgraph of pending segments, with the segment behind each edge.
    fn pending_graph(&self) -> (RoadGraph, BTreeMap<EdgeKey, SegmentId>) {
        let mut g = RoadGraph::new(*self.inferred.projection());
        let mut ids = BTreeMap::new();
        for s in self.overlay.iter().filter(|s| s.status == Status::Pending) {
            for v in [s.edge.a, s.edge.b] {
                if !g.has_vertex(v) {
                    g.insert_vertex(v, self.inferred.position(v).unwrap())
                        .expect("fresh id");
                }
            }
            let meta = *self.inferred.edge(s.edge.a, s.edge.b).unwrap();
            g.add_edge(s.edge.a, s.edge.b, meta).expect("valid edge");
            ids.insert(s.edge, s.id);
        }
        (g, ids)
    }

    fn run_prune(&mut self, params: &PruneParams) -> Vec<SegmentId> {
        let (pending, ids) = self.pending_graph();
        let grid = VertexGrid::new(&self.base, self.merge_radius);
        let is_gate = |v: VertexId| !grid.within(pending.position(v).unwrap()).is_empty();
        let rejected: Vec<SegmentId> = prune_edges(&pending, is_gate, params, fnv1a(self.id.as_bytes()))
            .into_iter()
            .map(|k| ids[&k])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for &id in &rejected {
            self.overlay[id.0 as usize].status = Status::Rejected;
        }
        rejected
    }

    /// Pending components, longest first, ties by smallest segment id.
    pub fn pending_components(&self) -> Vec<TeleportView> {
        let (pending, ids) = self.pending_graph();
        let proj = *pending.projection();
        let mut views: Vec<TeleportView> = pending
            .components()
            .into_iter()
            .map(|comp| {
                let members: BTreeSet<VertexId> = comp.iter().copied().collect();
                let mut segment_ids: Vec<SegmentId> = ids
                    .iter()
                    .filter(|(k, _)| members.contains(&k.a))
                    .map(|(_, &id)| id)
                    .collect();
                segment_ids.sort();
                let size_m = ids
                    .keys()
                    .filter(|k| members.contains(&k.a))
                    .map(|&k| pending.edge_length(k))
                    .sum();
                let pts: Vec<Xy> = comp.iter().map(|&v| pending.position(v).unwrap()).collect();
                let lls: Vec<_> = pts.iter().map(|&p| proj.unproject(p)).collect();
                let fold = |f: fn(f64, f64) -> f64, init: f64, get: fn(&_) -> f64| {
                    lls.iter().map(get).fold(init, f)
                };
                let bbox = [
                    fold(f64::min, f64::INFINITY, |l| l.lon),
                    fold(f64::min, f64::INFINITY, |l| l.lat),
                    fold(f64::max, f64::NEG_INFINITY, |l| l.lon),
                    fold(f64::max, f64::NEG_INFINITY, |l| l.lat),
                ]
                .map(round7);
                let n = pts.len() as f64;
                let mean = pts.iter().fold(Xy::ORIGIN, |acc, &p| acc + p) * (1.0 / n);
                let c = proj.unproject(mean);
                TeleportView {
                    bbox,
                    centroid: [round7(c.lon), round7(c.lat)],
                    size_m,
                    segment_ids,
                }
            })
            .collect();
        views.sort_by(|a, b| {
            b.size_m
                .total_cmp(&a.size_m)
                .then(a.segment_ids[0].cmp(&b.segment_ids[0]))
        });
        views
    }

    fn run_teleport(&mut self) -> Option<TeleportView> {
        let mut views = self.pending_components();
        if views.is_empty() {
            return None;
        }
        let i = self.teleport_cursor % views.len();
        self.teleport_cursor = i + 1;
        Some(views.swap_remove(i))
    }
}
