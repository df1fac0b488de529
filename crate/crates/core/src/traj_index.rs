//! Uniform-grid spatial index over trajectory segments and the disc-crossing query.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{circle_exit_param, point_segment_distance, Xy};
use crate::traj::Trajectory;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndexError {
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
}

pub type Cell = (i64, i64);

/// Reference to segment `seg` (points `seg`, `seg + 1`) of trajectory `traj`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SegRef {
    pub traj: u32,
    pub seg: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Forward,
    Reverse,
}

impl Orientation {
    pub fn flipped(self) -> Self {
        match self {
            Orientation::Forward => Orientation::Reverse,
            Orientation::Reverse => Orientation::Forward,
        }
    }

    /// Next index in travel order, if any.
    pub fn step(self, idx: usize, len: usize) -> Option<usize> {
        match self {
            Orientation::Forward => (idx + 1 < len).then_some(idx + 1),
            Orientation::Reverse => idx.checked_sub(1),
        }
    }

    /// Whether `a` comes strictly before `b` in travel order.
    pub fn before(self, a: usize, b: usize) -> bool {
        match self {
            Orientation::Forward => a < b,
            Orientation::Reverse => a > b,
        }
    }
}

/// One maximal run of a trajectory inside a query disc, in one travel orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Crossing {
    pub traj: usize,
    pub orientation: Orientation,
    /// First point inside the disc in travel order.
    pub enter_index: usize,
    /// Last point inside the disc in travel order.
    pub last_index: usize,
}

pub struct TrajIndex {
    cell_size: f64,
    buckets: HashMap<Cell, Vec<SegRef>>,
    trajectories: Vec<Trajectory>,
}

impl TrajIndex {
    pub fn build(trajectories: Vec<Trajectory>, cell_size: f64) -> Result<Self, IndexError> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(IndexError::InvalidCellSize(cell_size));
        }
        let mut buckets: HashMap<Cell, Vec<SegRef>> = HashMap::new();
        for (ti, tr) in trajectories.iter().enumerate() {
            for (si, w) in tr.points.windows(2).enumerate() {
                let r = SegRef {
                    traj: ti as u32,
                    seg: si as u32,
                };
                let (lo, hi) = cell_range(w[0].pos, w[1].pos, 0.0, cell_size);
                for cx in lo.0..=hi.0 {
                    for cy in lo.1..=hi.1 {
                        buckets.entry((cx, cy)).or_default().push(r);
                    }
                }
            }
        }
        Ok(TrajIndex {
            cell_size,
            buckets,
            trajectories,
        })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn bucket_count(&self) -> usize {
        self.buckets.len()
    }

    pub fn bucket(&self, cell: Cell) -> &[SegRef] {
        self.buckets.get(&cell).map_or(&[], |v| v.as_slice())
    }

    pub fn cell_of(&self, p: Xy) -> Cell {
        (
            (p.x / self.cell_size).floor() as i64,
            (p.y / self.cell_size).floor() as i64,
        )
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn trajectory(&self, i: usize) -> &Trajectory {
        &self.trajectories[i]
    }

    pub fn segment(&self, r: SegRef) -> (Xy, Xy) {
        let pts = &self.trajectories[r.traj as usize].points;
        (pts[r.seg as usize].pos, pts[r.seg as usize + 1].pos)
    }

    /// Segments whose distance to `center` is at most `radius`, sorted.
    pub fn segments_near(&self, center: Xy, radius: f64) -> Vec<SegRef> {
        let (lo, hi) = cell_range(center, center, radius, self.cell_size);
        let mut out = Vec::new();
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                for &r in self.bucket((cx, cy)) {
                    let (a, b) = self.segment(r);
                    if point_segment_distance(center, a, b) <= radius {
                        out.push(r);
                    }
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every maximal run of trajectory points inside the disc, emitted once per
    /// travel orientation. Sorted by (trajectory, orientation, enter index).
    pub fn query_crossings(&self, center: Xy, radius: f64) -> Vec<Crossing> {
        let mut inside: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in self.segments_near(center, radius) {
            let ti = r.traj as usize;
            let pts = &self.trajectories[ti].points;
            for idx in [r.seg as usize, r.seg as usize + 1] {
                if pts[idx].pos.dist(center) <= radius {
                    inside.entry(ti).or_default().push(idx);
                }
            }
        }
        let mut out = Vec::new();
        for (ti, mut idxs) in inside {
            idxs.sort_unstable();
            idxs.dedup();
            for (start, end) in runs(&idxs) {
                out.push(Crossing {
                    traj: ti,
                    orientation: Orientation::Forward,
                    enter_index: start,
                    last_index: end,
                });
                out.push(Crossing {
                    traj: ti,
                    orientation: Orientation::Reverse,
                    enter_index: end,
                    last_index: start,
                });
            }
        }
        out.sort_unstable();
        out
    }

    /// Walks trajectory `traj` from `from` in travel order until it first leaves
    /// the circle of `radius` about `center`. Returns the index of the first
    /// outside point and the interpolated point on the circle, or `None` if
    /// the trajectory ends inside.
    pub fn walk_to_exit(
        &self,
        traj: usize,
        from: usize,
        orientation: Orientation,
        center: Xy,
        radius: f64,
    ) -> Option<(usize, Xy)> {
        let pts = &self.trajectories[traj].points;
        let mut prev = from;
        while let Some(next) = orientation.step(prev, pts.len()) {
            let q = pts[next].pos;
            if q.dist(center) > radius {
                let p = pts[prev].pos;
                let t = circle_exit_param(center, radius, p, q);
                return Some((next, p.lerp(q, t)));
            }
            prev = next;
        }
        None
    }
}

/// Maximal runs of consecutive integers in a sorted, deduplicated slice.
fn runs(idxs: &[usize]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut iter = idxs.iter().copied();
    let Some(first) = iter.next() else {
        return out;
    };
    let (mut start, mut end) = (first, first);
    for i in iter {
        if i == end + 1 {
            end = i;
        } else {
            out.push((start, end));
            start = i;
            end = i;
        }
    }
    out.push((start, end));
    out
}

fn cell_range(a: Xy, b: Xy, pad: f64, cell: f64) -> (Cell, Cell) {
    let f = |v: f64| (v / cell).floor() as i64;
    (
        (f(a.x.min(b.x) - pad), f(a.y.min(b.y) - pad)),
        (f(a.x.max(b.x) + pad), f(a.y.max(b.y) + pad)),
    )
}
