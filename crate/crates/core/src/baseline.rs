//! Grid-cell density baseline: count trajectories per cell, threshold, thin
//! to a skeleton and connect skeleton cells into a graph.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{Projection, Xy};
use crate::graph::{EdgeMeta, Provenance, RoadGraph, VertexId};
use crate::simplify::collapse_chains;
use crate::traj::Trajectory;

/// Spurs with fewer cells than this (not counting the junction) are removed.
pub const MIN_SPUR_CELLS: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BaselineError {
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub cell_size: f64,
    pub threshold: u32,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            cell_size: 5.0,
            threshold: 1,
        }
    }
}

/// Distinct-trajectory counts over a rectangular block of cells.
///
/// Cell `(ix, iy)` covers `[ix * cell_size, (ix + 1) * cell_size)` on x and
/// likewise on y; the block spans `ix0 .. ix0 + width`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub cell_size: f64,
    pub ix0: i64,
    pub iy0: i64,
    pub width: usize,
    pub height: usize,
    counts: Vec<u32>,
}

impl DensityGrid {
    /// Lower-left corner of the block.
    pub fn origin(&self) -> Xy {
        Xy::new(self.ix0 as f64 * self.cell_size, self.iy0 as f64 * self.cell_size)
    }

    /// Count at absolute cell `(ix, iy)`; zero outside the block.
    pub fn count(&self, ix: i64, iy: i64) -> u32 {
        match self.local(ix, iy) {
            Some(i) => self.counts[i],
            None => 0,
        }
    }

    fn local(&self, ix: i64, iy: i64) -> Option<usize> {
        let (x, y) = (ix - self.ix0, iy - self.iy0);
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return None;
        }
        Some(y as usize * self.width + x as usize)
    }

    /// Non-zero cells as `((ix, iy), count)`, in row-major order.
    pub fn nonzero(&self) -> impl Iterator<Item = ((i64, i64), u32)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| {
                let x = (i % self.width) as i64 + self.ix0;
                let y = (i / self.width) as i64 + self.iy0;
                ((x, y), c)
            })
    }

    pub fn cell_center(&self, ix: i64, iy: i64) -> Xy {
        Xy::new(
            (ix as f64 + 0.5) * self.cell_size,
            (iy as f64 + 0.5) * self.cell_size,
        )
    }
}

/// Cells crossed by the segment `a`–`b`, by grid traversal from `a`'s cell
/// to `b`'s cell.
pub fn segment_cells(a: Xy, b: Xy, cell: f64) -> Vec<(i64, i64)> {
    let f = |v: f64| (v / cell).floor() as i64;
    let (mut ix, mut iy) = (f(a.x), f(a.y));
    let (ex, ey) = (f(b.x), f(b.y));
    let mut out = vec![(ix, iy)];
    let d = b - a;
    let sx = if d.x > 0.0 { 1 } else { -1 };
    let sy = if d.y > 0.0 { 1 } else { -1 };
    let boundary = |i: i64, s: i64| (if s > 0 { i + 1 } else { i }) as f64 * cell;
    let param = |edge: f64, start: f64, delta: f64| {
        if delta == 0.0 {
            f64::INFINITY
        } else {
            (edge - start) / delta
        }
    };
    let mut tx = param(boundary(ix, sx), a.x, d.x);
    let mut ty = param(boundary(iy, sy), a.y, d.y);
    let dtx = if d.x == 0.0 { f64::INFINITY } else { cell / d.x.abs() };
    let dty = if d.y == 0.0 { f64::INFINITY } else { cell / d.y.abs() };
    let steps = (ex - ix).abs() + (ey - iy).abs();
    for _ in 0..steps {
        let step_x = if ix == ex {
            false
        } else if iy == ey {
            true
        } else {
            tx < ty
        };
        if step_x {
            ix += sx;
            tx += dtx;
        } else {
            iy += sy;
            ty += dty;
        }
        out.push((ix, iy));
    }
    out
}

/// Per-cell count of distinct trajectories whose polyline passes through it.
pub fn density_grid(trajs: &[Trajectory], cell_size: f64) -> Result<DensityGrid, BaselineError> {
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(BaselineError::InvalidCellSize(cell_size));
    }
    let mut per_cell: BTreeMap<(i64, i64), u32> = BTreeMap::new();
    for tr in trajs {
        let mut cells: BTreeSet<(i64, i64)> = BTreeSet::new();
        let f = |v: f64| (v / cell_size).floor() as i64;
        if let [only] = tr.points.as_slice() {
            cells.insert((f(only.pos.x), f(only.pos.y)));
        }
        for w in tr.points.windows(2) {
            cells.extend(segment_cells(w[0].pos, w[1].pos, cell_size));
        }
        for c in cells {
            *per_cell.entry(c).or_default() += 1;
        }
    }
    let (mut x0, mut y0, mut x1, mut y1) = (0i64, 0i64, -1i64, -1i64);
    for (i, &(x, y)) in per_cell.keys().enumerate() {
        if i == 0 {
            (x0, y0, x1, y1) = (x, y, x, y);
        }
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let width = (x1 - x0 + 1).max(0) as usize;
    let height = (y1 - y0 + 1).max(0) as usize;
    let mut grid = DensityGrid {
        cell_size,
        ix0: x0,
        iy0: y0,
        width,
        height,
        counts: vec![0; width * height],
    };
    for ((x, y), c) in per_cell {
        let i = grid.local(x, y).unwrap();
        grid.counts[i] = c;
    }
    Ok(grid)
}

/// Binary image with a one-cell empty border. Local cell `(0, 0)` is absolute
/// cell `(ix0, iy0)`.
struct Mask {
    ix0: i64,
    iy0: i64,
    width: usize,
    height: usize,
    on: Vec<bool>,
}

/// Clockwise from north: N, NE, E, SE, S, SW, W, NW.
const RING: [(i64, i64); 8] = [
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
    (-1, -1),
    (-1, 0),
    (-1, 1),
];

impl Mask {
    fn from_grid(grid: &DensityGrid, threshold: u32) -> Self {
        let width = grid.width + 2;
        let height = grid.height + 2;
        let mut m = Mask {
            ix0: grid.ix0 - 1,
            iy0: grid.iy0 - 1,
            width,
            height,
            on: vec![false; width * height],
        };
        for y in 0..grid.height {
            for x in 0..grid.width {
                if grid.counts[y * grid.width + x] >= threshold {
                    m.on[(y + 1) * width + x + 1] = true;
                }
            }
        }
        m
    }

    fn get(&self, x: i64, y: i64) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.on[y as usize * self.width + x as usize]
    }

    fn ring(&self, x: i64, y: i64) -> [bool; 8] {
        RING.map(|(dx, dy)| self.get(x + dx, y + dy))
    }

    fn cells(&self) -> Vec<(i64, i64)> {
        (0..self.on.len())
            .filter(|&i| self.on[i])
            .map(|i| ((i % self.width) as i64, (i / self.width) as i64))
            .collect()
    }
}

/// Zhang–Suen thinning with deletions applied one cell at a time.
///
/// Each candidate is re-tested against the current image when visited, so a
/// two-cell-thick line or a 2×2 block thins to a connected skeleton instead
/// of vanishing. The number of 8-connected components never changes.
fn thin(mask: &mut Mask) {
    loop {
        let mut changed = false;
        for pass in 0..2 {
            for y in 0..mask.height as i64 {
                for x in 0..mask.width as i64 {
                    if mask.get(x, y) && deletable(&mask.ring(x, y), pass) {
                        mask.on[y as usize * mask.width + x as usize] = false;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            return;
        }
    }
}

fn deletable(p: &[bool; 8], pass: usize) -> bool {
    let b = p.iter().filter(|&&v| v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let transitions = (0..8).filter(|&i| !p[i] && p[(i + 1) % 8]).count();
    if transitions != 1 {
        return false;
    }
    let [n, _, e, _, s, _, w, _] = *p;
    if pass == 0 {
        !(n && e && s) && !(e && s && w)
    } else {
        !(n && e && w) && !(n && s && w)
    }
}

/// Thresholds `grid`, thins the mask to a skeleton and converts it to a graph
/// with provenance `baseline`.
///
/// Skeleton cells become vertices at cell centers and 8-adjacent cells are
/// joined, skipping a diagonal when a shared 4-neighbor already links the
/// pair. Spurs shorter than [`MIN_SPUR_CELLS`] are removed and degree-2
/// chains are simplified with tolerance `cell_size`.
pub fn extract_graph(grid: &DensityGrid, threshold: u32, projection: Projection) -> RoadGraph {
    let mut mask = Mask::from_grid(grid, threshold);
    thin(&mut mask);
    let cells = mask.cells();
    let mut g = RoadGraph::new(projection);
    let mut ids: BTreeMap<(i64, i64), VertexId> = BTreeMap::new();
    for &(x, y) in &cells {
        let (ax, ay) = (x + mask.ix0, y + mask.iy0);
        ids.insert((x, y), g.add_vertex(grid.cell_center(ax, ay)));
    }
    for &(x, y) in &cells {
        for (dx, dy) in [(1, 0), (0, 1), (1, 1), (1, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if !mask.get(nx, ny) {
                continue;
            }
            if dx != 0 && dy != 0 && (mask.get(x + dx, y) || mask.get(x, y + dy)) {
                continue;
            }
            let support = grid
                .count(x + mask.ix0, y + mask.iy0)
                .min(grid.count(nx + mask.ix0, ny + mask.iy0));
            g.add_edge(
                ids[&(x, y)],
                ids[&(nx, ny)],
                EdgeMeta::new(support, Provenance::Baseline),
            )
            .expect("skeleton cells are distinct vertices");
        }
    }
    remove_spurs(&mut g, MIN_SPUR_CELLS);
    collapse_chains(&mut g, grid.cell_size, &BTreeSet::new());
    g
}

/// Removes dangling paths of fewer than `min_cells` vertices hanging off a
/// junction (degree ≥ 3), repeating until none remain.
fn remove_spurs(g: &mut RoadGraph, min_cells: usize) {
    loop {
        let mut doomed: Vec<Vec<VertexId>> = Vec::new();
        for tip in g.vertex_ids().filter(|&v| g.degree(v) == 1) {
            let mut path = vec![tip];
            let mut prev = tip;
            let mut cur = g.neighbors(tip).next().unwrap();
            while g.degree(cur) == 2 && path.len() < min_cells {
                path.push(cur);
                let next = g.neighbors(cur).find(|&n| n != prev).unwrap();
                prev = cur;
                cur = next;
            }
            if g.degree(cur) >= 3 && path.len() < min_cells {
                doomed.push(path);
            }
        }
        if doomed.is_empty() {
            return;
        }
        // one spur per junction per round, so a junction is never stripped
        // of all its branches at once
        let mut seen_junction = BTreeSet::new();
        let mut removed = false;
        for path in doomed {
            let last = *path.last().unwrap();
            let junction = g
                .neighbors(last)
                .find(|&n| !path.contains(&n) && g.degree(n) >= 3);
            let Some(j) = junction else { continue };
            if !seen_junction.insert(j) {
                continue;
            }
            for v in path {
                g.remove_vertex(v);
            }
            removed = true;
        }
        if !removed {
            return;
        }
    }
}
