//! Polyline simplification and degree-2 chain handling shared by the
//! baseline extractor and geometric refinement.

use std::collections::BTreeSet;

use crate::geo::{point_segment_distance, Xy};
use crate::graph::{EdgeKey, EdgeMeta, RoadGraph, VertexId};

/// Indices kept by Douglas–Peucker at tolerance `tol`, always including the
/// first and last point. Sorted ascending.
pub fn douglas_peucker(points: &[Xy], tol: f64) -> Vec<usize> {
    let n = points.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;
    let mut stack = vec![(0, n - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let (a, b) = (points[lo], points[hi]);
        let mut worst = (0.0, lo);
        for (i, &p) in points.iter().enumerate().take(hi).skip(lo + 1) {
            let d = point_segment_distance(p, a, b);
            if d > worst.0 {
                worst = (d, i);
            }
        }
        if worst.0 > tol {
            keep[worst.1] = true;
            stack.push((lo, worst.1));
            stack.push((worst.1, hi));
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

/// Maximal paths whose interior vertices all have degree 2 and are not in
/// `pinned`.
///
/// Each path starts and ends at a vertex of degree other than 2 or a pinned
/// vertex. Components that are pure cycles start and end at their lowest
/// unpinned id. Every edge belongs to exactly one chain.
pub fn chains(g: &RoadGraph, pinned: &BTreeSet<VertexId>) -> Vec<Vec<VertexId>> {
    let is_stop = |v: VertexId| g.degree(v) != 2 || pinned.contains(&v);
    let mut used: BTreeSet<EdgeKey> = BTreeSet::new();
    let mut out = Vec::new();
    let walk = |start: VertexId, first: VertexId, used: &mut BTreeSet<EdgeKey>| {
        let mut path = vec![start, first];
        used.insert(EdgeKey::new(start, first));
        let (mut prev, mut cur) = (start, first);
        while !is_stop(cur) && cur != start {
            let next = g
                .neighbors(cur)
                .find(|&n| n != prev)
                .expect("degree-2 vertex has another neighbor");
            used.insert(EdgeKey::new(cur, next));
            path.push(next);
            prev = cur;
            cur = next;
        }
        path
    };
    for v in g.vertex_ids() {
        if !is_stop(v) {
            continue;
        }
        let nbrs: Vec<VertexId> = g.neighbors(v).collect();
        for n in nbrs {
            if !used.contains(&EdgeKey::new(v, n)) {
                out.push(walk(v, n, &mut used));
            }
        }
    }
    for v in g.vertex_ids() {
        let nbrs: Vec<VertexId> = g.neighbors(v).collect();
        for n in nbrs {
            if !used.contains(&EdgeKey::new(v, n)) {
                out.push(walk(v, n, &mut used));
            }
        }
    }
    out
}

/// Replaces each chain by the Douglas–Peucker subset of its vertices.
///
/// Never removes pinned vertices or chain ends, never creates a duplicate
/// edge, and keeps closed chains at three or more distinct vertices. New
/// edges take the largest support and the first provenance along the run
/// they replace.
pub fn collapse_chains(g: &mut RoadGraph, tol: f64, pinned: &BTreeSet<VertexId>) {
    for chain in chains(g, pinned) {
        if chain.len() <= 2 {
            continue;
        }
        let pts: Vec<Xy> = chain.iter().map(|&v| g.position(v).unwrap()).collect();
        let closed = chain.first() == chain.last();
        let mut keep: Vec<usize> = if closed {
            let far = (1..chain.len() - 1)
                .max_by(|&i, &j| {
                    pts[i]
                        .dist(pts[0])
                        .total_cmp(&pts[j].dist(pts[0]))
                        .then(j.cmp(&i))
                })
                .unwrap();
            let mut k = douglas_peucker(&pts[..=far], tol);
            k.extend(douglas_peucker(&pts[far..], tol).into_iter().skip(1).map(|i| i + far));
            k
        } else {
            douglas_peucker(&pts, tol)
        };
        if closed && keep.len() < 4 {
            continue;
        }
        if !closed && keep.len() == 2 && g.has_edge(chain[0], *chain.last().unwrap()) {
            let (a, b) = (pts[0], *pts.last().unwrap());
            let far = (1..chain.len() - 1)
                .max_by(|&i, &j| {
                    point_segment_distance(pts[i], a, b)
                        .total_cmp(&point_segment_distance(pts[j], a, b))
                        .then(j.cmp(&i))
                })
                .unwrap();
            keep = vec![0, far, chain.len() - 1];
        }
        if keep.len() == chain.len() {
            continue;
        }
        for pair in keep.windows(2) {
            let (i, j) = (pair[0], pair[1]);
            if j == i + 1 {
                continue;
            }
            let run: Vec<EdgeMeta> = (i..j)
                .map(|k| *g.edge(chain[k], chain[k + 1]).unwrap())
                .collect();
            let meta = EdgeMeta::new(
                run.iter().map(|m| m.support).max().unwrap(),
                run[0].provenance,
            );
            for &v in &chain[i + 1..j] {
                g.remove_vertex(v);
            }
            g.add_edge(chain[i], chain[j], meta)
                .expect("chain ends are distinct live vertices");
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{LonLat, Projection};
    use crate::graph::Provenance;

    fn graph() -> RoadGraph {
        RoadGraph::new(Projection::new(LonLat::new(0.0, 0.0).unwrap()))
    }

    fn path(g: &mut RoadGraph, pts: &[(f64, f64)]) -> Vec<VertexId> {
        let ids: Vec<VertexId> = pts.iter().map(|&(x, y)| g.add_vertex(Xy::new(x, y))).collect();
        for w in ids.windows(2) {
            g.add_edge(w[0], w[1], EdgeMeta::new(1, Provenance::Traced))
                .unwrap();
        }
        ids
    }

    #[test]
    fn dp_drops_collinear_points() {
        let pts: Vec<Xy> = (0..10).map(|i| Xy::new(i as f64, 0.0)).collect();
        assert_eq!(douglas_peucker(&pts, 0.1), vec![0, 9]);
        let mut pts = pts;
        pts[5].y = 3.0;
        assert_eq!(douglas_peucker(&pts, 2.5), vec![0, 5, 9]);
        assert_eq!(douglas_peucker(&pts, 3.0), vec![0, 9]);
    }

    #[test]
    fn chains_cover_every_edge_once() {
        let mut g = graph();
        let a = path(&mut g, &[(0.0, 0.0), (10.0, 0.0), (20.0, 0.0), (30.0, 0.0)]);
        path(&mut g, &[(20.0, 50.0), (20.0, 10.0)]);
        let j = g.nearest_vertex_within(Xy::new(20.0, 10.0), 0.1).unwrap();
        g.add_edge(j, a[2], EdgeMeta::new(1, Provenance::Traced)).unwrap();
        let cs = chains(&g, &BTreeSet::new());
        let total: usize = cs.iter().map(|c| c.len() - 1).sum();
        assert_eq!(total, g.edge_count());
        assert_eq!(cs.len(), 3);
    }

    #[test]
    fn pure_cycle_is_one_chain() {
        let mut g = graph();
        let ids = path(&mut g, &[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        g.add_edge(ids[3], ids[0], EdgeMeta::new(1, Provenance::Traced)).unwrap();
        let cs = chains(&g, &BTreeSet::new());
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].first(), cs[0].last());
        assert_eq!(cs[0].len(), 5);
    }

    #[test]
    fn collapse_straightens_chain() {
        let mut g = graph();
        path(&mut g, &[(0.0, 0.0), (10.0, 0.5), (20.0, -0.5), (30.0, 0.0)]);
        collapse_chains(&mut g, 1.0, &BTreeSet::new());
        assert_eq!((g.vertex_count(), g.edge_count()), (2, 1));
    }

    #[test]
    fn collapse_keeps_square_and_avoids_duplicates() {
        let mut g = graph();
        let ids = path(&mut g, &[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        g.add_edge(ids[3], ids[0], EdgeMeta::new(1, Provenance::Traced)).unwrap();
        collapse_chains(&mut g, 100.0, &BTreeSet::new());
        assert!(g.vertex_count() >= 3);
        assert_eq!(g.components().len(), 1);

        // two parallel routes between the same pair of junction-like ends
        let mut g = graph();
        let top = path(&mut g, &[(0.0, 0.0), (5.0, 1.0), (10.0, 0.0)]);
        let bot = path(&mut g, &[(0.0, 0.0), (5.0, -1.0), (10.0, 0.0)]);
        let (a, b) = (top[0], top[2]);
        for (x, y) in [(bot[0], a), (bot[2], b)] {
            for n in g.neighbors(x).collect::<Vec<_>>() {
                g.add_edge(y, n, EdgeMeta::new(1, Provenance::Traced)).unwrap();
            }
            g.remove_vertex(x);
        }
        let pinned: BTreeSet<VertexId> = [a, b].into();
        collapse_chains(&mut g, 5.0, &pinned);
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.components().len(), 1);
    }
}
