use std::collections::{BTreeMap, BTreeSet};

use crate::geo::{normalize_deg, Xy};
use crate::traj_index::TrajIndex;

use super::TraceConfig;

const AXIAL_BINS: usize = 12;
/// Cells whose travel directions are less concentrated than this (fraction
/// of segments within one 45° axial window) look like junctions or crossings
/// and make poor seeds.
const MIN_COHERENCE: f64 = 0.6;
/// A candidate sharing this fraction of its trajectories with an already
/// chosen seed lies on the same road and is skipped.
const MAX_SHARED: f64 = 0.5;

#[derive(Default)]
struct CellStats {
    trajs: BTreeSet<usize>,
    sum: Xy,
    points: usize,
    axial: [u32; AXIAL_BINS],
}

impl CellStats {
    fn coherence(&self) -> f64 {
        let total: u32 = self.axial.iter().sum();
        if total == 0 {
            return 1.0;
        }
        let best = (0..AXIAL_BINS)
            .map(|b| {
                self.axial[(b + AXIAL_BINS - 1) % AXIAL_BINS]
                    + self.axial[b]
                    + self.axial[(b + 1) % AXIAL_BINS]
            })
            .max()
            .unwrap_or(0);
        best as f64 / total as f64
    }
}

/// Up to `k` starting points for tracing an empty base map.
///
/// Trajectory points are binned on a grid of cell size `r_hist`. Cells are
/// taken by descending distinct-trajectory count (ties by cell), skipping
/// cells within `2 * r_hist` of a chosen seed, cells with incoherent travel
/// directions, and cells mostly served by the trajectories of a chosen seed.
/// Each seed is the mean of its cell's points.
pub fn detect_seeds(index: &TrajIndex, cfg: &TraceConfig, k: usize) -> Vec<Xy> {
    let cell = cfg.r_hist;
    let key = |p: Xy| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut cells: BTreeMap<(i64, i64), CellStats> = BTreeMap::new();
    for (ti, tr) in index.trajectories().iter().enumerate() {
        for (i, p) in tr.points.iter().enumerate() {
            let st = cells.entry(key(p.pos)).or_default();
            st.trajs.insert(ti);
            st.sum = st.sum + p.pos;
            st.points += 1;
            if let Some(q) = tr.points.get(i + 1) {
                let d = q.pos - p.pos;
                if d.norm() > 0.0 {
                    let axial = normalize_deg(d.y.atan2(d.x).to_degrees()) % 180.0;
                    let b = ((axial / (180.0 / AXIAL_BINS as f64)) as usize).min(AXIAL_BINS - 1);
                    st.axial[b] += 1;
                }
            }
        }
    }
    let mut order: Vec<(&(i64, i64), &CellStats)> = cells.iter().collect();
    order.sort_by(|a, b| b.1.trajs.len().cmp(&a.1.trajs.len()).then(a.0.cmp(b.0)));

    let mut chosen: Vec<(Xy, &BTreeSet<usize>)> = Vec::new();
    for (c, st) in order {
        if chosen.len() >= k {
            break;
        }
        if st.coherence() < MIN_COHERENCE {
            continue;
        }
        let center = Xy::new((c.0 as f64 + 0.5) * cell, (c.1 as f64 + 0.5) * cell);
        let mean = st.sum * (1.0 / st.points as f64);
        if chosen.iter().any(|(p, _)| p.dist(center) < 2.0 * cell) {
            continue;
        }
        let shared = chosen
            .iter()
            .map(|(_, t)| st.trajs.intersection(t).count())
            .max()
            .unwrap_or(0);
        if shared as f64 >= MAX_SHARED * st.trajs.len() as f64 {
            continue;
        }
        chosen.push((mean, &st.trajs));
    }
    chosen.into_iter().map(|(p, _)| p).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traj::{TrajPoint, Trajectory};

    fn road(y: f64, n: usize) -> Vec<Trajectory> {
        (0..n)
            .map(|k| Trajectory {
                id: format!("t{k}"),
                points: (0..50)
                    .map(|i| TrajPoint {
                        t: i as f64,
                        pos: Xy::new(i as f64 * 10.0, y + (k % 3) as f64 - 1.0),
                    })
                    .collect(),
            })
            .collect()
    }

    #[test]
    fn empty_dataset_has_no_seeds() {
        let idx = TrajIndex::build(vec![], 30.0).unwrap();
        assert!(detect_seeds(&idx, &TraceConfig::default(), 3).is_empty());
    }

    #[test]
    fn seed_lies_on_the_road() {
        let idx = TrajIndex::build(road(100.0, 10), 30.0).unwrap();
        let seeds = detect_seeds(&idx, &TraceConfig::default(), 1);
        assert_eq!(seeds.len(), 1);
        assert!((seeds[0].y - 100.0).abs() <= 12.0);
    }

    #[test]
    fn two_parallel_roads_get_one_seed_each() {
        let mut trajs = road(0.0, 10);
        trajs.extend(road(200.0, 8));
        let idx = TrajIndex::build(trajs, 30.0).unwrap();
        let seeds = detect_seeds(&idx, &TraceConfig::default(), 2);
        assert_eq!(seeds.len(), 2);
        assert!(seeds.iter().any(|s| s.y.abs() <= 12.0));
        assert!(seeds.iter().any(|s| (s.y - 200.0).abs() <= 12.0));
    }
}
