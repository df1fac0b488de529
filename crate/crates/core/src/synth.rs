//! Ground-truth road graphs and simulated GPS trips over them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{LonLat, Projection, Xy};
use crate::graph::{EdgeMeta, Provenance, RoadGraph, VertexId};
use crate::traj::{TrajPoint, Trajectory};

/// Epoch seconds of the first simulated trip.
const START_EPOCH: f64 = 1_600_000_000.0;
/// Spacing between the start times of consecutive trips.
const TRIP_SPACING_S: f64 = 3_600.0;
/// Nominal spacing of vertices along the two-crossing polylines.
const CROSSING_VERTEX_SPACING_M: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("could only route {routed} of {requested} trips within {attempts} attempts")]
    Unroutable {
        routed: usize,
        requested: usize,
        attempts: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphKind {
    /// `n_blocks` × `n_blocks` city blocks of side `block_m`.
    Grid { n_blocks: usize, block_m: f64 },
    /// Two perpendicular polylines of `length_m` crossing without a shared vertex.
    TwoCrossingNoConnection { length_m: f64 },
    /// A single edge of `length_m`.
    Straight { length_m: f64 },
}

impl GraphKind {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.into()));
        match *self {
            GraphKind::Grid { n_blocks, block_m } => {
                if n_blocks == 0 || !(block_m > 0.0) {
                    return bad("grid needs n_blocks >= 1 and block_m > 0");
                }
            }
            GraphKind::TwoCrossingNoConnection { length_m } | GraphKind::Straight { length_m } => {
                if !(length_m > 0.0) {
                    return bad("length_m must be positive");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub graph_kind: GraphKind,
    pub n_trips: usize,
    /// m/s
    pub speed: f64,
    /// seconds between fixes
    pub sample_interval: f64,
    /// per-axis standard deviation of white position noise, meters
    pub noise_sigma: f64,
    /// radius of the disc from which each trip's constant offset is drawn
    pub bias_radius: f64,
    pub rng_seed: u64,
    /// lon/lat of the plane origin used when writing files
    pub origin: LonLat,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            graph_kind: GraphKind::Grid {
                n_blocks: 4,
                block_m: 100.0,
            },
            n_trips: 200,
            speed: 10.0,
            sample_interval: 1.0,
            noise_sigma: 4.0,
            bias_radius: 0.0,
            rng_seed: 1,
            origin: LonLat {
                lon: -87.6298,
                lat: 41.8781,
            },
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.graph_kind.validate()?;
        let positive = [
            ("speed", self.speed),
            ("sample_interval", self.sample_interval),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SynthError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        for (name, v) in [("noise_sigma", self.noise_sigma), ("bias_radius", self.bias_radius)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SynthError::InvalidConfig(format!(
                    "{name} must be non-negative"
                )));
            }
        }
        LonLat::new(self.origin.lon, self.origin.lat)
            .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
        Ok(())
    }

    pub fn projection(&self) -> Projection {
        Projection::new(self.origin)
    }
}

fn truth_edge() -> EdgeMeta {
    EdgeMeta::new(0, Provenance::BaseMap)
}

fn polyline(g: &mut RoadGraph, pts: &[Xy]) {
    let ids: Vec<VertexId> = pts.iter().map(|&p| g.add_vertex(p)).collect();
    for w in ids.windows(2) {
        g.add_edge(w[0], w[1], truth_edge()).expect("fresh vertices");
    }
}

/// Builds the ground-truth road graph for `kind` in the plane of `projection`.
///
/// Grids start at the plane origin; the straight road runs east from it; the
/// crossing pair is centered on it.
pub fn make_ground_truth(kind: GraphKind, projection: Projection) -> RoadGraph {
    let mut g = RoadGraph::new(projection);
    match kind {
        GraphKind::Grid { n_blocks, block_m } => {
            let n = n_blocks + 1;
            let id = |i: usize, j: usize| VertexId((j * n + i) as u64);
            for j in 0..n {
                for i in 0..n {
                    g.insert_vertex(id(i, j), Xy::new(i as f64 * block_m, j as f64 * block_m))
                        .expect("unique grid ids");
                }
            }
            for j in 0..n {
                for i in 0..n {
                    if i + 1 < n {
                        g.add_edge(id(i, j), id(i + 1, j), truth_edge()).unwrap();
                    }
                    if j + 1 < n {
                        g.add_edge(id(i, j), id(i, j + 1), truth_edge()).unwrap();
                    }
                }
            }
        }
        GraphKind::Straight { length_m } => {
            polyline(&mut g, &[Xy::ORIGIN, Xy::new(length_m, 0.0)]);
        }
        GraphKind::TwoCrossingNoConnection { length_m } => {
            // an odd segment count keeps the crossing point off every vertex
            let mut segs = (length_m / CROSSING_VERTEX_SPACING_M).round().max(1.0) as usize;
            if segs.is_multiple_of(2) {
                segs += 1;
            }
            let step = length_m / segs as f64;
            let offsets: Vec<f64> = (0..=segs)
                .map(|k| -length_m / 2.0 + k as f64 * step)
                .collect();
            let east_west: Vec<Xy> = offsets.iter().map(|&o| Xy::new(o, 0.0)).collect();
            let north_south: Vec<Xy> = offsets.iter().map(|&o| Xy::new(0.0, o)).collect();
            polyline(&mut g, &east_west);
            polyline(&mut g, &north_south);
        }
    }
    g
}

/// Points along `path` every `spacing` meters, plus the final vertex.
/// Returns (arc length, position) pairs.
fn sample_path(g: &RoadGraph, path: &[VertexId], spacing: f64) -> Vec<(f64, Xy)> {
    let pts: Vec<Xy> = path.iter().map(|&v| g.position(v).unwrap()).collect();
    let total: f64 = pts.windows(2).map(|w| w[0].dist(w[1])).sum();
    let mut out = Vec::new();
    let mut seg = 0;
    let mut seg_start = 0.0;
    let n = (total / spacing + 1e-9).floor() as usize;
    for k in 0..=n {
        let s = (k as f64 * spacing).min(total);
        while seg + 1 < pts.len() - 1 && seg_start + pts[seg].dist(pts[seg + 1]) < s {
            seg_start += pts[seg].dist(pts[seg + 1]);
            seg += 1;
        }
        let len = pts[seg].dist(pts[seg + 1]);
        let t = if len > 0.0 {
            ((s - seg_start) / len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push((s, pts[seg].lerp(pts[seg + 1], t)));
    }
    if total - n as f64 * spacing > 1e-9 {
        out.push((total, *pts.last().unwrap()));
    }
    out
}

/// Simulates `cfg.n_trips` trips between uniformly drawn vertex pairs.
///
/// Attempt `k` draws from its own ChaCha stream `k` of `cfg.rng_seed`, so
/// output is a pure function of the config. Pairs with no connecting path
/// are redrawn, up to `10 * n_trips` attempts.
pub fn simulate_trips(truth: &RoadGraph, cfg: &SynthConfig) -> Result<Vec<Trajectory>, SynthError> {
    cfg.validate()?;
    if cfg.n_trips == 0 {
        return Ok(Vec::new());
    }
    let verts: Vec<VertexId> = truth.vertex_ids().collect();
    let budget = 10 * cfg.n_trips;
    let spacing = cfg.speed * cfg.sample_interval;
    let noise = Normal::new(0.0, cfg.noise_sigma)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let mut trips = Vec::with_capacity(cfg.n_trips);
    let mut attempt = 0;
    while trips.len() < cfg.n_trips && attempt < budget {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(attempt as u64);
        attempt += 1;
        if verts.len() < 2 {
            continue;
        }
        let src = verts[rng.random_range(0..verts.len())];
        let dst = verts[rng.random_range(0..verts.len())];
        if src == dst {
            continue;
        }
        let Some((_, path)) = truth.shortest_path(src, dst) else {
            continue;
        };
        let bias = if cfg.bias_radius > 0.0 {
            let r = cfg.bias_radius * rng.random::<f64>().sqrt();
            Xy::from_angle(rng.random::<f64>() * 360.0) * r
        } else {
            Xy::ORIGIN
        };
        let k = trips.len();
        let t0 = START_EPOCH + k as f64 * TRIP_SPACING_S;
        let points = sample_path(truth, &path, spacing)
            .into_iter()
            .map(|(s, p)| {
                let jitter = if cfg.noise_sigma > 0.0 {
                    Xy::new(noise.sample(&mut rng), noise.sample(&mut rng))
                } else {
                    Xy::ORIGIN
                };
                TrajPoint {
                    t: t0 + s / cfg.speed,
                    pos: p + bias + jitter,
                }
            })
            .collect();
        trips.push(Trajectory {
            id: format!("trip-{k}"),
            points,
        });
    }
    if trips.len() < cfg.n_trips {
        return Err(SynthError::Unroutable {
            routed: trips.len(),
            requested: cfg.n_trips,
            attempts: attempt,
        });
    }
    Ok(trips)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::point_segment_distance;

    fn proj() -> Projection {
        SynthConfig::default().projection()
    }

    #[test]
    fn grid_counts_follow_formula() {
        let g = make_ground_truth(
            GraphKind::Grid {
                n_blocks: 1,
                block_m: 100.0,
            },
            proj(),
        );
        assert_eq!((g.vertex_count(), g.edge_count()), (4, 4));
        assert!(g.edge_keys().all(|k| (g.edge_length(k) - 100.0).abs() < 1e-9));

        let n = 4;
        let g = make_ground_truth(
            GraphKind::Grid {
                n_blocks: n,
                block_m: 100.0,
            },
            proj(),
        );
        assert_eq!(g.vertex_count(), (n + 1) * (n + 1));
        assert_eq!(g.edge_count(), 2 * n * (n + 1));
        assert_eq!(g.edge_count(), 40);
    }

    #[test]
    fn straight_is_single_edge() {
        let g = make_ground_truth(GraphKind::Straight { length_m: 500.0 }, proj());
        assert_eq!((g.vertex_count(), g.edge_count()), (2, 1));
        assert_eq!(g.total_length(), 500.0);
    }

    #[test]
    fn crossing_roads_share_nothing() {
        let g = make_ground_truth(GraphKind::TwoCrossingNoConnection { length_m: 500.0 }, proj());
        let comps = g.components();
        assert_eq!(comps.len(), 2);
        assert!(g.vertices().all(|(_, p)| p.norm() > 1.0));
        assert!((g.total_length() - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn zero_trips_is_empty() {
        let g = make_ground_truth(GraphKind::Straight { length_m: 500.0 }, proj());
        let cfg = SynthConfig {
            graph_kind: GraphKind::Straight { length_m: 500.0 },
            n_trips: 0,
            ..Default::default()
        };
        assert!(simulate_trips(&g, &cfg).unwrap().is_empty());
    }

    #[test]
    fn noiseless_straight_trips_are_evenly_spaced() {
        let kind = GraphKind::Straight { length_m: 500.0 };
        let g = make_ground_truth(kind, proj());
        let cfg = SynthConfig {
            graph_kind: kind,
            n_trips: 5,
            noise_sigma: 0.0,
            ..Default::default()
        };
        for tr in simulate_trips(&g, &cfg).unwrap() {
            assert_eq!(tr.len(), 51);
            for w in tr.points.windows(2) {
                assert!((w[0].pos.dist(w[1].pos) - 10.0).abs() < 1e-9);
                assert!((w[1].t - w[0].t - 1.0).abs() < 1e-6);
            }
            assert!(tr.points.iter().all(|p| p.pos.y == 0.0));
        }
    }

    #[test]
    fn noiseless_grid_trips_lie_on_edges() {
        let kind = GraphKind::Grid {
            n_blocks: 3,
            block_m: 100.0,
        };
        let g = make_ground_truth(kind, proj());
        let cfg = SynthConfig {
            graph_kind: kind,
            n_trips: 30,
            noise_sigma: 0.0,
            speed: 7.0,
            ..Default::default()
        };
        for tr in simulate_trips(&g, &cfg).unwrap() {
            for p in &tr.points {
                let d = g
                    .edge_keys()
                    .map(|k| {
                        let (a, b) = g.segment(k);
                        point_segment_distance(p.pos, a, b)
                    })
                    .fold(f64::INFINITY, f64::min);
                assert!(d < 1e-9, "point {:?} off network by {d}", p.pos);
            }
        }
    }

    #[test]
    fn unroutable_graph_errors() {
        let mut g = RoadGraph::new(proj());
        g.add_vertex(Xy::ORIGIN);
        g.add_vertex(Xy::new(100.0, 0.0));
        let cfg = SynthConfig {
            n_trips: 3,
            ..Default::default()
        };
        assert!(matches!(
            simulate_trips(&g, &cfg),
            Err(SynthError::Unroutable { routed: 0, .. })
        ));
    }

    #[test]
    fn lateral_rms_matches_sigma() {
        let kind = GraphKind::Straight { length_m: 500.0 };
        let g = make_ground_truth(kind, proj());
        let cfg = SynthConfig {
            graph_kind: kind,
            n_trips: 200,
            noise_sigma: 4.0,
            ..Default::default()
        };
        let trips = simulate_trips(&g, &cfg).unwrap();
        let ys: Vec<f64> = trips
            .iter()
            .flat_map(|t| t.points.iter().map(|p| p.pos.y))
            .collect();
        let rms = (ys.iter().map(|y| y * y).sum::<f64>() / ys.len() as f64).sqrt();
        assert!((rms - 4.0).abs() <= 0.3, "rms {rms}");
    }

    #[test]
    fn same_seed_same_output() {
        let kind = GraphKind::Grid {
            n_blocks: 2,
            block_m: 100.0,
        };
        let g = make_ground_truth(kind, proj());
        let cfg = SynthConfig {
            graph_kind: kind,
            n_trips: 20,
            bias_radius: 5.0,
            ..Default::default()
        };
        let a = simulate_trips(&g, &cfg).unwrap();
        let b = simulate_trips(&g, &cfg).unwrap();
        assert_eq!(a, b);
        let c = simulate_trips(
            &g,
            &SynthConfig {
                rng_seed: 2,
                ..cfg
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }
}
