#![allow(dead_code)]

use roadtrace_core::geo::{LonLat, Projection, Xy};
use roadtrace_core::graph::RoadGraph;
use roadtrace_core::synth::{make_ground_truth, simulate_trips, GraphKind, SynthConfig};
use roadtrace_core::traj::{TrajPoint, Trajectory};

pub struct Scenario {
    pub truth: RoadGraph,
    pub trips: Vec<Trajectory>,
    pub projection: Projection,
}

pub fn scenario(kind: GraphKind, n_trips: usize, sigma: f64, bias: f64) -> Scenario {
    let cfg = SynthConfig {
        graph_kind: kind,
        n_trips,
        noise_sigma: sigma,
        bias_radius: bias,
        ..Default::default()
    };
    let projection = cfg.projection();
    let truth = make_ground_truth(kind, projection);
    let trips = simulate_trips(&truth, &cfg).unwrap();
    Scenario {
        truth,
        trips,
        projection,
    }
}

pub fn proj() -> Projection {
    Projection::new(LonLat::new(0.0, 0.0).unwrap())
}

pub fn traj(id: &str, pts: &[(f64, f64)]) -> Trajectory {
    Trajectory {
        id: id.into(),
        points: pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| TrajPoint {
                t: i as f64,
                pos: Xy::new(x, y),
            })
            .collect(),
    }
}

/// Straight trajectory through `(0, 0)` along `deg`, sampled every 5 m out to
/// `reach` meters each side.
pub fn line_through_origin(id: &str, deg: f64, reach: f64) -> Trajectory {
    let dir = Xy::from_angle(deg);
    let n = (reach / 5.0) as i64;
    let pts: Vec<(f64, f64)> = (-n..=n)
        .map(|i| {
            let p = dir * (i as f64 * 5.0);
            (p.x, p.y)
        })
        .collect();
    traj(id, &pts)
}
