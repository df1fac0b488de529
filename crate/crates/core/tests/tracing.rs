mod common;

use std::collections::BTreeSet;

use common::{line_through_origin, proj, scenario};
use roadtrace_core::eval::{geo_precision_recall, EvalConfig};
use roadtrace_core::geo::{angle_to_bin, bin_center, point_segment_distance, Xy};
use roadtrace_core::graph::{EdgeMeta, Provenance, RoadGraph, VertexId};
use roadtrace_core::graph_io::write_graph;
use roadtrace_core::synth::{make_ground_truth, GraphKind};
use roadtrace_core::traj::Trajectory;
use roadtrace_core::traj_index::TrajIndex;
use roadtrace_core::tracer::*;

fn trace_scenario(trips: Vec<Trajectory>, base: &RoadGraph, seeds: &[Xy]) -> TraceResult {
    let cfg = TraceConfig::default();
    let idx = TrajIndex::build(trips, cfg.r_hist).unwrap();
    let oracle = GpsOracle::new(&idx, &cfg);
    trace(base, seeds, &oracle, &cfg)
}

/// Independent exit-bearing histogram: scan every point, find runs inside
/// the match disc, walk on to the first point outside the histogram circle
/// and intersect that segment with the circle by solving the quadratic.
fn brute_force_raw(trips: &[Trajectory], center: Xy, cfg: &TraceConfig) -> Vec<u32> {
    let mut raw = vec![0u32; cfg.n_bins];
    for tr in trips {
        let pts: Vec<Xy> = tr.points.iter().map(|p| p.pos).collect();
        let inside: Vec<bool> = pts.iter().map(|p| p.dist(center) <= cfg.r_match).collect();
        let n = pts.len();
        let mut i = 0;
        while i < n {
            if !inside[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < n && inside[i + 1] {
                i += 1;
            }
            let end = i;
            // forward: walk from `start` upward; reverse: from `end` downward
            let forward: Vec<usize> = (start..n).collect();
            let backward: Vec<usize> = (0..=end).rev().collect();
            for order in [forward, backward] {
                for w in order.windows(2) {
                    let (a, b) = (pts[w[0]], pts[w[1]]);
                    if b.dist(center) > cfg.r_hist {
                        let d = b - a;
                        let f = a - center;
                        let qa = d.dot(d);
                        let qb = 2.0 * f.dot(d);
                        let qc = f.dot(f) - cfg.r_hist * cfg.r_hist;
                        let t = (-qb + (qb * qb - 4.0 * qa * qc).sqrt()) / (2.0 * qa);
                        let p = a + d * t;
                        let deg = (p.y - center.y).atan2(p.x - center.x).to_degrees();
                        raw[angle_to_bin(deg.rem_euclid(360.0), cfg.n_bins)] += 1;
                        break;
                    }
                }
            }
            i += 1;
        }
    }
    raw
}

#[test]
fn histogram_matches_brute_force_on_noisy_road() {
    let s = scenario(GraphKind::Straight { length_m: 500.0 }, 100, 4.0, 0.0);
    let cfg = TraceConfig::default();
    let center = Xy::new(250.0, 0.0);
    let expected = brute_force_raw(&s.trips, center, &cfg);
    let idx = TrajIndex::build(s.trips, cfg.r_hist).unwrap();
    let h = compute_polar_histogram(&idx, center, &cfg);
    assert_eq!(h.raw_counts, expected);
    let east = h.window_mass(0, PEAK_HALF_WINDOW);
    let expected_east: u32 = [62, 63, 0, 1, 2].iter().map(|&b| expected[b]).sum();
    assert_eq!(east, expected_east as f64);
    assert!(east > 50.0);
    let top = h.argmax().unwrap();
    assert!(top == 0 || top == 32, "argmax bin {top}");
    let peaks: Vec<usize> = find_unexplored_peaks(&h, &[], &cfg)
        .iter()
        .map(|p| p.bin)
        .collect();
    assert!(peaks.contains(&0) && peaks.contains(&32), "{peaks:?}");
}

#[test]
fn junction_peaks_skip_explored_direction() {
    let cfg = TraceConfig::default();
    let mut trips = Vec::new();
    for k in 0..5 {
        trips.push(line_through_origin(&format!("ew{k}"), 0.0, 200.0));
        trips.push(line_through_origin(&format!("ns{k}"), 90.0, 200.0));
    }
    // each line through the origin exits once along its bearing and once opposite
    let mut raw = vec![0u32; 64];
    for b in [0, 16, 32, 48] {
        raw[b] = 5;
    }
    let idx = TrajIndex::build(trips, cfg.r_hist).unwrap();
    let h = compute_polar_histogram(&idx, Xy::ORIGIN, &cfg);
    assert_eq!(h.raw_counts, raw);
    let bins: BTreeSet<usize> = find_unexplored_peaks(&h, &[0.0], &cfg)
        .iter()
        .map(|p| p.bin)
        .collect();
    assert_eq!(bins, [16, 32, 48].into());
}

#[test]
fn best_action_examples() {
    let cfg = TraceConfig::default();
    let trips = vec![
        line_through_origin("a", 0.0, 200.0),
        line_through_origin("b", 0.0, 200.0),
        line_through_origin("c", 0.0, 200.0),
    ];
    let idx = TrajIndex::build(trips, cfg.r_hist).unwrap();
    let oracle = GpsOracle::new(&idx, &cfg);
    let mut g = RoadGraph::new(proj());
    assert!(best_action(&g, &BTreeSet::new(), &oracle, &cfg).is_none());

    let v = g.add_vertex(Xy::new(-100.0, 0.0));
    let w = g.add_vertex(Xy::new(100.0, 0.0));
    let one: BTreeSet<VertexId> = [w].into();
    let a = best_action(&g, &one, &oracle, &cfg).unwrap();
    assert_eq!((a.vertex, a.bin, a.confidence), (w, 0, 3.0));

    // equal confidence everywhere: lowest vertex id, then lowest bin
    let both: BTreeSet<VertexId> = [v, w].into();
    let a = best_action(&g, &both, &oracle, &cfg).unwrap();
    assert_eq!((a.vertex, a.bin), (v, 0));
}

#[test]
fn one_block_loop_closes() {
    let truth = make_ground_truth(
        GraphKind::Grid {
            n_blocks: 1,
            block_m: 100.0,
        },
        proj(),
    );
    // noiseless laps around the block in both directions
    let corners = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)];
    let mut lap: Vec<(f64, f64)> = Vec::new();
    for k in 0..8 {
        let (a, b) = (corners[k % 4], corners[(k + 1) % 4]);
        for i in 0..20 {
            let t = i as f64 / 20.0;
            lap.push((a.0 + (b.0 - a.0) * t, a.1 + (b.1 - a.1) * t));
        }
    }
    let rev: Vec<(f64, f64)> = lap.iter().rev().copied().collect();
    let trips: Vec<Trajectory> = (0..3)
        .flat_map(|k| {
            [
                common::traj(&format!("cw{k}"), &rev),
                common::traj(&format!("ccw{k}"), &lap),
            ]
        })
        .collect();
    let out = trace_scenario(trips, &RoadGraph::new(proj()), &[Xy::new(50.0, 0.0)]);
    let g = &out.graph;
    // a connected graph with at least as many edges as vertices has a cycle
    assert_eq!(g.components().len(), 1);
    assert!(g.edge_count() >= g.vertex_count(), "no cycle formed");
    let r = geo_precision_recall(g, &truth, &EvalConfig::default());
    assert!(r.precision >= 0.95 && r.recall >= 0.95, "{r:?}");
}

#[test]
fn straight_road_from_one_end() {
    let s = scenario(GraphKind::Straight { length_m: 500.0 }, 50, 4.0, 0.0);
    let out = trace_scenario(s.trips, &RoadGraph::new(s.projection), &[Xy::ORIGIN]);
    let r = geo_precision_recall(&out.graph, &s.truth, &EvalConfig::default());
    assert!(r.precision >= 0.95, "precision {}", r.precision);
    assert!(r.recall >= 0.95, "recall {}", r.recall);
    let (a, b) = (Xy::ORIGIN, Xy::new(500.0, 0.0));
    let n = out.graph.vertex_count() as f64;
    let ms: f64 = out
        .graph
        .vertices()
        .map(|(_, p)| point_segment_distance(p, a, b).powi(2))
        .sum();
    assert!((ms / n).sqrt() <= 6.0);
    assert_eq!(out.stop_reason, StopReason::Exhausted);
}

#[test]
fn crossing_roads_stay_disconnected() {
    let s = scenario(GraphKind::TwoCrossingNoConnection { length_m: 1000.0 }, 200, 4.0, 0.0);
    let cfg = TraceConfig::default();
    let idx = TrajIndex::build(s.trips, cfg.r_hist).unwrap();
    let seeds = detect_seeds(&idx, &cfg, 2);
    let out = trace(&RoadGraph::new(s.projection), &seeds, &GpsOracle::new(&idx, &cfg), &cfg);
    let g = &out.graph;
    let on_ew = |p: Xy| p.y.abs() <= 15.0 && p.x.abs() > 30.0;
    let on_ns = |p: Xy| p.x.abs() <= 15.0 && p.y.abs() > 30.0;
    let ew: Vec<VertexId> = g.vertices().filter(|(_, p)| on_ew(*p)).map(|(v, _)| v).collect();
    let ns: Vec<VertexId> = g.vertices().filter(|(_, p)| on_ns(*p)).map(|(v, _)| v).collect();
    assert!(ew.len() > 10 && ns.len() > 10);
    for &a in ew.iter().step_by(5) {
        for &b in ns.iter().step_by(5) {
            assert!(!g.has_path(a, b), "{a} and {b} are connected");
        }
    }
    let r = geo_precision_recall(g, &s.truth, &EvalConfig::default());
    assert!(r.recall >= 0.9, "{r:?}");
}

#[test]
fn trace_invariants_on_grid() {
    let s = scenario(
        GraphKind::Grid {
            n_blocks: 3,
            block_m: 100.0,
        },
        300,
        4.0,
        0.0,
    );
    let cfg = TraceConfig::default();
    // base map: the bottom row street
    let mut base = RoadGraph::new(s.projection);
    let b0 = base.add_vertex(Xy::new(0.0, 0.0));
    let b1 = base.add_vertex(Xy::new(100.0, 0.0));
    base.add_edge(b0, b1, EdgeMeta::new(0, Provenance::BaseMap))
        .unwrap();
    let idx = TrajIndex::build(s.trips, cfg.r_hist).unwrap();
    let oracle = GpsOracle::new(&idx, &cfg);
    let seeds = detect_seeds(&idx, &cfg, 2);
    let out = trace(&base, &seeds, &oracle, &cfg);
    let g = &out.graph;

    assert!(g.contains_subgraph(&base));
    let created: Vec<(VertexId, Xy)> = g.vertices().filter(|(v, _)| !base.has_vertex(*v)).collect();
    for (k, meta) in g.edges() {
        if meta.provenance != Provenance::Traced {
            continue;
        }
        assert!(meta.support as f64 >= cfg.conf_threshold);
        assert!(g.edge_length(k) <= cfg.step_d + cfg.merge_radius + 1e-9);
    }
    for (i, (_, p)) in created.iter().enumerate() {
        for (_, q) in &created[i + 1..] {
            assert!(p.dist(*q) > cfg.merge_radius);
        }
    }
    assert_eq!(out.edges_added, g.edge_count() - base.edge_count());
}

#[test]
fn tracing_is_deterministic() {
    let s = scenario(
        GraphKind::Grid {
            n_blocks: 3,
            block_m: 100.0,
        },
        300,
        4.0,
        0.0,
    );
    let cfg = TraceConfig::default();
    let idx = TrajIndex::build(s.trips, cfg.r_hist).unwrap();
    let seeds = detect_seeds(&idx, &cfg, 3);
    let run = || {
        let out = trace(&RoadGraph::new(s.projection), &seeds, &GpsOracle::new(&idx, &cfg), &cfg);
        write_graph(&out.graph)
    };
    let first = run();
    assert_eq!(first, run());
}

#[test]
fn max_iterations_truncates() {
    let s = scenario(GraphKind::Straight { length_m: 500.0 }, 50, 4.0, 0.0);
    let cfg = TraceConfig {
        max_iterations: 3,
        ..Default::default()
    };
    let idx = TrajIndex::build(s.trips, cfg.r_hist).unwrap();
    let out = trace(&RoadGraph::new(s.projection), &[Xy::ORIGIN], &GpsOracle::new(&idx, &cfg), &cfg);
    assert!(out.truncated());
    assert_eq!(out.iterations, 3);
}

#[test]
fn seeds_near_base_vertices_merge() {
    let mut base = RoadGraph::new(proj());
    base.add_vertex(Xy::new(0.0, 0.0));
    let idx = TrajIndex::build(vec![], 30.0).unwrap();
    let cfg = TraceConfig::default();
    let out = trace(&base, &[Xy::new(4.0, 0.0), Xy::new(50.0, 0.0)], &GpsOracle::new(&idx, &cfg), &cfg);
    assert_eq!(out.graph.vertex_count(), 2);
}

#[test]
fn step_direction_is_bin_center() {
    let cfg = TraceConfig::default();
    let mut g = RoadGraph::new(proj());
    let v = g.add_vertex(Xy::ORIGIN);
    let out = apply_step(
        &mut g,
        &TraceAction {
            vertex: v,
            bin: 16,
            confidence: 3.0,
        },
        &cfg,
    );
    let p = g.position(out.vertex.unwrap()).unwrap();
    let expected = Xy::from_angle(bin_center(16, 64)) * cfg.step_d;
    assert!(p.dist(expected) < 1e-12);
}
