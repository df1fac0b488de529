//! Shortest-path pruning of pending overlay components.
//!
//! Edges that no gate-to-gate shortest path uses are side streets hanging off
//! the through routes; those, and components too short to matter, get rejected.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use roadtrace_core::graph::{EdgeKey, RoadGraph, VertexId};

use crate::EditError;

/// Upper bound on gate pairs routed per component.
pub const MAX_GATE_PAIRS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneParams {
    /// Pending components shorter than this (meters) are rejected whole.
    pub min_component_len: f64,
    /// Edges on fewer gate-pair shortest paths than this are rejected.
    pub keep_importance_min: u32,
}

impl Default for PruneParams {
    fn default() -> Self {
        PruneParams {
            min_component_len: 50.0,
            keep_importance_min: 1,
        }
    }
}

impl PruneParams {
    pub fn validate(&self) -> Result<(), EditError> {
        if !(self.min_component_len.is_finite() && self.min_component_len >= 0.0) {
            return Err(EditError::InvalidConfig(
                "min_component_len must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// 64-bit FNV-1a, used to derive a stable sampling seed from a session id.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// The two vertices of `comp` at maximum shortest-path distance, ties toward
/// the lexicographically smallest pair.
pub fn diameter_endpoints(g: &RoadGraph, comp: &[VertexId]) -> Option<(VertexId, VertexId)> {
    let mut best: Option<(f64, VertexId, VertexId)> = None;
    for &a in comp {
        let tree = g.dijkstra(a);
        for (&b, &d) in tree.distances() {
            if b <= a {
                continue;
            }
            if best.is_none_or(|(bd, ..)| d > bd) {
                best = Some((d, a, b));
            }
        }
    }
    best.map(|(_, a, b)| (a, b))
}

/// All unordered gate pairs, or a uniform sample of `MAX_GATE_PAIRS` of them
/// drawn from `rng`.
fn gate_pairs(gates: &[VertexId], rng: &mut ChaCha8Rng) -> Vec<(VertexId, VertexId)> {
    let mut all = Vec::new();
    for (i, &a) in gates.iter().enumerate() {
        for &b in &gates[i + 1..] {
            all.push((a, b));
        }
    }
    if all.len() <= MAX_GATE_PAIRS {
        return all;
    }
    let mut picked = index::sample(rng, all.len(), MAX_GATE_PAIRS).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| all[i]).collect()
}

/// Number of gate-pair shortest paths that traverse each edge of `g`.
///
/// Edges on no path are present with importance 0.
pub fn edge_importance(g: &RoadGraph, gates: &[VertexId], rng: &mut ChaCha8Rng) -> BTreeMap<EdgeKey, u32> {
    let mut importance: BTreeMap<EdgeKey, u32> = g.edge_keys().map(|k| (k, 0)).collect();
    let mut by_source: BTreeMap<VertexId, Vec<VertexId>> = BTreeMap::new();
    for (a, b) in gate_pairs(gates, rng) {
        by_source.entry(a).or_default().push(b);
    }
    for (src, targets) in by_source {
        let tree = g.dijkstra(src);
        for t in targets {
            let Some(path) = tree.path_to(t) else { continue };
            for w in path.windows(2) {
                *importance.get_mut(&EdgeKey::new(w[0], w[1])).unwrap() += 1;
            }
        }
    }
    importance
}

/// Edges of `pending` to reject.
///
/// Each connected component is routed between its gates (vertices for which
/// `is_gate` holds), or between its diameter endpoints when it has fewer than
/// two. Components are visited in order of smallest vertex id and share one
/// random stream seeded with `seed`.
pub fn prune_edges(
    pending: &RoadGraph,
    is_gate: impl Fn(VertexId) -> bool,
    params: &PruneParams,
    seed: u64,
) -> BTreeSet<EdgeKey> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = BTreeSet::new();
    for comp in pending.components() {
        if comp.len() < 2 {
            continue;
        }
        let members: BTreeSet<VertexId> = comp.iter().copied().collect();
        let edges: Vec<EdgeKey> = pending
            .edge_keys()
            .filter(|k| members.contains(&k.a))
            .collect();
        let length: f64 = edges.iter().map(|&k| pending.edge_length(k)).sum();
        if length < params.min_component_len {
            out.extend(edges);
            continue;
        }
        if params.keep_importance_min == 0 {
            continue;
        }
        let mut gates: Vec<VertexId> = comp.iter().copied().filter(|&v| is_gate(v)).collect();
        if gates.len() < 2 {
            let (a, b) = diameter_endpoints(pending, &comp).expect("component has an edge");
            gates = vec![a, b];
        }
        let importance = edge_importance(pending, &gates, &mut rng);
        out.extend(
            edges
                .into_iter()
                .filter(|k| importance[k] < params.keep_importance_min),
        );
    }
    out
}
