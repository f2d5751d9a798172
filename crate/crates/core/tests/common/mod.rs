#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use flexride_core::gen::{tiny_instance, TinyInstance, TinyBounds};
use flexride_core::milp::{build_model, validate_solution, decode_values, ModelInstance};
use flexride_core::network::{Edge, Node};
use flexride_core::preprocess::build_access_sets;
use flexride_core::solve::solve_exact;
use flexride_core::trips::enrich_all;
use flexride_core::horizon::HorizonConfig;
use flexride_core::{
    AccessMethod, AccessSets, Assignment, EnrichedParticipant, ModelConfig, NodeId, ObjectiveMode, PreprocessOptions,
    Ownership, Participant, Rational64, RoadNetwork, Seconds, SolveLimits, SolverOutcome,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn exact_preprocess() -> PreprocessOptions {
    PreprocessOptions {
        method: AccessMethod::Exact,
        temporal_filter: true,
    }
}

pub fn weighted(factor: i64, driver_arcs: bool) -> ModelConfig {
    let mut cfg = ModelConfig {
        objective: ObjectiveMode::weighted(Rational64::from_integer(factor)),
        ..ModelConfig::default()
    };
    cfg.objective.include_driver_arcs = driver_arcs;
    cfg
}

/// Objective modes checked on every tiny instance.
pub fn objective_configs() -> Vec<(&'static str, ModelConfig)> {
    vec![
        ("as-printed", ModelConfig::default()),
        ("weighted-2-riders", weighted(2, false)),
        ("weighted-3-all", weighted(3, true)),
    ]
}

pub fn with_flex(cfg: ModelConfig, flex: bool) -> ModelConfig {
    ModelConfig { flex_roles: flex, ..cfg }
}

pub fn with_hov(cfg: ModelConfig, hov: bool) -> ModelConfig {
    ModelConfig { hov_enabled: hov, ..cfg }
}

pub fn tiny(seed: u64) -> TinyInstance {
    tiny_instance(seed, TinyBounds::default())
}

pub struct Built {
    pub parts: Vec<EnrichedParticipant>,
    pub sets: AccessSets,
    pub model: ModelInstance,
}

pub fn build(t: &TinyInstance, cfg: &ModelConfig) -> Built {
    let net = &t.network;
    let parts = enrich_all(net, &t.participants).unwrap();
    let sets = build_access_sets(net, &parts, exact_preprocess()).unwrap();
    let model = build_model(net, &parts, &sets, cfg).unwrap();
    Built { parts, sets, model }
}

/// Solves exactly and insists on an optimum that decodes and validates.
pub fn solve_and_check(net: &RoadNetwork, b: &Built, cfg: &ModelConfig) -> Result<(SolverOutcome, Assignment), String> {
    let out = solve_exact(&b.model, SolveLimits::default()).map_err(|e| e.to_string())?;
    if !out.is_optimal() {
        return Err(format!("status {}", out.status));
    }
    let values = out.values.as_ref().unwrap();
    if let Some(v) = b.model.first_violation(values) {
        return Err(v);
    }
    let a = decode_values(&b.model, values).map_err(|e| e.to_string())?;
    if Some(a.objective_value) != out.objective {
        return Err(format!("decoded objective {} vs solver {:?}", a.objective_value, out.objective));
    }
    let report = validate_solution(net, &b.parts, Some(&b.sets), cfg, &a);
    if !report.is_ok() {
        return Err(format!("validation failed:\n{report}"));
    }
    Ok((out, a))
}

pub fn random_network(rng: &mut ChaCha8Rng, min_nodes: u32, max_nodes: u32, extra_per_node: u32) -> RoadNetwork {
    let n = rng.gen_range(min_nodes..=max_nodes);
    let nodes = (1..=n).map(|id| Node { id, lat: 0.0, lon: 0.0 }).collect();
    let mut pairs = BTreeSet::new();
    for id in 1..n {
        pairs.insert((id, id + 1));
    }
    for _ in 0..rng.gen_range(0..=extra_per_node * n) {
        let (a, b) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        if a != b {
            pairs.insert((a, b));
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(tail, head)| Edge {
            tail,
            head,
            travel_time: rng.gen_range(1..=30),
            hov: rng.gen_bool(0.2),
        })
        .collect();
    RoadNetwork::new(nodes, edges, None).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All-pairs travel times by Floyd-Warshall, indexed by node id.
pub fn all_pairs(net: &RoadNetwork) -> Vec<Vec<Option<Seconds>>> {
    let n = net.nodes().iter().map(|n| n.id).max().unwrap_or(0) as usize + 1;
    let mut d = vec![vec![None; n]; n];
    for node in net.nodes() {
        d[node.id as usize][node.id as usize] = Some(0);
    }
    for e in net.edges() {
        let cur = &mut d[e.tail as usize][e.head as usize];
        if cur.is_none_or(|c| e.travel_time < c) {
            *cur = Some(e.travel_time);
        }
    }
    for k in 0..n {
        for i in 0..n {
            let Some(ik) = d[i][k] else { continue };
            for j in 0..n {
                if let Some(kj) = d[k][j] {
                    if d[i][j].is_none_or(|c| ik + kj < c) {
                        d[i][j] = Some(ik + kj);
                    }
                }
            }
        }
    }
    d
}

/// Every simple path from `i` to `j`, sorted by total time and then by node
/// sequence.
pub fn all_simple_paths(net: &RoadNetwork, i: NodeId, j: NodeId) -> Vec<(Seconds, Vec<NodeId>)> {
    fn walk(net: &RoadNetwork, path: &mut Vec<NodeId>, time: Seconds, target: NodeId, out: &mut Vec<(Seconds, Vec<NodeId>)>) {
        let cur = *path.last().unwrap();
        if cur == target {
            out.push((time, path.clone()));
            return;
        }
        let next: Vec<(NodeId, Seconds)> = net.out_edges(cur).map(|e| (e.head, e.travel_time)).collect();
        for (h, t) in next {
            if !path.contains(&h) {
                path.push(h);
                walk(net, path, time + t, target, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(net, &mut vec![i], 0, j, &mut out);
    out.sort();
    out
}

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn highs_adapter() -> PathBuf {
    manifest_dir().join("../../scripts/highs_adapter.py")
}

/// Whether python3 with scipy's MILP interface is importable.
pub fn scipy_available() -> bool {
    std::process::Command::new("python3")
        .args(["-c", "from scipy.optimize import milp"])
        .output()
        .is_ok_and(|o| o.status.success())
}

pub fn shell_quote(p: &std::path::Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

/// Config used for the pinned external solutions.
pub fn pinned_config() -> ModelConfig {
    weighted(2, false)
}

/// Seeds that have a pinned solution file, with the file path.
pub fn pinned_solutions() -> Vec<(u64, PathBuf)> {
    let dir = manifest_dir().join("tests/fixtures/pinned");
    let mut out: Vec<(u64, PathBuf)> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| {
            let path = e.ok()?.path();
            let seed = path.file_stem()?.to_str()?.strip_prefix("seed_")?.parse().ok()?;
            Some((seed, path))
        })
        .collect();
    out.sort();
    out
}

pub fn horizon_network() -> RoadNetwork {
    let nodes = (1..=6).map(|id| Node {
        id,
        lat: 40.75 + f64::from(id) * 0.002,
        lon: -73.99 + f64::from(id) * 0.002,
    });
    let edges = [
        (1, 2, 60, false),
        (2, 3, 60, false),
        (3, 4, 60, false),
        (1, 3, 150, true),
        (2, 4, 150, false),
        (4, 5, 60, false),
        (5, 6, 60, false),
        (3, 5, 100, true),
        (6, 1, 200, false),
    ]
    .into_iter()
    .map(|(tail, head, travel_time, hov)| Edge {
        tail,
        head,
        travel_time,
        hov,
    });
    RoadNetwork::new(nodes.collect(), edges.collect(), None).unwrap()
}

#[allow(clippy::too_many_arguments)]
pub fn announce(
    id: &str,
    capacity: Option<u32>,
    submission: Seconds,
    origin: NodeId,
    destination: NodeId,
    ed: Seconds,
    la: Seconds,
    deadline: Seconds,
) -> Participant {
    Participant {
        id: id.into(),
        ownership: capacity.map_or(Ownership::NonCarOwner, |capacity| Ownership::CarOwner { capacity }),
        submission,
        origin,
        destination,
        earliest_departure: ed,
        latest_arrival: la,
        deadline,
    }
}

/// Twenty announcements over twelve 300 s periods: plain pairs, a pickup
/// chain, a role shift, deadline and window expiries, and a rider still
/// waiting at the end.
pub fn scripted_stream() -> Vec<Participant> {
    vec![
        announce("d1", Some(2), 0, 1, 4, 0, 400, 600),
        announce("r1", None, 0, 1, 3, 0, 300, 600),
        announce("r2", None, 100, 2, 4, 300, 600, 300),
        announce("d2", Some(1), 250, 2, 5, 300, 700, 600),
        announce("r3", None, 400, 4, 6, 600, 900, 200),
        announce("r4", None, 500, 1, 2, 500, 600, 1000),
        announce("c3", Some(1), 900, 3, 6, 900, 1300, 600),
        announce("r5", None, 900, 4, 6, 900, 1400, 600),
        announce("c4", Some(2), 1200, 1, 5, 1200, 1700, 600),
        announce("c5", Some(1), 1200, 2, 5, 1200, 1700, 600),
        announce("r6", None, 1500, 5, 6, 1500, 1700, 900),
        announce("d7", Some(1), 1800, 4, 6, 1800, 2200, 600),
        announce("r7", None, 1800, 5, 6, 1800, 2200, 600),
        announce("r8", None, 2100, 1, 4, 2100, 2600, 1200),
        announce("r9", None, 2100, 2, 4, 2100, 2600, 1200),
        announce("c8", Some(2), 2400, 1, 4, 2400, 2800, 600),
        announce("c9", Some(1), 2700, 6, 1, 2700, 3300, 200),
        announce("r10", None, 3000, 3, 5, 3000, 3500, 1000),
        announce("c10", Some(1), 3300, 2, 5, 3300, 3700, 600),
        announce("r11", None, 3300, 1, 2, 3300, 3700, 1000),
    ]
}

/// One rider and two car owners on the same trip: the second owner rides
/// along, so more people are matched than there are non-owners.
pub fn over_hundred_stream() -> Vec<Participant> {
    vec![
        announce("c1", Some(2), 0, 1, 3, 0, 400, 600),
        announce("c2", Some(1), 0, 1, 3, 0, 400, 600),
        announce("r", None, 0, 1, 3, 0, 400, 600),
    ]
}

pub fn horizon_config(model: ModelConfig) -> HorizonConfig {
    HorizonConfig {
        period: 300,
        start: 0,
        end: 3600,
        model,
        preprocess: exact_preprocess(),
        ..HorizonConfig::default()
    }
}
