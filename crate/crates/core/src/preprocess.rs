//! Spatiotemporal preprocessing: accessible nodes per participant, mutually
//! accessible nodes and links per (participant, driver) pair, and the set of
//! viable rider/driver matches. These sets define the model's index space.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::PreprocessError;
use crate::network::{DistanceMap, RoadNetwork};
use crate::trips::EnrichedParticipant;
use crate::{NodeId, Seconds};

pub type PairKey = (String, String);
pub type EdgeKey = (NodeId, NodeId);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessMethod {
    /// Every node on some origin-destination route that fits the window.
    Exact,
    /// Nodes on the first k shortest routes, intersected with the exact set.
    Yen(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreprocessOptions {
    pub method: AccessMethod,
    /// Drop induced edges that no joint schedule of the pair can use.
    pub temporal_filter: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            method: AccessMethod::Yen(10),
            temporal_filter: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AccessSets {
    /// Accessible nodes per feasible participant.
    pub an: BTreeMap<String, BTreeSet<NodeId>>,
    /// Mutually accessible nodes per (participant, car owner) pair,
    /// including each owner's self pair.
    pub an_pair: BTreeMap<PairKey, BTreeSet<NodeId>>,
    pub ae_pair: BTreeMap<PairKey, BTreeSet<EdgeKey>>,
    /// Viable (rider, driver) matches.
    pub rd: BTreeSet<PairKey>,
}

impl AccessSets {
    pub fn pair_nodes(&self, p: &str, d: &str) -> Option<&BTreeSet<NodeId>> {
        self.an_pair.get(&(p.to_owned(), d.to_owned()))
    }

    pub fn pair_edges(&self, p: &str, d: &str) -> Option<&BTreeSet<EdgeKey>> {
        self.ae_pair.get(&(p.to_owned(), d.to_owned()))
    }

    /// Debug dump: participant id to sorted accessible node ids.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .an
            .iter()
            .map(|(id, nodes)| (id.clone(), serde_json::json!(nodes.iter().collect::<Vec<_>>())))
            .collect();
        serde_json::Value::Object(map)
    }
}

/// Shortest-path trees of one participant plus its accessible node set.
struct Reach<'a> {
    from_origin: DistanceMap<'a>,
    to_destination: DistanceMap<'a>,
    nodes: BTreeSet<NodeId>,
}

fn reach<'a>(
    net: &'a RoadNetwork,
    p: &EnrichedParticipant,
    method: AccessMethod,
) -> Result<Reach<'a>, PreprocessError> {
    if !p.feasible {
        return Err(PreprocessError::Infeasible(p.id.clone()));
    }
    let from_origin = net.times_from(p.origin)?;
    let to_destination = net.times_to(p.destination)?;
    let budget = p.window();
    let exact: BTreeSet<NodeId> = net
        .nodes()
        .iter()
        .map(|n| n.id)
        .filter(|&i| match (from_origin.get(i), to_destination.get(i)) {
            (Some(a), Some(b)) => a + b <= budget,
            _ => false,
        })
        .collect();
    let nodes = match method {
        AccessMethod::Exact => exact,
        AccessMethod::Yen(k) => {
            let mut on_paths = BTreeSet::new();
            for path in net.k_shortest_paths(p.origin, p.destination, k.max(1))? {
                on_paths.extend(path.nodes);
            }
            on_paths.intersection(&exact).copied().collect()
        }
    };
    Ok(Reach {
        from_origin,
        to_destination,
        nodes,
    })
}

/// Accessible node set of one participant.
pub fn accessible_nodes(
    net: &RoadNetwork,
    p: &EnrichedParticipant,
    method: AccessMethod,
) -> Result<BTreeSet<NodeId>, PreprocessError> {
    Ok(reach(net, p, method)?.nodes)
}

fn pair_from_reach(
    net: &RoadNetwork,
    p: &EnrichedParticipant,
    rp: &Reach<'_>,
    d: &EnrichedParticipant,
    rd: &Reach<'_>,
    temporal_filter: bool,
) -> (BTreeSet<NodeId>, BTreeSet<EdgeKey>) {
    let nodes: BTreeSet<NodeId> = rp.nodes.intersection(&rd.nodes).copied().collect();
    let mut edges = BTreeSet::new();
    for &i in &nodes {
        for e in net.out_edges(i) {
            if !nodes.contains(&e.head) {
                continue;
            }
            if temporal_filter && !edge_fits(p, rp, d, rd, i, e.head, e.travel_time) {
                continue;
            }
            edges.insert((i, e.head));
        }
    }
    (nodes, edges)
}

fn edge_fits(
    p: &EnrichedParticipant,
    rp: &Reach<'_>,
    d: &EnrichedParticipant,
    rd: &Reach<'_>,
    i: NodeId,
    j: NodeId,
    t: Seconds,
) -> bool {
    let (Some(pi), Some(di), Some(pj), Some(dj)) = (
        rp.from_origin.get(i),
        rd.from_origin.get(i),
        rp.to_destination.get(j),
        rd.to_destination.get(j),
    ) else {
        return false;
    };
    let depart = (p.earliest_departure + pi).max(d.earliest_departure + di);
    depart + t + pj <= p.latest_arrival && depart + t + dj <= d.latest_arrival
}

/// Mutually accessible nodes and links of participant `p` travelling with
/// driver `d` (`p == d` yields the driver's own sets).
pub fn pair_sets(
    net: &RoadNetwork,
    p: &EnrichedParticipant,
    d: &EnrichedParticipant,
    opts: PreprocessOptions,
) -> Result<(BTreeSet<NodeId>, BTreeSet<EdgeKey>), PreprocessError> {
    let rp = reach(net, p, opts.method)?;
    let rd = reach(net, d, opts.method)?;
    Ok(pair_from_reach(net, p, &rp, d, &rd, opts.temporal_filter))
}

/// True when the two time windows overlap with positive length.
pub fn windows_overlap(p: &EnrichedParticipant, d: &EnrichedParticipant) -> bool {
    !(d.latest_arrival <= p.earliest_departure || p.latest_arrival <= d.earliest_departure)
}

/// Pairs `(p, d)` with `p != d`, shared accessible links and overlapping
/// windows.
pub fn viable_matches(participants: &[EnrichedParticipant], sets: &AccessSets) -> BTreeSet<PairKey> {
    let by_id: BTreeMap<&str, &EnrichedParticipant> = participants.iter().map(|p| (p.id.as_str(), p)).collect();
    sets.ae_pair
        .iter()
        .filter(|((p, d), edges)| p != d && !edges.is_empty())
        .filter(|((p, d), _)| match (by_id.get(p.as_str()), by_id.get(d.as_str())) {
            (Some(p), Some(d)) => d.is_car_owner() && windows_overlap(p, d),
            _ => false,
        })
        .map(|(key, _)| key.clone())
        .collect()
}

/// Builds all sets for the feasible participants in `parts`; infeasible
/// participants are skipped.
pub fn build_access_sets(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    opts: PreprocessOptions,
) -> Result<AccessSets, PreprocessError> {
    let feasible: Vec<&EnrichedParticipant> = parts.iter().filter(|p| p.feasible).collect();
    let reaches = feasible
        .iter()
        .map(|p| reach(net, p, opts.method))
        .collect::<Result<Vec<_>, _>>()?;

    let mut sets = AccessSets::default();
    for (p, r) in feasible.iter().zip(&reaches) {
        sets.an.insert(p.id.clone(), r.nodes.clone());
    }
    for (d, rd) in feasible.iter().zip(&reaches) {
        if !d.is_car_owner() {
            continue;
        }
        for (p, rp) in feasible.iter().zip(&reaches) {
            let (nodes, edges) = pair_from_reach(net, p, rp, d, rd, opts.temporal_filter);
            let key = (p.id.clone(), d.id.clone());
            sets.an_pair.insert(key.clone(), nodes);
            sets.ae_pair.insert(key, edges);
        }
    }
    let owned: Vec<EnrichedParticipant> = feasible.into_iter().cloned().collect();
    sets.rd = viable_matches(&owned, &sets);
    Ok(sets)
}
