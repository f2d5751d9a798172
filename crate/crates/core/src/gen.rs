//! Seeded random instances small enough for the brute-force oracle.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{Edge, Node, RoadNetwork};
use crate::trips::{Ownership, Participant};
use crate::{NodeId, Seconds};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TinyBounds {
    pub max_nodes: usize,
    pub max_participants: usize,
    pub max_owners: usize,
    pub max_capacity: u32,
    /// Networks with a longer simple path are redrawn.
    pub max_route_length: usize,
}

impl Default for TinyBounds {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            max_participants: 4,
            max_owners: 2,
            max_capacity: 2,
            max_route_length: 6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TinyInstance {
    pub seed: u64,
    pub network: RoadNetwork,
    pub participants: Vec<Participant>,
}

fn random_network(rng: &mut ChaCha8Rng, max_nodes: usize) -> RoadNetwork {
    let n = rng.gen_range(3..=max_nodes.max(3)) as NodeId;
    let nodes: Vec<Node> = (1..=n)
        .map(|id| Node {
            id,
            lat: 40.70 + f64::from(id) * 0.001,
            lon: -74.00 - f64::from(id) * 0.001,
        })
        .collect();
    let mut order: Vec<NodeId> = (1..=n).collect();
    order.shuffle(rng);
    let mut pairs: BTreeSet<(NodeId, NodeId)> = order.windows(2).map(|w| (w[0], w[1])).collect();
    let extra = rng.gen_range(0..=n as usize);
    for _ in 0..extra {
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
            travel_time: rng.gen_range(1..=20),
            hov: rng.gen_bool(0.3),
        })
        .collect();
    RoadNetwork::new(nodes, edges, None).expect("generated network is valid")
}

fn longest_simple_path(net: &RoadNetwork) -> usize {
    fn dfs(net: &RoadNetwork, cur: NodeId, seen: &mut BTreeSet<NodeId>) -> usize {
        let mut best = 0;
        for e in net.out_edges(cur) {
            if seen.insert(e.head) {
                best = best.max(1 + dfs(net, e.head, seen));
                seen.remove(&e.head);
            }
        }
        best
    }
    net.nodes()
        .iter()
        .map(|n| dfs(net, n.id, &mut BTreeSet::from([n.id])))
        .max()
        .unwrap_or(0)
}

/// A reproducible tiny instance. Every participant can reach its destination
/// within its window; car owners come first.
pub fn tiny_instance(seed: u64, bounds: TinyBounds) -> TinyInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let network = loop {
        let net = random_network(&mut rng, bounds.max_nodes);
        if longest_simple_path(&net) <= bounds.max_route_length {
            break net;
        }
    };
    let reachable: Vec<(NodeId, NodeId, Seconds)> = network
        .nodes()
        .iter()
        .flat_map(|a| network.nodes().iter().map(move |b| (a.id, b.id)))
        .filter(|(a, b)| a != b)
        .filter_map(|(a, b)| network.shortest_travel_time(a, b).ok().flatten().map(|t| (a, b, t)))
        .collect();
    let count = rng.gen_range(1..=bounds.max_participants.max(1));
    let owners = rng.gen_range(0..=bounds.max_owners.min(count));
    let participants = (0..count)
        .map(|k| {
            let (origin, destination, lambda) = reachable[rng.gen_range(0..reachable.len())];
            let ed = rng.gen_range(0..=20);
            let la = ed + lambda + rng.gen_range(0..=40);
            let ownership = if k < owners {
                Ownership::CarOwner {
                    capacity: rng.gen_range(1..=bounds.max_capacity.max(1)),
                }
            } else {
                Ownership::NonCarOwner
            };
            Participant {
                id: format!("{}{k}", if k < owners { 'c' } else { 'n' }),
                ownership,
                submission: 0,
                origin,
                destination,
                earliest_departure: ed,
                latest_arrival: la,
                deadline: 600,
            }
        })
        .collect();
    TinyInstance {
        seed,
        network,
        participants,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn respects_bounds_and_is_reproducible() {
        let bounds = TinyBounds::default();
        for seed in 0..50 {
            let a = tiny_instance(seed, bounds);
            let b = tiny_instance(seed, bounds);
            assert_eq!(a.participants, b.participants);
            assert_eq!(a.network.edges(), b.network.edges());
            assert!(a.network.node_count() <= bounds.max_nodes);
            assert!(longest_simple_path(&a.network) <= bounds.max_route_length);
            assert!(a.participants.len() <= bounds.max_participants);
            assert!(a.participants.iter().filter(|p| p.is_car_owner()).count() <= bounds.max_owners);
            for p in &a.participants {
                assert!(p.validate().is_ok());
                let t = a.network.shortest_travel_time(p.origin, p.destination).unwrap().unwrap();
                assert!(t <= p.window());
            }
        }
    }
}
