//! Seeded benchmark inputs: grid road networks with random trips.

use flexride_core::network::{Edge, Node};
use flexride_core::{NodeId, Ownership, Participant, RoadNetwork, Seconds};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A `side` x `side` grid with two-way streets; every third avenue is an HOV
/// corridor.
pub fn grid(side: u32, seed: u64) -> RoadNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = |r: u32, c: u32| r * side + c + 1;
    let nodes = (0..side)
        .flat_map(|r| (0..side).map(move |c| (r, c)))
        .map(|(r, c)| Node {
            id: id(r, c),
            lat: 40.70 + f64::from(r) * 0.001,
            lon: -74.01 + f64::from(c) * 0.001,
        })
        .collect();
    let mut edges = Vec::new();
    for r in 0..side {
        for c in 0..side {
            let mut link = |a: NodeId, b: NodeId, hov: bool| {
                let t = rng.gen_range(20..=60);
                edges.push(Edge { tail: a, head: b, travel_time: t, hov });
                edges.push(Edge { tail: b, head: a, travel_time: t, hov });
            };
            if c + 1 < side {
                link(id(r, c), id(r, c + 1), false);
            }
            if r + 1 < side {
                link(id(r, c), id(r + 1, c), c % 3 == 0);
            }
        }
    }
    RoadNetwork::new(nodes, edges, None).expect("grid is valid")
}

/// `count` trips on `net`, the first `owners` of them car owners, all
/// announced at time zero with windows of 1.2 to 1.6 times the fastest route.
pub fn trips(net: &RoadNetwork, count: usize, owners: usize, seed: u64) -> Vec<Participant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = net.node_count() as NodeId;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (o, e) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
        let Some(lambda) = net.shortest_travel_time(o, e).ok().flatten().filter(|_| o != e) else {
            continue;
        };
        let k = out.len();
        let ed: Seconds = rng.gen_range(0..=120);
        let slack = lambda * rng.gen_range(20..=60) / 100;
        out.push(Participant {
            id: format!("p{k}"),
            ownership: if k < owners {
                Ownership::CarOwner {
                    capacity: rng.gen_range(1..=3),
                }
            } else {
                Ownership::NonCarOwner
            },
            submission: 0,
            origin: o,
            destination: e,
            earliest_departure: ed,
            latest_arrival: ed + lambda + slack.max(1),
            deadline: 600,
        });
    }
    out
}

/// Spreads `trips` over `periods` announcement slots of `period` seconds.
pub fn staggered(mut trips: Vec<Participant>, period: Seconds, periods: usize) -> Vec<Participant> {
    for (k, p) in trips.iter_mut().enumerate() {
        let shift = (k % periods.max(1)) as Seconds * period;
        p.submission = shift;
        p.earliest_departure += shift;
        p.latest_arrival += shift;
    }
    trips.sort_by_key(|p| p.submission);
    trips
}
