//! Brute-force optimizer over the problem semantics. It never looks at the
//! access sets or the MILP, so agreement with the exact solver certifies the
//! encoding on small instances.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;

use crate::error::OracleError;
use crate::milp::{Assignment, Leg, ModelConfig, RouteStop};
use crate::network::RoadNetwork;
use crate::trips::EnrichedParticipant;
use crate::{NodeId, Seconds};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleLimits {
    pub max_nodes: usize,
    pub max_participants: usize,
    pub max_route_length: usize,
    pub max_legs_per_rider: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_nodes: 8,
            max_participants: 4,
            max_route_length: 6,
            max_legs_per_rider: 3,
        }
    }
}

/// One leg as positions on the carrying driver's route.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LegPlan {
    driver: usize,
    board: usize,
    alight: usize,
}

struct Oracle<'a> {
    net: &'a RoadNetwork,
    parts: &'a [EnrichedParticipant],
    cfg: &'a ModelConfig,
    limits: OracleLimits,
}

impl<'a> Oracle<'a> {
    /// Simple origin-destination routes the owner can drive inside its window.
    fn routes(&self, d: usize) -> Result<Vec<Vec<NodeId>>, OracleError> {
        let p = &self.parts[d];
        let mut out = Vec::new();
        let mut path = vec![p.origin];
        self.extend_route(p, &mut path, p.earliest_departure, &mut out)?;
        Ok(out)
    }

    fn extend_route(
        &self,
        p: &EnrichedParticipant,
        path: &mut Vec<NodeId>,
        time: Seconds,
        out: &mut Vec<Vec<NodeId>>,
    ) -> Result<(), OracleError> {
        let cur = *path.last().expect("non-empty path");
        if cur == p.destination {
            if path.len() - 1 > self.limits.max_route_length {
                return Err(OracleError::ExceedsLimits(format!(
                    "{} has a feasible route with {} edges",
                    p.id,
                    path.len() - 1
                )));
            }
            out.push(path.clone());
            return Ok(());
        }
        for e in self.net.out_edges(cur) {
            let next_time = time + e.travel_time;
            if next_time > p.latest_arrival || path.contains(&e.head) {
                continue;
            }
            path.push(e.head);
            self.extend_route(p, path, next_time, out)?;
            path.pop();
        }
        Ok(())
    }

    /// Every itinerary for rider `p` over the chosen routes.
    fn itineraries(&self, p: usize, routes: &BTreeMap<usize, Vec<NodeId>>) -> Result<Vec<Vec<LegPlan>>, OracleError> {
        let rider = &self.parts[p];
        let mut out = Vec::new();
        let mut legs = Vec::new();
        let mut visited = BTreeSet::from([rider.origin]);
        self.extend_itinerary(p, routes, rider.origin, &mut legs, &mut visited, &mut out)?;
        Ok(out)
    }

    fn extend_itinerary(
        &self,
        p: usize,
        routes: &BTreeMap<usize, Vec<NodeId>>,
        cur: NodeId,
        legs: &mut Vec<LegPlan>,
        visited: &mut BTreeSet<NodeId>,
        out: &mut Vec<Vec<LegPlan>>,
    ) -> Result<(), OracleError> {
        let dest = self.parts[p].destination;
        for (&d, route) in routes {
            if d == p || legs.iter().any(|l| l.driver == d) {
                continue;
            }
            let Some(board) = route.iter().position(|&n| n == cur) else { continue };
            for alight in board + 1..route.len() {
                let n = route[alight];
                if visited.contains(&n) {
                    break;
                }
                if legs.len() == self.limits.max_legs_per_rider {
                    return Err(OracleError::ExceedsLimits(format!(
                        "{} could use more than {} legs",
                        self.parts[p].id, self.limits.max_legs_per_rider
                    )));
                }
                legs.push(LegPlan { driver: d, board, alight });
                let added: Vec<NodeId> = route[board + 1..=alight].to_vec();
                visited.extend(added.iter().copied());
                if n == dest {
                    out.push(legs.clone());
                } else {
                    self.extend_itinerary(p, routes, n, legs, visited, out)?;
                }
                for a in &added {
                    visited.remove(a);
                }
                legs.pop();
                if n == dest {
                    break;
                }
            }
        }
        Ok(())
    }

    /// Earliest schedule, or `None` when the time windows cannot be met.
    ///
    /// Returns driver stop times keyed like `routes` and, per rider, the
    /// times at each node of its path.
    #[allow(clippy::type_complexity)]
    fn schedule(
        &self,
        routes: &BTreeMap<usize, Vec<NodeId>>,
        plans: &BTreeMap<usize, Vec<LegPlan>>,
    ) -> Option<(BTreeMap<usize, Vec<Seconds>>, BTreeMap<usize, Vec<Seconds>>)> {
        // Time slots: driver stops first, then rider path nodes.
        let mut slot_of_driver: BTreeMap<usize, usize> = BTreeMap::new();
        let mut lower: Vec<Seconds> = Vec::new();
        let mut upper: Vec<Seconds> = Vec::new();
        // value[a] >= value[b] + c
        let mut edges: Vec<(usize, usize, Seconds)> = Vec::new();
        for (&d, route) in routes {
            let p = &self.parts[d];
            let base = lower.len();
            slot_of_driver.insert(d, base);
            for k in 0..route.len() {
                lower.push(p.earliest_departure);
                upper.push(p.latest_arrival);
                if k > 0 {
                    let t = self.net.travel_time(route[k - 1], route[k]).expect("route edge");
                    edges.push((base + k, base + k - 1, t));
                }
            }
        }
        let mut slot_of_rider: BTreeMap<usize, usize> = BTreeMap::new();
        for (&r, legs) in plans {
            let p = &self.parts[r];
            let base = lower.len();
            slot_of_rider.insert(r, base);
            let mut m = 0;
            lower.push(p.earliest_departure);
            upper.push(p.latest_arrival);
            for leg in legs {
                let route = &routes[&leg.driver];
                let dbase = slot_of_driver[&leg.driver];
                for k in leg.board..leg.alight {
                    // Rider and driver are together when the edge starts.
                    edges.push((base + m, dbase + k, 0));
                    edges.push((dbase + k, base + m, 0));
                    let t = self.net.travel_time(route[k], route[k + 1]).expect("route edge");
                    lower.push(p.earliest_departure);
                    upper.push(p.latest_arrival);
                    edges.push((base + m + 1, base + m, t));
                    m += 1;
                }
            }
        }

        let mut value = lower;
        let n = value.len();
        for round in 0..=n + 1 {
            let mut changed = false;
            for &(a, b, c) in &edges {
                if value[b] + c > value[a] {
                    value[a] = value[b] + c;
                    if value[a] > upper[a] {
                        return None;
                    }
                    changed = true;
                }
            }
            if !changed {
                break;
            }
            if round == n + 1 {
                return None;
            }
        }
        let drivers = routes
            .iter()
            .map(|(&d, route)| {
                let base = slot_of_driver[&d];
                (d, value[base..base + route.len()].to_vec())
            })
            .collect();
        let riders = plans
            .iter()
            .map(|(&r, legs)| {
                let base = slot_of_rider[&r];
                let len = 1 + legs.iter().map(|l| l.alight - l.board).sum::<usize>();
                (r, value[base..base + len].to_vec())
            })
            .collect();
        Some((drivers, riders))
    }

    fn loads_ok(&self, routes: &BTreeMap<usize, Vec<NodeId>>, plans: &BTreeMap<usize, Vec<LegPlan>>) -> bool {
        for (&d, route) in routes {
            let q = self.parts[d].capacity().unwrap_or(0);
            for k in 0..route.len() - 1 {
                let riders = plans
                    .values()
                    .filter(|legs| legs.iter().any(|l| l.driver == d && l.board <= k && k < l.alight))
                    .count() as u32;
                if riders > q {
                    return false;
                }
                if self.cfg.hov_enabled && self.net.is_hov(route[k], route[k + 1]) && self.cfg.occupancy(riders) < self.cfg.n_h {
                    return false;
                }
            }
        }
        true
    }

    fn score(&self, routes: &BTreeMap<usize, Vec<NodeId>>, plans: &BTreeMap<usize, Vec<LegPlan>>) -> Rational64 {
        let time = |route: &[NodeId], from: usize, to: usize| -> Seconds {
            (from..to).map(|k| self.net.travel_time(route[k], route[k + 1]).expect("route edge")).sum()
        };
        let mut value = Rational64::from_integer(0);
        for (&r, legs) in plans {
            if let Some(lambda) = self.parts[r].lambda {
                value += self.cfg.objective.lambda_scale * Rational64::from_integer(lambda);
            }
            for l in legs {
                value -= Rational64::from_integer(time(&routes[&l.driver], l.board, l.alight));
            }
        }
        if self.cfg.objective.include_driver_arcs {
            for route in routes.values() {
                value -= Rational64::from_integer(time(route, 0, route.len() - 1));
            }
        }
        value
    }

    fn assignment(
        &self,
        routes: &BTreeMap<usize, Vec<NodeId>>,
        plans: &BTreeMap<usize, Vec<LegPlan>>,
        driver_times: &BTreeMap<usize, Vec<Seconds>>,
        rider_times: &BTreeMap<usize, Vec<Seconds>>,
        objective: Rational64,
    ) -> Assignment {
        let id = |k: usize| self.parts[k].id.clone();
        let mut a = Assignment {
            objective_value: objective,
            ..Assignment::default()
        };
        for (&d, route) in routes {
            a.driving.insert(id(d));
            let stops = route
                .iter()
                .zip(&driver_times[&d])
                .map(|(&node, &time)| RouteStop { node, time })
                .collect();
            a.driver_routes.insert(id(d), stops);
        }
        for (&r, legs) in plans {
            a.matched.insert(id(r));
            let times = &rider_times[&r];
            let mut m = 0;
            let mut out = Vec::new();
            for l in legs {
                let route = &routes[&l.driver];
                let steps = l.alight - l.board;
                out.push(Leg {
                    driver: id(l.driver),
                    board: route[l.board],
                    alight: route[l.alight],
                    board_time: times[m],
                    alight_time: times[m + steps],
                });
                m += steps;
            }
            a.rider_itineraries.insert(id(r), out);
        }
        a
    }
}

/// Calls `visit` with every feasible assignment of the instance.
pub fn for_each_candidate<F>(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    cfg: &ModelConfig,
    limits: OracleLimits,
    mut visit: F,
) -> Result<(), OracleError>
where
    F: FnMut(&Assignment),
{
    if net.node_count() > limits.max_nodes {
        return Err(OracleError::ExceedsLimits(format!(
            "{} nodes, limit {}",
            net.node_count(),
            limits.max_nodes
        )));
    }
    if parts.len() > limits.max_participants {
        return Err(OracleError::ExceedsLimits(format!(
            "{} participants, limit {}",
            parts.len(),
            limits.max_participants
        )));
    }
    let o = Oracle { net, parts, cfg, limits };
    let owners: Vec<usize> = (0..parts.len()).filter(|&k| parts[k].is_car_owner()).collect();
    let mut owner_routes: BTreeMap<usize, Vec<Vec<NodeId>>> = BTreeMap::new();
    for &d in &owners {
        owner_routes.insert(d, o.routes(d)?);
    }

    // Each owner either stays out of the driver seat (None) or drives one of
    // its routes.
    let mut choice: Vec<Option<usize>> = vec![None; owners.len()];
    loop {
        let routes: BTreeMap<usize, Vec<NodeId>> = owners
            .iter()
            .zip(&choice)
            .filter_map(|(&d, c)| c.map(|k| (d, owner_routes[&d][k].clone())))
            .collect();
        let riders: Vec<usize> = (0..parts.len())
            .filter(|&k| !routes.contains_key(&k) && (!parts[k].is_car_owner() || cfg.flex_roles))
            .collect();
        let mut options: Vec<Vec<Vec<LegPlan>>> = Vec::with_capacity(riders.len());
        for &r in &riders {
            options.push(o.itineraries(r, &routes)?);
        }
        // Per rider: None or an index into its itineraries.
        let mut pick: Vec<Option<usize>> = vec![None; riders.len()];
        loop {
            let plans: BTreeMap<usize, Vec<LegPlan>> = riders
                .iter()
                .enumerate()
                .filter_map(|(k, &r)| pick[k].map(|i| (r, options[k][i].clone())))
                .collect();
            if o.loads_ok(&routes, &plans) {
                if let Some((dt, rt)) = o.schedule(&routes, &plans) {
                    let value = o.score(&routes, &plans);
                    visit(&o.assignment(&routes, &plans, &dt, &rt, value));
                }
            }
            if !advance(&mut pick, |k| options[k].len()) {
                break;
            }
        }
        if !advance(&mut choice, |k| owner_routes[&owners[k]].len()) {
            break;
        }
    }
    Ok(())
}

/// Odometer step over `None, Some(0), .., Some(len - 1)` per position.
fn advance(digits: &mut [Option<usize>], len: impl Fn(usize) -> usize) -> bool {
    for k in (0..digits.len()).rev() {
        let next = match digits[k] {
            None => 0,
            Some(i) => i + 1,
        };
        if next < len(k) {
            digits[k] = Some(next);
            return true;
        }
        digits[k] = None;
    }
    false
}

/// Best objective over all feasible assignments. Ties go to the assignment
/// whose JSON serialization is smallest.
pub fn oracle_optimum(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    cfg: &ModelConfig,
    limits: OracleLimits,
) -> Result<(Rational64, Assignment), OracleError> {
    let mut best: Option<(Assignment, String)> = None;
    for_each_candidate(net, parts, cfg, limits, |a| {
        let better = match &best {
            None => true,
            Some((b, key)) => {
                a.objective_value > b.objective_value
                    || (a.objective_value == b.objective_value && canonical(a) < *key)
            }
        };
        if better {
            best = Some((a.clone(), canonical(a)));
        }
    })?;
    // The empty assignment is always feasible.
    let (a, _) = best.expect("empty assignment is a candidate");
    Ok((a.objective_value, a))
}

fn canonical(a: &Assignment) -> String {
    serde_json::to_string(a).expect("assignment serializes")
}
