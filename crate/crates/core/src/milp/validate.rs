//! Semantic re-check of a decoded assignment. Everything here is computed
//! from routes, legs and times; raw model variables are never consulted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_rational::Rational64;
use serde::Serialize;

use super::{Assignment, ModelConfig, RouteStop};
use crate::network::RoadNetwork;
use crate::preprocess::AccessSets;
use crate::trips::EnrichedParticipant;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Roles,
    Route,
    DriverTime,
    Capacity,
    Hov,
    Itinerary,
    PickupOrder,
    RiderTime,
    Access,
    Objective,
}

impl Family {
    pub const ALL: [Family; 10] = [
        Family::Roles,
        Family::Route,
        Family::DriverTime,
        Family::Capacity,
        Family::Hov,
        Family::Itinerary,
        Family::PickupOrder,
        Family::RiderTime,
        Family::Access,
        Family::Objective,
    ];
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Roles => "roles",
            Family::Route => "route",
            Family::DriverTime => "driver-time",
            Family::Capacity => "capacity",
            Family::Hov => "hov",
            Family::Itinerary => "itinerary",
            Family::PickupOrder => "pickup-order",
            Family::RiderTime => "rider-time",
            Family::Access => "access",
            Family::Objective => "objective",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FamilyResult {
    pub family: Family,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub families: Vec<FamilyResult>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.families.iter().all(|f| f.violations.is_empty())
    }

    pub fn violations(&self, family: Family) -> &[String] {
        self.families
            .iter()
            .find(|f| f.family == family)
            .map_or(&[], |f| f.violations.as_slice())
    }

    pub fn failed_families(&self) -> Vec<Family> {
        self.families.iter().filter(|f| !f.violations.is_empty()).map(|f| f.family).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.families {
            if r.violations.is_empty() {
                writeln!(f, "{:<13} pass", r.family.to_string())?;
            } else {
                writeln!(f, "{:<13} FAIL ({})", r.family.to_string(), r.violations.len())?;
                for v in &r.violations {
                    writeln!(f, "    {v}")?;
                }
            }
        }
        Ok(())
    }
}

struct Checker {
    found: BTreeMap<Family, Vec<String>>,
}

impl Checker {
    fn fail(&mut self, family: Family, msg: String) {
        self.found.entry(family).or_default().push(msg);
    }
}

fn position(route: &[RouteStop], n: NodeId) -> Option<usize> {
    route.iter().position(|s| s.node == n)
}

/// Checks `a` against the network, the participants' data and `cfg`. When
/// `sets` is given, routes and legs must also stay inside the model's index
/// space.
pub fn validate_solution(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    sets: Option<&AccessSets>,
    cfg: &ModelConfig,
    a: &Assignment,
) -> ValidationReport {
    let by_id: BTreeMap<&str, &EnrichedParticipant> = parts.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut c = Checker { found: BTreeMap::new() };

    // Roles.
    for id in &a.driving {
        match by_id.get(id.as_str()) {
            None => c.fail(Family::Roles, format!("unknown driver {id}")),
            Some(p) if !p.is_car_owner() => c.fail(Family::Roles, format!("{id} drives without a car")),
            _ => {}
        }
        if a.matched.contains(id) {
            c.fail(Family::Roles, format!("{id} both drives and rides"));
        }
        if !a.driver_routes.contains_key(id) {
            c.fail(Family::Roles, format!("driver {id} has no route"));
        }
    }
    for id in &a.matched {
        match by_id.get(id.as_str()) {
            None => c.fail(Family::Roles, format!("unknown rider {id}")),
            Some(p) if p.is_car_owner() && !cfg.flex_roles => {
                c.fail(Family::Roles, format!("car owner {id} rides without role flexibility"))
            }
            _ => {}
        }
        if !a.rider_itineraries.contains_key(id) {
            c.fail(Family::Roles, format!("matched rider {id} has no itinerary"));
        }
    }
    for id in a.driver_routes.keys() {
        if !a.driving.contains(id) {
            c.fail(Family::Roles, format!("route for non-driver {id}"));
        }
    }
    for id in a.rider_itineraries.keys() {
        if !a.matched.contains(id) {
            c.fail(Family::Roles, format!("itinerary for unmatched {id}"));
        }
    }

    // Driver routes and times.
    for (id, route) in &a.driver_routes {
        let Some(d) = by_id.get(id.as_str()) else { continue };
        if route.len() < 2 {
            c.fail(Family::Route, format!("{id}: route has fewer than two stops"));
            continue;
        }
        if route[0].node != d.origin || route[route.len() - 1].node != d.destination {
            c.fail(Family::Route, format!("{id}: route does not run from origin to destination"));
        }
        let distinct: BTreeSet<NodeId> = route.iter().map(|s| s.node).collect();
        if distinct.len() != route.len() {
            c.fail(Family::Route, format!("{id}: route revisits a node"));
        }
        for s in route {
            if s.time < d.earliest_departure || s.time > d.latest_arrival {
                c.fail(
                    Family::DriverTime,
                    format!("{id}: time {} at node {} outside [{}, {}]", s.time, s.node, d.earliest_departure, d.latest_arrival),
                );
            }
        }
        for w in route.windows(2) {
            let (i, j) = (w[0].node, w[1].node);
            let Some(t) = net.travel_time(i, j) else {
                c.fail(Family::Route, format!("{id}: no edge {i}->{j}"));
                continue;
            };
            if w[1].time < w[0].time + t {
                c.fail(Family::DriverTime, format!("{id}: edge {i}->{j} traversed faster than {t}s"));
            }
            let riders = a.riders_on(id, i, j).len() as u32;
            let q = d.capacity().unwrap_or(0);
            if riders > q {
                c.fail(Family::Capacity, format!("{id}: {riders} riders on edge {i}->{j} exceed capacity {q}"));
            }
            if cfg.hov_enabled && net.is_hov(i, j) && cfg.occupancy(riders) < cfg.n_h {
                c.fail(
                    Family::Hov,
                    format!("{id}: occupancy {} on HOV edge {i}->{j} below {}", cfg.occupancy(riders), cfg.n_h),
                );
            }
            if let Some(sets) = sets {
                if !sets.pair_edges(id, id).is_some_and(|e| e.contains(&(i, j))) {
                    c.fail(Family::Access, format!("{id}: edge {i}->{j} outside the driver's accessible links"));
                }
            }
        }
    }

    // Rider itineraries.
    for (id, legs) in &a.rider_itineraries {
        let Some(p) = by_id.get(id.as_str()) else { continue };
        if legs.is_empty() {
            c.fail(Family::Itinerary, format!("{id}: empty itinerary"));
            continue;
        }
        if legs[0].board != p.origin {
            c.fail(Family::Itinerary, format!("{id}: first leg does not start at the origin"));
        }
        if legs[legs.len() - 1].alight != p.destination {
            c.fail(Family::Itinerary, format!("{id}: last leg does not end at the destination"));
        }
        let mut drivers_used = BTreeSet::new();
        let mut visited: Vec<NodeId> = vec![legs[0].board];
        for (k, leg) in legs.iter().enumerate() {
            if !drivers_used.insert(leg.driver.as_str()) {
                c.fail(Family::Itinerary, format!("{id}: rides with {} more than once", leg.driver));
            }
            if k > 0 {
                let prev = &legs[k - 1];
                if prev.alight != leg.board {
                    c.fail(Family::Itinerary, format!("{id}: leg {k} boards at {} but previous leg ends at {}", leg.board, prev.alight));
                }
                if leg.board_time < prev.alight_time {
                    c.fail(Family::RiderTime, format!("{id}: leg {k} boards before the previous leg arrives"));
                }
            }
            if leg.board_time < p.earliest_departure || leg.alight_time > p.latest_arrival {
                c.fail(
                    Family::RiderTime,
                    format!("{id}: leg {k} times [{}, {}] outside [{}, {}]", leg.board_time, leg.alight_time, p.earliest_departure, p.latest_arrival),
                );
            }
            let Some(route) = a.driver_routes.get(&leg.driver) else {
                c.fail(Family::Itinerary, format!("{id}: leg {k} uses {} who is not driving", leg.driver));
                continue;
            };
            let (Some(b), Some(e)) = (position(route, leg.board), position(route, leg.alight)) else {
                c.fail(Family::Itinerary, format!("{id}: leg {k} leaves the route of {}", leg.driver));
                continue;
            };
            if b >= e {
                c.fail(Family::PickupOrder, format!("{id}: drop-off at {} precedes pickup at {} for {}", leg.alight, leg.board, leg.driver));
                continue;
            }
            if route[b].time != leg.board_time {
                c.fail(
                    Family::RiderTime,
                    format!("{id}: boards {} at {} but the driver leaves at {}", leg.driver, leg.board_time, route[b].time),
                );
            }
            let last_edge = net.travel_time(route[e - 1].node, route[e].node).unwrap_or(0);
            if leg.alight_time < route[e - 1].time + last_edge {
                c.fail(Family::RiderTime, format!("{id}: alights at {} before the vehicle arrives", leg.alight_time));
            }
            visited.extend(route[b + 1..=e].iter().map(|s| s.node));
            if let Some(sets) = sets {
                if !sets.rd.contains(&(id.clone(), leg.driver.clone())) {
                    c.fail(Family::Access, format!("{id}: ({id}, {}) is not a viable match", leg.driver));
                }
                let allowed = sets.pair_edges(id, &leg.driver);
                for w in route[b..=e].windows(2) {
                    if !allowed.is_some_and(|s| s.contains(&(w[0].node, w[1].node))) {
                        c.fail(Family::Access, format!("{id}: edge {}->{} outside accessible links with {}", w[0].node, w[1].node, leg.driver));
                    }
                }
            }
        }
        let distinct: BTreeSet<NodeId> = visited.iter().copied().collect();
        if distinct.len() != visited.len() {
            c.fail(Family::Itinerary, format!("{id}: itinerary revisits a node"));
        }
    }

    // Objective recomputed from the routes.
    let mut value = Rational64::from_integer(0);
    for id in &a.matched {
        if let Some(lambda) = by_id.get(id.as_str()).and_then(|p| p.lambda) {
            value += cfg.objective.lambda_scale * Rational64::from_integer(lambda);
        }
    }
    for legs in a.rider_itineraries.values() {
        for leg in legs {
            if let Some(route) = a.driver_routes.get(&leg.driver) {
                if let (Some(b), Some(e)) = (position(route, leg.board), position(route, leg.alight)) {
                    for w in route[b..=e.max(b)].windows(2) {
                        value -= Rational64::from_integer(net.travel_time(w[0].node, w[1].node).unwrap_or(0));
                    }
                }
            }
        }
    }
    if cfg.objective.include_driver_arcs {
        for route in a.driver_routes.values() {
            for w in route.windows(2) {
                value -= Rational64::from_integer(net.travel_time(w[0].node, w[1].node).unwrap_or(0));
            }
        }
    }
    if value != a.objective_value {
        c.fail(Family::Objective, format!("stated objective {} but routes give {}", a.objective_value, value));
    }

    ValidationReport {
        families: Family::ALL
            .iter()
            .map(|&family| FamilyResult {
                family,
                violations: c.found.remove(&family).unwrap_or_default(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::Leg;
    use crate::network::tests::graph;
    use crate::network::{Edge, RoadNetwork};
    use crate::trips::enrich_all;
    use crate::trips::tests::person;

    fn stop(node: NodeId, time: i64) -> RouteStop {
        RouteStop { node, time }
    }

    fn leg(driver: &str, board: NodeId, alight: NodeId, board_time: i64, alight_time: i64) -> Leg {
        Leg {
            driver: driver.into(),
            board,
            alight,
            board_time,
            alight_time,
        }
    }

    #[test]
    fn overfull_vehicle_fails_capacity() {
        let net = graph(2, &[(1, 2, 10)]);
        let mut people = vec![person("d", Some(2), 1, 2, 0, 40)];
        people.extend(["r1", "r2", "r3"].iter().map(|id| person(id, None, 1, 2, 0, 40)));
        let parts = enrich_all(&net, &people).unwrap();
        let mut a = Assignment {
            driving: BTreeSet::from(["d".to_owned()]),
            driver_routes: BTreeMap::from([("d".to_owned(), vec![stop(1, 0), stop(2, 10)])]),
            ..Assignment::default()
        };
        for id in ["r1", "r2", "r3"] {
            a.matched.insert(id.to_owned());
            a.rider_itineraries.insert(id.to_owned(), vec![leg("d", 1, 2, 0, 10)]);
        }
        let report = validate_solution(&net, &parts, None, &ModelConfig::default(), &a);
        let cap = report.violations(Family::Capacity);
        assert_eq!(cap.len(), 1);
        assert!(cap[0].contains("1->2"), "{}", cap[0]);
        assert!(report.violations(Family::Itinerary).is_empty());
    }

    #[test]
    fn lone_driver_on_hov_edge_fails() {
        let net = RoadNetwork::new(
            graph(2, &[]).nodes().to_vec(),
            vec![Edge {
                tail: 1,
                head: 2,
                travel_time: 10,
                hov: true,
            }],
            None,
        )
        .unwrap();
        let parts = enrich_all(&net, &[person("d", Some(1), 1, 2, 0, 40)]).unwrap();
        let a = Assignment {
            driving: BTreeSet::from(["d".to_owned()]),
            driver_routes: BTreeMap::from([("d".to_owned(), vec![stop(1, 0), stop(2, 10)])]),
            objective_value: Rational64::from_integer(-10),
            ..Assignment::default()
        };
        let report = validate_solution(&net, &parts, None, &ModelConfig::default(), &a);
        assert_eq!(report.failed_families(), vec![Family::Hov]);
        let off = ModelConfig {
            hov_enabled: false,
            ..ModelConfig::default()
        };
        assert!(validate_solution(&net, &parts, None, &off, &a).is_ok());
    }

    #[test]
    fn drop_off_before_pickup_and_wrong_times() {
        let net = graph(3, &[(1, 2, 10), (2, 3, 10)]);
        let parts = enrich_all(
            &net,
            &[person("d", Some(1), 1, 3, 0, 40), person("r", None, 3, 1, 0, 40)],
        )
        .unwrap();
        let a = Assignment {
            driving: BTreeSet::from(["d".to_owned()]),
            matched: BTreeSet::from(["r".to_owned()]),
            driver_routes: BTreeMap::from([("d".to_owned(), vec![stop(1, 0), stop(2, 5), stop(3, 20)])]),
            rider_itineraries: BTreeMap::from([("r".to_owned(), vec![leg("d", 3, 1, 20, 30)])]),
            objective_value: Rational64::from_integer(0),
        };
        let report = validate_solution(&net, &parts, None, &ModelConfig::default(), &a);
        let failed = report.failed_families();
        assert!(failed.contains(&Family::PickupOrder));
        assert!(failed.contains(&Family::DriverTime));
        assert!(!report.to_string().is_empty());
    }

    #[test]
    fn both_roles_and_unknown_ids_fail_roles() {
        let net = graph(2, &[(1, 2, 10)]);
        let parts = enrich_all(&net, &[person("d", Some(1), 1, 2, 0, 40)]).unwrap();
        let a = Assignment {
            driving: BTreeSet::from(["d".to_owned(), "ghost".to_owned()]),
            matched: BTreeSet::from(["d".to_owned()]),
            ..Assignment::default()
        };
        let report = validate_solution(&net, &parts, None, &ModelConfig::default(), &a);
        let roles = report.violations(Family::Roles);
        assert!(roles.iter().any(|v| v.contains("both drives and rides")));
        assert!(roles.iter().any(|v| v.contains("ghost")));
    }

    #[test]
    fn empty_assignment_passes() {
        let net = graph(2, &[(1, 2, 10)]);
        let parts = enrich_all(&net, &[person("d", Some(1), 1, 2, 0, 40)]).unwrap();
        assert!(validate_solution(&net, &parts, None, &ModelConfig::default(), &Assignment::default()).is_ok());
    }
}
