use std::collections::{BTreeMap, BTreeSet};

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::{ModelInstance, VarKey, VarKind};
use crate::error::ModelError;
use crate::{NodeId, Seconds};

const INTEGRALITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteStop {
    pub node: NodeId,
    pub time: Seconds,
}

/// One ride of a rider with a single driver.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leg {
    pub driver: String,
    pub board: NodeId,
    pub alight: NodeId,
    pub board_time: Seconds,
    pub alight_time: Seconds,
}

/// A decoded solution: who drives where, and how each matched rider travels.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Assignment {
    pub driver_routes: BTreeMap<String, Vec<RouteStop>>,
    pub rider_itineraries: BTreeMap<String, Vec<Leg>>,
    pub matched: BTreeSet<String>,
    pub driving: BTreeSet<String>,
    #[serde(with = "crate::ratio_serde")]
    pub objective_value: Rational64,
}

impl Assignment {
    /// Riders carried by `driver` over the route edge `(i, j)`.
    pub fn riders_on(&self, driver: &str, i: NodeId, j: NodeId) -> Vec<&str> {
        let Some(route) = self.driver_routes.get(driver) else {
            return Vec::new();
        };
        let pos = |n: NodeId| route.iter().position(|s| s.node == n);
        let (Some(pi), Some(pj)) = (pos(i), pos(j)) else {
            return Vec::new();
        };
        if pj != pi + 1 {
            return Vec::new();
        }
        self.rider_itineraries
            .iter()
            .filter(|(_, legs)| {
                legs.iter().any(|l| {
                    l.driver == driver
                        && matches!((pos(l.board), pos(l.alight)), (Some(b), Some(a)) if b <= pi && pj <= a)
                })
            })
            .map(|(id, _)| id.as_str())
            .collect()
    }

    /// Assignment restricted to the given participants.
    pub fn restricted_to(&self, ids: &BTreeSet<String>) -> Assignment {
        Assignment {
            driver_routes: self.driver_routes.iter().filter(|(k, _)| ids.contains(*k)).map(|(k, v)| (k.clone(), v.clone())).collect(),
            rider_itineraries: self
                .rider_itineraries
                .iter()
                .filter(|(k, _)| ids.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            matched: self.matched.intersection(ids).cloned().collect(),
            driving: self.driving.intersection(ids).cloned().collect(),
            objective_value: self.objective_value,
        }
    }
}

fn to_integer(model: &ModelInstance, name: &str, raw: f64) -> Result<i64, ModelError> {
    let rounded = raw.round();
    if (raw - rounded).abs() > INTEGRALITY_TOL {
        return Err(ModelError::Fractional {
            name: name.to_owned(),
            value: raw,
        });
    }
    let v = model.var_by_name(name).ok_or_else(|| ModelError::UnknownVariable(name.to_owned()))?;
    if model.variable(v).kind == VarKind::Binary && !(rounded == 0.0 || rounded == 1.0) {
        return Err(ModelError::Fractional {
            name: name.to_owned(),
            value: raw,
        });
    }
    Ok(rounded as i64)
}

/// Converts named solver values into a value vector aligned with the model's
/// variables. Missing variables are zero.
pub fn values_from_named(model: &ModelInstance, named: &BTreeMap<String, f64>) -> Result<Vec<i64>, ModelError> {
    let mut values = vec![0; model.variables.len()];
    for (name, &raw) in named {
        let v = model.var_by_name(name).ok_or_else(|| ModelError::UnknownVariable(name.clone()))?;
        values[v.index()] = to_integer(model, name, raw)?;
    }
    Ok(values)
}

/// Decodes named solver values; the recomputed objective must agree with
/// `reported_objective` within 1e-6 when one is given.
pub fn decode_solution(
    model: &ModelInstance,
    named: &BTreeMap<String, f64>,
    reported_objective: Option<f64>,
) -> Result<Assignment, ModelError> {
    let values = values_from_named(model, named)?;
    let a = decode_values(model, &values)?;
    if let Some(reported) = reported_objective {
        let decoded = *a.objective_value.numer() as f64 / *a.objective_value.denom() as f64;
        if (decoded - reported).abs() > 1e-6 {
            return Err(ModelError::ObjectiveMismatch { decoded, reported });
        }
    }
    Ok(a)
}

/// Decodes an integral value vector aligned with the model's variables.
pub fn decode_values(model: &ModelInstance, values: &[i64]) -> Result<Assignment, ModelError> {
    if values.len() != model.variables.len() {
        return Err(ModelError::Internal(format!(
            "value vector has {} entries for {} variables",
            values.len(),
            model.variables.len()
        )));
    }
    for (v, &x) in model.variables.iter().zip(values) {
        if v.kind == VarKind::Binary && !(x == 0 || x == 1) {
            return Err(ModelError::Fractional {
                name: v.name.clone(),
                value: x as f64,
            });
        }
    }
    let val = |key: VarKey| model.var(&key).map_or(0, |v| values[v.index()]);

    // Arcs with value one, keyed by (participant, driver).
    let mut arcs: BTreeMap<(usize, usize), BTreeMap<NodeId, Vec<NodeId>>> = BTreeMap::new();
    for (v, &x) in model.variables.iter().zip(values) {
        if let VarKey::X { p, d, i, j } = v.key {
            if x == 1 {
                arcs.entry((p, d)).or_default().entry(i).or_default().push(j);
            }
        }
    }

    let mut a = Assignment {
        objective_value: model.objective_value(values),
        ..Assignment::default()
    };

    for (k, part) in model.participants.iter().enumerate() {
        if val(VarKey::Mu(k)) == 1 {
            a.matched.insert(part.id.clone());
        }
        if part.capacity.is_some() && val(VarKey::Delta(k)) == 1 {
            a.driving.insert(part.id.clone());
        }
    }

    let broken = |k: usize, message: String| ModelError::BrokenRoute {
        participant: model.participants[k].id.clone(),
        message,
    };

    for (d, part) in model.participants.iter().enumerate() {
        let own = arcs.get(&(d, d));
        if !a.driving.contains(&part.id) {
            if own.is_some() {
                return Err(broken(d, "arcs selected for a non-driving owner".into()));
            }
            continue;
        }
        let own = own.ok_or_else(|| broken(d, "driving owner has no arcs".into()))?;
        let total: usize = own.values().map(Vec::len).sum();
        let mut route = vec![part.origin];
        let mut seen = BTreeSet::from([part.origin]);
        let mut cur = part.origin;
        while cur != part.destination {
            let next = match own.get(&cur).map(Vec::as_slice) {
                Some([next]) => *next,
                Some(_) => return Err(broken(d, format!("node {cur} has several outgoing arcs"))),
                None => return Err(broken(d, format!("route stops at {cur}"))),
            };
            if !seen.insert(next) {
                return Err(broken(d, format!("route revisits {next}")));
            }
            route.push(next);
            cur = next;
        }
        if total != route.len() - 1 {
            return Err(broken(d, "arcs outside the origin-destination route".into()));
        }
        let stops = route
            .into_iter()
            .map(|n| RouteStop {
                node: n,
                time: val(VarKey::TauDriver { d, i: n }),
            })
            .collect();
        a.driver_routes.insert(part.id.clone(), stops);
    }

    for (p, part) in model.participants.iter().enumerate() {
        let mine: BTreeMap<usize, &BTreeMap<NodeId, Vec<NodeId>>> = arcs
            .iter()
            .filter(|((pp, d), _)| *pp == p && *d != p)
            .map(|((_, d), m)| (*d, m))
            .collect();
        if !a.matched.contains(&part.id) {
            if !mine.is_empty() {
                return Err(broken(p, "arcs selected for an unmatched rider".into()));
            }
            continue;
        }
        let total: usize = mine.values().flat_map(|m| m.values()).map(Vec::len).sum();
        // Walk the rider's path, remembering which driver covers each edge.
        let mut steps: Vec<(usize, NodeId, NodeId)> = Vec::new();
        let mut seen = BTreeSet::from([part.origin]);
        let mut cur = part.origin;
        while cur != part.destination {
            let options: Vec<(usize, NodeId)> = mine
                .iter()
                .flat_map(|(&d, m)| m.get(&cur).into_iter().flatten().map(move |&j| (d, j)))
                .collect();
            let (d, next) = match options.as_slice() {
                [one] => *one,
                [] => return Err(broken(p, format!("itinerary stops at {cur}"))),
                _ => return Err(broken(p, format!("itinerary branches at {cur}"))),
            };
            if !seen.insert(next) {
                return Err(broken(p, format!("itinerary revisits {next}")));
            }
            steps.push((d, cur, next));
            cur = next;
        }
        if total != steps.len() {
            return Err(broken(p, "arcs outside the origin-destination itinerary".into()));
        }
        let mut legs: Vec<Leg> = Vec::new();
        for (d, i, j) in steps {
            let driver = &model.participants[d].id;
            match legs.last_mut() {
                Some(leg) if &leg.driver == driver && leg.alight == i => {
                    leg.alight = j;
                    leg.alight_time = val(VarKey::TauRider { p, i: j });
                }
                _ => legs.push(Leg {
                    driver: driver.clone(),
                    board: i,
                    alight: j,
                    board_time: val(VarKey::TauRider { p, i }),
                    alight_time: val(VarKey::TauRider { p, i: j }),
                }),
            }
        }
        a.rider_itineraries.insert(part.id.clone(), legs);
    }

    Ok(a)
}
