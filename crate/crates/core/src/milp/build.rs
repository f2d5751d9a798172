use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use num_rational::Rational64;

use super::{
    ModelConfig, ModelInstance, ModelParticipant, ObjectiveGroup, Row, RowTag, Sense, VarId, VarKey, VarKind,
    Variable, lp_name,
};
use crate::error::ModelError;
use crate::network::RoadNetwork;
use crate::preprocess::{AccessSets, EdgeKey};
use crate::trips::EnrichedParticipant;
use crate::{NodeId, Seconds};

/// Deliberate encoding faults, used to check that the oracle comparison
/// catches broken models.
#[doc(hidden)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Drop-off counter must exceed the pickup counter by two instead of one.
    PickupOrderOffByOne,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BuildOptions {
    #[doc(hidden)]
    pub mutation: Option<Mutation>,
}

pub fn build_model(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    sets: &AccessSets,
    cfg: &ModelConfig,
) -> Result<ModelInstance, ModelError> {
    build_model_with(net, parts, sets, cfg, &BuildOptions::default())
}

struct Builder {
    variables: Vec<Variable>,
    lookup: HashMap<VarKey, VarId>,
    names: HashSet<String>,
    rows: Vec<Row>,
}

impl Builder {
    fn add(&mut self, key: VarKey, name: String, kind: VarKind, lb: i64, ub: i64) -> VarId {
        let mut unique = name.clone();
        let mut k = 1;
        while !self.names.insert(unique.clone()) {
            unique = format!("{name}_{k}");
            k += 1;
        }
        let id = VarId(self.variables.len() as u32);
        self.variables.push(Variable {
            key,
            name: unique,
            kind,
            lb,
            ub,
        });
        self.lookup.insert(key, id);
        id
    }

    fn get(&self, key: VarKey) -> VarId {
        self.lookup[&key]
    }

    fn row(&mut self, tag: RowTag, index: String, terms: Vec<(VarId, i64)>, sense: Sense, rhs: i64) -> Result<(), ModelError> {
        let mut merged: BTreeMap<VarId, i64> = BTreeMap::new();
        for (v, a) in terms {
            *merged.entry(v).or_default() += a;
        }
        let terms: Vec<_> = merged.into_iter().filter(|&(_, a)| a != 0).collect();
        if terms.is_empty() {
            if sense.holds(0, rhs) {
                return Ok(());
            }
            return Err(ModelError::Internal(format!("row c{tag}_{index} is empty and violated")));
        }
        self.rows.push(Row {
            tag,
            name: format!("c{tag}_{}", lp_name(&index)),
            terms,
            sense,
            rhs,
        });
        Ok(())
    }
}

/// Builds the model over the index space defined by `sets`.
pub fn build_model_with(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    sets: &AccessSets,
    cfg: &ModelConfig,
    opts: &BuildOptions,
) -> Result<ModelInstance, ModelError> {
    let mut participants = Vec::with_capacity(parts.len());
    for p in parts {
        let lambda = match (p.feasible, p.lambda) {
            (true, Some(l)) => l,
            _ => return Err(ModelError::InfeasibleParticipant(p.id.clone())),
        };
        if !sets.an.contains_key(&p.id) {
            return Err(ModelError::Internal(format!("no accessible nodes for {}", p.id)));
        }
        participants.push(ModelParticipant {
            id: p.id.clone(),
            capacity: p.capacity(),
            origin: p.origin,
            destination: p.destination,
            earliest_departure: p.earliest_departure,
            latest_arrival: p.latest_arrival,
            lambda,
        });
    }
    let index: HashMap<&str, usize> = participants.iter().enumerate().map(|(k, p)| (p.id.as_str(), k)).collect();
    let owners: Vec<usize> = (0..participants.len()).filter(|&k| participants[k].capacity.is_some()).collect();

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for (p, d) in &sets.rd {
        match (index.get(p.as_str()), index.get(d.as_str())) {
            (Some(&pi), Some(&di)) if pi != di && participants[di].capacity.is_some() => pairs.push((pi, di)),
            _ => return Err(ModelError::Internal(format!("viable pair ({p}, {d}) outside the participant list"))),
        }
    }
    pairs.sort_unstable();

    let empty_nodes = BTreeSet::new();
    let empty_edges = BTreeSet::new();
    let an = |p: usize| &sets.an[&participants[p].id];
    let an_pair = |p: usize, d: usize| -> &BTreeSet<NodeId> {
        sets.an_pair
            .get(&(participants[p].id.clone(), participants[d].id.clone()))
            .unwrap_or(&empty_nodes)
    };
    let ae_pair = |p: usize, d: usize| -> &BTreeSet<EdgeKey> {
        sets.ae_pair
            .get(&(participants[p].id.clone(), participants[d].id.clone()))
            .unwrap_or(&empty_edges)
    };
    let t = |i: NodeId, j: NodeId| -> Result<Seconds, ModelError> {
        net.travel_time(i, j)
            .ok_or_else(|| ModelError::Internal(format!("accessible edge {i}->{j} missing from network")))
    };
    let sid: Vec<String> = participants.iter().map(|p| lp_name(&p.id)).collect();

    let mut b = Builder {
        variables: Vec::new(),
        lookup: HashMap::new(),
        names: HashSet::new(),
        rows: Vec::new(),
    };

    // Variable catalog. Creation order is also the exact solver's branching
    // order: roles, driver arcs, rider arcs, pickups, drop-offs, auxiliaries.
    for &d in &owners {
        b.add(VarKey::Delta(d), format!("delta_{}", sid[d]), VarKind::Binary, 0, 1);
    }
    for p in 0..participants.len() {
        b.add(VarKey::Mu(p), format!("mu_{}", sid[p]), VarKind::Binary, 0, 1);
    }
    for &d in &owners {
        for &(i, j) in ae_pair(d, d) {
            b.add(
                VarKey::X { p: d, d, i, j },
                format!("x_{}_{}_{i}_{j}", sid[d], sid[d]),
                VarKind::Binary,
                0,
                1,
            );
        }
    }
    for &(p, d) in &pairs {
        for &(i, j) in ae_pair(p, d) {
            b.add(
                VarKey::X { p, d, i, j },
                format!("x_{}_{}_{i}_{j}", sid[p], sid[d]),
                VarKind::Binary,
                0,
                1,
            );
        }
    }
    for &(p, d) in &pairs {
        for &i in an_pair(p, d) {
            b.add(VarKey::Y { p, d, i }, format!("y_{}_{}_{i}", sid[p], sid[d]), VarKind::Binary, 0, 1);
        }
        for &i in an_pair(p, d) {
            b.add(VarKey::Z { p, d, i }, format!("z_{}_{}_{i}", sid[p], sid[d]), VarKind::Binary, 0, 1);
        }
    }
    for &d in &owners {
        let q = i64::from(participants[d].capacity.unwrap_or(0));
        for &i in an(d) {
            b.add(VarKey::Kappa { d, i }, format!("kap_{}_{i}", sid[d]), VarKind::Integer, 0, q + 1);
        }
    }
    for &d in &owners {
        // A simple route inside AN_d has at most |AN_d| - 1 edges.
        let n = an(d).len() as i64 - 1;
        for &i in an(d) {
            b.add(VarKey::U { d, i }, format!("u_{}_{i}", sid[d]), VarKind::Integer, 0, n);
        }
    }
    for &d in &owners {
        let pd = &participants[d];
        for &i in an(d) {
            b.add(
                VarKey::TauDriver { d, i },
                format!("taud_{}_{i}", sid[d]),
                VarKind::Integer,
                pd.earliest_departure.min(0),
                pd.latest_arrival.max(0),
            );
        }
    }
    for p in 0..participants.len() {
        let pp = &participants[p];
        for &i in an(p) {
            b.add(
                VarKey::TauRider { p, i },
                format!("tau_{}_{i}", sid[p]),
                VarKind::Integer,
                pp.earliest_departure.min(0),
                pp.latest_arrival.max(0),
            );
        }
    }

    // Objective.
    let scale = cfg.objective.lambda_scale;
    let mut objective = Vec::new();
    let mut groups = Vec::new();
    for p in 0..participants.len() {
        let gain = scale * Rational64::from_integer(participants[p].lambda);
        let mu = b.get(VarKey::Mu(p));
        objective.push((mu, gain));
        let mut arcs = Vec::new();
        for &(pp, d) in pairs.iter().filter(|&&(pp, _)| pp == p) {
            for &(i, j) in ae_pair(pp, d) {
                arcs.push((b.get(VarKey::X { p, d, i, j }), t(i, j)?));
            }
        }
        for &(v, c) in &arcs {
            objective.push((v, Rational64::from_integer(-c)));
        }
        groups.push(ObjectiveGroup {
            indicator: mu,
            gain,
            arcs,
            min_cost: participants[p].lambda,
        });
    }
    if cfg.objective.include_driver_arcs {
        for &d in &owners {
            let mut arcs = Vec::new();
            for &(i, j) in ae_pair(d, d) {
                arcs.push((b.get(VarKey::X { p: d, d, i, j }), t(i, j)?));
            }
            for &(v, c) in &arcs {
                objective.push((v, Rational64::from_integer(-c)));
            }
            groups.push(ObjectiveGroup {
                indicator: b.get(VarKey::Delta(d)),
                gain: Rational64::from_integer(0),
                arcs,
                min_cost: participants[d].lambda,
            });
        }
    }
    objective.sort_by_key(|&(v, _)| v);

    let num_participants = participants.len() as i64;
    let drivers_of = |p: usize| pairs.iter().filter(move |&&(pp, _)| pp == p).map(|&(_, d)| d);
    let riders_of = |d: usize| pairs.iter().filter(move |&&(_, dd)| dd == d).map(|&(p, _)| p);

    for &d in &owners {
        let pd = &participants[d];
        let delta = b.get(VarKey::Delta(d));
        let own = ae_pair(d, d);
        let x = |i, j| VarKey::X { p: d, d, i, j };
        let (o, e) = (pd.origin, pd.destination);

        // (2)-(4): the driver's route.
        let mut out_o: Vec<_> = own.iter().filter(|&&(i, _)| i == o).map(|&(i, j)| (b.get(x(i, j)), 1)).collect();
        out_o.push((delta, -1));
        b.row(RowTag::Family(2), sid[d].clone(), out_o, Sense::Eq, 0)?;
        let mut in_e: Vec<_> = own.iter().filter(|&&(_, j)| j == e).map(|&(i, j)| (b.get(x(i, j)), 1)).collect();
        in_e.push((delta, -1));
        b.row(RowTag::Family(3), sid[d].clone(), in_e, Sense::Eq, 0)?;
        for &j in an(d).iter().filter(|&&j| j != o && j != e) {
            let mut terms: Vec<_> = own.iter().filter(|&&(_, h)| h == j).map(|&(i, h)| (b.get(x(i, h)), 1)).collect();
            terms.extend(own.iter().filter(|&&(tl, _)| tl == j).map(|&(tl, k)| (b.get(x(tl, k)), -1)));
            b.row(RowTag::Family(4), format!("{}_{j}", sid[d]), terms, Sense::Eq, 0)?;
        }
    }

    // (5)-(7): rider flow over the union of drivers.
    for p in 0..participants.len() {
        let pp = &participants[p];
        let mu = b.get(VarKey::Mu(p));
        let (o, e) = (pp.origin, pp.destination);
        let mut out_o = vec![(mu, -1)];
        let mut in_e = vec![(mu, -1)];
        let mut balance: BTreeMap<NodeId, Vec<(VarId, i64)>> = BTreeMap::new();
        for d in drivers_of(p) {
            for &(i, j) in ae_pair(p, d) {
                let v = b.get(VarKey::X { p, d, i, j });
                if i == o {
                    out_o.push((v, 1));
                }
                if j == e {
                    in_e.push((v, 1));
                }
                balance.entry(j).or_default().push((v, 1));
                balance.entry(i).or_default().push((v, -1));
            }
            for &n in an_pair(p, d) {
                balance.entry(n).or_default();
            }
        }
        b.row(RowTag::Family(5), sid[p].clone(), out_o, Sense::Eq, 0)?;
        b.row(RowTag::Family(6), sid[p].clone(), in_e, Sense::Eq, 0)?;
        for (j, terms) in balance {
            if j != o && j != e {
                b.row(RowTag::Family(7), format!("{}_{j}", sid[p]), terms, Sense::Eq, 0)?;
            }
        }
    }

    // (8) capacity and driver presence; (9) one driver per rider and edge;
    // (10) service requires driving.
    for &d in &owners {
        let q = i64::from(participants[d].capacity.unwrap_or(0));
        let own = ae_pair(d, d);
        let mut riders_on: BTreeMap<EdgeKey, Vec<(VarId, i64)>> = BTreeMap::new();
        for p in riders_of(d) {
            for &(i, j) in ae_pair(p, d) {
                riders_on.entry((i, j)).or_default().push((b.get(VarKey::X { p, d, i, j }), 1));
            }
        }
        for &(i, j) in own {
            riders_on.entry((i, j)).or_default();
        }
        for ((i, j), mut terms) in riders_on {
            match b.lookup.get(&VarKey::X { p: d, d, i, j }) {
                Some(&own_x) => terms.push((own_x, -q)),
                None if terms.is_empty() => continue,
                None => {}
            }
            b.row(RowTag::Family(8), format!("{}_{i}_{j}", sid[d]), terms, Sense::Le, 0)?;
        }
    }
    for p in 0..participants.len() {
        let mut per_edge: BTreeMap<EdgeKey, Vec<(VarId, i64)>> = BTreeMap::new();
        for d in drivers_of(p) {
            for &(i, j) in ae_pair(p, d) {
                per_edge.entry((i, j)).or_default().push((b.get(VarKey::X { p, d, i, j }), 1));
            }
        }
        for ((i, j), terms) in per_edge {
            if terms.len() > 1 {
                b.row(RowTag::Family(9), format!("{}_{i}_{j}", sid[p]), terms, Sense::Le, 1)?;
            }
        }
    }
    let all_x: Vec<(usize, usize, NodeId, NodeId)> = b
        .variables
        .iter()
        .filter_map(|v| match v.key {
            VarKey::X { p, d, i, j } => Some((p, d, i, j)),
            _ => None,
        })
        .collect();
    for &(p, d, i, j) in &all_x {
        let terms = vec![(b.get(VarKey::X { p, d, i, j }), 1), (b.get(VarKey::Delta(d)), -1)];
        b.row(RowTag::Family(10), format!("{}_{}_{i}_{j}", sid[p], sid[d]), terms, Sense::Le, 0)?;
    }

    // (11) one role per car owner; the inflexible variant forbids riding.
    for &d in &owners {
        let terms = vec![(b.get(VarKey::Delta(d)), 1), (b.get(VarKey::Mu(d)), 1)];
        b.row(RowTag::Family(11), sid[d].clone(), terms, Sense::Le, 1)?;
        if !cfg.flex_roles {
            b.row(RowTag::Family(11), format!("noflex_{}", sid[d]), vec![(b.get(VarKey::Mu(d)), 1)], Sense::Eq, 0)?;
        }
    }

    // (12)-(15) pickup and drop-off detection; (17) drop-off after pickup.
    let order_gap = match opts.mutation {
        Some(Mutation::PickupOrderOffByOne) => 2,
        None => 1,
    };
    for &(p, d) in &pairs {
        let nodes = an_pair(p, d);
        let edges = ae_pair(p, d);
        let tag = format!("{}_{}", sid[p], sid[d]);
        let mut ys = Vec::new();
        let mut zs = Vec::new();
        for &i in nodes {
            let y = b.get(VarKey::Y { p, d, i });
            let z = b.get(VarKey::Z { p, d, i });
            let out: Vec<VarId> = edges.iter().filter(|&&(tl, _)| tl == i).map(|&(tl, j)| b.get(VarKey::X { p, d, i: tl, j })).collect();
            let inc: Vec<VarId> = edges.iter().filter(|&&(_, h)| h == i).map(|&(j, h)| b.get(VarKey::X { p, d, i: j, j: h })).collect();

            let mut t12 = vec![(y, 1)];
            t12.extend(out.iter().map(|&v| (v, -1)));
            b.row(RowTag::Family(12), format!("{tag}_{i}"), t12, Sense::Le, 0)?;

            let net_out: Vec<(VarId, i64)> = out.iter().map(|&v| (v, 1)).chain(inc.iter().map(|&v| (v, -1))).collect();
            let net_in: Vec<(VarId, i64)> = net_out.iter().map(|&(v, a)| (v, -a)).collect();

            let mut lo = net_out.clone();
            lo.push((y, -2));
            b.row(RowTag::Family(13), format!("{tag}_{i}_lo"), lo, Sense::Ge, -1)?;
            let mut hi = net_out;
            hi.push((y, -1));
            b.row(RowTag::Family(13), format!("{tag}_{i}_hi"), hi, Sense::Le, 0)?;

            let mut lo = net_in.clone();
            lo.push((z, -2));
            b.row(RowTag::Family(14), format!("{tag}_{i}_lo"), lo, Sense::Ge, -1)?;
            let mut hi = net_in;
            hi.push((z, -1));
            b.row(RowTag::Family(14), format!("{tag}_{i}_hi"), hi, Sense::Le, 0)?;

            ys.push((y, 1));
            zs.push((z, -1));
        }
        let mut t15 = ys;
        t15.extend(zs);
        b.row(RowTag::Family(15), tag.clone(), t15, Sense::Eq, 0)?;

        let big = an(d).len() as i64;
        for &i in nodes {
            for &j in nodes {
                let terms = vec![
                    (b.get(VarKey::U { d, i: j }), 1),
                    (b.get(VarKey::U { d, i }), -1),
                    (b.get(VarKey::Z { p, d, i: j }), -big),
                    (b.get(VarKey::Y { p, d, i }), -big),
                ];
                b.row(RowTag::Family(17), format!("{tag}_{i}_{j}"), terms, Sense::Ge, order_gap - 2 * big)?;
            }
        }
    }

    // (16) visit counter; (18)-(19) occupancy; (20) HOV occupancy; (21)
    // driver times; (22) driver windows.
    for &d in &owners {
        let pd = &participants[d];
        let q = i64::from(pd.capacity.unwrap_or(0));
        let delta = b.get(VarKey::Delta(d));
        let mu_d = b.get(VarKey::Mu(d));
        let big_u = an(d).len() as i64;
        let big_k = q + num_participants;
        let big_h = (q + 1).max(i64::from(cfg.n_h));
        let riders: Vec<usize> = riders_of(d).collect();
        let sd = &sid[d];

        let mut anchor = vec![(b.get(VarKey::Kappa { d, i: pd.origin }), 1)];
        if cfg.count_driver {
            anchor.push((delta, -1));
        }
        for &p in &riders {
            if let Some(&y) = b.lookup.get(&VarKey::Y { p, d, i: pd.origin }) {
                anchor.push((y, -1));
            }
        }
        b.row(RowTag::Family(18), format!("anchor_{sd}"), anchor, Sense::Eq, 0)?;

        for &(i, j) in ae_pair(d, d) {
            let x = b.get(VarKey::X { p: d, d, i, j });
            let u = |n| b.get(VarKey::U { d, i: n });
            b.row(
                RowTag::Family(16),
                format!("{sd}_{i}_{j}"),
                vec![(u(j), 1), (u(i), -1), (x, -big_u)],
                Sense::Ge,
                1 - big_u,
            )?;

            let mut served = Vec::new();
            for &p in &riders {
                if let Some(&y) = b.lookup.get(&VarKey::Y { p, d, i: j }) {
                    served.push((y, -1));
                }
                if let Some(&z) = b.lookup.get(&VarKey::Z { p, d, i: j }) {
                    served.push((z, 1));
                }
            }
            let kj = b.get(VarKey::Kappa { d, i: j });
            let ki = b.get(VarKey::Kappa { d, i });
            let mut upper = vec![(kj, 1), (ki, -1), (x, big_k)];
            upper.extend(served.iter().copied());
            b.row(RowTag::Family(18), format!("{sd}_{i}_{j}"), upper, Sense::Le, big_k)?;
            let mut lower = vec![(kj, 1), (ki, -1), (x, -big_k)];
            lower.extend(served.iter().copied());
            b.row(RowTag::Family(19), format!("{sd}_{i}_{j}"), lower, Sense::Ge, -big_k)?;

            if cfg.hov_enabled && net.is_hov(i, j) {
                b.row(
                    RowTag::Family(20),
                    format!("{sd}_{i}_{j}"),
                    vec![(ki, 1), (x, -big_h)],
                    Sense::Ge,
                    i64::from(cfg.n_h) - big_h,
                )?;
            }

            let tij = t(i, j)?;
            let big_t = pd.latest_arrival.max(0) - pd.earliest_departure.min(0) + tij;
            b.row(
                RowTag::Family(21),
                format!("{sd}_{i}_{j}"),
                vec![
                    (b.get(VarKey::TauDriver { d, i: j }), 1),
                    (b.get(VarKey::TauDriver { d, i }), -1),
                    (x, -big_t),
                ],
                Sense::Ge,
                tij - big_t,
            )?;
        }

        for &i in an(d) {
            let tau = b.get(VarKey::TauDriver { d, i });
            b.row(
                RowTag::Family(22),
                format!("{sd}_{i}_lo"),
                vec![(tau, 1), (delta, -pd.earliest_departure), (mu_d, -pd.earliest_departure)],
                Sense::Ge,
                0,
            )?;
            b.row(
                RowTag::Family(22),
                format!("{sd}_{i}_hi"),
                vec![(tau, 1), (delta, -pd.latest_arrival), (mu_d, -pd.latest_arrival)],
                Sense::Le,
                0,
            )?;
        }
    }

    // (23) rider windows.
    for p in 0..participants.len() {
        let pp = &participants[p];
        let mu = b.get(VarKey::Mu(p));
        for &i in an(p) {
            let tau = b.get(VarKey::TauRider { p, i });
            b.row(
                RowTag::Family(23),
                format!("{}_{i}_lo", sid[p]),
                vec![(tau, 1), (mu, -pp.earliest_departure)],
                Sense::Ge,
                0,
            )?;
            b.row(
                RowTag::Family(23),
                format!("{}_{i}_hi", sid[p]),
                vec![(tau, 1), (mu, -pp.latest_arrival)],
                Sense::Le,
                0,
            )?;
        }
    }

    // Meeting-time synchronization: a rider on edge (i,j) with driver d
    // leaves i exactly when d does, and reaches j no earlier than t_ij later.
    // Waiting between legs is free.
    for &(p, d) in &pairs {
        let (pp, pd) = (&participants[p], &participants[d]);
        let big_eq = pp.latest_arrival.max(pd.latest_arrival).max(0)
            - pp.earliest_departure.min(pd.earliest_departure).min(0);
        for &(i, j) in ae_pair(p, d) {
            let x = b.get(VarKey::X { p, d, i, j });
            let tp_i = b.get(VarKey::TauRider { p, i });
            let tp_j = b.get(VarKey::TauRider { p, i: j });
            let td_i = b.get(VarKey::TauDriver { d, i });
            let tag = format!("{}_{}_{i}_{j}", sid[p], sid[d]);
            b.row(
                RowTag::Sync,
                format!("{tag}_a"),
                vec![(tp_i, 1), (td_i, -1), (x, big_eq)],
                Sense::Le,
                big_eq,
            )?;
            b.row(
                RowTag::Sync,
                format!("{tag}_b"),
                vec![(td_i, 1), (tp_i, -1), (x, big_eq)],
                Sense::Le,
                big_eq,
            )?;
            let tij = t(i, j)?;
            let big_r = pp.latest_arrival.max(0) - pp.earliest_departure.min(0) + tij;
            b.row(
                RowTag::Sync,
                format!("{tag}_c"),
                vec![(tp_j, 1), (tp_i, -1), (x, -big_r)],
                Sense::Ge,
                tij - big_r,
            )?;
        }
    }

    let by_name = b.variables.iter().enumerate().map(|(k, v)| (v.name.clone(), VarId(k as u32))).collect();
    Ok(ModelInstance {
        config: *cfg,
        participants,
        variables: b.variables,
        objective,
        rows: b.rows,
        groups,
        by_name,
        lookup: b.lookup,
    })
}
