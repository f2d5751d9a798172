//! Depth-first search over the binary variables with bound propagation on
//! every row. Once all binaries are fixed the remaining integer variables
//! only appear in difference rows, which are settled exactly by computing
//! their least solution (earliest times, smallest counters and loads).

use std::collections::VecDeque;
use std::time::Instant;

use num_integer::Integer;
use num_rational::Rational64;

use super::{Incumbent, SolveLimits, SolveStats, SolveStatus, SolverOutcome};
use crate::error::SolveError;
use crate::milp::{ModelInstance, Sense, VarKind};

const NEG_INF: i64 = i64::MIN / 4;
const POS_INF: i64 = i64::MAX / 4;

struct CompiledRow {
    terms: Vec<(usize, i64)>,
    lo: i64,
    hi: i64,
}

struct Group {
    indicator: usize,
    gain: i128,
    arcs: Vec<(usize, i128)>,
    min_cost: i128,
}

fn floor_div(a: i128, b: i128) -> i128 {
    Integer::div_floor(&a, &b)
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -Integer::div_floor(&-a, &b)
}

struct Search<'m> {
    model: &'m ModelInstance,
    rows: Vec<CompiledRow>,
    occurs: Vec<Vec<usize>>,
    lb: Vec<i64>,
    ub: Vec<i64>,
    trail: Vec<(usize, i64, i64)>,
    queue: VecDeque<usize>,
    queued: Vec<bool>,
    order: Vec<usize>,
    /// Objective scaled to integers by `scale`.
    objective: Vec<(usize, i128)>,
    ungrouped: Vec<(usize, i128)>,
    groups: Vec<Group>,
    scale: i64,
    best: Option<(i128, Vec<i64>)>,
    nodes: u64,
    started: Instant,
    limits: SolveLimits,
    stopped: bool,
}

impl<'m> Search<'m> {
    fn new(model: &'m ModelInstance, limits: SolveLimits) -> Self {
        let n = model.variables.len();
        let mut occurs = vec![Vec::new(); n];
        let rows: Vec<CompiledRow> = model
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                for &(v, _) in &row.terms {
                    occurs[v.index()].push(r);
                }
                let (lo, hi) = match row.sense {
                    Sense::Le => (NEG_INF, row.rhs),
                    Sense::Ge => (row.rhs, POS_INF),
                    Sense::Eq => (row.rhs, row.rhs),
                };
                CompiledRow {
                    terms: row.terms.iter().map(|&(v, a)| (v.index(), a)).collect(),
                    lo,
                    hi,
                }
            })
            .collect();

        let scale = model
            .objective
            .iter()
            .map(|(_, c)| *c.denom())
            .chain(model.groups.iter().map(|g| *g.gain.denom()))
            .fold(1i64, |acc, d| acc.lcm(&d));
        let scaled = |c: Rational64| -> i128 { i128::from(*c.numer()) * i128::from(scale / *c.denom()) };
        let objective: Vec<(usize, i128)> = model.objective.iter().map(|&(v, c)| (v.index(), scaled(c))).collect();

        let mut grouped = vec![false; n];
        let groups: Vec<Group> = model
            .groups
            .iter()
            .map(|g| {
                grouped[g.indicator.index()] = true;
                for &(v, _) in &g.arcs {
                    grouped[v.index()] = true;
                }
                Group {
                    indicator: g.indicator.index(),
                    gain: scaled(g.gain),
                    arcs: g.arcs.iter().map(|&(v, c)| (v.index(), i128::from(c) * i128::from(scale))).collect(),
                    min_cost: i128::from(g.min_cost) * i128::from(scale),
                }
            })
            .collect();
        let ungrouped = objective.iter().copied().filter(|&(v, _)| !grouped[v]).collect();

        let order = model
            .variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(k, _)| k)
            .collect();

        Search {
            model,
            occurs,
            lb: model.variables.iter().map(|v| v.lb).collect(),
            ub: model.variables.iter().map(|v| v.ub).collect(),
            queued: vec![false; rows.len()],
            rows,
            trail: Vec::new(),
            queue: VecDeque::new(),
            order,
            objective,
            ungrouped,
            groups,
            scale,
            best: None,
            nodes: 0,
            started: Instant::now(),
            limits,
            stopped: false,
        }
    }

    fn set_bounds(&mut self, v: usize, lb: i64, ub: i64) -> bool {
        if lb == self.lb[v] && ub == self.ub[v] {
            return true;
        }
        self.trail.push((v, self.lb[v], self.ub[v]));
        self.lb[v] = lb;
        self.ub[v] = ub;
        for &r in &self.occurs[v] {
            if !self.queued[r] {
                self.queued[r] = true;
                self.queue.push_back(r);
            }
        }
        lb <= ub
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (v, lb, ub) = self.trail.pop().expect("trail entry");
            self.lb[v] = lb;
            self.ub[v] = ub;
        }
    }

    fn clear_queue(&mut self) {
        for r in self.queue.drain(..) {
            self.queued[r] = false;
        }
    }

    /// Bound propagation to a fixpoint. Returns false on a conflict.
    fn propagate(&mut self) -> bool {
        while let Some(r) = self.queue.pop_front() {
            self.queued[r] = false;
            let (lo, hi) = (self.rows[r].lo, self.rows[r].hi);
            let mut min_act: i128 = 0;
            let mut max_act: i128 = 0;
            for &(v, a) in &self.rows[r].terms {
                let (l, u) = (i128::from(self.lb[v]), i128::from(self.ub[v]));
                let a = i128::from(a);
                if a > 0 {
                    min_act += a * l;
                    max_act += a * u;
                } else {
                    min_act += a * u;
                    max_act += a * l;
                }
            }
            if min_act > i128::from(hi) || max_act < i128::from(lo) {
                self.clear_queue();
                return false;
            }
            for k in 0..self.rows[r].terms.len() {
                let (v, a) = self.rows[r].terms[k];
                let (l, u) = (i128::from(self.lb[v]), i128::from(self.ub[v]));
                let a = i128::from(a);
                let (own_min, own_max) = if a > 0 { (a * l, a * u) } else { (a * u, a * l) };
                let mut new_lb = l;
                let mut new_ub = u;
                if hi != POS_INF {
                    let room = i128::from(hi) - (min_act - own_min);
                    if a > 0 {
                        new_ub = new_ub.min(floor_div(room, a));
                    } else {
                        new_lb = new_lb.max(ceil_div(room, a));
                    }
                }
                if lo != NEG_INF {
                    let need = i128::from(lo) - (max_act - own_max);
                    if a > 0 {
                        new_lb = new_lb.max(ceil_div(need, a));
                    } else {
                        new_ub = new_ub.min(floor_div(need, a));
                    }
                }
                if new_lb != l || new_ub != u {
                    if !self.set_bounds(v, new_lb as i64, new_ub as i64) {
                        self.clear_queue();
                        return false;
                    }
                    // Keep the activity sums in step with the tightened bounds.
                    let (nl, nu) = (new_lb, new_ub);
                    if a > 0 {
                        min_act += a * (nl - l);
                        max_act += a * (nu - u);
                    } else {
                        min_act += a * (nu - u);
                        max_act += a * (nl - l);
                    }
                }
            }
        }
        true
    }

    fn bound(&self) -> i128 {
        let mut total: i128 = 0;
        for &(v, c) in &self.ungrouped {
            total += if c > 0 { c * i128::from(self.ub[v]) } else { c * i128::from(self.lb[v]) };
        }
        for g in &self.groups {
            let committed: i128 = g.arcs.iter().filter(|&&(v, _)| self.lb[v] == 1).map(|&(_, c)| c).sum();
            let mut best = i128::MIN;
            if self.lb[g.indicator] == 0 {
                best = best.max(-committed);
            }
            if self.ub[g.indicator] == 1 {
                best = best.max(g.gain - committed.max(g.min_cost));
            }
            total += best;
        }
        total
    }

    fn out_of_budget(&mut self) -> bool {
        if self.nodes >= self.limits.max_nodes
            || (self.nodes % 1024 == 0 && self.started.elapsed() >= self.limits.max_time)
        {
            self.stopped = true;
        }
        self.stopped
    }

    fn dfs(&mut self, from: usize) -> Result<(), SolveError> {
        self.nodes += 1;
        if self.out_of_budget() {
            return Ok(());
        }
        if let Some((best, _)) = &self.best {
            if self.bound() <= *best {
                return Ok(());
            }
        }
        let next = (from..self.order.len()).find(|&k| {
            let v = self.order[k];
            self.lb[v] < self.ub[v]
        });
        let Some(k) = next else {
            return self.leaf();
        };
        let v = self.order[k];
        for value in [0, 1] {
            let mark = self.trail.len();
            if self.set_bounds(v, value, value) && self.propagate() {
                self.dfs(k + 1)?;
            } else {
                self.clear_queue();
            }
            self.undo(mark);
            if self.stopped {
                break;
            }
        }
        Ok(())
    }

    /// All binaries are fixed: settle the integer variables.
    fn leaf(&mut self) -> Result<(), SolveError> {
        let n = self.lb.len();
        let mut lower = self.lb.clone();
        let upper = self.ub.clone();
        // Difference edges: value[a] >= value[b] + c.
        let mut edges: Vec<(usize, usize, i64)> = Vec::new();
        for (r, row) in self.rows.iter().enumerate() {
            let mut constant: i128 = 0;
            let mut free: Vec<(usize, i64)> = Vec::new();
            for &(v, a) in &row.terms {
                if self.lb[v] == self.ub[v] {
                    constant += i128::from(a) * i128::from(self.lb[v]);
                } else {
                    free.push((v, a));
                }
            }
            let lo = if row.lo == NEG_INF { None } else { Some(i128::from(row.lo) - constant) };
            let hi = if row.hi == POS_INF { None } else { Some(i128::from(row.hi) - constant) };
            match free.as_slice() {
                [] => {
                    if lo.is_some_and(|l| l > 0) || hi.is_some_and(|h| h < 0) {
                        return Ok(());
                    }
                }
                &[(v, a)] => {
                    let a = i128::from(a);
                    let (mut l, mut u) = (i128::from(lower[v]), i128::from(upper[v]));
                    for (bound, is_hi) in [(lo, false), (hi, true)] {
                        let Some(b) = bound else { continue };
                        // a*v >= b (is_hi false) or a*v <= b (is_hi true).
                        match (a > 0, is_hi) {
                            (true, false) | (false, true) => l = l.max(ceil_div(b, a)),
                            (true, true) | (false, false) => u = u.min(floor_div(b, a)),
                        }
                    }
                    if l > u {
                        return Ok(());
                    }
                    lower[v] = l as i64;
                    if u < i128::from(upper[v]) {
                        // Upper bounds never move during settlement; record
                        // as an edge against a fixed zero instead.
                        edges.push((usize::MAX, v, -(u as i64)));
                    }
                }
                &[(v1, a1), (v2, a2)] if a1 == -a2 => {
                    let a = i128::from(a1);
                    // a * (v1 - v2) within [lo, hi].
                    let (dlo, dhi) = if a > 0 {
                        (lo.map(|l| ceil_div(l, a)), hi.map(|h| floor_div(h, a)))
                    } else {
                        (hi.map(|h| ceil_div(h, a)), lo.map(|l| floor_div(l, a)))
                    };
                    if let Some(dlo) = dlo {
                        edges.push((v1, v2, dlo as i64));
                    }
                    if let Some(dhi) = dhi {
                        edges.push((v2, v1, -(dhi as i64)));
                    }
                }
                _ => {
                    return Err(SolveError::Unsupported {
                        row: self.model.rows[r].name.clone(),
                        message: "more than two integer variables remain once binaries are fixed".into(),
                    })
                }
            }
        }

        let mut value = lower;
        let mut changed = true;
        let mut rounds = 0;
        while changed {
            changed = false;
            rounds += 1;
            if rounds > n + 1 {
                return Ok(());
            }
            for &(a, b, c) in &edges {
                if a == usize::MAX {
                    // value[b] <= -c
                    if value[b] > -c {
                        return Ok(());
                    }
                    continue;
                }
                if value[b] + c > value[a] {
                    value[a] = value[b] + c;
                    if value[a] > upper[a] {
                        return Ok(());
                    }
                    changed = true;
                }
            }
        }

        if let Some(msg) = self.model.first_violation(&value) {
            return Err(SolveError::Unsupported {
                row: msg,
                message: "settled values fail verification".into(),
            });
        }
        let objective: i128 = self.objective.iter().map(|&(v, c)| c * i128::from(value[v])).sum();
        if self.best.as_ref().is_none_or(|(b, _)| objective > *b) {
            self.best = Some((objective, value));
        }
        Ok(())
    }

    fn objective_of(&self, scaled: i128) -> Rational64 {
        Rational64::new(scaled as i64, self.scale)
    }
}

/// Solves `model` to proven optimality unless a limit stops the search.
///
/// Among optimal solutions the one whose binaries are lexicographically
/// smallest in catalog order is returned.
pub fn solve_exact(model: &ModelInstance, limits: SolveLimits) -> Result<SolverOutcome, SolveError> {
    let mut search = Search::new(model, limits);
    for r in 0..search.rows.len() {
        search.queued[r] = true;
        search.queue.push_back(r);
    }
    if search.propagate() {
        search.dfs(0)?;
    }
    let stats = SolveStats {
        nodes: search.nodes,
        wall_time: search.started.elapsed(),
        incumbent: None,
    };
    let best = search
        .best
        .take()
        .map(|(obj, values)| (search.objective_of(obj), values));
    Ok(match (search.stopped, best) {
        (true, incumbent) => SolverOutcome {
            status: SolveStatus::LimitReached,
            objective: None,
            values: None,
            stats: SolveStats {
                incumbent: incumbent.map(|(objective, values)| Incumbent { objective, values }),
                ..stats
            },
        },
        (false, Some((objective, values))) => SolverOutcome {
            status: SolveStatus::Optimal,
            objective: Some(objective),
            values: Some(values),
            stats,
        },
        (false, None) => SolverOutcome {
            status: SolveStatus::Infeasible,
            objective: None,
            values: None,
            stats,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::fixtures::{setup, weighted_riders_only};
    use crate::milp::{validate_solution, decode_values, ModelConfig, Row, RowTag};
    use crate::network::tests::{diamond, line};
    use crate::trips::tests::person;

    #[test]
    fn lone_owner_stays_home() {
        let net = line();
        let (_, _, m) = setup(&net, &[person("d", Some(2), 1, 3, 0, 40)], &ModelConfig::default());
        let out = solve_exact(&m, SolveLimits::default()).unwrap();
        assert!(out.is_optimal());
        assert_eq!(out.objective, Some(Rational64::from_integer(0)));
        assert!(out.values.unwrap().iter().all(|&v| v == 0));
    }

    #[test]
    fn inflexible_owners_score_zero() {
        let net = line();
        let people = [person("a", Some(1), 1, 3, 0, 40), person("b", Some(1), 1, 3, 0, 40)];
        let cfg = ModelConfig {
            flex_roles: false,
            ..weighted_riders_only()
        };
        let (_, _, m) = setup(&net, &people, &cfg);
        let out = solve_exact(&m, SolveLimits::default()).unwrap();
        assert_eq!(out.objective, Some(Rational64::from_integer(0)));
        let flex = setup(&net, &people, &weighted_riders_only()).2;
        assert_eq!(solve_exact(&flex, SolveLimits::default()).unwrap().objective, Some(Rational64::from_integer(20)));
    }

    #[test]
    fn empty_model_is_optimal_at_zero() {
        let (_, _, m) = setup(&line(), &[], &ModelConfig::default());
        let out = solve_exact(&m, SolveLimits::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Optimal);
        assert_eq!(out.objective, Some(Rational64::from_integer(0)));
        assert_eq!(out.values, Some(Vec::new()));
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let (_, _, mut m) = setup(&line(), &[person("r", None, 1, 3, 0, 40)], &ModelConfig::default());
        let mu = m.var_by_name("mu_r").unwrap();
        for (name, sense, rhs) in [("c11_force_a", Sense::Ge, 1), ("c11_force_b", Sense::Le, 0)] {
            m.rows.push(Row {
                tag: RowTag::Family(11),
                name: name.into(),
                terms: vec![(mu, 1)],
                sense,
                rhs,
            });
        }
        let out = solve_exact(&m, SolveLimits::default()).unwrap();
        assert_eq!(out.status, SolveStatus::Infeasible);
        assert!(out.values.is_none());
    }

    #[test]
    fn node_limit_stops_search() {
        let net = diamond();
        let people = [
            person("d", Some(2), 1, 4, 0, 60),
            person("e", Some(1), 1, 4, 0, 60),
            person("r", None, 1, 4, 0, 60),
        ];
        let (_, _, m) = setup(&net, &people, &weighted_riders_only());
        let limits = SolveLimits {
            max_nodes: 1,
            ..SolveLimits::default()
        };
        let out = solve_exact(&m, limits).unwrap();
        assert_eq!(out.status, SolveStatus::LimitReached);
        assert!(out.objective.is_none());
    }

    #[test]
    fn optimum_validates() {
        let net = diamond();
        let people = [
            person("d", Some(2), 1, 4, 0, 60),
            person("e", Some(1), 2, 4, 0, 60),
            person("r", None, 1, 4, 0, 60),
            person("s", None, 2, 4, 0, 60),
        ];
        let cfg = weighted_riders_only();
        let (parts, sets, m) = setup(&net, &people, &cfg);
        let out = solve_exact(&m, SolveLimits::default()).unwrap();
        let values = out.values.unwrap();
        assert!(m.first_violation(&values).is_none());
        let a = decode_values(&m, &values).unwrap();
        assert_eq!(Some(a.objective_value), out.objective);
        assert!(validate_solution(&net, &parts, Some(&sets), &cfg, &a).is_ok());
        assert_eq!(a.matched.len(), 2);
    }
}
