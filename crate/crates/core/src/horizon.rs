//! Rolling-horizon simulation: announcements enter a pool, the pool is
//! re-optimized at every period boundary, and matches are committed for good.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use num_rational::Rational64;
use serde::Serialize;

use crate::milp::{lp::format_ratio, Assignment, ModelConfig};
use crate::network::RoadNetwork;
use crate::pipeline::{solve_instance, Backend};
use crate::preprocess::PreprocessOptions;
use crate::solve::SolveStatus;
use crate::trips::{enrich, EnrichedParticipant, Participant};
use crate::Seconds;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HorizonConfig {
    pub period: Seconds,
    pub start: Seconds,
    pub end: Seconds,
    pub model: ModelConfig,
    pub preprocess: PreprocessOptions,
    pub backend: Backend,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        Self {
            period: 300,
            start: 9 * 3600,
            end: 19 * 3600,
            model: ModelConfig::default(),
            preprocess: PreprocessOptions::default(),
            backend: Backend::default(),
        }
    }
}

impl HorizonConfig {
    /// Boundaries `start + k * period` strictly before `end`.
    pub fn boundaries(&self) -> Vec<Seconds> {
        assert!(self.period > 0, "period must be positive");
        (0..)
            .map(|k| self.start + k * self.period)
            .take_while(|&t| t < self.end)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ExpiryReason {
    Deadline,
    Window,
}

/// Participants fixed in one period, with the data they were planned on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Commitment {
    pub period: usize,
    pub participants: Vec<EnrichedParticipant>,
    pub assignment: Assignment,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PoolState {
    /// Announced, neither committed nor expired; in announcement order.
    pub pending: Vec<Participant>,
    pub committed: Vec<Commitment>,
    pub expired: BTreeMap<String, ExpiryReason>,
    /// Number of stream entries taken in so far.
    pub announced: usize,
}

impl PoolState {
    pub fn committed_ids(&self) -> BTreeSet<String> {
        self.committed
            .iter()
            .flat_map(|c| c.assignment.matched.iter().chain(&c.assignment.driving).cloned())
            .collect()
    }

    pub fn committed_count(&self) -> usize {
        self.committed
            .iter()
            .map(|c| c.assignment.matched.len() + c.assignment.driving.len())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeriodReport {
    pub period: usize,
    pub now: Seconds,
    /// Zero for idle periods; `None` when the period failed.
    pub objective: Option<Rational64>,
    pub matches: usize,
    pub shifts: usize,
    pub pool_size: usize,
    pub expired: usize,
    pub error: Option<String>,
}

/// One period at boundary `now`.
pub fn step(
    state: &mut PoolState,
    net: &RoadNetwork,
    stream: &[Participant],
    now: Seconds,
    period: usize,
    cfg: &HorizonConfig,
) -> PeriodReport {
    while state.announced < stream.len() && stream[state.announced].submission <= now {
        state.pending.push(stream[state.announced].clone());
        state.announced += 1;
    }

    let mut expired = 0;
    let mut live: Vec<EnrichedParticipant> = Vec::new();
    let mut keep = Vec::with_capacity(state.pending.len());
    for p in state.pending.drain(..) {
        let mut current = p.clone();
        current.earliest_departure = current.earliest_departure.max(now);
        let lambda = net.shortest_travel_time(p.origin, p.destination).ok().flatten();
        let reason = if now > p.submission + p.deadline {
            Some(ExpiryReason::Deadline)
        } else if lambda.is_none_or(|l| now + l > p.latest_arrival) {
            Some(ExpiryReason::Window)
        } else {
            None
        };
        match reason {
            Some(r) => {
                state.expired.insert(p.id.clone(), r);
                expired += 1;
            }
            None => {
                if current.earliest_departure < current.latest_arrival {
                    live.push(enrich(net, &current).expect("pending nodes exist in the network"));
                }
                keep.push(p);
            }
        }
    }
    state.pending = keep;

    let mut report = PeriodReport {
        period,
        now,
        objective: Some(Rational64::from_integer(0)),
        matches: 0,
        shifts: 0,
        pool_size: state.pending.len(),
        expired,
        error: None,
    };
    if live.is_empty() {
        return report;
    }

    let backend = match &cfg.backend {
        Backend::External { command, workdir } => Backend::External {
            command: command.clone(),
            workdir: workdir.join(format!("period_{period}")),
        },
        other => other.clone(),
    };
    let solved = match solve_instance(net, &live, &cfg.model, cfg.preprocess, &backend) {
        Ok(s) => s,
        Err(e) => {
            report.objective = None;
            report.error = Some(e.to_string());
            return report;
        }
    };
    let assignment = match (solved.outcome.status, solved.assignment) {
        (SolveStatus::Optimal, Some(a)) => a,
        (status, _) => {
            report.objective = None;
            report.error = Some(format!("solver finished with status {status}"));
            return report;
        }
    };

    report.objective = Some(assignment.objective_value);
    report.matches = assignment.matched.len();
    report.shifts = solved
        .participants
        .iter()
        .filter(|p| p.is_car_owner() && assignment.matched.contains(&p.id))
        .count();
    let fixed: BTreeSet<String> = assignment.matched.iter().chain(&assignment.driving).cloned().collect();
    if !fixed.is_empty() {
        state.pending.retain(|p| !fixed.contains(&p.id));
        state.committed.push(Commitment {
            period,
            participants: solved.participants.into_iter().filter(|p| fixed.contains(&p.id)).collect(),
            assignment: assignment.restricted_to(&fixed),
        });
    }
    report
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    #[serde(serialize_with = "ratio_as_number")]
    pub objective_mean: Rational64,
    pub match_pct: f64,
    pub shift_pct: f64,
    pub periods: usize,
    pub failed_periods: usize,
}

fn ratio_as_number<S: serde::Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(*r.numer() as f64 / *r.denom() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub reports: Vec<PeriodReport>,
    pub state: PoolState,
    pub metrics: RunMetrics,
}

fn percent(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Runs every period of `cfg` over `stream`, which must be sorted by
/// submission time.
pub fn run(net: &RoadNetwork, stream: &[Participant], cfg: &HorizonConfig) -> RunResult {
    debug_assert!(stream.windows(2).all(|w| w[0].submission <= w[1].submission));
    let mut state = PoolState::default();
    let reports: Vec<PeriodReport> = cfg
        .boundaries()
        .into_iter()
        .enumerate()
        .map(|(k, now)| step(&mut state, net, stream, now, k, cfg))
        .collect();

    let non_owners = stream.iter().filter(|p| !p.is_car_owner()).count();
    let owners = stream.len() - non_owners;
    let matched: BTreeSet<&String> = state.committed.iter().flat_map(|c| &c.assignment.matched).collect();
    let owner_ids: BTreeSet<&String> = stream.iter().filter(|p| p.is_car_owner()).map(|p| &p.id).collect();
    let shifted = matched.iter().filter(|id| owner_ids.contains(**id)).count();
    let total: Rational64 = reports.iter().filter_map(|r| r.objective).sum();
    let metrics = RunMetrics {
        objective_mean: if reports.is_empty() {
            Rational64::from_integer(0)
        } else {
            total / Rational64::from_integer(reports.len() as i64)
        },
        match_pct: percent(matched.len(), non_owners),
        shift_pct: percent(shifted, owners),
        periods: reports.len(),
        failed_periods: reports.iter().filter(|r| r.error.is_some()).count(),
    };
    RunResult { reports, state, metrics }
}

/// Metrics CSV. Failed periods carry `failed` in the objective column.
pub fn write_metrics_csv<W: Write>(mut sink: W, reports: &[PeriodReport]) -> std::io::Result<()> {
    writeln!(sink, "period,objective,matches,shifts,pool_size,expired")?;
    for r in reports {
        let objective = r.objective.map_or_else(|| "failed".to_owned(), format_ratio);
        writeln!(
            sink,
            "{},{},{},{},{},{}",
            r.period, objective, r.matches, r.shifts, r.pool_size, r.expired
        )?;
    }
    Ok(())
}

/// One LineString feature per committed driver route.
pub fn routes_geojson(net: &RoadNetwork, state: &PoolState, cfg: &ModelConfig) -> serde_json::Value {
    let mut features = Vec::new();
    for c in &state.committed {
        for (driver, route) in &c.assignment.driver_routes {
            let coordinates: Vec<[f64; 2]> = route
                .iter()
                .filter_map(|s| net.node(s.node))
                .map(|n| [n.lon, n.lat])
                .collect();
            let occupancy: Vec<u32> = route
                .windows(2)
                .map(|w| cfg.occupancy(c.assignment.riders_on(driver, w[0].node, w[1].node).len() as u32))
                .collect();
            features.push(serde_json::json!({
                "type": "Feature",
                "geometry": { "type": "LineString", "coordinates": coordinates },
                "properties": { "driver": driver, "period": c.period, "occupancy": occupancy },
            }));
        }
    }
    serde_json::json!({ "type": "FeatureCollection", "features": features })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{validate_solution, ObjectiveMode};
    use crate::network::tests::line;
    use crate::trips::tests::person;

    fn cfg(start: Seconds, end: Seconds) -> HorizonConfig {
        HorizonConfig {
            period: 100,
            start,
            end,
            model: ModelConfig {
                hov_enabled: false,
                objective: ObjectiveMode {
                    include_driver_arcs: false,
                    ..ObjectiveMode::weighted(Rational64::from_integer(2))
                },
                ..ModelConfig::default()
            },
            ..HorizonConfig::default()
        }
    }

    fn announced(id: &str, cap: Option<u32>, s: Seconds, ed: Seconds, la: Seconds, deadline: Seconds) -> Participant {
        Participant {
            submission: s,
            deadline,
            ..person(id, cap, 1, 3, ed, la)
        }
    }

    #[test]
    fn idle_period() {
        let net = line();
        let mut state = PoolState::default();
        let r = step(&mut state, &net, &[], 0, 0, &cfg(0, 100));
        assert_eq!(r.objective, Some(Rational64::from_integer(0)));
        assert_eq!(state, PoolState::default());
    }

    #[test]
    fn pair_commits_in_its_period() {
        let net = line();
        let stream = vec![
            announced("d", Some(1), 0, 0, 200, 600),
            announced("r", None, 0, 0, 200, 600),
        ];
        let res = run(&net, &stream, &cfg(0, 300));
        assert_eq!(res.reports[0].matches, 1);
        assert_eq!(res.state.committed.len(), 1);
        assert_eq!(res.state.committed[0].period, 0);
        assert!(res.state.pending.is_empty());
        assert_eq!(res.metrics.match_pct, 100.0);
        assert_eq!(res.metrics.shift_pct, 0.0);
        let c = &res.state.committed[0];
        let report = validate_solution(&net, &c.participants, None, &cfg(0, 300).model, &c.assignment);
        assert!(report.is_ok(), "{report}");
    }

    #[test]
    fn deadline_expiry() {
        let net = line();
        let stream = vec![announced("r", None, 0, 0, 1000, 100)];
        let mut state = PoolState::default();
        let c = cfg(0, 1000);
        step(&mut state, &net, &stream, 0, 0, &c);
        assert_eq!(state.pending.len(), 1);
        step(&mut state, &net, &stream, 100, 1, &c);
        assert_eq!(state.pending.len(), 1);
        let r = step(&mut state, &net, &stream, 200, 2, &c);
        assert_eq!(r.expired, 1);
        assert_eq!(state.expired["r"], ExpiryReason::Deadline);
    }

    #[test]
    fn window_expiry() {
        let net = line();
        let stream = vec![announced("r", None, 0, 0, 110, 1000)];
        let mut state = PoolState::default();
        let c = cfg(0, 1000);
        step(&mut state, &net, &stream, 0, 0, &c);
        step(&mut state, &net, &stream, 100, 1, &c);
        assert_eq!(state.expired["r"], ExpiryReason::Window);
    }

    #[test]
    fn zero_periods() {
        let net = line();
        let res = run(&net, &[announced("r", None, 0, 0, 100, 100)], &cfg(50, 50));
        assert!(res.reports.is_empty());
        let mut out = Vec::new();
        write_metrics_csv(&mut out, &res.reports).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "period,objective,matches,shifts,pool_size,expired\n");
        assert_eq!(res.metrics.match_pct, 0.0);
    }

    #[test]
    fn no_supply() {
        let net = line();
        let stream = vec![announced("a", None, 0, 0, 500, 600), announced("b", None, 0, 0, 500, 600)];
        let res = run(&net, &stream, &cfg(0, 300));
        assert_eq!(res.metrics.match_pct, 0.0);
        assert_eq!(res.metrics.shift_pct, 0.0);
    }
}
