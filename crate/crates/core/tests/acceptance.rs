//! One line per acceptance criterion. Exits nonzero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use common::*;
use flexride_core::horizon::{run, step, write_metrics_csv, PoolState};
use flexride_core::milp::{decode_values, to_lp_string, validate_solution, Assignment};
use flexride_core::oracle::{oracle_optimum, OracleLimits};
use flexride_core::preprocess::accessible_nodes;
use flexride_core::solve::{solve_exact, solve_external};
use flexride_core::trips::enrich;
use flexride_core::{AccessMethod, ModelConfig, Rational64, SolveLimits};
use rand::Rng;

type Verdict = Result<String, String>;

/// Every optimum seen anywhere in the run, validated.
#[derive(Default)]
struct Validity {
    checked: usize,
    failures: Vec<String>,
}

impl Validity {
    fn record(&mut self, what: &str, report: &flexride_core::milp::ValidationReport) {
        self.checked += 1;
        if !report.is_ok() {
            self.failures.push(format!("{what}: {:?}", report.failed_families()));
        }
    }

    fn verdict(&self) -> Verdict {
        if self.failures.is_empty() && self.checked > 0 {
            Ok(format!("{} optimal assignments validated, 0 failures", self.checked))
        } else {
            Err(format!("{} of {} failed: {}", self.failures.len(), self.checked, self.failures.join("; ")))
        }
    }
}

/// Exact optimum of a tiny instance; the decoded assignment is validated.
fn exact_optimum(seed: u64, cfg: &ModelConfig, v: &mut Validity) -> Result<(Rational64, Assignment), String> {
    let t = tiny(seed);
    let b = build(&t, cfg);
    let out = solve_exact(&b.model, SolveLimits::default()).map_err(|e| format!("seed {seed}: {e}"))?;
    let (Some(obj), Some(values)) = (out.objective, out.values.as_ref()) else {
        return Err(format!("seed {seed}: status {}", out.status));
    };
    if let Some(row) = b.model.first_violation(values) {
        return Err(format!("seed {seed}: {row}"));
    }
    let a = decode_values(&b.model, values).map_err(|e| format!("seed {seed}: {e}"))?;
    v.record(&format!("seed {seed}"), &validate_solution(&t.network, &b.parts, Some(&b.sets), cfg, &a));
    Ok((obj, a))
}

fn oracle_equivalence(v: &mut Validity) -> Verdict {
    let started = Instant::now();
    let mut solves = 0;
    let mut mismatches = Vec::new();
    let (mut matched, mut transfers, mut shifts) = (0, 0, 0);
    let seeds = 0..60u64;
    for seed in seeds.clone() {
        let t = tiny(seed);
        for (name, base) in objective_configs() {
            for flex in [true, false] {
                let cfg = with_flex(base, flex);
                let (obj, a) = exact_optimum(seed, &cfg, v)?;
                let parts = build(&t, &cfg).parts;
                let (best, _) = oracle_optimum(&t.network, &parts, &cfg, OracleLimits::default())
                    .map_err(|e| format!("seed {seed}: {e}"))?;
                solves += 1;
                if obj != best {
                    mismatches.push(format!("seed {seed} {name} flex={flex}: exact {obj}, oracle {best}"));
                }
                matched += usize::from(!a.matched.is_empty());
                transfers += usize::from(a.rider_itineraries.values().any(|l| l.len() > 1));
                shifts += usize::from(a.matched.iter().any(|id| id.starts_with('c')));
            }
        }
    }
    let detail = format!(
        "{} instances x 6 configs ({solves} comparisons), {} mismatches; optima with matches {matched}, transfers {transfers}, role shifts {shifts}; {:.1}s",
        seeds.count(),
        mismatches.len(),
        started.elapsed().as_secs_f64()
    );
    if mismatches.is_empty() && started.elapsed() < Duration::from_secs(300) {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", mismatches.join("; ")))
    }
}

fn monotonicity(v: &mut Validity) -> Verdict {
    let mut violations = Vec::new();
    let mut strict = (0, 0);
    let seeds = 1000..1100u64;
    for seed in seeds.clone() {
        for (name, base) in objective_configs() {
            let mut obj = |flex, hov| exact_optimum(seed, &with_hov(with_flex(base, flex), hov), v).map(|r| r.0);
            let (ft, fh, nt, nh) = (obj(true, true)?, obj(true, false)?, obj(false, true)?, obj(false, false)?);
            if ft < nt || fh < nh {
                violations.push(format!("seed {seed} {name}: flex below no-flex"));
            }
            if fh < ft || nh < nt {
                violations.push(format!("seed {seed} {name}: no-HOV below HOV"));
            }
            strict.0 += usize::from(ft > nt);
            strict.1 += usize::from(fh > ft);
        }
    }
    let detail = format!(
        "{} instances x 3 objective modes x 4 settings, {} violations; flex strictly better {} times, HOV rule binding {} times",
        seeds.count(),
        violations.len(),
        strict.0,
        strict.1
    );
    if violations.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", violations.join("; ")))
    }
}

fn preprocessing_soundness() -> Verdict {
    let mut participants = 0;
    let mut problems = Vec::new();
    let mut graph_seed = 0;
    let mut max_nodes = 0;
    while participants < 100 {
        let mut rng = seeded(5000 + graph_seed);
        graph_seed += 1;
        let net = random_network(&mut rng, 10, 50, 2);
        max_nodes = max_nodes.max(net.node_count());
        let d = all_pairs(&net);
        let n = net.node_count() as u32;
        for _ in 0..10 {
            let (o, e) = (rng.gen_range(1..=n), rng.gen_range(1..=n));
            let Some(lambda) = d[o as usize][e as usize].filter(|_| o != e) else { continue };
            let ed = rng.gen_range(0..100);
            let la = ed + lambda + rng.gen_range(0..=80);
            let p = enrich(&net, &announce("p", None, 0, o, e, ed, la, 600)).unwrap();
            participants += 1;
            let want: BTreeSet<u32> = (1..=n)
                .filter(|&i| matches!((d[o as usize][i as usize], d[i as usize][e as usize]), (Some(a), Some(b)) if a + b <= la - ed))
                .collect();
            let exact = accessible_nodes(&net, &p, AccessMethod::Exact).map_err(|e| e.to_string())?;
            if exact != want {
                problems.push(format!("graph {graph_seed} {o}->{e}: exact set differs from brute force"));
            }
            for k in [1, 3, 10] {
                let yen = accessible_nodes(&net, &p, AccessMethod::Yen(k)).map_err(|e| e.to_string())?;
                if !yen.is_subset(&exact) || !yen.contains(&o) || !yen.contains(&e) {
                    problems.push(format!("graph {graph_seed} {o}->{e}: Yen({k}) not inside exact set"));
                }
            }
        }
    }
    let detail = format!(
        "{participants} participants on {graph_seed} graphs (up to {max_nodes} nodes), Yen k in {{1,3,10}}, {} problems",
        problems.len()
    );
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

fn yen_correctness() -> Verdict {
    let mut queries = 0;
    let mut problems = Vec::new();
    for g in 0..50u64 {
        let mut rng = seeded(7000 + g);
        let net = random_network(&mut rng, 2, 8, 2);
        let n = net.node_count() as u32;
        for i in 1..=n {
            for j in (1..=n).filter(|&j| j != i) {
                let all = all_simple_paths(&net, i, j);
                for k in 1..=10 {
                    queries += 1;
                    let want: Vec<(i64, Vec<u32>)> = all.iter().take(k).cloned().collect();
                    let got: Vec<(i64, Vec<u32>)> = net
                        .k_shortest_paths(i, j, k)
                        .map_err(|e| e.to_string())?
                        .into_iter()
                        .map(|p| (p.total_time, p.nodes))
                        .collect();
                    if got != want {
                        problems.push(format!("graph {g} {i}->{j} k={k}"));
                    }
                }
            }
        }
    }
    let detail = format!("50 graphs (<= 8 nodes), {queries} queries with k = 1..10, {} differences", problems.len());
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

/// External objective minus exact objective for one tiny instance.
fn external_gap(seed: u64, cfg: &ModelConfig, command: &str, work: &std::path::Path, v: &mut Validity) -> Result<f64, String> {
    let (exact, _) = exact_optimum(seed, cfg, v)?;
    let b = build(&tiny(seed), cfg);
    let out = solve_external(&b.model, command, work).map_err(|e| format!("seed {seed}: {e}"))?;
    let ext = out.objective.ok_or_else(|| format!("seed {seed}: status {}", out.status))?;
    Ok((*ext.numer() as f64 / *ext.denom() as f64) - (*exact.numer() as f64 / *exact.denom() as f64))
}

fn external_parity(v: &mut Validity) -> Verdict {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut problems = Vec::new();
    let mut runs = 0;
    for (seed, path) in pinned_solutions() {
        let cmd = format!("cp {} {{sol}}", shell_quote(&path));
        runs += 1;
        let gap = external_gap(seed, &pinned_config(), &cmd, &dir.path().join(format!("stub_{seed}")), v)?;
        if gap.abs() > 1e-6 {
            problems.push(format!("pinned seed {seed}: gap {gap}"));
        }
    }
    let stub_count = runs;
    let live = if scipy_available() {
        let cmd = format!("python3 {} {{lp}} {{sol}}", shell_quote(&highs_adapter()));
        for seed in 0..20u64 {
            for (name, base) in objective_configs() {
                for flex in [true, false] {
                    runs += 1;
                    let work = dir.path().join(format!("highs_{runs}"));
                    let gap = external_gap(seed, &with_flex(base, flex), &cmd, &work, v)?;
                    if gap.abs() > 1e-6 {
                        problems.push(format!("seed {seed} {name} flex={flex}: gap {gap}"));
                    }
                }
            }
        }
        format!("{} live HiGHS solves", runs - stub_count)
    } else {
        "scipy not available, live HiGHS comparison skipped".to_owned()
    };
    let detail = format!("{stub_count} pinned stub replays, {live}, {} differences above 1e-6", problems.len());
    if problems.is_empty() && stub_count > 0 {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

fn horizon_conservation(v: &mut Validity) -> Verdict {
    let net = horizon_network();
    let stream = scripted_stream();
    let cfg = horizon_config(weighted(2, false));
    let mut state = PoolState::default();
    let mut committed = BTreeSet::new();
    let mut problems = Vec::new();
    let boundaries = cfg.boundaries();
    for (k, &now) in boundaries.iter().enumerate() {
        let before = state.committed.len();
        let report = step(&mut state, &net, &stream, now, k, &cfg);
        if let Some(e) = report.error {
            problems.push(format!("period {k} failed: {e}"));
        }
        if state.announced != state.committed_count() + state.expired.len() + state.pending.len() {
            problems.push(format!("period {k}: conservation broken"));
        }
        for c in &state.committed[before..] {
            v.record(&format!("horizon period {k}"), &validate_solution(&net, &c.participants, None, &cfg.model, &c.assignment));
            for p in &c.participants {
                if !committed.insert(p.id.clone()) {
                    problems.push(format!("{} committed twice", p.id));
                }
            }
        }
    }

    let result = run(&net, &stream, &cfg);
    let owners: BTreeSet<&str> = stream.iter().filter(|p| p.is_car_owner()).map(|p| p.id.as_str()).collect();
    let non_owners = stream.len() - owners.len();
    let matched: Vec<&String> = result.state.committed.iter().flat_map(|c| &c.assignment.matched).collect();
    let shifted = matched.iter().filter(|id| owners.contains(id.as_str())).count();
    let want_match = 100.0 * matched.len() as f64 / non_owners as f64;
    let want_shift = 100.0 * shifted as f64 / owners.len() as f64;
    if result.metrics.match_pct != want_match || result.metrics.shift_pct != want_shift {
        problems.push(format!(
            "metrics {}/{} but denominators |NC| = {non_owners}, |C| = {} give {want_match}/{want_shift}",
            result.metrics.match_pct,
            result.metrics.shift_pct,
            owners.len()
        ));
    }

    let over = run(&net, &over_hundred_stream(), &cfg);
    if over.metrics.match_pct <= 100.0 {
        problems.push(format!("fixture match_pct {} not above 100", over.metrics.match_pct));
    }

    let detail = format!(
        "{} participants over {} periods: {} committed, {} expired, {} pending; match {:.1}%, shift {:.1}%; fixture match {:.0}%",
        stream.len(),
        boundaries.len(),
        state.committed_count(),
        state.expired.len(),
        state.pending.len(),
        result.metrics.match_pct,
        result.metrics.shift_pct,
        over.metrics.match_pct
    );
    if problems.is_empty() && boundaries.len() == 12 && stream.len() == 20 {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

fn determinism(v: &mut Validity) -> Verdict {
    let mut problems = Vec::new();
    for seed in 0..20u64 {
        for (name, cfg) in objective_configs() {
            let first = to_lp_string(&build(&tiny(seed), &cfg).model);
            let second = to_lp_string(&build(&tiny(seed), &cfg).model);
            if first != second {
                problems.push(format!("seed {seed} {name}: LP differs"));
            }
            let (_, a) = exact_optimum(seed, &cfg, v)?;
            let (_, b) = exact_optimum(seed, &cfg, v)?;
            let (ja, jb) = (serde_json::to_string_pretty(&a).unwrap(), serde_json::to_string_pretty(&b).unwrap());
            if ja != jb {
                problems.push(format!("seed {seed} {name}: solution JSON differs"));
            }
        }
    }
    let net = horizon_network();
    let cfg = horizon_config(weighted(2, false));
    let csv = || {
        let mut out = Vec::new();
        write_metrics_csv(&mut out, &run(&net, &scripted_stream(), &cfg).reports).unwrap();
        out
    };
    if csv() != csv() {
        problems.push("metrics CSV differs".into());
    }
    let detail = format!("20 seeds x 3 modes for LP and solution JSON, scripted horizon CSV; {} differences", problems.len());
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}: {}", problems.join("; ")))
    }
}

fn main() {
    let mut validity = Validity::default();
    let mut lines: Vec<(&str, Verdict)> = vec![
        ("oracle equivalence", oracle_equivalence(&mut validity)),
        ("relaxation monotonicity", monotonicity(&mut validity)),
    ];
    let rest: Vec<(&str, Verdict)> = vec![
        ("preprocessing soundness", preprocessing_soundness()),
        ("yen correctness", yen_correctness()),
        ("external parity", external_parity(&mut validity)),
        ("horizon conservation", horizon_conservation(&mut validity)),
        ("determinism", determinism(&mut validity)),
    ];
    lines.push(("solution validity", validity.verdict()));
    lines.extend(rest);

    let mut failed = 0;
    println!();
    for (name, verdict) in &lines {
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("\nacceptance: {} passed, {failed} failed\n", lines.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
