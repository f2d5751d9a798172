//! Runs an external MILP solver on the exported LP file.
//!
//! The command template may use `{lp}` and `{sol}`; it runs through `sh -c`
//! in the work directory. The solver (or a wrapper around it) must write a
//! solution file of `name value` lines. Optional header lines are
//! `# objective <value>` and `# status infeasible`. Variables missing from
//! the file are zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use num_rational::Rational64;

use super::{SolveStats, SolveStatus, SolverOutcome};
use crate::error::{ModelError, SolveError};
use crate::milp::{export_lp, lp::format_ratio, ModelInstance};

const OBJECTIVE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedSolution {
    pub objective: Option<f64>,
    pub infeasible: bool,
    pub values: BTreeMap<String, f64>,
}

pub fn parse_solution_file(text: &str) -> Result<ParsedSolution, SolveError> {
    let mut out = ParsedSolution::default();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let err = |message: String| SolveError::SolutionParse { line: k + 1, message };
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let mut words = comment.split_whitespace();
            match (words.next(), words.next()) {
                (Some("objective"), Some(v)) => {
                    out.objective = Some(v.parse().map_err(|_| err(format!("bad objective {v:?}")))?);
                }
                (Some("status"), Some(s)) => out.infeasible = s.eq_ignore_ascii_case("infeasible"),
                _ => {}
            }
            continue;
        }
        let mut words = line.split_whitespace();
        let (Some(name), Some(value), None) = (words.next(), words.next(), words.next()) else {
            return Err(err(format!("expected `name value`, got {line:?}")));
        };
        let value: f64 = value.parse().map_err(|_| err(format!("bad value {value:?}")))?;
        if !value.is_finite() {
            return Err(err(format!("non-finite value for {name}")));
        }
        if out.values.insert(name.to_owned(), value).is_some() {
            return Err(err(format!("{name} listed twice")));
        }
    }
    Ok(out)
}

/// Solution file text for `values`, as the external path expects it back.
pub fn solution_file_text(model: &ModelInstance, values: &[i64]) -> String {
    let mut out = format!("# objective {}\n", format_ratio(model.objective_value(values)));
    for (v, x) in model.variables.iter().zip(values) {
        out.push_str(&format!("{} {}\n", v.name, x));
    }
    out
}

fn as_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Exports `model`, runs `command_template`, and verifies what comes back.
pub fn solve_external(model: &ModelInstance, command_template: &str, workdir: &Path) -> Result<SolverOutcome, SolveError> {
    let started = Instant::now();
    fs::create_dir_all(workdir)?;
    let lp_path = workdir.join("model.lp");
    let sol_path = workdir.join("solution.sol");
    if sol_path.exists() {
        fs::remove_file(&sol_path)?;
    }
    export_lp(model, fs::File::create(&lp_path)?)?;

    let command = command_template
        .replace("{lp}", &lp_path.display().to_string())
        .replace("{sol}", &sol_path.display().to_string());
    log::info!("running external solver: {command}");
    let output = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(workdir)
        .output()
        .map_err(SolveError::Spawn)?;
    if !output.status.success() {
        return Err(SolveError::ExternalFailed {
            status: output.status.to_string(),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        });
    }

    let parsed = parse_solution_file(&fs::read_to_string(&sol_path)?)?;
    let stats = SolveStats {
        nodes: 0,
        wall_time: started.elapsed(),
        incumbent: None,
    };
    if parsed.infeasible {
        return Ok(SolverOutcome {
            status: SolveStatus::Infeasible,
            objective: None,
            values: None,
            stats,
        });
    }
    let values = crate::milp::values_from_named(model, &parsed.values)?;
    if let Some(msg) = model.first_violation(&values) {
        return Err(SolveError::Mismatch(msg));
    }
    let objective = model.objective_value(&values);
    if let Some(reported) = parsed.objective {
        let decoded = as_f64(objective);
        if (decoded - reported).abs() > OBJECTIVE_TOL {
            return Err(SolveError::Model(ModelError::ObjectiveMismatch { decoded, reported }));
        }
    }
    Ok(SolverOutcome {
        status: SolveStatus::Optimal,
        objective: Some(objective),
        values: Some(values),
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_headers_and_values() {
        let p = parse_solution_file("# objective -20\n\nx_a 1\ny 0.9999999\n").unwrap();
        assert_eq!(p.objective, Some(-20.0));
        assert!(!p.infeasible);
        assert_eq!(p.values.len(), 2);
        let p = parse_solution_file("# status infeasible\n").unwrap();
        assert!(p.infeasible);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(matches!(
            parse_solution_file("x 1\nbroken\n"),
            Err(SolveError::SolutionParse { line: 2, .. })
        ));
        assert!(parse_solution_file("x 1\nx 0\n").is_err());
        assert!(parse_solution_file("x nan\n").is_err());
    }
}
