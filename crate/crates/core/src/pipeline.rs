//! One static optimization: preprocessing, model construction, solving and
//! decoding.

use std::path::PathBuf;

use crate::error::PipelineError;
use crate::milp::{build_model, decode_values, Assignment, ModelConfig, ModelInstance};
use crate::network::RoadNetwork;
use crate::preprocess::{build_access_sets, AccessSets, PreprocessOptions};
use crate::solve::{solve_exact, solve_external, SolveLimits, SolverOutcome};
use crate::trips::EnrichedParticipant;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Backend {
    Exact(SolveLimits),
    /// Command template with `{lp}` and `{sol}`, run in `workdir`.
    External { command: String, workdir: PathBuf },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Exact(SolveLimits::default())
    }
}

#[derive(Debug, Clone)]
pub struct Solved {
    /// The participants that entered the model.
    pub participants: Vec<EnrichedParticipant>,
    pub sets: AccessSets,
    pub model: ModelInstance,
    pub outcome: SolverOutcome,
    /// Present when the outcome is optimal.
    pub assignment: Option<Assignment>,
}

/// Optimizes over the feasible members of `parts`; the rest are left out.
pub fn solve_instance(
    net: &RoadNetwork,
    parts: &[EnrichedParticipant],
    cfg: &ModelConfig,
    opts: PreprocessOptions,
    backend: &Backend,
) -> Result<Solved, PipelineError> {
    let participants: Vec<EnrichedParticipant> = parts.iter().filter(|p| p.feasible).cloned().collect();
    let sets = build_access_sets(net, &participants, opts)?;
    let model = build_model(net, &participants, &sets, cfg)?;
    let outcome = match backend {
        Backend::Exact(limits) => solve_exact(&model, *limits)?,
        Backend::External { command, workdir } => solve_external(&model, command, workdir)?,
    };
    let assignment = match (&outcome.values, outcome.is_optimal()) {
        (Some(values), true) => Some(decode_values(&model, values)?),
        _ => None,
    };
    Ok(Solved {
        participants,
        sets,
        model,
        outcome,
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::fixtures::{exact, weighted_riders_only};
    use crate::network::tests::line;
    use crate::solve::SolveStatus;
    use crate::trips::enrich_all;
    use crate::trips::tests::person;

    #[test]
    fn infeasible_participants_are_left_out() {
        let net = line();
        let parts = enrich_all(
            &net,
            &[
                person("d", Some(1), 1, 3, 0, 30),
                person("r", None, 1, 3, 0, 30),
                person("late", None, 1, 3, 0, 5),
            ],
        )
        .unwrap();
        let solved = solve_instance(&net, &parts, &weighted_riders_only(), exact(), &Backend::default()).unwrap();
        assert_eq!(solved.participants.len(), 2);
        assert_eq!(solved.outcome.status, SolveStatus::Optimal);
        let a = solved.assignment.unwrap();
        assert!(a.matched.contains("r"));
        assert!(!a.matched.contains("late"));
    }

    #[test]
    fn limit_leaves_no_assignment() {
        let net = line();
        let parts = enrich_all(&net, &[person("d", Some(1), 1, 3, 0, 30), person("r", None, 1, 3, 0, 30)]).unwrap();
        let backend = Backend::Exact(SolveLimits {
            max_nodes: 1,
            ..SolveLimits::default()
        });
        let solved = solve_instance(&net, &parts, &weighted_riders_only(), exact(), &backend).unwrap();
        assert_eq!(solved.outcome.status, SolveStatus::LimitReached);
        assert!(solved.assignment.is_none());
    }
}
