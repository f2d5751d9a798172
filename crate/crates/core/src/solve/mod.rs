//! Optimization backends for a [`ModelInstance`].

mod exact;
mod external;

use std::collections::BTreeMap;
use std::time::Duration;

use num_rational::Rational64;

use crate::milp::ModelInstance;

pub use exact::solve_exact;
pub use external::{parse_solution_file, solution_file_text, solve_external, ParsedSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveLimits {
    pub max_nodes: u64,
    pub max_time: Duration,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            max_nodes: 20_000_000,
            max_time: Duration::from_secs(120),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    LimitReached,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::LimitReached => "limit-reached",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Incumbent {
    pub objective: Rational64,
    pub values: Vec<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SolveStats {
    pub nodes: u64,
    pub wall_time: Duration,
    /// Best solution known when a limit stopped the search.
    pub incumbent: Option<Incumbent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolverOutcome {
    pub status: SolveStatus,
    pub objective: Option<Rational64>,
    /// One value per model variable, in catalog order.
    pub values: Option<Vec<i64>>,
    pub stats: SolveStats,
}

impl SolverOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn named_values(&self, model: &ModelInstance) -> BTreeMap<String, i64> {
        self.values
            .iter()
            .flat_map(|vals| model.variables.iter().zip(vals).map(|(v, &x)| (v.name.clone(), x)))
            .collect()
    }
}
