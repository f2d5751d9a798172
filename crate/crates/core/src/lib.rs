//! Many-to-many, role-flexible dynamic ridesharing with HOV lane constraints.
//!
//! The pipeline runs from a [`network::RoadNetwork`] and a list of
//! [`trips::Participant`]s through [`preprocess`] (accessible nodes and
//! viable matches) and [`milp`] (model construction) to [`solve`] (exact
//! search or an external MILP solver). [`oracle`] is an independent brute
//! force used to certify the model, and [`horizon`] runs the whole thing as a
//! rolling-horizon simulation.

pub mod error;
pub mod gen;
pub mod horizon;
pub mod milp;
pub mod network;
pub mod oracle;
pub mod pipeline;
pub mod preprocess;
pub mod solve;
pub mod trips;

pub use error::{ModelError, NetworkError, OracleError, PipelineError, PreprocessError, SolveError, TripsError};
pub use milp::{Assignment, ModelConfig, ModelInstance, ObjectiveMode};
pub use network::{PathResult, RoadNetwork};
pub use pipeline::{solve_instance, Backend, Solved};
pub use preprocess::{AccessMethod, AccessSets, PreprocessOptions};
pub use solve::{SolveLimits, SolveStatus, SolverOutcome};
pub use trips::{EnrichedParticipant, Ownership, Participant};

pub type NodeId = u32;

/// Integer seconds; all times and travel times use this unit.
pub type Seconds = i64;

pub use num_rational::Rational64;

/// Parses `"3"`, `"-1.25"` or `"7/3"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational64> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let (n, d): (i64, i64) = (n.trim().parse().ok()?, d.trim().parse().ok()?);
        return (d != 0).then(|| Rational64::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 12 {
        return None;
    }
    let int: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let scale = 10i64.pow(frac.len() as u32);
    let frac: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let r = Rational64::new(int.checked_mul(scale)?.checked_add(frac)?, scale);
    Some(if neg { -r } else { r })
}

pub(crate) mod ratio_serde {
    use num_rational::Rational64;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Rational64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&r.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational64, D::Error> {
        let s = String::deserialize(d)?;
        super::parse_rational(&s).ok_or_else(|| serde::de::Error::custom(format!("not a rational: {s:?}")))
    }
}
