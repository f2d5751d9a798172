//! Mixed-integer model of the many-to-many, role-flexible ridesharing
//! problem: variable catalog, constraint rows, LP export, solution decoding
//! and semantic validation.

mod build;
mod decode;
pub(crate) mod lp;
mod validate;

use std::collections::HashMap;
use std::fmt;

use num_rational::Rational64;

use crate::{NodeId, Seconds};

pub use build::{build_model, build_model_with, BuildOptions, Mutation};
pub use decode::{decode_solution, decode_values, values_from_named, Assignment, Leg, RouteStop};
pub use lp::{export_lp, lp_name, to_lp_string};
pub use validate::{validate_solution, Family, FamilyResult, ValidationReport};

/// How the objective weighs matches against travel time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveMode {
    /// Multiplier on each matched participant's fastest-route time.
    pub lambda_scale: Rational64,
    /// Whether drivers' own arcs are charged their travel time.
    pub include_driver_arcs: bool,
}

impl ObjectiveMode {
    pub fn as_printed() -> Self {
        Self {
            lambda_scale: Rational64::from_integer(1),
            include_driver_arcs: true,
        }
    }

    pub fn weighted(factor: Rational64) -> Self {
        Self {
            lambda_scale: factor,
            include_driver_arcs: true,
        }
    }
}

impl Default for ObjectiveMode {
    fn default() -> Self {
        Self::as_printed()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Car owners may be matched as riders.
    pub flex_roles: bool,
    pub hov_enabled: bool,
    /// Minimum occupancy on HOV edges.
    pub n_h: u32,
    /// Occupancy counts the driver as one person.
    pub count_driver: bool,
    pub objective: ObjectiveMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            flex_roles: true,
            hov_enabled: true,
            n_h: 2,
            count_driver: true,
            objective: ObjectiveMode::default(),
        }
    }
}

impl ModelConfig {
    /// Number of people on board a vehicle carrying `riders` passengers.
    pub fn occupancy(&self, riders: u32) -> u32 {
        riders + u32::from(self.count_driver)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
}

/// Structured identity of a variable. Participant fields index
/// [`ModelInstance::participants`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKey {
    Delta(usize),
    Mu(usize),
    X { p: usize, d: usize, i: NodeId, j: NodeId },
    Y { p: usize, d: usize, i: NodeId },
    Z { p: usize, d: usize, i: NodeId },
    Kappa { d: usize, i: NodeId },
    U { d: usize, i: NodeId },
    TauDriver { d: usize, i: NodeId },
    TauRider { p: usize, i: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub key: VarKey,
    pub name: String,
    pub kind: VarKind,
    pub lb: i64,
    pub ub: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn holds(self, lhs: i64, rhs: i64) -> bool {
        match self {
            Sense::Le => lhs <= rhs,
            Sense::Ge => lhs >= rhs,
            Sense::Eq => lhs == rhs,
        }
    }
}

/// Constraint family a row belongs to: a numbered family 2..=23 or the
/// meeting-time synchronization rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RowTag {
    Family(u8),
    Sync,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RowTag::Family(n) => write!(f, "{n}"),
            RowTag::Sync => f.write_str("sync"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub tag: RowTag,
    pub name: String,
    pub terms: Vec<(VarId, i64)>,
    pub sense: Sense,
    pub rhs: i64,
}

impl Row {
    pub fn activity(&self, values: &[i64]) -> i64 {
        self.terms.iter().map(|&(v, a)| a * values[v.index()]).sum()
    }

    pub fn is_satisfied(&self, values: &[i64]) -> bool {
        self.sense.holds(self.activity(values), self.rhs)
    }
}

/// Participant data the model was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelParticipant {
    pub id: String,
    pub capacity: Option<u32>,
    pub origin: NodeId,
    pub destination: NodeId,
    pub earliest_departure: Seconds,
    pub latest_arrival: Seconds,
    pub lambda: Seconds,
}

/// Objective terms that belong to one person: an indicator (matched or
/// driving), the gain when it is on, and the arcs charged to that person.
///
/// When the indicator is on, the arcs form an origin-destination path, so
/// their cost is at least `min_cost`; when it is off they are all zero.
/// The exact solver uses this to bound subtrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectiveGroup {
    pub indicator: VarId,
    pub gain: Rational64,
    pub arcs: Vec<(VarId, Seconds)>,
    pub min_cost: Seconds,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelInstance {
    pub config: ModelConfig,
    pub participants: Vec<ModelParticipant>,
    pub variables: Vec<Variable>,
    /// Maximized.
    pub objective: Vec<(VarId, Rational64)>,
    pub rows: Vec<Row>,
    pub groups: Vec<ObjectiveGroup>,
    lookup: HashMap<VarKey, VarId>,
    by_name: HashMap<String, VarId>,
}

impl ModelInstance {
    pub fn var(&self, key: &VarKey) -> Option<VarId> {
        self.lookup.get(key).copied()
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.index()]
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn participant_index(&self, id: &str) -> Option<usize> {
        self.participants.iter().position(|p| p.id == id)
    }

    pub fn count_rows(&self, tag: RowTag) -> usize {
        self.rows.iter().filter(|r| r.tag == tag).count()
    }

    pub fn count_vars(&self, pred: impl Fn(&VarKey) -> bool) -> usize {
        self.variables.iter().filter(|v| pred(&v.key)).count()
    }

    pub fn objective_value(&self, values: &[i64]) -> Rational64 {
        self.objective
            .iter()
            .map(|&(v, c)| c * Rational64::from_integer(values[v.index()]))
            .sum()
    }

    /// First row violated by `values`, including variable bounds.
    pub fn first_violation(&self, values: &[i64]) -> Option<String> {
        if values.len() != self.variables.len() {
            return Some(format!(
                "expected {} values, got {}",
                self.variables.len(),
                values.len()
            ));
        }
        for (v, &x) in self.variables.iter().zip(values) {
            if x < v.lb || x > v.ub {
                return Some(format!("{} = {} outside [{}, {}]", v.name, x, v.lb, v.ub));
            }
        }
        self.rows
            .iter()
            .find(|r| !r.is_satisfied(values))
            .map(|r| format!("row {} violated (activity {})", r.name, r.activity(values)))
    }
}
