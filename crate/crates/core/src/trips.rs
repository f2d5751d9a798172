//! Trip announcements: ingestion, validation, window synthesis and the
//! fastest-route constant used by the objective.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::Rng;
use serde::Deserialize;

use crate::error::{NetworkError, TripsError};
use crate::network::RoadNetwork;
use crate::{NodeId, Seconds};

/// Largest perturbation, in seconds, applied when synthesizing windows.
pub const MAX_WINDOW_SLACK: Seconds = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ownership {
    CarOwner { capacity: u32 },
    NonCarOwner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Participant {
    pub id: String,
    pub ownership: Ownership,
    pub submission: Seconds,
    pub origin: NodeId,
    pub destination: NodeId,
    pub earliest_departure: Seconds,
    pub latest_arrival: Seconds,
    /// Time after submission by which a match decision is due.
    pub deadline: Seconds,
}

impl Participant {
    pub fn is_car_owner(&self) -> bool {
        matches!(self.ownership, Ownership::CarOwner { .. })
    }

    pub fn capacity(&self) -> Option<u32> {
        match self.ownership {
            Ownership::CarOwner { capacity } => Some(capacity),
            Ownership::NonCarOwner => None,
        }
    }

    pub fn window(&self) -> Seconds {
        self.latest_arrival - self.earliest_departure
    }

    /// Checks the participant invariants, naming the first offending field.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.id.is_empty() {
            return Err(("id", "empty".into()));
        }
        if self.earliest_departure >= self.latest_arrival {
            return Err((
                "ed_s",
                format!(
                    "earliest departure {} must precede latest arrival {}",
                    self.earliest_departure, self.latest_arrival
                ),
            ));
        }
        if self.submission > self.earliest_departure {
            return Err((
                "submission_s",
                format!(
                    "submission {} is after earliest departure {}",
                    self.submission, self.earliest_departure
                ),
            ));
        }
        if self.origin == self.destination {
            return Err(("destination", "origin and destination coincide".into()));
        }
        if self.deadline <= 0 {
            return Err(("deadline_s", format!("{} is not positive", self.deadline)));
        }
        if let Ownership::CarOwner { capacity } = self.ownership {
            if capacity < 1 {
                return Err(("capacity", "car owners need capacity >= 1".into()));
            }
        }
        Ok(())
    }
}

/// A participant together with its fastest-route time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnrichedParticipant {
    pub base: Participant,
    /// Shortest origin-to-destination time; `None` when unreachable.
    pub lambda: Option<Seconds>,
    pub feasible: bool,
}

impl std::ops::Deref for EnrichedParticipant {
    type Target = Participant;

    fn deref(&self) -> &Participant {
        &self.base
    }
}

pub fn enrich(net: &RoadNetwork, p: &Participant) -> Result<EnrichedParticipant, NetworkError> {
    let lambda = net.shortest_travel_time(p.origin, p.destination)?;
    let feasible = lambda.is_some_and(|l| l <= p.window());
    Ok(EnrichedParticipant {
        base: p.clone(),
        lambda,
        feasible,
    })
}

pub fn enrich_all(net: &RoadNetwork, parts: &[Participant]) -> Result<Vec<EnrichedParticipant>, NetworkError> {
    parts.iter().map(|p| enrich(net, p)).collect()
}

/// Widens an observed pickup/drop-off pair into a time window by moving each
/// end outward by a uniform integer number of seconds in `[0, 300]`.
pub fn synthesize_windows<R: Rng + ?Sized>(pickup: Seconds, dropoff: Seconds, rng: &mut R) -> (Seconds, Seconds) {
    debug_assert!(pickup < dropoff);
    let before = rng.gen_range(0..=MAX_WINDOW_SLACK);
    let after = rng.gen_range(0..=MAX_WINDOW_SLACK);
    (pickup - before, dropoff + after)
}

#[derive(Debug, Deserialize)]
struct TripRow {
    id: String,
    ownership: String,
    capacity: Option<u32>,
    deadline_s: Seconds,
    submission_s: Seconds,
    origin: NodeId,
    destination: NodeId,
    ed_s: Seconds,
    la_s: Seconds,
}

/// Reads the trips CSV. The result is ordered by submission time; rows with
/// equal submission times keep their file order.
pub fn load_trips<R: Read>(source: R) -> Result<Vec<Participant>, TripsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let malformed = |e: csv::Error| TripsError::Malformed {
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(malformed)?.clone();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(malformed)?;
        let line = record.position().map_or(0, |p| p.line());
        let row: TripRow = record.deserialize(Some(&headers)).map_err(|e| TripsError::Malformed {
            line,
            message: e.to_string(),
        })?;
        let invalid = |field, message: String| TripsError::Invalid {
            line,
            id: row.id.clone(),
            field,
            message,
        };
        let ownership = match (row.ownership.as_str(), row.capacity) {
            ("owner", Some(capacity)) => Ownership::CarOwner { capacity },
            ("owner", None) => return Err(invalid("capacity", "missing for car owner".into())),
            ("rider", None) => Ownership::NonCarOwner,
            ("rider", Some(_)) => return Err(invalid("capacity", "must be empty for riders".into())),
            (other, _) => return Err(invalid("ownership", format!("expected owner or rider, got {other:?}"))),
        };
        let p = Participant {
            id: row.id.clone(),
            ownership,
            submission: row.submission_s,
            origin: row.origin,
            destination: row.destination,
            earliest_departure: row.ed_s,
            latest_arrival: row.la_s,
            deadline: row.deadline_s,
        };
        p.validate().map_err(|(field, message)| invalid(field, message))?;
        if !seen.insert(p.id.clone()) {
            return Err(TripsError::DuplicateId { line, id: p.id });
        }
        out.push(p);
    }
    out.sort_by_key(|p| p.submission);
    Ok(out)
}

pub fn write_trips<W: Write>(sink: W, parts: &[Participant]) -> std::io::Result<()> {
    let mut w = std::io::BufWriter::new(sink);
    writeln!(w, "id,ownership,capacity,deadline_s,submission_s,origin,destination,ed_s,la_s")?;
    for p in parts {
        let (kind, cap) = match p.ownership {
            Ownership::CarOwner { capacity } => ("owner", capacity.to_string()),
            Ownership::NonCarOwner => ("rider", String::new()),
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            p.id,
            kind,
            cap,
            p.deadline,
            p.submission,
            p.origin,
            p.destination,
            p.earliest_departure,
            p.latest_arrival
        )?;
    }
    w.flush()
}
