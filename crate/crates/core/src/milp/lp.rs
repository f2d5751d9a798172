//! CPLEX-LP text export.

use std::fmt::Write as _;
use std::io::Write;

use num_rational::Rational64;
use num_traits::{Signed, Zero};

use super::{ModelInstance, Sense, VarKind};

const TERMS_PER_LINE: usize = 8;

/// Sanitized LP identifier for a participant or node id.
pub fn lp_name(raw: &str) -> String {
    raw.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

pub(crate) fn format_ratio(r: Rational64) -> String {
    if r.is_integer() {
        return r.to_integer().to_string();
    }
    let mut den = *r.denom();
    while den % 2 == 0 {
        den /= 2;
    }
    while den % 5 == 0 {
        den /= 5;
    }
    if den == 1 {
        // Terminating decimal: print it exactly.
        let mut digits = 0;
        let mut scaled = r;
        while !scaled.is_integer() {
            scaled *= Rational64::from_integer(10);
            digits += 1;
        }
        let n = scaled.to_integer();
        let sign = if n < 0 { "-" } else { "" };
        let n = n.unsigned_abs().to_string();
        let n = format!("{n:0>width$}", width = digits + 1);
        let (int, frac) = n.split_at(n.len() - digits);
        format!("{sign}{int}.{frac}")
    } else {
        format!("{:.15}", *r.numer() as f64 / *r.denom() as f64)
    }
}

fn write_terms<I>(out: &mut String, terms: I)
where
    I: IntoIterator<Item = (String, String, bool)>,
{
    for (k, (coef, var, negative)) in terms.into_iter().enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        match (k, negative) {
            (0, false) => write!(out, " {coef} {var}"),
            (0, true) => write!(out, " - {coef} {var}"),
            (_, false) => write!(out, " + {coef} {var}"),
            (_, true) => write!(out, " - {coef} {var}"),
        }
        .expect("write to string");
    }
}

/// Renders the model as LP text. Identical models give identical text.
pub fn to_lp_string(model: &ModelInstance) -> String {
    let mut out = String::new();
    out.push_str("Maximize\n obj:");
    write_terms(
        &mut out,
        model
            .objective
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .map(|&(v, c)| (format_ratio(c.abs()), model.variable(v).name.clone(), c.is_negative())),
    );
    out.push_str("\nSubject To\n");
    for row in &model.rows {
        write!(out, " {}:", row.name).expect("write to string");
        write_terms(
            &mut out,
            row.terms
                .iter()
                .map(|&(v, a)| (a.abs().to_string(), model.variable(v).name.clone(), a < 0)),
        );
        let op = match row.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        writeln!(out, " {op} {}", row.rhs).expect("write to string");
    }

    let generals: Vec<_> = model.variables.iter().filter(|v| v.kind == VarKind::Integer).collect();
    let binaries: Vec<_> = model.variables.iter().filter(|v| v.kind == VarKind::Binary).collect();
    if !generals.is_empty() {
        out.push_str("Bounds\n");
        for v in &generals {
            writeln!(out, " {} <= {} <= {}", v.lb, v.name, v.ub).expect("write to string");
        }
        out.push_str("Generals\n");
        write_name_list(&mut out, generals.iter().map(|v| v.name.as_str()));
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        write_name_list(&mut out, binaries.iter().map(|v| v.name.as_str()));
    }
    out.push_str("End\n");
    out
}

fn write_name_list<'a>(out: &mut String, names: impl Iterator<Item = &'a str>) {
    for (k, name) in names.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push('\n');
        }
        out.push(' ');
        out.push_str(name);
    }
    out.push('\n');
}

pub fn export_lp<W: Write>(model: &ModelInstance, mut sink: W) -> std::io::Result<()> {
    sink.write_all(to_lp_string(model).as_bytes())?;
    sink.flush()
}
