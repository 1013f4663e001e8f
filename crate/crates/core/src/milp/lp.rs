use std::collections::HashSet;
use std::fmt::Write;

use super::model::{LinearModel, VarId, VarKind};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Shortest decimal that round-trips to the same `f64`.
fn number(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v}")
    }
}

fn write_terms(out: &mut String, model: &LinearModel, terms: &[(VarId, f64)]) {
    let mut written = 0;
    for &(v, c) in terms {
        if c == 0.0 {
            continue;
        }
        if written > 0 && written % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if c < 0.0 { '-' } else { '+' };
        if written == 0 && c > 0.0 {
            let _ = write!(out, " {} {}", number(c), model.name(v));
        } else {
            let _ = write!(out, " {sign} {} {}", number(c.abs()), model.name(v));
        }
        written += 1;
    }
    if written == 0 {
        if let Some(first) = model.variables().first() {
            let _ = write!(out, " 0 {}", first.name);
        }
    }
}

/// Serializes the model in LP format. Output depends only on the model, so
/// identical models give byte-identical text.
pub fn emit_lp(model: &LinearModel) -> Result<String> {
    let mut seen = HashSet::new();
    for v in model.variables() {
        if !valid_name(&v.name) {
            return Err(Error::Model(format!("variable name '{}' is not LP-safe", v.name)));
        }
        if !seen.insert(v.name.as_str()) {
            return Err(Error::Model(format!("variable name '{}' declared twice", v.name)));
        }
    }
    let mut rows = HashSet::new();
    for c in model.constraints() {
        if !valid_name(&c.name) || !rows.insert(c.name.as_str()) {
            return Err(Error::Model(format!("constraint name '{}' is invalid or repeated", c.name)));
        }
    }

    let mut out = String::new();
    let _ = writeln!(out, "\\ {} variables, {} constraints", model.num_variables(), model.num_constraints());
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, model, model.objective());
    out.push_str("\nSubject To\n");
    for c in model.constraints() {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, model, &c.terms);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), number(c.rhs));
    }

    out.push_str("Bounds\n");
    for v in model.variables().iter().filter(|v| v.kind == VarKind::Continuous) {
        match v.upper {
            Some(u) => {
                let _ = writeln!(out, " {} <= {} <= {}", number(v.lower), v.name, number(u));
            }
            None => {
                let _ = writeln!(out, " {} >= {}", v.name, number(v.lower));
            }
        }
    }

    out.push_str("Binaries\n");
    let binaries: Vec<&str> =
        model.variables().iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    for chunk in binaries.chunks(TERMS_PER_LINE) {
        let _ = writeln!(out, " {}", chunk.join(" "));
    }
    out.push_str("End\n");
    Ok(out)
}
