//! Event grammar for joint-probability queries: comma-separated atoms of
//! the form `d<index><op><number>` or `<response-name><op><number>` with
//! ops `<` and `>`; indices are 1-based response positions.

use jointcast_core::pipeline::{EventAtom, Ineq};

use crate::{CliError, CliResult};

pub fn parse_event(text: &str, response_names: &[String]) -> CliResult<Vec<EventAtom<f64>>> {
    let mut atoms = Vec::new();
    let mut offset = 0usize;
    for part in text.split(',') {
        if !part.trim().is_empty() {
            atoms.push(parse_atom(part, offset, response_names)?);
        }
        offset += part.len() + 1;
    }
    Ok(atoms)
}

fn parse_atom(part: &str, offset: usize, response_names: &[String]) -> CliResult<EventAtom<f64>> {
    let op_pos = part
        .find(['<', '>'])
        .ok_or_else(|| CliError::usage(format!(
            "event atom `{part}` at position {offset}: missing `<` or `>`"
        )))?;
    let op = if part.as_bytes()[op_pos] == b'<' { Ineq::Lt } else { Ineq::Gt };
    let name = part[..op_pos].trim();
    let number = part[op_pos + 1..].trim();

    let dim = resolve_dim(name, response_names).ok_or_else(|| {
        CliError::usage(format!(
            "event atom at position {offset}: `{name}` is neither d<index> (1..={}) nor a response column",
            response_names.len()
        ))
    })?;
    let threshold: f64 = number.parse().map_err(|_| {
        CliError::usage(format!(
            "event atom at position {}: `{number}` is not a number",
            offset + op_pos + 1
        ))
    })?;
    Ok(EventAtom { dim, op, threshold })
}

fn resolve_dim(name: &str, response_names: &[String]) -> Option<usize> {
    if let Some(pos) = response_names.iter().position(|n| n == name) {
        return Some(pos);
    }
    let idx: usize = name.strip_prefix('d')?.parse().ok()?;
    (1..=response_names.len()).contains(&idx).then(|| idx - 1)
}
