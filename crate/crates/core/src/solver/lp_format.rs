//! Export to the CPLEX LP text format (the subset external solvers agree on).

use std::fmt::Write;

use super::program::{ConstraintProgram, ObjectiveSense, VarKind};

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.[]".contains(c) { c } else { '_' })
        .collect();
    match s.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => s,
        _ => format!("v_{s}"),
    }
}

fn write_terms(out: &mut String, terms: &[(usize, f64)], names: &[String]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(&names.first().cloned().unwrap_or_else(|| "dummy".into()));
        return;
    }
    for (i, &(v, a)) in terms.iter().enumerate() {
        let sign = if a < 0.0 { " -" } else if i == 0 { "" } else { " +" };
        let _ = write!(out, "{sign} {} {}", a.abs(), names[v]);
    }
}

/// Renders `prog` as an LP file. Exactly-one groups become SOS1 sets.
///
/// Variable names are sanitized and, when two collide, suffixed with their
/// index, so the output always parses.
pub fn to_lp_format(prog: &ConstraintProgram) -> String {
    let mut names: Vec<String> = prog.variables.iter().map(|v| sanitize(&v.name)).collect();
    let mut seen = std::collections::HashSet::new();
    for (i, n) in names.iter_mut().enumerate() {
        if !seen.insert(n.clone()) {
            *n = format!("{n}_{i}");
            seen.insert(n.clone());
        }
    }
    let mut out = String::new();
    out.push_str(match prog.objective.sense {
        ObjectiveSense::Maximize => "Maximize\n",
        ObjectiveSense::Minimize => "Minimize\n",
    });
    out.push_str(" obj:");
    write_terms(&mut out, &prog.objective.terms, &names);
    if prog.objective.constant != 0.0 {
        let _ = write!(out, " + {}", prog.objective.constant);
    }
    out.push_str("\nSubject To\n");
    for (i, c) in prog.constraints.iter().enumerate() {
        let _ = write!(out, " c{i}_{}:", sanitize(&c.name));
        write_terms(&mut out, &c.terms, &names);
        let _ = writeln!(out, " {} {}", c.sense.symbol(), c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, var) in prog.variables.iter().enumerate() {
        if var.kind == VarKind::Continuous {
            match var.upper {
                Some(u) => {
                    let _ = writeln!(out, " 0 <= {} <= {u}", names[v]);
                }
                None => {
                    let _ = writeln!(out, " {} >= 0", names[v]);
                }
            }
        }
    }
    let bins: Vec<&String> = prog
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.kind == VarKind::Binary)
        .map(|(i, _)| &names[i])
        .collect();
    if !bins.is_empty() {
        out.push_str("Binaries\n");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    if !prog.exactly_one_groups.is_empty() {
        out.push_str("SOS\n");
        for (g, members) in prog.exactly_one_groups.iter().enumerate() {
            let _ = write!(out, " s{g}: S1::");
            for (k, &v) in members.iter().enumerate() {
                let _ = write!(out, " {}:{}", names[v], k + 1);
            }
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}
