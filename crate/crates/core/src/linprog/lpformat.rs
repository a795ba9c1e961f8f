use std::fmt::Write;

use super::{LpProblem, RowKind, Sense};

fn term(out: &mut String, first: bool, a: f64, name: &str) {
    if first {
        if a < 0.0 {
            let _ = write!(out, "- {} {}", -a, name);
        } else {
            let _ = write!(out, "{} {}", a, name);
        }
    } else if a < 0.0 {
        let _ = write!(out, " - {} {}", -a, name);
    } else {
        let _ = write!(out, " + {} {}", a, name);
    }
}

pub(super) fn write(p: &LpProblem) -> String {
    let mut out = String::new();
    out.push_str(match p.sense {
        Sense::Minimize => "Minimize\n",
        Sense::Maximize => "Maximize\n",
    });
    out.push_str(" obj: ");
    let mut first = true;
    for (j, &c) in p.objective().iter().enumerate() {
        if c != 0.0 {
            term(&mut out, first, c, p.name(j));
            first = false;
        }
    }
    if first {
        out.push('0');
    }
    out.push_str("\nSubject To\n");
    for r in p.rows() {
        let _ = write!(out, " {}: ", r.label);
        for (k, &(j, a)) in r.coeffs.iter().enumerate() {
            term(&mut out, k == 0, a, p.name(j));
        }
        if r.coeffs.is_empty() {
            out.push_str("0 dummy");
        }
        let op = match r.kind {
            RowKind::Le => "<=",
            RowKind::Ge => ">=",
            RowKind::Eq => "=",
        };
        let _ = writeln!(out, " {} {}", op, r.rhs);
    }
    out.push_str("Bounds\n");
    for j in 0..p.num_vars() {
        if p.is_binary(j) {
            continue;
        }
        let (lo, hi) = (p.lower()[j], p.upper()[j]);
        let name = p.name(j);
        match (lo.is_finite(), hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            (true, false) => {
                let _ = writeln!(out, " {name} >= {lo}");
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {name} <= {hi}");
            }
            (true, true) => {
                let _ = writeln!(out, " {lo} <= {name} <= {hi}");
            }
        }
    }
    let bins = p.binaries();
    if !bins.is_empty() {
        out.push_str("Binary\n");
        for j in bins {
            let _ = writeln!(out, " {}", p.name(j));
        }
    }
    out.push_str("End\n");
    out
}
