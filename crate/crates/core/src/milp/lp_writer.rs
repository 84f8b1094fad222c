//! CPLEX LP text emission for cross-checking models against external
//! solvers.

use super::model::{ConstraintSense, Model, VarId};
use std::fmt::Write;

fn format_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Renders `coeff * name` terms as ` + 2.5 x` / ` - 3 z`, without the
/// leading ` + ` on the first term.
fn append_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) -> bool {
    let mut any = false;
    for (coeff, name) in terms {
        if coeff == 0.0 {
            continue;
        }
        if !any && coeff >= 0.0 {
            let _ = write!(out, " {} {}", format_num(coeff), name);
        } else if coeff >= 0.0 {
            let _ = write!(out, " + {} {}", format_num(coeff), name);
        } else {
            let _ = write!(out, " - {} {}", format_num(-coeff), name);
        }
        any = true;
    }
    any
}

/// Serializes a model in CPLEX LP format. Diagonal quadratic objective
/// terms use the bracketed `[ 2 q x ^ 2 ] / 2` convention.
pub fn write_lp(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n obj:");

    let mut any = append_terms(
        &mut out,
        model
            .obj_linear()
            .iter()
            .enumerate()
            .map(|(j, &c)| (c, model.variables()[j].name.clone())),
    );
    if model.has_quadratic() {
        out.push_str(if any { " + [" } else { " [" });
        let mut qfirst = true;
        for (j, &q) in model.obj_quadratic().iter().enumerate() {
            if q != 0.0 {
                if !qfirst {
                    out.push_str(" +");
                }
                let _ = write!(
                    out,
                    " {} {} ^ 2",
                    format_num(2.0 * q),
                    model.variables()[j].name
                );
                qfirst = false;
            }
        }
        out.push_str(" ] / 2");
        any = true;
    }
    let constant = model.obj_constant();
    if constant != 0.0 {
        if !any {
            let _ = write!(out, " {}", format_num(constant));
        } else if constant < 0.0 {
            let _ = write!(out, " - {}", format_num(-constant));
        } else {
            let _ = write!(out, " + {}", format_num(constant));
        }
        any = true;
    }
    if !any {
        out.push_str(" 0");
    }
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, c) in model.constraints().iter().enumerate() {
        let label = if c.name.is_empty() {
            format!("c{i}")
        } else {
            c.name.clone()
        };
        let _ = write!(out, " {label}:");
        let any = append_terms(
            &mut out,
            c.terms
                .iter()
                .map(|&(VarId(j), a)| (a, model.variables()[j].name.clone())),
        );
        if !any {
            out.push_str(" 0");
        }
        let op = match c.sense {
            ConstraintSense::Le => "<=",
            ConstraintSense::Ge => ">=",
            ConstraintSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", format_num(c.rhs));
    }

    out.push_str("Bounds\n");
    for v in model.variables() {
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (true, true) => {
                let _ = writeln!(
                    out,
                    " {} <= {} <= {}",
                    format_num(v.lower),
                    v.name,
                    format_num(v.upper)
                );
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, format_num(v.lower));
            }
            (false, true) => {
                let _ = writeln!(out, " -inf <= {} <= {}", v.name, format_num(v.upper));
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
        }
    }

    let binaries: Vec<&str> = model
        .variables()
        .iter()
        .filter(|v| v.integer)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for name in binaries {
            let _ = writeln!(out, " {name}");
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::model::Model;

    #[test]
    fn small_model_layout() {
        let mut m = Model::new("demo");
        let x = m.add_var("x", 0.0, 10.0);
        let z = m.add_binary("z");
        m.add_obj(x, 2.5);
        m.add_obj(z, -1.0);
        m.add_constraint("cap", vec![(x, 1.0), (z, -3.0)], ConstraintSense::Le, 4.0);
        let text = write_lp(&m);
        assert!(text.starts_with("\\ demo\nMinimize\n obj: 2.5 x - 1 z\n"));
        assert!(text.contains(" cap: 1 x - 3 z <= 4"));
        assert!(text.contains(" 0 <= x <= 10"));
        assert!(text.contains("Binaries\n z"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn quadratic_terms_bracketed() {
        let mut m = Model::new("q");
        let x = m.add_var("x", 0.0, 1.0);
        m.add_obj_quadratic(x, 0.5);
        m.add_obj_constant(2.0);
        let text = write_lp(&m);
        assert!(text.contains("[ 1 x ^ 2 ] / 2 + 2"));
    }
}
