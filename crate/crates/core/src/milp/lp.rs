use std::fmt::Write as _;

use super::{MilpModel, VarId, VarKind};

/// Soft limit on the length of one expression line in the LP file.
const LINE_WIDTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LpError {
    #[error("empty horizon: the model has no steps")]
    EmptyHorizon,
}

/// Formats `v` with 9 significant digits, like C's `%.9g`.
pub fn format_number(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    trim_fraction(&format!("{v:.decimals$}")).to_string()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_expression(out: &mut String, label: &str, terms: &[(VarId, f64)], model: &MilpModel) {
    let mut line = format!(" {label}:");
    let mut first = true;
    for &(v, c) in terms {
        let name = &model.variables[v.0].name;
        let term = match (first, c < 0.0) {
            (true, false) => format!(" {} {name}", format_number(c)),
            (true, true) => format!(" -{} {name}", format_number(-c)),
            (false, false) => format!(" + {} {name}", format_number(c)),
            (false, true) => format!(" - {} {name}", format_number(-c)),
        };
        if line.len() + term.len() > LINE_WIDTH {
            out.push_str(&line);
            out.push('\n');
            line = "   ".to_string();
        }
        line.push_str(&term);
        first = false;
    }
    if first {
        line.push_str(" 0");
    }
    out.push_str(&line);
}

/// Writes the model in LP text format (`Maximize`, `Subject To`, `Bounds`,
/// `Binary`, `End`). Variables and rows appear in construction order.
pub fn export_lp(model: &MilpModel) -> Result<String, LpError> {
    let meta = &model.metadata;
    if meta.steps == 0 {
        return Err(LpError::EmptyHorizon);
    }
    let mut out = String::new();
    let _ = writeln!(
        out,
        "\\ tidal lagoon ebb-generation schedule: {} steps, {} turbines, {}",
        meta.steps, meta.turbines, meta.objective
    );
    out.push_str("Maximize\n");
    write_expression(&mut out, "obj", &model.objective, model);
    out.push_str("\nSubject To\n");
    for row in &model.constraints {
        write_expression(&mut out, &row.name, &row.terms, model);
        let _ = writeln!(out, " {} {}", row.sense.symbol(), format_number(row.rhs));
    }
    out.push_str("Bounds\n");
    for v in model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Continuous)
    {
        let (lo, hi) = (v.lower, v.upper);
        let line = match (lo.is_finite(), hi.is_finite()) {
            (false, false) => format!(" {} free", v.name),
            (true, false) if lo == 0.0 => continue,
            (true, false) => format!(" {} >= {}", v.name, format_number(lo)),
            (false, true) => format!(" -inf <= {} <= {}", v.name, format_number(hi)),
            (true, true) => {
                format!(
                    " {} <= {} <= {}",
                    format_number(lo),
                    v.name,
                    format_number(hi)
                )
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("Binary\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Binary) {
        let _ = writeln!(out, " {}", v.name);
    }
    out.push_str("End\n");
    Ok(out)
}
