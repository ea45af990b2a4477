//! Deterministic writer and parser for a CPLEX-LP format subset:
//! `Minimize` / `Subject To` / `Bounds` / `Generals` / `Binary` / `End`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::milp::{MilpModel, Rel};

/// Coefficients are printed with 12 significant digits; integral values are
/// printed as plain integers.
fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e12 {
        format!("{}", v as i64)
    } else {
        format!("{:.11e}", v)
    }
}

fn push_terms(out: &mut String, terms: &[(usize, f64)], model: &MilpModel) {
    let mut first = true;
    for &(v, c) in terms {
        if c == 0.0 {
            continue;
        }
        let name = &model.var(v).name;
        if first {
            if c < 0.0 {
                let _ = write!(out, "- {} {}", fmt_num(-c), name);
            } else {
                let _ = write!(out, "{} {}", fmt_num(c), name);
            }
            first = false;
        } else if c < 0.0 {
            let _ = write!(out, " - {} {}", fmt_num(-c), name);
        } else {
            let _ = write!(out, " + {} {}", fmt_num(c), name);
        }
    }
    if first {
        out.push('0');
    }
}

/// Writes the model including integrality sections.
pub fn write_lp_file(model: &MilpModel) -> String {
    write_lp(model, false)
}

/// Writes the model; `relax` drops the integrality sections.
pub(crate) fn write_lp(model: &MilpModel, relax: bool) -> String {
    let mut out = String::new();
    out.push_str("Minimize\n obj: ");
    let obj_terms: Vec<(usize, f64)> =
        model.vars().iter().enumerate().map(|(i, v)| (i, v.obj)).collect();
    push_terms(&mut out, &obj_terms, model);
    out.push('\n');

    out.push_str("Subject To\n");
    for (i, row) in model.rows().iter().enumerate() {
        let _ = write!(out, " c{i}: ");
        push_terms(&mut out, &row.terms, model);
        let rel = match row.rel {
            Rel::Le => "<=",
            Rel::Eq => "=",
            Rel::Ge => ">=",
        };
        let _ = writeln!(out, " {rel} {}", fmt_num(row.rhs));
    }

    out.push_str("Bounds\n");
    for v in model.vars() {
        match (v.lo.is_finite(), v.hi.is_finite()) {
            (true, true) if v.lo == v.hi => {
                let _ = writeln!(out, " {} = {}", v.name, fmt_num(v.lo));
            }
            (true, true) => {
                let _ = writeln!(out, " {} <= {} <= {}", fmt_num(v.lo), v.name, fmt_num(v.hi));
            }
            (true, false) => {
                let _ = writeln!(out, " {} >= {}", v.name, fmt_num(v.lo));
            }
            (false, true) => {
                let _ = writeln!(out, " {} <= {}", v.name, fmt_num(v.hi));
            }
            (false, false) => {
                let _ = writeln!(out, " {} free", v.name);
            }
        }
    }

    if !relax {
        let generals: Vec<&str> = model
            .vars()
            .iter()
            .filter(|v| v.integer && !(v.lo == 0.0 && v.hi == 1.0))
            .map(|v| v.name.as_str())
            .collect();
        if !generals.is_empty() {
            out.push_str("Generals\n");
            for name in generals {
                let _ = writeln!(out, " {name}");
            }
        }
        let binaries: Vec<&str> = model
            .vars()
            .iter()
            .filter(|v| v.integer && v.lo == 0.0 && v.hi == 1.0)
            .map(|v| v.name.as_str())
            .collect();
        if !binaries.is_empty() {
            out.push_str("Binary\n");
            for name in binaries {
                let _ = writeln!(out, " {name}");
            }
        }
    }
    out.push_str("End\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binary,
    Done,
}

/// Parses the subset emitted by [`write_lp_file`]. Variables keep their
/// first-seen order; unlisted bounds default to `[0, +inf)`.
pub fn parse_lp_file(text: &str) -> Result<MilpModel> {
    let mut vars: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    let mut obj: BTreeMap<usize, f64> = BTreeMap::new();
    let mut rows: Vec<(Vec<(usize, f64)>, Rel, f64)> = Vec::new();
    let mut bounds: BTreeMap<usize, (f64, f64)> = BTreeMap::new();
    let mut integer: Vec<usize> = Vec::new();
    let mut binary: Vec<usize> = Vec::new();

    let mut intern = |name: &str, vars: &mut Vec<String>, index: &mut BTreeMap<String, usize>| {
        if let Some(&i) = index.get(name) {
            i
        } else {
            let i = vars.len();
            vars.push(name.to_string());
            index.insert(name.to_string(), i);
            i
        }
    };

    let mut section = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        let new_section = match lower.as_str() {
            "minimize" | "min" => Some(Section::Objective),
            "subject to" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "generals" | "general" => Some(Section::Generals),
            "binary" | "binaries" => Some(Section::Binary),
            "end" => Some(Section::Done),
            _ => None,
        };
        if let Some(s) = new_section {
            section = Some(s);
            continue;
        }
        let err = |msg: &str| Error::Parse { line: lineno + 1, msg: msg.to_string() };
        match section {
            Some(Section::Objective) => {
                let body = line.split_once(':').map(|(_, b)| b).unwrap_or(line);
                for (v, c) in parse_terms(body, lineno + 1, &mut |n| intern(n, &mut vars, &mut index))? {
                    *obj.entry(v).or_insert(0.0) += c;
                }
            }
            Some(Section::Constraints) => {
                let body = line.split_once(':').map(|(_, b)| b).unwrap_or(line);
                let (lhs, rel, rhs) = split_relation(body).ok_or_else(|| err("missing relation"))?;
                let terms = parse_terms(lhs, lineno + 1, &mut |n| intern(n, &mut vars, &mut index))?;
                let rhs: f64 = rhs.trim().parse().map_err(|_| err("invalid right-hand side"))?;
                rows.push((terms, rel, rhs));
            }
            Some(Section::Bounds) => {
                parse_bound_line(line, lineno + 1, &mut |n| intern(n, &mut vars, &mut index), &mut bounds)?;
            }
            Some(Section::Generals) => {
                for tok in line.split_whitespace() {
                    integer.push(intern(tok, &mut vars, &mut index));
                }
            }
            Some(Section::Binary) => {
                for tok in line.split_whitespace() {
                    binary.push(intern(tok, &mut vars, &mut index));
                }
            }
            Some(Section::Done) => return Err(err("content after End")),
            None => return Err(err("content before a section header")),
        }
    }

    let mut model = MilpModel::new();
    for (i, name) in vars.iter().enumerate() {
        let (mut lo, mut hi) = bounds.get(&i).copied().unwrap_or((0.0, f64::INFINITY));
        let is_int = integer.contains(&i) || binary.contains(&i);
        if binary.contains(&i) && !bounds.contains_key(&i) {
            (lo, hi) = (0.0, 1.0);
        }
        model.add_var(name.clone(), lo, hi, is_int, obj.get(&i).copied().unwrap_or(0.0))?;
    }
    for (terms, rel, rhs) in rows {
        model.add_row(terms, rel, rhs)?;
    }
    Ok(model)
}

fn split_relation(body: &str) -> Option<(&str, Rel, &str)> {
    for (pat, rel) in [("<=", Rel::Le), (">=", Rel::Ge), ("=", Rel::Eq)] {
        if let Some(pos) = body.find(pat) {
            return Some((&body[..pos], rel, &body[pos + pat.len()..]));
        }
    }
    None
}

fn parse_terms(
    body: &str,
    line: usize,
    intern: &mut dyn FnMut(&str) -> usize,
) -> Result<Vec<(usize, f64)>> {
    let mut out: Vec<(usize, f64)> = Vec::new();
    let mut sign = 1.0f64;
    let mut coef: Option<f64> = None;
    for tok in body.split_whitespace() {
        match tok {
            "+" => {}
            "-" => sign = -sign,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    if coef.is_some() {
                        return Err(Error::Parse { line, msg: "two numbers in a row".into() });
                    }
                    coef = Some(v);
                } else {
                    let id = intern(tok);
                    out.push((id, sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if let Some(c) = coef {
        if c != 0.0 {
            return Err(Error::Parse { line, msg: "dangling coefficient".into() });
        }
    }
    Ok(out)
}

fn parse_bound_line(
    line: &str,
    lineno: usize,
    intern: &mut dyn FnMut(&str) -> usize,
    bounds: &mut BTreeMap<usize, (f64, f64)>,
) -> Result<()> {
    let err = |msg: &str| Error::Parse { line: lineno, msg: msg.to_string() };
    let toks: Vec<&str> = line.split_whitespace().collect();
    let parse_num = |s: &str| -> Result<f64> {
        match s.to_ascii_lowercase().as_str() {
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            "+inf" | "inf" | "+infinity" | "infinity" => Ok(f64::INFINITY),
            _ => s.parse().map_err(|_| err(&format!("invalid bound `{s}`"))),
        }
    };
    match toks.as_slice() {
        [name, "free"] => {
            let id = intern(name);
            bounds.insert(id, (f64::NEG_INFINITY, f64::INFINITY));
        }
        [lo, "<=", name, "<=", hi] => {
            let id = intern(name);
            bounds.insert(id, (parse_num(lo)?, parse_num(hi)?));
        }
        [name, ">=", lo] => {
            let id = intern(name);
            bounds.insert(id, (parse_num(lo)?, f64::INFINITY));
        }
        [name, "<=", hi] => {
            let id = intern(name);
            bounds.insert(id, (f64::NEG_INFINITY, parse_num(hi)?));
        }
        [name, "=", v] => {
            let id = intern(name);
            let v = parse_num(v)?;
            bounds.insert(id, (v, v));
        }
        _ => return Err(err("unrecognized bound line")),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model() -> MilpModel {
        let mut m = MilpModel::new();
        let x = m.add_var("x", 0.0, 4.0, false, 1.5).unwrap();
        let y = m.add_var("y", 0.0, f64::INFINITY, true, -2.0).unwrap();
        let b = m.add_binary("b", 0.25).unwrap();
        m.add_row(vec![(x, 1.0), (y, -3.0)], Rel::Le, 7.0).unwrap();
        m.add_row(vec![(y, 2.0), (b, 1.0)], Rel::Ge, 1.0).unwrap();
        m.add_row(vec![(x, 1.0), (b, -1.0)], Rel::Eq, 0.5).unwrap();
        m
    }

    #[test]
    fn objective_only_model_is_valid() {
        let mut m = MilpModel::new();
        m.add_var("x", 0.0, 1.0, false, 2.0).unwrap();
        let text = write_lp_file(&m);
        assert!(text.starts_with("Minimize\n obj: 2 x\n"));
        assert!(text.contains("Subject To"));
        assert!(text.ends_with("End\n"));
        let parsed = parse_lp_file(&text).unwrap();
        assert_eq!(parsed.n_vars(), 1);
        assert_eq!(parsed.n_rows(), 0);
    }

    #[test]
    fn binary_section_emitted() {
        let mut m = MilpModel::new();
        m.add_binary("z", 1.0).unwrap();
        let text = write_lp_file(&m);
        assert!(text.contains("Binary\n z\n"));
    }

    #[test]
    fn write_is_deterministic() {
        let a = write_lp_file(&sample_model());
        let b = write_lp_file(&sample_model());
        assert_eq!(a, b);
    }

    #[test]
    fn self_parse_roundtrip() {
        let m = sample_model();
        let text = write_lp_file(&m);
        let parsed = parse_lp_file(&text).unwrap();
        // second generation must be byte-identical
        assert_eq!(write_lp_file(&parsed), text);
        // and the structure must match exactly
        assert_eq!(parsed.n_vars(), m.n_vars());
        assert_eq!(parsed.n_rows(), m.n_rows());
        for (a, b) in parsed.vars().iter().zip(m.vars()) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.lo, b.lo);
            assert_eq!(a.hi, b.hi);
            assert_eq!(a.integer, b.integer);
            assert_eq!(a.obj, b.obj);
        }
        for (a, b) in parsed.rows().iter().zip(m.rows()) {
            assert_eq!(a.terms, b.terms);
            assert_eq!(a.rhs, b.rhs);
        }
    }

    #[test]
    fn relaxed_write_drops_integrality() {
        let text = write_lp(&sample_model(), true);
        assert!(!text.contains("Binary"));
        assert!(!text.contains("Generals"));
    }
}
