//! CPLEX LP text export, plus a reader for the subset the writer emits.
//!
//! The writer separates every token with whitespace, and the reader relies
//! on that.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write;

use thiserror::Error;

use super::{parse_flat, IndexKey, Instance, Row, Sense, VarType, Variable};

#[derive(Debug, Error, PartialEq)]
pub enum LpParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Replaces characters the LP format reserves.
pub fn sanitize_name(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn num(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn linear(out: &mut String, inst: &Instance, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        // LP rows need at least one term.
        if let Some(v) = inst.variables.first() {
            let _ = write!(out, " 0 {}", sanitize_name(&v.key));
        }
        return;
    }
    for (n, &(j, c)) in terms.iter().enumerate() {
        let name = sanitize_name(&inst.variables[j].key);
        let sign = if c < 0.0 { "-" } else { "+" };
        if n == 0 && c >= 0.0 {
            let _ = write!(out, " {} {name}", num(c.abs()));
        } else {
            let _ = write!(out, " {sign} {} {name}", num(c.abs()));
        }
    }
}

pub fn write_lp(inst: &Instance) -> String {
    let mut out = String::from("\\ reopt instance\nMinimize\n obj:");
    let obj: Vec<(usize, f64)> = inst
        .variables
        .iter()
        .enumerate()
        .filter(|(_, v)| v.obj != 0.0)
        .map(|(j, v)| (j, v.obj))
        .collect();
    linear(&mut out, inst, &obj);
    out.push_str("\nSubject To\n");
    for r in &inst.rows {
        let _ = write!(out, " {}:", sanitize_name(&r.key));
        linear(&mut out, inst, &r.coefs);
        let _ = writeln!(out, " {} {}", r.sense, num(r.rhs));
    }
    out.push_str("Bounds\n");
    for v in &inst.variables {
        let name = sanitize_name(&v.key);
        if v.var_type == VarType::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        match (v.lower.is_finite(), v.upper.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " {name} free");
            }
            _ if v.lower == v.upper => {
                let _ = writeln!(out, " {name} = {}", num(v.lower));
            }
            _ => {
                let _ = writeln!(out, " {} <= {name} <= {}", num(v.lower), num(v.upper));
            }
        }
    }
    for (section, ty) in [("Generals", VarType::Integer), ("Binaries", VarType::Binary)] {
        let names: Vec<String> = inst
            .variables
            .iter()
            .filter(|v| v.var_type == ty)
            .map(|v| sanitize_name(&v.key))
            .collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{section}\n {}", names.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[derive(PartialEq, Clone, Copy)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Generals,
    Binaries,
}

struct Reader {
    vars: Vec<Variable>,
    lookup: HashMap<String, usize>,
    bounds_seen: Vec<bool>,
}

impl Reader {
    fn var(&mut self, name: &str) -> usize {
        if let Some(&j) = self.lookup.get(name) {
            return j;
        }
        let (family, index) =
            parse_flat(name).unwrap_or_else(|| (name.to_string(), IndexKey::default()));
        self.vars.push(Variable {
            key: name.to_string(),
            family,
            index,
            var_type: VarType::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
            obj: 0.0,
        });
        self.bounds_seen.push(false);
        self.lookup.insert(name.to_string(), self.vars.len() - 1);
        self.vars.len() - 1
    }
}

fn parse_num(tok: &str, line: usize) -> Result<f64, LpParseError> {
    match tok.to_ascii_lowercase().as_str() {
        "+inf" | "inf" | "+infinity" | "infinity" => Ok(f64::INFINITY),
        "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
        _ => tok.parse().map_err(|_| LpParseError::Syntax {
            line,
            message: format!("expected a number, got `{tok}`"),
        }),
    }
}

fn is_num(tok: &str) -> bool {
    tok.parse::<f64>().is_ok() || matches!(tok, "+inf" | "-inf" | "inf")
}

fn sense_of(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Parses `sign? coef? name` sequences into terms.
fn parse_terms(
    reader: &mut Reader,
    toks: &[&str],
    line: usize,
) -> Result<Vec<(usize, f64)>, LpParseError> {
    let mut terms = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let mut sign = 1.0;
        if toks[i] == "+" || toks[i] == "-" {
            if toks[i] == "-" {
                sign = -1.0;
            }
            i += 1;
        }
        let mut coef = 1.0;
        if i < toks.len() && is_num(toks[i]) {
            coef = parse_num(toks[i], line)?;
            i += 1;
        }
        let name = toks.get(i).ok_or_else(|| LpParseError::Syntax {
            line,
            message: "dangling coefficient".into(),
        })?;
        terms.push((reader.var(name), sign * coef));
        i += 1;
    }
    Ok(terms)
}

pub fn parse_lp(text: &str) -> Result<Instance, LpParseError> {
    let mut reader = Reader {
        vars: Vec::new(),
        lookup: HashMap::new(),
        bounds_seen: Vec::new(),
    };
    let mut rows = Vec::new();
    let mut section = Section::None;
    // Statements may span lines; collect tokens until the next label or section.
    let mut pending: Vec<(usize, String)> = Vec::new();
    let mut statements: Vec<(Section, usize, Vec<String>)> = Vec::new();

    let flush = |section: Section,
                 pending: &mut Vec<(usize, String)>,
                 statements: &mut Vec<(Section, usize, Vec<String>)>| {
        if !pending.is_empty() {
            let line = pending[0].0;
            statements.push((section, line, pending.drain(..).map(|(_, t)| t).collect()));
        }
    };

    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('\\').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let lower = content.to_ascii_lowercase();
        let header = match lower.as_str() {
            "minimize" | "minimum" | "min" => Some(Section::Objective),
            "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
            "bounds" | "bound" => Some(Section::Bounds),
            "generals" | "general" | "gen" => Some(Section::Generals),
            "binaries" | "binary" | "bin" => Some(Section::Binaries),
            "end" => Some(Section::None),
            "maximize" | "maximum" | "max" => {
                return Err(LpParseError::Syntax {
                    line,
                    message: "only minimization is supported".into(),
                })
            }
            _ => None,
        };
        if let Some(h) = header {
            flush(section, &mut pending, &mut statements);
            section = h;
            continue;
        }
        for tok in content.split_whitespace() {
            let starts_statement = match section {
                Section::Constraints | Section::Objective => tok.ends_with(':'),
                Section::Bounds => {
                    // A bound line is one statement.
                    false
                }
                _ => false,
            };
            if starts_statement {
                flush(section, &mut pending, &mut statements);
            }
            pending.push((line, tok.to_string()));
        }
        if matches!(section, Section::Bounds | Section::Generals | Section::Binaries) {
            flush(section, &mut pending, &mut statements);
        }
    }
    flush(section, &mut pending, &mut statements);

    for (section, line, toks) in statements {
        let toks: Vec<&str> = toks.iter().map(String::as_str).collect();
        match section {
            Section::Objective => {
                let body = match toks.first() {
                    Some(t) if t.ends_with(':') => &toks[1..],
                    _ => &toks[..],
                };
                for (j, c) in parse_terms(&mut reader, body, line)? {
                    reader.vars[j].obj += c;
                }
            }
            Section::Constraints => {
                let (name, body) = match toks.first() {
                    Some(t) if t.ends_with(':') => (t.trim_end_matches(':').to_string(), &toks[1..]),
                    _ => (format!("R{}", rows.len() + 1), &toks[..]),
                };
                let pos = body.iter().position(|t| sense_of(t).is_some()).ok_or_else(|| {
                    LpParseError::Syntax {
                        line,
                        message: format!("row `{name}` has no sense"),
                    }
                })?;
                let rhs_tok = body.get(pos + 1).ok_or_else(|| LpParseError::Syntax {
                    line,
                    message: format!("row `{name}` has no right-hand side"),
                })?;
                let terms = parse_terms(&mut reader, &body[..pos], line)?;
                let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
                for (j, c) in terms {
                    *merged.entry(j).or_insert(0.0) += c;
                }
                let (family, index) =
                    parse_flat(&name).unwrap_or_else(|| (name.clone(), IndexKey::default()));
                rows.push(Row {
                    key: name,
                    family,
                    index,
                    coefs: merged.into_iter().filter(|&(_, c)| c != 0.0).collect(),
                    sense: sense_of(body[pos]).expect("checked above"),
                    rhs: parse_num(rhs_tok, line)?,
                });
            }
            Section::Bounds => match toks.as_slice() {
                [name, "free"] => {
                    let j = reader.var(name);
                    reader.vars[j].lower = f64::NEG_INFINITY;
                    reader.vars[j].upper = f64::INFINITY;
                }
                [lo, "<=", name, "<=", hi] => {
                    let j = reader.var(name);
                    reader.vars[j].lower = parse_num(lo, line)?;
                    reader.vars[j].upper = parse_num(hi, line)?;
                    reader.bounds_seen[j] = true;
                }
                [name, "=", v] => {
                    let j = reader.var(name);
                    let v = parse_num(v, line)?;
                    reader.vars[j].lower = v;
                    reader.vars[j].upper = v;
                    reader.bounds_seen[j] = true;
                }
                [name, op, v] if sense_of(op).is_some() => {
                    let j = reader.var(name);
                    let v = parse_num(v, line)?;
                    match sense_of(op) {
                        Some(Sense::Le) => reader.vars[j].upper = v,
                        _ => reader.vars[j].lower = v,
                    }
                    reader.bounds_seen[j] = true;
                }
                other => {
                    return Err(LpParseError::Syntax {
                        line,
                        message: format!("unrecognized bound `{}`", other.join(" ")),
                    })
                }
            },
            Section::Generals => {
                for name in toks {
                    let j = reader.var(name);
                    reader.vars[j].var_type = VarType::Integer;
                }
            }
            Section::Binaries => {
                for name in toks {
                    let j = reader.var(name);
                    reader.vars[j].var_type = VarType::Binary;
                    if !reader.bounds_seen[j] {
                        reader.vars[j].lower = 0.0;
                        reader.vars[j].upper = 1.0;
                    }
                }
            }
            Section::None => {
                return Err(LpParseError::Syntax {
                    line,
                    message: "content outside any section".into(),
                })
            }
        }
    }
    Ok(Instance::new(reader.vars, rows))
}
