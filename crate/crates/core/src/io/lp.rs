use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{read_text, write_text, IoError};
use crate::instance::{IlpInstance, LinearRow};

const TERMS_PER_LINE: usize = 8;

fn push_terms(out: &mut String, terms: impl Iterator<Item = String>) {
    for (k, t) in terms.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        out.push(' ');
        out.push_str(&t);
    }
}

/// LP text of an instance whose constraints all carry linear rows.
pub fn render_lp(instance: &IlpInstance) -> Result<String, IoError> {
    if instance.num_constraints() == 0 {
        return Err(IoError::Unsupported("refusing to write an instance without constraints".into()));
    }
    let rows = instance
        .rows()
        .ok_or_else(|| IoError::Unsupported("instance has constraints without a linear form".into()))?;
    let mut s = String::from("\\ 0-1 equality program\nMinimize\n obj:");
    push_terms(
        &mut s,
        instance.costs().iter().enumerate().map(|(i, c)| {
            let sign = if c.is_sign_negative() { '-' } else { '+' };
            format!("{sign} {:.16e} x{i}", c.abs())
        }),
    );
    s.push_str("\nSubject To\n");
    for (j, row) in rows.iter().enumerate() {
        let _ = write!(s, " c{j}:");
        push_terms(
            &mut s,
            row.terms.iter().map(|&(v, a)| match a {
                1 => format!("+ x{v}"),
                -1 => format!("- x{v}"),
                a if a < 0 => format!("- {} x{v}", -a),
                a => format!("+ {a} x{v}"),
            }),
        );
        let _ = writeln!(s, " = {}", row.rhs);
    }
    s.push_str("Binary\n");
    let names: Vec<String> = (0..instance.num_vars()).map(|i| format!("x{i}")).collect();
    for chunk in names.chunks(TERMS_PER_LINE * 2) {
        let _ = writeln!(s, " {}", chunk.join(" "));
    }
    s.push_str("End\n");
    Ok(s)
}

pub fn write_lp(instance: &IlpInstance, path: &Path) -> Result<(), IoError> {
    write_text(path, &render_lp(instance)?)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Sign(f64),
    Num(f64),
    Ident(String),
    Colon,
    Eq,
    Ineq,
}

fn lex(path: &Path, line: usize, s: &str, out: &mut Vec<(usize, Tok)>) -> Result<(), IoError> {
    let b = s.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        match c {
            _ if c.is_whitespace() => i += 1,
            '+' => {
                out.push((line, Tok::Sign(1.0)));
                i += 1;
            }
            '-' => {
                out.push((line, Tok::Sign(-1.0)));
                i += 1;
            }
            ':' => {
                out.push((line, Tok::Colon));
                i += 1;
            }
            '<' | '>' => {
                out.push((line, Tok::Ineq));
                i += if b.get(i + 1) == Some(&b'=') { 2 } else { 1 };
            }
            '=' => {
                if matches!(b.get(i + 1), Some(b'<') | Some(b'>')) {
                    out.push((line, Tok::Ineq));
                    i += 2;
                } else {
                    out.push((line, Tok::Eq));
                    i += 1;
                }
            }
            _ if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'.') {
                    i += 1;
                }
                if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                    i += 1;
                    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
                        i += 1;
                    }
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                let t = &s[start..i];
                let v = t
                    .parse::<f64>()
                    .map_err(|_| IoError::parse(path, line, format!("invalid number '{t}'")))?;
                out.push((line, Tok::Num(v)));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < b.len() && (b[i].is_ascii_alphanumeric() || b"_.[]".contains(&b[i])) {
                    i += 1;
                }
                out.push((line, Tok::Ident(s[start..i].to_string())));
            }
            _ => return Err(IoError::parse(path, line, format!("unexpected character '{c}'"))),
        }
    }
    Ok(())
}

fn var_index(path: &Path, line: usize, name: &str) -> Result<usize, IoError> {
    name.strip_prefix('x')
        .and_then(|d| d.parse::<usize>().ok())
        .ok_or_else(|| IoError::parse(path, line, format!("variable '{name}' is not of the form x<index>")))
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Binary,
    End,
}

fn section_of(line: &str) -> Option<Section> {
    match line.to_ascii_lowercase().as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

/// Parses `[sign] [coef] var` terms until a relational token or the end.
fn parse_terms(
    path: &Path,
    toks: &[(usize, Tok)],
    pos: &mut usize,
) -> Result<Vec<(usize, f64)>, IoError> {
    let mut terms = Vec::new();
    while *pos < toks.len() {
        let (line, _) = toks[*pos];
        let mut sign = 1.0;
        let mut any = false;
        while let Some((_, Tok::Sign(s))) = toks.get(*pos) {
            sign *= s;
            *pos += 1;
            any = true;
        }
        let mut coef = 1.0;
        if let Some((_, Tok::Num(v))) = toks.get(*pos) {
            coef = *v;
            *pos += 1;
            any = true;
        }
        match toks.get(*pos) {
            Some((l, Tok::Ident(name))) => {
                terms.push((var_index(path, *l, name)?, sign * coef));
                *pos += 1;
            }
            Some((_, Tok::Eq | Tok::Ineq)) | None if !any => break,
            _ => return Err(IoError::parse(path, line, "expected a variable")),
        }
    }
    Ok(terms)
}

pub fn parse_lp(path: &Path, text: &str) -> Result<IlpInstance, IoError> {
    let mut section = Section::None;
    let mut objective = Vec::new();
    let mut constraints = Vec::new();
    let mut binaries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(s) = section_of(line) {
            if section == Section::End {
                return Err(IoError::parse(path, i + 1, "content after End"));
            }
            section = s;
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if ["maximize", "maximise", "max", "bounds", "general", "generals", "semi-continuous"].contains(&lower.as_str()) {
            return Err(IoError::parse(path, i + 1, format!("unsupported section '{line}'")));
        }
        let target = match section {
            Section::Objective => &mut objective,
            Section::Constraints => &mut constraints,
            Section::Binary => &mut binaries,
            Section::None => return Err(IoError::parse(path, i + 1, "expected 'Minimize'")),
            Section::End => return Err(IoError::parse(path, i + 1, "content after End")),
        };
        lex(path, i + 1, line, target)?;
    }

    let mut num_vars = 0;
    let mut pos = 0;
    if let (Some((_, Tok::Ident(_))), Some((_, Tok::Colon))) = (objective.first(), objective.get(1)) {
        pos = 2;
    }
    let mut costs: BTreeMap<usize, f64> = BTreeMap::new();
    for (v, c) in parse_terms(path, &objective, &mut pos)? {
        *costs.entry(v).or_default() += c;
        num_vars = num_vars.max(v + 1);
    }
    if let Some((l, _)) = objective.get(pos) {
        return Err(IoError::parse(path, *l, "unexpected token in objective"));
    }

    let mut rows = Vec::new();
    let mut pos = 0;
    while pos < constraints.len() {
        let line = constraints[pos].0;
        if let (Some((_, Tok::Ident(_))), Some((_, Tok::Colon))) = (constraints.get(pos), constraints.get(pos + 1)) {
            pos += 2;
        }
        let terms = parse_terms(path, &constraints, &mut pos)?;
        match constraints.get(pos) {
            Some((_, Tok::Eq)) => pos += 1,
            Some((l, Tok::Ineq)) => return Err(IoError::parse(path, *l, "only equality rows are supported")),
            _ => return Err(IoError::parse(path, line, "expected '='")),
        }
        let mut sign = 1.0;
        while let Some((_, Tok::Sign(s))) = constraints.get(pos) {
            sign *= s;
            pos += 1;
        }
        let rhs = match constraints.get(pos) {
            Some((_, Tok::Num(v))) => sign * v,
            _ => return Err(IoError::parse(path, line, "expected a right-hand side")),
        };
        pos += 1;
        let integral = |v: f64| -> Result<i64, IoError> {
            if v.fract() == 0.0 && v.abs() < 9.0e15 {
                Ok(v as i64)
            } else {
                Err(IoError::parse(path, line, format!("non-integer value {v} in a row")))
            }
        };
        let mut merged: BTreeMap<usize, i64> = BTreeMap::new();
        for (v, a) in terms {
            *merged.entry(v).or_default() += integral(a)?;
            num_vars = num_vars.max(v + 1);
        }
        merged.retain(|_, a| *a != 0);
        rows.push(LinearRow::new(merged.into_iter().collect(), integral(rhs)?));
    }

    for (l, t) in &binaries {
        match t {
            Tok::Ident(name) => num_vars = num_vars.max(var_index(path, *l, name)? + 1),
            _ => return Err(IoError::parse(path, *l, "expected variable names")),
        }
    }
    let mut cost_vec = vec![0.0; num_vars];
    for (v, c) in costs {
        cost_vec[v] = c;
    }
    IlpInstance::from_rows(cost_vec, rows).map_err(|e| IoError::format(path, e.to_string()))
}

pub fn read_lp(path: &Path) -> Result<IlpInstance, IoError> {
    parse_lp(path, &read_text(path)?)
}
