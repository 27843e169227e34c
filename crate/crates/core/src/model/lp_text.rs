//! CPLEX-style LP text export and import.
//!
//! The writer lists every column in the objective (including zero
//! coefficients) so that a re-parse reconstructs the exact column order, and
//! emits explicit bounds wherever they differ from the default `[0, +inf)`.
//! Row names carry the constraint-family tag, which the parser restores.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ColKind, Column, ProblemInstance, Provenance, Row, Sense};

/// Renders the instance as LP-format text. Re-parsing reproduces row count,
/// column count, nonzero count, bounds and integrality exactly.
pub fn export_lp_text(pi: &ProblemInstance) -> String {
    let mut out = String::new();
    out.push_str("\\ voltflow problem instance\n");
    out.push_str("Minimize\n obj:");
    let mut on_line = 0;
    for col in &pi.columns {
        if on_line == 8 {
            out.push_str("\n   ");
            on_line = 0;
        }
        let _ = write!(
            out,
            " {} {} {}",
            if col.objective < 0.0 { "-" } else { "+" },
            fmt_num(col.objective.abs()),
            col.name
        );
        on_line += 1;
    }
    out.push_str("\nSubject To\n");
    for row in &pi.rows {
        let _ = write!(out, " {}:", row.name);
        let mut on_line = 0;
        for &(c, a) in &row.entries {
            if on_line == 8 {
                out.push_str("\n   ");
                on_line = 0;
            }
            let _ = write!(
                out,
                " {} {} {}",
                if a < 0.0 { "-" } else { "+" },
                fmt_num(a.abs()),
                pi.columns[c].name
            );
            on_line += 1;
        }
        let sense = match row.sense {
            Sense::Eq => "=",
            Sense::Le => "<=",
            Sense::Ge => ">=",
        };
        let _ = writeln!(out, " {} {}", sense, fmt_num(row.rhs));
    }
    out.push_str("Bounds\n");
    for col in &pi.columns {
        if col.lower == col.upper {
            let _ = writeln!(out, " {} = {}", col.name, fmt_num(col.lower));
        } else if col.lower.is_infinite() && col.upper.is_infinite() {
            let _ = writeln!(out, " {} free", col.name);
        } else if col.upper.is_finite() {
            let _ = writeln!(
                out,
                " {} <= {} <= {}",
                fmt_num(col.lower),
                col.name,
                fmt_num(col.upper)
            );
        } else if col.lower != 0.0 {
            let _ = writeln!(out, " {} >= {}", col.name, fmt_num(col.lower));
        }
    }
    let integers: Vec<&str> = pi
        .columns
        .iter()
        .filter(|c| c.integer)
        .map(|c| c.name.as_str())
        .collect();
    if !integers.is_empty() {
        out.push_str("Generals\n");
        for chunk in integers.chunks(12) {
            let _ = writeln!(out, " {}", chunk.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else if v == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Name(String),
    Number(f64),
    Plus,
    Minus,
    Le,
    Ge,
    EqSign,
    Colon,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let mut tokens = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = match raw.find('\\') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut chars = line.char_indices().peekable();
        while let Some(&(i, ch)) = chars.peek() {
            match ch {
                c if c.is_whitespace() => {
                    chars.next();
                }
                '+' => {
                    chars.next();
                    tokens.push((lineno, Token::Plus));
                }
                '-' => {
                    chars.next();
                    tokens.push((lineno, Token::Minus));
                }
                ':' => {
                    chars.next();
                    tokens.push((lineno, Token::Colon));
                }
                '<' | '>' | '=' => {
                    chars.next();
                    if let Some(&(_, '=')) = chars.peek() {
                        chars.next();
                    }
                    tokens.push((
                        lineno,
                        match ch {
                            '<' => Token::Le,
                            '>' => Token::Ge,
                            _ => Token::EqSign,
                        },
                    ));
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let mut end = i;
                    while let Some(&(j, c2)) = chars.peek() {
                        if c2.is_ascii_digit()
                            || c2 == '.'
                            || c2 == 'e'
                            || c2 == 'E'
                            || ((c2 == '+' || c2 == '-')
                                && line[..j].ends_with(['e', 'E']))
                        {
                            end = j;
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    let s = &line[i..=end];
                    let v: f64 = s
                        .parse()
                        .map_err(|_| Error::parse(lineno, format!("bad number `{s}`")))?;
                    tokens.push((lineno, Token::Number(v)));
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut end = i;
                    while let Some(&(j, c2)) = chars.peek() {
                        if c2.is_ascii_alphanumeric() || c2 == '_' || c2 == '.' {
                            end = j;
                            chars.next();
                        } else {
                            break;
                        }
                    }
                    tokens.push((lineno, Token::Name(line[i..=end].to_string())));
                }
                other => {
                    return Err(Error::parse(lineno, format!("unexpected character `{other}`")))
                }
            }
        }
    }
    Ok(tokens)
}

fn keyword(tok: &Token) -> Option<&str> {
    if let Token::Name(name) = tok {
        match name.to_ascii_lowercase().as_str() {
            "minimize" | "min" => Some("minimize"),
            "maximize" | "max" => Some("maximize"),
            "subject" => Some("subject"),
            "st" => Some("subject-to"),
            "bounds" | "bound" => Some("bounds"),
            "generals" | "general" | "gen" => Some("generals"),
            "binaries" | "binary" | "bin" => Some("binaries"),
            "end" => Some("end"),
            "free" => Some("free"),
            "inf" | "infinity" => Some("inf"),
            _ => None,
        }
    } else {
        None
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    columns: Vec<Column>,
    index: HashMap<String, usize>,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn line(&self) -> usize {
        self.tokens
            .get(self.pos.min(self.tokens.len().saturating_sub(1)))
            .map(|(l, _)| *l)
            .unwrap_or(0)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn at_section_keyword(&self) -> bool {
        matches!(
            self.peek().and_then(keyword),
            Some("subject" | "subject-to" | "bounds" | "generals" | "binaries" | "end" | "maximize" | "minimize")
        )
    }

    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.columns.len();
        self.index.insert(name.to_string(), i);
        self.columns.push(Column {
            name: name.to_string(),
            kind: ColKind::Generic,
            objective: 0.0,
            lower: 0.0,
            upper: f64::INFINITY,
            integer: false,
        });
        i
    }

    /// Parses a run of `[+|-] [number] name` terms; returns (col, coef) pairs
    /// and stops before a sense token or section keyword.
    fn terms(&mut self) -> Result<Vec<(usize, f64)>> {
        let mut acc: Vec<(usize, f64)> = Vec::new();
        loop {
            if self.at_section_keyword() {
                break;
            }
            let mut sign = 1.0;
            loop {
                match self.peek() {
                    Some(Token::Plus) => {
                        self.next();
                    }
                    Some(Token::Minus) => {
                        sign = -sign;
                        self.next();
                    }
                    _ => break,
                }
            }
            let coef = if let Some(Token::Number(v)) = self.peek() {
                let v = *v;
                self.next();
                v
            } else {
                1.0
            };
            match self.peek() {
                Some(Token::Name(_)) if !self.at_section_keyword() => {
                    if let Some(Token::Name(name)) = self.next() {
                        let col = self.var(&name);
                        acc.push((col, sign * coef));
                    }
                }
                Some(Token::Le | Token::Ge | Token::EqSign) | None => {
                    if sign != 1.0 || coef != 1.0 {
                        return Err(Error::parse(self.line(), "dangling coefficient"));
                    }
                    break;
                }
                _ => break,
            }
        }
        Ok(acc)
    }

    fn number(&mut self) -> Result<f64> {
        let mut sign = 1.0;
        loop {
            match self.peek() {
                Some(Token::Minus) => {
                    sign = -sign;
                    self.next();
                }
                Some(Token::Plus) => {
                    self.next();
                }
                _ => break,
            }
        }
        match self.next() {
            Some(Token::Number(v)) => Ok(sign * v),
            Some(Token::Name(n)) if keyword(&Token::Name(n.clone())) == Some("inf") => {
                Ok(sign * f64::INFINITY)
            }
            _ => Err(Error::parse(self.line(), "expected a number")),
        }
    }
}

/// Parses LP-format text produced by [`export_lp_text`] (or a compatible
/// subset of the CPLEX LP format with family-tagged row names).
pub fn parse_lp_text(text: &str) -> Result<ProblemInstance> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        columns: Vec::new(),
        index: HashMap::new(),
    };

    match p.next().as_ref().and_then(keyword) {
        Some("minimize") => {}
        Some("maximize") => {
            return Err(Error::parse(p.line(), "only minimization problems are supported"))
        }
        _ => return Err(Error::parse(1, "document must start with `Minimize`")),
    }

    // objective: optional `obj:` label then terms
    if let (Some(Token::Name(_)), Some(Token::Colon)) =
        (p.peek(), p.tokens.get(p.pos + 1).map(|(_, t)| t))
    {
        p.next();
        p.next();
    }
    for (col, coef) in p.terms()? {
        p.columns[col].objective += coef;
    }

    match p.next().as_ref().and_then(keyword) {
        Some("subject") => match p.next().as_ref() {
            Some(Token::Name(to)) if to.eq_ignore_ascii_case("to") => {}
            _ => return Err(Error::parse(p.line(), "expected `Subject To`")),
        },
        Some("subject-to") => {}
        _ => return Err(Error::parse(p.line(), "expected a constraint section")),
    }

    let mut rows: Vec<Row> = Vec::new();
    loop {
        if p.at_section_keyword() || p.peek().is_none() {
            break;
        }
        let name = match p.next() {
            Some(Token::Name(n)) => n,
            _ => return Err(Error::parse(p.line(), "expected a row name")),
        };
        match p.next() {
            Some(Token::Colon) => {}
            _ => return Err(Error::parse(p.line(), "expected `:` after row name")),
        }
        let mut entries = p.terms()?;
        let sense = match p.next() {
            Some(Token::Le) => Sense::Le,
            Some(Token::Ge) => Sense::Ge,
            Some(Token::EqSign) => Sense::Eq,
            _ => return Err(Error::parse(p.line(), "expected a constraint sense")),
        };
        let rhs = p.number()?;
        let provenance = Provenance::from_row_name(&name).ok_or_else(|| {
            Error::parse(
                p.line(),
                format!("row `{name}` does not carry a known constraint-family tag"),
            )
        })?;
        entries.sort_unstable_by_key(|&(c, _)| c);
        rows.push(Row {
            name,
            provenance,
            sense,
            rhs,
            entries,
        });
    }

    // bounds / integrality sections in any order
    loop {
        match p.next().as_ref().and_then(keyword) {
            Some("bounds") => loop {
                if p.at_section_keyword() || p.peek().is_none() {
                    break;
                }
                // forms: `x free` | `x = v` | `x <= u` | `x >= l` |
                //        `l <= x [<= u]`
                if let Some(Token::Name(_)) = p.peek() {
                    let name = match p.next() {
                        Some(Token::Name(n)) => n,
                        _ => unreachable!(),
                    };
                    let col = p.var(&name);
                    match p.peek() {
                        Some(Token::Name(n)) if keyword(&Token::Name(n.clone())) == Some("free") => {
                            p.next();
                            p.columns[col].lower = f64::NEG_INFINITY;
                            p.columns[col].upper = f64::INFINITY;
                        }
                        Some(Token::EqSign) => {
                            p.next();
                            let v = p.number()?;
                            p.columns[col].lower = v;
                            p.columns[col].upper = v;
                        }
                        Some(Token::Le) => {
                            p.next();
                            p.columns[col].upper = p.number()?;
                        }
                        Some(Token::Ge) => {
                            p.next();
                            p.columns[col].lower = p.number()?;
                        }
                        _ => return Err(Error::parse(p.line(), "malformed bound")),
                    }
                } else {
                    let lo = p.number()?;
                    match p.next() {
                        Some(Token::Le) => {}
                        _ => return Err(Error::parse(p.line(), "expected `<=` in bound")),
                    }
                    let name = match p.next() {
                        Some(Token::Name(n)) => n,
                        _ => return Err(Error::parse(p.line(), "expected a variable in bound")),
                    };
                    let col = p.var(&name);
                    p.columns[col].lower = lo;
                    if let Some(Token::Le) = p.peek() {
                        p.next();
                        p.columns[col].upper = p.number()?;
                    }
                }
            },
            Some("generals") | Some("binaries") => {
                let binary = matches!(p.tokens[p.pos - 1].1.clone(), Token::Name(ref n) if keyword(&Token::Name(n.clone())) == Some("binaries"));
                loop {
                    if p.at_section_keyword() || p.peek().is_none() {
                        break;
                    }
                    match p.next() {
                        Some(Token::Name(n)) => {
                            let col = p.var(&n);
                            p.columns[col].integer = true;
                            if binary {
                                p.columns[col].lower = p.columns[col].lower.max(0.0);
                                p.columns[col].upper = p.columns[col].upper.min(1.0);
                            }
                        }
                        _ => return Err(Error::parse(p.line(), "expected a variable name")),
                    }
                }
            }
            Some("end") | None => break,
            _ => return Err(Error::parse(p.line(), "unexpected section")),
        }
    }

    Ok(ProblemInstance {
        columns: p.columns,
        rows,
        num_demands: 0,
        num_arcs: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(name: &str, obj: f64) -> Column {
        Column {
            name: name.into(),
            kind: ColKind::Generic,
            objective: obj,
            lower: 0.0,
            upper: f64::INFINITY,
            integer: false,
        }
    }

    fn tiny() -> ProblemInstance {
        let mut c0 = col("x0", 1.5);
        c0.upper = 4.0;
        let mut c2 = col("c0", 0.0);
        c2.upper = 1.0;
        c2.integer = true;
        ProblemInstance {
            columns: vec![c0, col("x1", 2.0), c2],
            rows: vec![
                Row {
                    name: "Eq2_m0_n0".into(),
                    provenance: Provenance::Eq2,
                    sense: Sense::Eq,
                    rhs: 1.0,
                    entries: vec![(0, 1.0), (1, -2.5)],
                },
                Row {
                    name: "Eq8_a0".into(),
                    provenance: Provenance::Eq8,
                    sense: Sense::Le,
                    rhs: 0.0,
                    entries: vec![(1, 1.0), (2, -30.0)],
                },
            ],
            num_demands: 0,
            num_arcs: 0,
        }
    }

    #[test]
    fn empty_instance_round_trips() {
        let pi = ProblemInstance {
            columns: vec![],
            rows: vec![],
            num_demands: 0,
            num_arcs: 0,
        };
        let text = export_lp_text(&pi);
        let back = parse_lp_text(&text).unwrap();
        assert_eq!(back.num_cols(), 0);
        assert_eq!(back.num_rows(), 0);
    }

    #[test]
    fn golden_text_of_tiny_instance() {
        let expected = "\\ voltflow problem instance\n\
Minimize\n obj: + 1.5 x0 + 2 x1 + 0 c0\n\
Subject To\n \
Eq2_m0_n0: + 1 x0 - 2.5 x1 = 1\n \
Eq8_a0: + 1 x1 - 30 c0 <= 0\n\
Bounds\n \
0 <= x0 <= 4\n \
0 <= c0 <= 1\n\
Generals\n c0\nEnd\n";
        assert_eq!(export_lp_text(&tiny()), expected);
    }

    #[test]
    fn round_trip_preserves_structure() {
        let pi = tiny();
        let back = parse_lp_text(&export_lp_text(&pi)).unwrap();
        assert_eq!(back.num_rows(), pi.num_rows());
        assert_eq!(back.num_cols(), pi.num_cols());
        assert_eq!(back.num_nonzeros(), pi.num_nonzeros());
        for (a, b) in pi.columns.iter().zip(&back.columns) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.objective, b.objective);
            assert_eq!(a.lower, b.lower);
            assert_eq!(a.upper, b.upper);
            assert_eq!(a.integer, b.integer);
        }
        for (a, b) in pi.rows.iter().zip(&back.rows) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.provenance, b.provenance);
            assert_eq!(a.sense, b.sense);
            assert_eq!(a.rhs, b.rhs);
            assert_eq!(a.entries, b.entries);
        }
    }
}
