//! Recursive-descent parser for the specification syntax:
//!
//! ```text
//! formula := or_expr (("U" | "R") formula)?     // until / release, right-assoc
//! or_expr := and_expr ("|" and_expr)*
//! and_expr := unary ("&" unary)*
//! unary := "!" ident | ident | "(" formula ")"
//! ```
//!
//! Proposition names resolve against a binding table from the model file.
//! Negation is only permitted on atoms, matching the formula grammar.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::logic::{Atom, Formula};
use crate::numerics::Vector;

/// Named half-space bindings: name -> (c, d) meaning {x : c^T x + d < 0}.
#[derive(Debug, Clone, Default)]
pub struct PropositionTable {
    entries: BTreeMap<String, (Vector, f64)>,
}

impl PropositionTable {
    pub fn new() -> PropositionTable {
        PropositionTable::default()
    }

    pub fn bind(&mut self, name: &str, c: Vector, d: f64) -> Result<()> {
        if name.is_empty()
            || !name.chars().next().unwrap().is_ascii_alphabetic() && !name.starts_with('_')
            || !name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
        {
            return Err(Error::Schema(format!("invalid proposition name `{name}`")));
        }
        if name == "U" || name == "R" {
            return Err(Error::Schema("proposition names U and R are reserved operators".into()));
        }
        if c.iter().all(|v| *v == 0.0) {
            return Err(Error::Schema(format!("proposition `{name}` has a zero normal")));
        }
        self.entries.insert(name.to_string(), (c, d));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&(Vector, f64)> {
        self.entries.get(name)
    }

    /// Names in deterministic (sorted) order.
    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(|s| s.as_str()).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &(Vector, f64))> {
        self.entries.iter()
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Bang,
    Amp,
    Pipe,
    Until,
    Release,
    LPar,
    RPar,
    End,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Lexer<'a> {
        Lexer { src: src.as_bytes(), pos: 0 }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Result<(Tok, usize)> {
        let save = self.pos;
        let t = self.next()?;
        self.pos = save;
        Ok(t)
    }

    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let at = self.pos;
        if self.pos >= self.src.len() {
            return Ok((Tok::End, at));
        }
        let ch = self.src[self.pos];
        let tok = match ch {
            b'!' => {
                self.pos += 1;
                Tok::Bang
            }
            b'&' => {
                self.pos += 1;
                Tok::Amp
            }
            b'|' => {
                self.pos += 1;
                Tok::Pipe
            }
            b'(' => {
                self.pos += 1;
                Tok::LPar
            }
            b')' => {
                self.pos += 1;
                Tok::RPar
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap().to_string();
                match word.as_str() {
                    "U" => Tok::Until,
                    "R" => Tok::Release,
                    _ => Tok::Ident(word),
                }
            }
            other => {
                return Err(Error::Parse {
                    pos: at,
                    msg: format!("unexpected character `{}`", other as char),
                })
            }
        };
        Ok((tok, at))
    }
}

struct Parser<'a> {
    lex: Lexer<'a>,
    props: &'a PropositionTable,
}

impl<'a> Parser<'a> {
    fn formula(&mut self) -> Result<Formula> {
        let left = self.or_expr()?;
        let (tok, _) = self.lex.peek()?;
        match tok {
            Tok::Until => {
                self.lex.next()?;
                let right = self.formula()?;
                Ok(Formula::until(left, right))
            }
            Tok::Release => {
                self.lex.next()?;
                let right = self.formula()?;
                Ok(Formula::release(left, right))
            }
            _ => Ok(left),
        }
    }

    fn or_expr(&mut self) -> Result<Formula> {
        let mut left = self.and_expr()?;
        loop {
            let (tok, _) = self.lex.peek()?;
            if tok == Tok::Pipe {
                self.lex.next()?;
                let right = self.and_expr()?;
                left = Formula::or(left, right);
            } else {
                return Ok(left);
            }
        }
    }

    fn and_expr(&mut self) -> Result<Formula> {
        let mut left = self.unary()?;
        loop {
            let (tok, _) = self.lex.peek()?;
            if tok == Tok::Amp {
                self.lex.next()?;
                let right = self.unary()?;
                left = Formula::and(left, right);
            } else {
                return Ok(left);
            }
        }
    }

    fn unary(&mut self) -> Result<Formula> {
        let (tok, at) = self.lex.next()?;
        match tok {
            Tok::Bang => {
                let (tok2, at2) = self.lex.next()?;
                match tok2 {
                    Tok::Ident(name) => Ok(Formula::Atom(self.atom(&name, true, at2)?)),
                    _ => Err(Error::Parse {
                        pos: at2,
                        msg: "negation is only allowed on a proposition".into(),
                    }),
                }
            }
            Tok::Ident(name) => Ok(Formula::Atom(self.atom(&name, false, at)?)),
            Tok::LPar => {
                let inner = self.formula()?;
                let (tok2, at2) = self.lex.next()?;
                if tok2 != Tok::RPar {
                    return Err(Error::Parse { pos: at2, msg: "expected `)`".into() });
                }
                Ok(inner)
            }
            other => Err(Error::Parse { pos: at, msg: format!("unexpected token {other:?}") }),
        }
    }

    fn atom(&self, name: &str, negated: bool, at: usize) -> Result<Atom> {
        let Some((c, d)) = self.props.get(name) else {
            return Err(Error::Parse {
                pos: at,
                msg: format!("unbound proposition `{name}`"),
            });
        };
        let mut a = Atom::new(name, c.clone(), *d)?;
        a.negated = negated;
        Ok(a)
    }
}

/// Parse a radius-0 formula, binding proposition names through `props`.
pub fn parse(text: &str, props: &PropositionTable) -> Result<Formula> {
    let mut p = Parser { lex: Lexer::new(text), props };
    let f = p.formula()?;
    let (tok, at) = p.lex.next()?;
    if tok != Tok::End {
        return Err(Error::Parse { pos: at, msg: format!("trailing input {tok:?}") });
    }
    Ok(f)
}

/// Printer that round-trips through `parse` (radius-0 formulas only).
pub fn print(f: &Formula) -> String {
    match f {
        Formula::Atom(a) => {
            if a.negated {
                format!("!{}", a.name)
            } else {
                a.name.clone()
            }
        }
        Formula::And(l, r) => format!("({} & {})", print(l), print(r)),
        Formula::Or(l, r) => format!("({} | {})", print(l), print(r)),
        Formula::Until(l, r) => format!("({} U {})", print(l), print(r)),
        Formula::Release(l, r) => format!("({} R {})", print(l), print(r)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props() -> PropositionTable {
        let mut t = PropositionTable::new();
        for (i, d) in [(1, -1.0), (2, -2.0), (3, 0.5), (4, -0.25)] {
            t.bind(&format!("p{i}"), vec![1.0, 0.0], d).unwrap();
        }
        t
    }

    #[test]
    fn parses_until_of_conjunctions() {
        let f = parse("(!p3 & p4) U (p3 & !p4)", &props()).unwrap();
        match &f {
            Formula::Until(l, r) => {
                assert!(matches!(**l, Formula::And(_, _)));
                assert!(matches!(**r, Formula::And(_, _)));
            }
            _ => panic!("expected U at the root, got {f}"),
        }
    }

    #[test]
    fn parses_single_atom() {
        let f = parse("p1", &props()).unwrap();
        assert!(matches!(f, Formula::Atom(_)));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse("p1 U", &props()).unwrap_err();
        match err {
            Error::Parse { pos, .. } => assert_eq!(pos, 4),
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn unbound_proposition_rejected() {
        assert!(parse("p9", &props()).is_err());
    }

    #[test]
    fn negation_only_on_atoms() {
        assert!(parse("!(p1 & p2)", &props()).is_err());
    }

    #[test]
    fn print_round_trips() {
        for text in [
            "p1",
            "!p2",
            "(p1 & p2)",
            "((!p3 & p4) U (p3 & !p4))",
            "(p1 | (p2 R p3))",
            "(p1 U (p2 U p3))",
            "(p1 & p2 & p3)",
        ] {
            let f = parse(text, &props()).unwrap();
            let again = parse(&print(&f), &props()).unwrap();
            assert!(f.same_shape(&again), "round trip failed for {text}");
        }
    }
}
