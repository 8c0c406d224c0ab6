//! Recursive-descent parser.
//!
//! Binding from loosest to tightest: `->`/`<->` (right associative), `|`,
//! `&`, `U`/`R` (right associative), then the prefix operators `! X G F`.

use super::{AtomTable, Ltl, LtlError};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Not,
    And,
    Or,
    Implies,
    Iff,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>, LtlError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let tok = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'!' => Tok::Not,
            b'&' => Tok::And,
            b'|' => Tok::Or,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                i += 1;
                Tok::Implies
            }
            b'<' if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') => {
                i += 2;
                Tok::Iff
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
                continue;
            }
            _ => {
                return Err(LtlError::Syntax {
                    pos: start,
                    message: format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                })
            }
        };
        i += 1;
        out.push((tok, start));
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
    atoms: &'a AtomTable,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(_, p)| *p)
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, LtlError> {
        Err(LtlError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn implication(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.disjunction()?;
        match self.peek() {
            Some(Tok::Implies) => {
                self.at += 1;
                let rhs = self.implication()?;
                Ok(Ltl::implies(lhs, rhs))
            }
            Some(Tok::Iff) => {
                self.at += 1;
                let rhs = self.implication()?;
                Ok(Ltl::and(
                    Ltl::implies(lhs.clone(), rhs.clone()),
                    Ltl::implies(rhs, lhs),
                ))
            }
            _ => Ok(lhs),
        }
    }

    fn disjunction(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.at += 1;
            lhs = Ltl::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<Ltl, LtlError> {
        let mut lhs = self.binary_temporal()?;
        while self.peek() == Some(&Tok::And) {
            self.at += 1;
            lhs = Ltl::and(lhs, self.binary_temporal()?);
        }
        Ok(lhs)
    }

    fn binary_temporal(&mut self) -> Result<Ltl, LtlError> {
        let lhs = self.unary()?;
        if self.peek_keyword("U") {
            self.at += 1;
            Ok(Ltl::until(lhs, self.binary_temporal()?))
        } else if self.peek_keyword("R") {
            self.at += 1;
            Ok(Ltl::release(lhs, self.binary_temporal()?))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Ltl, LtlError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.at += 1;
                Ok(Ltl::not(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.implication()?;
                if self.peek() != Some(&Tok::RParen) {
                    return self.error("expected `)`");
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                self.at += 1;
                match name.as_str() {
                    "X" => Ok(Ltl::next(self.unary()?)),
                    "G" => Ok(Ltl::globally(self.unary()?)),
                    "F" => Ok(Ltl::finally(self.unary()?)),
                    "true" => Ok(Ltl::True),
                    "false" => Ok(Ltl::False),
                    "U" | "R" => {
                        self.at -= 1;
                        self.error(format!("`{name}` needs a left operand"))
                    }
                    _ => match self.atoms.index_of(&name) {
                        Some(i) => Ok(Ltl::Atom(i)),
                        None => Err(LtlError::UnknownAtom { name, pos }),
                    },
                }
            }
            Some(_) => self.error("expected a formula"),
            None => self.error("unexpected end of input"),
        }
    }
}

/// Parses a formula whose atoms must all be declared in `atoms`.
pub fn parse_ltl(text: &str, atoms: &AtomTable) -> Result<Ltl, LtlError> {
    let mut p = Parser {
        toks: tokenize(text)?,
        at: 0,
        end: text.len(),
        atoms,
    };
    let f = p.implication()?;
    if p.at != p.toks.len() {
        return p.error("trailing input");
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atoms() -> AtomTable {
        AtomTable::new(["a", "b"], ["c"]).unwrap()
    }

    fn p(s: &str) -> Ltl {
        parse_ltl(s, &atoms()).unwrap()
    }

    #[test]
    fn precedence() {
        let (a, b, c) = (Ltl::atom(0), Ltl::atom(1), Ltl::atom(2));
        assert_eq!(p("a | b & c"), Ltl::or(a.clone(), Ltl::and(b.clone(), c.clone())));
        assert_eq!(p("a & b U c"), Ltl::and(a.clone(), Ltl::until(b.clone(), c.clone())));
        assert_eq!(
            p("a U b U c"),
            Ltl::until(a.clone(), Ltl::until(b.clone(), c.clone()))
        );
        assert_eq!(p("!a U b"), Ltl::until(Ltl::not(a.clone()), b.clone()));
        assert_eq!(
            p("a -> b -> c"),
            Ltl::implies(a.clone(), Ltl::implies(b.clone(), c.clone()))
        );
        assert_eq!(p("G X !a"), Ltl::globally(Ltl::next(Ltl::not(a))));
        assert_eq!(p("F(b)"), Ltl::finally(b));
    }

    #[test]
    fn errors_carry_positions() {
        let t = atoms();
        assert_eq!(
            parse_ltl("a & zz", &t),
            Err(LtlError::UnknownAtom {
                name: "zz".into(),
                pos: 4
            })
        );
        assert!(matches!(parse_ltl("(a", &t), Err(LtlError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_ltl("a b", &t), Err(LtlError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_ltl("a # b", &t), Err(LtlError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_ltl("U a", &t), Err(LtlError::Syntax { pos: 0, .. })));
        assert!(matches!(parse_ltl("", &t), Err(LtlError::Syntax { .. })));
    }

    #[test]
    fn printed_form_reparses() {
        let t = atoms();
        for s in ["G(a -> X c)", "a U (b R !c)", "F G a | true", "a <-> c"] {
            let f = p(s);
            let printed = f.display(&t).to_string();
            assert_eq!(parse_ltl(&printed, &t).unwrap(), f, "{printed}");
        }
    }
}
