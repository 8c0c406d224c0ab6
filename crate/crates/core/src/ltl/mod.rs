//! Linear temporal logic over a partitioned set of atomic propositions.

mod lasso;
mod parser;

use std::fmt;

pub use lasso::{evaluate_on_lasso, LassoTrace};
pub use parser::parse_ltl;

use crate::alphabet::Valuation;

const RESERVED: &[&str] = &["X", "U", "R", "G", "F", "true", "false"];

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LtlError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown atom `{name}` at position {pos}")]
    UnknownAtom { name: String, pos: usize },
    #[error("invalid atom table: {0}")]
    Atoms(String),
}

/// Input atoms (controlled by the environment) and output atoms (controlled
/// by the system). Atom `i` of the table is bit `i` of a [`Valuation`]; the
/// inputs come first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AtomTable {
    inputs: Vec<String>,
    outputs: Vec<String>,
}

fn valid_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl AtomTable {
    pub fn new<I, O>(inputs: I, outputs: O) -> Result<Self, LtlError>
    where
        I: IntoIterator,
        I::Item: Into<String>,
        O: IntoIterator,
        O::Item: Into<String>,
    {
        let inputs: Vec<String> = inputs.into_iter().map(Into::into).collect();
        let outputs: Vec<String> = outputs.into_iter().map(Into::into).collect();
        let mut seen = std::collections::HashSet::new();
        for name in inputs.iter().chain(&outputs) {
            if !valid_identifier(name) || RESERVED.contains(&name.as_str()) {
                return Err(LtlError::Atoms(format!("`{name}` is not a valid atom name")));
            }
            if !seen.insert(name.as_str()) {
                return Err(LtlError::Atoms(format!("duplicate atom `{name}`")));
            }
        }
        if inputs.len() + outputs.len() > 64 {
            return Err(LtlError::Atoms("at most 64 atoms are supported".into()));
        }
        Ok(AtomTable { inputs, outputs })
    }

    /// Reads `inputs: a b ...` and `outputs: c d ...` lines; `#` starts a
    /// comment and either line may be absent.
    pub fn parse(text: &str) -> Result<Self, LtlError> {
        let mut inputs: Vec<String> = Vec::new();
        let mut outputs: Vec<String> = Vec::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| LtlError::Atoms(format!("cannot read `{line}`")))?;
            let names = rest.split_whitespace().map(str::to_string);
            match key.trim() {
                "inputs" => inputs.extend(names),
                "outputs" => outputs.extend(names),
                other => return Err(LtlError::Atoms(format!("unknown section `{other}`"))),
            }
        }
        AtomTable::new(inputs, outputs)
    }

    pub fn write(&self) -> String {
        format!("inputs: {}\noutputs: {}\n", self.inputs.join(" "), self.outputs.join(" "))
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn len(&self) -> usize {
        self.inputs.len() + self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn name(&self, index: usize) -> &str {
        if index < self.inputs.len() {
            &self.inputs[index]
        } else {
            &self.outputs[index - self.inputs.len()]
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .position(|n| n == name)
    }

    pub fn is_input(&self, index: usize) -> bool {
        index < self.inputs.len()
    }

    pub fn input_mask(&self) -> Valuation {
        mask(self.inputs.len())
    }

    pub fn output_mask(&self) -> Valuation {
        mask(self.len()) & !self.input_mask()
    }
}

fn mask(bits: usize) -> Valuation {
    if bits >= 64 {
        !0
    } else {
        (1u64 << bits) - 1
    }
}

/// LTL syntax tree. Atoms are indices into an [`AtomTable`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ltl {
    True,
    False,
    Atom(usize),
    Not(Box<Ltl>),
    Or(Box<Ltl>, Box<Ltl>),
    And(Box<Ltl>, Box<Ltl>),
    Next(Box<Ltl>),
    Until(Box<Ltl>, Box<Ltl>),
    Release(Box<Ltl>, Box<Ltl>),
    Globally(Box<Ltl>),
    Finally(Box<Ltl>),
}

impl Ltl {
    pub fn atom(i: usize) -> Ltl {
        Ltl::Atom(i)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(a: Ltl) -> Ltl {
        Ltl::Not(Box::new(a))
    }

    pub fn and(a: Ltl, b: Ltl) -> Ltl {
        Ltl::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Ltl, b: Ltl) -> Ltl {
        Ltl::or(Ltl::not(a), b)
    }

    pub fn next(a: Ltl) -> Ltl {
        Ltl::Next(Box::new(a))
    }

    pub fn until(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Until(Box::new(a), Box::new(b))
    }

    pub fn release(a: Ltl, b: Ltl) -> Ltl {
        Ltl::Release(Box::new(a), Box::new(b))
    }

    pub fn globally(a: Ltl) -> Ltl {
        Ltl::Globally(Box::new(a))
    }

    pub fn finally(a: Ltl) -> Ltl {
        Ltl::Finally(Box::new(a))
    }

    /// Number of syntax-tree nodes.
    pub fn size(&self) -> usize {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => 1,
            Ltl::Not(a) | Ltl::Next(a) | Ltl::Globally(a) | Ltl::Finally(a) => 1 + a.size(),
            Ltl::Or(a, b) | Ltl::And(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Largest atom index used, if any.
    pub fn max_atom(&self) -> Option<usize> {
        match self {
            Ltl::True | Ltl::False => None,
            Ltl::Atom(i) => Some(*i),
            Ltl::Not(a) | Ltl::Next(a) | Ltl::Globally(a) | Ltl::Finally(a) => a.max_atom(),
            Ltl::Or(a, b) | Ltl::And(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                a.max_atom().max(b.max_atom())
            }
        }
    }

    /// Negations only on atoms, no `G`/`F` nodes.
    pub fn is_nnf(&self) -> bool {
        match self {
            Ltl::True | Ltl::False | Ltl::Atom(_) => true,
            Ltl::Not(a) => matches!(**a, Ltl::Atom(_)),
            Ltl::Next(a) => a.is_nnf(),
            Ltl::Or(a, b) | Ltl::And(a, b) | Ltl::Until(a, b) | Ltl::Release(a, b) => {
                a.is_nnf() && b.is_nnf()
            }
            Ltl::Globally(_) | Ltl::Finally(_) => false,
        }
    }

    pub fn display<'a>(&'a self, atoms: &'a AtomTable) -> LtlDisplay<'a> {
        LtlDisplay {
            formula: self,
            atoms,
        }
    }
}

/// Negation normal form. `G φ` becomes `false R φ` and `F φ` becomes
/// `true U φ`.
pub fn to_nnf(formula: &Ltl) -> Ltl {
    nnf(formula, false)
}

fn nnf(f: &Ltl, negate: bool) -> Ltl {
    match (f, negate) {
        (Ltl::True, false) | (Ltl::False, true) => Ltl::True,
        (Ltl::True, true) | (Ltl::False, false) => Ltl::False,
        (Ltl::Atom(i), false) => Ltl::Atom(*i),
        (Ltl::Atom(i), true) => Ltl::not(Ltl::Atom(*i)),
        (Ltl::Not(a), _) => nnf(a, !negate),
        (Ltl::Or(a, b), false) | (Ltl::And(a, b), true) => Ltl::or(nnf(a, negate), nnf(b, negate)),
        (Ltl::And(a, b), false) | (Ltl::Or(a, b), true) => {
            Ltl::and(nnf(a, negate), nnf(b, negate))
        }
        (Ltl::Next(a), _) => Ltl::next(nnf(a, negate)),
        (Ltl::Until(a, b), false) | (Ltl::Release(a, b), true) => {
            Ltl::until(nnf(a, negate), nnf(b, negate))
        }
        (Ltl::Release(a, b), false) | (Ltl::Until(a, b), true) => {
            Ltl::release(nnf(a, negate), nnf(b, negate))
        }
        (Ltl::Globally(a), false) | (Ltl::Finally(a), true) => {
            Ltl::release(Ltl::False, nnf(a, negate))
        }
        (Ltl::Finally(a), false) | (Ltl::Globally(a), true) => {
            Ltl::until(Ltl::True, nnf(a, negate))
        }
    }
}

pub struct LtlDisplay<'a> {
    formula: &'a Ltl,
    atoms: &'a AtomTable,
}

impl fmt::Display for LtlDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_ltl(f, self.formula, self.atoms)
    }
}

// fully parenthesized binary nodes, so printing then parsing is structural
fn write_ltl(f: &mut fmt::Formatter<'_>, g: &Ltl, atoms: &AtomTable) -> fmt::Result {
    let binary = |f: &mut fmt::Formatter<'_>, a: &Ltl, op: &str, b: &Ltl| {
        write!(f, "(")?;
        write_ltl(f, a, atoms)?;
        write!(f, " {op} ")?;
        write_ltl(f, b, atoms)?;
        write!(f, ")")
    };
    match g {
        Ltl::True => write!(f, "true"),
        Ltl::False => write!(f, "false"),
        Ltl::Atom(i) => write!(f, "{}", atoms.name(*i)),
        Ltl::Not(a) => {
            write!(f, "!")?;
            write_ltl(f, a, atoms)
        }
        Ltl::Next(a) => {
            write!(f, "X ")?;
            write_ltl(f, a, atoms)
        }
        Ltl::Globally(a) => {
            write!(f, "G ")?;
            write_ltl(f, a, atoms)
        }
        Ltl::Finally(a) => {
            write!(f, "F ")?;
            write_ltl(f, a, atoms)
        }
        Ltl::Or(a, b) => binary(f, a, "|", b),
        Ltl::And(a, b) => binary(f, a, "&", b),
        Ltl::Until(a, b) => binary(f, a, "U", b),
        Ltl::Release(a, b) => binary(f, a, "R", b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pq() -> AtomTable {
        AtomTable::new(["p"], ["q"]).unwrap()
    }

    #[test]
    fn atom_file_round_trip() {
        let t = AtomTable::parse("# weather\ninputs: M1 M2\noutputs: Warn Alarm\n").unwrap();
        assert_eq!(t.inputs(), ["M1", "M2"]);
        assert_eq!(t.outputs(), ["Warn", "Alarm"]);
        assert_eq!(AtomTable::parse(&t.write()).unwrap(), t);
        assert!(AtomTable::parse("inputs: a\nstate: b\n").is_err());
        assert!(AtomTable::parse("inputs: a a\n").is_err());
    }

    #[test]
    fn nnf_dualities() {
        let p = Ltl::atom(0);
        assert_eq!(
            to_nnf(&Ltl::not(Ltl::globally(p.clone()))),
            Ltl::until(Ltl::True, Ltl::not(p.clone()))
        );
        let (a, b) = (Ltl::atom(0), Ltl::atom(1));
        assert_eq!(
            to_nnf(&Ltl::not(Ltl::until(a.clone(), b.clone()))),
            Ltl::release(Ltl::not(a.clone()), Ltl::not(b.clone()))
        );
        assert_eq!(to_nnf(&p), p);
        assert!(to_nnf(&Ltl::not(Ltl::finally(Ltl::not(a)))).is_nnf());
    }

    #[test]
    fn atom_table_rejects_bad_names() {
        assert!(AtomTable::new(["a"], ["a"]).is_err());
        assert!(AtomTable::new(["X"], Vec::<String>::new()).is_err());
        assert!(AtomTable::new(["1a"], Vec::<String>::new()).is_err());
        let t = pq();
        assert_eq!(t.input_mask(), 1);
        assert_eq!(t.output_mask(), 2);
        assert_eq!(t.index_of("q"), Some(1));
    }

    #[test]
    fn display_is_parenthesized() {
        let t = pq();
        let f = Ltl::globally(Ltl::implies(Ltl::atom(0), Ltl::next(Ltl::atom(1))));
        assert_eq!(f.display(&t).to_string(), "G (!p | X q)");
    }
}
