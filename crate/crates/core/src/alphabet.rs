//! Letters over a partitioned set of atomic propositions.
//!
//! A [`Valuation`] is a bitset over the atoms of an [`AtomTable`] (inputs
//! first, then outputs). An [`Alphabet`] fixes which input valuations and
//! which output valuations are letters; by default every subset is a letter,
//! but generators (the independent-set reduction for instance) may restrict
//! the input side to one-hot valuations.

use std::collections::HashMap;
use std::fmt;

use crate::ltl::AtomTable;

/// Bitset over the atoms of an [`AtomTable`], bit `i` is atom `i`.
pub type Valuation = u64;

/// One round of the game: an input letter index and an output letter index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Letter {
    pub input: usize,
    pub output: usize,
}

impl Letter {
    pub fn new(input: usize, output: usize) -> Self {
        Letter { input, output }
    }

    /// Dense index used by automata and reward machines.
    pub fn index(self, num_outputs: usize) -> usize {
        self.input * num_outputs + self.output
    }

    pub fn from_index(index: usize, num_outputs: usize) -> Self {
        Letter {
            input: index / num_outputs,
            output: index % num_outputs,
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum LetterError {
    #[error("unknown atom `{0}`")]
    UnknownAtom(String),
    #[error("atom `{0}` is not allowed here")]
    WrongSide(String),
    #[error("atom `{0}` appears with both signs")]
    Contradiction(String),
    #[error("`{0}` is not a letter of the alphabet")]
    NotALetter(String),
}

/// Conjunction of signed atoms. Unmentioned atoms are unconstrained.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Cube {
    pub pos: Valuation,
    pub neg: Valuation,
}

impl Cube {
    pub fn matches(&self, v: Valuation) -> bool {
        v & self.pos == self.pos && v & self.neg == 0
    }
}

#[derive(Clone, Debug)]
pub struct Alphabet {
    atoms: AtomTable,
    inputs: Vec<Valuation>,
    outputs: Vec<Valuation>,
    input_lookup: HashMap<Valuation, usize>,
    output_lookup: HashMap<Valuation, usize>,
}

impl PartialEq for Alphabet {
    fn eq(&self, other: &Self) -> bool {
        self.atoms == other.atoms && self.inputs == other.inputs && self.outputs == other.outputs
    }
}

impl Eq for Alphabet {}

impl Alphabet {
    /// Every subset of the inputs and every subset of the outputs is a letter.
    pub fn full(atoms: AtomTable) -> Self {
        let ni = atoms.inputs().len();
        let no = atoms.outputs().len();
        assert!(ni <= 20 && no <= 20, "alphabet too large to enumerate");
        let inputs = (0..1u64 << ni).collect();
        let outputs = (0..1u64 << no).map(|o| o << ni).collect();
        Self::with_letters(atoms, inputs, outputs)
    }

    /// Restricted alphabet. Input valuations may only mention input atoms and
    /// output valuations only output atoms.
    pub fn with_letters(atoms: AtomTable, inputs: Vec<Valuation>, outputs: Vec<Valuation>) -> Self {
        let imask = atoms.input_mask();
        let omask = atoms.output_mask();
        assert!(inputs.iter().all(|v| v & !imask == 0));
        assert!(outputs.iter().all(|v| v & !omask == 0));
        let input_lookup = inputs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let output_lookup = outputs.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        Alphabet {
            atoms,
            inputs,
            outputs,
            input_lookup,
            output_lookup,
        }
    }

    pub fn atoms(&self) -> &AtomTable {
        &self.atoms
    }

    pub fn num_inputs(&self) -> usize {
        self.inputs.len()
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_letters(&self) -> usize {
        self.inputs.len() * self.outputs.len()
    }

    pub fn input_valuation(&self, i: usize) -> Valuation {
        self.inputs[i]
    }

    pub fn output_valuation(&self, o: usize) -> Valuation {
        self.outputs[o]
    }

    pub fn valuation(&self, l: Letter) -> Valuation {
        self.inputs[l.input] | self.outputs[l.output]
    }

    pub fn letter_of(&self, v: Valuation) -> Option<Letter> {
        let i = *self.input_lookup.get(&(v & self.atoms.input_mask()))?;
        let o = *self.output_lookup.get(&(v & self.atoms.output_mask()))?;
        Some(Letter::new(i, o))
    }

    pub fn input_of(&self, v: Valuation) -> Option<usize> {
        self.input_lookup.get(&v).copied()
    }

    pub fn output_of(&self, v: Valuation) -> Option<usize> {
        self.output_lookup.get(&v).copied()
    }

    pub fn letters(&self) -> impl Iterator<Item = Letter> + '_ {
        let no = self.outputs.len();
        (0..self.inputs.len()).flat_map(move |i| (0..no).map(move |o| Letter::new(i, o)))
    }

    pub fn format_input(&self, i: usize) -> String {
        self.format_valuation(self.inputs[i], self.atoms.input_mask())
    }

    pub fn format_output(&self, o: usize) -> String {
        self.format_valuation(self.outputs[o], self.atoms.output_mask())
    }

    pub fn format_letter(&self, l: Letter) -> String {
        self.format_valuation(self.valuation(l), self.atoms.input_mask() | self.atoms.output_mask())
    }

    /// Signed-atom list over the atoms selected by `scope`, e.g. `M1,!M2`.
    pub fn format_valuation(&self, v: Valuation, scope: Valuation) -> String {
        let parts: Vec<String> = (0..self.atoms.len())
            .filter(|&a| scope >> a & 1 == 1)
            .map(|a| {
                let name = self.atoms.name(a);
                if v >> a & 1 == 1 {
                    name.to_string()
                } else {
                    format!("!{name}")
                }
            })
            .collect();
        if parts.is_empty() {
            "{}".to_string()
        } else {
            parts.join(",")
        }
    }

    /// Parses a signed-atom list (`*` or `{}` for the empty cube) whose atoms
    /// must all lie in `scope`.
    pub fn parse_cube(&self, text: &str, scope: Valuation) -> Result<Cube, LetterError> {
        let text = text.trim();
        let mut cube = Cube::default();
        if text == "*" || text == "{}" || text.is_empty() {
            return Ok(cube);
        }
        for raw in text.split(',') {
            let raw = raw.trim();
            let (negated, name) = match raw.strip_prefix('!') {
                Some(rest) => (true, rest.trim()),
                None => (false, raw),
            };
            let idx = self
                .atoms
                .index_of(name)
                .ok_or_else(|| LetterError::UnknownAtom(name.to_string()))?;
            if scope >> idx & 1 == 0 {
                return Err(LetterError::WrongSide(name.to_string()));
            }
            let bit = 1u64 << idx;
            if negated {
                cube.neg |= bit;
            } else {
                cube.pos |= bit;
            }
        }
        if cube.pos & cube.neg != 0 {
            let idx = (cube.pos & cube.neg).trailing_zeros() as usize;
            return Err(LetterError::Contradiction(self.atoms.name(idx).to_string()));
        }
        Ok(cube)
    }

    /// Input letters matched by an input cube.
    pub fn inputs_matching(&self, cube: &Cube) -> Vec<usize> {
        (0..self.inputs.len())
            .filter(|&i| cube.matches(self.inputs[i]))
            .collect()
    }

    pub fn outputs_matching(&self, cube: &Cube) -> Vec<usize> {
        (0..self.outputs.len())
            .filter(|&o| cube.matches(self.outputs[o]))
            .collect()
    }

    pub fn letters_matching(&self, cube: &Cube) -> Vec<Letter> {
        self.letters()
            .filter(|&l| cube.matches(self.valuation(l)))
            .collect()
    }

    /// Parses an input letter given as a signed-atom list where unmentioned
    /// input atoms are false.
    pub fn parse_input_valuation(&self, text: &str) -> Result<usize, LetterError> {
        let cube = self.parse_cube(text, self.atoms.input_mask())?;
        self.input_of(cube.pos)
            .ok_or_else(|| LetterError::NotALetter(text.to_string()))
    }

    pub fn parse_output_valuation(&self, text: &str) -> Result<usize, LetterError> {
        let cube = self.parse_cube(text, self.atoms.output_mask())?;
        self.output_of(cube.pos)
            .ok_or_else(|| LetterError::NotALetter(text.to_string()))
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.input, self.output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weather() -> Alphabet {
        let atoms = AtomTable::new(["M1", "M2"], ["Warn", "Alarm"]).unwrap();
        Alphabet::full(atoms)
    }

    #[test]
    fn full_alphabet_sizes() {
        let a = weather();
        assert_eq!(a.num_inputs(), 4);
        assert_eq!(a.num_outputs(), 4);
        assert_eq!(a.num_letters(), 16);
    }

    #[test]
    fn letter_print_parse() {
        let a = weather();
        let l = a.letter_of(0b1010).unwrap();
        assert_eq!(a.format_letter(l), "!M1,M2,!Warn,Alarm");
        let cube = a.parse_cube("!M1,M2,!Warn,Alarm", !0).unwrap();
        assert_eq!(a.letters_matching(&cube), vec![l]);
    }

    #[test]
    fn cube_errors() {
        let a = weather();
        assert!(matches!(a.parse_cube("Foo", !0), Err(LetterError::UnknownAtom(_))));
        assert!(matches!(
            a.parse_cube("Warn", a.atoms().input_mask()),
            Err(LetterError::WrongSide(_))
        ));
        assert!(matches!(a.parse_cube("M1,!M1", !0), Err(LetterError::Contradiction(_))));
        assert_eq!(a.parse_cube("*", !0).unwrap(), Cube::default());
    }
}
