//! Büchi and universal co-Büchi automata over the letters of an [`Alphabet`].
//!
//! Transition tables are indexed `delta[state][letter]`, where the letter
//! index is [`Letter::index`] for the automaton's alphabet.

mod lasso;
mod tableau;

use std::fmt::Write as _;

pub use lasso::LassoAcceptor;
pub use tableau::{ltl_to_nbw, ltl_to_nbw_with_cap, DEFAULT_STATE_CAP};

use crate::alphabet::{Alphabet, Letter};
use crate::ltl::{to_nnf, Ltl, LassoTrace};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum AutomatonError {
    #[error("automaton construction exceeded the cap of {cap} states")]
    TooLarge { cap: usize },
    #[error("formula is not in negation normal form")]
    NotNnf,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Nondeterministic Büchi automaton. Empty successor sets are allowed and
/// mean the run dies.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nbw {
    pub alphabet: Alphabet,
    pub num_states: usize,
    pub initial: Vec<usize>,
    pub accepting: Vec<bool>,
    pub delta: Vec<Vec<Vec<usize>>>,
}

/// Universal co-Büchi automaton. Every successor set is nonempty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniversalCoBuchi {
    pub alphabet: Alphabet,
    pub num_states: usize,
    pub initial: Vec<usize>,
    pub rejecting: Vec<bool>,
    pub delta: Vec<Vec<Vec<usize>>>,
}

impl Nbw {
    pub fn successors(&self, q: usize, l: Letter) -> &[usize] {
        &self.delta[q][l.index(self.alphabet.num_outputs())]
    }

    /// Whether some run on the lasso word visits an accepting state
    /// infinitely often.
    pub fn accepts_lasso(&self, trace: &LassoTrace) -> bool {
        lasso::has_buchi_run(
            &self.alphabet,
            &self.delta,
            &self.initial,
            &self.accepting,
            trace,
        )
    }
}

impl UniversalCoBuchi {
    pub fn num_letters(&self) -> usize {
        self.alphabet.num_letters()
    }

    pub fn successors(&self, q: usize, l: Letter) -> &[usize] {
        &self.delta[q][l.index(self.alphabet.num_outputs())]
    }

    pub fn is_rejecting(&self, q: usize) -> bool {
        self.rejecting[q]
    }

    /// Structural checks: table shape, state bounds, nonempty successors.
    pub fn validate(&self) -> Result<(), String> {
        let nl = self.alphabet.num_letters();
        if self.rejecting.len() != self.num_states || self.delta.len() != self.num_states {
            return Err("table sizes do not match the state count".into());
        }
        if self.initial.iter().any(|&q| q >= self.num_states) {
            return Err("initial state out of range".into());
        }
        for (q, row) in self.delta.iter().enumerate() {
            if row.len() != nl {
                return Err(format!("state {q} has {} letters, expected {nl}", row.len()));
            }
            for (l, succ) in row.iter().enumerate() {
                if succ.is_empty() {
                    return Err(format!("state {q} has no successor on letter {l}"));
                }
                if succ.iter().any(|&p| p >= self.num_states) {
                    return Err(format!("state {q} letter {l}: successor out of range"));
                }
            }
        }
        Ok(())
    }
}

/// Automaton with the same structure read with universal branching and
/// co-Büchi acceptance; it accepts exactly the words the NBW rejects. Dead
/// ends are routed to a fresh non-final sink.
pub fn dualize(nbw: &Nbw) -> UniversalCoBuchi {
    let nl = nbw.alphabet.num_letters();
    let needs_sink = nbw.initial.is_empty()
        || nbw
            .delta
            .iter()
            .any(|row| row.iter().any(|succ| succ.is_empty()));
    let mut delta = nbw.delta.clone();
    let mut rejecting = nbw.accepting.clone();
    let mut initial = nbw.initial.clone();
    let mut num_states = nbw.num_states;
    if needs_sink {
        let sink = num_states;
        num_states += 1;
        for row in &mut delta {
            for succ in row.iter_mut() {
                if succ.is_empty() {
                    succ.push(sink);
                }
            }
        }
        delta.push(vec![vec![sink]; nl]);
        rejecting.push(false);
        if initial.is_empty() {
            initial.push(sink);
        }
    }
    UniversalCoBuchi {
        alphabet: nbw.alphabet.clone(),
        num_states,
        initial,
        rejecting,
        delta,
    }
}

/// UCW whose language is the set of words satisfying `formula`.
pub fn ucw_for_formula(formula: &Ltl, alphabet: &Alphabet) -> Result<UniversalCoBuchi, AutomatonError> {
    let negated = to_nnf(&Ltl::not(formula.clone()));
    Ok(dualize(&ltl_to_nbw(&negated, alphabet)?))
}

/// Whether every run on the lasso word visits a final state only finitely
/// often. Panics if some position of the trace is not a letter of the
/// automaton's alphabet.
pub fn ucw_accepts_lasso(ucw: &UniversalCoBuchi, trace: &LassoTrace) -> bool {
    !lasso::has_buchi_run(
        &ucw.alphabet,
        &ucw.delta,
        &ucw.initial,
        &ucw.rejecting,
        trace,
    )
}

fn join(items: impl Iterator<Item = usize>) -> String {
    items.map(|q| q.to_string()).collect::<Vec<_>>().join(" ")
}

/// Text form: `states N`, `initial ...`, `final ...`, then one
/// `src <letter> dst...` line per state and letter.
pub fn write_ucw(ucw: &UniversalCoBuchi) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "states {}", ucw.num_states);
    let _ = writeln!(out, "initial {}", join(ucw.initial.iter().copied()));
    let finals = (0..ucw.num_states).filter(|&q| ucw.rejecting[q]);
    let _ = writeln!(out, "final {}", join(finals));
    let no = ucw.alphabet.num_outputs();
    for (q, row) in ucw.delta.iter().enumerate() {
        for (li, succ) in row.iter().enumerate() {
            let letter = ucw.alphabet.format_letter(Letter::from_index(li, no));
            let _ = writeln!(out, "{q} {letter} {}", join(succ.iter().copied()));
        }
    }
    out
}

pub fn parse_ucw(text: &str, alphabet: &Alphabet) -> Result<UniversalCoBuchi, AutomatonError> {
    let err = |line: usize, message: String| AutomatonError::Parse { line, message };
    let mut num_states = None;
    let mut initial = Vec::new();
    let mut finals = Vec::new();
    let mut delta: Vec<Vec<Vec<usize>>> = Vec::new();
    let nl = alphabet.num_letters();
    let no = alphabet.num_outputs();
    let parse_list = |rest: &str, line: usize| -> Result<Vec<usize>, AutomatonError> {
        rest.split_whitespace()
            .map(|t| t.parse().map_err(|_| err(line, format!("bad state `{t}`"))))
            .collect()
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let (head, rest) = body.split_once(char::is_whitespace).unwrap_or((body, ""));
        match head {
            "states" => {
                let n: usize = rest
                    .trim()
                    .parse()
                    .map_err(|_| err(line, "bad state count".into()))?;
                num_states = Some(n);
                delta = vec![vec![Vec::new(); nl]; n];
            }
            "initial" => initial = parse_list(rest, line)?,
            "final" => finals = parse_list(rest, line)?,
            _ => {
                let n = num_states.ok_or_else(|| err(line, "transition before `states`".into()))?;
                let src: usize = head
                    .parse()
                    .map_err(|_| err(line, format!("bad state `{head}`")))?;
                let rest = rest.trim();
                let (letter, dsts) = rest.split_once(char::is_whitespace).unwrap_or((rest, ""));
                let cube = alphabet
                    .parse_cube(letter, !0)
                    .map_err(|e| err(line, e.to_string()))?;
                let l = alphabet
                    .letter_of(cube.pos)
                    .ok_or_else(|| err(line, format!("`{letter}` is not a letter")))?;
                let dsts = parse_list(dsts, line)?;
                if src >= n || dsts.iter().any(|&d| d >= n) {
                    return Err(err(line, "state out of range".into()));
                }
                let cell = &mut delta[src][l.index(no)];
                cell.extend(dsts);
                cell.sort_unstable();
                cell.dedup();
            }
        }
    }
    let num_states = num_states.ok_or_else(|| err(0, "missing `states` header".into()))?;
    let mut rejecting = vec![false; num_states];
    for &q in &finals {
        if q >= num_states {
            return Err(err(0, "final state out of range".into()));
        }
        rejecting[q] = true;
    }
    let ucw = UniversalCoBuchi {
        alphabet: alphabet.clone(),
        num_states,
        initial,
        rejecting,
        delta,
    };
    ucw.validate().map_err(|m| err(0, m))?;
    Ok(ucw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltl::{evaluate_on_lasso, parse_ltl, AtomTable};

    fn alphabet() -> Alphabet {
        Alphabet::full(AtomTable::new(["p"], ["q"]).unwrap())
    }

    fn lassos() -> Vec<LassoTrace> {
        let mut out = Vec::new();
        for plen in 0..=3u32 {
            for llen in 1..=3u32 {
                for code in 0..4u64.pow(plen + llen) {
                    let word: Vec<u64> = (0..plen + llen).map(|i| code >> (2 * i) & 3).collect();
                    out.push(LassoTrace::new(
                        word[..plen as usize].to_vec(),
                        word[plen as usize..].to_vec(),
                    ));
                }
            }
        }
        out
    }

    fn check_formula(text: &str) {
        let a = alphabet();
        let f = parse_ltl(text, a.atoms()).unwrap();
        let nnf = to_nnf(&f);
        let nbw = ltl_to_nbw(&nnf, &a).unwrap();
        let ucw = ucw_for_formula(&f, &a).unwrap();
        ucw.validate().unwrap();
        for t in lassos() {
            let truth = evaluate_on_lasso(&f, &t);
            assert_eq!(nbw.accepts_lasso(&t), truth, "nbw {text} on {t:?}");
            assert_eq!(ucw_accepts_lasso(&ucw, &t), truth, "ucw {text} on {t:?}");
        }
    }

    #[test]
    fn small_formulas_agree_with_semantics() {
        for f in [
            "true",
            "false",
            "F p",
            "X p",
            "G p",
            "G F p",
            "F G p",
            "p U q",
            "p R q",
            "G (p -> X q)",
            "(p U q) U (X p)",
            "G F p & G F q",
            "!(p U (G q))",
        ] {
            check_formula(f);
        }
    }

    #[test]
    fn true_accepts_everything() {
        let a = alphabet();
        let nbw = ltl_to_nbw(&Ltl::True, &a).unwrap();
        // the initial state is kept out of the accepting set
        assert_eq!(nbw.num_states, 2);
        assert!(!nbw.accepting[0] && nbw.accepting[1]);
        assert!(lassos().iter().all(|t| nbw.accepts_lasso(t)));
        let ucw = dualize(&ltl_to_nbw(&Ltl::False, &a).unwrap());
        assert!(lassos().iter().all(|t| ucw_accepts_lasso(&ucw, t)));
    }

    #[test]
    fn cap_is_enforced() {
        let a = alphabet();
        let f = to_nnf(&parse_ltl("G F p & G F q & F G (p | q)", a.atoms()).unwrap());
        assert_eq!(
            ltl_to_nbw_with_cap(&f, &a, 2),
            Err(AutomatonError::TooLarge { cap: 2 })
        );
        assert_eq!(ltl_to_nbw(&parse_ltl("!G p", a.atoms()).unwrap(), &a), Err(AutomatonError::NotNnf));
    }

    #[test]
    fn text_round_trip() {
        let a = alphabet();
        let ucw = ucw_for_formula(&parse_ltl("G (p -> X q)", a.atoms()).unwrap(), &a).unwrap();
        let text = write_ucw(&ucw);
        assert!(text.starts_with(&format!("states {}\n", ucw.num_states)));
        assert_eq!(parse_ucw(&text, &a).unwrap(), ucw);
    }

    #[test]
    fn dual_sink_for_dead_runs() {
        let a = alphabet();
        // p dies on letters without p
        let nbw = ltl_to_nbw(&Ltl::atom(0), &a).unwrap();
        let ucw = dualize(&nbw);
        assert_eq!(ucw.num_states, nbw.num_states + 1);
        let sink = ucw.num_states - 1;
        assert!(!ucw.rejecting[sink]);
        assert!(ucw.delta[sink].iter().all(|s| s == &vec![sink]));
    }
}
