//! Mealy machines, reward machines and partial strategies on sample trees.

use std::fmt::Write as _;

use num::{BigInt, BigRational, Zero};

use crate::alphabet::{Alphabet, Letter};
use crate::automata::UniversalCoBuchi;
use crate::safety::{cf_successor, initial_cf, Antichain};
use crate::sampling::{format_input_letter, parse_input_letter, SampleTree};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MachineError {
    #[error("machine has no transition from state {state} on input {input}")]
    Hole { state: usize, input: usize },
    #[error("strategy has no output at vertex {0}")]
    UndefinedVertex(usize),
    #[error("input word is not a branch of the sample tree")]
    NotABranch,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Mealy machine over input and output letter indices. A missing entry
/// makes it a pre-Mealy machine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MealyMachine {
    pub num_states: usize,
    pub initial: usize,
    /// `trans[m][input] = (next state, output)`.
    pub trans: Vec<Vec<Option<(usize, usize)>>>,
}

impl MealyMachine {
    pub fn new(num_states: usize, num_inputs: usize, initial: usize) -> Self {
        MealyMachine {
            num_states,
            initial,
            trans: vec![vec![None; num_inputs]; num_states],
        }
    }

    /// Single state always answering `output`.
    pub fn constant(num_inputs: usize, output: usize) -> Self {
        MealyMachine {
            num_states: 1,
            initial: 0,
            trans: vec![vec![Some((0, output)); num_inputs]],
        }
    }

    pub fn num_inputs(&self) -> usize {
        self.trans.first().map_or(0, |r| r.len())
    }

    pub fn is_complete(&self) -> bool {
        self.trans.iter().all(|row| row.iter().all(Option::is_some))
    }

    pub fn step(&self, m: usize, input: usize) -> Result<(usize, usize), MachineError> {
        self.trans[m][input].ok_or(MachineError::Hole { state: m, input })
    }
}

/// Interleaved word produced by the machine on an input sequence.
pub fn mealy_outcome(m: &MealyMachine, inputs: &[usize]) -> Result<Vec<Letter>, MachineError> {
    let mut state = m.initial;
    inputs
        .iter()
        .map(|&i| {
            let (next, o) = m.step(state, i)?;
            state = next;
            Ok(Letter::new(i, o))
        })
        .collect()
}

/// Deterministic transducer with integer rewards on its transitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewardMachine {
    pub num_states: usize,
    pub initial: usize,
    pub num_outputs: usize,
    /// `trans[s][letter index] = (next state, reward)`.
    pub trans: Vec<Vec<(usize, i64)>>,
}

impl RewardMachine {
    /// Single state paying `reward(letter)`.
    pub fn stateless(alphabet: &Alphabet, reward: impl Fn(Letter) -> i64) -> Self {
        let no = alphabet.num_outputs();
        RewardMachine {
            num_states: 1,
            initial: 0,
            num_outputs: no,
            trans: vec![(0..alphabet.num_letters())
                .map(|l| (0, reward(Letter::from_index(l, no))))
                .collect()],
        }
    }

    pub fn step(&self, s: usize, l: Letter) -> (usize, i64) {
        self.trans[s][l.index(self.num_outputs)]
    }

    /// Smallest and largest reward of any transition.
    pub fn bounds(&self) -> (i64, i64) {
        let all = self.trans.iter().flatten().map(|&(_, r)| r);
        let lo = all.clone().min().unwrap_or(0);
        let hi = all.max().unwrap_or(0);
        (lo, hi)
    }
}

/// Sum of the rewards of the transitions taken on the word.
pub fn total_reward(r: &RewardMachine, word: &[Letter]) -> i64 {
    let mut s = r.initial;
    let mut sum = 0;
    for &l in word {
        let (next, rew) = r.step(s, l);
        sum += rew;
        s = next;
    }
    sum
}

/// Output letter per nonroot vertex of a sample tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartialStrategy {
    pub choice: Vec<Option<usize>>,
}

impl PartialStrategy {
    pub fn empty(tree: &SampleTree) -> Self {
        PartialStrategy {
            choice: vec![None; tree.len()],
        }
    }

    /// Strategy from one output per vertex `1..len`.
    pub fn from_outputs(outputs: &[usize]) -> Self {
        let mut choice = vec![None];
        choice.extend(outputs.iter().map(|&o| Some(o)));
        PartialStrategy { choice }
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.choice.get(v).copied().flatten()
    }

    pub fn set(&mut self, v: usize, o: usize) {
        self.choice[v] = Some(o);
    }

    pub fn is_total(&self, tree: &SampleTree) -> bool {
        self.choice.len() == tree.len() && (1..tree.len()).all(|v| self.choice[v].is_some())
    }
}

/// Interleaving of a branch's inputs with the strategy's outputs.
pub fn strategy_outcome(
    lambda: &PartialStrategy,
    tree: &SampleTree,
    branch: &[usize],
) -> Result<Vec<Letter>, MachineError> {
    let leaf = tree.vertex_of(branch).ok_or(MachineError::NotABranch)?;
    if !tree.is_leaf(leaf) {
        return Err(MachineError::NotABranch);
    }
    tree.path_vertices(leaf)
        .into_iter()
        .map(|v| {
            let o = lambda.get(v).ok_or(MachineError::UndefinedVertex(v))?;
            Ok(Letter::new(tree.input(v).unwrap(), o))
        })
        .collect()
}

/// Expected total reward over the branches of the tree, exactly.
pub fn expected_reward(
    r: &RewardMachine,
    tree: &SampleTree,
    lambda: &PartialStrategy,
) -> Result<BigRational, MachineError> {
    let mut sum = BigRational::zero();
    for leaf in tree.leaves() {
        let branch = tree.path(leaf);
        let word = strategy_outcome(lambda, tree, &branch)?;
        let p = tree.branch_probability(&branch).expect("leaf path is a branch");
        sum += p * BigRational::from_integer(BigInt::from(total_reward(r, &word)));
    }
    Ok(sum)
}

/// `n` times the expected reward, as the sum over nonroot vertices of the
/// reward earned there weighted by the vertex count.
pub fn weighted_vertex_reward(
    r: &RewardMachine,
    tree: &SampleTree,
    lambda: &PartialStrategy,
) -> Result<i64, MachineError> {
    let mut rm_state = vec![r.initial; tree.len()];
    let mut sum = 0i64;
    for v in 1..tree.len() {
        let p = tree.parent(v).unwrap();
        let o = lambda.get(v).ok_or(MachineError::UndefinedVertex(v))?;
        let (next, rew) = r.step(rm_state[p], Letter::new(tree.input(v).unwrap(), o));
        rm_state[v] = next;
        sum += rew * tree.count(v) as i64;
    }
    Ok(sum)
}

/// Whether every counting function met along the annotated tree, starting
/// with the initial one, stays below the winning antichain.
pub fn check_partial_realizable(
    lambda: &PartialStrategy,
    tree: &SampleTree,
    ucw: &UniversalCoBuchi,
    k: u32,
    win: &Antichain,
) -> bool {
    let init = initial_cf(ucw, k);
    if !win.dominates(&init) {
        return false;
    }
    let mut cf = vec![None; tree.len()];
    cf[0] = Some(init);
    for v in 1..tree.len() {
        let Some(o) = lambda.get(v) else {
            return false;
        };
        let p = tree.parent(v).unwrap();
        let f = cf_successor(ucw, k, cf[p].as_ref().unwrap(), Letter::new(tree.input(v).unwrap(), o));
        if !win.dominates(&f) {
            return false;
        }
        cf[v] = Some(f);
    }
    true
}

fn strip(raw: &str) -> &str {
    raw.split('#').next().unwrap().trim()
}

fn header(line: &str, key: &str) -> Option<usize> {
    let rest = line.strip_prefix(key)?;
    rest.trim().parse().ok()
}

/// `state N`, `initial m`, then `m <input> -> m' / <output>` lines.
pub fn write_mealy(m: &MealyMachine, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "state {}", m.num_states);
    let _ = writeln!(out, "initial {}", m.initial);
    for (s, row) in m.trans.iter().enumerate() {
        for (i, t) in row.iter().enumerate() {
            if let Some((next, o)) = t {
                let _ = writeln!(
                    out,
                    "{s} {} -> {next} / {}",
                    format_input_letter(alphabet, i),
                    alphabet.format_output(*o)
                );
            }
        }
    }
    out
}

pub fn parse_mealy(text: &str, alphabet: &Alphabet) -> Result<MealyMachine, MachineError> {
    let mut machine: Option<MealyMachine> = None;
    let mut initial = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = strip(raw);
        if body.is_empty() {
            continue;
        }
        let perr = |message: String| MachineError::Parse { line, message };
        if let Some(n) = header(body, "state ") {
            machine = Some(MealyMachine::new(n, alphabet.num_inputs(), 0));
            continue;
        }
        if let Some(m) = header(body, "initial ") {
            initial = m;
            continue;
        }
        let m = machine
            .as_mut()
            .ok_or_else(|| perr("missing `state N` header".into()))?;
        let (lhs, rhs) = body
            .split_once("->")
            .ok_or_else(|| perr("expected `m <input> -> m' / <output>`".into()))?;
        let (src, input) = lhs
            .trim()
            .split_once(char::is_whitespace)
            .ok_or_else(|| perr("missing input letter".into()))?;
        let (dst, output) = rhs
            .split_once('/')
            .ok_or_else(|| perr("missing output letter".into()))?;
        let src: usize = src.parse().map_err(|_| perr(format!("bad state `{src}`")))?;
        let dst: usize = dst.trim().parse().map_err(|_| perr(format!("bad state `{}`", dst.trim())))?;
        if src >= m.num_states || dst >= m.num_states {
            return Err(perr("state out of range".into()));
        }
        let i = parse_input_letter(alphabet, input).map_err(|e| perr(e.to_string()))?;
        let o = alphabet
            .parse_output_valuation(output)
            .map_err(|e| perr(e.to_string()))?;
        m.trans[src][i] = Some((dst, o));
    }
    let mut m = machine.ok_or(MachineError::Parse {
        line: 0,
        message: "missing `state N` header".into(),
    })?;
    if initial >= m.num_states {
        return Err(MachineError::Parse {
            line: 0,
            message: "initial state out of range".into(),
        });
    }
    m.initial = initial;
    Ok(m)
}

// `*`, a cube, or `|`-separated alternatives (letters, cubes or temperatures)
fn parse_letter_set(
    alphabet: &Alphabet,
    text: &str,
    input_side: bool,
) -> Result<Vec<usize>, String> {
    let mut out = Vec::new();
    for alt in text.split('|') {
        let alt = alt.trim();
        if input_side {
            if let Ok(t) = alt.parse::<i64>() {
                let i = crate::sampling::temperature_input(alphabet, t)
                    .ok_or_else(|| format!("`{alt}` is not an input letter"))?;
                out.push(i);
                continue;
            }
        }
        let scope = if input_side {
            alphabet.atoms().input_mask()
        } else {
            alphabet.atoms().output_mask()
        };
        let cube = alphabet.parse_cube(alt, scope).map_err(|e| e.to_string())?;
        if input_side {
            out.extend(alphabet.inputs_matching(&cube));
        } else {
            out.extend(alphabet.outputs_matching(&cube));
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// Reward machine text: `state N`, `initial s`, then rules
/// `s <inputs> -> s' / <outputs> / reward`. The first matching rule wins and
/// every state and letter must be covered.
pub fn parse_reward_machine(text: &str, alphabet: &Alphabet) -> Result<RewardMachine, MachineError> {
    let no = alphabet.num_outputs();
    let nl = alphabet.num_letters();
    let mut table: Option<Vec<Vec<Option<(usize, i64)>>>> = None;
    let mut initial = 0;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = strip(raw);
        if body.is_empty() {
            continue;
        }
        let perr = |message: String| MachineError::Parse { line, message };
        if let Some(n) = header(body, "state ") {
            table = Some(vec![vec![None; nl]; n]);
            continue;
        }
        if let Some(s) = header(body, "initial ") {
            initial = s;
            continue;
        }
        let t = table
            .as_mut()
            .ok_or_else(|| perr("missing `state N` header".into()))?;
        let (lhs, rhs) = body
            .split_once("->")
            .ok_or_else(|| perr("expected `s <inputs> -> s' / <outputs> / reward`".into()))?;
        let (src, inputs) = lhs.trim().split_once(char::is_whitespace).unwrap_or((lhs.trim(), "*"));
        let parts: Vec<&str> = rhs.split('/').map(str::trim).collect();
        let [dst, outputs, reward] = parts.as_slice() else {
            return Err(perr("expected `s' / outputs / reward`".into()));
        };
        let src: usize = src.parse().map_err(|_| perr(format!("bad state `{src}`")))?;
        let dst: usize = dst.parse().map_err(|_| perr(format!("bad state `{dst}`")))?;
        let reward: i64 = reward.parse().map_err(|_| perr(format!("bad reward `{reward}`")))?;
        if src >= t.len() || dst >= t.len() {
            return Err(perr("state out of range".into()));
        }
        let ins = parse_letter_set(alphabet, inputs, true).map_err(perr)?;
        let outs = parse_letter_set(alphabet, outputs, false).map_err(perr)?;
        for &i in &ins {
            for &o in &outs {
                let cell = &mut t[src][Letter::new(i, o).index(no)];
                if cell.is_none() {
                    *cell = Some((dst, reward));
                }
            }
        }
    }
    let t = table.ok_or(MachineError::Parse {
        line: 0,
        message: "missing `state N` header".into(),
    })?;
    let mut trans = Vec::with_capacity(t.len());
    for (s, row) in t.into_iter().enumerate() {
        let mut out = Vec::with_capacity(nl);
        for (l, cell) in row.into_iter().enumerate() {
            out.push(cell.ok_or_else(|| MachineError::Parse {
                line: 0,
                message: format!(
                    "state {s} has no rule for letter {}",
                    alphabet.format_letter(Letter::from_index(l, no))
                ),
            })?);
        }
        trans.push(out);
    }
    if initial >= trans.len() {
        return Err(MachineError::Parse {
            line: 0,
            message: "initial state out of range".into(),
        });
    }
    Ok(RewardMachine {
        num_states: trans.len(),
        initial,
        num_outputs: no,
        trans,
    })
}

pub fn write_reward_machine(r: &RewardMachine, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "state {}", r.num_states);
    let _ = writeln!(out, "initial {}", r.initial);
    let no = alphabet.num_outputs();
    for (s, row) in r.trans.iter().enumerate() {
        for (l, &(next, rew)) in row.iter().enumerate() {
            let l = Letter::from_index(l, no);
            let _ = writeln!(
                out,
                "{s} {} -> {next} / {} / {rew}",
                alphabet.format_input(l.input),
                alphabet.format_output(l.output)
            );
        }
    }
    out
}
