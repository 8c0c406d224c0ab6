//! Tableau translation from NNF LTL to a state-based Büchi automaton.
//!
//! Tableau states are sets of obligations. Expanding a state yields covers:
//! a literal cube the current letter must match, the obligations for the
//! next step and the set of until-formulas whose eventuality was postponed.
//! Transitions that do not postpone an until-formula belong to its
//! acceptance set; the generalized condition is then degeneralized with a
//! counter.

use std::collections::{HashMap, VecDeque};

use super::{AutomatonError, Nbw};
use crate::alphabet::{Alphabet, Cube};
use crate::ltl::Ltl;

pub const DEFAULT_STATE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    True,
    False,
    Lit(usize, bool),
    And(u32, u32),
    Or(u32, u32),
    Next(u32),
    Until(u32, u32),
    Release(u32, u32),
}

#[derive(Default)]
struct Closure {
    nodes: Vec<Node>,
    ids: HashMap<Node, u32>,
    // bit index of each until node
    until_bit: HashMap<u32, u32>,
}

impl Closure {
    fn intern(&mut self, f: &Ltl) -> Result<u32, AutomatonError> {
        let node = match f {
            Ltl::True => Node::True,
            Ltl::False => Node::False,
            Ltl::Atom(a) => Node::Lit(*a, true),
            Ltl::Not(a) => match **a {
                Ltl::Atom(i) => Node::Lit(i, false),
                _ => return Err(AutomatonError::NotNnf),
            },
            Ltl::And(a, b) => Node::And(self.intern(a)?, self.intern(b)?),
            Ltl::Or(a, b) => Node::Or(self.intern(a)?, self.intern(b)?),
            Ltl::Next(a) => Node::Next(self.intern(a)?),
            Ltl::Until(a, b) => Node::Until(self.intern(a)?, self.intern(b)?),
            Ltl::Release(a, b) => Node::Release(self.intern(a)?, self.intern(b)?),
            Ltl::Globally(_) | Ltl::Finally(_) => return Err(AutomatonError::NotNnf),
        };
        if let Some(&id) = self.ids.get(&node) {
            return Ok(id);
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.ids.insert(node, id);
        if let Node::Until(..) = node {
            let bit = self.until_bit.len() as u32;
            if bit >= 64 {
                return Err(AutomatonError::TooLarge { cap: 64 });
            }
            self.until_bit.insert(id, bit);
        }
        Ok(id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Cover {
    cube: Cube,
    next: Vec<u32>,
    postponed: u64,
}

#[derive(Clone)]
struct Partial {
    todo: Vec<u32>,
    done: Vec<u32>,
    cube: Cube,
    next: Vec<u32>,
    postponed: u64,
}

fn expand(cl: &Closure, obligations: &[u32]) -> Vec<Cover> {
    let mut out = Vec::new();
    let start = Partial {
        todo: obligations.to_vec(),
        done: Vec::new(),
        cube: Cube::default(),
        next: Vec::new(),
        postponed: 0,
    };
    expand_rec(cl, start, &mut out);
    out.dedup();
    out
}

fn expand_rec(cl: &Closure, mut p: Partial, out: &mut Vec<Cover>) {
    while let Some(id) = p.todo.pop() {
        if p.done.contains(&id) {
            continue;
        }
        p.done.push(id);
        match cl.nodes[id as usize] {
            Node::True => {}
            Node::False => return,
            Node::Lit(a, positive) => {
                let bit = 1u64 << a;
                if positive {
                    p.cube.pos |= bit;
                } else {
                    p.cube.neg |= bit;
                }
                if p.cube.pos & p.cube.neg != 0 {
                    return;
                }
            }
            Node::And(a, b) => {
                p.todo.push(b);
                p.todo.push(a);
            }
            Node::Next(a) => {
                if !p.next.contains(&a) {
                    p.next.push(a);
                }
            }
            Node::Or(a, b) => {
                let mut left = p.clone();
                left.todo.push(a);
                expand_rec(cl, left, out);
                p.todo.push(b);
            }
            Node::Until(a, b) => {
                let mut now = p.clone();
                now.todo.push(b);
                expand_rec(cl, now, out);
                p.todo.push(a);
                p.postponed |= 1 << cl.until_bit[&id];
                if !p.next.contains(&id) {
                    p.next.push(id);
                }
            }
            Node::Release(a, b) => {
                let mut now = p.clone();
                now.todo.push(b);
                now.todo.push(a);
                expand_rec(cl, now, out);
                p.todo.push(b);
                if !p.next.contains(&id) {
                    p.next.push(id);
                }
            }
        }
    }
    p.next.sort_unstable();
    let cover = Cover {
        cube: p.cube,
        next: p.next,
        postponed: p.postponed,
    };
    if !out.contains(&cover) {
        out.push(cover);
    }
}

/// Büchi automaton for an NNF formula with the default state cap.
pub fn ltl_to_nbw(formula: &Ltl, alphabet: &Alphabet) -> Result<Nbw, AutomatonError> {
    ltl_to_nbw_with_cap(formula, alphabet, DEFAULT_STATE_CAP)
}

pub fn ltl_to_nbw_with_cap(
    formula: &Ltl,
    alphabet: &Alphabet,
    cap: usize,
) -> Result<Nbw, AutomatonError> {
    if let Some(a) = formula.max_atom() {
        assert!(a < alphabet.atoms().len(), "formula uses an atom outside the alphabet");
    }
    let mut cl = Closure::default();
    let root = cl.intern(formula)?;
    // with no until-formula every transition accepts; one counter slot still
    // keeps the initial state out of the accepting set
    let k = (cl.until_bit.len() as u32).max(1);
    let full: u64 = if k == 64 { !0 } else { (1u64 << k) - 1 };

    let letters: Vec<_> = alphabet.letters().map(|l| alphabet.valuation(l)).collect();
    let mut index: HashMap<(Vec<u32>, u32), usize> = HashMap::new();
    let mut states: Vec<(Vec<u32>, u32)> = Vec::new();
    let mut covers_of: HashMap<Vec<u32>, Vec<Cover>> = HashMap::new();
    let mut queue = VecDeque::new();

    // `true` carries no obligation, so it shares the state of the empty set
    let init_obl = if cl.nodes[root as usize] == Node::True { vec![] } else { vec![root] };
    let init = (init_obl, 0u32);
    index.insert(init.clone(), 0);
    states.push(init);
    queue.push_back(0usize);
    let mut delta: Vec<Vec<Vec<usize>>> = Vec::new();

    while let Some(s) = queue.pop_front() {
        let (obl, counter) = states[s].clone();
        let covers = covers_of
            .entry(obl.clone())
            .or_insert_with(|| expand(&cl, &obl))
            .clone();
        let mut row = vec![Vec::new(); letters.len()];
        for c in &covers {
            let accepted = full & !c.postponed;
            let mut j = if counter == k { 0 } else { counter };
            while j < k && accepted >> j & 1 == 1 {
                j += 1;
            }
            let key = (c.next.clone(), j);
            let target = match index.get(&key) {
                Some(&t) => t,
                None => {
                    let t = states.len();
                    if t >= cap {
                        return Err(AutomatonError::TooLarge { cap });
                    }
                    index.insert(key.clone(), t);
                    states.push(key);
                    queue.push_back(t);
                    t
                }
            };
            for (li, &v) in letters.iter().enumerate() {
                if c.cube.matches(v) && !row[li].contains(&target) {
                    row[li].push(target);
                }
            }
        }
        for succ in &mut row {
            succ.sort_unstable();
        }
        if delta.len() <= s {
            delta.resize(s + 1, Vec::new());
        }
        delta[s] = row;
    }
    delta.resize(states.len(), vec![Vec::new(); letters.len()]);
    let accepting = states.iter().map(|(_, c)| *c == k).collect();
    Ok(Nbw {
        alphabet: alphabet.clone(),
        num_states: states.len(),
        initial: vec![0],
        accepting,
        delta,
    })
}
