//! Lasso membership via the product of automaton states with lasso
//! positions.
//!
//! Prefix positions are never on a cycle, so the prefix is handled by a
//! plain subset image and the cycle search runs on the loop positions only.

use std::collections::HashMap;

use super::UniversalCoBuchi;
use crate::alphabet::Alphabet;
use crate::ltl::LassoTrace;

fn letters_of(alphabet: &Alphabet, trace: &LassoTrace) -> (Vec<usize>, Vec<usize>) {
    let mask = alphabet.atoms().input_mask() | alphabet.atoms().output_mask();
    let no = alphabet.num_outputs();
    let conv = |v: &u64| {
        alphabet
            .letter_of(v & mask)
            .unwrap_or_else(|| panic!("valuation {v:#b} is not a letter of the alphabet"))
            .index(no)
    };
    (
        trace.prefix.iter().map(conv).collect(),
        trace.cycle.iter().map(conv).collect(),
    )
}

fn image(delta: &[Vec<Vec<usize>>], set: &[usize], letter: usize) -> Vec<usize> {
    let mut out: Vec<usize> = set
        .iter()
        .flat_map(|&q| delta[q][letter].iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

fn after_prefix(delta: &[Vec<Vec<usize>>], initial: &[usize], prefix: &[usize]) -> Vec<usize> {
    let mut cur: Vec<usize> = initial.to_vec();
    cur.sort_unstable();
    cur.dedup();
    for &l in prefix {
        cur = image(delta, &cur, l);
    }
    cur
}

/// Whether the product restricted to the cycle, entered at loop position 0
/// in any of `start`, has a reachable cycle through an accepting node.
fn loop_has_accepting_cycle(
    delta: &[Vec<Vec<usize>>],
    accepting: &[bool],
    start: &[usize],
    cycle: &[usize],
) -> bool {
    let l = cycle.len();
    let n = delta.len() * l;
    let id = |q: usize, j: usize| q * l + j;
    let succs = |v: usize| {
        let (q, j) = (v / l, v % l);
        let nj = (j + 1) % l;
        delta[q][cycle[j]].iter().map(move |&p| id(p, nj))
    };

    // iterative Tarjan
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut counter = 0;
    for &s in start {
        let root = id(s, 0);
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = Vec::new();
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        call.push((root, succs(root).collect(), 0));
        while let Some(frame) = call.last_mut() {
            let v = frame.0;
            if frame.2 < frame.1.len() {
                let w = frame.1[frame.2];
                frame.2 += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, succs(w).collect(), 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(parent) = call.last() {
                low[parent.0] = low[parent.0].min(low[v]);
            }
            if low[v] == index[v] {
                let mut members = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    members.push(w);
                    if w == v {
                        break;
                    }
                }
                let nontrivial = members.len() > 1 || succs(v).any(|w| w == v);
                if nontrivial && members.iter().any(|&w| accepting[w / l]) {
                    return true;
                }
            }
        }
    }
    false
}

pub(crate) fn has_buchi_run(
    alphabet: &Alphabet,
    delta: &[Vec<Vec<usize>>],
    initial: &[usize],
    accepting: &[bool],
    trace: &LassoTrace,
) -> bool {
    let (prefix, cycle) = letters_of(alphabet, trace);
    let start = after_prefix(delta, initial, &prefix);
    loop_has_accepting_cycle(delta, accepting, &start, &cycle)
}

/// Repeated lasso membership queries against one UCW. Answers are cached
/// on the state set reached after the prefix together with the cycle, which
/// is all the answer depends on.
pub struct LassoAcceptor<'a> {
    ucw: &'a UniversalCoBuchi,
    memo: HashMap<(Vec<usize>, Vec<usize>), bool>,
    fast: Option<Packed>,
}

// Small automata over small alphabets: state sets as bitmasks, letters from
// a dense table and cycles packed into one integer key.
struct Packed {
    mask: u64,
    letters: Vec<usize>,
    num_letters: u64,
    max_cycle: usize,
    initial: u64,
    delta: Vec<Vec<u64>>,
    memo: HashMap<(u64, u64), bool>,
}

impl Packed {
    fn new(ucw: &UniversalCoBuchi) -> Option<Self> {
        let a = &ucw.alphabet;
        let mask = a.atoms().input_mask() | a.atoms().output_mask();
        if ucw.num_states > 64 || mask >= 1 << 12 {
            return None;
        }
        let no = a.num_outputs();
        let letters = (0..=mask)
            .map(|v| a.letter_of(v).map_or(usize::MAX, |l| l.index(no)))
            .collect();
        let bits = |qs: &[usize]| qs.iter().fold(0u64, |b, &q| b | 1 << q);
        let num_letters = a.num_letters() as u64 + 1;
        let mut max_cycle = 0;
        while num_letters.checked_pow(max_cycle as u32 + 1).is_some_and(|p| p < 1 << 62) {
            max_cycle += 1;
        }
        Some(Packed {
            mask,
            letters,
            num_letters,
            max_cycle,
            initial: bits(&ucw.initial),
            delta: ucw.delta.iter().map(|row| row.iter().map(|s| bits(s)).collect()).collect(),
            memo: HashMap::new(),
        })
    }

    fn letter(&self, v: u64) -> usize {
        let l = self.letters[(v & self.mask) as usize];
        assert!(l != usize::MAX, "valuation {v:#b} is not a letter of the alphabet");
        l
    }

    fn accepts(&mut self, ucw: &UniversalCoBuchi, trace: &LassoTrace) -> Option<bool> {
        if trace.cycle.len() > self.max_cycle {
            return None;
        }
        let mut cur = self.initial;
        for &v in &trace.prefix {
            let l = self.letter(v);
            let mut next = 0;
            let mut rest = cur;
            while rest != 0 {
                let q = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                next |= self.delta[q][l];
            }
            cur = next;
        }
        let code = trace
            .cycle
            .iter()
            .fold(0u64, |c, &v| c * self.num_letters + self.letter(v) as u64 + 1);
        if let Some(&hit) = self.memo.get(&(cur, code)) {
            return Some(hit);
        }
        let start: Vec<usize> = (0..64).filter(|&q| cur >> q & 1 == 1).collect();
        let cycle: Vec<usize> = trace.cycle.iter().map(|&v| self.letter(v)).collect();
        let answer = !loop_has_accepting_cycle(&ucw.delta, &ucw.rejecting, &start, &cycle);
        self.memo.insert((cur, code), answer);
        Some(answer)
    }
}

impl<'a> LassoAcceptor<'a> {
    pub fn new(ucw: &'a UniversalCoBuchi) -> Self {
        LassoAcceptor {
            ucw,
            memo: HashMap::new(),
            fast: Packed::new(ucw),
        }
    }

    pub fn accepts(&mut self, trace: &LassoTrace) -> bool {
        let ucw = self.ucw;
        if let Some(hit) = self.fast.as_mut().and_then(|p| p.accepts(ucw, trace)) {
            return hit;
        }
        let (prefix, cycle) = letters_of(&ucw.alphabet, trace);
        let start = after_prefix(&ucw.delta, &ucw.initial, &prefix);
        *self.memo.entry((start, cycle)).or_insert_with_key(|(start, cycle)| {
            !loop_has_accepting_cycle(&ucw.delta, &ucw.rejecting, start, cycle)
        })
    }
}
