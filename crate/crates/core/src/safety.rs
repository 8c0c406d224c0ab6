//! Bounded co-Büchi determinization by counting functions and the antichain
//! solution of the resulting safety game.
//!
//! A counting function maps each automaton state to `-1` (no run is there)
//! or to the largest number of final-state visits of a run prefix ending
//! there, saturated at `K + 1`. The system wins as long as no state reaches
//! `K + 1`. Winning sets are downward closed and are kept as their maximal
//! elements.

use std::fmt;

use crate::alphabet::Letter;
use crate::automata::UniversalCoBuchi;

pub const DEFAULT_K_MAX: u32 = 8;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SafetyError {
    #[error("counting function over {got} states, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CountingFunction {
    pub values: Vec<i8>,
    pub k: u32,
}

impl CountingFunction {
    pub fn constant(num_states: usize, value: i8, k: u32) -> Self {
        CountingFunction {
            values: vec![value; num_states],
            k,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, q: usize) -> i8 {
        self.values[q]
    }

    pub fn leq(&self, other: &CountingFunction) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }

    pub fn has_overflow(&self) -> bool {
        let top = self.k as i8 + 1;
        self.values.iter().any(|&v| v >= top)
    }

    pub fn meet(&self, other: &CountingFunction) -> CountingFunction {
        CountingFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a.min(b))
                .collect(),
            k: self.k,
        }
    }
}

impl fmt::Display for CountingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (q, v) in self.values.iter().enumerate() {
            if q > 0 {
                write!(f, " ")?;
            }
            write!(f, "q{q}:{v}")?;
        }
        Ok(())
    }
}

/// Set of pairwise incomparable counting functions, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Antichain {
    elements: Vec<CountingFunction>,
}

impl Antichain {
    pub fn empty() -> Self {
        Antichain::default()
    }

    /// Maximal elements of the given functions.
    pub fn from_elements(items: Vec<CountingFunction>) -> Self {
        let mut items = items;
        items.sort();
        items.dedup();
        let mut keep = Vec::with_capacity(items.len());
        for (i, f) in items.iter().enumerate() {
            let dominated = items
                .iter()
                .enumerate()
                .any(|(j, g)| j != i && f.leq(g));
            if !dominated {
                keep.push(f.clone());
            }
        }
        Antichain { elements: keep }
    }

    pub fn elements(&self) -> &[CountingFunction] {
        &self.elements
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    /// Membership in the downward closure.
    pub fn dominates(&self, f: &CountingFunction) -> bool {
        self.elements.iter().any(|g| f.leq(g))
    }

    /// Antichain of the union of the two downward closures.
    pub fn union(&self, other: &Antichain) -> Antichain {
        let mut all = self.elements.clone();
        all.extend(other.elements.iter().cloned());
        Antichain::from_elements(all)
    }

    /// Antichain of the intersection of the two downward closures.
    pub fn intersect(&self, other: &Antichain) -> Antichain {
        let mut all = Vec::with_capacity(self.len() * other.len());
        for a in &self.elements {
            for b in &other.elements {
                all.push(a.meet(b));
            }
        }
        Antichain::from_elements(all)
    }

    /// One counting function per line in `q0:v q1:v ...` form.
    pub fn dump(&self) -> String {
        self.elements.iter().map(|f| format!("{f}\n")).collect()
    }

    pub fn parse_dump(text: &str, k: u32) -> Result<Antichain, SafetyError> {
        let mut items = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = ln + 1;
            let body = raw.trim();
            if body.is_empty() {
                continue;
            }
            let mut values = Vec::new();
            for (expected, tok) in body.split_whitespace().enumerate() {
                let bad = || SafetyError::Parse {
                    line,
                    message: format!("bad entry `{tok}`"),
                };
                let (q, v) = tok.split_once(':').ok_or_else(bad)?;
                let q: usize = q.strip_prefix('q').ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if q != expected {
                    return Err(bad());
                }
                let v: i8 = v.parse().map_err(|_| bad())?;
                if v < -1 || v as i64 > k as i64 + 1 {
                    return Err(bad());
                }
                values.push(v);
            }
            items.push(CountingFunction { values, k });
        }
        Ok(Antichain::from_elements(items))
    }
}

pub fn initial_cf(ucw: &UniversalCoBuchi, k: u32) -> CountingFunction {
    let mut f = CountingFunction::constant(ucw.num_states, -1, k);
    for &q in &ucw.initial {
        f.values[q] = if ucw.rejecting[q] { 1 } else { 0 };
    }
    f.values.iter_mut().for_each(|v| *v = (*v).min(k as i8 + 1));
    f
}

pub fn cf_successor(
    ucw: &UniversalCoBuchi,
    k: u32,
    f: &CountingFunction,
    letter: Letter,
) -> CountingFunction {
    cf_successor_index(ucw, k, f, letter.index(ucw.alphabet.num_outputs()))
}

/// Successor on a dense letter index.
pub fn cf_successor_index(
    ucw: &UniversalCoBuchi,
    k: u32,
    f: &CountingFunction,
    letter: usize,
) -> CountingFunction {
    let top = k as i8 + 1;
    let mut out = vec![-1i8; ucw.num_states];
    for (p, &v) in f.values.iter().enumerate() {
        if v < 0 {
            continue;
        }
        for &q in &ucw.delta[p][letter] {
            let c = (v + i8::from(ucw.rejecting[q])).min(top);
            if c > out[q] {
                out[q] = c;
            }
        }
    }
    CountingFunction { values: out, k }
}

/// Largest `f` whose successor on `letter` lies below `g`, assuming `g` has
/// no overflow.
fn pre(ucw: &UniversalCoBuchi, k: u32, g: &CountingFunction, letter: usize) -> CountingFunction {
    let values = (0..ucw.num_states)
        .map(|p| {
            let m = ucw.delta[p][letter]
                .iter()
                .map(|&q| g.values[q] - i8::from(ucw.rejecting[q]))
                .min()
                .unwrap_or(k as i8);
            if m < 0 {
                -1
            } else {
                m.min(k as i8)
            }
        })
        .collect();
    CountingFunction { values, k }
}

fn controllable_pre(ucw: &UniversalCoBuchi, k: u32, win: &Antichain) -> Antichain {
    let no = ucw.alphabet.num_outputs();
    let mut acc: Option<Antichain> = None;
    for i in 0..ucw.alphabet.num_inputs() {
        let mut some_output = Vec::new();
        for o in 0..no {
            let l = Letter::new(i, o).index(no);
            for g in win.elements() {
                some_output.push(pre(ucw, k, g, l));
            }
        }
        let branch = Antichain::from_elements(some_output);
        acc = Some(match acc {
            None => branch,
            Some(a) => a.intersect(&branch),
        });
        if acc.as_ref().is_some_and(|a| a.is_empty()) {
            break;
        }
    }
    acc.unwrap_or_else(|| win.clone())
}

/// Maximal elements of the system's winning region in the safety game
/// "never reach `K + 1`". Empty when no counting function wins.
///
/// The all-inactive function trivially wins but is unreachable whenever the
/// automaton has an initial state, since successor sets are nonempty. In that
/// case it is not reported, so an unrealizable automaton yields the empty
/// antichain.
pub fn solve_safety_game(ucw: &UniversalCoBuchi, k: u32) -> Antichain {
    let mut win = Antichain::from_elements(vec![CountingFunction::constant(
        ucw.num_states,
        k as i8,
        k,
    )]);
    loop {
        let next = win.intersect(&controllable_pre(ucw, k, &win));
        if next == win {
            break;
        }
        win = next;
    }
    let bottom = CountingFunction::constant(ucw.num_states, -1, k);
    if !ucw.initial.is_empty() && win.elements() == [bottom] {
        return Antichain::empty();
    }
    win
}

pub fn is_winning(f: &CountingFunction, win: &Antichain) -> Result<bool, SafetyError> {
    if let Some(g) = win.elements().first() {
        if g.len() != f.len() {
            return Err(SafetyError::DimensionMismatch {
                expected: g.len(),
                got: f.len(),
            });
        }
    }
    Ok(win.dominates(f))
}

/// Smallest `K <= k_max` at which the initial counting function wins.
pub fn find_minimal_k(ucw: &UniversalCoBuchi, k_max: u32) -> Option<(u32, Antichain)> {
    (0..=k_max).find_map(|k| {
        let win = solve_safety_game(ucw, k);
        win.dominates(&initial_cf(ucw, k)).then_some((k, win))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::Alphabet;
    use crate::automata::ucw_for_formula;
    use crate::ltl::{parse_ltl, AtomTable};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn io() -> Alphabet {
        Alphabet::full(AtomTable::new(["i"], ["o"]).unwrap())
    }

    fn ucw(text: &str) -> UniversalCoBuchi {
        let a = io();
        ucw_for_formula(&parse_ltl(text, a.atoms()).unwrap(), &a).unwrap()
    }

    // max over all run prefixes on a single letter, computed path by path
    fn brute_successor(u: &UniversalCoBuchi, k: u32, f: &CountingFunction, l: usize) -> Vec<i8> {
        (0..u.num_states)
            .map(|q| {
                let mut best = -1i8;
                for p in 0..u.num_states {
                    if f.values[p] >= 0 && u.delta[p][l].contains(&q) {
                        let c = f.values[p] as i32 + i32::from(u.rejecting[q]);
                        best = best.max(c.min(k as i32 + 1) as i8);
                    }
                }
                best
            })
            .collect()
    }

    #[test]
    fn successor_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = io();
        for _ in 0..200 {
            let n = rng.gen_range(1..=4);
            let u = UniversalCoBuchi {
                alphabet: a.clone(),
                num_states: n,
                initial: vec![0],
                rejecting: (0..n).map(|_| rng.gen_bool(0.5)).collect(),
                delta: (0..n)
                    .map(|_| {
                        (0..4)
                            .map(|_| {
                                let mut s: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.4)).collect();
                                if s.is_empty() {
                                    s.push(0);
                                }
                                s
                            })
                            .collect()
                    })
                    .collect(),
            };
            let k = rng.gen_range(0..3);
            let f = CountingFunction {
                values: (0..n).map(|_| rng.gen_range(-1..=k as i8 + 1)).collect(),
                k,
            };
            let l = rng.gen_range(0..4);
            assert_eq!(cf_successor_index(&u, k, &f, l).values, brute_successor(&u, k, &f, l));
        }
        let u = ucw("G o");
        let dead = CountingFunction::constant(u.num_states, -1, 1);
        assert_eq!(cf_successor_index(&u, 1, &dead, 0), dead);
    }

    #[test]
    fn realizability_examples() {
        assert_eq!(find_minimal_k(&ucw("G o"), 8).map(|r| r.0), Some(0));
        assert_eq!(find_minimal_k(&ucw("G (o <-> i)"), 8).map(|r| r.0), Some(0));
        assert!(find_minimal_k(&ucw("G (o <-> X i)"), 4).is_none());
        assert!(find_minimal_k(&ucw("true"), 0).is_some());
        assert!(solve_safety_game(&ucw("G (o & !o)"), 2).is_empty());
        assert_eq!(find_minimal_k(&ucw("G F o"), 2).map(|r| r.0), Some(0));
    }

    #[test]
    fn dump_round_trip() {
        let u = ucw("G (i -> X o)");
        let (k, win) = find_minimal_k(&u, 4).unwrap();
        assert_eq!(Antichain::parse_dump(&win.dump(), k).unwrap(), win);
        let f = CountingFunction {
            values: vec![0, -1, 2],
            k: 2,
        };
        assert_eq!(f.to_string(), "q0:0 q1:-1 q2:2");
        assert!(Antichain::parse_dump("q0:0 q2:1", 2).is_err());
    }

    #[test]
    fn dimension_mismatch() {
        let w = Antichain::from_elements(vec![CountingFunction::constant(3, 0, 0)]);
        assert!(is_winning(&CountingFunction::constant(2, 0, 0), &w).is_err());
        assert_eq!(is_winning(&CountingFunction::constant(3, -1, 0), &w), Ok(true));
        assert!(!Antichain::empty().dominates(&CountingFunction::constant(3, -1, 0)));
    }

    #[test]
    fn antichain_keeps_maximal() {
        let cf = |v: Vec<i8>| CountingFunction { values: v, k: 2 };
        let a = Antichain::from_elements(vec![cf(vec![0, 1]), cf(vec![1, 1]), cf(vec![2, 0])]);
        assert_eq!(a.elements(), &[cf(vec![1, 1]), cf(vec![2, 0])]);
        let b = Antichain::from_elements(vec![cf(vec![0, 2])]);
        assert_eq!(a.intersect(&b).elements(), &[cf(vec![0, 1])]);
    }
}
