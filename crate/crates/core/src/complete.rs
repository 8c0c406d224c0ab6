//! Completion of a partial strategy into a Mealy machine, realization check
//! and exact mean-payoff evaluation against an environment chain.
//!
//! Off the sample the machine tracks the longest suffix of the input history
//! that is a path of the sample tree (suffix links as in Aho-Corasick) and
//! replays the strategy's output there when that keeps the counting
//! function winning. Otherwise it takes the winning output with the largest
//! immediate reward.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{Alphabet, Letter};
use crate::automata::UniversalCoBuchi;
use crate::machines::{check_partial_realizable, MealyMachine, PartialStrategy, RewardMachine};
use crate::safety::{cf_successor, initial_cf, Antichain, CountingFunction};
use crate::sampling::{EnvChain, SampleTree};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CompleteError {
    #[error("the partial strategy does not preserve realizability")]
    Infeasible,
    #[error("no winning output after input {input}")]
    Stuck { input: usize },
    #[error("machine is not complete")]
    Incomplete,
}

// goto function of the sample-tree trie with suffix links
fn trie_goto(tree: &SampleTree, num_inputs: usize) -> Vec<Vec<usize>> {
    let mut go = vec![vec![0usize; num_inputs]; tree.len()];
    let mut fail = vec![0usize; tree.len()];
    let mut queue = VecDeque::new();
    for i in 0..num_inputs {
        if let Some(c) = tree.child(0, i) {
            go[0][i] = c;
            queue.push_back(c);
        }
    }
    while let Some(v) = queue.pop_front() {
        for i in 0..num_inputs {
            match tree.child(v, i) {
                Some(c) => {
                    fail[c] = go[fail[v]][i];
                    go[v][i] = c;
                    queue.push_back(c);
                }
                None => go[v][i] = go[fail[v]][i],
            }
        }
    }
    go
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct Key {
    cf: CountingFunction,
    rm: usize,
    node: usize,
    on_sample: bool,
}

/// Mealy machine extending `lambda`. States are (counting function,
/// reward-machine state, tree position) triples; the result is minimized and
/// numbered in breadth-first order from the initial state.
pub fn complete_strategy(
    lambda: &PartialStrategy,
    tree: &SampleTree,
    ucw: &UniversalCoBuchi,
    k: u32,
    win: &Antichain,
    rm: &RewardMachine,
) -> Result<MealyMachine, CompleteError> {
    if !check_partial_realizable(lambda, tree, ucw, k, win) {
        return Err(CompleteError::Infeasible);
    }
    let ni = ucw.alphabet.num_inputs();
    let no = ucw.alphabet.num_outputs();
    let go = trie_goto(tree, ni);
    let start = Key {
        cf: initial_cf(ucw, k),
        rm: rm.initial,
        node: 0,
        on_sample: true,
    };
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut keys = vec![start.clone()];
    index.insert(start, 0);
    let mut trans: Vec<Vec<Option<(usize, usize)>>> = Vec::new();
    let mut next = 0;
    while next < keys.len() {
        let key = keys[next].clone();
        next += 1;
        let mut row = Vec::with_capacity(ni);
        for i in 0..ni {
            let node = go[key.node][i];
            let on_sample = key.on_sample && tree.child(key.node, i).is_some();
            let safe = |o: usize| {
                let f = cf_successor(ucw, k, &key.cf, Letter::new(i, o));
                win.dominates(&f).then_some(f)
            };
            let replay = if node == 0 { None } else { lambda.get(node) };
            let pick = match replay.and_then(|o| safe(o).map(|f| (o, f))) {
                Some(p) => Some(p),
                None if on_sample => None,
                None => (0..no)
                    .filter_map(|o| safe(o).map(|f| (o, f)))
                    .max_by_key(|(o, _)| (rm.step(key.rm, Letter::new(i, *o)).1, std::cmp::Reverse(*o))),
            };
            let (o, cf) = pick.ok_or(CompleteError::Stuck { input: i })?;
            let succ = Key {
                cf,
                rm: rm.step(key.rm, Letter::new(i, o)).0,
                node,
                on_sample,
            };
            let id = *index.entry(succ.clone()).or_insert_with(|| {
                keys.push(succ);
                keys.len() - 1
            });
            row.push(Some((id, o)));
        }
        trans.push(row);
    }
    let raw = MealyMachine {
        num_states: keys.len(),
        initial: 0,
        trans,
    };
    Ok(minimize(&raw))
}

/// Coarsest partition of the states of a complete machine respecting
/// outputs and successors, renumbered breadth-first from the initial state.
pub fn minimize(m: &MealyMachine) -> MealyMachine {
    let ni = m.num_inputs();
    let cell = |s: usize, i: usize| m.trans[s][i].expect("machine must be complete");
    let mut block: Vec<usize> = {
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        (0..m.num_states)
            .map(|s| {
                let sig: Vec<usize> = (0..ni).map(|i| cell(s, i).1).collect();
                let n = ids.len();
                *ids.entry(sig).or_insert(n)
            })
            .collect()
    };
    loop {
        let mut ids: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let refined: Vec<usize> = (0..m.num_states)
            .map(|s| {
                let sig = (block[s], (0..ni).map(|i| block[cell(s, i).0]).collect());
                let n = ids.len();
                *ids.entry(sig).or_insert(n)
            })
            .collect();
        let done = ids.len() == block.iter().max().map_or(0, |b| b + 1);
        block = refined;
        if done {
            break;
        }
    }
    // breadth-first renumbering of the quotient
    let mut order = HashMap::new();
    let mut reps = Vec::new();
    let mut queue = VecDeque::from([m.initial]);
    order.insert(block[m.initial], 0);
    reps.push(m.initial);
    while let Some(s) = queue.pop_front() {
        for i in 0..ni {
            let t = cell(s, i).0;
            if !order.contains_key(&block[t]) {
                order.insert(block[t], reps.len());
                reps.push(t);
                queue.push_back(t);
            }
        }
    }
    let trans = reps
        .iter()
        .map(|&s| {
            (0..ni)
                .map(|i| {
                    let (t, o) = cell(s, i);
                    Some((order[&block[t]], o))
                })
                .collect()
        })
        .collect();
    MealyMachine {
        num_states: reps.len(),
        initial: 0,
        trans,
    }
}

/// Whether every interaction of the machine with any input sequence keeps
/// the counting function below `K + 1`.
pub fn verify_realizes(m: &MealyMachine, ucw: &UniversalCoBuchi, k: u32) -> Result<bool, CompleteError> {
    if !m.is_complete() || m.num_inputs() != ucw.alphabet.num_inputs() {
        return Err(CompleteError::Incomplete);
    }
    let init = (m.initial, initial_cf(ucw, k));
    if init.1.has_overflow() {
        return Ok(false);
    }
    let mut seen = std::collections::HashSet::from([init.clone()]);
    let mut queue = VecDeque::from([init]);
    while let Some((s, f)) = queue.pop_front() {
        for i in 0..m.num_inputs() {
            let (t, o) = m.trans[s][i].unwrap();
            let g = cf_successor(ucw, k, &f, Letter::new(i, o));
            if g.has_overflow() {
                return Ok(false);
            }
            if seen.insert((t, g.clone())) {
                queue.push_back((t, g));
            }
        }
    }
    Ok(true)
}

/// One edge per line: `src -> dst [label="input / output"]`, wrapped in a
/// `digraph` block.
pub fn write_machine_graph(m: &MealyMachine, alphabet: &Alphabet) -> String {
    let mut out = String::from("digraph mealy {\n");
    let _ = writeln!(out, "  init -> {};", m.initial);
    for (s, row) in m.trans.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            if let Some((t, o)) = cell {
                let _ = writeln!(
                    out,
                    "  {s} -> {t} [label=\"{} / {}\"];",
                    alphabet.format_input(i),
                    alphabet.format_output(*o)
                );
            }
        }
    }
    out.push_str("}\n");
    out
}

/// Reachable product of machine, environment chain and reward machine.
/// State triples are (Mealy state, chain state, reward-machine state).
#[derive(Clone, Debug)]
pub struct ProductChain {
    pub states: Vec<(usize, usize, usize)>,
    pub initial: Vec<(BigRational, usize)>,
    /// Per state: (probability, successor, reward).
    pub edges: Vec<Vec<(BigRational, usize, i64)>>,
}

impl ProductChain {
    pub fn build(m: &MealyMachine, env: &EnvChain, rm: &RewardMachine) -> Result<Self, CompleteError> {
        if !m.is_complete() {
            return Err(CompleteError::Incomplete);
        }
        let mut index: HashMap<(usize, usize, usize), usize> = HashMap::new();
        let mut states = Vec::new();
        let mut intern = |t: (usize, usize, usize), states: &mut Vec<_>| {
            *index.entry(t).or_insert_with(|| {
                states.push(t);
                states.len() - 1
            })
        };
        let mut initial = Vec::new();
        for (p, e) in &env.initial {
            initial.push((p.clone(), intern((m.initial, *e, rm.initial), &mut states)));
        }
        let mut edges = Vec::new();
        let mut next = 0;
        while next < states.len() {
            let (s, e, r) = states[next];
            next += 1;
            let mut out: Vec<(BigRational, usize, i64)> = Vec::new();
            for (p, e2, i) in &env.edges[e] {
                let (s2, o) = m.trans[s][*i].unwrap();
                let (r2, reward) = rm.step(r, Letter::new(*i, o));
                let t = intern((s2, *e2, r2), &mut states);
                // merge parallel edges with equal reward
                match out.iter_mut().find(|x| x.1 == t && x.2 == reward) {
                    Some(x) => x.0 += p,
                    None => out.push((p.clone(), t, reward)),
                }
            }
            edges.push(out);
        }
        Ok(ProductChain { states, initial, edges })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    // Tarjan, iterative; components come out in reverse topological order
    fn components(&self) -> Vec<Vec<usize>> {
        let n = self.len();
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut comps = Vec::new();
        let mut counter = 0;
        for root in 0..n {
            if index[root] != usize::MAX {
                continue;
            }
            let mut work = vec![(root, 0usize)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&(v, pos)) = work.last() {
                if pos < self.edges[v].len() {
                    let w = self.edges[v][pos].1;
                    work.last_mut().unwrap().1 += 1;
                    if index[w] == usize::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        work.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    work.pop();
                    if let Some(&(u, _)) = work.last() {
                        low[u] = low[u].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        loop {
                            let w = stack.pop().unwrap();
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        comps.push(comp);
                    }
                }
            }
        }
        comps
    }
}

/// Per bottom component: its size, stationary mean reward and the
/// probability of ending up in it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BsccSummary {
    pub states: Vec<usize>,
    pub mean: BigRational,
    pub absorption: BigRational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeanPayoff {
    pub value: BigRational,
    pub bsccs: Vec<BsccSummary>,
    pub product_states: usize,
}

/// Solves `a x = b` for square nonsingular `a` with several right-hand
/// sides, by fraction-free (Bareiss) elimination on integer-scaled rows.
pub fn solve_linear(a: &[Vec<BigRational>], b: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let n = a.len();
    let r = b.first().map_or(0, Vec::len);
    // scale each augmented row to integers
    let mut m: Vec<Vec<BigInt>> = (0..n)
        .map(|i| {
            let row: Vec<&BigRational> = a[i].iter().chain(b[i].iter()).collect();
            let den = row
                .iter()
                .fold(BigInt::one(), |acc, x| num::integer::lcm(acc, x.denom().clone()));
            row.iter().map(|x| x.numer() * (&den / x.denom())).collect()
        })
        .collect();
    let mut prev = BigInt::one();
    for col in 0..n {
        let piv = (col..n).find(|&i| !m[i][col].is_zero())?;
        m.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest.iter_mut() {
            let factor = row[col].clone();
            for j in col + 1..n + r {
                row[j] = (&pivot_row[col] * &row[j] - &factor * &pivot_row[j]) / &prev;
            }
            row[col] = BigInt::zero();
        }
        prev = m[col][col].clone();
    }
    let mut x = vec![vec![BigRational::zero(); r]; n];
    for i in (0..n).rev() {
        for c in 0..r {
            let mut acc = BigRational::from_integer(m[i][n + c].clone());
            for j in i + 1..n {
                if !m[i][j].is_zero() {
                    acc -= BigRational::from_integer(m[i][j].clone()) * &x[j][c];
                }
            }
            x[i][c] = acc / BigRational::from_integer(m[i][i].clone());
        }
    }
    Some(x)
}

fn stationary(chain: &ProductChain, comp: &[usize]) -> Vec<BigRational> {
    let n = comp.len();
    let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // rows: balance equations for states 1..n, then normalization
    let mut a = vec![vec![BigRational::zero(); n]; n];
    for (j, &s) in comp.iter().enumerate() {
        a[j][j] -= BigRational::one();
        for (p, t, _) in &chain.edges[s] {
            let i = pos[t];
            a[i][j] += p;
        }
    }
    a[0] = vec![BigRational::one(); n];
    let mut b = vec![vec![BigRational::zero()]; n];
    b[0][0] = BigRational::one();
    let x = solve_linear(&a, &b).expect("stationary system of an irreducible chain is nonsingular");
    x.into_iter().map(|mut v| v.remove(0)).collect()
}

/// Exact expected long-run average reward of the product, with the bottom
/// components and their absorption probabilities.
pub fn mean_payoff(chain: &ProductChain) -> MeanPayoff {
    let n = chain.len();
    let comps = chain.components();
    let mut comp_of = vec![0; n];
    for (c, comp) in comps.iter().enumerate() {
        comp.iter().for_each(|&s| comp_of[s] = c);
    }
    let bottom: Vec<usize> = (0..comps.len())
        .filter(|&c| comps[c].iter().all(|&s| chain.edges[s].iter().all(|e| comp_of[e.1] == c)))
        .collect();
    let nb = bottom.len();
    // absorb[s][b]: probability that state s ends in the b-th bottom component
    let mut absorb: Vec<Option<Vec<BigRational>>> = vec![None; n];
    let mut means = Vec::new();
    for (bi, &c) in bottom.iter().enumerate() {
        let pi = stationary(chain, &comps[c]);
        let mut mean = BigRational::zero();
        for (k, &s) in comps[c].iter().enumerate() {
            for (p, _, r) in &chain.edges[s] {
                mean += &pi[k] * p * BigRational::from_integer((*r).into());
            }
        }
        means.push(mean);
        for &s in &comps[c] {
            let mut v = vec![BigRational::zero(); nb];
            v[bi] = BigRational::one();
            absorb[s] = Some(v);
        }
    }
    // transient components, successors first thanks to Tarjan's order
    for (c, comp) in comps.iter().enumerate() {
        if bottom.contains(&c) {
            continue;
        }
        let m = comp.len();
        let pos: HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let mut a = vec![vec![BigRational::zero(); m]; m];
        let mut b = vec![vec![BigRational::zero(); nb]; m];
        for (i, &s) in comp.iter().enumerate() {
            a[i][i] += BigRational::one();
            for (p, t, _) in &chain.edges[s] {
                match pos.get(t) {
                    Some(&j) => a[i][j] -= p,
                    None => {
                        let h = absorb[*t].as_ref().expect("successor component solved first");
                        for (bj, x) in h.iter().enumerate() {
                            b[i][bj] += p * x;
                        }
                    }
                }
            }
        }
        let x = solve_linear(&a, &b).expect("transient system is nonsingular");
        for (i, &s) in comp.iter().enumerate() {
            absorb[s] = Some(x[i].clone());
        }
    }
    let mut reach = vec![BigRational::zero(); nb];
    for (p, s) in &chain.initial {
        for (bj, x) in absorb[*s].as_ref().unwrap().iter().enumerate() {
            reach[bj] += p * x;
        }
    }
    let value = (0..nb).map(|b| &reach[b] * &means[b]).sum();
    MeanPayoff {
        value,
        bsccs: (0..nb)
            .map(|b| BsccSummary {
                states: comps[bottom[b]].clone(),
                mean: means[b].clone(),
                absorption: reach[b].clone(),
            })
            .collect(),
        product_states: n,
    }
}

pub fn long_run_average(m: &MealyMachine, env: &EnvChain, rm: &RewardMachine) -> Result<BigRational, CompleteError> {
    Ok(mean_payoff(&ProductChain::build(m, env, rm)?).value)
}

/// Average reward of one seeded run of `steps` steps.
pub fn simulate_average(
    m: &MealyMachine,
    env: &EnvChain,
    rm: &RewardMachine,
    steps: u64,
    seed: u64,
) -> Result<f64, CompleteError> {
    if !m.is_complete() {
        return Err(CompleteError::Incomplete);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |probs: Vec<f64>, rng: &mut ChaCha8Rng| {
        let x: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if x < acc {
                return i;
            }
        }
        probs.len() - 1
    };
    let to_f = |p: &BigRational| p.to_f64().unwrap();
    let tables: Vec<Vec<f64>> = env.edges.iter().map(|e| e.iter().map(|x| to_f(&x.0)).collect()).collect();
    let mut e = env.initial[draw(env.initial.iter().map(|x| to_f(&x.0)).collect(), &mut rng)].1;
    let (mut s, mut r) = (m.initial, rm.initial);
    let mut total = 0i64;
    for _ in 0..steps {
        let (_, e2, i) = env.edges[e][draw(tables[e].clone(), &mut rng)];
        let (s2, o) = m.trans[s][i].unwrap();
        let (r2, reward) = rm.step(r, Letter::new(i, o));
        total += reward;
        (s, e, r) = (s2, e2, r2);
    }
    Ok(total as f64 / steps as f64)
}

/// Decimal rendering rounded to `places` digits, half away from zero.
pub fn format_decimal(x: &BigRational, places: usize) -> String {
    let scale = BigInt::from(10u32).pow(places as u32);
    let scaled = x * BigRational::from_integer(scale.clone());
    let rounded = scaled.abs().round().to_integer();
    let sign = if x.is_negative() && !rounded.is_zero() { "-" } else { "" };
    let int = &rounded / &scale;
    let frac = &rounded % &scale;
    if places == 0 {
        return format!("{sign}{int}");
    }
    format!("{sign}{int}.{:0>width$}", frac.to_string(), width = places)
}

#[cfg(test)]
mod tests;
