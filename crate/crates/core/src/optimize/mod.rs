//! Optimal realizability-preserving partial strategies on sample trees.
//!
//! Values are reported as integers `n * C`, where `n` is the number of
//! samples and `C` the expected total reward, so every comparison is exact.

mod encode;
mod external;
mod fd;

use std::collections::HashMap;

pub use encode::{
    emit_smtlib, encode, linearized, Constraint, ConstraintKind, ConstraintSystem, Formula, Lin,
    Rel, Var, XVar, YVar,
};
pub use external::{ExternalSolver, SolverError};
pub use fd::{solve_system, Assignment};

use crate::alphabet::Letter;
use crate::automata::UniversalCoBuchi;
use crate::machines::{check_partial_realizable, weighted_vertex_reward, PartialStrategy, RewardMachine};
use crate::safety::{cf_successor, initial_cf, Antichain, CountingFunction};
use crate::sampling::SampleTree;

pub const DEFAULT_BRUTE_FORCE_CAP: u64 = 2_000_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum OptimizeError {
    #[error("the winning antichain is empty")]
    EmptyWin,
    #[error("the initial counting function is not winning")]
    InitialNotWinning,
    #[error("reward machine and automaton disagree on the alphabet")]
    AlphabetMismatch,
    #[error("brute force would enumerate more than {cap} strategies")]
    CapExceeded { cap: u64 },
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub ucw: UniversalCoBuchi,
    pub k: u32,
    pub win: Antichain,
    pub rm: RewardMachine,
    pub tree: SampleTree,
}

impl ProblemInstance {
    pub fn new(
        ucw: UniversalCoBuchi,
        k: u32,
        win: Antichain,
        rm: RewardMachine,
        tree: SampleTree,
    ) -> Result<Self, OptimizeError> {
        if win.is_empty() {
            return Err(OptimizeError::EmptyWin);
        }
        if !win.dominates(&initial_cf(&ucw, k)) {
            return Err(OptimizeError::InitialNotWinning);
        }
        let nl = ucw.alphabet.num_letters();
        if rm.num_outputs != ucw.alphabet.num_outputs() || rm.trans.iter().any(|r| r.len() != nl) {
            return Err(OptimizeError::AlphabetMismatch);
        }
        Ok(ProblemInstance {
            ucw,
            k,
            win,
            rm,
            tree,
        })
    }

    pub fn num_outputs(&self) -> usize {
        self.ucw.alphabet.num_outputs()
    }

    /// `[r_min * n * L, r_max * n * L]`, the range of `n * C`.
    pub fn value_bounds(&self) -> (i64, i64) {
        let (lo, hi) = self.rm.bounds();
        let scale = self.tree.n() as i64 * self.tree.length() as i64;
        (lo * scale, hi * scale)
    }

    pub fn is_feasible(&self, lambda: &PartialStrategy) -> bool {
        check_partial_realizable(lambda, &self.tree, &self.ucw, self.k, &self.win)
    }

    /// `n` times the expected reward of a total strategy.
    pub fn value_of(&self, lambda: &PartialStrategy) -> i64 {
        weighted_vertex_reward(&self.rm, &self.tree, lambda).expect("strategy must be total")
    }
}

type Key = (usize, CountingFunction, usize);

struct Dp<'a> {
    inst: &'a ProblemInstance,
    // best value of the subtrees below a vertex, with the chosen output and
    // the resulting key for each child
    memo: HashMap<Key, Option<(i64, Vec<(usize, Key)>)>>,
}

impl Dp<'_> {
    fn solve(&mut self, key: &Key) -> Option<i64> {
        if let Some(r) = self.memo.get(key) {
            return r.as_ref().map(|r| r.0);
        }
        let inst = self.inst;
        let (v, cf, s) = key;
        let mut total = 0i64;
        let mut picks = Vec::new();
        let mut feasible = true;
        for &c in inst.tree.children(*v) {
            let i = inst.tree.input(c).unwrap();
            let weight = inst.tree.count(c) as i64;
            let mut best: Option<(i64, usize, Key)> = None;
            for o in 0..inst.num_outputs() {
                let l = Letter::new(i, o);
                let next_cf = cf_successor(&inst.ucw, inst.k, cf, l);
                if !inst.win.dominates(&next_cf) {
                    continue;
                }
                let (next_s, r) = inst.rm.step(*s, l);
                let child_key = (c, next_cf, next_s);
                if let Some(sub) = self.solve(&child_key) {
                    let val = r * weight + sub;
                    if best.as_ref().is_none_or(|b| val > b.0) {
                        best = Some((val, o, child_key));
                    }
                }
            }
            match best {
                Some((val, o, child_key)) => {
                    total += val;
                    picks.push((o, child_key));
                }
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        let result = feasible.then_some((total, picks));
        let value = result.as_ref().map(|r| r.0);
        self.memo.insert(key.clone(), result);
        value
    }

    fn strategy(&self, root: &Key) -> PartialStrategy {
        let mut lambda = PartialStrategy::empty(&self.inst.tree);
        let mut stack = vec![root.clone()];
        while let Some(key) = stack.pop() {
            let (_, picks) = self.memo[&key].as_ref().unwrap();
            for (o, child_key) in picks {
                lambda.set(child_key.0, *o);
                stack.push(child_key.clone());
            }
        }
        lambda
    }
}

/// Exact optimum by dynamic programming over (vertex, counting function,
/// reward-machine state). Among optimal strategies the one choosing the
/// lowest output index first, in vertex order, is returned.
pub fn solve_native(inst: &ProblemInstance) -> Option<(i64, PartialStrategy)> {
    let init = initial_cf(&inst.ucw, inst.k);
    if !inst.win.dominates(&init) {
        return None;
    }
    let mut dp = Dp {
        inst,
        memo: HashMap::new(),
    };
    let root = (0, init, inst.rm.initial);
    let value = dp.solve(&root)?;
    Some((value, dp.strategy(&root)))
}

/// Enumerates every strategy. Ties go to the lexicographically smallest
/// strategy in vertex order.
pub fn brute_force_oracle(
    inst: &ProblemInstance,
    cap: u64,
) -> Result<Option<(i64, PartialStrategy)>, OptimizeError> {
    let no = inst.num_outputs() as u64;
    let slots = inst.tree.len() - 1;
    let total = (0..slots).try_fold(1u64, |acc, _| acc.checked_mul(no).filter(|&t| t <= cap));
    let total = total.ok_or(OptimizeError::CapExceeded { cap })?;
    let mut outputs = vec![0usize; slots];
    let mut best: Option<(i64, PartialStrategy)> = None;
    for _ in 0..total {
        let lambda = PartialStrategy::from_outputs(&outputs);
        if inst.is_feasible(&lambda) {
            let val = inst.value_of(&lambda);
            if best.as_ref().is_none_or(|b| val > b.0) {
                best = Some((val, lambda));
            }
        }
        // odometer with the last vertex varying fastest
        for d in (0..slots).rev() {
            outputs[d] += 1;
            if (outputs[d] as u64) < no {
                break;
            }
            outputs[d] = 0;
        }
    }
    Ok(best)
}

/// Result of [`binary_search_optimal`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchOutcome {
    pub value: i64,
    pub strategy: PartialStrategy,
    pub oracle_calls: usize,
}

/// Largest satisfiable threshold in the value range, found by bisection
/// with `lo` the greatest known-satisfiable and `hi` the least
/// known-unsatisfiable threshold. The oracle answers a threshold with a
/// witnessing strategy or `None`.
pub fn binary_search_optimal(
    inst: &ProblemInstance,
    mut oracle: impl FnMut(i64) -> Option<PartialStrategy>,
) -> Option<SearchOutcome> {
    let (min, max) = inst.value_bounds();
    let mut calls = 1;
    let mut witness = oracle(min)?;
    let mut lo = min;
    let mut hi = max + 1;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        calls += 1;
        match oracle(mid) {
            Some(w) => {
                lo = mid;
                witness = w;
            }
            None => hi = mid,
        }
    }
    Some(SearchOutcome {
        value: lo,
        strategy: witness,
        oracle_calls: calls,
    })
}

/// Threshold oracle backed by the native constraint solver.
pub fn native_threshold_oracle(inst: &ProblemInstance) -> impl FnMut(i64) -> Option<PartialStrategy> + '_ {
    move |t| {
        let cs = encode(inst, t).expect("instance was validated");
        solve_system(&cs).map(|a| a.strategy(&cs, &inst.tree))
    }
}

#[cfg(test)]
mod tests;
