//! Finite-domain backtracking solver for [`ConstraintSystem`]s.
//!
//! Domains are integer intervals. Formulas are compiled with negations
//! pushed to the linear leaves and propagated with bounds reasoning; search
//! branches on the `x` variables in declaration order and finally on the
//! `y` variables, smallest value first.

use std::collections::VecDeque;

use super::encode::{ConstraintSystem, Formula, Lin, Rel, Var};
use crate::machines::PartialStrategy;
use crate::sampling::SampleTree;

#[derive(Clone, Debug)]
enum Node {
    // (coefficient, variable index), relation, bound
    Lin(Vec<(i64, usize)>, Rel, i64),
    And(Vec<usize>),
    Or(Vec<usize>),
    // a, b, not a, not b
    Iff(usize, usize, usize, usize),
}

struct Compiled {
    nodes: Vec<Node>,
    roots: Vec<usize>,
    watches: Vec<Vec<usize>>,
    num_x: usize,
}

struct Conflict;

type Domains = Vec<(i64, i64)>;

fn var_index(cs: &ConstraintSystem, v: Var) -> usize {
    match v {
        Var::X(i) => i,
        Var::Y(i) => cs.x_vars.len() + i,
    }
}

impl Compiled {
    fn new(cs: &ConstraintSystem) -> Self {
        let mut c = Compiled {
            nodes: Vec::new(),
            roots: Vec::new(),
            watches: vec![Vec::new(); cs.num_vars()],
            num_x: cs.x_vars.len(),
        };
        for (ci, con) in cs.constraints.iter().enumerate() {
            let root = c.compile(cs, &con.formula, false);
            c.roots.push(root);
            let mut vars = Vec::new();
            con.formula.vars(&mut vars);
            let mut idx: Vec<usize> = vars.into_iter().map(|v| var_index(cs, v)).collect();
            idx.sort_unstable();
            idx.dedup();
            for v in idx {
                c.watches[v].push(ci);
            }
        }
        c
    }

    fn add(&mut self, n: Node) -> usize {
        self.nodes.push(n);
        self.nodes.len() - 1
    }

    fn lin(&mut self, cs: &ConstraintSystem, l: &Lin, negated: bool) -> usize {
        let terms: Vec<(i64, usize)> = l.terms.iter().map(|&(c, v)| (c, var_index(cs, v))).collect();
        match (l.rel, negated) {
            (rel, false) => self.add(Node::Lin(terms, rel, l.rhs)),
            (Rel::Ge, true) => self.add(Node::Lin(terms, Rel::Le, l.rhs - 1)),
            (Rel::Le, true) => self.add(Node::Lin(terms, Rel::Ge, l.rhs + 1)),
            (Rel::Eq, true) => {
                let a = self.add(Node::Lin(terms.clone(), Rel::Le, l.rhs - 1));
                let b = self.add(Node::Lin(terms, Rel::Ge, l.rhs + 1));
                self.add(Node::Or(vec![a, b]))
            }
        }
    }

    fn compile(&mut self, cs: &ConstraintSystem, f: &Formula, negated: bool) -> usize {
        match f {
            Formula::Lin(l) => self.lin(cs, l, negated),
            Formula::Not(a) => self.compile(cs, a, !negated),
            Formula::And(v) | Formula::Or(v) => {
                let kids = v.iter().map(|g| self.compile(cs, g, negated)).collect();
                let conj = matches!(f, Formula::And(_)) != negated;
                self.add(if conj { Node::And(kids) } else { Node::Or(kids) })
            }
            Formula::Implies(a, b) => {
                if negated {
                    let a = self.compile(cs, a, false);
                    let nb = self.compile(cs, b, true);
                    self.add(Node::And(vec![a, nb]))
                } else {
                    let na = self.compile(cs, a, true);
                    let b = self.compile(cs, b, false);
                    self.add(Node::Or(vec![na, b]))
                }
            }
            Formula::Iff(a, b) => {
                let pa = self.compile(cs, a, false);
                let na = self.compile(cs, a, true);
                let pb = self.compile(cs, b, false);
                let nb = self.compile(cs, b, true);
                self.add(if negated {
                    Node::Iff(pa, nb, na, pb)
                } else {
                    Node::Iff(pa, pb, na, nb)
                })
            }
        }
    }

    fn range(terms: &[(i64, usize)], d: &Domains) -> (i64, i64) {
        terms.iter().fold((0, 0), |(lo, hi), &(c, v)| {
            let (a, b) = (c * d[v].0, c * d[v].1);
            (lo + a.min(b), hi + a.max(b))
        })
    }

    fn entailed(&self, n: usize, d: &Domains) -> Option<bool> {
        match &self.nodes[n] {
            Node::Lin(terms, rel, rhs) => {
                let (lo, hi) = Self::range(terms, d);
                match rel {
                    Rel::Ge if lo >= *rhs => Some(true),
                    Rel::Ge if hi < *rhs => Some(false),
                    Rel::Le if hi <= *rhs => Some(true),
                    Rel::Le if lo > *rhs => Some(false),
                    Rel::Eq if lo == *rhs && hi == *rhs => Some(true),
                    Rel::Eq if *rhs < lo || *rhs > hi => Some(false),
                    _ => None,
                }
            }
            Node::And(kids) => {
                let mut all = true;
                for &k in kids {
                    match self.entailed(k, d) {
                        Some(false) => return Some(false),
                        None => all = false,
                        Some(true) => {}
                    }
                }
                all.then_some(true)
            }
            Node::Or(kids) => {
                let mut none = true;
                for &k in kids {
                    match self.entailed(k, d) {
                        Some(true) => return Some(true),
                        None => none = false,
                        Some(false) => {}
                    }
                }
                none.then_some(false)
            }
            Node::Iff(a, b, _, _) => match (self.entailed(*a, d)?, self.entailed(*b, d)?) {
                (x, y) => Some(x == y),
            },
        }
    }

    // sum(c * v) >= rhs
    fn propagate_ge(
        terms: &[(i64, usize)],
        rhs: i64,
        d: &mut Domains,
        changed: &mut Vec<usize>,
    ) -> Result<(), Conflict> {
        let (_, hi) = Self::range(terms, d);
        if hi < rhs {
            return Err(Conflict);
        }
        for &(c, v) in terms {
            if c == 0 {
                continue;
            }
            let own = (c * d[v].0).max(c * d[v].1);
            let need = rhs - (hi - own);
            if c > 0 {
                let lo = need.div_euclid(c) + i64::from(need.rem_euclid(c) != 0);
                if lo > d[v].0 {
                    if lo > d[v].1 {
                        return Err(Conflict);
                    }
                    d[v].0 = lo;
                    changed.push(v);
                }
            } else {
                // c * v >= need  <=>  v <= need / c rounded down
                let up = (-need).div_euclid(-c);
                if up < d[v].1 {
                    if up < d[v].0 {
                        return Err(Conflict);
                    }
                    d[v].1 = up;
                    changed.push(v);
                }
            }
        }
        Ok(())
    }

    fn enforce(&self, n: usize, d: &mut Domains, changed: &mut Vec<usize>) -> Result<(), Conflict> {
        match &self.nodes[n] {
            Node::Lin(terms, rel, rhs) => {
                if matches!(rel, Rel::Ge | Rel::Eq) {
                    Self::propagate_ge(terms, *rhs, d, changed)?;
                }
                if matches!(rel, Rel::Le | Rel::Eq) {
                    let neg: Vec<(i64, usize)> = terms.iter().map(|&(c, v)| (-c, v)).collect();
                    Self::propagate_ge(&neg, -rhs, d, changed)?;
                }
                Ok(())
            }
            Node::And(kids) => {
                for &k in kids {
                    self.enforce(k, d, changed)?;
                }
                Ok(())
            }
            Node::Or(kids) => {
                let mut open = None;
                for &k in kids {
                    match self.entailed(k, d) {
                        Some(true) => return Ok(()),
                        Some(false) => {}
                        None => {
                            if open.is_some() {
                                return Ok(());
                            }
                            open = Some(k);
                        }
                    }
                }
                match open {
                    Some(k) => self.enforce(k, d, changed),
                    None => Err(Conflict),
                }
            }
            Node::Iff(a, b, na, nb) => {
                match self.entailed(*a, d) {
                    Some(true) => return self.enforce(*b, d, changed),
                    Some(false) => return self.enforce(*nb, d, changed),
                    None => {}
                }
                match self.entailed(*b, d) {
                    Some(true) => self.enforce(*a, d, changed),
                    Some(false) => self.enforce(*na, d, changed),
                    None => Ok(()),
                }
            }
        }
    }

    fn propagate(&self, d: &mut Domains, seed: Option<usize>) -> Result<(), Conflict> {
        let mut queued = vec![false; self.roots.len()];
        let mut queue = VecDeque::new();
        match seed {
            None => {
                queue.extend(0..self.roots.len());
                queued.iter_mut().for_each(|q| *q = true);
            }
            Some(v) => {
                for &c in &self.watches[v] {
                    queued[c] = true;
                    queue.push_back(c);
                }
            }
        }
        let mut changed = Vec::new();
        while let Some(c) = queue.pop_front() {
            queued[c] = false;
            self.enforce(self.roots[c], d, &mut changed)?;
            for v in changed.drain(..) {
                for &w in &self.watches[v] {
                    if !queued[w] {
                        queued[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        Ok(())
    }

    fn search(&self, d: Domains) -> Option<Domains> {
        let Some(v) = (0..d.len()).find(|&v| d[v].0 < d[v].1) else {
            // every variable fixed and propagated: check once more for safety
            return self
                .roots
                .iter()
                .all(|&r| self.entailed(r, &d) == Some(true))
                .then_some(d);
        };
        let values: Vec<i64> = if v < self.num_x {
            vec![1, 0]
        } else {
            (d[v].0..=d[v].1).collect()
        };
        for val in values {
            let mut next = d.clone();
            next[v] = (val, val);
            if self.propagate(&mut next, Some(v)).is_ok() {
                if let Some(sol) = self.search(next) {
                    return Some(sol);
                }
            }
        }
        None
    }
}

/// Satisfying assignment: `values[i]` for the `i`-th variable, `x` first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assignment {
    pub values: Vec<i64>,
}

impl Assignment {
    pub fn value(&self, cs: &ConstraintSystem, v: Var) -> i64 {
        self.values[var_index(cs, v)]
    }

    /// Output chosen at each vertex.
    pub fn strategy(&self, cs: &ConstraintSystem, tree: &SampleTree) -> PartialStrategy {
        let mut lambda = PartialStrategy::empty(tree);
        for (i, xv) in cs.x_vars.iter().enumerate() {
            if self.values[i] == 1 {
                lambda.set(xv.vertex, xv.output);
            }
        }
        lambda
    }

    /// Whether every constraint holds under the assignment.
    pub fn satisfies(&self, cs: &ConstraintSystem) -> bool {
        let compiled = Compiled::new(cs);
        let d: Domains = self.values.iter().map(|&v| (v, v)).collect();
        compiled.roots.iter().all(|&r| compiled.entailed(r, &d) == Some(true))
    }
}

pub fn solve_system(cs: &ConstraintSystem) -> Option<Assignment> {
    let compiled = Compiled::new(cs);
    let mut d: Domains = (0..cs.x_vars.len())
        .map(|i| cs.domain(Var::X(i)))
        .chain((0..cs.y_vars.len()).map(|i| cs.domain(Var::Y(i))))
        .collect();
    compiled.propagate(&mut d, None).ok()?;
    compiled
        .search(d)
        .map(|d| Assignment {
            values: d.into_iter().map(|(lo, _)| lo).collect(),
        })
}
