//! Constraint encoding of the threshold problem and its SMT-LIB rendering.
//!
//! `x[v,s,o]` holds when the reward machine is in state `s` on arrival at
//! vertex `v` and output `o` is chosen there. `y[v,q]` over-approximates the
//! counting function at `v`.

use std::fmt::Write as _;

use super::{OptimizeError, ProblemInstance};
use crate::alphabet::Letter;
use crate::safety::initial_cf;
use crate::sampling::SampleTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    Y(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Ge,
    Le,
    Eq,
}

/// `sum(c * var) rel rhs`, with `x` variables read as 0/1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lin {
    pub terms: Vec<(i64, Var)>,
    pub rel: Rel,
    pub rhs: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    Lin(Lin),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn lin(terms: Vec<(i64, Var)>, rel: Rel, rhs: i64) -> Formula {
        Formula::Lin(Lin { terms, rel, rhs })
    }

    pub fn x(i: usize) -> Formula {
        Formula::lin(vec![(1, Var::X(i))], Rel::Ge, 1)
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Formula, b: Formula) -> Formula {
        Formula::Iff(Box::new(a), Box::new(b))
    }

    pub fn vars(&self, out: &mut Vec<Var>) {
        match self {
            Formula::Lin(l) => out.extend(l.terms.iter().map(|t| t.1)),
            Formula::Not(a) => a.vars(out),
            Formula::And(v) | Formula::Or(v) => v.iter().for_each(|f| f.vars(out)),
            Formula::Implies(a, b) | Formula::Iff(a, b) => {
                a.vars(out);
                b.vars(out);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstraintKind {
    Range,
    Ambiguity,
    RewardInit,
    RewardTransition,
    CfInit,
    CfActivation,
    CfTransition,
    Realizability,
    Objective,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub formula: Formula,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct XVar {
    pub vertex: usize,
    pub rm_state: usize,
    pub output: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct YVar {
    pub vertex: usize,
    pub state: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstraintSystem {
    pub x_vars: Vec<XVar>,
    pub y_vars: Vec<YVar>,
    pub x_names: Vec<String>,
    pub y_names: Vec<String>,
    pub k: u32,
    pub threshold: i64,
    pub constraints: Vec<Constraint>,
}

impl ConstraintSystem {
    pub fn num_vars(&self) -> usize {
        self.x_vars.len() + self.y_vars.len()
    }

    pub fn name(&self, v: Var) -> &str {
        match v {
            Var::X(i) => &self.x_names[i],
            Var::Y(i) => &self.y_names[i],
        }
    }

    /// Initial domain of a variable.
    pub fn domain(&self, v: Var) -> (i64, i64) {
        match v {
            Var::X(_) => (0, 1),
            Var::Y(_) => (-1, self.k as i64 + 1),
        }
    }
}

/// Vertex identifier used in variable names: the input letters from the
/// root joined by underscores, `eps` for the root.
pub fn vertex_id(tree: &SampleTree, v: usize) -> String {
    if v == 0 {
        return "eps".into();
    }
    tree.path(v)
        .iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("_")
}

pub fn encode(inst: &ProblemInstance, threshold: i64) -> Result<ConstraintSystem, OptimizeError> {
    if inst.win.is_empty() {
        return Err(OptimizeError::EmptyWin);
    }
    let tree = &inst.tree;
    let ucw = &inst.ucw;
    let ns = inst.rm.num_states;
    let no = inst.num_outputs();
    let nq = ucw.num_states;
    let nv = tree.len();

    let ids: Vec<String> = (0..nv).map(|v| vertex_id(tree, v)).collect();
    let mut x_vars = Vec::new();
    let mut x_names = Vec::new();
    let mut x_index = vec![vec![vec![0usize; no]; ns]; nv];
    for v in 1..nv {
        for s in 0..ns {
            for o in 0..no {
                x_index[v][s][o] = x_vars.len();
                x_vars.push(XVar {
                    vertex: v,
                    rm_state: s,
                    output: o,
                });
                x_names.push(format!("x_{}_{s}_{o}", ids[v]));
            }
        }
    }
    let mut y_vars = Vec::new();
    let mut y_names = Vec::new();
    for v in 0..nv {
        for q in 0..nq {
            y_vars.push(YVar { vertex: v, state: q });
            y_names.push(format!("y_{}_{q}", ids[v]));
        }
    }
    let x = |v: usize, s: usize, o: usize| Var::X(x_index[v][s][o]);
    let y = |v: usize, q: usize| Var::Y(v * nq + q);
    let chosen = |v: usize, o: usize| {
        Formula::lin((0..ns).map(|s| (1, x(v, s, o))).collect(), Rel::Ge, 1)
    };
    let active = |v: usize, q: usize| Formula::lin(vec![(1, y(v, q))], Rel::Ge, 0);

    let mut cs = Vec::new();
    let mut push = |kind, formula| cs.push(Constraint { kind, formula });
    let top = inst.k as i64 + 1;

    for v in 0..nv {
        for q in 0..nq {
            push(ConstraintKind::Range, Formula::lin(vec![(1, y(v, q))], Rel::Ge, -1));
            push(ConstraintKind::Range, Formula::lin(vec![(1, y(v, q))], Rel::Le, top));
        }
    }
    for v in 1..nv {
        let all = (0..ns).flat_map(|s| (0..no).map(move |o| (s, o)));
        push(
            ConstraintKind::Ambiguity,
            Formula::lin(all.map(|(s, o)| (1, x(v, s, o))).collect(), Rel::Eq, 1),
        );
    }
    for &v in tree.children(0) {
        let s0 = inst.rm.initial;
        push(
            ConstraintKind::RewardInit,
            Formula::lin((0..no).map(|o| (1, x(v, s0, o))).collect(), Rel::Eq, 1),
        );
    }
    for v in 1..nv {
        let i = tree.input(v).unwrap();
        for &c in tree.children(v) {
            for s in 0..ns {
                for o in 0..no {
                    let (next, _) = inst.rm.step(s, Letter::new(i, o));
                    let target = Formula::lin((0..no).map(|o2| (1, x(c, next, o2))).collect(), Rel::Ge, 1);
                    push(
                        ConstraintKind::RewardTransition,
                        Formula::implies(Formula::x(x_index[v][s][o]), target),
                    );
                }
            }
        }
    }
    let init = initial_cf(ucw, inst.k);
    for q in 0..nq {
        push(
            ConstraintKind::CfInit,
            Formula::lin(vec![(1, y(0, q))], Rel::Eq, init.values[q] as i64),
        );
    }
    for v in 1..nv {
        let p = tree.parent(v).unwrap();
        let i = tree.input(v).unwrap();
        for o in 0..no {
            let l = Letter::new(i, o).index(no);
            for q in 0..nq {
                let preds: Vec<usize> = (0..nq).filter(|&pq| ucw.delta[pq][l].contains(&q)).collect();
                let reach = Formula::Or(preds.iter().map(|&pq| active(p, pq)).collect());
                push(
                    ConstraintKind::CfActivation,
                    Formula::implies(chosen(v, o), Formula::iff(active(v, q), reach)),
                );
            }
            for pq in 0..nq {
                for &q in &ucw.delta[pq][l] {
                    let bump = i64::from(ucw.rejecting[q]);
                    push(
                        ConstraintKind::CfTransition,
                        Formula::implies(
                            Formula::And(vec![chosen(v, o), active(p, pq)]),
                            Formula::lin(vec![(1, y(v, q)), (-1, y(p, pq))], Rel::Ge, bump),
                        ),
                    );
                }
            }
        }
    }
    for v in 0..nv {
        let options = inst
            .win
            .elements()
            .iter()
            .map(|g| {
                Formula::And(
                    (0..nq)
                        .map(|q| Formula::lin(vec![(1, y(v, q))], Rel::Le, g.values[q] as i64))
                        .collect(),
                )
            })
            .collect();
        push(ConstraintKind::Realizability, Formula::Or(options));
    }
    let mut objective = Vec::new();
    for v in 1..nv {
        let i = tree.input(v).unwrap();
        let weight = tree.count(v) as i64;
        for s in 0..ns {
            for o in 0..no {
                let (_, r) = inst.rm.step(s, Letter::new(i, o));
                if r != 0 {
                    objective.push((r * weight, x(v, s, o)));
                }
            }
        }
    }
    push(ConstraintKind::Objective, Formula::lin(objective, Rel::Ge, threshold));

    Ok(ConstraintSystem {
        x_vars,
        y_vars,
        x_names,
        y_names,
        k: inst.k,
        threshold,
        constraints: cs,
    })
}

/// Same system with each reward-transition implication `x -> sum >= 1`
/// written as the linear inequality `(1 - x) + sum >= 1`.
pub fn linearized(cs: &ConstraintSystem) -> ConstraintSystem {
    let mut out = cs.clone();
    for c in &mut out.constraints {
        if c.kind != ConstraintKind::RewardTransition {
            continue;
        }
        if let Formula::Implies(a, b) = &c.formula {
            if let (Formula::Lin(pre), Formula::Lin(post)) = (&**a, &**b) {
                let premise = pre.terms[0].1;
                let mut terms = vec![(-1, premise)];
                terms.extend(post.terms.iter().copied());
                c.formula = Formula::lin(terms, Rel::Ge, 0);
            }
        }
    }
    out
}

fn smt_int(c: i64) -> String {
    if c < 0 {
        format!("(- {})", -c)
    } else {
        c.to_string()
    }
}

fn smt_term(cs: &ConstraintSystem, c: i64, v: Var) -> String {
    let base = match v {
        Var::X(_) => format!("(ite {} 1 0)", cs.name(v)),
        Var::Y(_) => cs.name(v).to_string(),
    };
    if c == 1 {
        base
    } else {
        format!("(* {} {base})", smt_int(c))
    }
}

fn smt_formula(cs: &ConstraintSystem, f: &Formula, out: &mut String) {
    match f {
        Formula::Lin(l) => {
            // a lone boolean literal prints as itself
            if let [(1, v @ Var::X(_))] = l.terms.as_slice() {
                match (l.rel, l.rhs) {
                    (Rel::Ge, 1) | (Rel::Eq, 1) => return out.push_str(cs.name(*v)),
                    (Rel::Le, 0) | (Rel::Eq, 0) => {
                        let _ = write!(out, "(not {})", cs.name(*v));
                        return;
                    }
                    _ => {}
                }
            }
            let sum = match l.terms.len() {
                0 => "0".to_string(),
                1 => smt_term(cs, l.terms[0].0, l.terms[0].1),
                _ => {
                    let parts: Vec<String> = l.terms.iter().map(|&(c, v)| smt_term(cs, c, v)).collect();
                    format!("(+ {})", parts.join(" "))
                }
            };
            let op = match l.rel {
                Rel::Ge => ">=",
                Rel::Le => "<=",
                Rel::Eq => "=",
            };
            let _ = write!(out, "({op} {sum} {})", smt_int(l.rhs));
        }
        Formula::Not(a) => {
            out.push_str("(not ");
            smt_formula(cs, a, out);
            out.push(')');
        }
        Formula::And(v) | Formula::Or(v) => {
            let (op, empty) = if matches!(f, Formula::And(_)) {
                ("and", "true")
            } else {
                ("or", "false")
            };
            match v.len() {
                0 => out.push_str(empty),
                1 => smt_formula(cs, &v[0], out),
                _ => {
                    let _ = write!(out, "({op}");
                    for g in v {
                        out.push(' ');
                        smt_formula(cs, g, out);
                    }
                    out.push(')');
                }
            }
        }
        Formula::Implies(a, b) | Formula::Iff(a, b) => {
            let op = if matches!(f, Formula::Implies(..)) { "=>" } else { "=" };
            let _ = write!(out, "({op} ");
            smt_formula(cs, a, out);
            out.push(' ');
            smt_formula(cs, b, out);
            out.push(')');
        }
    }
}

/// SMT-LIB v2 script over `QF_LIA`.
pub fn emit_smtlib(cs: &ConstraintSystem) -> String {
    let mut out = String::new();
    out.push_str("(set-logic QF_LIA)\n");
    for name in &cs.x_names {
        let _ = writeln!(out, "(declare-const {name} Bool)");
    }
    for name in &cs.y_names {
        let _ = writeln!(out, "(declare-const {name} Int)");
    }
    for c in &cs.constraints {
        out.push_str("(assert ");
        smt_formula(cs, &c.formula, &mut out);
        out.push_str(")\n");
    }
    out.push_str("(check-sat)\n(get-model)\n");
    out
}
