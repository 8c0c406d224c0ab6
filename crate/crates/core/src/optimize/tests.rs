use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::alphabet::Alphabet;
use crate::automata::ucw_for_formula;
use crate::ltl::{parse_ltl, AtomTable};
use crate::safety::find_minimal_k;
use crate::sampling::{build_sample_tree, SampleMultiset};

const FORMULAS: &[&str] = &[
    "true",
    "G(o <-> i)",
    "G(i -> X o)",
    "G(o -> X !o)",
    "G F o",
    "G(i -> F o)",
    "G(o -> i) & G(p -> !o)",
    "G(p | o) & G(i -> !p)",
    "G(!o | !p) & G(i -> X(o | p))",
];

fn alphabet(two_outputs: bool) -> Alphabet {
    let outs: &[&str] = if two_outputs { &["o", "p"] } else { &["o"] };
    Alphabet::full(AtomTable::new(["i"], outs.iter().copied()).unwrap())
}

fn random_rm(rng: &mut ChaCha8Rng, a: &Alphabet) -> RewardMachine {
    let ns = rng.gen_range(1..=2);
    RewardMachine {
        num_states: ns,
        initial: 0,
        num_outputs: a.num_outputs(),
        trans: (0..ns)
            .map(|_| {
                (0..a.num_letters())
                    .map(|_| (rng.gen_range(0..ns), rng.gen_range(-2..=3)))
                    .collect()
            })
            .collect(),
    }
}

fn random_tree(rng: &mut ChaCha8Rng, a: &Alphabet, len: usize) -> SampleTree {
    let n = rng.gen_range(1..=3);
    let mut m = SampleMultiset::new(len);
    for _ in 0..n {
        let seq = (0..len).map(|_| rng.gen_range(0..a.num_inputs())).collect();
        m.add(seq, rng.gen_range(1..=2)).unwrap();
    }
    build_sample_tree(&m).unwrap()
}

fn random_instance(rng: &mut ChaCha8Rng) -> Option<ProblemInstance> {
    let two = rng.gen_bool(0.5);
    let a = alphabet(two);
    let formulas: Vec<&str> = FORMULAS
        .iter()
        .copied()
        .filter(|f| two || !f.contains('p'))
        .collect();
    let text = formulas[rng.gen_range(0..formulas.len())];
    let ucw = ucw_for_formula(&parse_ltl(text, a.atoms()).unwrap(), &a).unwrap();
    let (k, win) = find_minimal_k(&ucw, 3)?;
    let rm = random_rm(rng, &a);
    let len = rng.gen_range(1..=if two { 2 } else { 3 });
    let tree = random_tree(rng, &a, len);
    Some(ProblemInstance::new(ucw, k, win, rm, tree).unwrap())
}

#[test]
fn dp_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 150 {
        let Some(inst) = random_instance(&mut rng) else { continue };
        let Ok(expected) = brute_force_oracle(&inst, 50_000) else { continue };
        let got = solve_native(&inst);
        assert_eq!(got, expected);
        if let Some((value, lambda)) = &got {
            assert!(inst.is_feasible(lambda));
            assert_eq!(inst.value_of(lambda), *value);
        }
        checked += 1;
    }
}

#[test]
fn binary_search_matches_dp() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 60 {
        let Some(inst) = random_instance(&mut rng) else { continue };
        let dp = solve_native(&inst);
        let search = binary_search_optimal(&inst, native_threshold_oracle(&inst));
        assert_eq!(search.as_ref().map(|s| s.value), dp.as_ref().map(|d| d.0));
        if let Some(s) = search {
            assert!(inst.is_feasible(&s.strategy));
            assert_eq!(inst.value_of(&s.strategy), s.value);
            let (lo, hi) = inst.value_bounds();
            let width = (hi - lo + 1) as f64;
            assert!(s.oracle_calls <= 2 + width.log2().ceil() as usize);
        }
        checked += 1;
    }
}

#[test]
fn thresholds_agree_with_dp_and_linearized_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 40 {
        let Some(inst) = random_instance(&mut rng) else { continue };
        let best = solve_native(&inst).map(|d| d.0);
        let (lo, hi) = inst.value_bounds();
        for t in [lo - 1, lo, (lo + hi) / 2, best.unwrap_or(lo), best.unwrap_or(lo) + 1, hi + 1] {
            let cs = encode(&inst, t).unwrap();
            let lin = linearized(&cs);
            let a = solve_system(&cs);
            let b = solve_system(&lin);
            assert_eq!(a.is_some(), best.is_some_and(|v| v >= t), "threshold {t}");
            assert_eq!(a.is_some(), b.is_some());
            if let Some(a) = a {
                assert!(a.satisfies(&cs));
                assert!(a.satisfies(&lin));
                let lambda = a.strategy(&cs, &inst.tree);
                assert!(inst.is_feasible(&lambda));
                assert!(inst.value_of(&lambda) >= t);
            }
        }
        checked += 1;
    }
}

fn fixed_instance() -> ProblemInstance {
    let a = alphabet(false);
    let ucw = ucw_for_formula(&parse_ltl("G(o <-> i)", a.atoms()).unwrap(), &a).unwrap();
    let (k, win) = find_minimal_k(&ucw, 2).unwrap();
    let rm = RewardMachine::stateless(&a, |l| l.output as i64);
    let samples = SampleMultiset::from_counts([(vec![0, 1], 2), (vec![1, 1], 1)]).unwrap();
    ProblemInstance::new(ucw, k, win, rm, build_sample_tree(&samples).unwrap()).unwrap()
}

#[test]
fn forced_outputs_give_exact_value() {
    let inst = fixed_instance();
    // o must copy i, which is on in 4 of the 6 letters
    let (value, lambda) = solve_native(&inst).unwrap();
    assert_eq!(value, 4);
    for v in 1..inst.tree.len() {
        assert_eq!(lambda.get(v), inst.tree.input(v));
    }
}

#[test]
fn encoding_counts_and_names() {
    let inst = fixed_instance();
    let cs = encode(&inst, 3).unwrap();
    let nv = inst.tree.len();
    let nq = inst.ucw.num_states;
    assert_eq!(cs.x_vars.len(), (nv - 1) * 2);
    assert_eq!(cs.y_vars.len(), nv * nq);
    let count = |k: ConstraintKind| cs.constraints.iter().filter(|c| c.kind == k).count();
    assert_eq!(count(ConstraintKind::Range), 2 * nv * nq);
    assert_eq!(count(ConstraintKind::Ambiguity), nv - 1);
    assert_eq!(count(ConstraintKind::RewardInit), inst.tree.children(0).len());
    assert_eq!(count(ConstraintKind::CfInit), nq);
    assert_eq!(count(ConstraintKind::CfActivation), (nv - 1) * 2 * nq);
    assert_eq!(count(ConstraintKind::Realizability), nv);
    assert_eq!(count(ConstraintKind::Objective), 1);
    assert!(cs.x_names.contains(&"x_0_1_0_1".to_string()));
    assert!(cs.y_names.contains(&"y_eps_0".to_string()));
}

#[test]
fn smtlib_is_deterministic_and_declares_everything() {
    let inst = fixed_instance();
    let cs = encode(&inst, 3).unwrap();
    let a = emit_smtlib(&cs);
    assert_eq!(a, emit_smtlib(&encode(&inst, 3).unwrap()));
    assert!(a.starts_with("(set-logic QF_LIA)\n"));
    assert!(a.ends_with("(check-sat)\n(get-model)\n"));
    for name in &cs.x_names {
        assert!(a.contains(&format!("(declare-const {name} Bool)")));
    }
    for name in &cs.y_names {
        assert!(a.contains(&format!("(declare-const {name} Int)")));
    }
    assert_eq!(a.matches("(assert ").count(), cs.constraints.len());
    let open = a.matches('(').count();
    assert_eq!(open, a.matches(')').count());
}

#[test]
fn external_solver_agrees_when_available() {
    let Some(solver) = ExternalSolver::from_env() else {
        eprintln!("SOLVER_BIN not set, skipping");
        return;
    };
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 15 {
        let Some(inst) = random_instance(&mut rng) else { continue };
        let best = solve_native(&inst).map(|d| d.0);
        let t = best.unwrap_or(0);
        for t in [t, t + 1] {
            let cs = encode(&inst, t).unwrap();
            let got = solver.solve(&cs).unwrap();
            assert_eq!(got.is_some(), best.is_some_and(|v| v >= t));
            if let Some(a) = got {
                let lambda = a.strategy(&cs, &inst.tree);
                assert!(inst.is_feasible(&lambda));
                assert!(inst.value_of(&lambda) >= t);
            }
        }
        checked += 1;
    }
}
