use num::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::automata::ucw_for_formula;
use crate::ltl::{parse_ltl, AtomTable};
use crate::machines::{mealy_outcome, strategy_outcome};
use crate::optimize::{solve_native, ProblemInstance};
use crate::safety::find_minimal_k;
use crate::sampling::{build_sample_tree, SampleMultiset};

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn alphabet() -> Alphabet {
    Alphabet::full(AtomTable::new(["i"], ["o"]).unwrap())
}

fn ucw(text: &str) -> UniversalCoBuchi {
    let a = alphabet();
    ucw_for_formula(&parse_ltl(text, a.atoms()).unwrap(), &a).unwrap()
}

fn tree(samples: &[(&[usize], u64)]) -> SampleTree {
    build_sample_tree(&SampleMultiset::from_counts(samples.iter().map(|(s, c)| (s.to_vec(), *c))).unwrap()).unwrap()
}

#[test]
fn suffix_links_follow_longest_tree_suffix() {
    let t = tree(&[(&[0, 1], 1), (&[1, 1], 1)]);
    let go = trie_goto(&t, 2);
    let run = |inputs: &[usize]| inputs.iter().fold(0, |v, &i| go[v][i]);
    assert_eq!(run(&[0, 1, 1]), t.vertex_of(&[1, 1]).unwrap());
    assert_eq!(run(&[0, 1, 0]), t.vertex_of(&[0]).unwrap());
    assert_eq!(run(&[1, 1, 1, 1]), t.vertex_of(&[1, 1]).unwrap());
    assert_eq!(run(&[0, 0]), t.vertex_of(&[0]).unwrap());
}

fn random_instance(rng: &mut ChaCha8Rng) -> Option<ProblemInstance> {
    let formulas = ["true", "G(o <-> i)", "G(i -> X o)", "G(o -> X !o)", "G F o", "G(i -> F o)", "G(o -> i)"];
    let u = ucw(formulas[rng.gen_range(0..formulas.len())]);
    let (k, win) = find_minimal_k(&u, 3)?;
    let a = alphabet();
    let ns = rng.gen_range(1..=2);
    let rm = RewardMachine {
        num_states: ns,
        initial: 0,
        num_outputs: 2,
        trans: (0..ns)
            .map(|_| (0..a.num_letters()).map(|_| (rng.gen_range(0..ns), rng.gen_range(-2..=2))).collect())
            .collect(),
    };
    let len = rng.gen_range(1..=4);
    let mut m = SampleMultiset::new(len);
    for _ in 0..rng.gen_range(1..=5) {
        m.add((0..len).map(|_| rng.gen_range(0..2)).collect(), 1).unwrap();
    }
    ProblemInstance::new(u, k, win, rm, build_sample_tree(&m).unwrap()).ok()
}

#[test]
fn completion_is_consistent_and_safe() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 80 {
        let Some(inst) = random_instance(&mut rng) else { continue };
        let Some((_, lambda)) = solve_native(&inst) else { continue };
        let m = complete_strategy(&lambda, &inst.tree, &inst.ucw, inst.k, &inst.win, &inst.rm).unwrap();
        assert!(m.is_complete());
        assert!(verify_realizes(&m, &inst.ucw, inst.k).unwrap());
        for leaf in inst.tree.leaves() {
            let branch = inst.tree.path(leaf);
            assert_eq!(
                mealy_outcome(&m, &branch).unwrap(),
                strategy_outcome(&lambda, &inst.tree, &branch).unwrap()
            );
        }
        checked += 1;
    }
}

#[test]
fn empty_tree_extracts_a_winning_strategy() {
    let u = ucw("G(o <-> i)");
    let (k, win) = find_minimal_k(&u, 1).unwrap();
    let t = SampleTree::root_only(0);
    let rm = RewardMachine::stateless(&alphabet(), |_| 0);
    let m = complete_strategy(&PartialStrategy::empty(&t), &t, &u, k, &win, &rm).unwrap();
    assert_eq!(m.num_states, 1);
    assert_eq!(m.step(0, 0).unwrap().1, 0);
    assert_eq!(m.step(0, 1).unwrap().1, 1);
    assert!(verify_realizes(&m, &u, k).unwrap());
}

#[test]
fn infeasible_strategy_is_rejected() {
    let u = ucw("G(o <-> i)");
    let (k, win) = find_minimal_k(&u, 1).unwrap();
    let t = tree(&[(&[1], 1)]);
    let rm = RewardMachine::stateless(&alphabet(), |_| 0);
    let lambda = PartialStrategy::from_outputs(&[0]);
    assert_eq!(
        complete_strategy(&lambda, &t, &u, k, &win, &rm),
        Err(CompleteError::Infeasible)
    );
}

#[test]
fn greedy_prefers_reward_among_safe_outputs() {
    let u = ucw("true");
    let (k, win) = find_minimal_k(&u, 0).unwrap();
    let t = SampleTree::root_only(0);
    let rm = RewardMachine::stateless(&alphabet(), |l| l.output as i64);
    let m = complete_strategy(&PartialStrategy::empty(&t), &t, &u, k, &win, &rm).unwrap();
    assert_eq!(m, MealyMachine::constant(2, 1));
}

#[test]
fn verify_detects_violations() {
    let u = ucw("G(i -> o)");
    assert!(!verify_realizes(&MealyMachine::constant(2, 0), &u, 0).unwrap());
    assert!(verify_realizes(&MealyMachine::constant(2, 1), &u, 0).unwrap());
    let t = ucw("true");
    assert!(verify_realizes(&MealyMachine::constant(2, 0), &t, 0).unwrap());
}

#[test]
fn minimize_merges_equivalent_states() {
    // two copies of the same one-state behaviour
    let mut m = MealyMachine::new(3, 2, 0);
    m.trans[0] = vec![Some((1, 0)), Some((2, 1))];
    m.trans[1] = vec![Some((2, 0)), Some((1, 1))];
    m.trans[2] = vec![Some((1, 0)), Some((1, 1))];
    let min = minimize(&m);
    assert_eq!(min.num_states, 1);
    assert_eq!(min.trans[0], vec![Some((0, 0)), Some((0, 1))]);
}

fn chain(initial: Vec<(BigRational, usize)>, edges: Vec<Vec<(BigRational, usize, usize)>>) -> EnvChain {
    EnvChain {
        num_states: edges.len(),
        initial,
        edges,
    }
}

#[test]
fn constant_reward_gives_constant_average() {
    let env = chain(vec![(rat(1, 1), 0)], vec![vec![(rat(1, 1), 0, 1)]]);
    let rm = RewardMachine::stateless(&alphabet(), |l| if l.input == 1 { 3 } else { -7 });
    let v = long_run_average(&MealyMachine::constant(2, 0), &env, &rm).unwrap();
    assert_eq!(v, rat(3, 1));
}

#[test]
fn two_cycle_averages_its_rewards() {
    let env = chain(
        vec![(rat(1, 1), 0)],
        vec![vec![(rat(1, 1), 1, 0)], vec![(rat(1, 1), 0, 1)]],
    );
    let rm = RewardMachine::stateless(&alphabet(), |l| if l.input == 0 { 5 } else { -2 });
    let v = long_run_average(&MealyMachine::constant(2, 0), &env, &rm).unwrap();
    assert_eq!(v, rat(3, 2));
}

#[test]
fn absorption_splits_between_components() {
    // state 0 moves to absorbing 1 or 2 with probability 1/3 and 2/3
    let env = chain(
        vec![(rat(1, 1), 0)],
        vec![
            vec![(rat(1, 3), 1, 0), (rat(2, 3), 2, 0)],
            vec![(rat(1, 1), 1, 0)],
            vec![(rat(1, 1), 2, 1)],
        ],
    );
    let rm = RewardMachine::stateless(&alphabet(), |l| if l.input == 0 { 1 } else { 4 });
    let chain = ProductChain::build(&MealyMachine::constant(2, 0), &env, &rm).unwrap();
    let mp = mean_payoff(&chain);
    assert_eq!(mp.bsccs.len(), 2);
    let total: BigRational = mp.bsccs.iter().map(|b| b.absorption.clone()).sum();
    assert_eq!(total, rat(1, 1));
    assert_eq!(mp.value, rat(1, 3) + rat(2, 3) * rat(4, 1));
}

#[test]
fn linear_solver_checks_out() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in 1..7 {
        let a: Vec<Vec<BigRational>> = (0..n)
            .map(|i| (0..n).map(|j| rat(rng.gen_range(-4..=4) + if i == j { 20 } else { 0 }, rng.gen_range(1..=3))).collect())
            .collect();
        let b: Vec<Vec<BigRational>> = (0..n).map(|_| vec![rat(rng.gen_range(-5..=5), 1), rat(1, 7)]).collect();
        let x = solve_linear(&a, &b).unwrap();
        for i in 0..n {
            for c in 0..2 {
                let lhs: BigRational = (0..n).map(|j| &a[i][j] * &x[j][c]).sum();
                assert_eq!(lhs, b[i][c]);
            }
        }
    }
    assert!(solve_linear(&[vec![rat(1, 1), rat(2, 1)], vec![rat(2, 1), rat(4, 1)]], &[vec![rat(1, 1)], vec![rat(1, 1)]]).is_none());
}

#[test]
fn simulation_tracks_exact_value() {
    let env = chain(
        vec![(rat(1, 2), 0), (rat(1, 2), 1)],
        vec![
            vec![(rat(1, 4), 0, 0), (rat(3, 4), 1, 1)],
            vec![(rat(1, 2), 0, 1), (rat(1, 2), 1, 0)],
        ],
    );
    let mut m = MealyMachine::new(2, 2, 0);
    m.trans[0] = vec![Some((1, 0)), Some((0, 1))];
    m.trans[1] = vec![Some((0, 1)), Some((1, 0))];
    let rm = RewardMachine::stateless(&alphabet(), |l| [2, -1, 0, 3][l.index(2)]);
    let exact = long_run_average(&m, &env, &rm).unwrap().to_f64().unwrap();
    let sim = simulate_average(&m, &env, &rm, 200_000, 9).unwrap();
    assert!((exact - sim).abs() < 0.02, "{exact} vs {sim}");
}

#[test]
fn decimals_round_half_away_from_zero() {
    assert_eq!(format_decimal(&rat(-1, 4), 4), "-0.2500");
    assert_eq!(format_decimal(&rat(1, 3), 4), "0.3333");
    assert_eq!(format_decimal(&rat(-2, 3), 2), "-0.67");
    assert_eq!(format_decimal(&rat(-1, 100000), 4), "0.0000");
    assert_eq!(format_decimal(&rat(7, 2), 0), "4");
}

#[test]
fn graph_export_lists_every_edge() {
    let m = MealyMachine::constant(2, 1);
    let text = write_machine_graph(&m, &alphabet());
    assert_eq!(text.lines().filter(|l| l.contains("->")).count(), 3);
}
