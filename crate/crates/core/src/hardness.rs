//! Instances of the partial-strategy problem built from graph independent
//! set, with a subset-enumeration oracle to check them against.
//!
//! Each vertex becomes a one-hot input letter and the single output atom
//! selects the current vertex. Per edge `(u_i, u_j)`, `i < j`, the automaton
//! waits in `q_e` until `u_i` is selected, then in `q'_e` until `u_j` is
//! selected, then falls into the final sink `⊥`.

use std::fmt::Write as _;

use rand::Rng;

use crate::alphabet::{Alphabet, Letter};
use crate::automata::UniversalCoBuchi;
use crate::ltl::AtomTable;
use crate::machines::{PartialStrategy, RewardMachine};
use crate::optimize::{OptimizeError, ProblemInstance};
use crate::safety::{Antichain, CountingFunction};
use crate::sampling::{build_sample_tree, SampleMultiset, SampleTree};

pub const DEFAULT_VERTEX_CAP: usize = 12;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HardnessError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("self-loop on vertex {0}")]
    SelfLoop(String),
    #[error("edge refers to unknown vertex index {0}")]
    UnknownVertex(usize),
    #[error("graph has {got} vertices, the cap is {cap}")]
    TooLarge { got: usize, cap: usize },
    #[error("bad vertex names: {0}")]
    Names(String),
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

/// Undirected simple graph. Edges are stored as `(i, j)` with `i < j`,
/// sorted and without duplicates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    names: Vec<String>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(names: Vec<String>, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, HardnessError> {
        let mut norm = Vec::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v >= names.len() {
                    return Err(HardnessError::UnknownVertex(v));
                }
            }
            if a == b {
                return Err(HardnessError::SelfLoop(names[a].clone()));
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        norm.dedup();
        Ok(Graph { names, edges: norm })
    }

    /// Vertices named `a`, `b`, ... (then `v26`, `v27`, ...).
    pub fn unnamed(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, HardnessError> {
        let names = (0..n)
            .map(|i| match i {
                0..=25 => ((b'a' + i as u8) as char).to_string(),
                _ => format!("v{i}"),
            })
            .collect();
        Graph::new(names, edges)
    }

    pub fn edgeless(n: usize) -> Self {
        Graph::unnamed(n, []).unwrap()
    }

    pub fn complete(n: usize) -> Self {
        Graph::unnamed(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)))).unwrap()
    }

    pub fn path(n: usize) -> Self {
        Graph::unnamed(n, (1..n).map(|i| (i - 1, i))).unwrap()
    }

    /// Each pair joined independently with probability `p`.
    pub fn random(rng: &mut impl Rng, n: usize, p: f64) -> Self {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(p) {
                    edges.push((i, j));
                }
            }
        }
        Graph::unnamed(n, edges).unwrap()
    }

    pub fn num_vertices(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut member = vec![false; self.num_vertices()];
        set.iter().for_each(|&v| member[v] = true);
        self.edges.iter().all(|&(a, b)| !(member[a] && member[b]))
    }
}

/// Maximum independent set by enumerating all subsets; among the largest,
/// the one with the smallest bitmask.
pub fn max_independent_set(g: &Graph) -> Vec<usize> {
    let n = g.num_vertices();
    assert!(n < 32, "subset enumeration needs fewer than 32 vertices");
    let conflicts: Vec<u32> = (0..n)
        .map(|v| {
            g.edges.iter().fold(0, |m, &(a, b)| match v {
                _ if v == a => m | 1 << b,
                _ if v == b => m | 1 << a,
                _ => m,
            })
        })
        .collect();
    let mut best = 0u32;
    for mask in 0..1u32 << n {
        if mask.count_ones() <= best.count_ones() {
            continue;
        }
        if (0..n).all(|v| mask & 1 << v == 0 || mask & conflicts[v] == 0) {
            best = mask;
        }
    }
    (0..n).filter(|&v| best & 1 << v != 0).collect()
}

/// Which transition `q'_e` takes on a non-selecting letter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GisReading {
    /// Stay in `q'_e`: once `u_i` is selected it stays selected.
    #[default]
    Corrected,
    /// Go back to `q_e`, as the transition table is literally written.
    Literal,
}

/// One-hot vertex inputs and a single output atom; output 0 is "skip",
/// output 1 is "select".
pub fn gis_alphabet(g: &Graph) -> Result<Alphabet, HardnessError> {
    let mut out = String::from("sel");
    while g.names.contains(&out) {
        out.push('_');
    }
    let atoms = AtomTable::new(g.names.iter().cloned(), [out])
        .map_err(|e| HardnessError::Names(e.to_string()))?;
    let n = g.num_vertices();
    let inputs = (0..n).map(|i| 1u64 << i).collect();
    let outputs = vec![0, 1u64 << n];
    Ok(Alphabet::with_letters(atoms, inputs, outputs))
}

/// State numbering: `q_e = 2e`, `q'_e = 2e + 1`, `⊥ = 2|H|`.
pub fn gis_automaton(g: &Graph, reading: GisReading) -> Result<UniversalCoBuchi, HardnessError> {
    let alphabet = gis_alphabet(g)?;
    let m = g.edges.len();
    let sink = 2 * m;
    let num_states = sink + 1;
    let nl = alphabet.num_letters();
    let mut delta = vec![vec![Vec::new(); nl]; num_states];
    for (e, &(i, j)) in g.edges.iter().enumerate() {
        let (q, qp) = (2 * e, 2 * e + 1);
        for t in 0..g.num_vertices() {
            let skip = Letter::new(t, 0).index(2);
            let pick = Letter::new(t, 1).index(2);
            delta[q][skip] = vec![q];
            delta[q][pick] = vec![if t == i { qp } else { q }];
            delta[qp][skip] = vec![match reading {
                GisReading::Corrected => qp,
                GisReading::Literal => q,
            }];
            delta[qp][pick] = vec![if t == j { sink } else { qp }];
        }
    }
    delta[sink] = vec![vec![sink]; nl];
    let mut rejecting = vec![false; num_states];
    rejecting[sink] = true;
    Ok(UniversalCoBuchi {
        alphabet,
        num_states,
        initial: (0..m).map(|e| 2 * e).collect(),
        rejecting,
        delta,
    })
}

/// `{f*}` with `f*(⊥) = -1` and `f*(q) = 0` elsewhere.
pub fn expected_win_antichain(g: &Graph) -> Antichain {
    let mut f = CountingFunction::constant(2 * g.edges.len() + 1, 0, 0);
    f.values[2 * g.edges.len()] = -1;
    Antichain::from_elements(vec![f])
}

#[derive(Clone, Debug)]
pub struct GisInstance {
    pub graph: Graph,
    pub instance: ProblemInstance,
    /// Required number of selected vertices, as a value `n * C` with `n = 1`.
    pub threshold: i64,
}

impl GisInstance {
    /// Tree vertex reached after reading `u_1 ... u_d`; depth `d` decides
    /// vertex `d - 1` of the graph.
    pub fn tree_vertex(&self, graph_vertex: usize) -> usize {
        let path: Vec<usize> = (0..=graph_vertex).collect();
        self.instance.tree.vertex_of(&path).unwrap()
    }

    /// Graph vertices selected by a strategy.
    pub fn decode(&self, lambda: &PartialStrategy) -> Vec<usize> {
        (0..self.graph.num_vertices())
            .filter(|&u| lambda.get(self.tree_vertex(u)) == Some(1))
            .collect()
    }

    /// Strategy selecting exactly the given graph vertices.
    pub fn encode_set(&self, set: &[usize]) -> PartialStrategy {
        let mut lambda = PartialStrategy::empty(&self.instance.tree);
        for u in 0..self.graph.num_vertices() {
            lambda.set(self.tree_vertex(u), usize::from(set.contains(&u)));
        }
        lambda
    }
}

pub fn reduce_gis(g: &Graph, kappa: u64) -> Result<GisInstance, HardnessError> {
    reduce_gis_with(g, kappa, GisReading::default(), DEFAULT_VERTEX_CAP)
}

/// The reduction with `K = 0`, the winning antichain `{f*}`, a one-state
/// reward machine paying 1 per selection and the single sample
/// `u_1 u_2 ... u_n`.
pub fn reduce_gis_with(
    g: &Graph,
    kappa: u64,
    reading: GisReading,
    vertex_cap: usize,
) -> Result<GisInstance, HardnessError> {
    let n = g.num_vertices();
    if n > vertex_cap {
        return Err(HardnessError::TooLarge { got: n, cap: vertex_cap });
    }
    let ucw = gis_automaton(g, reading)?;
    let rm = RewardMachine::stateless(&ucw.alphabet, |l| l.output as i64);
    let tree = if n == 0 {
        SampleTree::root_only(0)
    } else {
        build_sample_tree(&SampleMultiset::from_counts([((0..n).collect(), 1)]).unwrap()).unwrap()
    };
    let instance = ProblemInstance::new(ucw, 0, expected_win_antichain(g), rm, tree)?;
    Ok(GisInstance {
        graph: g.clone(),
        instance,
        threshold: kappa as i64,
    })
}

/// `vertex <name>` and `edge <a> <b>` lines; `#` starts a comment.
pub fn parse_graph(text: &str) -> Result<Graph, HardnessError> {
    let mut names: Vec<String> = Vec::new();
    let mut edges = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let err = |message: String| HardnessError::Parse { line, message };
        let words: Vec<&str> = raw.split('#').next().unwrap().split_whitespace().collect();
        match words.as_slice() {
            [] => {}
            ["vertex", name] => {
                if names.iter().any(|n| n == name) {
                    return Err(err(format!("vertex `{name}` declared twice")));
                }
                names.push(name.to_string());
            }
            ["edge", a, b] => {
                let find = |x: &str| {
                    names
                        .iter()
                        .position(|n| n == x)
                        .ok_or_else(|| err(format!("unknown vertex `{x}`")))
                };
                let (ia, ib) = (find(a)?, find(b)?);
                if ia == ib {
                    return Err(err(format!("self-loop on `{a}`")));
                }
                edges.push((ia, ib));
            }
            _ => return Err(err(format!("cannot read `{}`", raw.trim()))),
        }
    }
    Graph::new(names, edges)
}

pub fn write_graph(g: &Graph) -> String {
    let mut out = String::new();
    for name in &g.names {
        let _ = writeln!(out, "vertex {name}");
    }
    for &(a, b) in &g.edges {
        let _ = writeln!(out, "edge {} {}", g.names[a], g.names[b]);
    }
    out
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::optimize::{encode, solve_native, solve_system};
    use crate::safety::solve_safety_game;

    #[test]
    fn k3_has_seven_states() {
        let ucw = gis_automaton(&Graph::complete(3), GisReading::Corrected).unwrap();
        assert_eq!(ucw.num_states, 7);
        assert_eq!(ucw.initial, vec![0, 2, 4]);
        assert!(ucw.validate().is_ok());
    }

    #[test]
    fn edgeless_graph_keeps_only_the_sink() {
        let gis = reduce_gis(&Graph::edgeless(4), 4).unwrap();
        let inst = &gis.instance;
        assert_eq!(inst.ucw.num_states, 1);
        assert!(inst.ucw.initial.is_empty());
        for mask in 0..16usize {
            let set: Vec<usize> = (0..4).filter(|v| mask & 1 << v != 0).collect();
            assert!(inst.is_feasible(&gis.encode_set(&set)));
        }
        assert_eq!(solve_native(inst).unwrap().0, 4);
    }

    #[test]
    fn lemma_holds_on_small_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..6 {
            for _ in 0..4 {
                let g = Graph::random(&mut rng, n, 0.5);
                let ucw = gis_automaton(&g, GisReading::Corrected).unwrap();
                assert_eq!(solve_safety_game(&ucw, 0), expected_win_antichain(&g));
            }
        }
    }

    #[test]
    fn lemma_also_holds_for_literal_table() {
        let g = Graph::complete(4);
        let ucw = gis_automaton(&g, GisReading::Literal).unwrap();
        assert_eq!(solve_safety_game(&ucw, 0), expected_win_antichain(&g));
    }

    #[test]
    fn path_thresholds() {
        let g = Graph::path(3);
        for (kappa, sat) in [(2, true), (3, false)] {
            let gis = reduce_gis(&g, kappa).unwrap();
            let cs = encode(&gis.instance, gis.threshold).unwrap();
            let sol = solve_system(&cs);
            assert_eq!(sol.is_some(), sat, "kappa {kappa}");
            if let Some(a) = sol {
                assert_eq!(gis.decode(&a.strategy(&cs, &gis.instance.tree)), vec![0, 2]);
            }
        }
    }

    #[test]
    fn triangle_allows_one_vertex() {
        let gis = reduce_gis(&Graph::complete(3), 2).unwrap();
        let cs = encode(&gis.instance, 2).unwrap();
        assert!(solve_system(&cs).is_none());
        assert_eq!(solve_native(&gis.instance).unwrap().0, 1);
    }

    #[test]
    fn selecting_an_edge_is_infeasible() {
        let gis = reduce_gis(&Graph::path(3), 0).unwrap();
        assert!(gis.instance.is_feasible(&gis.encode_set(&[0, 2])));
        assert!(!gis.instance.is_feasible(&gis.encode_set(&[0, 1])));
        assert!(!gis.instance.is_feasible(&gis.encode_set(&[1, 2])));
    }

    #[test]
    fn literal_table_misses_separated_conflicts() {
        // returning to q_e on every skip forgets a selection, so alternating
        // select/skip passes through K5 unnoticed
        let g = Graph::complete(5);
        let literal = reduce_gis_with(&g, 0, GisReading::Literal, 12).unwrap();
        assert!(literal.instance.is_feasible(&literal.encode_set(&[0, 2, 4])));
        assert_eq!(solve_native(&literal.instance).unwrap().0, 3);
        let corrected = reduce_gis(&g, 0).unwrap();
        assert!(!corrected.instance.is_feasible(&corrected.encode_set(&[0, 2])));
        assert_eq!(solve_native(&corrected.instance).unwrap().0, 1);
    }

    #[test]
    fn optimum_equals_max_independent_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..30 {
            let n = rng.gen_range(1..=7);
            let g = Graph::random(&mut rng, n, 0.4);
            let gis = reduce_gis(&g, 0).unwrap();
            let (value, lambda) = solve_native(&gis.instance).unwrap();
            let set = gis.decode(&lambda);
            assert!(g.is_independent(&set));
            assert_eq!(value as usize, set.len());
            assert_eq!(set.len(), max_independent_set(&g).len());
        }
    }

    #[test]
    fn max_independent_set_small_cases() {
        assert_eq!(max_independent_set(&Graph::path(3)), vec![0, 2]);
        assert_eq!(max_independent_set(&Graph::complete(4)).len(), 1);
        assert_eq!(max_independent_set(&Graph::edgeless(3)), vec![0, 1, 2]);
        assert!(max_independent_set(&Graph::edgeless(0)).is_empty());
    }

    #[test]
    fn graph_text_round_trip() {
        let g = parse_graph("vertex a\nvertex b\nvertex c # last\n\nedge b a\nedge b c\n").unwrap();
        assert_eq!(g, Graph::path(3));
        assert_eq!(parse_graph(&write_graph(&g)).unwrap(), g);
        assert!(matches!(parse_graph("vertex a\nedge a z\n"), Err(HardnessError::Parse { line: 2, .. })));
        assert!(matches!(parse_graph("vertex a\nedge a a\n"), Err(HardnessError::Parse { .. })));
    }

    #[test]
    fn vertex_cap_is_enforced() {
        let err = reduce_gis(&Graph::edgeless(13), 0).unwrap_err();
        assert_eq!(err, HardnessError::TooLarge { got: 13, cap: 12 });
    }
}
