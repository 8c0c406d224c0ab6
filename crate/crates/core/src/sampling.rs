//! Sample multisets, sample trees and oblivious environment chains.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num::{BigInt, BigRational, One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{Alphabet, LetterError};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("samples must all have length {expected}, found length {got}")]
    Ragged { expected: usize, got: usize },
    #[error("sample multiset is empty")]
    Empty,
    #[error("sample count must be positive")]
    ZeroCount,
    #[error("input sequence is not a branch of the sample tree")]
    NotABranch,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("environment chain: {0}")]
    Chain(String),
}

/// Multiset of equal-length input sequences (input letter indices).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleMultiset {
    length: usize,
    counts: BTreeMap<Vec<usize>, u64>,
}

impl SampleMultiset {
    pub fn new(length: usize) -> Self {
        SampleMultiset {
            length,
            counts: BTreeMap::new(),
        }
    }

    pub fn from_counts(
        items: impl IntoIterator<Item = (Vec<usize>, u64)>,
    ) -> Result<Self, SampleError> {
        let mut out: Option<SampleMultiset> = None;
        for (seq, c) in items {
            let m = out.get_or_insert_with(|| SampleMultiset::new(seq.len()));
            m.add(seq, c)?;
        }
        let m = out.ok_or(SampleError::Empty)?;
        Ok(m)
    }

    pub fn add(&mut self, seq: Vec<usize>, count: u64) -> Result<(), SampleError> {
        if seq.len() != self.length {
            return Err(SampleError::Ragged {
                expected: self.length,
                got: seq.len(),
            });
        }
        if count == 0 {
            return Err(SampleError::ZeroCount);
        }
        *self.counts.entry(seq).or_insert(0) += count;
        Ok(())
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn n(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn counts(&self) -> &BTreeMap<Vec<usize>, u64> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub parent: Option<usize>,
    /// Last input letter; `None` at the root.
    pub input: Option<usize>,
    pub depth: usize,
    /// Number of samples with this prefix.
    pub count: u64,
    /// Children ordered by input letter.
    pub children: Vec<usize>,
}

/// Prefix tree of a sample multiset. Vertices are numbered in depth-first
/// preorder with children visited by increasing input letter, so the root
/// is vertex 0 and every parent precedes its children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleTree {
    vertices: Vec<Vertex>,
    length: usize,
}

pub fn build_sample_tree(samples: &SampleMultiset) -> Result<SampleTree, SampleError> {
    if samples.is_empty() {
        return Err(SampleError::Empty);
    }
    let mut tree = SampleTree::root_only(samples.length);
    tree.vertices[0].count = 0;
    // the BTreeMap iterates sequences lexicographically, which is exactly
    // the preorder described above
    for (seq, &c) in &samples.counts {
        let mut v = 0;
        tree.vertices[0].count += c;
        for (d, &i) in seq.iter().enumerate() {
            let existing = tree.vertices[v]
                .children
                .iter()
                .copied()
                .find(|&w| tree.vertices[w].input == Some(i));
            v = match existing {
                Some(w) => w,
                None => {
                    let w = tree.vertices.len();
                    tree.vertices.push(Vertex {
                        parent: Some(v),
                        input: Some(i),
                        depth: d + 1,
                        count: 0,
                        children: Vec::new(),
                    });
                    tree.vertices[v].children.push(w);
                    w
                }
            };
            tree.vertices[v].count += c;
        }
    }
    Ok(tree)
}

impl SampleTree {
    /// Tree with only the root, standing for an empty sample set.
    pub fn root_only(length: usize) -> Self {
        SampleTree {
            vertices: vec![Vertex {
                parent: None,
                input: None,
                depth: 0,
                count: 1,
                children: Vec::new(),
            }],
            length,
        }
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Sample length `L`.
    pub fn length(&self) -> usize {
        self.length
    }

    /// Number of samples `n`.
    pub fn n(&self) -> u64 {
        self.vertices[0].count
    }

    pub fn vertex(&self, v: usize) -> &Vertex {
        &self.vertices[v]
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn count(&self, v: usize) -> u64 {
        self.vertices[v].count
    }

    pub fn input(&self, v: usize) -> Option<usize> {
        self.vertices[v].input
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.vertices[v].children
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.vertices[v].parent
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.vertices[v].children.is_empty()
    }

    pub fn child(&self, v: usize, input: usize) -> Option<usize> {
        self.vertices[v]
            .children
            .iter()
            .copied()
            .find(|&w| self.vertices[w].input == Some(input))
    }

    /// Probability of the edge from the parent of `v` to `v`.
    pub fn edge_prob(&self, v: usize) -> BigRational {
        let p = self.vertices[v].parent.expect("root has no incoming edge");
        BigRational::new(
            BigInt::from(self.vertices[v].count),
            BigInt::from(self.vertices[p].count),
        )
    }

    /// Input word from the root to `v`.
    pub fn path(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.vertices[v].depth);
        let mut cur = v;
        while let Some(i) = self.vertices[cur].input {
            out.push(i);
            cur = self.vertices[cur].parent.unwrap();
        }
        out.reverse();
        out
    }

    /// Vertices from depth 1 to `v`.
    pub fn path_vertices(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = v;
        while let Some(p) = self.vertices[cur].parent {
            out.push(cur);
            cur = p;
        }
        out.reverse();
        out
    }

    pub fn vertex_of(&self, inputs: &[usize]) -> Option<usize> {
        inputs.iter().try_fold(0, |v, &i| self.child(v, i))
    }

    /// Leaves in vertex order; each leaf stands for its root-to-leaf branch.
    pub fn leaves(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.is_leaf(v) && v != 0).collect()
    }

    /// Product of the edge probabilities along an input word that must lead
    /// from the root to a leaf.
    pub fn branch_probability(&self, inputs: &[usize]) -> Result<BigRational, SampleError> {
        let leaf = self.vertex_of(inputs).ok_or(SampleError::NotABranch)?;
        if leaf == 0 || !self.is_leaf(leaf) {
            return Err(SampleError::NotABranch);
        }
        Ok(self
            .path_vertices(leaf)
            .into_iter()
            .map(|v| self.edge_prob(v))
            .fold(BigRational::one(), |a, b| a * b))
    }

    /// The multiset the tree was built from.
    pub fn to_multiset(&self) -> SampleMultiset {
        let mut m = SampleMultiset::new(self.length);
        for leaf in self.leaves() {
            m.add(self.path(leaf), self.count(leaf)).unwrap();
        }
        m
    }
}

/// Finite Markov chain emitting one input letter per transition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvChain {
    pub num_states: usize,
    pub initial: Vec<(BigRational, usize)>,
    /// Per state: (probability, next state, emitted input letter).
    pub edges: Vec<Vec<(BigRational, usize, usize)>>,
}

impl EnvChain {
    pub fn validate(&self, num_inputs: usize) -> Result<(), SampleError> {
        let err = |m: String| Err(SampleError::Chain(m));
        let one = BigRational::one();
        let init: BigRational = self.initial.iter().map(|(p, _)| p.clone()).sum();
        if init != one {
            return err(format!("initial distribution sums to {init}"));
        }
        if self.edges.len() != self.num_states {
            return err("edge table does not match state count".into());
        }
        if self.initial.iter().any(|(p, s)| *s >= self.num_states || *p <= BigRational::zero()) {
            return err("bad initial entry".into());
        }
        for (s, out) in self.edges.iter().enumerate() {
            let total: BigRational = out.iter().map(|(p, _, _)| p.clone()).sum();
            if total != one {
                return err(format!("state {s} has outgoing probability {total}"));
            }
            for (p, t, i) in out {
                if *t >= self.num_states || *i >= num_inputs || *p <= BigRational::zero() {
                    return err(format!("bad edge from state {s}"));
                }
            }
        }
        Ok(())
    }
}

// exact sampling from a rational distribution: draw an integer below the
// common denominator
struct Dist {
    total: u64,
    cumulative: Vec<u64>,
}

impl Dist {
    fn new(probs: &[BigRational]) -> Self {
        let mut den = BigInt::one();
        for p in probs {
            den = num::integer::lcm(den, p.denom().clone());
        }
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = BigInt::zero();
        for p in probs {
            acc += p.numer() * (&den / p.denom());
            cumulative.push(acc.to_u64().expect("probability denominators must fit in 64 bits"));
        }
        Dist {
            total: den.to_u64().expect("probability denominators must fit in 64 bits"),
            cumulative,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let x = rng.gen_range(0..self.total);
        self.cumulative.iter().position(|&c| x < c).unwrap()
    }
}

/// `n` independent runs of length `len`, deterministic in `seed`.
pub fn sample_env(env: &EnvChain, n: u64, len: usize, seed: u64) -> SampleMultiset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = Dist::new(&env.initial.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>());
    let steps: Vec<Dist> = env
        .edges
        .iter()
        .map(|e| Dist::new(&e.iter().map(|(p, _, _)| p.clone()).collect::<Vec<_>>()))
        .collect();
    let mut out = SampleMultiset::new(len);
    for _ in 0..n {
        let mut s = env.initial[init.draw(&mut rng)].1;
        let mut seq = Vec::with_capacity(len);
        for _ in 0..len {
            let (_, t, i) = &env.edges[s][steps[s].draw(&mut rng)];
            seq.push(*i);
            s = *t;
        }
        out.add(seq, 1).unwrap();
    }
    out
}

/// Temperature shorthand of the weather example: `2 = !M1,!M2`,
/// `1 = M1,!M2`, `0 = !M1,M2`, `-1 = M1,M2`.
pub fn temperature_input(alphabet: &Alphabet, t: i64) -> Option<usize> {
    let atoms = alphabet.atoms();
    let m1 = atoms.index_of("M1").filter(|&i| atoms.is_input(i))?;
    let m2 = atoms.index_of("M2").filter(|&i| atoms.is_input(i))?;
    let (b1, b2) = match t {
        2 => (false, false),
        1 => (true, false),
        0 => (false, true),
        -1 => (true, true),
        _ => return None,
    };
    let v = (u64::from(b1) << m1) | (u64::from(b2) << m2);
    alphabet.input_of(v)
}

/// Inverse of [`temperature_input`].
pub fn input_temperature(alphabet: &Alphabet, input: usize) -> Option<i64> {
    (-1..=2).find(|&t| temperature_input(alphabet, t) == Some(input))
}

/// Whether the alphabet's inputs are exactly the weather pair `M1 M2`.
pub fn uses_temperatures(alphabet: &Alphabet) -> bool {
    alphabet.atoms().inputs() == ["M1", "M2"] && alphabet.num_inputs() == 4
}

/// Parses an input letter written as a signed-atom list or, when the
/// alphabet has the `M1`/`M2` inputs, as a temperature.
pub fn parse_input_letter(alphabet: &Alphabet, text: &str) -> Result<usize, LetterError> {
    let text = text.trim();
    if let Ok(t) = text.parse::<i64>() {
        return temperature_input(alphabet, t).ok_or_else(|| LetterError::NotALetter(text.into()));
    }
    alphabet.parse_input_valuation(text)
}

/// Temperature when the alphabet is the weather one, signed atoms otherwise.
pub fn format_input_letter(alphabet: &Alphabet, input: usize) -> String {
    if uses_temperatures(alphabet) {
        if let Some(t) = input_temperature(alphabet, input) {
            return t.to_string();
        }
    }
    alphabet.format_input(input)
}

/// `count: l1;l2;...` lines.
pub fn parse_samples(text: &str, alphabet: &Alphabet) -> Result<SampleMultiset, SampleError> {
    let mut items = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let perr = |message: String| SampleError::Parse { line, message };
        let (count, seq) = body
            .split_once(':')
            .ok_or_else(|| perr("expected `count: letters`".into()))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| perr(format!("bad count `{}`", count.trim())))?;
        let seq = seq
            .split(';')
            .map(|l| parse_input_letter(alphabet, l).map_err(|e| perr(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        items.push((seq, count, line));
    }
    let mut out: Option<SampleMultiset> = None;
    for (seq, count, line) in items {
        let m = out.get_or_insert_with(|| SampleMultiset::new(seq.len()));
        m.add(seq, count).map_err(|e| SampleError::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    out.ok_or(SampleError::Empty)
}

pub fn write_samples(samples: &SampleMultiset, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for (seq, c) in samples.counts() {
        let letters: Vec<String> = seq.iter().map(|&i| format_input_letter(alphabet, i)).collect();
        let _ = writeln!(out, "{c}: {}", letters.join(";"));
    }
    out
}

pub fn parse_rational(text: &str) -> Option<BigRational> {
    let text = text.trim();
    match text.split_once('/') {
        Some((a, b)) => {
            let a: BigInt = a.trim().parse().ok()?;
            let b: BigInt = b.trim().parse().ok()?;
            if b.is_zero() {
                return None;
            }
            Some(BigRational::new(a, b))
        }
        None => Some(BigRational::from_integer(text.parse().ok()?)),
    }
}

/// `state N`, `init s p`, `edge s p s' <letter>` lines.
pub fn parse_env_chain(text: &str, alphabet: &Alphabet) -> Result<EnvChain, SampleError> {
    let mut num_states = None;
    let mut initial = Vec::new();
    let mut edges: Vec<Vec<(BigRational, usize, usize)>> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap().trim();
        if body.is_empty() {
            continue;
        }
        let perr = |message: String| SampleError::Parse { line, message };
        let toks: Vec<&str> = body.split_whitespace().collect();
        let state = |t: &str| -> Result<usize, SampleError> {
            let s: usize = t.parse().map_err(|_| perr(format!("bad state `{t}`")))?;
            match num_states {
                Some(n) if s < n => Ok(s),
                Some(_) => Err(perr(format!("state {s} out of range"))),
                None => Err(perr("missing `state N` header".into())),
            }
        };
        let prob = |t: &str| parse_rational(t).ok_or_else(|| perr(format!("bad probability `{t}`")));
        match toks.as_slice() {
            ["state", n] => {
                let n: usize = n.parse().map_err(|_| perr("bad state count".into()))?;
                num_states = Some(n);
                edges = vec![Vec::new(); n];
            }
            ["init", s, p] => initial.push((prob(p)?, state(s)?)),
            ["edge", s, p, t, letter @ ..] => {
                let letter = parse_input_letter(alphabet, &letter.join(" "))
                    .map_err(|e| perr(e.to_string()))?;
                let s = state(s)?;
                edges[s].push((prob(p)?, state(t)?, letter));
            }
            _ => return Err(perr(format!("unrecognized line `{body}`"))),
        }
    }
    let env = EnvChain {
        num_states: num_states.ok_or_else(|| SampleError::Parse {
            line: 0,
            message: "missing `state N` header".into(),
        })?,
        initial,
        edges,
    };
    env.validate(alphabet.num_inputs())?;
    Ok(env)
}

pub fn write_env_chain(env: &EnvChain, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "state {}", env.num_states);
    for (p, s) in &env.initial {
        let _ = writeln!(out, "init {s} {p}");
    }
    for (s, es) in env.edges.iter().enumerate() {
        for (p, t, i) in es {
            let _ = writeln!(out, "edge {s} {p} {t} {}", format_input_letter(alphabet, *i));
        }
    }
    out
}
