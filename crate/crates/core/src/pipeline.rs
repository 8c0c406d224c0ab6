//! End-to-end stages shared by the command-line tool and the tests: load a
//! specification, solve the bounded safety game, optimize a sample tree and
//! complete the result into a controller.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use num::{BigInt, BigRational};

use crate::alphabet::Alphabet;
use crate::automata::{ucw_for_formula, AutomatonError, UniversalCoBuchi};
use crate::complete::{complete_strategy, CompleteError};
use crate::ltl::{parse_ltl, AtomTable, Ltl};
use crate::machines::{MealyMachine, PartialStrategy, RewardMachine};
use crate::optimize::{
    binary_search_optimal, emit_smtlib, encode, native_threshold_oracle, solve_native, ExternalSolver,
    ProblemInstance, SolverError,
};
use crate::safety::{find_minimal_k, initial_cf, solve_safety_game, Antichain};
use crate::sampling::{format_input_letter, SampleTree};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Cap(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Complete(#[from] CompleteError),
}

impl From<AutomatonError> for PipelineError {
    fn from(e: AutomatonError) -> Self {
        match e {
            AutomatonError::TooLarge { .. } => PipelineError::Cap(e.to_string()),
            _ => PipelineError::Parse(e.to_string()),
        }
    }
}

/// How threshold queries are answered.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Backend {
    /// Dynamic programming over the tree.
    Native,
    /// Native optimum plus the SMT-LIB script at that threshold.
    SmtlibEmit,
    /// Bisection over thresholds with an external SMT solver.
    External(PathBuf),
}

impl FromStr for Backend {
    type Err = String;

    /// `native`, `smtlib-emit`, `external:<path>`, or `external` to use
    /// `SOLVER_BIN`.
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "native" => Ok(Backend::Native),
            "smtlib-emit" => Ok(Backend::SmtlibEmit),
            "external" => ExternalSolver::from_env()
                .map(|e| Backend::External(e.path))
                .ok_or_else(|| "SOLVER_BIN is not set to an existing file".into()),
            _ => match s.strip_prefix("external:") {
                Some(path) if !path.is_empty() => Ok(Backend::External(path.into())),
                _ => Err(format!("unknown backend `{s}`")),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Spec {
    pub alphabet: Alphabet,
    pub formula: Ltl,
    pub ucw: UniversalCoBuchi,
}

/// Formula text with `#` comment lines removed; remaining lines are joined.
pub fn formula_text(text: &str) -> String {
    text.lines()
        .map(|l| l.split('#').next().unwrap().trim())
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn load_spec(atoms: &str, formula: &str) -> Result<Spec, PipelineError> {
    let table = AtomTable::parse(atoms).map_err(|e| PipelineError::Parse(e.to_string()))?;
    if table.inputs().len() > 20 || table.outputs().len() > 20 {
        return Err(PipelineError::Cap("at most 20 input and 20 output atoms".into()));
    }
    let alphabet = Alphabet::full(table);
    let formula = parse_ltl(&formula_text(formula), alphabet.atoms()).map_err(|e| PipelineError::Parse(e.to_string()))?;
    let ucw = ucw_for_formula(&formula, &alphabet)?;
    Ok(Spec { alphabet, formula, ucw })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KChoice {
    Fixed(u32),
    Auto { k_max: u32 },
}

/// Bound and winning antichain, or `None` when the initial counting
/// function does not win at the requested bound(s).
pub fn realize(ucw: &UniversalCoBuchi, k: KChoice) -> Option<(u32, Antichain)> {
    match k {
        KChoice::Auto { k_max } => find_minimal_k(ucw, k_max),
        KChoice::Fixed(k) => {
            let win = solve_safety_game(ucw, k);
            win.dominates(&initial_cf(ucw, k)).then_some((k, win))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeSolution {
    /// `n * C*`.
    pub value: i64,
    pub strategy: PartialStrategy,
    pub oracle_calls: Option<usize>,
    /// Script at the optimal threshold, for backends that produce one.
    pub smtlib: Option<String>,
}

impl TreeSolution {
    pub fn expected(&self, tree: &SampleTree) -> BigRational {
        BigRational::new(BigInt::from(self.value), BigInt::from(tree.n()))
    }
}

pub fn solve_tree(inst: &ProblemInstance, backend: &Backend) -> Result<Option<TreeSolution>, PipelineError> {
    match backend {
        Backend::Native | Backend::SmtlibEmit => {
            let Some((value, strategy)) = solve_native(inst) else {
                return Ok(None);
            };
            let smtlib = (*backend == Backend::SmtlibEmit)
                .then(|| emit_smtlib(&encode(inst, value).expect("instance was validated")));
            Ok(Some(TreeSolution {
                value,
                strategy,
                oracle_calls: None,
                smtlib,
            }))
        }
        Backend::External(path) => {
            let solver = ExternalSolver::new(path.clone());
            let mut failure = None;
            let outcome = binary_search_optimal(inst, |t| {
                let cs = encode(inst, t).expect("instance was validated");
                match solver.solve(&cs) {
                    Ok(a) => a.map(|a| a.strategy(&cs, &inst.tree)),
                    Err(e) => {
                        failure.get_or_insert(e);
                        None
                    }
                }
            });
            if let Some(e) = failure {
                return Err(e.into());
            }
            Ok(outcome.map(|o| TreeSolution {
                smtlib: Some(emit_smtlib(&encode(inst, o.value).expect("instance was validated"))),
                value: o.value,
                strategy: o.strategy,
                oracle_calls: Some(o.oracle_calls),
            }))
        }
    }
}

/// Same optimum through bisection with the native constraint solver.
pub fn solve_tree_by_bisection(inst: &ProblemInstance) -> Option<TreeSolution> {
    binary_search_optimal(inst, native_threshold_oracle(inst)).map(|o| TreeSolution {
        value: o.value,
        strategy: o.strategy,
        oracle_calls: Some(o.oracle_calls),
        smtlib: None,
    })
}

/// One line per nonroot vertex in preorder: `l1;l2;... -> output`.
pub fn write_strategy(lambda: &PartialStrategy, tree: &SampleTree, alphabet: &Alphabet) -> String {
    let mut out = String::new();
    for v in 1..tree.len() {
        let prefix: Vec<String> = tree.path(v).iter().map(|&i| format_input_letter(alphabet, i)).collect();
        let o = lambda.get(v).map_or("?".to_string(), |o| alphabet.format_output(o));
        let _ = writeln!(out, "{} -> {o}", prefix.join(";"));
    }
    out
}

/// Controller that raises `atom` only when the specification forces it:
/// the safe completion of the empty strategy under a reward of -1 for every
/// letter setting `atom`.
pub fn avoiding_baseline(
    ucw: &UniversalCoBuchi,
    k: u32,
    win: &Antichain,
    atom: &str,
) -> Result<MealyMachine, PipelineError> {
    let a = &ucw.alphabet;
    let bit = a
        .atoms()
        .index_of(atom)
        .filter(|&i| !a.atoms().is_input(i))
        .ok_or_else(|| PipelineError::Parse(format!("`{atom}` is not an output atom")))?;
    let penalty = RewardMachine::stateless(a, |l| -(((a.output_valuation(l.output) >> bit) & 1) as i64));
    let tree = SampleTree::root_only(0);
    Ok(complete_strategy(&PartialStrategy::empty(&tree), &tree, ucw, k, win, &penalty)?)
}
