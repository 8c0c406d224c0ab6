//! `hsynth`: synthesis of controllers from an LTL specification, a reward
//! machine and sampled environment behaviour.
//!
//! Exit codes: 0 success, 1 unreadable input, 2 unrealizable or infeasible,
//! 3 resource cap exceeded.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num::{BigInt, BigRational};

use hsynth::automata::write_ucw;
use hsynth::complete::{complete_strategy, format_decimal, long_run_average, verify_realizes, write_machine_graph};
use hsynth::hardness::{parse_graph, reduce_gis, HardnessError};
use hsynth::machines::{parse_reward_machine, write_mealy};
use hsynth::optimize::{emit_smtlib, encode, solve_system, ExternalSolver, ProblemInstance};
use hsynth::pipeline::{load_spec, realize, solve_tree, write_strategy, Backend, KChoice, PipelineError, Spec};
use hsynth::safety::{Antichain, DEFAULT_K_MAX};
use hsynth::sampling::{build_sample_tree, parse_env_chain, parse_samples, sample_env, write_samples, EnvChain};

#[derive(Parser)]
#[command(name = "hsynth", version, about = "Reward-optimal reactive synthesis from samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Translate the formula and solve the bounded safety game.
    Realize {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal realizability-preserving strategy on a sample tree.
    SolveTree {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the tree, complete the strategy into a Mealy machine, verify it
    /// and evaluate it against the environment chain.
    Synthesize {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        tree: TreeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Independent-set reduction on a graph file.
    Gis {
        #[arg(long)]
        graph: PathBuf,
        /// Threshold to decide in addition to the optimum.
        #[arg(long)]
        kappa: Option<u64>,
        #[arg(long, default_value = "native")]
        backend: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SpecArgs {
    /// File with `inputs: ...` and `outputs: ...` lines.
    #[arg(long)]
    atoms: PathBuf,
    /// File holding the LTL formula.
    #[arg(long)]
    formula: PathBuf,
    /// Fixed co-Büchi bound.
    #[arg(long, conflicts_with = "k_auto")]
    k: Option<u32>,
    /// Search the smallest bound up to --k-max (the default).
    #[arg(long)]
    k_auto: bool,
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: u32,
}

#[derive(Args)]
struct TreeArgs {
    /// Reward machine file.
    #[arg(long)]
    reward: PathBuf,
    /// Environment chain to sample from.
    #[arg(long, required_unless_present = "samples", conflicts_with = "samples")]
    env: Option<PathBuf>,
    /// Sample multiset file.
    #[arg(long)]
    samples: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    n: u64,
    #[arg(long, default_value_t = 6)]
    len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// native, smtlib-emit, external:<path> or external (uses SOLVER_BIN).
    #[arg(long, default_value = "native")]
    backend: String,
    /// Where to write the SMT-LIB script at the optimal threshold.
    #[arg(long)]
    smt_dump: Option<PathBuf>,
}

enum Failure {
    Parse(String),
    Infeasible(String),
    Cap(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Parse(_) => 1,
            Failure::Infeasible(_) => 2,
            Failure::Cap(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Parse(m) | Failure::Infeasible(m) | Failure::Cap(m) => m,
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Cap(m) => Failure::Cap(m),
            other => Failure::Parse(other.to_string()),
        }
    }
}

impl From<HardnessError> for Failure {
    fn from(e: HardnessError) -> Self {
        match e {
            HardnessError::TooLarge { .. } => Failure::Cap(e.to_string()),
            other => Failure::Parse(other.to_string()),
        }
    }
}

type Outcome = Result<String, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Parse(format!("{}: {e}", path.display()))
}

fn write_out(dir: &Option<PathBuf>, name: &str, text: &str) -> Result<(), Failure> {
    if let Some(dir) = dir {
        fs::create_dir_all(dir).map_err(|e| parse_err(dir, e))?;
        let path = dir.join(name);
        fs::write(&path, text).map_err(|e| parse_err(&path, e))?;
    }
    Ok(())
}

fn rational(num: i64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn show(x: &BigRational) -> String {
    format!("{x} ({})", format_decimal(x, 4))
}

struct Realized {
    spec: Spec,
    k: u32,
    win: Antichain,
}

fn load_and_realize(args: &SpecArgs, report: &mut String) -> Result<Realized, Failure> {
    let spec = load_spec(&read(&args.atoms)?, &read(&args.formula)?)?;
    let choice = match args.k {
        Some(k) => KChoice::Fixed(k),
        None => KChoice::Auto { k_max: args.k_max },
    };
    let _ = writeln!(report, "automaton states: {}", spec.ucw.num_states);
    let Some((k, win)) = realize(&spec.ucw, choice) else {
        let bound = match choice {
            KChoice::Fixed(k) => format!("K = {k}"),
            KChoice::Auto { k_max } => format!("any K <= {k_max}"),
        };
        return Err(Failure::Infeasible(format!("{report}realizable: no (not at {bound})")));
    };
    let _ = writeln!(report, "realizable: yes");
    let _ = writeln!(report, "K: {k}");
    let _ = writeln!(report, "antichain size: {}", win.len());
    Ok(Realized { spec, k, win })
}

fn cmd_realize(spec: &SpecArgs, out: &Option<PathBuf>) -> Outcome {
    let mut report = String::new();
    let r = load_and_realize(spec, &mut report)?;
    write_out(out, "automaton.ucw", &write_ucw(&r.spec.ucw))?;
    write_out(out, "antichain.txt", &r.win.dump())?;
    Ok(report)
}

struct Solved {
    realized: Realized,
    env: Option<EnvChain>,
    inst: ProblemInstance,
    value: i64,
    lambda: hsynth::machines::PartialStrategy,
}

fn solve(spec: &SpecArgs, tree: &TreeArgs, out: &Option<PathBuf>, report: &mut String) -> Result<Solved, Failure> {
    let backend: Backend = tree.backend.parse().map_err(Failure::Parse)?;
    let realized = load_and_realize(spec, report)?;
    let a = &realized.spec.alphabet;
    let rm = parse_reward_machine(&read(&tree.reward)?, a).map_err(|e| parse_err(&tree.reward, e))?;
    let (samples, env) = match (&tree.samples, &tree.env) {
        (Some(path), _) => (parse_samples(&read(path)?, a).map_err(|e| parse_err(path, e))?, None),
        (None, Some(path)) => {
            let env = parse_env_chain(&read(path)?, a).map_err(|e| parse_err(path, e))?;
            if tree.n == 0 || tree.len == 0 {
                return Err(Failure::Parse("--n and --len must be at least 1".into()));
            }
            (sample_env(&env, tree.n, tree.len, tree.seed), Some(env))
        }
        (None, None) => return Err(Failure::Parse("one of --samples or --env is required".into())),
    };
    write_out(out, "samples.txt", &write_samples(&samples, a))?;
    let t = build_sample_tree(&samples).map_err(|e| Failure::Parse(e.to_string()))?;
    let _ = writeln!(report, "samples: n = {}, L = {}, tree vertices = {}", t.n(), t.length(), t.len());
    let inst = ProblemInstance::new(realized.spec.ucw.clone(), realized.k, realized.win.clone(), rm, t)
        .map_err(|e| Failure::Parse(e.to_string()))?;
    let sol = solve_tree(&inst, &backend)?
        .ok_or_else(|| Failure::Infeasible(format!("{report}no realizability-preserving strategy")))?;
    let c = sol.expected(&inst.tree);
    let _ = writeln!(report, "n*C*: {}", sol.value);
    let _ = writeln!(report, "C*: {}", show(&c));
    if let Some(calls) = sol.oracle_calls {
        let _ = writeln!(report, "solver calls: {calls}");
    }
    write_out(out, "strategy.txt", &write_strategy(&sol.strategy, &inst.tree, a))?;
    if let Some(path) = &tree.smt_dump {
        let script = sol
            .smtlib
            .clone()
            .unwrap_or_else(|| emit_smtlib(&encode(&inst, sol.value).expect("instance was validated")));
        fs::write(path, script).map_err(|e| parse_err(path, e))?;
    }
    Ok(Solved {
        realized,
        env,
        inst,
        value: sol.value,
        lambda: sol.strategy,
    })
}

fn cmd_solve_tree(spec: &SpecArgs, tree: &TreeArgs, out: &Option<PathBuf>) -> Outcome {
    let mut report = String::new();
    solve(spec, tree, out, &mut report)?;
    write_out(out, "summary.txt", &report)?;
    Ok(report)
}

fn cmd_synthesize(spec: &SpecArgs, tree: &TreeArgs, out: &Option<PathBuf>) -> Outcome {
    let mut report = String::new();
    let s = solve(spec, tree, out, &mut report)?;
    let (ucw, k, win) = (&s.realized.spec.ucw, s.realized.k, &s.realized.win);
    let m = complete_strategy(&s.lambda, &s.inst.tree, ucw, k, win, &s.inst.rm)
        .map_err(|e| Failure::Infeasible(e.to_string()))?;
    let ok = verify_realizes(&m, ucw, k).map_err(|e| Failure::Parse(e.to_string()))?;
    let a = &s.realized.spec.alphabet;
    let _ = writeln!(report, "machine states: {}", m.num_states);
    let _ = writeln!(report, "realizes: {}", if ok { "yes" } else { "no" });
    if let Some(env) = &s.env {
        let lra = long_run_average(&m, env, &s.inst.rm).map_err(|e| Failure::Parse(e.to_string()))?;
        let per_step = rational(s.value, s.inst.tree.n() * s.inst.tree.length() as u64);
        let _ = writeln!(report, "sample-tree average per step: {}", show(&per_step));
        let _ = writeln!(report, "mean payoff: {}", show(&lra));
    }
    write_out(out, "machine.mealy", &write_mealy(&m, a))?;
    write_out(out, "machine.dot", &write_machine_graph(&m, a))?;
    write_out(out, "summary.txt", &report)?;
    Ok(report)
}

fn cmd_gis(graph: &Path, kappa: Option<u64>, backend: &str, out: &Option<PathBuf>) -> Outcome {
    let backend: Backend = backend.parse().map_err(Failure::Parse)?;
    let g = parse_graph(&read(graph)?).map_err(|e| parse_err(graph, e))?;
    let gis = reduce_gis(&g, kappa.unwrap_or(0))?;
    let inst = &gis.instance;
    let mut report = String::new();
    let _ = writeln!(report, "vertices: {}, edges: {}", g.num_vertices(), g.edges().len());
    let _ = writeln!(report, "automaton states: {}", inst.ucw.num_states);
    let sol = solve_tree(inst, &backend)?.expect("selecting nothing is always feasible");
    let set = gis.decode(&sol.strategy);
    let names: Vec<&str> = set.iter().map(|&v| g.names()[v].as_str()).collect();
    let _ = writeln!(report, "optimum: {}", sol.value);
    let _ = writeln!(report, "set: {{{}}}", names.join(", "));
    let independent = g.is_independent(&set);
    let _ = writeln!(report, "independent: {}", if independent { "yes" } else { "no" });
    write_out(out, "instance.ucw", &write_ucw(&inst.ucw))?;
    write_out(out, "report.txt", &report)?;
    if let Some(kappa) = kappa {
        let cs = encode(inst, kappa as i64).expect("instance was validated");
        let feasible = match &backend {
            Backend::External(path) => ExternalSolver::new(path.clone())
                .solve(&cs)
                .map_err(|e| Failure::Parse(e.to_string()))?
                .is_some(),
            _ => solve_system(&cs).is_some(),
        };
        if !feasible {
            return Err(Failure::Infeasible(format!(
                "{report}infeasible at threshold {kappa}; optimum {}",
                sol.value
            )));
        }
        let _ = writeln!(report, "feasible at threshold {kappa}; optimum {}", sol.value);
    }
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Realize { spec, out } => cmd_realize(spec, out),
        Command::SolveTree { spec, tree, out } => cmd_solve_tree(spec, tree, out),
        Command::Synthesize { spec, tree, out } => cmd_synthesize(spec, tree, out),
        Command::Gis {
            graph,
            kappa,
            backend,
            out,
        } => cmd_gis(graph, *kappa, backend, out),
    };
    match result {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            match &f {
                // reports that end in a negative verdict go to stdout
                Failure::Infeasible(m) => println!("{m}"),
                _ => eprintln!("error: {}", f.message()),
            }
            ExitCode::from(f.code())
        }
    }
}
