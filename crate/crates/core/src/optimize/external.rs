//! Bridge to an external SMT-LIB solver binary.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;

use super::encode::{emit_smtlib, ConstraintSystem};
use super::fd::Assignment;

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("could not run solver: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver answered `{0}`")]
    Unexpected(String),
}

#[derive(Clone, Debug)]
pub struct ExternalSolver {
    pub path: PathBuf,
}

impl ExternalSolver {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        ExternalSolver { path: path.into() }
    }

    /// Solver named by the `SOLVER_BIN` environment variable, if set and
    /// pointing at an existing file.
    pub fn from_env() -> Option<Self> {
        let path = PathBuf::from(std::env::var_os("SOLVER_BIN")?);
        path.is_file().then(|| ExternalSolver { path })
    }

    /// Runs the solver on the emitted script. `None` means unsatisfiable.
    pub fn solve(&self, cs: &ConstraintSystem) -> Result<Option<Assignment>, SolverError> {
        let mut file = tempfile::Builder::new().suffix(".smt2").tempfile()?;
        file.write_all(emit_smtlib(cs).as_bytes())?;
        file.flush()?;
        let output = Command::new(&self.path).arg(file.path()).output()?;
        let stdout = String::from_utf8_lossy(&output.stdout);
        let mut lines = stdout.lines();
        match lines.next().map(str::trim) {
            Some("unsat") => Ok(None),
            Some("sat") => {
                let rest: Vec<&str> = lines.collect();
                Ok(Some(parse_model(cs, &rest.join("\n"))?))
            }
            other => Err(SolverError::Unexpected(
                other.unwrap_or("").to_string() + &String::from_utf8_lossy(&output.stderr),
            )),
        }
    }
}

fn tokens(text: &str) -> Vec<String> {
    let spaced = text.replace('(', " ( ").replace(')', " ) ");
    spaced.split_whitespace().map(str::to_string).collect()
}

// reads `(define-fun name () Sort value)` entries; negative integers print
// as `(- n)`
fn parse_model(cs: &ConstraintSystem, text: &str) -> Result<Assignment, SolverError> {
    let toks = tokens(text);
    let mut values: HashMap<String, i64> = HashMap::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i] != "define-fun" || i + 5 >= toks.len() {
            i += 1;
            continue;
        }
        let name = toks[i + 1].clone();
        let sort = toks[i + 4].as_str();
        let mut j = i + 5;
        let value = match (sort, toks[j].as_str()) {
            ("Bool", "true") => Some(1),
            ("Bool", "false") => Some(0),
            ("Int", "(") if toks.get(j + 1).map(String::as_str) == Some("-") => {
                j += 2;
                toks[j].parse::<i64>().ok().map(|v| -v)
            }
            ("Int", v) => v.parse().ok(),
            _ => None,
        };
        if let Some(v) = value {
            values.insert(name, v);
        }
        i = j + 1;
    }
    let lookup = |name: &str, default: i64| values.get(name).copied().unwrap_or(default);
    let mut out: Vec<i64> = cs.x_names.iter().map(|n| lookup(n, 0)).collect();
    out.extend(cs.y_names.iter().map(|n| lookup(n, -1)));
    Ok(Assignment { values: out })
}
