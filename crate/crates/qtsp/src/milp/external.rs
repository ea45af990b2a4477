//! External solver adapter: writes the model as an LP file, invokes a
//! user-supplied command, and reads a `name value` solution file back.

use std::process::Command;

use crate::error::{Error, Result};
use crate::milp::{lpfile, MilpModel, MilpResult, SolveStatus};

/// Runs `command` (a template containing `{lp}` and `{sol}` placeholders) in
/// a private working directory.
pub(crate) fn solve(model: &MilpModel, command: &str, relax: bool) -> Result<MilpResult> {
    if !command.contains("{lp}") || !command.contains("{sol}") {
        return Err(Error::Backend(
            "solver command must contain `{lp}` and `{sol}` placeholders".into(),
        ));
    }
    let dir = tempfile::Builder::new()
        .prefix("qtsp-milp-")
        .tempdir()
        .map_err(|e| Error::Backend(format!("cannot create working directory: {e}")))?;
    let lp_path = dir.path().join("model.lp");
    let sol_path = dir.path().join("model.sol");
    std::fs::write(&lp_path, lpfile::write_lp(model, relax))?;

    let cmd = command
        .replace("{lp}", &lp_path.to_string_lossy())
        .replace("{sol}", &sol_path.to_string_lossy());
    let output = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .current_dir(dir.path())
        .output()
        .map_err(|e| Error::Backend(format!("cannot launch `{cmd}`: {e}")))?;
    if !output.status.success() {
        let stderr = String::from_utf8_lossy(&output.stderr);
        return Err(Error::Backend(format!(
            "solver command exited with {}: {}",
            output.status,
            stderr.trim()
        )));
    }
    let text = std::fs::read_to_string(&sol_path).map_err(|e| {
        Error::Backend(format!("solver wrote no solution file at {}: {e}", sol_path.display()))
    })?;
    parse_solution(model, &text)
}

/// Solution format: one `name value` pair per line; an optional `=obj=` line
/// carries the objective; blank lines and `#` comments are skipped.
fn parse_solution(model: &MilpModel, text: &str) -> Result<MilpResult> {
    let mut values = vec![0.0f64; model.n_vars()];
    let mut objective: Option<f64> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (name, value) = match (it.next(), it.next()) {
            (Some(n), Some(v)) => (n, v),
            _ => {
                return Err(Error::Backend(format!(
                    "unparsable solution line {}: `{line}`",
                    lineno + 1
                )))
            }
        };
        let value: f64 = value.parse().map_err(|_| {
            Error::Backend(format!("invalid value on solution line {}: `{line}`", lineno + 1))
        })?;
        if name == "=obj=" {
            objective = Some(value);
        } else if let Some(id) = model.var_id(name) {
            values[id] = value;
        } else {
            return Err(Error::Backend(format!("solution names unknown variable `{name}`")));
        }
    }
    let objective = objective.unwrap_or_else(|| model.objective_of(&values));
    Ok(MilpResult::new(SolveStatus::Optimal, objective, values))
}
