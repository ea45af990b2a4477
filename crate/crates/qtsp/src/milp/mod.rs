//! Backend-neutral linear/integer programming layer: model builder, a
//! built-in bounded simplex with branch-and-bound, an external solver
//! adapter, and the integral subtour-separation loop shared by the
//! matheuristics.

mod bb;
mod external;
mod lpfile;
mod sec;
mod simplex;

pub use lpfile::{parse_lp_file, write_lp_file};
pub use sec::{cycles_of_edges, solve_with_integral_sec, SecOutcome, SEC_ROUND_CAP};

use std::collections::{BTreeMap, HashMap};
use std::time::Duration;

use crate::error::{Error, Result};

pub type VarId = usize;

pub const FEAS_TOL: f64 = 1e-6;
pub const INT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone)]
pub struct Var {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub integer: bool,
    pub obj: f64,
}

#[derive(Debug, Clone)]
pub struct Row {
    pub terms: Vec<(VarId, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

/// A minimization model over bounded (possibly integer) variables and linear
/// constraints. Immutable once handed to a solver.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    vars: Vec<Var>,
    rows: Vec<Row>,
    names: HashMap<String, VarId>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        integer: bool,
        obj: f64,
    ) -> Result<VarId> {
        let name = name.into();
        if self.names.contains_key(&name) {
            return Err(Error::Model(format!("duplicate variable name `{name}`")));
        }
        if lo.is_nan() || hi.is_nan() || obj.is_nan() || lo > hi {
            return Err(Error::Model(format!("invalid bounds/objective for `{name}`")));
        }
        let id = self.vars.len();
        self.names.insert(name.clone(), id);
        self.vars.push(Var { name, lo, hi, integer, obj });
        Ok(id)
    }

    /// Adds the binary variable `name` with objective coefficient `obj`.
    pub fn add_binary(&mut self, name: impl Into<String>, obj: f64) -> Result<VarId> {
        self.add_var(name, 0.0, 1.0, true, obj)
    }

    pub fn add_row(&mut self, terms: Vec<(VarId, f64)>, rel: Rel, rhs: f64) -> Result<()> {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for (v, c) in terms {
            if v >= self.vars.len() {
                return Err(Error::Model(format!("constraint references unknown variable {v}")));
            }
            if c.is_nan() {
                return Err(Error::Model("NaN coefficient".into()));
            }
            *merged.entry(v).or_insert(0.0) += c;
        }
        if rhs.is_nan() {
            return Err(Error::Model("NaN right-hand side".into()));
        }
        self.rows.push(Row { terms: merged.into_iter().collect(), rel, rhs });
        Ok(())
    }

    pub fn set_bounds(&mut self, id: VarId, lo: f64, hi: f64) {
        self.vars[id].lo = lo;
        self.vars[id].hi = hi;
    }

    pub fn fix_var(&mut self, id: VarId, value: f64) {
        self.set_bounds(id, value, value);
    }

    pub fn var(&self, id: VarId) -> &Var {
        &self.vars[id]
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Objective value of a point, from the original data.
    pub fn objective_of(&self, x: &[f64]) -> f64 {
        self.vars.iter().zip(x).map(|(v, xv)| v.obj * xv).sum()
    }

    /// Maximum constraint violation of a point.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let lhs: f64 = row.terms.iter().map(|&(v, c)| c * x[v]).sum();
            let viol = match row.rel {
                Rel::Le => lhs - row.rhs,
                Rel::Ge => row.rhs - lhs,
                Rel::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct MilpResult {
    pub status: SolveStatus,
    pub objective: f64,
    values: Vec<f64>,
}

impl MilpResult {
    pub(crate) fn new(status: SolveStatus, objective: f64, values: Vec<f64>) -> Self {
        MilpResult { status, objective, values }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, id: VarId) -> f64 {
        self.values[id]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Variable-name keyed view of the solution.
    pub fn value_map(&self, model: &MilpModel) -> BTreeMap<String, f64> {
        model
            .vars()
            .iter()
            .zip(&self.values)
            .map(|(v, &x)| (v.name.clone(), x))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum BackendKind {
    BuiltIn,
    External { command: String },
}

/// Solver selection plus node/time limits honored by the built-in backend.
#[derive(Debug, Clone)]
pub struct SolverBackend {
    pub kind: BackendKind,
    pub node_limit: Option<u64>,
    pub time_limit: Option<Duration>,
}

/// Environment variable holding the external solver command template; it
/// must contain `{lp}` and `{sol}` placeholders.
pub const EXTERNAL_CMD_ENV: &str = "QTSP_MILP_CMD";

impl SolverBackend {
    pub fn builtin() -> Self {
        SolverBackend { kind: BackendKind::BuiltIn, node_limit: None, time_limit: None }
    }

    pub fn external(command: impl Into<String>) -> Self {
        SolverBackend {
            kind: BackendKind::External { command: command.into() },
            node_limit: None,
            time_limit: None,
        }
    }

    /// External backend configured from `QTSP_MILP_CMD`.
    pub fn external_from_env() -> Result<Self> {
        match std::env::var(EXTERNAL_CMD_ENV) {
            Ok(cmd) if !cmd.trim().is_empty() => Ok(SolverBackend::external(cmd)),
            _ => Err(Error::Backend(format!(
                "{EXTERNAL_CMD_ENV} is not set; configure it with `{{lp}}` and `{{sol}}` placeholders"
            ))),
        }
    }

    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = Some(limit);
        self
    }

    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

impl Default for SolverBackend {
    fn default() -> Self {
        SolverBackend::builtin()
    }
}

/// Solves the continuous relaxation (integrality flags ignored).
pub fn solve_lp(model: &MilpModel, backend: &SolverBackend) -> Result<MilpResult> {
    match &backend.kind {
        BackendKind::BuiltIn => simplex::solve_relaxed(model),
        BackendKind::External { command } => external::solve(model, command, true),
    }
}

/// Solves to integrality.
pub fn solve_ilp(model: &MilpModel, backend: &SolverBackend) -> Result<MilpResult> {
    solve_ilp_with_cutoff(model, backend, None)
}

/// Solves to integrality with an optional known upper bound; nodes whose
/// relaxation bound cannot beat the cutoff are pruned. The cutoff must be a
/// valid upper bound on the optimal value or the result may be suboptimal.
pub fn solve_ilp_with_cutoff(
    model: &MilpModel,
    backend: &SolverBackend,
    cutoff: Option<f64>,
) -> Result<MilpResult> {
    match &backend.kind {
        BackendKind::BuiltIn => bb::solve(model, backend.node_limit, backend.time_limit, cutoff),
        BackendKind::External { command } => external::solve(model, command, false),
    }
}
