//! Bounded-variable primal simplex on a dense tableau.
//!
//! Two-phase: infeasible starting rows receive artificial columns whose sum
//! is minimized first. Pricing is Dantzig with lowest-index tie-break,
//! switching permanently to Bland's rule after 1000 degenerate pivots.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::milp::{MilpModel, MilpResult, Rel, SolveStatus};

const DJ_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const DEGEN_STEP_TOL: f64 = 1e-10;
const BLAND_AFTER: u32 = 1000;
/// Tableaus above this size update rows in parallel.
const PAR_THRESHOLD: usize = 1 << 21;

#[derive(Debug, Clone, Copy, PartialEq)]
enum VState {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free nonbasic variable resting at zero.
    AtZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone)]
pub(crate) struct LpOutcome {
    pub status: LpStatus,
    pub objective: f64,
    pub x: Vec<f64>,
}

/// Reusable buffers; a branch-and-bound run keeps one workspace and solves
/// every node LP from scratch inside it.
#[derive(Default)]
pub(crate) struct Workspace {
    tableau: Vec<f64>,
    dj: Vec<f64>,
    bval: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<VState>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    cost: Vec<f64>,
    pivot_row: Vec<f64>,
}

struct Tableau<'a> {
    ws: &'a mut Workspace,
    m: usize,
    ncols: usize,
    degen: u32,
    iters: u64,
    max_iters: u64,
}

impl Tableau<'_> {
    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.ws.tableau[i * self.ncols..(i + 1) * self.ncols]
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.ws.state[j] {
            VState::AtLower => self.ws.lo[j],
            VState::AtUpper => self.ws.hi[j],
            VState::AtZero => 0.0,
            VState::Basic(r) => self.ws.bval[r],
        }
    }

    /// Recomputes the reduced-cost row from the current basis:
    /// d_j = c_j - sum_i c_B(i) * T[i][j].
    fn reset_reduced_costs(&mut self) {
        let ws = &mut *self.ws;
        ws.dj.copy_from_slice(&ws.cost);
        for i in 0..self.m {
            let cb = ws.cost[ws.basis[i]];
            if cb != 0.0 {
                let row = &ws.tableau[i * self.ncols..(i + 1) * self.ncols];
                let dj = &mut ws.dj;
                for (d, &t) in dj.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
    }

    fn choose_entering(&self) -> Option<(usize, f64)> {
        let ws = &*self.ws;
        let bland = self.degen >= BLAND_AFTER;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..self.ncols {
            let d = ws.dj[j];
            let eligible = match ws.state[j] {
                VState::Basic(_) => false,
                VState::AtLower => d < -DJ_TOL && ws.lo[j] < ws.hi[j],
                VState::AtUpper => d > DJ_TOL && ws.lo[j] < ws.hi[j],
                VState::AtZero => d.abs() > DJ_TOL,
            };
            if !eligible {
                continue;
            }
            if bland {
                return Some((j, d));
            }
            match best {
                Some((_, bd)) if d.abs() <= bd.abs() => {}
                _ => best = Some((j, d)),
            }
        }
        best
    }

    /// One ratio-test + pivot step for entering column `q`. Returns false on
    /// an unbounded direction.
    fn step(&mut self, q: usize, dq: f64) -> bool {
        let m = self.m;
        let ncols = self.ncols;
        let dir = match self.ws.state[q] {
            VState::AtLower => 1.0,
            VState::AtUpper => -1.0,
            VState::AtZero => {
                if dq < 0.0 {
                    1.0
                } else {
                    -1.0
                }
            }
            VState::Basic(_) => unreachable!(),
        };

        // Step length capped by the entering variable's own range and by the
        // first basic variable driven to one of its bounds.
        let own_cap = self.ws.hi[q] - self.ws.lo[q]; // inf for unbounded range
        let mut best_t = own_cap;
        let mut leaving: Option<(usize, bool, f64)> = None; // (row, to_upper, |alpha|)
        for i in 0..m {
            let alpha = self.ws.tableau[i * ncols + q] * dir;
            if alpha.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.ws.basis[i];
            let cap = if alpha > 0.0 {
                let lob = self.ws.lo[b];
                if lob.is_finite() {
                    (self.ws.bval[i] - lob) / alpha
                } else {
                    f64::INFINITY
                }
            } else {
                let hib = self.ws.hi[b];
                if hib.is_finite() {
                    (hib - self.ws.bval[i]) / (-alpha)
                } else {
                    f64::INFINITY
                }
            };
            let cap = cap.max(0.0);
            let replace = match leaving {
                _ if cap < best_t - 1e-12 => true,
                Some((lr, _, la)) if (cap - best_t).abs() <= 1e-12 => {
                    // ties: larger pivot magnitude, then lower basic index
                    alpha.abs() > la + 1e-15
                        || (alpha.abs() >= la - 1e-15 && self.ws.basis[i] < self.ws.basis[lr])
                }
                None if cap <= best_t => true,
                _ => false,
            };
            if replace {
                best_t = best_t.min(cap);
                leaving = Some((i, alpha < 0.0, alpha.abs()));
            }
        }

        if best_t.is_infinite() {
            return false;
        }
        let t = best_t.max(0.0);
        if t <= DEGEN_STEP_TOL {
            self.degen = self.degen.saturating_add(1);
        }

        match leaving {
            None => {
                // bound flip across the entering variable's range
                for i in 0..m {
                    self.ws.bval[i] -= self.ws.tableau[i * ncols + q] * dir * t;
                }
                self.ws.state[q] = match self.ws.state[q] {
                    VState::AtLower => VState::AtUpper,
                    VState::AtUpper => VState::AtLower,
                    s => s,
                };
            }
            Some((r, to_upper, _)) => {
                let entering_val = self.nonbasic_value(q) + dir * t;
                for i in 0..m {
                    if i != r {
                        self.ws.bval[i] -= self.ws.tableau[i * ncols + q] * dir * t;
                    }
                }
                let leaving_var = self.ws.basis[r];
                self.ws.state[leaving_var] =
                    if to_upper { VState::AtUpper } else { VState::AtLower };
                self.eliminate(r, q);
                self.ws.basis[r] = q;
                self.ws.state[q] = VState::Basic(r);
                self.ws.bval[r] = entering_val;
            }
        }
        true
    }

    /// Gaussian elimination of column `q` against pivot row `r`.
    fn eliminate(&mut self, r: usize, q: usize) {
        let ncols = self.ncols;
        let ws = &mut *self.ws;
        let piv = ws.tableau[r * ncols + q];
        debug_assert!(piv.abs() > 1e-12);
        {
            let row = &mut ws.tableau[r * ncols..(r + 1) * ncols];
            let inv = 1.0 / piv;
            for v in row.iter_mut() {
                *v *= inv;
            }
            row[q] = 1.0;
            ws.pivot_row.clear();
            ws.pivot_row.extend_from_slice(row);
        }
        let pivot_row = &ws.pivot_row;
        let update = |(i, row): (usize, &mut [f64])| {
            if i == r {
                return;
            }
            let f = row[q];
            if f != 0.0 {
                for (v, &p) in row.iter_mut().zip(pivot_row) {
                    *v -= f * p;
                }
                row[q] = 0.0;
            }
        };
        if self.m * ncols >= PAR_THRESHOLD {
            ws.tableau.par_chunks_mut(ncols).enumerate().for_each(update);
        } else {
            ws.tableau.chunks_mut(ncols).enumerate().for_each(update);
        }
        let f = ws.dj[q];
        if f != 0.0 {
            for (d, &p) in ws.dj.iter_mut().zip(pivot_row) {
                *d -= f * p;
            }
            ws.dj[q] = 0.0;
        }
    }

    /// Runs pivots until optimality for the current cost vector.
    fn optimize(&mut self) -> LpStatus {
        loop {
            if self.iters >= self.max_iters {
                return LpStatus::IterLimit;
            }
            // refresh reduced costs periodically against roundoff drift
            if self.iters > 0 && self.iters % 4096 == 0 {
                self.reset_reduced_costs();
            }
            let Some((q, dq)) = self.choose_entering() else {
                return LpStatus::Optimal;
            };
            self.iters += 1;
            if !self.step(q, dq) {
                return LpStatus::Unbounded;
            }
        }
    }
}

/// Solves the continuous relaxation of `model` with per-variable bound
/// overrides applied on top of the model bounds.
pub(crate) fn solve_bounded(
    model: &MilpModel,
    overrides: &[(usize, f64, f64)],
    ws: &mut Workspace,
) -> LpOutcome {
    let nv = model.n_vars();
    let m = model.n_rows();
    let nslack = m;

    let mut lo: Vec<f64> = model.vars().iter().map(|v| v.lo).collect();
    let mut hi: Vec<f64> = model.vars().iter().map(|v| v.hi).collect();
    for &(j, l, h) in overrides {
        lo[j] = l;
        hi[j] = h;
    }
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return LpOutcome { status: LpStatus::Infeasible, objective: f64::INFINITY, x: Vec::new() };
    }
    for i in 0..m {
        let (slo, shi) = match model.rows()[i].rel {
            Rel::Le => (0.0, f64::INFINITY),
            Rel::Ge => (f64::NEG_INFINITY, 0.0),
            Rel::Eq => (0.0, 0.0),
        };
        lo.push(slo);
        hi.push(shi);
    }

    // nonbasic starting position per structural variable
    let start_state = |j: usize| -> VState {
        if lo[j].is_finite() {
            VState::AtLower
        } else if hi[j].is_finite() {
            VState::AtUpper
        } else {
            VState::AtZero
        }
    };
    let start_value = |j: usize| -> f64 {
        if lo[j].is_finite() {
            lo[j]
        } else if hi[j].is_finite() {
            hi[j]
        } else {
            0.0
        }
    };

    // residual row activity with all structural variables at their start
    let mut resid = vec![0.0f64; m];
    for (i, row) in model.rows().iter().enumerate() {
        let mut v = row.rhs;
        for &(var, c) in &row.terms {
            v -= c * start_value(var);
        }
        resid[i] = v; // starting slack value
    }

    // artificial columns for rows whose slack starts out of range
    let mut art_rows: Vec<(usize, f64)> = Vec::new(); // (row, sign)
    for i in 0..m {
        let s = resid[i];
        let (slo, shi) = (lo[nv + i], hi[nv + i]);
        if s > shi + FEAS_GUARD {
            art_rows.push((i, 1.0));
        } else if s < slo - FEAS_GUARD {
            art_rows.push((i, -1.0));
        }
    }
    let nart = art_rows.len();
    let ncols = nv + nslack + nart;

    ws.tableau.clear();
    ws.tableau.resize(m * ncols, 0.0);
    for (i, row) in model.rows().iter().enumerate() {
        let trow = &mut ws.tableau[i * ncols..(i + 1) * ncols];
        for &(var, c) in &row.terms {
            trow[var] = c;
        }
        trow[nv + i] = 1.0;
    }
    ws.lo = lo;
    ws.hi = hi;
    ws.cost = vec![0.0; ncols];
    ws.basis = (0..m).map(|i| nv + i).collect();
    ws.state = (0..ncols).map(start_state).collect();
    for i in 0..m {
        ws.state[nv + i] = VState::Basic(i);
    }
    ws.bval = resid;
    ws.dj = vec![0.0; ncols];
    ws.pivot_row = Vec::with_capacity(ncols);

    // install artificial columns; the basis stays diagonal so rows with a
    // negative-signed artificial are scaled to keep the tableau at B^-1 A
    for (k, &(i, sign)) in art_rows.iter().enumerate() {
        let col = nv + nslack + k;
        ws.lo[col] = 0.0;
        ws.hi[col] = f64::INFINITY;
        let clamped = if sign > 0.0 { ws.hi[nv + i] } else { ws.lo[nv + i] };
        let art_val = (ws.bval[i] - clamped) * sign;
        ws.tableau[i * ncols + col] = sign;
        if sign < 0.0 {
            for v in ws.tableau[i * ncols..(i + 1) * ncols].iter_mut() {
                *v = -*v;
            }
            ws.tableau[i * ncols + col] = 1.0;
        }
        ws.state[nv + i] = if sign > 0.0 { VState::AtUpper } else { VState::AtLower };
        ws.state[col] = VState::Basic(i);
        ws.basis[i] = col;
        ws.bval[i] = art_val;
    }

    let max_iters = 20_000 + 20 * m as u64 + 2 * ncols as u64;
    let mut t = Tableau { ws, m, ncols, degen: 0, iters: 0, max_iters };

    // phase 1: drive artificial infeasibility to zero
    if nart > 0 {
        for k in 0..nart {
            t.ws.cost[nv + nslack + k] = 1.0;
        }
        t.reset_reduced_costs();
        let status = t.optimize();
        let infeas: f64 = (0..m)
            .filter(|&i| t.ws.basis[i] >= nv + nslack)
            .map(|i| t.ws.bval[i])
            .sum();
        match status {
            LpStatus::IterLimit => {
                return LpOutcome {
                    status: LpStatus::IterLimit,
                    objective: f64::INFINITY,
                    x: Vec::new(),
                }
            }
            LpStatus::Unbounded => {
                // phase-1 objective is bounded below; numerical trouble
                return LpOutcome {
                    status: LpStatus::Infeasible,
                    objective: f64::INFINITY,
                    x: Vec::new(),
                };
            }
            _ => {}
        }
        if infeas > FEAS_TOL_PHASE1 {
            return LpOutcome {
                status: LpStatus::Infeasible,
                objective: f64::INFINITY,
                x: Vec::new(),
            };
        }
        // pin artificials at zero for phase 2
        for k in 0..nart {
            let col = nv + nslack + k;
            t.ws.cost[col] = 0.0;
            t.ws.lo[col] = 0.0;
            t.ws.hi[col] = 0.0;
        }
    }

    // phase 2
    for j in 0..nv {
        t.ws.cost[j] = model.var(j).obj;
    }
    for j in nv..ncols {
        t.ws.cost[j] = 0.0;
    }
    t.reset_reduced_costs();
    let status = t.optimize();

    let mut x = vec![0.0f64; nv];
    for (j, xv) in x.iter_mut().enumerate() {
        *xv = t.nonbasic_value(j).clamp(t.ws.lo[j], t.ws.hi[j]);
    }
    let objective = model.objective_of(&x);
    let status = match status {
        LpStatus::Optimal => LpStatus::Optimal,
        LpStatus::Unbounded => LpStatus::Unbounded,
        LpStatus::IterLimit => LpStatus::IterLimit,
        LpStatus::Infeasible => LpStatus::Infeasible,
    };
    LpOutcome { status, objective, x }
}

const FEAS_GUARD: f64 = 1e-9;
const FEAS_TOL_PHASE1: f64 = 1e-7;

/// Public LP entry point for the built-in backend.
pub(crate) fn solve_relaxed(model: &MilpModel) -> Result<MilpResult> {
    let mut ws = Workspace::default();
    let out = solve_bounded(model, &[], &mut ws);
    match out.status {
        LpStatus::Optimal => Ok(MilpResult::new(SolveStatus::Optimal, out.objective, out.x)),
        LpStatus::Infeasible => {
            Ok(MilpResult::new(SolveStatus::Infeasible, f64::INFINITY, Vec::new()))
        }
        LpStatus::Unbounded => {
            Ok(MilpResult::new(SolveStatus::Unbounded, f64::NEG_INFINITY, Vec::new()))
        }
        LpStatus::IterLimit => Err(Error::SolveFailed(
            "simplex iteration limit exceeded; the model may be numerically ill-conditioned"
                .into(),
        )),
    }
}
