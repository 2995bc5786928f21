//! Embedded LP and branch-and-bound MILP solver.

mod bb;
pub mod lp;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::model::{ModelError, OptModel, Sense, Solution, SolveStatus, VarKind};
use lp::{LpData, LpStatus, Tableau, Tolerances};

pub use bb::{
    solve_milp, solve_milp_traced, BranchingRegistry, BranchingRule, FirstFractional,
    MostFractional,
};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("model has {0} cone rows; use the outer approximation")]
    HasCones(usize),
    #[error("model has {0} nonlinear rows and cannot be solved directly")]
    HasNonlinear(usize),
    #[error("cone variable `{0}` needs finite bounds for outer approximation")]
    UnboundedCone(String),
    #[error("unknown branching rule `{0}`")]
    UnknownBranching(String),
    #[error("invalid option: {0}")]
    InvalidOption(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    /// Lowest bound first; deeper first on ties.
    BestBound,
    /// Deepest first; lowest bound on ties.
    DepthFirst,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Seconds.
    pub time_limit: f64,
    pub abs_gap: f64,
    pub rel_gap: f64,
    pub feasibility_tol: f64,
    pub integrality_tol: f64,
    pub branching: String,
    pub node_selection: NodeSelection,
    /// Recorded in the solution; the search itself uses no randomness.
    pub seed: u64,
    /// Tangent cuts per cone in the outer approximation.
    pub oa_cuts: usize,
    /// Memory allowed for tableau snapshots kept for warm starts.
    pub warm_start_bytes: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: 1000.0,
            abs_gap: 1e-7,
            rel_gap: 1e-9,
            feasibility_tol: 1e-9,
            integrality_tol: 1e-6,
            branching: "most-fractional".into(),
            node_selection: NodeSelection::BestBound,
            seed: 0,
            oa_cuts: 16,
            warm_start_bytes: 256 << 20,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = [
            ("time limit", self.time_limit),
            ("absolute gap", self.abs_gap),
            ("relative gap", self.rel_gap),
            ("feasibility tolerance", self.feasibility_tol),
            ("integrality tolerance", self.integrality_tol),
        ];
        for (what, v) in positive {
            if !(v > 0.0) {
                return Err(SolverError::InvalidOption(format!(
                    "{what} must be positive"
                )));
            }
        }
        if self.oa_cuts == 0 {
            return Err(SolverError::InvalidOption(
                "at least one cut per cone".into(),
            ));
        }
        Ok(())
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            primal: self.feasibility_tol,
            ..Tolerances::default()
        }
    }

    fn deadline(&self, start: Instant) -> Option<Instant> {
        start.checked_add(std::time::Duration::from_secs_f64(self.time_limit.min(1e9)))
    }
}

pub(crate) fn lp_data(model: &OptModel) -> LpData {
    let n = model.variables().len();
    let mut cost = vec![0.0; n];
    for &(v, c) in model.objective() {
        cost[v.0] += c;
    }
    let mut row_lower = Vec::with_capacity(model.rows().len());
    let mut row_upper = Vec::with_capacity(model.rows().len());
    for r in model.rows() {
        let (lo, hi) = match r.sense {
            Sense::Le => (f64::NEG_INFINITY, r.rhs),
            Sense::Ge => (r.rhs, f64::INFINITY),
            Sense::Eq => (r.rhs, r.rhs),
        };
        row_lower.push(lo);
        row_upper.push(hi);
    }
    LpData {
        n,
        rows: model
            .rows()
            .iter()
            .map(|r| r.terms.iter().map(|&(v, a)| (v.0, a)).collect())
            .collect(),
        cost,
        col_lower: model.variables().iter().map(|v| v.lower).collect(),
        col_upper: model.variables().iter().map(|v| v.upper).collect(),
        row_lower,
        row_upper,
    }
}

fn iteration_cap(lp: &LpData) -> usize {
    50 * (lp.n + lp.m()) + 10_000
}

fn check_solvable(model: &OptModel) -> Result<(), SolverError> {
    if !model.cones().is_empty() {
        return Err(SolverError::HasCones(model.cones().len()));
    }
    if !model.nonlinear_rows().is_empty() {
        return Err(SolverError::HasNonlinear(model.nonlinear_rows().len()));
    }
    Ok(())
}

pub(crate) fn values_by_name(model: &OptModel, x: &[f64]) -> BTreeMap<String, f64> {
    model
        .variables()
        .iter()
        .zip(x)
        .map(|(v, &xv)| (v.name.clone(), xv))
        .collect()
}

/// Result of a single LP solve with the data needed to certify it.
#[derive(Debug, Clone)]
pub struct LpOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: Option<f64>,
    /// Row multipliers at optimality.
    pub row_duals: Option<Vec<f64>>,
    /// Row multipliers proving infeasibility.
    pub farkas: Option<Vec<f64>>,
    pub iterations: usize,
}

impl LpOutcome {
    /// Lagrangian bound `min_{box} (c - A^T y) x + y-terms` for the row
    /// duals, computed from the original data.
    pub fn dual_objective(&self, model: &OptModel) -> Option<f64> {
        let y = self.row_duals.as_ref()?;
        let lp = lp_data(model);
        let mut reduced = lp.cost.clone();
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in row {
                reduced[j] -= y[i] * a;
            }
        }
        let pick = |d: f64, lo: f64, hi: f64, at: f64| {
            if d.abs() <= 1e-12 {
                d * at
            } else if d > 0.0 {
                d * lo
            } else {
                d * hi
            }
        };
        let mut z = model.objective_constant();
        for j in 0..lp.n {
            z += pick(reduced[j], lp.col_lower[j], lp.col_upper[j], self.x[j]);
        }
        // row activity columns carry cost 0 and coefficient -1
        let act: Vec<f64> = lp
            .rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * self.x[j]).sum())
            .collect();
        for i in 0..lp.m() {
            z += pick(y[i], lp.row_lower[i], lp.row_upper[i], act[i]);
        }
        Some(z)
    }

    /// True when the Farkas multipliers prove that no point in the variable
    /// and row boxes satisfies `A x = r`.
    pub fn certifies_infeasibility(&self, model: &OptModel) -> bool {
        let Some(y) = &self.farkas else {
            return false;
        };
        let lp = lp_data(model);
        let mut coef = vec![0.0; lp.n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in row {
                coef[j] += y[i] * a;
            }
        }
        let sup = |c: f64, lo: f64, hi: f64| {
            if c.abs() <= 1e-12 {
                0.0
            } else if c > 0.0 {
                c * hi
            } else {
                c * lo
            }
        };
        let mut max = 0.0;
        for j in 0..lp.n {
            max += sup(coef[j], lp.col_lower[j], lp.col_upper[j]);
        }
        for i in 0..lp.m() {
            max += sup(-y[i], lp.row_lower[i], lp.row_upper[i]);
        }
        max < -1e-9
    }
}

/// Solves the continuous relaxation; binaries are treated as continuous
/// on their current bounds.
pub fn solve_lp_detailed(model: &OptModel, opts: &SolveOptions) -> Result<LpOutcome, SolverError> {
    check_solvable(model)?;
    opts.validate()?;
    let start = Instant::now();
    let lp = lp_data(model);
    let mut tab = Tableau::new(&lp, opts.tolerances());
    let status = tab.primal(opts.deadline(start), iteration_cap(&lp));
    let x = tab.structural().to_vec();
    let objective =
        (status == LpStatus::Optimal).then(|| tab.objective() + model.objective_constant());
    Ok(LpOutcome {
        status: map_status(status),
        objective,
        row_duals: (status == LpStatus::Optimal).then(|| tab.row_duals()),
        farkas: tab.farkas().map(|f| f.to_vec()),
        iterations: tab.iterations,
        x,
    })
}

fn map_status(s: LpStatus) -> SolveStatus {
    match s {
        LpStatus::Optimal => SolveStatus::Optimal,
        LpStatus::Infeasible => SolveStatus::Infeasible,
        LpStatus::Unbounded => SolveStatus::Unbounded,
        LpStatus::TimeLimit => SolveStatus::TimeLimit,
        LpStatus::IterationLimit => SolveStatus::Error,
    }
}

pub fn solve_lp(model: &OptModel, opts: &SolveOptions) -> Result<Solution, SolverError> {
    let start = Instant::now();
    let out = solve_lp_detailed(model, opts)?;
    let mut sol = Solution::empty(out.status);
    if out.status == SolveStatus::Optimal {
        sol.objective = out.objective;
        sol.bound = out.objective;
        sol.values = values_by_name(model, &out.x);
    }
    if out.status == SolveStatus::Error {
        sol.message = Some(format!("iteration limit after {} pivots", out.iterations));
    }
    sol.seconds = start.elapsed().as_secs_f64();
    sol.meta.insert("seed".into(), opts.seed.to_string());
    Ok(sol)
}

/// Replaces every cone `y >= x^2` by `k` tangent cuts `y >= 2 t x - t^2`
/// at uniformly spaced `t` over the bounds of `x`.
pub fn outer_approximation(model: &OptModel, k: usize) -> Result<OptModel, SolverError> {
    if k == 0 {
        return Err(SolverError::InvalidOption(
            "at least one cut per cone".into(),
        ));
    }
    let mut out = OptModel::new(model.name.clone());
    for (key, v) in model.meta() {
        out.set_meta(key.clone(), v.clone());
    }
    for v in model.variables() {
        out.add_var(v.name.clone(), v.lower, v.upper, v.kind, v.tag.clone())?;
    }
    for r in model.rows() {
        out.add_row(r.name.clone(), &r.terms, r.sense, r.rhs, r.tag.clone())?;
    }
    for h in model.hull_blocks() {
        out.add_hull_block(h.clone())?;
    }
    for &(v, c) in model.objective() {
        out.add_objective_term(v, c)?;
    }
    out.set_objective_constant(model.objective_constant())?;
    for c in model.cones() {
        let xv = model.variable(c.x);
        if !(xv.lower.is_finite() && xv.upper.is_finite()) {
            return Err(SolverError::UnboundedCone(xv.name.clone()));
        }
        for (i, t) in tangent_points(xv.lower, xv.upper, k)
            .into_iter()
            .enumerate()
        {
            out.add_row(
                format!("{}/oa{i}", c.name),
                &[(c.y, 1.0), (c.x, -2.0 * t)],
                Sense::Ge,
                -t * t,
                "outer-approx/tangent",
            )?;
        }
    }
    out.set_meta("outer-approx-cuts", k.to_string());
    Ok(out.freeze())
}

fn tangent_points(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    if k == 1 || lo == hi {
        return vec![0.5 * (lo + hi)];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Lower bound for a cone model from the MILP over its tangent cuts.
pub fn outer_approx_misoc(model: &OptModel, opts: &SolveOptions) -> Result<Solution, SolverError> {
    opts.validate()?;
    let oa = outer_approximation(model, opts.oa_cuts)?;
    let mut sol = solve_milp(&oa, opts)?;
    sol.meta
        .insert("outer-approx-cuts".into(), opts.oa_cuts.to_string());
    Ok(sol)
}

/// Solves with the MILP solver when binaries are present, else as an LP.
pub fn solve_auto(model: &OptModel, opts: &SolveOptions) -> Result<Solution, SolverError> {
    if !model.cones().is_empty() {
        return outer_approx_misoc(model, opts);
    }
    if model.variables().iter().any(|v| v.kind == VarKind::Binary) {
        solve_milp(model, opts)
    } else {
        solve_lp(model, opts)
    }
}

pub(crate) type Snapshot = Arc<Tableau>;
