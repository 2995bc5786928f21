//! Solver-agnostic optimization model.
//!
//! Variables, linear rows, cone rows `y >= x^2`, symbolic nonlinear rows and
//! a linear minimization objective. Every row carries a semantic tag such as
//! `compressor/active-pressure-lower` so that verification and tests can
//! address rows by role.

mod export;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use export::{
    export, from_json, to_json, CbfExporter, ExporterRegistry, JsonExporter, ModelExporter,
    MpsExporter, MODEL_SCHEMA,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate name `{0}`")]
    DuplicateName(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable id {0} out of range")]
    BadVarId(usize),
    #[error("invalid bounds [{lower}, {upper}] for `{name}`")]
    InvalidBounds {
        name: String,
        lower: f64,
        upper: f64,
    },
    #[error("non-finite coefficient in `{0}`")]
    NonFinite(String),
    #[error("model is frozen")]
    Frozen,
    #[error("model must be frozen before export")]
    NotFrozen,
    #[error("`{0}` is not a binary variable")]
    NotBinary(String),
    #[error("{format} cannot represent {what}")]
    Unsupported { format: &'static str, what: String },
    #[error("unknown export format `{0}`")]
    UnknownFormat(String),
    #[error("invalid model json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
    pub tag: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearRow {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl LinearRow {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates the row; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let act = self.activity(x);
        match self.sense {
            Sense::Le => (act - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - act).max(0.0),
            Sense::Eq => (act - self.rhs).abs(),
        }
    }
}

/// `y >= x^2`
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRow {
    pub name: String,
    pub y: VarId,
    pub x: VarId,
    pub tag: String,
}

/// Nonlinear relations kept symbolically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NonlinearExpr {
    /// `potential = b1/2 p^2 + b2/3 p^3`
    Potential {
        potential: VarId,
        pressure: VarId,
        b1: f64,
        b2: f64,
    },
    /// `upstream - downstream = coefficient * flow |flow|`
    PotentialDrop {
        upstream: VarId,
        downstream: VarId,
        flow: VarId,
        coefficient: f64,
    },
    /// `lifted = flow |flow|`
    SignedSquare { lifted: VarId, flow: VarId },
}

impl NonlinearExpr {
    pub fn residual(&self, x: &[f64]) -> f64 {
        match *self {
            NonlinearExpr::Potential {
                potential,
                pressure,
                b1,
                b2,
            } => {
                let p = x[pressure.0];
                x[potential.0] - p * p * (0.5 * b1 + b2 * p / 3.0)
            }
            NonlinearExpr::PotentialDrop {
                upstream,
                downstream,
                flow,
                coefficient,
            } => {
                let f = x[flow.0];
                x[upstream.0] - x[downstream.0] - coefficient * f * f.abs()
            }
            NonlinearExpr::SignedSquare { lifted, flow } => {
                let f = x[flow.0];
                x[lifted.0] - f * f.abs()
            }
        }
    }

    fn vars(&self) -> Vec<VarId> {
        match *self {
            NonlinearExpr::Potential {
                potential,
                pressure,
                ..
            } => vec![potential, pressure],
            NonlinearExpr::PotentialDrop {
                upstream,
                downstream,
                flow,
                ..
            } => vec![upstream, downstream, flow],
            NonlinearExpr::SignedSquare { lifted, flow } => vec![lifted, flow],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearRow {
    pub name: String,
    pub expr: NonlinearExpr,
    pub tag: String,
}

/// Records which λ variables encode `(x, y) ∈ conv(vertices)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullBlock {
    pub x: VarId,
    pub y: VarId,
    pub lambdas: Vec<VarId>,
    pub vertices: Vec<(f64, f64)>,
    pub tag: String,
}

#[derive(Debug, Clone, Default)]
pub struct OptModel {
    pub name: String,
    variables: Vec<Variable>,
    rows: Vec<LinearRow>,
    cones: Vec<ConeRow>,
    nonlinear: Vec<NonlinearRow>,
    hull_blocks: Vec<HullBlock>,
    objective: Vec<(VarId, f64)>,
    objective_constant: f64,
    meta: BTreeMap<String, String>,
    var_index: HashMap<String, VarId>,
    row_names: HashMap<String, ()>,
    frozen: bool,
}

impl OptModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    fn mutable(&self) -> Result<(), ModelError> {
        if self.frozen {
            Err(ModelError::Frozen)
        } else {
            Ok(())
        }
    }

    fn check_var(&self, v: VarId) -> Result<(), ModelError> {
        if v.0 < self.variables.len() {
            Ok(())
        } else {
            Err(ModelError::BadVarId(v.0))
        }
    }

    fn claim_row_name(&mut self, name: &str) -> Result<(), ModelError> {
        if self.row_names.insert(name.to_string(), ()).is_some() {
            return Err(ModelError::DuplicateName(name.to_string()));
        }
        Ok(())
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        kind: VarKind,
        tag: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        self.mutable()?;
        let name = name.into();
        let bad = lower.is_nan()
            || upper.is_nan()
            || lower > upper
            || lower == f64::INFINITY
            || upper == f64::NEG_INFINITY
            || (kind == VarKind::Binary && (lower < 0.0 || upper > 1.0));
        if bad {
            return Err(ModelError::InvalidBounds { name, lower, upper });
        }
        if self.var_index.contains_key(&name) {
            return Err(ModelError::DuplicateName(name));
        }
        let id = VarId(self.variables.len());
        self.var_index.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            lower,
            upper,
            kind,
            tag: tag.into(),
        });
        Ok(id)
    }

    pub fn add_continuous(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        tag: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        self.add_var(name, lower, upper, VarKind::Continuous, tag)
    }

    pub fn add_binary(
        &mut self,
        name: impl Into<String>,
        tag: impl Into<String>,
    ) -> Result<VarId, ModelError> {
        self.add_var(name, 0.0, 1.0, VarKind::Binary, tag)
    }

    /// Repeated variables in `terms` are merged; zero coefficients dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: &[(VarId, f64)],
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> Result<RowId, ModelError> {
        self.mutable()?;
        let name = name.into();
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, a) in terms {
            self.check_var(v)?;
            if !a.is_finite() {
                return Err(ModelError::NonFinite(name));
            }
            *merged.entry(v).or_insert(0.0) += a;
        }
        if !rhs.is_finite() {
            return Err(ModelError::NonFinite(name));
        }
        self.claim_row_name(&name)?;
        let id = RowId(self.rows.len());
        self.rows.push(LinearRow {
            name,
            terms: merged.into_iter().filter(|&(_, a)| a != 0.0).collect(),
            sense,
            rhs,
            tag: tag.into(),
        });
        Ok(id)
    }

    /// Same as [`add_row`](Self::add_row) with variables given by name.
    pub fn add_row_by_name(
        &mut self,
        name: impl Into<String>,
        terms: &[(&str, f64)],
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> Result<RowId, ModelError> {
        let ids = terms
            .iter()
            .map(|&(n, a)| self.var(n).map(|v| (v, a)))
            .collect::<Result<Vec<_>, _>>()?;
        self.add_row(name, &ids, sense, rhs, tag)
    }

    pub fn add_cone(
        &mut self,
        name: impl Into<String>,
        y: VarId,
        x: VarId,
        tag: impl Into<String>,
    ) -> Result<usize, ModelError> {
        self.mutable()?;
        self.check_var(y)?;
        self.check_var(x)?;
        let name = name.into();
        self.claim_row_name(&name)?;
        self.cones.push(ConeRow {
            name,
            y,
            x,
            tag: tag.into(),
        });
        Ok(self.cones.len() - 1)
    }

    pub fn add_nonlinear(
        &mut self,
        name: impl Into<String>,
        expr: NonlinearExpr,
        tag: impl Into<String>,
    ) -> Result<usize, ModelError> {
        self.mutable()?;
        for v in expr.vars() {
            self.check_var(v)?;
        }
        let name = name.into();
        self.claim_row_name(&name)?;
        self.nonlinear.push(NonlinearRow {
            name,
            expr,
            tag: tag.into(),
        });
        Ok(self.nonlinear.len() - 1)
    }

    pub fn add_hull_block(&mut self, block: HullBlock) -> Result<(), ModelError> {
        self.mutable()?;
        for &v in [block.x, block.y].iter().chain(&block.lambdas) {
            self.check_var(v)?;
        }
        self.hull_blocks.push(block);
        Ok(())
    }

    pub fn add_objective_term(&mut self, v: VarId, coef: f64) -> Result<(), ModelError> {
        self.mutable()?;
        self.check_var(v)?;
        if !coef.is_finite() {
            return Err(ModelError::NonFinite("objective".into()));
        }
        self.objective.push((v, coef));
        Ok(())
    }

    pub fn set_objective_constant(&mut self, c: f64) -> Result<(), ModelError> {
        self.mutable()?;
        self.objective_constant = c;
        Ok(())
    }

    pub fn set_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.insert(key.into(), value.into());
    }

    /// Merges repeated objective terms and locks the structure.
    pub fn freeze(mut self) -> Self {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, a) in &self.objective {
            *merged.entry(v).or_insert(0.0) += a;
        }
        self.objective = merged.into_iter().filter(|&(_, a)| a != 0.0).collect();
        self.frozen = true;
        self
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }
    pub fn rows(&self) -> &[LinearRow] {
        &self.rows
    }
    pub fn cones(&self) -> &[ConeRow] {
        &self.cones
    }
    pub fn nonlinear_rows(&self) -> &[NonlinearRow] {
        &self.nonlinear
    }
    pub fn hull_blocks(&self) -> &[HullBlock] {
        &self.hull_blocks
    }
    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }
    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }
    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn var(&self, name: &str) -> Result<VarId, ModelError> {
        self.var_index
            .get(name)
            .copied()
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, v: VarId) -> &Variable {
        &self.variables[v.0]
    }

    pub fn binaries(&self) -> Vec<VarId> {
        (0..self.variables.len())
            .filter(|&j| self.variables[j].kind == VarKind::Binary)
            .map(VarId)
            .collect()
    }

    pub fn row(&self, r: RowId) -> &LinearRow {
        &self.rows[r.0]
    }

    pub fn rows_with_tag(&self, tag: &str) -> Vec<RowId> {
        (0..self.rows.len())
            .filter(|&i| self.rows[i].tag == tag)
            .map(RowId)
            .collect()
    }

    /// Linear, cone and nonlinear rows counted per tag.
    pub fn tag_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        let tags = self
            .rows
            .iter()
            .map(|r| &r.tag)
            .chain(self.cones.iter().map(|c| &c.tag))
            .chain(self.nonlinear.iter().map(|n| &n.tag));
        for t in tags {
            *counts.entry(t.clone()).or_insert(0) += 1;
        }
        counts
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Largest violation over variable bounds and linear rows.
    pub fn max_linear_violation(&self, x: &[f64]) -> f64 {
        let bounds = self
            .variables
            .iter()
            .zip(x)
            .map(|(v, &xv)| (v.lower - xv).max(xv - v.upper).max(0.0));
        let rows = self.rows.iter().map(|r| r.violation(x));
        bounds.chain(rows).fold(0.0, f64::max)
    }

    /// Largest violation of cone rows `y >= x^2`.
    pub fn max_cone_violation(&self, x: &[f64]) -> f64 {
        self.cones
            .iter()
            .map(|c| (x[c.x.0] * x[c.x.0] - x[c.y.0]).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Binaries become continuous on their current bounds intersected with [0, 1].
    pub fn relax_integrality(&self) -> Self {
        let mut out = self.clone();
        for v in &mut out.variables {
            if v.kind == VarKind::Binary {
                v.kind = VarKind::Continuous;
                v.lower = v.lower.max(0.0);
                v.upper = v.upper.min(1.0);
            }
        }
        out
    }

    /// Fixes each named binary to 0 or 1. Works on frozen models.
    pub fn fix_binaries(&self, assignment: &BTreeMap<String, u8>) -> Result<Self, ModelError> {
        let mut out = self.clone();
        for (name, &value) in assignment {
            let v = out.var(name)?;
            let var = &mut out.variables[v.0];
            if var.kind != VarKind::Binary || value > 1 {
                return Err(ModelError::NotBinary(name.clone()));
            }
            var.lower = value as f64;
            var.upper = value as f64;
        }
        Ok(out)
    }

    /// Overrides the bounds of one variable. Works on frozen models.
    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) -> Result<(), ModelError> {
        self.check_var(v)?;
        self.variables[v.0].lower = lower;
        self.variables[v.0].upper = upper;
        Ok(())
    }

    /// Dense value vector from a name map; missing names are an error.
    pub fn dense_values(&self, values: &BTreeMap<String, f64>) -> Result<Vec<f64>, ModelError> {
        self.variables
            .iter()
            .map(|v| {
                values
                    .get(&v.name)
                    .copied()
                    .ok_or_else(|| ModelError::UnknownVariable(v.name.clone()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    Error,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::TimeLimit => "time-limit",
            SolveStatus::Error => "error",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// Best lower bound.
    pub bound: Option<f64>,
    pub values: BTreeMap<String, f64>,
    #[serde(default)]
    pub nodes: u64,
    #[serde(default)]
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Solution {
    pub fn empty(status: SolveStatus) -> Self {
        Self {
            status,
            objective: None,
            bound: None,
            values: BTreeMap::new(),
            nodes: 0,
            seconds: 0.0,
            message: None,
            meta: BTreeMap::new(),
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}
