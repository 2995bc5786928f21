//! Checks a solution against the exact physics and mode logic, computes
//! relative gaps and produces the resistor-model sweep and batch reports.

mod batch;
mod repair;
mod sweep;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formulation::{names, tags};
use crate::model::Solution;
use crate::network::{Arc, ArcKind, ArcStatus, Network, SubMode};
use crate::physics::{friction_coefficient, NondimContext};

pub use batch::{
    run_batch, write_batch_csv, write_stats_csv, Aggregate, BatchOptions, BatchRow, BatchSummary,
    GapSource,
};
pub use repair::recover_pressures;
pub use sweep::{resistor_error_sweep, write_sweep_csv, SweepGrid, SweepPoint};

/// Version tag written at the top of every CSV report.
pub const REPORT_SCHEMA: &str = "ogf-report/1";

/// Default tolerance on dimensionless residuals.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;

pub const TAG_PRESSURE_BOUNDS: &str = "node/pressure-bounds";
pub const TAG_FLOW_BOUNDS: &str = "arc/flow-bounds";
pub const TAG_INJECTION: &str = "injection/limit";
pub const TAG_COMPRESSOR_MODE: &str = "compressor/mode";
pub const TAG_VALVE_MODE: &str = "valve/mode";
pub const TAG_CONTROL_VALVE_MODE: &str = "control-valve/mode";
pub const TAG_GROUP_MODE: &str = "group/mode";

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("solution lacks variable `{0}`")]
    MissingVariable(String),
    #[error("relative gap undefined: relaxation objective is 0 but feasible objective is {0}")]
    UndefinedGap(f64),
    #[error("arc `{0}` is not a resistor")]
    NotAResistor(String),
    #[error("unknown arc `{0}`")]
    UnknownArc(String),
    #[error("sweep grid needs at least 2 points per axis, got {0}")]
    BadGrid(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Signed residual of one constraint instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub tag: String,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub residuals: Vec<Residual>,
    pub max_by_tag: BTreeMap<String, f64>,
    pub max_abs: f64,
    pub tolerance: f64,
    /// `max_abs <= tolerance`.
    pub feasible: bool,
    /// `sum c s` in dimensionless flow units.
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_gap: Option<f64>,
}

impl VerificationReport {
    fn from_residuals(residuals: Vec<Residual>, tolerance: f64, objective: f64) -> Self {
        let mut max_by_tag: BTreeMap<String, f64> = BTreeMap::new();
        let mut max_abs: f64 = 0.0;
        for r in &residuals {
            let a = r.value.abs();
            let e = max_by_tag.entry(r.tag.clone()).or_insert(0.0);
            *e = e.max(a);
            max_abs = max_abs.max(a);
        }
        Self {
            residuals,
            max_by_tag,
            max_abs,
            tolerance,
            feasible: max_abs <= tolerance,
            objective,
            relative_gap: None,
        }
    }

    /// Residuals whose magnitude exceeds the tolerance.
    pub fn violations(&self) -> impl Iterator<Item = &Residual> {
        self.residuals
            .iter()
            .filter(move |r| r.value.abs() > self.tolerance)
    }
}

/// `100 (z_feasible - z_relax) / |z_relax|`; zero when both are zero.
pub fn relative_gap(z_relax: f64, z_feasible: f64) -> Result<f64, VerifyError> {
    if z_relax == 0.0 {
        return if z_feasible == 0.0 {
            Ok(0.0)
        } else {
            Err(VerifyError::UndefinedGap(z_feasible))
        };
    }
    Ok(100.0 * (z_feasible - z_relax) / z_relax.abs())
}

/// Discrete state of an active arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Closed,
    Open,
    Active,
    Bypass,
}

struct Values<'a> {
    map: &'a BTreeMap<String, f64>,
}

impl Values<'_> {
    fn get(&self, name: &str) -> Result<f64, VerifyError> {
        self.map
            .get(name)
            .copied()
            .ok_or_else(|| VerifyError::MissingVariable(name.to_string()))
    }
    fn opt(&self, name: &str) -> Option<f64> {
        self.map.get(name).copied()
    }
    fn bit(&self, name: &str) -> Option<bool> {
        self.opt(name).map(|v| v >= 0.5)
    }
}

fn excess(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        v - lo
    } else if v > hi {
        v - hi
    } else {
        0.0
    }
}

struct Collector {
    out: Vec<Residual>,
}

impl Collector {
    fn push(&mut self, tag: &str, name: String, value: f64) {
        self.out.push(Residual {
            tag: tag.to_string(),
            name,
            value,
        });
    }
}

/// Residuals of each mode candidate for an active arc; `None` if the mode
/// does not apply to the arc kind.
fn mode_residuals(
    arc: &Arc,
    mode: Mode,
    f: f64,
    pi: f64,
    pj: f64,
    ctx: &NondimContext,
) -> Option<Vec<(&'static str, f64)>> {
    let (fmin, fmax) = (ctx.flow(arc.f_min), ctx.flow(arc.f_max));
    let r = match (&arc.kind, mode) {
        (
            ArcKind::Compressor { .. } | ArcKind::ControlValve { .. } | ArcKind::Valve { .. },
            Mode::Closed,
        ) => {
            let mut v = vec![("flow", f)];
            if let ArcKind::Valve {
                delta_p_max: Some(d),
            } = arc.kind
            {
                let d = ctx.pressure(d);
                v.push(("differential", excess(pi - pj, -d, d)));
            }
            v
        }
        (ArcKind::Valve { .. }, Mode::Open)
        | (ArcKind::Compressor { .. } | ArcKind::ControlValve { .. }, Mode::Bypass) => {
            vec![("pressure", pi - pj), ("flow", excess(f, fmin, fmax))]
        }
        (
            ArcKind::Compressor {
                alpha_min,
                alpha_max,
            },
            Mode::Active,
        ) => {
            let ratio = excess(pj, alpha_min * pi, alpha_max * pi);
            vec![("ratio", ratio), ("flow", excess(f, 0.0, fmax.max(0.0)))]
        }
        (
            ArcKind::ControlValve {
                delta_p_min,
                delta_p_max,
            },
            Mode::Active,
        ) => {
            let (dmin, dmax) = (ctx.pressure(*delta_p_min), ctx.pressure(*delta_p_max));
            vec![
                ("differential", excess(pi - pj, dmin, dmax)),
                ("flow", excess(f, 0.0, fmax.max(0.0))),
            ]
        }
        _ => return None,
    };
    Some(r)
}

fn candidates(kind: &ArcKind) -> &'static [Mode] {
    match kind {
        ArcKind::Valve { .. } => &[Mode::Open, Mode::Closed],
        _ => &[Mode::Active, Mode::Bypass, Mode::Closed],
    }
}

/// Mode from rounded binaries, or the best-fitting mode when absent.
fn arc_mode(
    arc: &Arc,
    v: &Values<'_>,
    f: f64,
    pi: f64,
    pj: f64,
    ctx: &NondimContext,
    out: &mut Collector,
    tag: &str,
) -> Mode {
    let id = &arc.id;
    let x = v.bit(&names::status(id));
    let given = match arc.kind {
        ArcKind::Valve { .. } => x.map(|on| if on { Mode::Open } else { Mode::Closed }),
        _ => match (x, v.bit(&names::active(id)), v.bit(&names::bypass(id))) {
            (Some(x), Some(ac), Some(bp)) => {
                let status = x as i32 - ac as i32 - bp as i32;
                out.push(tag, format!("{id}:status"), status as f64);
                Some(match (x, ac, bp) {
                    (false, _, _) => Mode::Closed,
                    (true, true, _) => Mode::Active,
                    _ => Mode::Bypass,
                })
            }
            _ => None,
        },
    };
    given.unwrap_or_else(|| {
        let worst = |m: Mode| {
            mode_residuals(arc, m, f, pi, pj, ctx)
                .map(|r| r.iter().map(|(_, x)| x.abs()).fold(0.0, f64::max))
                .unwrap_or(f64::INFINITY)
        };
        *candidates(&arc.kind)
            .iter()
            .min_by(|a, b| worst(**a).total_cmp(&worst(**b)))
            .expect("candidate list is nonempty")
    })
}

/// Evaluates every physical and logical constraint at `solution`.
///
/// `network` must carry the nomination's supply and demand. Values are in
/// the model's dimensionless units; binaries are rounded at 0.5.
pub fn residuals(
    network: &Network,
    ctx: &NondimContext,
    solution: &Solution,
    tolerance: f64,
) -> Result<VerificationReport, VerifyError> {
    residuals_of(network, ctx, &solution.values, tolerance)
}

pub fn residuals_of(
    network: &Network,
    ctx: &NondimContext,
    values: &BTreeMap<String, f64>,
    tolerance: f64,
) -> Result<VerificationReport, VerifyError> {
    let v = Values { map: values };
    let mut out = Collector { out: Vec::new() };
    let mut pressure = BTreeMap::new();
    let mut potential = BTreeMap::new();
    for node in network.nodes() {
        let p = v.get(&names::pressure(&node.id))?;
        let (lo, hi) = (ctx.pressure(node.p_min), ctx.pressure(node.p_max));
        out.push(TAG_PRESSURE_BOUNDS, node.id.clone(), excess(p, lo, hi));
        let pi = match v.opt(&names::potential(&node.id)) {
            Some(pi) => {
                out.push(tags::NODE_POTENTIAL, node.id.clone(), pi - ctx.potential(p));
                pi
            }
            None => ctx.potential(p),
        };
        pressure.insert(node.id.as_str(), p);
        potential.insert(node.id.as_str(), pi);
    }

    let mut flows = BTreeMap::new();
    let mut modes: BTreeMap<&str, Mode> = BTreeMap::new();
    for arc in network.arcs() {
        let id = arc.id.as_str();
        let f = v.get(&names::flow(id))?;
        flows.insert(id, f);
        let (pi, pj) = (pressure[arc.from.as_str()], pressure[arc.to.as_str()]);
        let (qi, qj) = (potential[arc.from.as_str()], potential[arc.to.as_str()]);
        let (fmin, fmax) = (ctx.flow(arc.f_min), ctx.flow(arc.f_max));
        match arc.kind {
            ArcKind::Pipe { .. } | ArcKind::Resistor { .. } => {
                let c = friction_coefficient(arc, ctx).expect("pipe or resistor");
                let tag = if matches!(arc.kind, ArcKind::Pipe { .. }) {
                    tags::PIPE_PHYSICS
                } else {
                    tags::RESISTOR_PHYSICS
                };
                out.push(tag, id.to_string(), qj - qi + c * f * f.abs());
                out.push(TAG_FLOW_BOUNDS, id.to_string(), excess(f, fmin, fmax));
            }
            ArcKind::ShortPipe => {
                out.push(tags::SHORT_PIPE, id.to_string(), qj - qi);
                out.push(TAG_FLOW_BOUNDS, id.to_string(), excess(f, fmin, fmax));
            }
            ArcKind::LossResistor { delta_p } => {
                let dp = ctx.pressure(delta_p);
                let d = pi - pj;
                let r = if f > 0.0 {
                    d - dp
                } else if f < 0.0 {
                    d + dp
                } else {
                    [d - dp, d + dp, d]
                        .into_iter()
                        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
                        .unwrap()
                };
                out.push(tags::LOSS_PRESSURE, id.to_string(), r);
                out.push(TAG_FLOW_BOUNDS, id.to_string(), excess(f, fmin, fmax));
            }
            ArcKind::Compressor { .. } | ArcKind::Valve { .. } | ArcKind::ControlValve { .. } => {
                let tag = match arc.kind {
                    ArcKind::Compressor { .. } => TAG_COMPRESSOR_MODE,
                    ArcKind::Valve { .. } => TAG_VALVE_MODE,
                    _ => TAG_CONTROL_VALVE_MODE,
                };
                let mode = arc_mode(arc, &v, f, pi, pj, ctx, &mut out, tag);
                for (what, r) in mode_residuals(arc, mode, f, pi, pj, ctx).unwrap_or_default() {
                    out.push(tag, format!("{id}:{what}"), r);
                }
                modes.insert(id, mode);
            }
        }
    }

    group_residuals(network, &v, &modes, &flows, &mut out);

    let mut objective = 0.0;
    let mut net_in: BTreeMap<&str, f64> = BTreeMap::new();
    for s in network.injections() {
        let val = v.get(&names::injection(&s.id))?;
        out.push(
            TAG_INJECTION,
            s.id.clone(),
            excess(val, 0.0, ctx.flow(s.s_max)),
        );
        objective += s.cost * val;
        *net_in.entry(s.node.as_str()).or_default() += val;
    }
    for w in network.withdrawals() {
        *net_in.entry(w.node.as_str()).or_default() -= ctx.flow(w.d);
    }
    for arc in network.arcs() {
        let f = flows[arc.id.as_str()];
        *net_in.entry(arc.to.as_str()).or_default() += f;
        *net_in.entry(arc.from.as_str()).or_default() -= f;
    }
    for node in network.nodes() {
        let b = net_in.get(node.id.as_str()).copied().unwrap_or(0.0);
        out.push(tags::NODE_BALANCE, node.id.clone(), b);
    }
    Ok(VerificationReport::from_residuals(
        out.out, tolerance, objective,
    ))
}

fn matches_mode(
    mode: &crate::network::OperationMode,
    states: &BTreeMap<&str, Mode>,
    flows: &BTreeMap<&str, f64>,
) -> f64 {
    let mut worst: f64 = 0.0;
    for (arc, status) in &mode.status {
        let Some(&m) = states.get(arc.as_str()) else {
            continue;
        };
        let on = m != Mode::Closed;
        if on != (*status == ArcStatus::Open) {
            worst = worst.max(1.0);
        }
    }
    for (arc, sub) in &mode.sub_mode {
        let want = match sub {
            SubMode::Active => Mode::Active,
            SubMode::Bypass => Mode::Bypass,
        };
        if states.get(arc.as_str()) != Some(&want) {
            worst = worst.max(1.0);
        }
    }
    for (arc, &dir) in &mode.direction {
        let f = flows.get(arc.as_str()).copied().unwrap_or(0.0);
        if (dir > 0 && f < 0.0) || (dir < 0 && f > 0.0) {
            worst = worst.max(f.abs());
        }
    }
    worst
}

fn group_residuals(
    network: &Network,
    v: &Values<'_>,
    states: &BTreeMap<&str, Mode>,
    flows: &BTreeMap<&str, f64>,
    out: &mut Collector,
) {
    for g in network.decision_groups() {
        let picks: Option<Vec<bool>> = (0..g.modes.len())
            .map(|k| v.bit(&names::mode(&g.id, k)))
            .collect();
        match picks {
            Some(picks) => {
                let count = picks.iter().filter(|&&b| b).count();
                out.push(TAG_GROUP_MODE, format!("{}:one", g.id), count as f64 - 1.0);
                for (k, mode) in g.modes.iter().enumerate().filter(|(k, _)| picks[*k]) {
                    out.push(
                        TAG_GROUP_MODE,
                        format!("{}:{k}", g.id),
                        matches_mode(mode, states, flows),
                    );
                }
            }
            None => {
                let best = g
                    .modes
                    .iter()
                    .map(|m| matches_mode(m, states, flows))
                    .fold(f64::INFINITY, f64::min);
                out.push(TAG_GROUP_MODE, g.id.clone(), best);
            }
        }
    }
}

#[cfg(test)]
mod tests;
