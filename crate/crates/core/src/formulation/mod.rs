//! Optimal gas flow models in dimensionless units.
//!
//! Every variant shares the nodal balance, injection limits, active-arc
//! logic, the loss-resistor direction reformulation and decision-group rows.
//! Variants differ only in how they treat the node potential `pi = g(p)` and
//! the friction law `pi_i - pi_j = c f|f|` of pipes and resistors:
//!
//! * `minlp` keeps both relations as symbolic nonlinear rows;
//! * `lr` replaces both by convex-hull blocks over polyhedral relaxations;
//! * `misoc` reuses the potential hull and relaxes friction with a direction
//!   binary, a cone `fhat >= f^2` and McCormick rows for `gamma = (2x-1) fhat`.

mod relax;

use std::collections::BTreeMap;
use std::sync::Arc;

use log::warn;
use thiserror::Error;

use crate::ingest::Nomination;
use crate::model::{HullBlock, ModelError, OptModel, Sense, VarId};
use crate::network::{Arc as NetArc, ArcKind, ArcStatus, Network, Node, SubMode};
use crate::physics::{friction_coefficient, NondimContext};
use crate::polyrelax::{
    base_relaxation, refine, RefinementRegistry, RelaxError, Univariate, UnivariateSpec,
};

pub use relax::{LinearRelaxation, Minlp, Misoc};

#[derive(Debug, Error)]
pub enum FormulationError {
    #[error("arc `{arc}`: flow bounds [{lo}, {hi}] are inconsistent")]
    InconsistentBounds { arc: String, lo: f64, hi: f64 },
    #[error("node `{node}`: pressure bounds [{lo}, {hi}] are inconsistent")]
    InconsistentPressure { node: String, lo: f64, hi: f64 },
    #[error("unknown relaxation `{0}`")]
    UnknownRelaxation(String),
    #[error("decision group `{group}` references unknown arc `{arc}`")]
    UnknownArc { group: String, arc: String },
    #[error("arc `{0}` has no friction coefficient")]
    NoFriction(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Relax(#[from] RelaxError),
}

type Result<T> = std::result::Result<T, FormulationError>;

/// Variable names shared by builders, verification and reports.
pub mod names {
    pub fn pressure(node: &str) -> String {
        format!("p[{node}]")
    }
    pub fn potential(node: &str) -> String {
        format!("pi[{node}]")
    }
    pub fn flow(arc: &str) -> String {
        format!("f[{arc}]")
    }
    pub fn injection(id: &str) -> String {
        format!("s[{id}]")
    }
    /// On/off for active arcs; flow direction for loss resistors and, in the
    /// conic variant, for pipes and resistors.
    pub fn status(arc: &str) -> String {
        format!("x[{arc}]")
    }
    pub fn active(arc: &str) -> String {
        format!("xac[{arc}]")
    }
    pub fn bypass(arc: &str) -> String {
        format!("xbp[{arc}]")
    }
    /// `F = f|f|` in the linear relaxation.
    pub fn lifted(arc: &str) -> String {
        format!("F[{arc}]")
    }
    pub fn squared(arc: &str) -> String {
        format!("fhat[{arc}]")
    }
    pub fn signed(arc: &str) -> String {
        format!("gamma[{arc}]")
    }
    pub fn mode(group: &str, k: usize) -> String {
        format!("sm[{group}:{k}]")
    }
    pub fn lambda(owner: &str, k: usize) -> String {
        format!("lam[{owner}:{k}]")
    }
}

/// Row and variable tags. Each row carries exactly one.
pub mod tags {
    pub const NODE_POTENTIAL: &str = "node/potential";
    pub const NODE_POTENTIAL_HULL: &str = "node/potential-hull";
    pub const NODE_BALANCE: &str = "node/balance";
    pub const PIPE_PHYSICS: &str = "pipe/physics";
    pub const PIPE_LIFTED: &str = "pipe/lifted";
    pub const PIPE_SIGNED: &str = "pipe/signed";
    pub const RESISTOR_PHYSICS: &str = "resistor/physics";
    pub const RESISTOR_LIFTED: &str = "resistor/lifted";
    pub const RESISTOR_SIGNED: &str = "resistor/signed";
    pub const SQUARE_HULL: &str = "friction/square-hull";
    pub const SQUARE_CONE: &str = "friction/square-cone";
    pub const MCCORMICK: &str = "friction/mccormick";
    pub const DIRECTION: &str = "friction/direction";
    pub const SHORT_PIPE: &str = "short-pipe/potential";
    pub const LOSS_PRESSURE: &str = "loss-resistor/pressure";
    pub const LOSS_FLOW: &str = "loss-resistor/flow";
    pub const COMPRESSOR_STATUS: &str = "compressor/status";
    pub const COMPRESSOR_FLOW: &str = "compressor/flow";
    pub const COMPRESSOR_RATIO: &str = "compressor/ratio";
    pub const COMPRESSOR_BYPASS: &str = "compressor/bypass";
    pub const VALVE_FLOW: &str = "valve/flow";
    pub const VALVE_DIFFERENTIAL: &str = "valve/differential";
    pub const VALVE_OPEN: &str = "valve/open";
    pub const CONTROL_VALVE_STATUS: &str = "control-valve/status";
    pub const CONTROL_VALVE_FLOW: &str = "control-valve/flow";
    pub const CONTROL_VALVE_ACTIVE: &str = "control-valve/active";
    pub const CONTROL_VALVE_BYPASS: &str = "control-valve/bypass";
    pub const GROUP_ONE_MODE: &str = "group/one-mode";
    pub const GROUP_OPEN: &str = "group/open";
    pub const GROUP_CLOSED: &str = "group/closed";
    pub const GROUP_ACTIVE: &str = "group/active";
    pub const GROUP_BYPASS: &str = "group/bypass";
    pub const GROUP_FLOW: &str = "group/flow-direction";
    pub const OBJECTIVE: &str = "objective";
}

/// Treatment of big-M coefficients that come out negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BigMPolicy {
    /// Clamp to zero and log.
    #[default]
    Guarded,
    /// Keep the coefficient as computed.
    AsComputed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulationOptions {
    /// Registry name: `minlp`, `lr` or `misoc`.
    pub relaxation: String,
    /// Refinement rounds applied to every univariate relaxation.
    pub refine_rounds: usize,
    pub refinement: String,
    pub big_m: BigMPolicy,
    pub ideal_eos: bool,
}

impl Default for FormulationOptions {
    fn default() -> Self {
        Self {
            relaxation: "lr".into(),
            refine_rounds: 0,
            refinement: "bisect-all".into(),
            big_m: BigMPolicy::Guarded,
            ideal_eos: false,
        }
    }
}

/// Variant-specific treatment of the two nonlinear relations.
pub trait PhysicsRelaxation: Send + Sync {
    fn name(&self) -> &'static str;
    fn node_physics(&self, b: &mut ModelBuilder<'_>, node: &Node) -> Result<()>;
    /// `pi_from - pi_to = coefficient f|f|` for a pipe or resistor.
    fn friction(&self, b: &mut ModelBuilder<'_>, arc: &NetArc, coefficient: f64) -> Result<()>;
}

pub struct RelaxationRegistry {
    entries: BTreeMap<&'static str, Arc<dyn PhysicsRelaxation>>,
}

impl RelaxationRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, r: Arc<dyn PhysicsRelaxation>) {
        self.entries.insert(r.name(), r);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PhysicsRelaxation>> {
        self.entries
            .get(name)
            .cloned()
            .ok_or_else(|| FormulationError::UnknownRelaxation(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for RelaxationRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Minlp));
        r.register(Arc::new(LinearRelaxation));
        r.register(Arc::new(Misoc));
        r
    }
}

/// Scaled bounds of one node.
#[derive(Debug, Clone, Copy)]
struct PressureBox {
    lo: f64,
    hi: f64,
}

/// Mutable state shared by the common rows and a [`PhysicsRelaxation`].
pub struct ModelBuilder<'a> {
    pub model: OptModel,
    pub ctx: NondimContext,
    pub options: &'a FormulationOptions,
    refinements: &'a RefinementRegistry,
    pressures: BTreeMap<String, PressureBox>,
    guards: Vec<String>,
}

impl<'a> ModelBuilder<'a> {
    pub fn var(&self, name: &str) -> Result<VarId> {
        Ok(self.model.var(name)?)
    }

    /// Scaled flow bounds of an arc.
    pub fn flow_bounds(&self, arc: &NetArc) -> (f64, f64) {
        (self.ctx.flow(arc.f_min), self.ctx.flow(arc.f_max))
    }

    /// Adds `(x, y) ∈ conv(vertices)` for `y = func(x)` over `[lo, hi]`.
    pub fn hull_block(
        &mut self,
        owner: &str,
        x: VarId,
        y: VarId,
        func: Arc<dyn Univariate>,
        lo: f64,
        hi: f64,
        tag: &str,
    ) -> Result<()> {
        let spec = UnivariateSpec::new(func, lo, hi)?;
        let base = base_relaxation(&spec)?;
        let relax = if self.options.refine_rounds > 0 {
            let scheme = self.refinements.get(&self.options.refinement)?;
            refine(&base, scheme.as_ref(), self.options.refine_rounds)?
        } else {
            base
        };
        let vertices = relax.vertices().to_vec();
        let mut lambdas = Vec::with_capacity(vertices.len());
        for k in 0..vertices.len() {
            lambdas.push(
                self.model
                    .add_continuous(names::lambda(owner, k), 0.0, 1.0, tag)?,
            );
        }
        let ones: Vec<_> = lambdas.iter().map(|&l| (l, 1.0)).collect();
        self.model
            .add_row(format!("{tag}[{owner}]:sum"), &ones, Sense::Eq, 1.0, tag)?;
        let mut xs = vec![(x, 1.0)];
        let mut ys = vec![(y, 1.0)];
        for (&l, &(vx, vy)) in lambdas.iter().zip(&vertices) {
            xs.push((l, -vx));
            ys.push((l, -vy));
        }
        self.model
            .add_row(format!("{tag}[{owner}]:x"), &xs, Sense::Eq, 0.0, tag)?;
        self.model
            .add_row(format!("{tag}[{owner}]:y"), &ys, Sense::Eq, 0.0, tag)?;
        self.model.add_hull_block(HullBlock {
            x,
            y,
            lambdas,
            vertices,
            tag: tag.to_string(),
        })?;
        Ok(())
    }

    fn pressure_box(&self, node: &str) -> PressureBox {
        self.pressures[node]
    }

    /// Applies the big-M policy to a coefficient that should be nonnegative.
    fn big_m(&mut self, value: f64, what: String) -> f64 {
        if value >= 0.0 || self.options.big_m == BigMPolicy::AsComputed {
            return value;
        }
        warn!("{what}: big-M {value:.6e} is negative, clamped to 0");
        self.guards.push(what);
        0.0
    }
}

/// Builds the model selected by `options.relaxation`.
pub fn build(
    network: &Network,
    nomination: &Nomination,
    ctx: &NondimContext,
    options: &FormulationOptions,
) -> Result<OptModel> {
    build_with(
        network,
        nomination,
        ctx,
        options,
        &RelaxationRegistry::default(),
        &RefinementRegistry::default(),
    )
}

pub fn build_with(
    network: &Network,
    nomination: &Nomination,
    ctx: &NondimContext,
    options: &FormulationOptions,
    relaxations: &RelaxationRegistry,
    refinements: &RefinementRegistry,
) -> Result<OptModel> {
    let variant = relaxations.get(&options.relaxation)?;
    let net = nomination.apply(network);
    let ctx = if options.ideal_eos { ctx.ideal() } else { *ctx };
    let mut b = ModelBuilder {
        model: OptModel::new(format!(
            "{}/{}/{}",
            net.name(),
            nomination.id,
            variant.name()
        )),
        ctx,
        options,
        refinements,
        pressures: BTreeMap::new(),
        guards: Vec::new(),
    };

    for node in net.nodes() {
        let (lo, hi) = (ctx.pressure(node.p_min), ctx.pressure(node.p_max));
        if !(lo <= hi) {
            return Err(FormulationError::InconsistentPressure {
                node: node.id.clone(),
                lo,
                hi,
            });
        }
        b.pressures.insert(node.id.clone(), PressureBox { lo, hi });
        b.model
            .add_continuous(names::pressure(&node.id), lo, hi, "node/pressure")?;
        // pi is monotone in p > 0
        b.model.add_continuous(
            names::potential(&node.id),
            ctx.potential(lo),
            ctx.potential(hi),
            "node/potential",
        )?;
        variant.node_physics(&mut b, node)?;
    }

    for arc in net.arcs() {
        let (lo, hi) = b.flow_bounds(arc);
        if !(lo <= hi) {
            return Err(FormulationError::InconsistentBounds {
                arc: arc.id.clone(),
                lo,
                hi,
            });
        }
        // switched arcs must admit zero flow; their rows carry the bounds
        let switched = matches!(
            arc.kind,
            ArcKind::Compressor { .. }
                | ArcKind::Valve { .. }
                | ArcKind::ControlValve { .. }
                | ArcKind::LossResistor { .. }
        );
        let (vlo, vhi) = if switched {
            (lo.min(0.0), hi.max(0.0))
        } else {
            (lo, hi)
        };
        b.model
            .add_continuous(names::flow(&arc.id), vlo, vhi, "arc/flow")?;
        arc_rows(&mut b, variant.as_ref(), arc)?;
    }

    decision_groups(&mut b, &net)?;
    balance_and_objective(&mut b, &net)?;

    let mut model = b.model;
    model.set_meta("relaxation", variant.name());
    model.set_meta("network", net.name());
    model.set_meta("nomination", nomination.id.as_str());
    model.set_meta("eos", if options.ideal_eos { "ideal" } else { "cnga" });
    model.set_meta("refine-rounds", options.refine_rounds.to_string());
    model.set_meta("refinement", options.refinement.as_str());
    model.set_meta("flow-scale", format!("{:e}", ctx.f0));
    model.set_meta("pressure-scale", format!("{:e}", ctx.p0));
    model.set_meta("big-m-guards", b.guards.len().to_string());
    Ok(model.freeze())
}

fn arc_rows(b: &mut ModelBuilder<'_>, variant: &dyn PhysicsRelaxation, arc: &NetArc) -> Result<()> {
    let id = arc.id.as_str();
    let f = b.var(&names::flow(id))?;
    let (pi, pj) = (
        b.var(&names::pressure(&arc.from))?,
        b.var(&names::pressure(&arc.to))?,
    );
    let (bi, bj) = (b.pressure_box(&arc.from), b.pressure_box(&arc.to));
    let (fmin, fmax) = b.flow_bounds(arc);
    let m = &mut b.model;
    match arc.kind {
        ArcKind::Pipe { .. } | ArcKind::Resistor { .. } => {
            let c = friction_coefficient(arc, &b.ctx)
                .ok_or_else(|| FormulationError::NoFriction(arc.id.clone()))?;
            variant.friction(b, arc, c)?;
        }
        ArcKind::ShortPipe => {
            let (qi, qj) = (
                m.var(&names::potential(&arc.from))?,
                m.var(&names::potential(&arc.to))?,
            );
            m.add_row(
                format!("short[{id}]"),
                &[(qj, 1.0), (qi, -1.0)],
                Sense::Eq,
                0.0,
                tags::SHORT_PIPE,
            )?;
        }
        ArcKind::LossResistor { delta_p } => {
            let dp = b.ctx.pressure(delta_p);
            if fmin < 0.0 {
                let x = m.add_binary(names::status(id), "loss-resistor/direction")?;
                // p_i - p_j = dp (2x - 1)
                m.add_row(
                    format!("loss[{id}]:pressure"),
                    &[(pi, 1.0), (pj, -1.0), (x, -2.0 * dp)],
                    Sense::Eq,
                    -dp,
                    tags::LOSS_PRESSURE,
                )?;
                m.add_row(
                    format!("loss[{id}]:flow-lo"),
                    &[(f, 1.0), (x, fmin)],
                    Sense::Ge,
                    fmin,
                    tags::LOSS_FLOW,
                )?;
                m.add_row(
                    format!("loss[{id}]:flow-hi"),
                    &[(f, 1.0), (x, -fmax)],
                    Sense::Le,
                    0.0,
                    tags::LOSS_FLOW,
                )?;
            } else {
                m.set_bounds(f, fmin, fmax)?;
                m.add_row(
                    format!("loss[{id}]:pressure"),
                    &[(pi, 1.0), (pj, -1.0)],
                    Sense::Eq,
                    dp,
                    tags::LOSS_PRESSURE,
                )?;
            }
        }
        ArcKind::Compressor {
            alpha_min,
            alpha_max,
        } => {
            let x = m.add_binary(names::status(id), "compressor/on")?;
            let xac = m.add_binary(names::active(id), "compressor/active")?;
            let xbp = m.add_binary(names::bypass(id), "compressor/bypass")?;
            let t = tags::COMPRESSOR_STATUS;
            m.add_row(
                format!("comp[{id}]:status"),
                &[(x, 1.0), (xac, -1.0), (xbp, -1.0)],
                Sense::Eq,
                0.0,
                t,
            )?;
            let t = tags::COMPRESSOR_FLOW;
            m.add_row(
                format!("comp[{id}]:flow-lo"),
                &[(f, 1.0), (xbp, -fmin)],
                Sense::Ge,
                0.0,
                t,
            )?;
            m.add_row(
                format!("comp[{id}]:flow-hi"),
                &[(f, 1.0), (x, -fmax)],
                Sense::Le,
                0.0,
                t,
            )?;
            let m_lo = b.big_m(
                alpha_min * bi.hi - bj.lo,
                format!("compressor `{id}` ratio-lo"),
            );
            let m_hi = b.big_m(
                bj.hi - alpha_max * bi.lo,
                format!("compressor `{id}` ratio-hi"),
            );
            let m = &mut b.model;
            let t = tags::COMPRESSOR_RATIO;
            // p_j >= a_min p_i - (2 - xac - x) M
            m.add_row(
                format!("comp[{id}]:ratio-lo"),
                &[(pj, 1.0), (pi, -alpha_min), (xac, -m_lo), (x, -m_lo)],
                Sense::Ge,
                -2.0 * m_lo,
                t,
            )?;
            // p_j <= a_max p_i + (2 - xac - x) M
            m.add_row(
                format!("comp[{id}]:ratio-hi"),
                &[(pj, 1.0), (pi, -alpha_max), (xac, m_hi), (x, m_hi)],
                Sense::Le,
                2.0 * m_hi,
                t,
            )?;
            bypass_rows(m, id, "comp", pi, pj, xbp, bi, bj, tags::COMPRESSOR_BYPASS)?;
        }
        ArcKind::Valve { delta_p_max } => {
            let x = m.add_binary(names::status(id), "valve/open")?;
            let t = tags::VALVE_FLOW;
            m.add_row(
                format!("valve[{id}]:flow-lo"),
                &[(f, 1.0), (x, -fmin)],
                Sense::Ge,
                0.0,
                t,
            )?;
            m.add_row(
                format!("valve[{id}]:flow-hi"),
                &[(f, 1.0), (x, -fmax)],
                Sense::Le,
                0.0,
                t,
            )?;
            let dp = match delta_p_max {
                Some(v) => b.ctx.pressure(v),
                None => (bi.hi - bj.lo).max(bj.hi - bi.lo),
            };
            let t = tags::VALVE_DIFFERENTIAL;
            let diff = [(pi, 1.0), (pj, -1.0)];
            m.add_row(format!("valve[{id}]:dp-lo"), &diff, Sense::Ge, -dp, t)?;
            m.add_row(format!("valve[{id}]:dp-hi"), &diff, Sense::Le, dp, t)?;
            bypass_rows(m, id, "valve", pi, pj, x, bi, bj, tags::VALVE_OPEN)?;
        }
        ArcKind::ControlValve {
            delta_p_min,
            delta_p_max,
        } => {
            let (dmin, dmax) = (b.ctx.pressure(delta_p_min), b.ctx.pressure(delta_p_max));
            let x = m.add_binary(names::status(id), "control-valve/on")?;
            let xac = m.add_binary(names::active(id), "control-valve/active")?;
            let xbp = m.add_binary(names::bypass(id), "control-valve/bypass")?;
            m.add_row(
                format!("cv[{id}]:status"),
                &[(x, 1.0), (xac, -1.0), (xbp, -1.0)],
                Sense::Eq,
                0.0,
                tags::CONTROL_VALVE_STATUS,
            )?;
            let t = tags::CONTROL_VALVE_FLOW;
            m.add_row(
                format!("cv[{id}]:flow-lo"),
                &[(f, 1.0), (xbp, -fmin)],
                Sense::Ge,
                0.0,
                t,
            )?;
            m.add_row(
                format!("cv[{id}]:flow-hi"),
                &[(f, 1.0), (x, -fmax)],
                Sense::Le,
                0.0,
                t,
            )?;
            let lo_gap = bi.lo - bj.hi;
            let hi_gap = bi.hi - bj.lo;
            let t = tags::CONTROL_VALVE_ACTIVE;
            // p_i - p_j >= (pi_min - pj_max) + xac (dmin - pi_min + pj_max)
            m.add_row(
                format!("cv[{id}]:active-lo"),
                &[(pi, 1.0), (pj, -1.0), (xac, -(dmin - lo_gap))],
                Sense::Ge,
                lo_gap,
                t,
            )?;
            // p_i - p_j <= (pi_max - pj_min) - xac (pi_max - pj_min - dmax)
            m.add_row(
                format!("cv[{id}]:active-hi"),
                &[(pi, 1.0), (pj, -1.0), (xac, hi_gap - dmax)],
                Sense::Le,
                hi_gap,
                t,
            )?;
            bypass_rows(m, id, "cv", pi, pj, xbp, bi, bj, tags::CONTROL_VALVE_BYPASS)?;
        }
    }
    Ok(())
}

/// `(1 - z)(pi_min - pj_max) <= p_i - p_j <= (1 - z)(pi_max - pj_min)`.
#[allow(clippy::too_many_arguments)]
fn bypass_rows(
    m: &mut OptModel,
    id: &str,
    prefix: &str,
    pi: VarId,
    pj: VarId,
    z: VarId,
    bi: PressureBox,
    bj: PressureBox,
    tag: &str,
) -> Result<()> {
    let lo = bi.lo - bj.hi;
    let hi = bi.hi - bj.lo;
    m.add_row(
        format!("{prefix}[{id}]:eq-lo"),
        &[(pi, 1.0), (pj, -1.0), (z, lo)],
        Sense::Ge,
        lo,
        tag,
    )?;
    m.add_row(
        format!("{prefix}[{id}]:eq-hi"),
        &[(pi, 1.0), (pj, -1.0), (z, hi)],
        Sense::Le,
        hi,
        tag,
    )?;
    Ok(())
}

fn decision_groups(b: &mut ModelBuilder<'_>, net: &Network) -> Result<()> {
    for g in net.decision_groups() {
        let gid = g.id.as_str();
        let m = &mut b.model;
        let mut modes = Vec::with_capacity(g.modes.len());
        for k in 0..g.modes.len() {
            modes.push(m.add_binary(names::mode(gid, k), "group/mode")?);
        }
        let ones: Vec<_> = modes.iter().map(|&s| (s, 1.0)).collect();
        m.add_row(
            format!("group[{gid}]:one"),
            &ones,
            Sense::Eq,
            1.0,
            tags::GROUP_ONE_MODE,
        )?;
        for (k, (mode, &s)) in g.modes.iter().zip(&modes).enumerate() {
            for (arc, status) in &mode.status {
                let x = m.var(&names::status(arc))?;
                match status {
                    ArcStatus::Open => m.add_row(
                        format!("group[{gid}:{k}]:open[{arc}]"),
                        &[(s, 1.0), (x, -1.0)],
                        Sense::Le,
                        0.0,
                        tags::GROUP_OPEN,
                    )?,
                    ArcStatus::Closed => m.add_row(
                        format!("group[{gid}:{k}]:closed[{arc}]"),
                        &[(s, 1.0), (x, 1.0)],
                        Sense::Le,
                        1.0,
                        tags::GROUP_CLOSED,
                    )?,
                };
            }
            for (arc, sub) in &mode.sub_mode {
                let (z, tag, what) = match sub {
                    SubMode::Active => (m.var(&names::active(arc))?, tags::GROUP_ACTIVE, "active"),
                    SubMode::Bypass => (m.var(&names::bypass(arc))?, tags::GROUP_BYPASS, "bypass"),
                };
                m.add_row(
                    format!("group[{gid}:{k}]:{what}[{arc}]"),
                    &[(s, 1.0), (z, -1.0)],
                    Sense::Le,
                    0.0,
                    tag,
                )?;
            }
        }
        for arc_id in &g.arcs {
            let arc = net
                .arc(arc_id)
                .ok_or_else(|| FormulationError::UnknownArc {
                    group: gid.to_string(),
                    arc: arc_id.clone(),
                })?;
            let (fmin, fmax) = b.flow_bounds(arc);
            let m = &mut b.model;
            let f = m.var(&names::flow(arc_id))?;
            // (1 - sum s_m dir) fmin <= f  and  f <= (1 + sum s_m dir) fmax
            let mut lo = vec![(f, 1.0)];
            let mut hi = vec![(f, 1.0)];
            for (mode, &s) in g.modes.iter().zip(&modes) {
                let d = mode.direction_of(arc_id) as f64;
                lo.push((s, d * fmin));
                hi.push((s, -d * fmax));
            }
            let t = tags::GROUP_FLOW;
            m.add_row(
                format!("group[{gid}]:flow-lo[{arc_id}]"),
                &lo,
                Sense::Ge,
                fmin,
                t,
            )?;
            m.add_row(
                format!("group[{gid}]:flow-hi[{arc_id}]"),
                &hi,
                Sense::Le,
                fmax,
                t,
            )?;
        }
    }
    Ok(())
}

fn balance_and_objective(b: &mut ModelBuilder<'_>, net: &Network) -> Result<()> {
    let ctx = b.ctx;
    let m = &mut b.model;
    let mut supply: BTreeMap<&str, Vec<(VarId, f64)>> = BTreeMap::new();
    for s in net.injections() {
        let v = m.add_continuous(
            names::injection(&s.id),
            0.0,
            ctx.flow(s.s_max),
            "injection/supply",
        )?;
        m.add_objective_term(v, s.cost)?;
        supply.entry(s.node.as_str()).or_default().push((v, 1.0));
    }
    let mut demand: BTreeMap<&str, f64> = BTreeMap::new();
    for w in net.withdrawals() {
        *demand.entry(w.node.as_str()).or_default() += ctx.flow(w.d);
    }
    for node in net.nodes() {
        let inc = net
            .incidence(&node.id)
            .expect("every node has an incidence entry");
        let mut terms = Vec::new();
        for &a in &inc.incoming {
            terms.push((m.var(&names::flow(&net.arcs()[a].id))?, 1.0));
        }
        for &a in &inc.outgoing {
            terms.push((m.var(&names::flow(&net.arcs()[a].id))?, -1.0));
        }
        terms.extend(supply.get(node.id.as_str()).into_iter().flatten().copied());
        let d = demand.get(node.id.as_str()).copied().unwrap_or(0.0);
        m.add_row(
            format!("balance[{}]", node.id),
            &terms,
            Sense::Eq,
            d,
            tags::NODE_BALANCE,
        )?;
    }
    Ok(())
}

/// Fixes the named binaries to 0 or 1.
pub fn fix_discrete(model: &OptModel, assignment: &BTreeMap<String, u8>) -> Result<OptModel> {
    Ok(model.fix_binaries(assignment)?)
}
