use std::sync::Arc;

use super::{names, tags, ModelBuilder, PhysicsRelaxation, Result};
use crate::model::{NonlinearExpr, Sense};
use crate::network::{Arc as NetArc, ArcKind, Node};
use crate::polyrelax::{Potential, SignedSquare};

fn friction_tags(arc: &NetArc) -> (&'static str, &'static str, &'static str) {
    match arc.kind {
        ArcKind::Resistor { .. } => (
            tags::RESISTOR_PHYSICS,
            tags::RESISTOR_LIFTED,
            tags::RESISTOR_SIGNED,
        ),
        _ => (tags::PIPE_PHYSICS, tags::PIPE_LIFTED, tags::PIPE_SIGNED),
    }
}

fn potential_hull(b: &mut ModelBuilder<'_>, node: &Node) -> Result<()> {
    let p = b.var(&names::pressure(&node.id))?;
    let pi = b.var(&names::potential(&node.id))?;
    let var = b.model.variable(p);
    let (lo, hi) = (var.lower, var.upper);
    let g = Arc::new(Potential {
        b1: b.ctx.b1_bar,
        b2: b.ctx.b2_bar,
    });
    b.hull_block(
        &format!("p:{}", node.id),
        p,
        pi,
        g,
        lo,
        hi,
        tags::NODE_POTENTIAL_HULL,
    )
}

/// Nonlinear relations kept symbolically.
pub struct Minlp;

impl PhysicsRelaxation for Minlp {
    fn name(&self) -> &'static str {
        "minlp"
    }

    fn node_physics(&self, b: &mut ModelBuilder<'_>, node: &Node) -> Result<()> {
        let expr = NonlinearExpr::Potential {
            potential: b.var(&names::potential(&node.id))?,
            pressure: b.var(&names::pressure(&node.id))?,
            b1: b.ctx.b1_bar,
            b2: b.ctx.b2_bar,
        };
        b.model.add_nonlinear(
            format!("potential[{}]", node.id),
            expr,
            tags::NODE_POTENTIAL,
        )?;
        Ok(())
    }

    fn friction(&self, b: &mut ModelBuilder<'_>, arc: &NetArc, coefficient: f64) -> Result<()> {
        let expr = NonlinearExpr::PotentialDrop {
            upstream: b.var(&names::potential(&arc.from))?,
            downstream: b.var(&names::potential(&arc.to))?,
            flow: b.var(&names::flow(&arc.id))?,
            coefficient,
        };
        let (tag, _, _) = friction_tags(arc);
        b.model
            .add_nonlinear(format!("friction[{}]", arc.id), expr, tag)?;
        Ok(())
    }
}

/// Hull blocks for both relations.
pub struct LinearRelaxation;

impl PhysicsRelaxation for LinearRelaxation {
    fn name(&self) -> &'static str {
        "lr"
    }

    fn node_physics(&self, b: &mut ModelBuilder<'_>, node: &Node) -> Result<()> {
        potential_hull(b, node)
    }

    fn friction(&self, b: &mut ModelBuilder<'_>, arc: &NetArc, coefficient: f64) -> Result<()> {
        let (lo, hi) = b.flow_bounds(arc);
        let f = b.var(&names::flow(&arc.id))?;
        let qi = b.var(&names::potential(&arc.from))?;
        let qj = b.var(&names::potential(&arc.to))?;
        let (_, tag, _) = friction_tags(arc);
        let lifted = b.model.add_continuous(
            names::lifted(&arc.id),
            lo * lo.abs(),
            hi * hi.abs(),
            "friction/lifted",
        )?;
        b.model.add_row(
            format!("lifted[{}]", arc.id),
            &[(qi, 1.0), (qj, -1.0), (lifted, -coefficient)],
            Sense::Eq,
            0.0,
            tag,
        )?;
        b.hull_block(
            &format!("f:{}", arc.id),
            f,
            lifted,
            Arc::new(SignedSquare),
            lo,
            hi,
            tags::SQUARE_HULL,
        )
    }
}

/// Potential hull plus a direction binary, a square cone and McCormick rows.
pub struct Misoc;

impl PhysicsRelaxation for Misoc {
    fn name(&self) -> &'static str {
        "misoc"
    }

    fn node_physics(&self, b: &mut ModelBuilder<'_>, node: &Node) -> Result<()> {
        potential_hull(b, node)
    }

    fn friction(&self, b: &mut ModelBuilder<'_>, arc: &NetArc, coefficient: f64) -> Result<()> {
        let id = arc.id.as_str();
        let (lo, hi) = b.flow_bounds(arc);
        let big = lo.abs().max(hi.abs());
        let m2 = big * big;
        let f = b.var(&names::flow(id))?;
        let qi = b.var(&names::potential(&arc.from))?;
        let qj = b.var(&names::potential(&arc.to))?;
        let (_, _, tag) = friction_tags(arc);
        let m = &mut b.model;
        let x = m.add_binary(names::status(id), "friction/direction")?;
        let fhat = m.add_continuous(names::squared(id), 0.0, m2, "friction/square")?;
        let gamma = m.add_continuous(names::signed(id), -m2, m2, "friction/signed")?;
        m.add_row(
            format!("signed[{id}]"),
            &[(qi, 1.0), (qj, -1.0), (gamma, -coefficient)],
            Sense::Eq,
            0.0,
            tag,
        )?;
        m.add_cone(format!("cone[{id}]"), fhat, f, tags::SQUARE_CONE)?;
        let t = tags::MCCORMICK;
        m.add_row(
            format!("mc[{id}]:1"),
            &[(gamma, 1.0), (fhat, 1.0)],
            Sense::Ge,
            0.0,
            t,
        )?;
        m.add_row(
            format!("mc[{id}]:2"),
            &[(gamma, 1.0), (fhat, -1.0)],
            Sense::Le,
            0.0,
            t,
        )?;
        // gamma >= fhat + (2x - 1) M^2 - M^2
        m.add_row(
            format!("mc[{id}]:3"),
            &[(gamma, 1.0), (fhat, -1.0), (x, -2.0 * m2)],
            Sense::Ge,
            -2.0 * m2,
            t,
        )?;
        // gamma <= -fhat + (2x - 1) M^2 + M^2
        m.add_row(
            format!("mc[{id}]:4"),
            &[(gamma, 1.0), (fhat, 1.0), (x, -2.0 * m2)],
            Sense::Le,
            0.0,
            t,
        )?;
        // x = 1 when f > 0, x = 0 when f < 0
        let t = tags::DIRECTION;
        m.add_row(
            format!("dir[{id}]:lo"),
            &[(f, 1.0), (x, lo)],
            Sense::Ge,
            lo,
            t,
        )?;
        m.add_row(
            format!("dir[{id}]:hi"),
            &[(f, 1.0), (x, -hi)],
            Sense::Le,
            0.0,
            t,
        )?;
        Ok(())
    }
}
