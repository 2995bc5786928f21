//! Outlet pressure of a resistor under the density-weighted drag law and
//! under the potential-difference approximation, over a grid of inlet
//! pressures and flows, for the configured and the ideal equation of state.

use std::io::Write;

use serde::Serialize;

use super::{VerifyError, REPORT_SCHEMA};
use crate::network::{ArcKind, Network};
use crate::physics::{resistor_coefficient, safeguarded_newton, Eos, NondimContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepGrid {
    pub pressures: usize,
    pub flows: usize,
}

impl SweepGrid {
    /// Most nearly square factorisation `a * b = total` with `a <= b`.
    pub fn with_total(total: usize) -> Self {
        let mut a = (total as f64).sqrt() as usize;
        while a > 1 && total % a != 0 {
            a -= 1;
        }
        let a = a.max(1);
        Self {
            pressures: a,
            flows: total / a,
        }
    }

    pub fn total(&self) -> usize {
        self.pressures * self.flows
    }
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self::with_total(500)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub eos: &'static str,
    pub p_in: f64,
    pub flow: f64,
    pub p_out_standard: Option<f64>,
    pub p_out_approx: Option<f64>,
    pub rel_error: Option<f64>,
}

impl SweepPoint {
    pub fn feasible(&self) -> bool {
        self.rel_error.is_some()
    }
}

/// `n` points spanning `[lo, hi]`; the point nearest zero is snapped to zero
/// when zero lies inside.
fn axis(lo: f64, hi: f64, n: usize, snap_zero: bool) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    if snap_zero && lo <= 0.0 && hi >= 0.0 {
        let k = (0..n)
            .min_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()))
            .unwrap();
        v[k] = 0.0;
    }
    v
}

/// Outlet pressure from `c f^2 = rho(p_up) (p_up - p_down)` with the
/// upstream node chosen by the flow sign.
fn standard_outlet(
    ctx: &NondimContext,
    c: f64,
    p_in: f64,
    f: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    if f == 0.0 {
        return Some(p_in);
    }
    let drop = c * f * f;
    let p = if f > 0.0 {
        p_in - drop / ctx.density(p_in)
    } else {
        // rho(p) (p - p_in) = drop, increasing in p above p_in
        let g = |p: f64| ctx.density(p) * (p - p_in) - drop;
        let dg = |p: f64| ctx.density(p) + (ctx.b1_bar + 2.0 * ctx.b2_bar * p) * (p - p_in);
        safeguarded_newton(g, dg, p_in.max(lo), hi)?
    };
    (lo..=hi).contains(&p).then_some(p)
}

/// Outlet pressure from `pi(p_in) - pi(p_out) = c f|f|`.
fn approx_outlet(ctx: &NondimContext, c: f64, p_in: f64, f: f64, lo: f64, hi: f64) -> Option<f64> {
    if f == 0.0 {
        return Some(p_in);
    }
    let target = ctx.potential(p_in) - c * f * f.abs();
    let p = safeguarded_newton(
        |p| ctx.potential(p) - target,
        |p| ctx.potential_derivative(p),
        lo,
        hi,
    )?;
    Some(p)
}

/// Runs the sweep for `ctx` and for its ideal-gas counterpart. Root
/// brackets are the union of the two end-node pressure ranges.
pub fn resistor_error_sweep(
    network: &Network,
    arc_id: &str,
    ctx: &NondimContext,
    grid: SweepGrid,
) -> Result<Vec<SweepPoint>, VerifyError> {
    if grid.pressures < 2 || grid.flows < 2 {
        return Err(VerifyError::BadGrid(grid.pressures.min(grid.flows)));
    }
    let arc = network
        .arc(arc_id)
        .ok_or_else(|| VerifyError::UnknownArc(arc_id.to_string()))?;
    if !matches!(arc.kind, ArcKind::Resistor { .. }) {
        return Err(VerifyError::NotAResistor(arc_id.to_string()));
    }
    let from = network.node(&arc.from).expect("validated endpoint");
    let to = network.node(&arc.to).expect("validated endpoint");
    let mut out = Vec::with_capacity(2 * grid.total());
    let variants = [(ctx.eos, *ctx), (Eos::Ideal, ctx.ideal())];
    for (eos, c) in variants {
        let label = match eos {
            Eos::Cnga => "cnga",
            Eos::Ideal => "ideal",
        };
        let coef = resistor_coefficient(arc, &c).expect("resistor");
        let lo = c.pressure(from.p_min.min(to.p_min));
        let hi = c.pressure(from.p_max.max(to.p_max));
        let p_axis = axis(
            c.pressure(from.p_min),
            c.pressure(from.p_max),
            grid.pressures,
            false,
        );
        let f_axis = axis(c.flow(arc.f_min), c.flow(arc.f_max), grid.flows, true);
        for &p_in in &p_axis {
            for &f in &f_axis {
                let s = standard_outlet(&c, coef, p_in, f, lo, hi);
                let a = approx_outlet(&c, coef, p_in, f, lo, hi);
                let rel_error = match (s, a) {
                    (Some(s), Some(a)) => Some((s - a).abs() / s),
                    _ => None,
                };
                out.push(SweepPoint {
                    eos: label,
                    p_in,
                    flow: f,
                    p_out_standard: s,
                    p_out_approx: a,
                    rel_error,
                });
            }
        }
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

/// Plot-ready CSV, preceded by one `#` line naming the schema.
pub fn write_sweep_csv(
    points: &[SweepPoint],
    arc_id: &str,
    w: &mut dyn Write,
) -> Result<(), VerifyError> {
    writeln!(w, "# {REPORT_SCHEMA} kind=resistor-sweep arc={arc_id}")?;
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record([
        "eos",
        "p_in",
        "flow",
        "p_out_standard",
        "p_out_approx",
        "rel_error",
        "status",
    ])?;
    for p in points {
        csv.write_record([
            p.eos.to_string(),
            format!("{:.12e}", p.p_in),
            format!("{:.12e}", p.flow),
            cell(p.p_out_standard),
            cell(p.p_out_approx),
            cell(p.rel_error),
            if p.feasible() { "ok" } else { "infeasible" }.to_string(),
        ])?;
    }
    csv.flush()?;
    Ok(())
}
