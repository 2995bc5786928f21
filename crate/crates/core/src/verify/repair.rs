//! Pressure recovery for fixed flows and discrete decisions.
//!
//! Arcs that tie potentials (pipes, resistors, short pipes, open valves,
//! bypassed compressors and control valves) group nodes into islands whose
//! potentials are fixed up to one shift `t`. Every remaining arc is a
//! monotone two-sided relation between pressures of two islands, so bounds
//! on the shifts can be contracted by interval propagation and then fixed
//! one island at a time.

use std::collections::BTreeMap;

use crate::formulation::names;
use crate::network::{ArcKind, Network};
use crate::physics::{friction_coefficient, NondimContext};

const MAX_SWEEPS: usize = 500;

#[derive(Debug, Clone, Copy)]
enum Link {
    /// `a_min p_i <= p_j <= a_max p_i`
    Ratio(f64, f64),
    /// `lo <= p_i - p_j <= hi`
    Difference(f64, f64),
}

impl Link {
    /// Range of `p_j` given a range of `p_i`.
    fn forward(self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Link::Ratio(a, b) => (a * lo, b * hi),
            Link::Difference(d0, d1) => (lo - d1, hi - d0),
        }
    }
    /// Range of `p_i` given a range of `p_j`.
    fn backward(self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Link::Ratio(a, b) => (lo / b, hi / a),
            Link::Difference(d0, d1) => (lo + d0, hi + d1),
        }
    }
}

struct Islands {
    parent: Vec<usize>,
    /// potential of a node minus potential of its parent
    offset: Vec<f64>,
}

impl Islands {
    fn find(&mut self, i: usize) -> (usize, f64) {
        let p = self.parent[i];
        if p == i {
            return (i, 0.0);
        }
        let (root, off) = self.find(p);
        self.parent[i] = root;
        self.offset[i] += off;
        (root, self.offset[i])
    }

    /// Records `pi_j - pi_i = delta`. Returns false on an inconsistent loop.
    fn join(&mut self, i: usize, j: usize, delta: f64, tol: f64) -> bool {
        let (ri, oi) = self.find(i);
        let (rj, oj) = self.find(j);
        if ri == rj {
            return (oj - oi - delta).abs() <= tol;
        }
        self.parent[rj] = ri;
        self.offset[rj] = oi + delta - oj;
        true
    }
}

/// Pressures and potentials consistent with the flows, injections and
/// rounded binaries in `values`, or `None` if propagation finds none.
/// The returned map copies `values` and overwrites `p[..]` and `pi[..]`.
pub fn recover_pressures(
    network: &Network,
    ctx: &NondimContext,
    values: &BTreeMap<String, f64>,
) -> Option<BTreeMap<String, f64>> {
    let n = network.nodes().len();
    let bit = |name: String| values.get(&name).map(|&v| v >= 0.5);
    let tol = 1e-9;
    let mut isl = Islands {
        parent: (0..n).collect(),
        offset: vec![0.0; n],
    };
    let mut links = Vec::new();
    for arc in network.arcs() {
        let i = network.node_idx(&arc.from)?;
        let j = network.node_idx(&arc.to)?;
        let id = arc.id.as_str();
        let f = *values.get(&names::flow(id))?;
        let tie = |isl: &mut Islands, delta: f64| isl.join(i, j, delta, tol * (1.0 + delta.abs()));
        let ok = match arc.kind {
            ArcKind::Pipe { .. } | ArcKind::Resistor { .. } => {
                let c = friction_coefficient(arc, ctx)?;
                tie(&mut isl, -c * f * f.abs())
            }
            ArcKind::ShortPipe => tie(&mut isl, 0.0),
            ArcKind::LossResistor { delta_p } => {
                let dp = ctx.pressure(delta_p);
                let forward = bit(names::status(id)).unwrap_or(f >= 0.0);
                let d = if forward { dp } else { -dp };
                links.push((i, j, Link::Difference(d, d)));
                true
            }
            ArcKind::Valve { delta_p_max } => {
                if bit(names::status(id))? {
                    tie(&mut isl, 0.0)
                } else {
                    if let Some(d) = delta_p_max {
                        let d = ctx.pressure(d);
                        links.push((i, j, Link::Difference(-d, d)));
                    }
                    true
                }
            }
            ArcKind::Compressor {
                alpha_min,
                alpha_max,
            } => match (
                bit(names::status(id))?,
                bit(names::active(id))?,
                bit(names::bypass(id))?,
            ) {
                (false, _, _) => true,
                (true, true, false) => {
                    links.push((i, j, Link::Ratio(alpha_min, alpha_max)));
                    true
                }
                (true, false, true) => tie(&mut isl, 0.0),
                _ => return None,
            },
            ArcKind::ControlValve {
                delta_p_min,
                delta_p_max,
            } => match (
                bit(names::status(id))?,
                bit(names::active(id))?,
                bit(names::bypass(id))?,
            ) {
                (false, _, _) => true,
                (true, true, false) => {
                    let (d0, d1) = (ctx.pressure(delta_p_min), ctx.pressure(delta_p_max));
                    links.push((i, j, Link::Difference(d0, d1)));
                    true
                }
                (true, false, true) => tie(&mut isl, 0.0),
                _ => return None,
            },
        };
        if !ok {
            return None;
        }
    }

    let mut root = vec![0; n];
    let mut off = vec![0.0; n];
    for k in 0..n {
        let (r, o) = isl.find(k);
        root[k] = r;
        off[k] = o;
    }
    // shift interval per island, indexed by root
    let mut lo = vec![f64::NEG_INFINITY; n];
    let mut hi = vec![f64::INFINITY; n];
    for (k, node) in network.nodes().iter().enumerate() {
        let r = root[k];
        lo[r] = lo[r].max(ctx.potential(ctx.pressure(node.p_min)) - off[k]);
        hi[r] = hi[r].min(ctx.potential(ctx.pressure(node.p_max)) - off[k]);
    }
    let p_of = |k: usize, t: f64| ctx.pressure_from_potential(t + off[k]);
    let t_of = |k: usize, p: f64| ctx.potential(p) - off[k];

    let propagate = |lo: &mut Vec<f64>, hi: &mut Vec<f64>| -> bool {
        for _ in 0..MAX_SWEEPS {
            let mut changed = false;
            for &(i, j, link) in &links {
                let (ri, rj) = (root[i], root[j]);
                if lo[ri] > hi[ri] || lo[rj] > hi[rj] {
                    return false;
                }
                let (Some(pil), Some(pih)) = (p_of(i, lo[ri]), p_of(i, hi[ri])) else {
                    return false;
                };
                let (Some(pjl), Some(pjh)) = (p_of(j, lo[rj]), p_of(j, hi[rj])) else {
                    return false;
                };
                let (a, b) = link.forward(pil, pih);
                let (nl, nh) = (t_of(j, a.max(pjl).max(0.0)), t_of(j, b.min(pjh).max(0.0)));
                if nl > lo[rj] + 1e-14 {
                    lo[rj] = nl;
                    changed = true;
                }
                if nh < hi[rj] - 1e-14 {
                    hi[rj] = nh;
                    changed = true;
                }
                let (pjl, pjh) = (
                    p_of(j, lo[rj]).unwrap_or(pjl),
                    p_of(j, hi[rj]).unwrap_or(pjh),
                );
                let (a, b) = link.backward(pjl, pjh);
                let (nl, nh) = (t_of(i, a.max(pil).max(0.0)), t_of(i, b.min(pih).max(0.0)));
                if nl > lo[ri] + 1e-14 {
                    lo[ri] = nl;
                    changed = true;
                }
                if nh < hi[ri] - 1e-14 {
                    hi[ri] = nh;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        (0..n).all(|k| lo[root[k]] <= hi[root[k]] + 1e-12)
    };

    if !propagate(&mut lo, &mut hi) {
        return None;
    }
    let mut roots: Vec<usize> = root.clone();
    roots.sort_unstable();
    roots.dedup();
    for &r in &roots {
        let t = if lo[r].is_finite() && hi[r].is_finite() {
            0.5 * (lo[r] + hi[r].max(lo[r]))
        } else {
            return None;
        };
        lo[r] = t;
        hi[r] = t;
        if !propagate(&mut lo, &mut hi) {
            return None;
        }
    }

    let mut out = values.clone();
    for (k, node) in network.nodes().iter().enumerate() {
        let pi = lo[root[k]] + off[k];
        out.insert(names::potential(&node.id), pi);
        out.insert(names::pressure(&node.id), ctx.pressure_from_potential(pi)?);
    }
    Some(out)
}
