//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ogf_core::formulation::names;
use ogf_core::ingest::Nomination;
use ogf_core::model::{OptModel, SolveStatus};
use ogf_core::network::{
    Arc, ArcKind, ArcStatus, DecisionGroup, GasConstants, InjectionPoint, Network, Node,
    OperationMode, SubMode, WithdrawalPoint,
};
use ogf_core::physics::{build_context, Eos, Nominals, NondimContext};
use ogf_core::solver::{outer_approximation, solve_lp, solve_milp, SolveOptions};
use ogf_core::verify::{recover_pressures, residuals_of};

pub const BAR: f64 = 1e5;

pub fn ctx(net: &Network) -> NondimContext {
    build_context(net, Nominals::default(), Eos::Cnga).unwrap()
}

fn node(id: &str) -> Node {
    Node::new(id, 40.0 * BAR, 70.0 * BAR)
}

fn src(id: &str, node: &str, s_max: f64, cost: f64) -> InjectionPoint {
    InjectionPoint {
        id: id.into(),
        node: node.into(),
        s_max,
        cost,
    }
}

fn snk(id: &str, node: &str, d: f64) -> WithdrawalPoint {
    WithdrawalPoint {
        id: id.into(),
        node: node.into(),
        d,
    }
}

fn pipe(id: &str, from: &str, to: &str, km: f64, d: f64) -> Arc {
    Arc::pipe(id, from, to, km * 1000.0, d, 0.01, (-200.0, 200.0))
}

fn compressor(id: &str, from: &str, to: &str) -> Arc {
    Arc::new(
        id,
        from,
        to,
        (-50.0, 200.0),
        ArcKind::Compressor {
            alpha_min: 1.0,
            alpha_max: 1.4,
        },
    )
}

fn valve(id: &str, from: &str, to: &str) -> Arc {
    Arc::new(
        id,
        from,
        to,
        (-200.0, 200.0),
        ArcKind::Valve {
            delta_p_max: Some(30.0 * BAR),
        },
    )
}

fn control_valve(id: &str, from: &str, to: &str) -> Arc {
    Arc::new(
        id,
        from,
        to,
        (-50.0, 200.0),
        ArcKind::ControlValve {
            delta_p_min: 0.0,
            delta_p_max: 15.0 * BAR,
        },
    )
}

fn loss_resistor(id: &str, from: &str, to: &str) -> Arc {
    Arc::new(
        id,
        from,
        to,
        (-100.0, 200.0),
        ArcKind::LossResistor { delta_p: 0.5 * BAR },
    )
}

pub struct Fixture {
    pub name: &'static str,
    pub net: Network,
}

/// Five small networks; together they contain every active element and a
/// decision group. Each has at most one degree of freedom in its flows for
/// any fixed discrete state, so a one-dimensional flow grid covers it.
pub fn fixtures() -> Vec<Fixture> {
    let f1 = Network::new(
        "two-node",
        GasConstants::default(),
        vec![node("a"), node("b")],
        vec![pipe("ab", "a", "b", 40.0, 0.6)],
        vec![src("s", "a", 150.0, 2.0)],
        vec![snk("d", "b", 60.0)],
        vec![],
    );
    let f2 = Network::new(
        "compressor-line",
        GasConstants::default(),
        vec![node("a"), node("b"), node("c"), node("d")],
        vec![
            pipe("ab", "a", "b", 60.0, 0.5),
            compressor("cs", "b", "c"),
            pipe("cd", "c", "d", 60.0, 0.5),
        ],
        vec![src("s", "a", 200.0, 1.0)],
        vec![snk("d", "d", 80.0)],
        vec![],
    );
    let f3 = Network::new(
        "valve-two-sources",
        GasConstants::default(),
        vec![node("a"), node("b"), node("c"), node("d"), node("e")],
        vec![
            pipe("ab", "a", "b", 20.0, 0.6),
            valve("bc", "b", "c"),
            pipe("ec", "e", "c", 50.0, 0.5),
            pipe("cd", "c", "d", 20.0, 0.6),
        ],
        vec![src("cheap", "a", 60.0, 1.0), src("dear", "e", 200.0, 3.0)],
        vec![snk("d", "d", 100.0)],
        vec![],
    );
    let f4 = Network::new(
        "control-valve-loop",
        GasConstants::default(),
        vec![node("a"), node("b"), node("c"), node("d"), node("e")],
        vec![
            pipe("ab", "a", "b", 10.0, 0.6),
            control_valve("bc", "b", "c"),
            pipe("ac", "a", "c", 80.0, 0.4),
            loss_resistor("cd", "c", "d"),
            pipe("de", "d", "e", 30.0, 0.6),
        ],
        vec![src("s", "a", 200.0, 1.5)],
        vec![snk("d", "e", 90.0)],
        vec![],
    );
    let group = DecisionGroup {
        id: "station".into(),
        arcs: vec!["cs".into(), "v".into()],
        modes: vec![
            OperationMode {
                id: Some("boost".into()),
                status: [
                    ("cs".to_string(), ArcStatus::Open),
                    ("v".to_string(), ArcStatus::Open),
                ]
                .into(),
                sub_mode: [("cs".to_string(), SubMode::Active)].into(),
                ..Default::default()
            },
            OperationMode {
                id: Some("pass".into()),
                status: [
                    ("cs".to_string(), ArcStatus::Open),
                    ("v".to_string(), ArcStatus::Closed),
                ]
                .into(),
                sub_mode: [("cs".to_string(), SubMode::Bypass)].into(),
                ..Default::default()
            },
            OperationMode {
                id: Some("off".into()),
                status: [
                    ("cs".to_string(), ArcStatus::Closed),
                    ("v".to_string(), ArcStatus::Open),
                ]
                .into(),
                ..Default::default()
            },
        ],
    };
    let f5 = Network::new(
        "ten-node-station",
        GasConstants::default(),
        (0..10).map(|k| node(&format!("n{k}"))).collect(),
        vec![
            pipe("p01", "n0", "n1", 40.0, 0.6),
            compressor("cs", "n1", "n2"),
            pipe("p23", "n2", "n3", 30.0, 0.6),
            valve("v", "n3", "n4"),
            control_valve("cv", "n3", "n5"),
            pipe("p46", "n4", "n6", 20.0, 0.5),
            pipe("p56", "n5", "n6", 20.0, 0.4),
            loss_resistor("lr", "n6", "n7"),
            pipe("p78", "n7", "n8", 15.0, 0.5),
            pipe("p79", "n7", "n9", 15.0, 0.5),
        ],
        vec![src("s", "n0", 250.0, 1.0)],
        vec![snk("d8", "n8", 50.0), snk("d9", "n9", 40.0)],
        vec![group],
    );
    vec![
        Fixture {
            name: "two-node",
            net: f1,
        },
        Fixture {
            name: "compressor-line",
            net: f2,
        },
        Fixture {
            name: "valve-two-sources",
            net: f3,
        },
        Fixture {
            name: "control-valve-loop",
            net: f4,
        },
        Fixture {
            name: "ten-node-station",
            net: f5,
        },
    ]
}

/// Minimum objective over every binary assignment, each completed by an LP.
pub fn enumerate_binaries(model: &OptModel) -> Option<f64> {
    let bins: Vec<String> = model
        .binaries()
        .into_iter()
        .map(|v| model.variable(v).name.clone())
        .collect();
    assert!(bins.len() <= 16, "enumeration too large: {}", bins.len());
    let opts = SolveOptions::default();
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << bins.len()) {
        let assignment: BTreeMap<String, u8> = bins
            .iter()
            .enumerate()
            .map(|(k, n)| (n.clone(), ((mask >> k) & 1) as u8))
            .collect();
        let fixed = model.fix_binaries(&assignment).unwrap();
        let sol = solve_lp(&fixed, &opts).unwrap();
        if sol.status == SolveStatus::Optimal {
            let z = sol.objective.unwrap();
            best = Some(best.map_or(z, |b: f64| b.min(z)));
        }
    }
    best
}

/// Discrete state of an active arc in the grid generator.
#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Off,
    On,
    Active,
    Bypass,
}

fn states(kind: &ArcKind) -> &'static [State] {
    match kind {
        ArcKind::Valve { .. } => &[State::On, State::Off],
        ArcKind::Compressor { .. } | ArcKind::ControlValve { .. } => {
            &[State::Active, State::Bypass, State::Off]
        }
        _ => &[State::On],
    }
}

struct Dsu(Vec<usize>);

impl Dsu {
    fn find(&mut self, i: usize) -> usize {
        if self.0[i] != i {
            let r = self.find(self.0[i]);
            self.0[i] = r;
        }
        self.0[i]
    }
}

/// Arc flows from chord flows and injections by peeling tree leaves.
fn tree_flows(
    net: &Network,
    tree: &[usize],
    fixed: &BTreeMap<usize, f64>,
    supply: &[f64],
) -> Option<Vec<f64>> {
    let n = net.nodes().len();
    let mut flow = vec![0.0; net.arcs().len()];
    let mut excess = supply.to_vec();
    for (&a, &f) in fixed {
        let arc = &net.arcs()[a];
        let (i, j) = (net.node_idx(&arc.from)?, net.node_idx(&arc.to)?);
        flow[a] = f;
        excess[i] -= f;
        excess[j] += f;
    }
    let mut left: Vec<usize> = tree.to_vec();
    let mut degree = vec![0usize; n];
    let ends = |a: usize| {
        let arc = &net.arcs()[a];
        (
            net.node_idx(&arc.from).unwrap(),
            net.node_idx(&arc.to).unwrap(),
        )
    };
    for &a in &left {
        let (i, j) = ends(a);
        degree[i] += 1;
        degree[j] += 1;
    }
    while !left.is_empty() {
        let pos = left.iter().position(|&a| {
            let (i, j) = ends(a);
            degree[i] == 1 || degree[j] == 1
        })?;
        let a = left.swap_remove(pos);
        let (i, j) = ends(a);
        // the leaf sends its excess through `a`
        let f = if degree[j] == 1 {
            -excess[j]
        } else {
            excess[i]
        };
        flow[a] = f;
        excess[i] -= f;
        excess[j] += f;
        degree[i] -= 1;
        degree[j] -= 1;
    }
    excess.iter().all(|e| e.abs() < 1e-9).then_some(flow)
}

/// A MINLP-feasible point with its objective in scaled units.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub values: BTreeMap<String, f64>,
    pub objective: f64,
}

/// Enumerates discrete states and a flow grid of `step` (scaled units)
/// over the single free flow direction, keeps the points whose recovered
/// pressures satisfy the exact physics to `tol`.
pub fn minlp_grid_points(
    net: &Network,
    ctx: &NondimContext,
    step: f64,
    tol: f64,
) -> Vec<GridPoint> {
    let arcs = net.arcs();
    let choices: Vec<&[State]> = arcs.iter().map(|a| states(&a.kind)).collect();
    let demand: Vec<f64> = {
        let mut d = vec![0.0; net.nodes().len()];
        for w in net.withdrawals() {
            d[net.node_idx(&w.node).unwrap()] += ctx.flow(w.d);
        }
        d
    };
    let total: f64 = demand.iter().sum();
    let injections = net.injections();
    assert!(injections.len() <= 2);
    let mut out = Vec::new();
    let mut idx = vec![0usize; arcs.len()];
    loop {
        let state: Vec<State> = idx.iter().zip(&choices).map(|(&k, c)| c[k]).collect();
        let conducting: Vec<usize> = (0..arcs.len())
            .filter(|&a| state[a] != State::Off)
            .collect();
        let mut dsu = Dsu((0..net.nodes().len()).collect());
        let (mut tree, mut chords) = (Vec::new(), Vec::new());
        for &a in &conducting {
            let i = net.node_idx(&arcs[a].from).unwrap();
            let j = net.node_idx(&arcs[a].to).unwrap();
            let (ri, rj) = (dsu.find(i), dsu.find(j));
            if ri == rj {
                chords.push(a);
            } else {
                dsu.0[ri] = rj;
                tree.push(a);
            }
        }
        let free = chords.len() + injections.len() - 1;
        if free <= 1 {
            let axis: Vec<f64> = if let Some(&c) = chords.first() {
                grid(ctx.flow(arcs[c].f_min), ctx.flow(arcs[c].f_max), step)
            } else if injections.len() == 2 {
                grid(0.0, ctx.flow(injections[0].s_max).min(total), step)
            } else {
                vec![0.0]
            };
            for t in axis {
                let mut fixed = BTreeMap::new();
                let mut s = vec![total];
                if let Some(&c) = chords.first() {
                    fixed.insert(c, t);
                } else if injections.len() == 2 {
                    s = vec![t, total - t];
                }
                let mut supply: Vec<f64> = demand.iter().map(|d| -d).collect();
                for (inj, &sv) in injections.iter().zip(&s) {
                    supply[net.node_idx(&inj.node).unwrap()] += sv;
                }
                for a in arcs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| state[*k] == State::Off)
                {
                    fixed.insert(a.0, 0.0);
                }
                let Some(flow) = tree_flows(net, &tree, &fixed, &supply) else {
                    continue;
                };
                let mut values = BTreeMap::new();
                for (k, arc) in arcs.iter().enumerate() {
                    values.insert(names::flow(&arc.id), flow[k]);
                    let bits = match state[k] {
                        State::Off => (0.0, 0.0, 0.0),
                        State::On => (1.0, 0.0, 0.0),
                        State::Active => (1.0, 1.0, 0.0),
                        State::Bypass => (1.0, 0.0, 1.0),
                    };
                    match arc.kind {
                        ArcKind::Valve { .. } => {
                            values.insert(names::status(&arc.id), bits.0);
                        }
                        ArcKind::Compressor { .. } | ArcKind::ControlValve { .. } => {
                            values.insert(names::status(&arc.id), bits.0);
                            values.insert(names::active(&arc.id), bits.1);
                            values.insert(names::bypass(&arc.id), bits.2);
                        }
                        _ => {}
                    }
                }
                let mut objective = 0.0;
                for (inj, &sv) in injections.iter().zip(&s) {
                    values.insert(names::injection(&inj.id), sv);
                    objective += inj.cost * sv;
                }
                let Some(values) = recover_pressures(net, ctx, &values) else {
                    continue;
                };
                let report = residuals_of(net, ctx, &values, tol).unwrap();
                if report.feasible {
                    out.push(GridPoint { values, objective });
                }
            }
        }
        // odometer over discrete states
        let mut k = 0;
        loop {
            if k == idx.len() {
                return out;
            }
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    (0..=n).map(|k| lo + step * k as f64).collect()
}

/// Fixes the physical variables of `point` (and for cone models the
/// natural lifting `fhat = f^2`, `gamma = f|f|`) and asks a MILP for the
/// remaining variables. Returns the completed vector.
pub fn complete(model: &OptModel, point: &BTreeMap<String, f64>) -> Option<Vec<f64>> {
    let mut m = model.clone();
    let mut fix = |name: &str, v: f64| {
        if let Ok(id) = m.var(name) {
            m.set_bounds(id, v, v).unwrap();
        }
    };
    for (name, &v) in point {
        let physical = ["p[", "pi[", "f[", "s["]
            .iter()
            .any(|p| name.starts_with(p));
        if physical {
            fix(name, v);
        }
        if let Some(id) = name.strip_prefix("f[").and_then(|r| r.strip_suffix(']')) {
            fix(&names::squared(id), v * v);
            fix(&names::signed(id), v * v.abs());
        }
    }
    let m = if m.cones().is_empty() {
        m
    } else {
        outer_approximation(&m, 16).unwrap()
    };
    let sol = solve_milp(&m, &SolveOptions::default()).unwrap();
    if sol.status != SolveStatus::Optimal {
        return None;
    }
    Some(m.variables().iter().map(|v| sol.values[&v.name]).collect())
}

pub fn nomination(net: &Network) -> Nomination {
    Nomination::from_network(net)
}
