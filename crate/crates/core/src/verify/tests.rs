use std::collections::BTreeMap;

use super::*;
use crate::formulation::{build, FormulationOptions};
use crate::ingest::Nomination;
use crate::model::SolveStatus;
use crate::network::{Arc as NetArc, GasConstants, InjectionPoint, Node, WithdrawalPoint};
use crate::physics::{build_context, Eos, Nominals};
use crate::solver::{solve_milp, SolveOptions};

fn ctx_for(net: &Network) -> NondimContext {
    build_context(net, Nominals::default(), Eos::Cnga).unwrap()
}

fn net(nodes: Vec<Node>, arcs: Vec<NetArc>, src: &str, snk: &str, d: f64) -> Network {
    Network::new(
        "t",
        GasConstants::default(),
        nodes,
        arcs,
        vec![InjectionPoint {
            id: "src".into(),
            node: src.into(),
            s_max: 500.0,
            cost: 1.0,
        }],
        vec![WithdrawalPoint {
            id: "snk".into(),
            node: snk.into(),
            d,
        }],
        vec![],
    )
}

fn two_node(d: f64) -> Network {
    net(
        vec![Node::new("a", 3e6, 7e6), Node::new("b", 3e6, 7e6)],
        vec![NetArc::pipe(
            "ab",
            "a",
            "b",
            20_000.0,
            0.6,
            0.01,
            (-300.0, 300.0),
        )],
        "a",
        "b",
        d,
    )
}

/// Exact point for a pipe chain fed at its first node.
fn exact_chain(
    net: &Network,
    ctx: &NondimContext,
    p_first: f64,
    f_si: f64,
) -> BTreeMap<String, f64> {
    let mut v = BTreeMap::new();
    let f = ctx.flow(f_si);
    let mut pi = ctx.potential(ctx.pressure(p_first));
    v.insert(names::injection("src"), f);
    v.insert(names::potential(&net.nodes()[0].id), pi);
    v.insert(
        names::pressure(&net.nodes()[0].id),
        ctx.pressure_from_potential(pi).unwrap(),
    );
    for arc in net.arcs() {
        let c = friction_coefficient(arc, ctx).unwrap();
        pi -= c * f * f.abs();
        v.insert(names::flow(&arc.id), f);
        v.insert(names::potential(&arc.to), pi);
        v.insert(
            names::pressure(&arc.to),
            ctx.pressure_from_potential(pi).unwrap(),
        );
    }
    v
}

#[test]
fn exact_two_node_point_has_zero_residuals() {
    let n = two_node(100.0);
    let ctx = ctx_for(&n);
    let v = exact_chain(&n, &ctx, 6e6, 100.0);
    let r = residuals_of(&n, &ctx, &v, DEFAULT_TOLERANCE).unwrap();
    assert!(r.feasible, "{:?}", r.violations().collect::<Vec<_>>());
    assert!(r.max_abs < 1e-12);
    assert!((r.objective - ctx.flow(100.0)).abs() < 1e-12);
}

#[test]
fn missing_variable_is_reported() {
    let n = two_node(100.0);
    let ctx = ctx_for(&n);
    let mut v = exact_chain(&n, &ctx, 6e6, 100.0);
    v.remove("f[ab]");
    assert!(matches!(
        residuals_of(&n, &ctx, &v, 1e-6),
        Err(VerifyError::MissingVariable(name)) if name == "f[ab]"
    ));
}

#[test]
fn perturbed_pressure_violates_pipe_physics() {
    let n = two_node(100.0);
    let ctx = ctx_for(&n);
    let mut v = exact_chain(&n, &ctx, 6e6, 100.0);
    let p = v["p[b]"] + 0.01;
    v.insert("p[b]".into(), p);
    v.insert("pi[b]".into(), ctx.potential(p));
    let r = residuals_of(&n, &ctx, &v, 1e-6).unwrap();
    assert!(!r.feasible);
    assert!(r.max_by_tag[tags::PIPE_PHYSICS] > 1e-3);
    assert_eq!(r.max_by_tag[tags::NODE_BALANCE], 0.0);
}

/// Two parallel paths between the same nodes force the linear relaxation
/// to choose a flow split that the exact physics need not share.
fn looped() -> Network {
    net(
        vec![
            Node::new("a", 3e6, 7e6),
            Node::new("b", 3e6, 7e6),
            Node::new("c", 3e6, 7e6),
            Node::new("d", 3e6, 7e6),
        ],
        vec![
            NetArc::pipe("ab", "a", "b", 30_000.0, 0.5, 0.012, (-300.0, 300.0)),
            NetArc::pipe("bd", "b", "d", 10_000.0, 0.5, 0.012, (-300.0, 300.0)),
            NetArc::pipe("ac", "a", "c", 5_000.0, 0.7, 0.009, (-300.0, 300.0)),
            NetArc::pipe("cd", "c", "d", 40_000.0, 0.4, 0.012, (-300.0, 300.0)),
        ],
        "a",
        "d",
        150.0,
    )
}

#[test]
fn linear_relaxation_of_a_loop_is_not_physically_exact() {
    let n = looped();
    let ctx = ctx_for(&n);
    let nom = Nomination::from_network(&n);
    let m = build(&n, &nom, &ctx, &FormulationOptions::default()).unwrap();
    let sol = solve_milp(&m, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, SolveStatus::Optimal);
    let r = residuals(&n, &ctx, &sol, 1e-6).unwrap();
    // the relaxation balances flow exactly
    assert!(r.max_by_tag[tags::NODE_BALANCE] < 1e-7);
    assert!(r.max_by_tag[tags::PIPE_PHYSICS] > 1e-6);
}

fn compressor_net(d: f64) -> Network {
    net(
        vec![Node::new("a", 3e6, 6e6), Node::new("b", 3e6, 7e6)],
        vec![NetArc::new(
            "cs",
            "a",
            "b",
            (-100.0, 200.0),
            ArcKind::Compressor {
                alpha_min: 1.0,
                alpha_max: 1.5,
            },
        )],
        "a",
        "b",
        d,
    )
}

fn compressor_point(ctx: &NondimContext, f: f64, bits: (f64, f64, f64)) -> BTreeMap<String, f64> {
    let (pa, pb) = (ctx.pressure(5e6), ctx.pressure(6e6));
    BTreeMap::from([
        ("p[a]".to_string(), pa),
        ("p[b]".to_string(), pb),
        ("pi[a]".to_string(), ctx.potential(pa)),
        ("pi[b]".to_string(), ctx.potential(pb)),
        ("f[cs]".to_string(), ctx.flow(f)),
        ("s[src]".to_string(), ctx.flow(50.0)),
        ("x[cs]".to_string(), bits.0),
        ("xac[cs]".to_string(), bits.1),
        ("xbp[cs]".to_string(), bits.2),
    ])
}

#[test]
fn active_compressor_point_is_feasible() {
    let n = compressor_net(50.0);
    let ctx = ctx_for(&n);
    let r = residuals_of(
        &n,
        &ctx,
        &compressor_point(&ctx, 50.0, (1.0, 1.0, 0.0)),
        1e-9,
    )
    .unwrap();
    assert!(r.feasible, "{:?}", r.violations().collect::<Vec<_>>());
}

#[test]
fn active_compressor_with_reverse_flow_is_flagged() {
    let n = compressor_net(0.0);
    let ctx = ctx_for(&n);
    let mut v = compressor_point(&ctx, -20.0, (1.0, 1.0, 0.0));
    v.insert("s[src]".into(), 0.0);
    let r = residuals_of(&n, &ctx, &v, 1e-9).unwrap();
    assert!(!r.feasible);
    let bad: Vec<_> = r.violations().map(|x| x.name.as_str()).collect();
    assert!(bad.contains(&"cs:flow"), "{bad:?}");
}

#[test]
fn closed_compressor_with_flow_is_flagged() {
    let n = compressor_net(50.0);
    let ctx = ctx_for(&n);
    let r = residuals_of(
        &n,
        &ctx,
        &compressor_point(&ctx, 50.0, (0.0, 0.0, 0.0)),
        1e-9,
    )
    .unwrap();
    assert!(r.max_by_tag[TAG_COMPRESSOR_MODE] > 1e-3);
}

#[test]
fn relative_gap_values() {
    assert_eq!(relative_gap(100.0, 100.0).unwrap(), 0.0);
    assert!((relative_gap(100.0, 100.97).unwrap() - 0.97).abs() < 1e-12);
    assert_eq!(relative_gap(0.0, 0.0).unwrap(), 0.0);
    assert!(matches!(
        relative_gap(0.0, 1.0),
        Err(VerifyError::UndefinedGap(_))
    ));
    assert!((relative_gap(-50.0, -49.0).unwrap() - 2.0).abs() < 1e-12);
}

fn resistor_net() -> Network {
    net(
        vec![Node::new("a", 3e6, 7e6), Node::new("b", 3e6, 7e6)],
        vec![NetArc::new(
            "r",
            "a",
            "b",
            (-100.0, 100.0),
            ArcKind::Resistor {
                drag: 5.0,
                area: 0.2,
            },
        )],
        "a",
        "b",
        0.0,
    )
}

#[test]
fn sweep_has_full_grid_for_each_eos() {
    let n = resistor_net();
    let ctx = ctx_for(&n);
    let pts = resistor_error_sweep(&n, "r", &ctx, SweepGrid::default()).unwrap();
    assert_eq!(pts.iter().filter(|p| p.eos == "cnga").count(), 500);
    assert_eq!(pts.iter().filter(|p| p.eos == "ideal").count(), 500);
    for p in pts.iter().filter(|p| p.flow == 0.0) {
        assert_eq!(p.rel_error, Some(0.0));
    }
    assert!(pts.iter().any(|p| p.flow == 0.0));
}

#[test]
fn sweep_error_grows_with_flow_magnitude() {
    let n = resistor_net();
    let ctx = ctx_for(&n);
    let pts = resistor_error_sweep(
        &n,
        "r",
        &ctx,
        SweepGrid {
            pressures: 4,
            flows: 11,
        },
    )
    .unwrap();
    for slice in pts.chunks(11) {
        let pos: Vec<f64> = slice
            .iter()
            .filter(|p| p.flow >= 0.0)
            .filter_map(|p| p.rel_error)
            .collect();
        assert!(pos.windows(2).all(|w| w[1] >= w[0] - 1e-15), "{pos:?}");
    }
}

#[test]
fn sweep_rejects_non_resistor_and_small_grid() {
    let n = two_node(10.0);
    let ctx = ctx_for(&n);
    assert!(matches!(
        resistor_error_sweep(&n, "ab", &ctx, SweepGrid::default()),
        Err(VerifyError::NotAResistor(_))
    ));
    assert!(matches!(
        resistor_error_sweep(&n, "zz", &ctx, SweepGrid::default()),
        Err(VerifyError::UnknownArc(_))
    ));
    let r = resistor_net();
    assert!(matches!(
        resistor_error_sweep(
            &r,
            "r",
            &ctx,
            SweepGrid {
                pressures: 1,
                flows: 9
            }
        ),
        Err(VerifyError::BadGrid(1))
    ));
}

#[test]
fn sweep_csv_layout() {
    let n = resistor_net();
    let ctx = ctx_for(&n);
    let pts = resistor_error_sweep(
        &n,
        "r",
        &ctx,
        SweepGrid {
            pressures: 2,
            flows: 3,
        },
    )
    .unwrap();
    let mut buf = Vec::new();
    write_sweep_csv(&pts, "r", &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# ogf-report/1 kind=resistor-sweep arc=r");
    assert!(lines[1].starts_with("eos,p_in,flow"));
    assert_eq!(lines.len(), 2 + 12);
}

#[test]
fn grid_factorisation() {
    assert_eq!(
        SweepGrid::with_total(500),
        SweepGrid {
            pressures: 20,
            flows: 25
        }
    );
    assert_eq!(
        SweepGrid::with_total(7),
        SweepGrid {
            pressures: 1,
            flows: 7
        }
    );
}

#[test]
fn recovery_on_a_tree_restores_exact_pressures() {
    let n = net(
        vec![
            Node::new("a", 3e6, 7e6),
            Node::new("b", 3e6, 7e6),
            Node::new("c", 3e6, 7e6),
        ],
        vec![
            NetArc::pipe("ab", "a", "b", 20_000.0, 0.6, 0.01, (-300.0, 300.0)),
            NetArc::pipe("bc", "b", "c", 15_000.0, 0.5, 0.01, (-300.0, 300.0)),
        ],
        "a",
        "c",
        80.0,
    );
    let ctx = ctx_for(&n);
    let mut v = exact_chain(&n, &ctx, 6e6, 80.0);
    for k in ["p[a]", "p[b]", "p[c]", "pi[a]", "pi[b]", "pi[c]"] {
        v.insert(k.into(), 0.0);
    }
    let fixed = recover_pressures(&n, &ctx, &v).unwrap();
    let r = residuals_of(&n, &ctx, &fixed, 1e-9).unwrap();
    assert!(r.feasible, "{:?}", r.violations().collect::<Vec<_>>());
}

#[test]
fn recovery_fails_when_drop_exceeds_bounds() {
    let n = net(
        vec![Node::new("a", 4e6, 4.1e6), Node::new("b", 3.9e6, 4e6)],
        vec![NetArc::pipe(
            "ab",
            "a",
            "b",
            200_000.0,
            0.3,
            0.02,
            (-300.0, 300.0),
        )],
        "a",
        "b",
        200.0,
    );
    let ctx = ctx_for(&n);
    let v = BTreeMap::from([
        ("f[ab]".to_string(), ctx.flow(200.0)),
        ("s[src]".to_string(), ctx.flow(200.0)),
    ]);
    assert!(recover_pressures(&n, &ctx, &v).is_none());
}

#[test]
fn aggregate_uses_sample_deviation() {
    let a = Aggregate::of(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!((a.count, a.min, a.max, a.mean), (4, 1.0, 4.0, 2.5));
    assert!((a.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(Aggregate::of(&[7.0]).unwrap().std, 0.0);
    assert!(Aggregate::of(&[]).is_none());
}

#[test]
fn batch_keeps_order_and_counts_infeasible() {
    let n = two_node(100.0);
    let ctx = ctx_for(&n);
    let base = Nomination::from_network(&n);
    let mut noms = Vec::new();
    for (k, d) in [50.0, 900.0, 120.0].into_iter().enumerate() {
        let mut nom = base.clone();
        nom.id = format!("n{k}");
        nom.demand.insert("snk".into(), d);
        noms.push(nom);
    }
    let opts = BatchOptions {
        workers: 2,
        ..Default::default()
    };
    let s = run_batch(&n, &noms, &ctx, &opts);
    let ids: Vec<_> = s.rows.iter().map(|r| r.instance.as_str()).collect();
    assert_eq!(ids, ["n0", "n1", "n2"]);
    assert_eq!(s.rows[1].status, SolveStatus::Infeasible);
    assert_eq!((s.optimal, s.infeasible), (2, 1));
    // a tree with fixed flows is exact after pressure recovery
    for r in [&s.rows[0], &s.rows[2]] {
        assert_eq!(r.gap, Some(0.0));
        assert_ne!(r.gap_source, GapSource::None);
    }
    assert!((s.rows[0].objective.unwrap() - 50.0).abs() < 1e-6);
    assert_eq!(s.time.unwrap().count, 2);

    let mut buf = Vec::new();
    write_batch_csv(&s, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("# ogf-report/1 kind=batch\n"));
    assert_eq!(text.lines().count(), 5);
    let mut buf = Vec::new();
    write_stats_csv(&s, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.contains("\nstd. dev.,"));
    assert!(text.contains("\ninfeasible,1,"));
}

#[test]
fn batch_reference_objective_drives_gap() {
    let n = two_node(100.0);
    let ctx = ctx_for(&n);
    let mut nom = Nomination::from_network(&n);
    nom.reference_objective = Some(101.0);
    let s = run_batch(&n, &[nom], &ctx, &BatchOptions::default());
    let r = &s.rows[0];
    assert_eq!(r.gap_source, GapSource::Reference);
    assert!((r.gap.unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn zero_demand_batch_has_zero_objective_and_gap() {
    let n = two_node(0.0);
    let ctx = ctx_for(&n);
    let s = run_batch(
        &n,
        &[Nomination::from_network(&n)],
        &ctx,
        &BatchOptions::default(),
    );
    assert_eq!(s.rows[0].status, SolveStatus::Optimal);
    assert!(s.rows[0].objective.unwrap().abs() < 1e-9);
    assert_eq!(s.rows[0].gap, Some(0.0));
}
