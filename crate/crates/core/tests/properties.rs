//! Invariants checked on generated inputs.

mod common;

use std::sync::Arc;

use proptest::prelude::*;

use common::*;
use ogf_core::formulation::{build, FormulationOptions};
use ogf_core::ingest::{network_from_json, network_to_json, IngestOptions};
use ogf_core::model::SolveStatus;
use ogf_core::network::GasConstants;
use ogf_core::physics::{Eos, Nominals, NondimContext};
use ogf_core::polyrelax::{
    base_relaxation, refine, BisectAll, Cube, SignedSquare, Univariate, UnivariateSpec,
};
use ogf_core::solver::lp::{LpData, LpStatus, Tableau, Tolerances};
use ogf_core::solver::{solve_lp, solve_lp_detailed, solve_milp, solve_milp_traced, SolveOptions};
use ogf_core::verify::{relative_gap, run_batch, Aggregate, BatchOptions};

fn function(k: u8) -> Arc<dyn Univariate> {
    if k == 0 {
        Arc::new(Cube)
    } else {
        Arc::new(SignedSquare)
    }
}

fn domain() -> impl Strategy<Value = (f64, f64)> {
    (-3.0..3.0f64, 0.01..4.0f64).prop_map(|(lo, w)| (lo, lo + w))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn hull_contains_graph((lo, hi) in domain(), k in 0u8..2, t in 0.0..=1.0f64) {
        let f = function(k);
        let spec = UnivariateSpec::new(f.clone(), lo, hi).unwrap();
        let relax = base_relaxation(&spec).unwrap();
        let x = lo + t * (hi - lo);
        let (bottom, top) = relax.vertical_extent(x).unwrap();
        let y = f.value(x);
        let slack = 1e-9 * (1.0 + y.abs());
        prop_assert!(bottom <= y + slack && y <= top + slack, "{bottom} {y} {top}");
    }

    #[test]
    fn refinement_is_nested((lo, hi) in domain(), k in 0u8..2, t in 0.0..=1.0f64, rounds in 1usize..4) {
        let spec = UnivariateSpec::new(function(k), lo, hi).unwrap();
        let base = base_relaxation(&spec).unwrap();
        let fine = refine(&base, &BisectAll, rounds).unwrap();
        let x = lo + t * (hi - lo);
        let (b0, t0) = base.vertical_extent(x).unwrap();
        let (b1, t1) = fine.vertical_extent(x).unwrap();
        let slack = 1e-9 * (1.0 + b0.abs().max(t0.abs()));
        prop_assert!(b1 >= b0 - slack && t1 <= t0 + slack);
        prop_assert!(fine.area() <= base.area() * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn potential_inverts(p in 0.0..3.0f64, ideal in any::<bool>()) {
        let c = NondimContext::new(&GasConstants::default(), Nominals::default(), Eos::Cnga).unwrap();
        let c = if ideal { c.ideal() } else { c };
        let back = c.pressure_from_potential(c.potential(p)).unwrap();
        prop_assert!((back - p).abs() <= 1e-10 * (1.0 + p));
        prop_assert!(c.density(p) >= 0.0);
        prop_assert!(c.potential_derivative(p) >= 0.0);
    }

    #[test]
    fn gap_identities(z in 1e-3..1e6f64, w in 1e-3..1e6f64, k in 1e-3..1e3f64) {
        prop_assert_eq!(relative_gap(z, z).unwrap(), 0.0);
        let g = relative_gap(z, w).unwrap();
        prop_assert_eq!(g >= 0.0, w >= z);
        prop_assert!((relative_gap(k * z, k * w).unwrap() - g).abs() <= 1e-9 * (1.0 + g.abs()));
    }

    #[test]
    fn aggregate_orders(values in prop::collection::vec(-1e6..1e6f64, 1..40)) {
        let a = Aggregate::of(&values).unwrap();
        prop_assert_eq!(a.count, values.len());
        prop_assert!(a.min <= a.mean + 1e-9 * a.mean.abs() && a.mean <= a.max + 1e-9 * a.mean.abs());
        prop_assert!(a.std >= 0.0);
        let flat = Aggregate::of(&vec![values[0]; values.len()]).unwrap();
        prop_assert!(flat.std <= 1e-12 * values[0].abs());
    }

    #[test]
    fn canonical_json_is_a_fixed_point(scale in 1.0..2.0f64, pick in 0usize..5) {
        let f = fixtures().swap_remove(pick);
        let mut doc: serde_json::Value = serde_json::from_str(&network_to_json(&f.net)).unwrap();
        for n in doc["nodes"].as_array_mut().unwrap() {
            n["p_max"] = (n["p_max"].as_f64().unwrap() * scale).into();
        }
        if let Some(pipes) = doc["pipes"].as_array_mut() {
            for p in pipes {
                p["length"] = (p["length"].as_f64().unwrap() * scale).into();
            }
        }
        let opts = IngestOptions::default();
        let once = network_to_json(&network_from_json(&doc.to_string(), &opts).unwrap());
        let again = network_to_json(&network_from_json(&once, &opts).unwrap());
        prop_assert_eq!(once, again);
    }
}

/// `min c x` over `x in [0, 1]^n`, `A x <= b` with `A >= 0` and `b >= 0`,
/// so `x = 0` is feasible and the optimum exists.
fn packing_lp() -> impl Strategy<Value = LpData> {
    (2usize..7, 1usize..6).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(0.0..3.0f64, n), m),
            prop::collection::vec(0.5..4.0f64, m),
            prop::collection::vec(-2.0..1.0f64, n),
        )
            .prop_map(move |(a, b, c)| LpData {
                n,
                rows: a
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .enumerate()
                            .filter(|(_, v)| *v > 0.2)
                            .collect()
                    })
                    .collect(),
                cost: c,
                col_lower: vec![0.0; n],
                col_upper: vec![1.0; n],
                row_lower: vec![f64::NEG_INFINITY; m],
                row_upper: b,
            })
    })
}

fn activity(row: &[(usize, f64)], x: &[f64]) -> f64 {
    row.iter().map(|&(j, a)| a * x[j]).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn lp_optimum_is_feasible_and_no_worse_than_samples(
        lp in packing_lp(),
        samples in prop::collection::vec(prop::collection::vec(0.0..=1.0f64, 7), 20),
    ) {
        let mut t = Tableau::new(&lp, Tolerances::default());
        prop_assert_eq!(t.primal(None, 10_000), LpStatus::Optimal);
        let x = t.structural().to_vec();
        for (row, &b) in lp.rows.iter().zip(&lp.row_upper) {
            prop_assert!(activity(row, &x) <= b + 1e-8);
        }
        prop_assert!(x.iter().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v)));
        let z = t.objective();
        for s in samples {
            let s = &s[..lp.n];
            // shrink towards 0 until every row holds
            let worst = lp
                .rows
                .iter()
                .zip(&lp.row_upper)
                .map(|(r, &b)| activity(r, s) / b)
                .fold(1.0, f64::max);
            let y: Vec<f64> = s.iter().map(|v| v / worst).collect();
            let zy: f64 = y.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
            prop_assert!(z <= zy + 1e-8);
        }
    }

    #[test]
    fn dual_after_fixing_matches_a_fresh_primal(lp in packing_lp(), j in 0usize..7, v in 0u8..2) {
        let j = j % lp.n;
        let v = f64::from(v);
        let mut warm = Tableau::new(&lp, Tolerances::default());
        prop_assert_eq!(warm.primal(None, 10_000), LpStatus::Optimal);
        warm.set_bounds(j, v, v);
        let s1 = warm.dual(None, 10_000);
        let mut fixed = lp.clone();
        fixed.col_lower[j] = v;
        fixed.col_upper[j] = v;
        let mut cold = Tableau::new(&fixed, Tolerances::default());
        let s2 = cold.primal(None, 10_000);
        prop_assert_eq!(s1, s2);
        if s1 == LpStatus::Optimal {
            prop_assert!((warm.objective() - cold.objective()).abs() <= 1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn batch_rows_do_not_depend_on_worker_count(scales in prop::collection::vec(0.2..1.4f64, 1..5)) {
        let f = fixtures().into_iter().find(|f| f.name == "valve-two-sources").unwrap();
        let base = nomination(&f.net);
        let noms: Vec<_> = scales
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let mut n = base.clone();
                n.id = format!("n{i}");
                n.demand.values_mut().for_each(|d| *d *= k);
                n
            })
            .collect();
        let c = ctx(&f.net);
        let run = |workers| {
            let opts = BatchOptions { workers, ..Default::default() };
            run_batch(&f.net, &noms, &c, &opts)
                .rows
                .into_iter()
                .map(|mut r| {
                    r.seconds = 0.0;
                    r
                })
                .collect::<Vec<_>>()
        };
        prop_assert_eq!(run(1), run(3));
    }
}

/// Rows with mixed signs and two-sided or equality bounds over a box.
fn general_lp() -> impl Strategy<Value = LpData> {
    (1usize..4, 1usize..4).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(prop::collection::vec(-2i8..=2, n), m),
            prop::collection::vec((-3i8..=3, 0i8..=3), m),
            prop::collection::vec(-2i8..=2, n),
        )
            .prop_map(move |(a, b, c)| LpData {
                n,
                rows: a
                    .into_iter()
                    .map(|r| {
                        r.into_iter()
                            .enumerate()
                            .filter(|(_, v)| *v != 0)
                            .map(|(j, v)| (j, f64::from(v)))
                            .collect()
                    })
                    .collect(),
                cost: c.into_iter().map(f64::from).collect(),
                col_lower: vec![-1.0; n],
                col_upper: vec![2.0; n],
                row_lower: b.iter().map(|&(lo, _)| f64::from(lo) / 2.0).collect(),
                row_upper: b
                    .iter()
                    .map(|&(lo, w)| f64::from(lo) / 2.0 + f64::from(w) / 2.0)
                    .collect(),
            })
    })
}

/// Solves `M x = r` by Gaussian elimination with partial pivoting.
fn solve_dense(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for k in 0..n {
        let p = (k..n).max_by(|&a, &b| mat[a][k].abs().total_cmp(&mat[b][k].abs()))?;
        if mat[p][k].abs() < 1e-9 {
            return None;
        }
        mat.swap(k, p);
        rhs.swap(k, p);
        for i in k + 1..n {
            let f = mat[i][k] / mat[k][k];
            for j in k..n {
                mat[i][j] -= f * mat[k][j];
            }
            rhs[i] -= f * rhs[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| mat[k][j] * x[j]).sum();
        x[k] = (rhs[k] - s) / mat[k][k];
    }
    Some(x)
}

/// Minimum over all basic feasible points, found by trying every choice
/// of `n` active hyperplanes. `None` when the polytope is empty.
fn vertex_oracle(lp: &LpData) -> Option<f64> {
    let n = lp.n;
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.col_lower[j]));
        planes.push((e, lp.col_upper[j]));
    }
    for (i, row) in lp.rows.iter().enumerate() {
        let mut a = vec![0.0; n];
        for &(j, v) in row {
            a[j] = v;
        }
        planes.push((a.clone(), lp.row_lower[i]));
        planes.push((a, lp.row_upper[i]));
    }
    let feasible = |x: &[f64]| {
        (0..n).all(|j| x[j] >= lp.col_lower[j] - 1e-9 && x[j] <= lp.col_upper[j] + 1e-9)
            && lp.rows.iter().enumerate().all(|(i, r)| {
                let v = activity(r, x);
                v >= lp.row_lower[i] - 1e-9 && v <= lp.row_upper[i] + 1e-9
            })
    };
    let mut best: Option<f64> = None;
    let k = planes.len();
    let mut pick: Vec<usize> = (0..n).collect();
    loop {
        let mat = pick.iter().map(|&p| planes[p].0.clone()).collect();
        let rhs = pick.iter().map(|&p| planes[p].1).collect();
        if let Some(x) = solve_dense(mat, rhs) {
            if feasible(&x) {
                let z: f64 = x.iter().zip(&lp.cost).map(|(a, c)| a * c).sum();
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
        // next combination of n out of k
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if pick[i] < k - n + i {
                pick[i] += 1;
                for t in i + 1..n {
                    pick[t] = pick[t - 1] + 1;
                }
                break;
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn lp_agrees_with_vertex_enumeration(lp in general_lp()) {
        let mut t = Tableau::new(&lp, Tolerances::default());
        let status = t.primal(None, 10_000);
        match vertex_oracle(&lp) {
            Some(z) => {
                prop_assert_eq!(status, LpStatus::Optimal);
                prop_assert!((t.objective() - z).abs() <= 1e-8, "{} vs {z}", t.objective());
            }
            None => {
                prop_assert_eq!(status, LpStatus::Infeasible);
                prop_assert!(t.farkas().is_some());
            }
        }
    }

    #[test]
    fn warm_dual_agrees_with_vertex_enumeration(lp in general_lp(), j in 0usize..3, v in -1i8..=2) {
        let mut t = Tableau::new(&lp, Tolerances::default());
        if t.primal(None, 10_000) != LpStatus::Optimal {
            return Ok(());
        }
        let j = j % lp.n;
        let v = f64::from(v);
        t.set_bounds(j, v, v);
        let status = t.dual(None, 10_000);
        let mut fixed = lp.clone();
        fixed.col_lower[j] = v;
        fixed.col_upper[j] = v;
        match vertex_oracle(&fixed) {
            Some(z) => {
                prop_assert_eq!(status, LpStatus::Optimal);
                prop_assert!((t.objective() - z).abs() <= 1e-8);
            }
            None => prop_assert_eq!(status, LpStatus::Infeasible),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lr_solutions_satisfy_every_linear_row(pick in 0usize..5, scale in 0.2..1.2f64) {
        let f = fixtures().swap_remove(pick);
        let mut nom = nomination(&f.net);
        nom.demand.values_mut().for_each(|d| *d *= scale);
        let model = build(&f.net, &nom, &ctx(&f.net), &FormulationOptions::default()).unwrap();
        let opts = SolveOptions::default();
        let sol = solve_milp(&model, &opts).unwrap();
        prop_assume!(sol.status == SolveStatus::Optimal);
        let x = model.dense_values(&sol.values).unwrap();
        prop_assert!(model.max_linear_violation(&x) <= 1e-8);
        for b in model.binaries() {
            prop_assert!(x[b.0] == 0.0 || x[b.0] == 1.0);
        }
        let root = solve_lp(&model, &opts).unwrap();
        prop_assert!(root.objective.unwrap() <= sol.objective.unwrap() + 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lr_root_lp_is_certified(pick in 0usize..5, scale in 0.2..3.0f64) {
        let f = fixtures().swap_remove(pick);
        let mut nom = nomination(&f.net);
        nom.demand.values_mut().for_each(|d| *d *= scale);
        let model = build(&f.net, &nom, &ctx(&f.net), &FormulationOptions::default()).unwrap();
        let out = solve_lp_detailed(&model, &SolveOptions::default()).unwrap();
        match out.status {
            SolveStatus::Optimal => {
                let z = out.objective.unwrap();
                let dual = out.dual_objective(&model).unwrap();
                prop_assert!((z - dual).abs() <= 1e-6 * (1.0 + z.abs()), "{z} vs {dual}");
            }
            SolveStatus::Infeasible => prop_assert!(out.certifies_infeasibility(&model)),
            other => prop_assert!(false, "status {other:?}"),
        }
    }

    #[test]
    fn branch_and_bound_is_monotone_and_deterministic(pick in 0usize..5, scale in 0.2..1.2f64) {
        let f = fixtures().swap_remove(pick);
        let mut nom = nomination(&f.net);
        nom.demand.values_mut().for_each(|d| *d *= scale);
        let model = build(&f.net, &nom, &ctx(&f.net), &FormulationOptions::default()).unwrap();
        let opts = SolveOptions::default();
        let (mut a, trace) = solve_milp_traced(&model, &opts).unwrap();
        prop_assert!(trace.windows(2).all(|w| w[0] <= w[1]));
        let (mut b, again) = solve_milp_traced(&model, &opts).unwrap();
        a.seconds = 0.0;
        b.seconds = 0.0;
        prop_assert_eq!(a, b);
        prop_assert_eq!(trace, again);
    }
}
