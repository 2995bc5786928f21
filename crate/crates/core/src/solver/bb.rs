//! Best-bound branch and bound over binary variables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};
use std::sync::Arc;
use std::time::Instant;

use log::debug;

use super::lp::{LpStatus, Tableau};
use super::{
    check_solvable, iteration_cap, lp_data, values_by_name, NodeSelection, Snapshot, SolveOptions,
    SolverError,
};
use crate::model::{OptModel, Solution, SolveStatus};

/// Picks the branching variable among fractional binaries.
pub trait BranchingRule: Send + Sync {
    fn name(&self) -> &'static str;
    /// `candidates` holds (column, value) sorted by column.
    fn select(&self, candidates: &[(usize, f64)]) -> Option<usize>;
}

/// Value closest to one half; lowest column on ties.
pub struct MostFractional;

impl BranchingRule for MostFractional {
    fn name(&self) -> &'static str {
        "most-fractional"
    }
    fn select(&self, candidates: &[(usize, f64)]) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for &(j, v) in candidates {
            let frac = (v - v.floor()).min(v.ceil() - v);
            if best.is_none_or(|(_, f)| frac > f) {
                best = Some((j, frac));
            }
        }
        best.map(|b| b.0)
    }
}

/// Lowest fractional column.
pub struct FirstFractional;

impl BranchingRule for FirstFractional {
    fn name(&self) -> &'static str {
        "first-fractional"
    }
    fn select(&self, candidates: &[(usize, f64)]) -> Option<usize> {
        candidates.first().map(|c| c.0)
    }
}

pub struct BranchingRegistry {
    rules: BTreeMap<&'static str, Arc<dyn BranchingRule>>,
}

impl BranchingRegistry {
    pub fn register(&mut self, rule: Arc<dyn BranchingRule>) {
        self.rules.insert(rule.name(), rule);
    }
    pub fn get(&self, name: &str) -> Result<Arc<dyn BranchingRule>, SolverError> {
        self.rules
            .get(name)
            .cloned()
            .ok_or_else(|| SolverError::UnknownBranching(name.to_string()))
    }
    pub fn names(&self) -> Vec<&'static str> {
        self.rules.keys().copied().collect()
    }
}

impl Default for BranchingRegistry {
    fn default() -> Self {
        let mut r = Self {
            rules: BTreeMap::new(),
        };
        r.register(Arc::new(MostFractional));
        r.register(Arc::new(FirstFractional));
        r
    }
}

struct Node {
    bound: f64,
    depth: usize,
    seq: u64,
    fixings: Vec<(usize, f64)>,
    warm: Option<Snapshot>,
    selection: NodeSelection,
}

impl Node {
    fn key(&self, other: &Self) -> Ordering {
        // greater = popped first
        let by_bound = other.bound.total_cmp(&self.bound);
        let by_depth = self.depth.cmp(&other.depth);
        let primary = match self.selection {
            NodeSelection::BestBound => by_bound.then(by_depth),
            NodeSelection::DepthFirst => by_depth.then(by_bound),
        };
        primary.then(other.seq.cmp(&self.seq))
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.key(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key(other)
    }
}

pub fn solve_milp(model: &OptModel, opts: &SolveOptions) -> Result<Solution, SolverError> {
    solve_milp_traced(model, opts).map(|(s, _)| s)
}

/// Also returns the global lower bound after every processed node.
pub fn solve_milp_traced(
    model: &OptModel,
    opts: &SolveOptions,
) -> Result<(Solution, Vec<f64>), SolverError> {
    check_solvable(model)?;
    opts.validate()?;
    let rule = BranchingRegistry::default().get(&opts.branching)?;
    let start = Instant::now();
    let deadline = opts.deadline(start);
    let lp = lp_data(model);
    let cap = iteration_cap(&lp);
    let ints: Vec<usize> = model.binaries().into_iter().map(|v| v.0).collect();
    let constant = model.objective_constant();
    let snapshot_bytes = Tableau::estimated_bytes(&lp).max(1);
    let max_snapshots = opts.warm_start_bytes / snapshot_bytes;
    let mut live_snapshots = 0usize;

    let gap_tol = |inc: f64| opts.abs_gap.max(opts.rel_gap * inc.abs());
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq,
        fixings: Vec::new(),
        warm: None,
        selection: opts.node_selection,
    });
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut trace: Vec<f64> = Vec::new();
    let mut nodes = 0u64;
    let mut status: Option<SolveStatus> = None;
    let mut message = None;

    while let Some(node) = heap.pop() {
        if node.warm.is_some() {
            live_snapshots -= 1;
        }
        if let Some((z, _)) = &incumbent {
            if node.bound >= z - gap_tol(*z) {
                continue;
            }
        }
        if deadline.is_some_and(|d| Instant::now() >= d) {
            heap.push(node);
            status = Some(SolveStatus::TimeLimit);
            break;
        }
        nodes += 1;
        let mut tab = match &node.warm {
            Some(snap) => {
                let mut t = Tableau::clone(snap);
                for &(j, v) in &node.fixings {
                    t.set_bounds(j, v, v);
                }
                t
            }
            None => {
                let mut data = lp.clone();
                for &(j, v) in &node.fixings {
                    data.col_lower[j] = v;
                    data.col_upper[j] = v;
                }
                Tableau::new(&data, opts.tolerances())
            }
        };
        tab.iterations = 0;
        let mut lp_status = if node.warm.is_some() {
            tab.dual(deadline, cap)
        } else {
            tab.primal(deadline, cap)
        };
        if lp_status == LpStatus::IterationLimit && node.warm.is_some() {
            let mut data = lp.clone();
            for &(j, v) in &node.fixings {
                data.col_lower[j] = v;
                data.col_upper[j] = v;
            }
            tab = Tableau::new(&data, opts.tolerances());
            lp_status = tab.primal(deadline, cap);
        }
        match lp_status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                push_bound(&mut trace, &heap, &incumbent);
                continue;
            }
            LpStatus::Unbounded => {
                if node.depth == 0 {
                    status = Some(SolveStatus::Unbounded);
                    break;
                }
                continue;
            }
            LpStatus::TimeLimit => {
                heap.push(node);
                status = Some(SolveStatus::TimeLimit);
                break;
            }
            LpStatus::IterationLimit => {
                status = Some(SolveStatus::Error);
                message = Some(format!("LP iteration limit at node {nodes}"));
                break;
            }
        }
        let z = tab.objective() + constant;
        debug!("node {nodes} depth {} bound {z}", node.depth);
        if let Some((inc, _)) = &incumbent {
            if z >= inc - gap_tol(*inc) {
                push_bound(&mut trace, &heap, &incumbent);
                continue;
            }
        }
        let x = tab.structural();
        let candidates: Vec<(usize, f64)> = ints
            .iter()
            .map(|&j| (j, x[j]))
            .filter(|&(_, v)| (v - v.round()).abs() > opts.integrality_tol)
            .collect();
        match rule.select(&candidates) {
            None => {
                let mut xs = x.to_vec();
                for &j in &ints {
                    xs[j] = xs[j].round();
                }
                incumbent = Some((z, xs));
            }
            Some(j) => {
                let snap: Option<Snapshot> =
                    (live_snapshots + 2 <= max_snapshots).then(|| Arc::new(tab));
                for v in [0.0, 1.0] {
                    let mut fixings = node.fixings.clone();
                    fixings.push((j, v));
                    seq += 1;
                    if snap.is_some() {
                        live_snapshots += 1;
                    }
                    heap.push(Node {
                        bound: z,
                        depth: node.depth + 1,
                        seq,
                        fixings,
                        warm: snap.clone(),
                        selection: opts.node_selection,
                    });
                }
            }
        }
        push_bound(&mut trace, &heap, &incumbent);
        if let Some((inc, _)) = &incumbent {
            if heap.iter().all(|n| n.bound >= inc - gap_tol(*inc)) {
                heap.clear();
            }
        }
    }

    let bound = global_bound(&heap, &incumbent);
    let status = status.unwrap_or(if incumbent.is_some() {
        SolveStatus::Optimal
    } else {
        SolveStatus::Infeasible
    });
    let mut sol = Solution::empty(status);
    if let Some((z, x)) = &incumbent {
        sol.objective = Some(*z);
        sol.values = values_by_name(model, x);
    }
    sol.bound = match status {
        SolveStatus::Optimal => incumbent.as_ref().map(|i| i.0),
        SolveStatus::TimeLimit => bound.is_finite().then_some(bound),
        _ => None,
    };
    if let (Some(b), Some(&last)) = (sol.bound, trace.last()) {
        sol.bound = Some(b.max(last).min(sol.objective.unwrap_or(f64::INFINITY)));
    }
    sol.nodes = nodes;
    sol.seconds = start.elapsed().as_secs_f64();
    sol.message = message;
    sol.meta.insert("seed".into(), opts.seed.to_string());
    Ok((sol, trace))
}

fn global_bound(heap: &BinaryHeap<Node>, incumbent: &Option<(f64, Vec<f64>)>) -> f64 {
    let open = heap.iter().map(|n| n.bound).fold(f64::INFINITY, f64::min);
    incumbent.as_ref().map_or(open, |i| open.min(i.0))
}

fn push_bound(trace: &mut Vec<f64>, heap: &BinaryHeap<Node>, incumbent: &Option<(f64, Vec<f64>)>) {
    let b = global_bound(heap, incumbent);
    let prev = trace.last().copied().unwrap_or(f64::NEG_INFINITY);
    trace.push(if b.is_finite() { b.max(prev) } else { prev });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Sense, VarKind};

    /// max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
    fn knapsack() -> OptModel {
        let mut m = OptModel::new("k");
        let v: Vec<_> = ["a", "b", "c"]
            .iter()
            .map(|n| m.add_binary(*n, "").unwrap())
            .collect();
        let rows = [
            ([2.0, 3.0, 1.0], 5.0),
            ([4.0, 1.0, 2.0], 11.0),
            ([3.0, 4.0, 2.0], 8.0),
        ];
        for (i, (a, b)) in rows.iter().enumerate() {
            let terms: Vec<_> = v.iter().zip(a).map(|(&x, &c)| (x, c)).collect();
            m.add_row(format!("r{i}"), &terms, Sense::Le, *b, "")
                .unwrap();
        }
        for (x, c) in v.iter().zip([-5.0, -4.0, -3.0]) {
            m.add_objective_term(*x, c).unwrap();
        }
        m.freeze()
    }

    #[test]
    fn knapsack_optimum() {
        let (s, trace) = solve_milp_traced(&knapsack(), &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Optimal);
        // a + b uses rows to 5, 5, 7; all three violate row 0
        assert_eq!(s.objective, Some(-9.0));
        assert!(trace.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn fixed_binaries_match_lp() {
        let m = knapsack()
            .fix_binaries(&BTreeMap::from([
                ("a".to_string(), 1),
                ("b".to_string(), 0),
                ("c".to_string(), 1),
            ]))
            .unwrap();
        let milp = solve_milp(&m, &SolveOptions::default()).unwrap();
        let lp = super::super::solve_lp(&m, &SolveOptions::default()).unwrap();
        assert_eq!(milp.objective, lp.objective);
        assert_eq!(milp.nodes, 1);
    }

    #[test]
    fn infeasible_milp() {
        let mut m = OptModel::new("i");
        let a = m.add_binary("a", "").unwrap();
        let b = m.add_binary("b", "").unwrap();
        m.add_row("r", &[(a, 1.0), (b, 1.0)], Sense::Eq, 1.5, "")
            .unwrap();
        let s = solve_milp(&m.freeze(), &SolveOptions::default()).unwrap();
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn deterministic() {
        let o = SolveOptions::default();
        let a = solve_milp(&knapsack(), &o).unwrap();
        let b = solve_milp(&knapsack(), &o).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.nodes, b.nodes);
    }

    #[test]
    fn cold_nodes_agree_with_warm() {
        let o = SolveOptions {
            warm_start_bytes: 0,
            ..SolveOptions::default()
        };
        let s = solve_milp(&knapsack(), &o).unwrap();
        assert_eq!(s.objective, Some(-9.0));
        assert!(knapsack()
            .variables()
            .iter()
            .all(|v| v.kind == VarKind::Binary));
    }

    #[test]
    fn branching_rules() {
        let c = [(1, 0.9), (4, 0.5), (7, 0.5)];
        assert_eq!(MostFractional.select(&c), Some(4));
        assert_eq!(FirstFractional.select(&c), Some(1));
        assert!(BranchingRegistry::default().get("x").is_err());
    }
}
