//! Bounded-variable revised simplex on `[A | -I] z = 0`.
//!
//! Columns `0..n` are structural variables, columns `n..n+m` are row
//! activities `r = A x` with the row bounds as their bounds. The basis
//! inverse is kept in product form, `B^-1 = E_k .. E_1 B_0^-1`, on top of
//! the logical basis `B_0 = -I`, and rebuilt from scratch every
//! `ETA_LIMIT` pivots.

use std::sync::Arc;
use std::time::Instant;

/// Sparse linear program in row-activity form.
#[derive(Debug, Clone)]
pub struct LpData {
    pub n: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
    pub cost: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub row_lower: Vec<f64>,
    pub row_upper: Vec<f64>,
}

impl LpData {
    pub fn m(&self) -> usize {
        self.rows.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub primal: f64,
    pub dual: f64,
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            primal: 1e-9,
            dual: 1e-9,
            pivot: 1e-9,
        }
    }
}

const DROP: f64 = 1e-14;
const DEGENERATE_STREAK: usize = 50;
const ETA_LIMIT: usize = 100;
/// Reinversion pivots below this fraction of the column maximum are avoided.
const THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum At {
    Basic,
    Lower,
    Upper,
    Zero,
}

/// `A` by rows and by columns; shared between clones.
#[derive(Debug)]
struct Matrix {
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

/// Eta matrices in one arena. Eta `k` replaces column `row[k]` of the
/// identity with `B^-1 a_q`, whose entries other than the pivot are
/// `idx/val[start[k]..start[k+1]]`.
#[derive(Debug, Clone, Default)]
struct Etas {
    row: Vec<usize>,
    pivot: Vec<f64>,
    start: Vec<usize>,
    idx: Vec<usize>,
    val: Vec<f64>,
}

impl Etas {
    fn clear(&mut self) {
        self.row.clear();
        self.pivot.clear();
        self.start.clear();
        self.idx.clear();
        self.val.clear();
    }

    fn len(&self) -> usize {
        self.row.len()
    }

    fn push(&mut self, r: usize, alpha: &[f64]) {
        self.start.push(self.idx.len());
        self.row.push(r);
        self.pivot.push(alpha[r]);
        for (i, &a) in alpha.iter().enumerate() {
            if i != r && a.abs() > DROP {
                self.idx.push(i);
                self.val.push(a);
            }
        }
    }

    fn range(&self, k: usize) -> std::ops::Range<usize> {
        let end = self.start.get(k + 1).copied().unwrap_or(self.idx.len());
        self.start[k]..end
    }

    /// `w <- E_k .. E_1 w`.
    fn ftran(&self, w: &mut [f64]) {
        for k in 0..self.len() {
            let r = self.row[k];
            let z = w[r] / self.pivot[k];
            w[r] = z;
            if z != 0.0 {
                for p in self.range(k) {
                    w[self.idx[p]] -= self.val[p] * z;
                }
            }
        }
    }

    /// `w^T <- w^T E_k .. E_1`.
    fn btran(&self, w: &mut [f64]) {
        for k in (0..self.len()).rev() {
            let r = self.row[k];
            let mut s = w[r];
            for p in self.range(k) {
                s -= self.val[p] * w[self.idx[p]];
            }
            w[r] = s / self.pivot[k];
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tableau {
    m: usize,
    n: usize,
    width: usize,
    a: Arc<Matrix>,
    etas: Etas,
    /// Etas produced by the last reinversion.
    factored: usize,
    /// Reduced costs (or phase-one prices) of the last pricing pass.
    d: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<At>,
    tol: Tolerances,
    pub iterations: usize,
    farkas: Option<Vec<f64>>,
}

impl Tableau {
    pub fn new(lp: &LpData, tol: Tolerances) -> Self {
        let (n, m) = (lp.n, lp.m());
        let width = n + m;
        let mut cols = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in row {
                cols[j].push((i, a));
            }
        }
        let mut lower = lp.col_lower.clone();
        lower.extend_from_slice(&lp.row_lower);
        let mut upper = lp.col_upper.clone();
        upper.extend_from_slice(&lp.row_upper);
        let mut cost = lp.cost.clone();
        cost.resize(width, 0.0);
        let mut x = vec![0.0; width];
        let mut state = vec![At::Basic; width];
        for j in 0..n {
            let (l, u) = (lower[j], upper[j]);
            (x[j], state[j]) = if l.is_finite() {
                (l, At::Lower)
            } else if u.is_finite() {
                (u, At::Upper)
            } else {
                (0.0, At::Zero)
            };
        }
        for (i, row) in lp.rows.iter().enumerate() {
            x[n + i] = row.iter().map(|&(j, a)| a * x[j]).sum();
        }
        Self {
            m,
            n,
            width,
            a: Arc::new(Matrix {
                rows: lp.rows.clone(),
                cols,
            }),
            etas: Etas::default(),
            factored: 0,
            d: cost.clone(),
            cost,
            lower,
            upper,
            x,
            basis: (n..width).collect(),
            state,
            tol,
            iterations: 0,
            farkas: None,
        }
    }

    /// Rough upper bound on the memory a clone of a tableau for `lp` holds.
    pub fn estimated_bytes(lp: &LpData) -> usize {
        let (n, m) = (lp.n, lp.m());
        (n + m) * 41 + m * 8 + ETA_LIMIT * (m / 4 + 4) * 16
    }

    pub fn structural(&self) -> &[f64] {
        &self.x[..self.n]
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Row multipliers `c_B B^-1`.
    pub fn row_duals(&self) -> Vec<f64> {
        self.logical_combination(|i| self.cost[self.basis[i]])
    }

    /// Phase-one multipliers proving infeasibility, when the last solve
    /// ended infeasible in the primal.
    pub fn farkas(&self) -> Option<&[f64]> {
        self.farkas.as_deref()
    }

    /// `w^T B^-1` for basis position weights `w`.
    fn logical_combination(&self, weight: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut y: Vec<f64> = (0..self.m).map(weight).collect();
        self.btran(&mut y);
        y
    }

    fn ftran(&self, w: &mut [f64]) {
        w.iter_mut().for_each(|v| *v = -*v);
        self.etas.ftran(w);
    }

    fn btran(&self, w: &mut [f64]) {
        self.etas.btran(w);
        w.iter_mut().for_each(|v| *v = -*v);
    }

    /// `B^-1 a_j` into `out`.
    fn column(&self, j: usize, out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        if j < self.n {
            for &(i, a) in &self.a.cols[j] {
                out[i] = a;
            }
        } else {
            out[j - self.n] = -1.0;
        }
        self.ftran(out);
    }

    /// Reduced costs `cost_j - y^T a_j` with `y = B^-T cb` for basis
    /// position costs `cb`; `phase2` selects the true costs.
    fn price(&mut self, cb: &[f64], phase2: bool) {
        let mut y = cb.to_vec();
        self.btran(&mut y);
        for j in 0..self.n {
            if self.state[j] == At::Basic {
                self.d[j] = 0.0;
                continue;
            }
            let c = if phase2 { self.cost[j] } else { 0.0 };
            self.d[j] = c - self.a.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
        }
        for i in 0..self.m {
            let j = self.n + i;
            self.d[j] = if self.state[j] == At::Basic {
                0.0
            } else {
                y[i]
            };
        }
    }

    fn phase2_price(&mut self) {
        let cb: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
        self.price(&cb, true);
    }

    /// Changes bounds of a column; nonbasic columns move onto the new bound.
    pub fn set_bounds(&mut self, j: usize, lo: f64, hi: f64) {
        self.lower[j] = lo;
        self.upper[j] = hi;
        if self.state[j] == At::Basic {
            return;
        }
        let (v, s) = if lo.is_finite() && (self.state[j] != At::Upper || !hi.is_finite()) {
            (lo, At::Lower)
        } else if hi.is_finite() {
            (hi, At::Upper)
        } else {
            (0.0, At::Zero)
        };
        let mut alpha = vec![0.0; self.m];
        self.column(j, &mut alpha);
        self.move_nonbasic(j, v, &alpha);
        self.state[j] = s;
    }

    fn move_nonbasic(&mut self, j: usize, v: f64, alpha: &[f64]) {
        let delta = v - self.x[j];
        if delta != 0.0 {
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    self.x[self.basis[i]] -= a * delta;
                }
            }
        }
        self.x[j] = v;
    }

    /// Recomputes basic values `x_B = -B^-1 N x_N`.
    fn refresh(&mut self) {
        let mut w = vec![0.0; self.m];
        for j in 0..self.n {
            if self.state[j] != At::Basic && self.x[j] != 0.0 {
                for &(i, a) in &self.a.cols[j] {
                    w[i] += a * self.x[j];
                }
            }
        }
        for i in 0..self.m {
            let j = self.n + i;
            if self.state[j] != At::Basic {
                w[i] -= self.x[j];
            }
        }
        self.ftran(&mut w);
        for i in 0..self.m {
            self.x[self.basis[i]] = -w[i];
        }
    }

    /// Rebuilds the eta file for the current basis. Columns that turn out
    /// dependent are made nonbasic and the slack of their row stays basic.
    fn reinvert(&mut self) {
        let (n, m) = (self.n, self.m);
        let mut open = vec![true; m];
        let mut structural = Vec::new();
        for &b in &self.basis {
            if b >= n {
                open[b - n] = false;
            } else {
                structural.push(b);
            }
        }
        structural.sort_by_key(|&j| (self.a.cols[j].len(), j));
        self.etas.clear();
        let mut basis: Vec<usize> = (n..n + m).collect();
        let mut alpha = vec![0.0; m];
        for j in structural {
            self.column(j, &mut alpha);
            let big = (0..m)
                .filter(|&i| open[i])
                .map(|i| alpha[i].abs())
                .fold(0.0, f64::max);
            if big <= self.tol.pivot {
                let (v, s) = if self.lower[j].is_finite() {
                    (self.lower[j], At::Lower)
                } else if self.upper[j].is_finite() {
                    (self.upper[j], At::Upper)
                } else {
                    (0.0, At::Zero)
                };
                self.x[j] = v;
                self.state[j] = s;
                continue;
            }
            // sparsest acceptable pivot: fewest entries in the row of A
            let r = (0..m)
                .filter(|&i| open[i] && alpha[i].abs() >= THRESHOLD * big)
                .min_by_key(|&i| self.a.rows[i].len())
                .expect("a candidate exceeds the threshold");
            self.etas.push(r, &alpha);
            basis[r] = j;
            open[r] = false;
        }
        for (i, free) in open.into_iter().enumerate() {
            if free {
                self.state[n + i] = At::Basic;
            }
        }
        self.basis = basis;
        self.factored = self.etas.len();
        self.refresh();
    }

    fn pivot(&mut self, r: usize, q: usize, alpha: &[f64]) {
        self.etas.push(r, alpha);
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.state[q] = At::Basic;
        debug_assert!(self.state[leaving] != At::Basic);
        if self.etas.len() >= self.factored + ETA_LIMIT {
            self.reinvert();
        }
    }

    fn violation_sign(&self, col: usize) -> f64 {
        let v = self.x[col];
        if v < self.lower[col] - self.tol.primal {
            -1.0
        } else if v > self.upper[col] + self.tol.primal {
            1.0
        } else {
            0.0
        }
    }

    /// Direction a nonbasic column may move to decrease `price`, if any.
    fn eligible(&self, j: usize, dj: f64) -> Option<f64> {
        let tol = self.tol.dual;
        match self.state[j] {
            At::Basic => None,
            _ if self.lower[j] == self.upper[j] => None,
            At::Lower if dj < -tol => Some(1.0),
            At::Upper if dj > tol => Some(-1.0),
            At::Zero if dj.abs() > tol => Some(-dj.signum()),
            _ => None,
        }
    }

    /// Primal simplex with a composite phase one. Works from any basis.
    pub fn primal(&mut self, deadline: Option<Instant>, max_iter: usize) -> LpStatus {
        let w = self.width;
        let mut weights = vec![0.0; self.m];
        let mut alpha = vec![0.0; self.m];
        let mut streak = 0usize;
        let mut bland = false;
        let mut verified = false;
        self.farkas = None;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            if self.iterations % 32 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                return LpStatus::TimeLimit;
            }
            let mut phase1 = false;
            for i in 0..self.m {
                weights[i] = self.violation_sign(self.basis[i]);
                phase1 |= weights[i] != 0.0;
            }
            if phase1 {
                self.price(&weights, false);
            } else {
                self.phase2_price();
            }

            let mut entering: Option<(usize, f64)> = None;
            let mut best = 0.0;
            for j in 0..w {
                if let Some(dir) = self.eligible(j, self.d[j]) {
                    if bland {
                        entering = Some((j, dir));
                        break;
                    }
                    if self.d[j].abs() > best {
                        best = self.d[j].abs();
                        entering = Some((j, dir));
                    }
                }
            }
            let Some((q, dir)) = entering else {
                if !verified {
                    // recheck from a fresh factorisation before concluding
                    self.reinvert();
                    verified = true;
                    continue;
                }
                if phase1 {
                    self.farkas = Some(self.logical_combination(|i| weights[i]));
                    return LpStatus::Infeasible;
                }
                return LpStatus::Optimal;
            };
            verified = false;
            self.column(q, &mut alpha);

            // ratio test
            let mut theta = f64::INFINITY;
            let mut leave: Option<(usize, f64)> = None;
            let mut leave_alpha = 0.0;
            let span = self.upper[q] - self.lower[q];
            if span.is_finite() {
                theta = span;
            }
            for i in 0..self.m {
                let a = alpha[i];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                let rate = -a * dir;
                let b = self.basis[i];
                let (v, lo, hi) = (self.x[b], self.lower[b], self.upper[b]);
                let sign = weights[i];
                let target = if rate > 0.0 {
                    if sign < 0.0 {
                        lo
                    } else if sign == 0.0 {
                        hi
                    } else {
                        continue;
                    }
                } else if sign > 0.0 {
                    hi
                } else if sign == 0.0 {
                    lo
                } else {
                    continue;
                };
                if !target.is_finite() {
                    continue;
                }
                let ratio = ((target - v) / rate).max(0.0);
                let better = match leave {
                    None => ratio < theta,
                    Some((r, _)) => {
                        ratio < theta - 1e-12
                            || (ratio <= theta + 1e-12
                                && if bland {
                                    b < self.basis[r]
                                } else {
                                    rate.abs() > leave_alpha
                                })
                    }
                };
                if better {
                    theta = ratio;
                    leave = Some((i, target));
                    leave_alpha = rate.abs();
                }
            }
            if theta == f64::INFINITY {
                if phase1 {
                    // cannot happen for a bounded phase-one objective; recover
                    self.reinvert();
                    bland = true;
                    self.iterations += 1;
                    continue;
                }
                return LpStatus::Unbounded;
            }
            self.iterations += 1;
            if theta <= 1e-12 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
                bland = false;
            }
            let step = dir * theta;
            match leave {
                None => {
                    // bound flip
                    let v = if dir > 0.0 {
                        self.upper[q]
                    } else {
                        self.lower[q]
                    };
                    self.move_nonbasic(q, v, &alpha);
                    self.state[q] = if dir > 0.0 { At::Upper } else { At::Lower };
                }
                Some((r, target)) => {
                    for i in 0..self.m {
                        if alpha[i] != 0.0 {
                            self.x[self.basis[i]] -= alpha[i] * step;
                        }
                    }
                    self.x[q] += step;
                    let b = self.basis[r];
                    self.x[b] = target;
                    self.state[b] = if target == self.lower[b] {
                        At::Lower
                    } else {
                        At::Upper
                    };
                    self.pivot(r, q, &alpha);
                }
            }
        }
    }

    fn dual_feasible(&self) -> bool {
        (0..self.width).all(|j| self.eligible(j, self.d[j]).is_none())
    }

    /// Row `r` of `B^-1 [A | -I]` into `out`; basic entries are left stale.
    fn pivot_row(&self, r: usize, out: &mut [f64]) {
        let mut rho = vec![0.0; self.m];
        rho[r] = 1.0;
        self.btran(&mut rho);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &p) in rho.iter().enumerate() {
            if p != 0.0 {
                for &(j, a) in &self.a.rows[i] {
                    out[j] += p * a;
                }
                out[self.n + i] = -p;
            }
        }
    }

    /// Dual simplex from a dual-feasible basis, finished by a primal pass.
    /// Falls back to the primal when the basis is not dual feasible.
    pub fn dual(&mut self, deadline: Option<Instant>, max_iter: usize) -> LpStatus {
        let w = self.width;
        self.phase2_price();
        if !self.dual_feasible() {
            return self.primal(deadline, max_iter);
        }
        let mut row = vec![0.0; w];
        let mut alpha = vec![0.0; self.m];
        let mut streak = 0usize;
        loop {
            if self.iterations >= max_iter {
                return LpStatus::IterationLimit;
            }
            if self.iterations % 32 == 0 && deadline.is_some_and(|d| Instant::now() >= d) {
                return LpStatus::TimeLimit;
            }
            // (position, target, basic value must increase)
            let mut leave: Option<(usize, f64, bool)> = None;
            let mut worst = self.tol.primal;
            for i in 0..self.m {
                let b = self.basis[i];
                let v = self.x[b];
                let (gap, target, up) = if v < self.lower[b] {
                    (self.lower[b] - v, self.lower[b], true)
                } else if v > self.upper[b] {
                    (v - self.upper[b], self.upper[b], false)
                } else {
                    continue;
                };
                if gap > worst {
                    worst = gap;
                    leave = Some((i, target, up));
                }
            }
            let Some((r, target, increase)) = leave else {
                return self.primal(deadline, max_iter);
            };
            self.phase2_price();
            self.pivot_row(r, &mut row);
            let b = self.basis[r];
            let mut entering: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            let mut best_alpha = 0.0;
            for j in 0..w {
                if self.state[j] == At::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let a = row[j];
                if a.abs() <= self.tol.pivot {
                    continue;
                }
                // x_b changes by -a * delta_j
                let ok = match self.state[j] {
                    At::Lower => (a < 0.0) == increase,
                    At::Upper => (a > 0.0) == increase,
                    At::Zero => true,
                    At::Basic => false,
                };
                if !ok {
                    continue;
                }
                let ratio = self.d[j].abs() / a.abs();
                if ratio < best_ratio - 1e-12
                    || (ratio <= best_ratio + 1e-12 && a.abs() > best_alpha)
                {
                    best_ratio = ratio;
                    best_alpha = a.abs();
                    entering = Some(j);
                }
            }
            let Some(q) = entering else {
                return LpStatus::Infeasible;
            };
            if best_ratio <= 1e-12 {
                streak += 1;
                if streak > DEGENERATE_STREAK {
                    // dual degenerate stall; the primal has an anti-cycling rule
                    return self.primal(deadline, max_iter);
                }
            } else {
                streak = 0;
            }
            self.iterations += 1;
            self.column(q, &mut alpha);
            let a = alpha[r];
            if a.abs() <= self.tol.pivot {
                // row and column disagree: the factorisation has drifted
                self.reinvert();
                continue;
            }
            let delta = (self.x[b] - target) / a;
            for i in 0..self.m {
                if alpha[i] != 0.0 {
                    self.x[self.basis[i]] -= alpha[i] * delta;
                }
            }
            self.x[q] += delta;
            self.x[b] = target;
            self.state[b] = if increase { At::Lower } else { At::Upper };
            self.pivot(r, q, &alpha);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp(rows: Vec<Vec<(usize, f64)>>, n: usize, bounds: Vec<(f64, f64)>) -> LpData {
        LpData {
            n,
            cost: vec![0.0; n],
            col_lower: vec![0.0; n],
            col_upper: vec![f64::INFINITY; n],
            row_lower: bounds.iter().map(|b| b.0).collect(),
            row_upper: bounds.iter().map(|b| b.1).collect(),
            rows,
        }
    }

    #[test]
    fn small_lp() {
        // max x + y  s.t. x + 2y <= 4, 3x + y <= 6  -> (1.6, 1.2)
        let mut data = lp(
            vec![vec![(0, 1.0), (1, 2.0)], vec![(0, 3.0), (1, 1.0)]],
            2,
            vec![(f64::NEG_INFINITY, 4.0), (f64::NEG_INFINITY, 6.0)],
        );
        data.cost = vec![-1.0, -1.0];
        let mut t = Tableau::new(&data, Tolerances::default());
        assert_eq!(t.primal(None, 1000), LpStatus::Optimal);
        let x = t.structural();
        assert!((x[0] - 1.6).abs() < 1e-12 && (x[1] - 1.2).abs() < 1e-12);
        assert!((t.objective() + 2.8).abs() < 1e-12);
    }

    #[test]
    fn phase_one_equalities() {
        // x + y = 3, x - y = 1 -> (2, 1)
        let data = lp(
            vec![vec![(0, 1.0), (1, 1.0)], vec![(0, 1.0), (1, -1.0)]],
            2,
            vec![(3.0, 3.0), (1.0, 1.0)],
        );
        let mut t = Tableau::new(&data, Tolerances::default());
        assert_eq!(t.primal(None, 1000), LpStatus::Optimal);
        assert!((t.structural()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_has_certificate() {
        let data = lp(
            vec![vec![(0, 1.0)], vec![(0, 1.0)]],
            1,
            vec![(f64::NEG_INFINITY, 1.0), (2.0, f64::INFINITY)],
        );
        let mut t = Tableau::new(&data, Tolerances::default());
        assert_eq!(t.primal(None, 1000), LpStatus::Infeasible);
        assert!(t.farkas().is_some());
    }

    #[test]
    fn unbounded() {
        let mut data = lp(vec![vec![(0, 1.0)]], 1, vec![(0.0, f64::INFINITY)]);
        data.cost = vec![-1.0];
        let mut t = Tableau::new(&data, Tolerances::default());
        assert_eq!(t.primal(None, 1000), LpStatus::Unbounded);
    }

    #[test]
    fn dual_after_bound_change() {
        // min -x - y, x + y <= 1.5, x, y in [0, 1]
        let mut data = lp(
            vec![vec![(0, 1.0), (1, 1.0)]],
            2,
            vec![(f64::NEG_INFINITY, 1.5)],
        );
        data.cost = vec![-1.0, -2.0];
        data.col_upper = vec![1.0, 1.0];
        let mut t = Tableau::new(&data, Tolerances::default());
        assert_eq!(t.primal(None, 1000), LpStatus::Optimal);
        assert!((t.objective() + 2.5).abs() < 1e-12);
        t.set_bounds(0, 0.0, 0.0);
        assert_eq!(t.dual(None, 1000), LpStatus::Optimal);
        assert!((t.objective() + 2.0).abs() < 1e-12);
        t.set_bounds(1, 0.0, 0.0);
        t.set_bounds(2, 1.0, 1.5);
        assert_eq!(t.dual(None, 1000), LpStatus::Infeasible);
    }

    #[test]
    fn dual_moves_a_fixed_basic_column_down() {
        // min -x, 2.66 x <= 0.5 leaves x basic; fixing it at 0 must stay feasible
        let mut data = lp(vec![vec![(0, 2.66)]], 2, vec![(f64::NEG_INFINITY, 0.5)]);
        data.cost = vec![-1.0, 0.0];
        data.col_upper = vec![1.0, 1.0];
        let mut t = Tableau::new(&data, Tolerances::default());
        assert_eq!(t.primal(None, 100), LpStatus::Optimal);
        t.set_bounds(0, 0.0, 0.0);
        assert_eq!(t.dual(None, 100), LpStatus::Optimal);
        assert_eq!(t.structural()[0], 0.0);
    }
}
