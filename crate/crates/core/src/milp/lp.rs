//! Two-phase bounded-variable primal simplex with a dense basis inverse.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

/// `min c'x` subject to `A x (sense) b`, `lower <= x <= upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// `(row, col, value)`; repeated entries are summed.
    pub triplets: Vec<(usize, usize, f64)>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self {
            objective: Vec::new(),
            triplets: Vec::new(),
            senses: Vec::new(),
            rhs: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
        }
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coefs: &[(usize, f64)], sense: RowSense, rhs: f64) -> usize {
        let row = self.rhs.len();
        self.triplets.extend(coefs.iter().map(|&(c, v)| (row, c, v)));
        self.senses.push(sense);
        self.rhs.push(rhs);
        row
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let m = self.num_rows();
        if self.lower.len() != n || self.upper.len() != n || self.senses.len() != m {
            return Err(Error::InvalidParameter("linear program dimensions disagree".into()));
        }
        if let Some(&(r, c, _)) = self.triplets.iter().find(|&&(r, c, _)| r >= m || c >= n) {
            return Err(Error::InvalidParameter(format!("matrix entry ({r}, {c}) out of range")));
        }
        let finite = self.objective.iter().chain(&self.rhs).all(|v| v.is_finite())
            && self.triplets.iter().all(|t| t.2.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "linear program has non-finite coefficients".into(),
            ));
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(Error::InvalidParameter(format!("variable {j} has bounds [{l}, {u}]")));
            }
        }
        Ok(())
    }
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Row duals of the final basis; meaningful when optimal.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// `None` scales with problem size.
    pub max_iterations: Option<usize>,
    pub refactor_every: usize,
    /// Degenerate pivots per row tolerated before switching to Bland's rule.
    pub bland_after_per_row: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            max_iterations: None,
            refactor_every: 50,
            bland_after_per_row: 50,
        }
    }
}

const PIVOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable parked at zero.
    Zero,
}

struct Simplex {
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    b: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<f64>,
    opts: LpOptions,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
    degenerate: usize,
    bland: bool,
}

enum PhaseEnd {
    Optimal,
    Unbounded,
    IterLimit,
}

impl Simplex {
    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut a = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, v) in &self.cols[j] {
                a[i * m + k] = v;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r, &s| a[r * m + c].abs().total_cmp(&a[s * m + c].abs()))
                .expect("nonempty");
            if a[p * m + c].abs() < 1e-12 {
                return Err(Error::Domain("singular simplex basis".into()));
            }
            if p != c {
                for k in 0..m {
                    a.swap(p * m + k, c * m + k);
                    inv.swap(p * m + k, c * m + k);
                }
            }
            let piv = a[c * m + c];
            for k in 0..m {
                a[c * m + k] /= piv;
                inv[c * m + k] /= piv;
            }
            for r in 0..m {
                let f = a[r * m + c];
                if r != c && f != 0.0 {
                    for k in 0..m {
                        a[r * m + k] -= f * a[c * m + k];
                        inv[r * m + k] -= f * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basics();
        Ok(())
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut r = self.b.clone();
        for (j, col) in self.cols.iter().enumerate() {
            if self.state[j] != State::Basic && self.x[j] != 0.0 {
                for &(i, v) in col {
                    r[i] -= v * self.x[j];
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            self.x[self.basis[k]] = row.iter().zip(&r).map(|(a, b)| a * b).sum();
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let c = self.cost[j];
            if c != 0.0 {
                for (yi, a) in y.iter_mut().zip(&self.binv[k * m..(k + 1) * m]) {
                    *yi += c * a;
                }
            }
        }
        y
    }

    fn column_image(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        for &(i, v) in &self.cols[j] {
            for (k, a) in alpha.iter_mut().enumerate() {
                *a += self.binv[k * m + i] * v;
            }
        }
        alpha
    }

    fn choose_entering(&self, y: &[f64]) -> Option<(usize, f64)> {
        let tol = self.opts.optimality_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for (j, col) in self.cols.iter().enumerate() {
            let st = self.state[j];
            if st == State::Basic || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.cost[j] - col.iter().map(|&(i, v)| y[i] * v).sum::<f64>();
            let dir = match st {
                State::Lower if d < -tol => 1.0,
                State::Upper if d > tol => -1.0,
                State::Zero if d.abs() > tol => -d.signum(),
                _ => continue,
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.is_none_or(|(_, _, bd)| d.abs() > bd) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run_phase(&mut self) -> Result<PhaseEnd> {
        let bland_after = self.opts.bland_after_per_row * self.m.max(1);
        loop {
            if self.iterations >= self.max_iterations {
                return Ok(PhaseEnd::IterLimit);
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let y = self.duals();
            let Some((q, dir)) = self.choose_entering(&y) else {
                return Ok(PhaseEnd::Optimal);
            };
            let alpha = self.column_image(q);

            // ratio test: basic k moves by -dir * alpha_k per unit step
            let mut step = self.upper[q] - self.lower[q];
            let mut leave: Option<(usize, f64)> = None;
            for (k, &a) in alpha.iter().enumerate() {
                let rate = -dir * a;
                let jb = self.basis[k];
                let (limit, bound) = if rate < -PIVOT_TOL && self.lower[jb].is_finite() {
                    (((self.x[jb] - self.lower[jb]) / -rate).max(0.0), self.lower[jb])
                } else if rate > PIVOT_TOL && self.upper[jb].is_finite() {
                    (((self.upper[jb] - self.x[jb]) / rate).max(0.0), self.upper[jb])
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < step - 1e-12 => true,
                    Some((kk, _)) if limit <= step + 1e-12 => {
                        if self.bland {
                            jb < self.basis[kk]
                        } else {
                            a.abs() > alpha[kk].abs()
                        }
                    }
                    _ => false,
                };
                if better {
                    step = limit;
                    leave = Some((k, bound));
                }
            }
            if step == f64::INFINITY {
                return Ok(PhaseEnd::Unbounded);
            }
            self.iterations += 1;
            if step <= 1e-12 {
                self.degenerate += 1;
                if self.degenerate > bland_after {
                    self.bland = true;
                }
            }
            if step > 0.0 {
                self.x[q] += dir * step;
                for (k, &a) in alpha.iter().enumerate() {
                    let jb = self.basis[k];
                    self.x[jb] -= dir * step * a;
                }
            }
            match leave {
                None => {
                    // bound flip
                    self.state[q] = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                }
                Some((r, bound)) => {
                    let out = self.basis[r];
                    self.x[out] = bound;
                    self.state[out] = if bound == self.upper[out] && bound != self.lower[out] {
                        State::Upper
                    } else {
                        State::Lower
                    };
                    self.state[q] = State::Basic;
                    self.basis[r] = q;
                    self.pivot(r, &alpha);
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, alpha: &[f64]) {
        let m = self.m;
        let piv = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= piv;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (row_r, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let i = if i < r { i } else { i + 1 };
            let f = alpha[i];
            if f != 0.0 {
                for (a, b) in row.iter_mut().zip(row_r.iter()) {
                    *a -= f * b;
                }
            }
        }
        self.since_refactor += 1;
    }
}

/// Solves `lp` with a two-phase bounded-variable primal simplex.
///
/// Phase 1 minimises the sum of artificials attached to rows whose slack
/// starts outside its bounds. Dantzig pricing is used until the count of
/// degenerate pivots passes `bland_after_per_row * rows`, after which
/// Bland's rule guarantees termination.
pub fn solve_lp(lp: &LinearProgram, opts: &LpOptions) -> Result<LpSolution> {
    lp.validate()?;
    let n = lp.num_vars();
    let m = lp.num_rows();

    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut sorted = lp.triplets.clone();
    sorted.sort_by_key(|&(r, c, _)| (c, r));
    for (r, c, v) in sorted {
        match cols[c].last_mut() {
            Some(last) if last.0 == r => last.1 += v,
            _ => cols[c].push((r, v)),
        }
    }
    let mut lower = lp.lower.clone();
    let mut upper = lp.upper.clone();
    let mut x = Vec::with_capacity(n + 2 * m);
    let mut state = Vec::with_capacity(n + 2 * m);
    for j in 0..n {
        let (st, v) = if lower[j].is_finite() {
            (State::Lower, lower[j])
        } else if upper[j].is_finite() {
            (State::Upper, upper[j])
        } else {
            (State::Zero, 0.0)
        };
        state.push(st);
        x.push(v);
    }
    let mut residual = lp.rhs.clone();
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            residual[i] -= v * x[j];
        }
    }

    let mut basis = vec![0; m];
    let mut artificial_rows = Vec::new();
    for i in 0..m {
        let (ls, us) = match lp.senses[i] {
            RowSense::Le => (0.0, f64::INFINITY),
            RowSense::Ge => (f64::NEG_INFINITY, 0.0),
            RowSense::Eq => (0.0, 0.0),
        };
        let j = cols.len();
        cols.push(vec![(i, 1.0)]);
        lower.push(ls);
        upper.push(us);
        let r = residual[i];
        if r >= ls && r <= us {
            x.push(r);
            state.push(State::Basic);
            basis[i] = j;
        } else {
            let parked = r.clamp(ls, us);
            x.push(parked);
            state.push(if parked == us && ls != us {
                State::Upper
            } else {
                State::Lower
            });
            artificial_rows.push((i, r - parked));
        }
    }
    let first_artificial = cols.len();
    for &(i, gap) in &artificial_rows {
        basis[i] = cols.len();
        cols.push(vec![(i, gap.signum())]);
        lower.push(0.0);
        upper.push(f64::INFINITY);
        x.push(gap.abs());
        state.push(State::Basic);
    }
    let total = cols.len();
    // relative to the initial violation, so huge redundant right-hand sides cannot mask infeasibility
    let scale = artificial_rows.iter().fold(1.0f64, |a, &(_, gap)| a.max(gap.abs()));
    let max_iterations = opts.max_iterations.unwrap_or(1000 + 50 * (m + total));

    let mut binv = vec![0.0; m * m];
    for (k, &j) in basis.iter().enumerate() {
        binv[k * m + k] = cols[j][0].1;
    }
    let mut cost: Vec<f64> = (0..total)
        .map(|j| if j >= first_artificial { 1.0 } else { 0.0 })
        .collect();
    let mut s = Simplex {
        m,
        cols,
        lower,
        upper,
        cost: cost.clone(),
        b: lp.rhs.clone(),
        x,
        state,
        basis,
        binv,
        opts: *opts,
        iterations: 0,
        max_iterations,
        since_refactor: 0,
        degenerate: 0,
        bland: false,
    };

    let finish = |s: &Simplex, status: LpStatus| {
        let values = s.x[..n].to_vec();
        let objective = values.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
        LpSolution {
            status,
            values,
            objective,
            duals: if status == LpStatus::Optimal {
                s.duals()
            } else {
                vec![0.0; m]
            },
            iterations: s.iterations,
        }
    };

    if first_artificial < total {
        match s.run_phase()? {
            PhaseEnd::IterLimit => return Ok(finish(&s, LpStatus::IterLimit)),
            PhaseEnd::Unbounded => unreachable!("phase 1 objective is bounded below"),
            PhaseEnd::Optimal => {}
        }
        s.refactor()?;
        let infeasibility: f64 = s.x[first_artificial..].iter().sum();
        if infeasibility > opts.feasibility_tol * scale {
            return Ok(finish(&s, LpStatus::Infeasible));
        }
        for j in first_artificial..total {
            s.upper[j] = 0.0;
            if s.state[j] != State::Basic {
                s.x[j] = 0.0;
                s.state[j] = State::Lower;
            }
        }
        s.degenerate = 0;
        s.bland = false;
    }
    cost.iter_mut().for_each(|c| *c = 0.0);
    cost[..n].copy_from_slice(&lp.objective);
    s.cost = cost;
    let status = match s.run_phase()? {
        PhaseEnd::Optimal => LpStatus::Optimal,
        PhaseEnd::Unbounded => LpStatus::Unbounded,
        PhaseEnd::IterLimit => LpStatus::IterLimit,
    };
    if status == LpStatus::Optimal {
        s.refactor()?;
    }
    Ok(finish(&s, status))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn solve(lp: &LinearProgram) -> LpSolution {
        solve_lp(lp, &LpOptions::default()).unwrap()
    }

    #[test]
    fn single_lower_bound_row() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0)], RowSense::Ge, 3.0);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.values[0] - 3.0).abs() < 1e-12);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_equality() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (y, 1.0)], RowSense::Eq, 1.0);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 2.0);
        lp.add_row(&[(x, 1.0)], RowSense::Ge, 3.0);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new();
        let x = lp.add_var(-1.0, 0.0, f64::INFINITY);
        let y = lp.add_var(0.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (y, -1.0)], RowSense::Le, 1.0);
        assert_eq!(solve(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn free_and_negative_ranges() {
        // min x - y, x free, y in [-3, -1], x + y >= 0
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, f64::NEG_INFINITY, f64::INFINITY);
        let y = lp.add_var(-1.0, -3.0, -1.0);
        lp.add_row(&[(x, 1.0), (y, 1.0)], RowSense::Ge, 0.0);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        // x = -y, objective -2y minimised at y = -1
        assert!((s.objective - 2.0).abs() < 1e-12, "{s:?}");
    }

    #[test]
    fn rejects_malformed_programs() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 1.0, 0.0);
        assert!(solve_lp(&lp, &LpOptions::default()).is_err());
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(&[(x + 1, 1.0)], RowSense::Le, 1.0);
        assert!(solve_lp(&lp, &LpOptions::default()).is_err());
        let mut lp = LinearProgram::new();
        lp.add_var(f64::NAN, 0.0, 1.0);
        assert!(solve_lp(&lp, &LpOptions::default()).is_err());
    }

    #[test]
    fn duplicate_triplets_are_summed() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, f64::INFINITY);
        lp.add_row(&[(x, 1.0), (x, 1.0)], RowSense::Ge, 4.0);
        assert!((solve(&lp).values[0] - 2.0).abs() < 1e-12);
    }

    /// Solves a square system by Gaussian elimination; `None` if singular.
    fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
        let n = b.len();
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
            if a[p][c].abs() < 1e-10 {
                return None;
            }
            a.swap(p, c);
            b.swap(p, c);
            let pivot = a[c].clone();
            for r in c + 1..n {
                let f = a[r][c] / pivot[c];
                for (v, p) in a[r].iter_mut().zip(&pivot).skip(c) {
                    *v -= f * p;
                }
                b[r] -= f * b[c];
            }
        }
        let mut x = vec![0.0; n];
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
            x[r] = (b[r] - s) / a[r][r];
        }
        Some(x)
    }

    fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut cur = Vec::new();
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if cur.len() == k {
                out.push(cur.clone());
                return;
            }
            for i in start..n {
                if n - i < k - cur.len() {
                    break;
                }
                cur.push(i);
                rec(i + 1, n, k, cur, out);
                cur.pop();
            }
        }
        rec(0, n, k, &mut cur, &mut out);
        out
    }

    /// Minimum over every vertex of `{A x (sense) b, 0 <= x <= u}`.
    fn vertex_oracle(a: &[Vec<f64>], senses: &[RowSense], b: &[f64], u: &[f64], c: &[f64]) -> Option<f64> {
        let n = c.len();
        // constraint list as (row, rhs): structural rows then bound rows
        let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().copied()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e.clone(), 0.0));
            rows.push((e, u[j]));
        }
        let feasible = |x: &[f64]| {
            x.iter().zip(u).all(|(v, hi)| *v >= -1e-7 && *v <= hi + 1e-7)
                && a.iter().zip(senses).zip(b).all(|((row, s), rhs)| {
                    let lhs: f64 = row.iter().zip(x).map(|(p, q)| p * q).sum();
                    match s {
                        RowSense::Le => lhs <= rhs + 1e-7,
                        RowSense::Ge => lhs >= rhs - 1e-7,
                        RowSense::Eq => (lhs - rhs).abs() <= 1e-7,
                    }
                })
        };
        let mut best: Option<f64> = None;
        for active in combinations(rows.len(), n) {
            let mat = active.iter().map(|&i| rows[i].0.clone()).collect();
            let rhs = active.iter().map(|&i| rows[i].1).collect();
            if let Some(x) = solve_square(mat, rhs) {
                if feasible(&x) {
                    let obj: f64 = x.iter().zip(c).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
        best
    }

    #[test]
    fn random_programs_match_vertex_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, n) = (5, 8);
        let mut infeasible_seen = 0;
        for case in 0..12 {
            let a: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(-3i32..=5) as f64).collect())
                .collect();
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(1..=6) as f64).collect();
            let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let anchor: Vec<f64> = u.iter().map(|hi| rng.gen_range(0.0..*hi)).collect();
            let mut senses = Vec::new();
            let mut b = Vec::new();
            for row in &a {
                let lhs: f64 = row.iter().zip(&anchor).map(|(p, q)| p * q).sum();
                let slack = rng.gen_range(0.0..3.0);
                // the last two cases push one row past the anchor, possibly infeasible
                let shift = if case >= 10 { 40.0 } else { 0.0 };
                if rng.gen_bool(0.5) {
                    senses.push(RowSense::Le);
                    b.push(lhs + slack - shift);
                } else {
                    senses.push(RowSense::Ge);
                    b.push(lhs - slack + shift);
                }
            }
            let mut lp = LinearProgram::new();
            for j in 0..n {
                lp.add_var(c[j], 0.0, u[j]);
            }
            for i in 0..m {
                let coefs: Vec<(usize, f64)> = (0..n).map(|j| (j, a[i][j])).collect();
                lp.add_row(&coefs, senses[i], b[i]);
            }
            let s = solve(&lp);
            match vertex_oracle(&a, &senses, &b, &u, &c) {
                Some(best) => {
                    assert_eq!(s.status, LpStatus::Optimal, "case {case}");
                    assert!(
                        (s.objective - best).abs() < 1e-7,
                        "case {case}: {} vs {best}",
                        s.objective
                    );
                }
                None => {
                    infeasible_seen += 1;
                    assert_eq!(s.status, LpStatus::Infeasible, "case {case}");
                }
            }
        }
        assert!(infeasible_seen <= 2);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under naive Dantzig pricing with
        // lowest-index ratio ties.
        let mut lp = LinearProgram::new();
        let inf = f64::INFINITY;
        let x4 = lp.add_var(-0.75, 0.0, inf);
        let x5 = lp.add_var(150.0, 0.0, inf);
        let x6 = lp.add_var(-0.02, 0.0, inf);
        let x7 = lp.add_var(6.0, 0.0, inf);
        lp.add_row(&[(x4, 0.25), (x5, -60.0), (x6, -0.04), (x7, 9.0)], RowSense::Le, 0.0);
        lp.add_row(&[(x4, 0.5), (x5, -90.0), (x6, -0.02), (x7, 3.0)], RowSense::Le, 0.0);
        lp.add_row(&[(x6, 1.0)], RowSense::Le, 1.0);
        let s = solve(&lp);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 0.05).abs() < 1e-9, "{}", s.objective);
    }

    #[test]
    fn large_redundant_rhs_does_not_hide_infeasibility() {
        let mut lp = LinearProgram::new();
        let x = lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(&[(x, 1.0)], RowSense::Eq, 5.0);
        lp.add_row(&[(x, 1.0)], RowSense::Le, 1e19);
        assert_eq!(solve(&lp).status, LpStatus::Infeasible);
    }
}
