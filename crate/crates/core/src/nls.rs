//! Bounded nonlinear least squares.
//!
//! Levenberg-Marquardt on a central-difference Jacobian with iterates
//! projected into a box. When `J^T J` is numerically rank deficient the
//! solver switches to Nelder-Mead on the sum of squares from the current
//! point.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlsOptions {
    /// Relative step-norm stopping threshold.
    pub step_tol: f64,
    /// Gradient stopping threshold, relative to `1 + sse`.
    pub grad_tol: f64,
    pub max_iterations: usize,
}

impl Default for NlsOptions {
    fn default() -> Self {
        Self {
            step_tol: 1e-10,
            grad_tol: 1e-8,
            max_iterations: 500,
        }
    }
}

/// Box constraints; infinite entries leave a side open.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidParameter("bound vectors differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
            return Err(Error::InvalidParameter("lower bound exceeds upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn project(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NlsMethod {
    LevenbergMarquardt,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NlsSolution {
    pub x: Vec<f64>,
    pub sse: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub gradient_norm: f64,
    pub method: NlsMethod,
    /// SSE after each accepted iteration, starting with the initial point.
    pub sse_history: Vec<f64>,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_sq(v).sqrt()
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

/// Minimizes `sum r_i(x)^2` over the box, starting from `init`.
pub fn nls_minimize<F>(residual: F, init: &[f64], bounds: Option<&Bounds>, options: &NlsOptions) -> Result<NlsSolution>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = init.len();
    let bounds = bounds.cloned().unwrap_or_else(|| Bounds::unbounded(n));
    if bounds.lower.len() != n {
        return Err(Error::InvalidParameter("bounds do not match parameter count".into()));
    }
    let mut x = init.to_vec();
    bounds.project(&mut x);
    let mut r = residual(&x);
    if !all_finite(&r) || !all_finite(&x) {
        return Err(Error::NonFiniteResidual);
    }
    let mut sse = sum_sq(&r);
    let mut history = vec![sse];
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    let mut gradient_norm = f64::INFINITY;

    while iterations < options.max_iterations {
        iterations += 1;
        let jac = jacobian(&residual, &x, &r, &bounds);
        let (jtj, g) = normal_equations(&jac, &r, n);
        gradient_norm = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if gradient_norm <= options.grad_tol * (1.0 + sse) {
            converged = true;
            break;
        }
        if is_rank_deficient(&jtj) {
            let mut sol = nelder_mead(&residual, &x, &bounds, options, iterations, history);
            sol.gradient_norm = gradient_norm;
            return Ok(sol);
        }

        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for j in 0..n {
                damped[j * n + j] += lambda * jtj[j * n + j].max(1e-12);
            }
            let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
            let Some(delta) = cholesky_solve(&damped, &neg_g, n) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(&delta).map(|(a, b)| a + b).collect();
            bounds.project(&mut trial);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let step_norm = norm(&step);
            if step_norm == 0.0 {
                // pinned against the box
                converged = true;
                break;
            }
            let r_trial = residual(&trial);
            let sse_trial = sum_sq(&r_trial);
            if all_finite(&r_trial) && sse_trial < sse {
                x = trial;
                r = r_trial;
                sse = sse_trial;
                history.push(sse);
                lambda = (lambda / 10.0).max(1e-15);
                accepted = true;
                if step_norm <= options.step_tol * (1.0 + norm(&x)) {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if converged {
            break;
        }
        if !accepted {
            // No descent at any damping: stationary to working precision.
            converged = gradient_norm <= options.grad_tol.sqrt() * (1.0 + sse) || sse == 0.0;
            break;
        }
    }

    Ok(NlsSolution {
        x,
        sse,
        residuals: r,
        iterations,
        converged,
        gradient_norm,
        method: NlsMethod::LevenbergMarquardt,
        sse_history: history,
    })
}

fn jacobian<F>(residual: &F, x: &[f64], r0: &[f64], bounds: &Bounds) -> Vec<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let m = r0.len();
    let mut cols = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = 6e-6 * x[j].abs().max(1.0);
        let up_ok = x[j] + h <= bounds.upper[j];
        let down_ok = x[j] - h >= bounds.lower[j];
        let eval = |v: f64| {
            let mut xs = x.to_vec();
            xs[j] = v;
            residual(&xs)
        };
        let col: Vec<f64> = match (up_ok, down_ok) {
            (true, true) => {
                let (rp, rm) = (eval(x[j] + h), eval(x[j] - h));
                (0..m).map(|i| (rp[i] - rm[i]) / (2.0 * h)).collect()
            }
            (true, false) => {
                let rp = eval(x[j] + h);
                (0..m).map(|i| (rp[i] - r0[i]) / h).collect()
            }
            (false, true) => {
                let rm = eval(x[j] - h);
                (0..m).map(|i| (r0[i] - rm[i]) / h).collect()
            }
            (false, false) => vec![0.0; m],
        };
        cols.push(col.into_iter().map(|v| if v.is_finite() { v } else { 0.0 }).collect());
    }
    cols
}

fn normal_equations(cols: &[Vec<f64>], r: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jtj = vec![0.0; n * n];
    let mut g = vec![0.0; n];
    for a in 0..n {
        g[a] = cols[a].iter().zip(r).map(|(j, r)| j * r).sum();
        for b in a..n {
            let v: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| x * y).sum();
            jtj[a * n + b] = v;
            jtj[b * n + a] = v;
        }
    }
    (jtj, g)
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let l = cholesky(a, n)?;
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Rank test on the column-scaled normal matrix (a correlation matrix).
fn is_rank_deficient(jtj: &[f64]) -> bool {
    let n = (jtj.len() as f64).sqrt() as usize;
    let diag: Vec<f64> = (0..n).map(|i| jtj[i * n + i]).collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return true;
    }
    let mut scaled = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            scaled[i * n + j] = jtj[i * n + j] / (diag[i] * diag[j]).sqrt();
        }
    }
    match cholesky(&scaled, n) {
        None => true,
        Some(l) => (0..n).any(|i| l[i * n + i] * l[i * n + i] < 1e-14),
    }
}

fn nelder_mead<F>(
    residual: &F,
    start: &[f64],
    bounds: &Bounds,
    options: &NlsOptions,
    iterations_so_far: usize,
    mut history: Vec<f64>,
) -> NlsSolution
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let n = start.len();
    let objective = |x: &[f64]| {
        let mut p = x.to_vec();
        bounds.project(&mut p);
        let s = sum_sq(&residual(&p));
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    };
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for j in 0..n {
        let mut v = start.to_vec();
        v[j] += if v[j] != 0.0 { 0.05 * v[j] } else { 2.5e-4 };
        bounds.project(&mut v);
        if v[j] == start[j] {
            v[j] -= if start[j] != 0.0 { 0.05 * start[j] } else { 2.5e-4 };
            bounds.project(&mut v);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| objective(v)).collect();
    let mut iterations = iterations_so_far;
    let mut converged = false;

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    while iterations < options.max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = values[n] - values[0];
        let diameter = simplex[1..]
            .iter()
            .map(|v| norm(&v.iter().zip(&simplex[0]).map(|(a, b)| a - b).collect::<Vec<_>>()))
            .fold(0.0, f64::max);
        if spread <= 1e-15 * (1.0 + values[0].abs()) && diameter <= options.step_tol * (1.0 + norm(&simplex[0])) {
            converged = true;
            break;
        }
        if diameter == 0.0 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (c - w))
                .collect();
            bounds.project(&mut p);
            p
        };
        let reflected = along(alpha);
        let fr = objective(&reflected);
        if fr < values[0] {
            let expanded = along(gamma);
            let fe = objective(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] { along(rho) } else { along(-rho) };
            let fc = objective(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = simplex[i]
                        .iter()
                        .zip(&simplex[0])
                        .map(|(v, b)| b + sigma * (v - b))
                        .collect();
                    values[i] = objective(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
        let best = values.iter().copied().fold(f64::INFINITY, f64::min);
        if best < *history.last().unwrap_or(&f64::INFINITY) {
            history.push(best);
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)))
        .unwrap_or(0);
    let mut x = simplex[best].clone();
    bounds.project(&mut x);
    let residuals = residual(&x);
    NlsSolution {
        sse: sum_sq(&residuals),
        x,
        residuals,
        iterations,
        converged,
        gradient_norm: f64::NAN,
        method: NlsMethod::NelderMead,
        sse_history: history,
    }
}
