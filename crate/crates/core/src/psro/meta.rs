use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::EmpiricalPayoffTable;
use crate::error::{Error, Result};

/// Iteration cap for the regret-matching Nash solver.
pub const NASH_MAX_ITERATIONS: usize = 1_000_000;
/// Target duality gap for the regret-matching Nash solver.
pub const NASH_TOLERANCE: f64 = 1e-6;
/// Replicator step size.
pub const PRD_STEP: f64 = 1e-3;
/// Exploration floor each replicator iterate is projected above.
pub const PRD_GAMMA: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetaSolver {
    Uniform,
    Nash,
    Prd,
}

impl MetaSolver {
    pub fn as_str(self) -> &'static str {
        match self {
            MetaSolver::Uniform => "uniform",
            MetaSolver::Nash => "nash",
            MetaSolver::Prd => "prd",
        }
    }
}

impl fmt::Display for MetaSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetaSolver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(MetaSolver::Uniform),
            "nash" => Ok(MetaSolver::Nash),
            "prd" => Ok(MetaSolver::Prd),
            other => Err(Error::config(format!("unknown meta_strategy_method `{other}`"))),
        }
    }
}

/// A distribution over each player's portfolio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaStrategy {
    pub probs: [Vec<f64>; 2],
}

impl MetaStrategy {
    pub fn uniform(rows: usize, cols: usize) -> Self {
        MetaStrategy { probs: [vec![1.0 / rows as f64; rows], vec![1.0 / cols as f64; cols]] }
    }
}

pub fn meta_solve(table: &EmpiricalPayoffTable, method: MetaSolver, prd_iterations: usize) -> Result<MetaStrategy> {
    let (rows, cols) = table.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::contract("meta_solve needs a non-empty payoff table"));
    }
    if table.cells().iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::config("payoff table contains non-finite entries"));
    }
    Ok(match method {
        MetaSolver::Uniform => MetaStrategy::uniform(rows, cols),
        MetaSolver::Nash => nash(table.cells(), NASH_TOLERANCE, NASH_MAX_ITERATIONS),
        MetaSolver::Prd => prd(table.cells(), prd_iterations, PRD_STEP, PRD_GAMMA),
    })
}

/// Row player's payoff against each column mixture entry: `A y`.
fn row_payoffs(a: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(y).map(|(v, p)| v * p).sum()).collect()
}

/// Row player's payoff for each column: `xᵀ A`.
fn col_payoffs(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a[0].len()];
    for (row, &p) in a.iter().zip(x) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += p * v;
        }
    }
    out
}

/// Sum of both players' best-deviation gains in the zero-sum matrix game.
pub fn matrix_nash_conv(a: &[Vec<f64>], strategy: &MetaStrategy) -> f64 {
    let [x, y] = &strategy.probs;
    let value: f64 = row_payoffs(a, y).iter().zip(x).map(|(u, p)| u * p).sum();
    let best_row = row_payoffs(a, y).into_iter().fold(f64::NEG_INFINITY, f64::max);
    let best_col = col_payoffs(a, x).into_iter().fold(f64::INFINITY, f64::min);
    (best_row - value) + (value - best_col)
}

fn rm_plus_policy(q: &[f64]) -> Vec<f64> {
    let total: f64 = q.iter().sum();
    if total > 0.0 {
        q.iter().map(|v| v / total).collect()
    } else {
        vec![1.0 / q.len() as f64; q.len()]
    }
}

/// Regret matching+ with alternating updates and linearly weighted averaging, stopped
/// once the average's gap is below `tol`. If the cap is reached first, the exact
/// equilibrium on the average's support replaces it when that certifies a smaller gap.
fn nash(a: &[Vec<f64>], tol: f64, max_iterations: usize) -> MetaStrategy {
    let (rows, cols) = (a.len(), a[0].len());
    let mut qx = vec![0.0; rows];
    let mut qy = vec![0.0; cols];
    let mut sx = vec![0.0; rows];
    let mut sy = vec![0.0; cols];
    let mut y = vec![1.0 / cols as f64; cols];
    let normalized = |s: &[f64]| {
        let total: f64 = s.iter().sum();
        s.iter().map(|v| v / total).collect::<Vec<f64>>()
    };
    for t in 1..=max_iterations {
        let u = row_payoffs(a, &y);
        let x = rm_plus_policy(&qx);
        let ev: f64 = u.iter().zip(&x).map(|(u, p)| u * p).sum();
        for (q, u) in qx.iter_mut().zip(&u) {
            *q = (*q + u - ev).max(0.0);
        }
        let x = rm_plus_policy(&qx);
        let w = col_payoffs(a, &x);
        let ev: f64 = w.iter().zip(&y).map(|(w, p)| w * p).sum();
        for (q, w) in qy.iter_mut().zip(&w) {
            *q = (*q + ev - w).max(0.0);
        }
        y = rm_plus_policy(&qy);
        for (s, p) in sx.iter_mut().zip(&x) {
            *s += t as f64 * p;
        }
        for (s, p) in sy.iter_mut().zip(&y) {
            *s += t as f64 * p;
        }
        if t % 16 == 0 && matrix_nash_conv(a, &MetaStrategy { probs: [normalized(&sx), normalized(&sy)] }) < tol {
            break;
        }
    }
    let avg = MetaStrategy { probs: [normalized(&sx), normalized(&sy)] };
    let gap = matrix_nash_conv(a, &avg);
    if gap < tol {
        return avg;
    }
    [1e-2, 1e-3, 1e-4]
        .iter()
        .filter_map(|&thr| support_equilibrium(a, &avg, thr))
        .map(|m| (matrix_nash_conv(a, &m), m))
        .filter(|(g, _)| *g < gap)
        .min_by(|l, r| l.0.total_cmp(&r.0))
        .map_or(avg, |(_, m)| m)
}

/// Solves the indifference conditions on the support of `guess` (entries above
/// `threshold`). Returns `None` when the supports differ in size, the system is
/// singular, or the solution leaves the simplex.
fn support_equilibrium(a: &[Vec<f64>], guess: &MetaStrategy, threshold: f64) -> Option<MetaStrategy> {
    let rows: Vec<usize> = (0..a.len()).filter(|&i| guess.probs[0][i] > threshold).collect();
    let cols: Vec<usize> = (0..a[0].len()).filter(|&j| guess.probs[1][j] > threshold).collect();
    if rows.len() != cols.len() || rows.is_empty() {
        return None;
    }
    let k = rows.len();
    // Unknowns (p_1..p_k, v): payoffs equal v on the opponent's support, probabilities sum to 1.
    let solve_side = |entry: &dyn Fn(usize, usize) -> f64| {
        let mut m = vec![vec![0.0; k + 2]; k + 1];
        for (r, row) in m.iter_mut().enumerate().take(k) {
            for (c, cell) in row.iter_mut().enumerate().take(k) {
                *cell = entry(r, c);
            }
            row[k] = -1.0;
        }
        for cell in m[k].iter_mut().take(k) {
            *cell = 1.0;
        }
        m[k][k + 1] = 1.0;
        gauss_solve(m)
    };
    let y = solve_side(&|r, c| a[rows[r]][cols[c]])?;
    let x = solve_side(&|r, c| a[rows[c]][cols[r]])?;
    let expand = |sol: &[f64], support: &[usize], n: usize| -> Option<Vec<f64>> {
        let mut out = vec![0.0; n];
        for (&idx, &p) in support.iter().zip(sol) {
            if !(p >= -1e-12) {
                return None;
            }
            out[idx] = p.max(0.0);
        }
        let total: f64 = out.iter().sum();
        Some(out.into_iter().map(|p| p / total).collect())
    };
    Some(MetaStrategy { probs: [expand(&x, &rows, a.len())?, expand(&y, &cols, a[0].len())?] })
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)` matrix.
fn gauss_solve(mut m: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = m.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    let mut sol = vec![0.0; n];
    for r in (0..n).rev() {
        let tail: f64 = (r + 1..n).map(|c| m[r][c] * sol[c]).sum();
        sol[r] = (m[r][n] - tail) / m[r][r];
    }
    sol.iter().all(|v| v.is_finite()).then_some(sol)
}

/// Clamps below at `gamma` and renormalizes.
fn project(x: &mut [f64], gamma: f64) {
    for v in x.iter_mut() {
        *v = v.max(gamma);
    }
    let total: f64 = x.iter().sum();
    for v in x.iter_mut() {
        *v /= total;
    }
}

/// Projected replicator dynamics from uniform; returns the average iterate.
fn prd(a: &[Vec<f64>], iterations: usize, step: f64, gamma: f64) -> MetaStrategy {
    let (rows, cols) = (a.len(), a[0].len());
    let mut x = vec![1.0 / rows as f64; rows];
    let mut y = vec![1.0 / cols as f64; cols];
    let mut sx = vec![0.0; rows];
    let mut sy = vec![0.0; cols];
    for _ in 0..iterations {
        let u = row_payoffs(a, &y);
        let w = col_payoffs(a, &x);
        let ux: f64 = u.iter().zip(&x).map(|(u, p)| u * p).sum();
        let wy: f64 = w.iter().zip(&y).map(|(w, p)| w * p).sum();
        for (p, u) in x.iter_mut().zip(&u) {
            *p += step * *p * (u - ux);
        }
        // Column player receives the negated payoffs.
        for (p, w) in y.iter_mut().zip(&w) {
            *p += step * *p * (wy - w);
        }
        project(&mut x, gamma);
        project(&mut y, gamma);
        for (s, p) in sx.iter_mut().zip(&x) {
            *s += p;
        }
        for (s, p) in sy.iter_mut().zip(&y) {
            *s += p;
        }
    }
    if iterations == 0 {
        return MetaStrategy { probs: [x, y] };
    }
    let n = iterations as f64;
    MetaStrategy { probs: [sx.iter().map(|s| s / n).collect(), sy.iter().map(|s| s / n).collect()] }
}
