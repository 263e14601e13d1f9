//! Policy iteration on an assembled scheme.

use crate::error::{Error, Result};

use super::assembly::{check_dominance, solve_rows, Row, Rule, Scheme};

pub(crate) struct Outcome {
    /// Nodal values `0..=N`.
    pub u: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<Vec<usize>>,
    pub residual: f64,
    pub raw_residual: f64,
    pub history: Vec<f64>,
}

/// Sup of `|F_i|` and of `|F_i| / |a_ii|` over rows.
pub(crate) fn residuals(rows: &[Row], u: &[f64]) -> (f64, f64) {
    let mut raw = 0.0f64;
    let mut scaled = 0.0f64;
    for (r, row) in rows.iter().enumerate() {
        let f = row.apply(u).abs();
        raw = raw.max(f);
        scaled = scaled.max(f / row.a[r + 1].abs());
    }
    (raw, scaled)
}

fn boundary(scheme: &Scheme<'_>) -> (f64, f64) {
    (scheme.tail.eval(-1.0), scheme.tail.eval(1.0))
}

/// Solves `min_{a ∈ branches} (A_a u + r_a) = 0` for linear rules, or the
/// extremal equation of a single branch.
pub(crate) fn solve(scheme: &Scheme<'_>, branches: &[usize], tol: f64, max_iter: usize) -> Result<Outcome> {
    match scheme.rule {
        Rule::Linear => solve_family(scheme, branches, max_iter),
        Rule::Extremal { .. } => solve_extremal(scheme, branches[0], tol, max_iter),
    }
}

fn solve_family(scheme: &Scheme<'_>, branches: &[usize], max_iter: usize) -> Result<Outcome> {
    let n = scheme.cells - 1;
    let all: Vec<Vec<Row>> = branches.iter().map(|&b| scheme.rows(b, None)).collect();
    for rows in &all {
        check_dominance(rows)?;
    }
    let bnd = boundary(scheme);
    let mut policy = vec![0usize; n];
    let mut trace = Vec::new();
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let rows: Vec<Row> = (0..n).map(|r| all[policy[r]][r].clone()).collect();
        let interior = solve_rows(&rows, bnd)?;
        let u = scheme.with_boundary(&interior);
        trace.push(policy.clone());
        // improvement with lowest-index tie breaking
        let mut changed = false;
        let mut raw = 0.0f64;
        let mut scaled = 0.0f64;
        for r in 0..n {
            let vals: Vec<f64> = all.iter().map(|rows| rows[r].apply(&u)).collect();
            let best = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let diag = all[policy[r]][r].a[r + 1].abs();
            let scale = 1e-12 * diag * u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            if vals[policy[r]] > best + scale {
                policy[r] = vals.iter().position(|&v| v <= best + scale).unwrap_or(0);
                changed = true;
            }
            raw = raw.max(best.abs());
            scaled = scaled.max(best.abs() / all[policy[r]][r].a[r + 1].abs());
        }
        history.push(scaled);
        if !changed {
            return Ok(Outcome {
                u,
                iterations: it,
                trace,
                residual: scaled,
                raw_residual: raw,
                history,
            });
        }
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}

fn solve_extremal(scheme: &Scheme<'_>, branch: usize, tol: f64, max_iter: usize) -> Result<Outcome> {
    let bnd = boundary(scheme);
    let rows = scheme.rows(branch, None);
    check_dominance(&rows)?;
    let mut u = scheme.with_boundary(&solve_rows(&rows, bnd)?);
    let mut history = Vec::new();
    for it in 1..=max_iter {
        let rows = scheme.rows(branch, Some(&u));
        let (raw, scaled) = residuals(&rows, &u);
        history.push(scaled);
        if scaled <= tol {
            return Ok(Outcome {
                u,
                iterations: it,
                trace: Vec::new(),
                residual: scaled,
                raw_residual: raw,
                history,
            });
        }
        check_dominance(&rows)?;
        u = scheme.with_boundary(&solve_rows(&rows, bnd)?);
    }
    Err(Error::MaxIterations {
        iterations: max_iter,
        residual: history.last().copied().unwrap_or(f64::INFINITY),
    })
}
