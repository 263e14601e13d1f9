//! Block replacement on balls `B_δ(z)`: each ball is re-solved with the
//! current values outside it held fixed.

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;

use super::assembly::{Row, Rule, Scheme};
use super::{nodal_values, to_grid, DirichletProblem, SolveReport};

/// `(sup_i |F_i(u)|, sup_i |F_i(u)| / |a_ii|)` for the scheme's equation.
pub(crate) fn global_residual(scheme: &Scheme<'_>, ids: &[usize], u: &[f64]) -> (f64, f64) {
    (1..scheme.cells)
        .map(|i| {
            let (_, row) = selected_row(scheme, ids, i, u);
            let f = row.apply(u).abs();
            (f, f / row.a[i].abs())
        })
        .fold((0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)))
}

/// The row attaining the equation at `u`: the minimizing member for
/// families, the sign-selected weights for extremal rules.
fn selected_row(scheme: &Scheme<'_>, ids: &[usize], i: usize, u: &[f64]) -> (usize, Row) {
    match scheme.rule {
        Rule::Extremal { .. } => (0, scheme.row(ids[0], i, Some(u))),
        Rule::Linear => {
            let mut best: Option<(f64, usize, Row)> = None;
            for (pos, &b) in ids.iter().enumerate() {
                let row = scheme.row(b, i, None);
                let v = row.apply(u);
                if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
                    best = Some((v, pos, row));
                }
            }
            let (_, pos, row) = best.expect("nonempty family");
            (pos, row)
        }
    }
}

/// Solves the rows of `block` for their own nodes, others fixed.
fn local_solve(block: &[(usize, Row)], u: &mut [f64]) -> Result<()> {
    let m = block.len();
    let first = block[0].0;
    let mut a = nalgebra::DMatrix::<f64>::zeros(m, m);
    let mut b = nalgebra::DVector::<f64>::zeros(m);
    for (r, (_, row)) in block.iter().enumerate() {
        let mut rhs = row.rhs;
        for (j, &v) in row.a.iter().enumerate() {
            if j >= first && j < first + m {
                a[(r, j - first)] = v;
            } else {
                rhs += v * u[j];
            }
        }
        b[r] = -rhs;
    }
    let x = a.lu().solve(&b).ok_or(Error::NonDominantMatrix { row: first })?;
    for (r, v) in x.iter().enumerate() {
        u[first + r] = *v;
    }
    Ok(())
}

/// Sweeps balls of radius `delta` over the interior `passes` times,
/// replacing `u` on each ball by the local solution. The residual after
/// every pass is recorded.
pub fn ball_update_sweep(u: &GridFunction, p: &DirichletProblem, delta: f64, passes: usize) -> Result<SolveReport> {
    let (scheme, ids) = p.scheme()?;
    let n = scheme.cells;
    let h = scheme.h();
    let k = (delta / h).round() as usize;
    if k < 1 || delta >= 1.0 {
        return Err(invalid(format!(
            "ball radius {delta} must hold a node and fit in (−1, 1)"
        )));
    }
    let mut nodal = nodal_values(&scheme, u)?;
    let max_local = p.solver.max_iterations;
    let tol = p.solver.tolerance;
    let mut history = Vec::with_capacity(passes);
    for _ in 0..passes {
        let mut c = 1;
        while c < n {
            let lo = (c + 1).saturating_sub(k).max(1);
            let hi = (c + k - 1).min(n - 1);
            let mut previous: Option<Vec<usize>> = None;
            for _ in 0..max_local.max(1) {
                let mut choice = Vec::with_capacity(hi - lo + 1);
                let block: Vec<(usize, Row)> = (lo..=hi)
                    .map(|i| {
                        let (pos, row) = selected_row(&scheme, &ids, i, &nodal);
                        choice.push(pos);
                        (i, row)
                    })
                    .collect();
                let local_res = block
                    .iter()
                    .map(|(i, row)| row.apply(&nodal).abs() / row.a[*i].abs())
                    .fold(0.0, f64::max);
                let stable = matches!(scheme.rule, Rule::Linear) && previous.as_ref() == Some(&choice);
                if local_res <= 0.1 * tol || stable {
                    break;
                }
                local_solve(&block, &mut nodal)?;
                if matches!(scheme.rule, Rule::Linear) && ids.len() == 1 {
                    break;
                }
                previous = Some(choice);
            }
            c += k;
        }
        history.push(global_residual(&scheme, &ids, &nodal).1);
    }
    let (raw_residual, residual) = global_residual(&scheme, &ids, &nodal);
    Ok(SolveReport {
        solution: to_grid(nodal, &p.exterior)?,
        residual,
        raw_residual,
        iterations: passes,
        policy_trace: Vec::new(),
        residual_history: history,
        contraction_factors: Vec::new(),
        contraction_bound: None,
    })
}
