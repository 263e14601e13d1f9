//! Fixed-point solver for Bellman problems in a small ball `B_δ(z)`.
//!
//! After rescaling `B_δ(z)` to `(−1, 1)` the mollified family is a small
//! perturbation of the flat operator, and the map
//! `w ↦ 𝓘[−min_a(D_a w + d_a)]`, with `𝓘` the flat Dirichlet solve, is a
//! contraction once `δ/ε` is small.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{
    mollify_coeff, KernelSpec, Modulated, Modulation, MollifiedKernel, MollifierSpec, Rescaled, XFactor,
};
use crate::operators::Coefficient;

use super::assembly::{check_dominance, solve_rows, Branch, Row, Rule, Scheme};
use super::{howard, report, to_grid, DirichletProblem, ProblemOperator, SolveReport};

/// The ball `B_δ(z)` and the mollification scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBall {
    pub center: f64,
    pub delta: f64,
    pub mollifier: MollifierSpec,
}

fn members(p: &DirichletProblem) -> Result<Vec<(KernelSpec, Coefficient)>> {
    match &p.operator {
        ProblemOperator::Linear { kernel, coefficient } => Ok(vec![(kernel.clone(), coefficient.clone())]),
        ProblemOperator::Bellman { family } => Ok(family
            .members
            .iter()
            .map(|m| (m.kernel.clone(), m.coefficient.clone()))
            .collect()),
        ProblemOperator::Extremal { .. } => Err(invalid("small-ball solver needs a finite kernel family")),
    }
}

/// Runs `f` on the rescaled mollified scheme: branch 0 is flat, branches
/// `1..` are the family members with `δ^σ c_a^ε` drifts.
fn with_scheme<R>(p: &DirichletProblem, ball: &SmallBall, f: impl FnOnce(&Scheme<'_>) -> Result<R>) -> Result<R> {
    p.validate()?;
    if !(ball.delta > 0.0) {
        return Err(invalid("ball radius must be positive"));
    }
    let sigma = p.operator.sigma();
    let fam = members(p)?;
    let mollified: Vec<MollifiedKernel> = fam
        .iter()
        .map(|(k, _)| MollifiedKernel::new(k.clone(), ball.mollifier))
        .collect();
    let rescaled: Vec<Rescaled<'_>> = mollified
        .iter()
        .map(|k| Rescaled {
            inner: k,
            center: ball.center,
            delta: ball.delta,
        })
        .collect();
    let scale = ball.delta.powf(sigma);
    let mut branches = vec![Branch {
        kernel: None,
        coeff: Box::new(|_| 0.0),
    }];
    for (k, (base, c)) in rescaled.iter().zip(&fam) {
        // flat members are already smooth and stay exactly flat
        let flat = *base.modulation() == Modulation::Flat && base.x_factor() == XFactor::None;
        let c = c.clone();
        let m = ball.mollifier;
        let (z, d) = (ball.center, ball.delta);
        branches.push(Branch {
            kernel: (!flat).then_some(k as &dyn Modulated),
            coeff: Box::new(move |x| scale * mollify_coeff(|s| c.eval(s), &m, z + d * x)),
        });
    }
    let scheme = Scheme::new(sigma, p.cells, p.r0_cells()?, &p.exterior, branches, Rule::Linear)?;
    f(&scheme)
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Iterates the flat-solve fixed-point map from `w = 0` until successive
/// iterates agree to the solver tolerance, recording contraction factors.
pub fn solve_contraction(p: &DirichletProblem, ball: &SmallBall) -> Result<SolveReport> {
    with_scheme(p, ball, |scheme| {
        let n = scheme.cells - 1;
        let flat = scheme.rows(0, None);
        check_dominance(&flat)?;
        let fam: Vec<Vec<Row>> = (1..scheme.branches.len()).map(|b| scheme.rows(b, None)).collect();
        let bnd = (scheme.tail.eval(-1.0), scheme.tail.eval(1.0));

        // deviation rows D_a, d_a
        let dev: Vec<Vec<Row>> = fam
            .iter()
            .map(|rows| {
                rows.iter()
                    .zip(&flat)
                    .map(|(r, f)| Row {
                        a: r.a.iter().zip(&f.a).map(|(x, y)| x - y).collect(),
                        rhs: r.rhs - f.rhs,
                    })
                    .collect()
            })
            .collect();

        let mut a_flat = DMatrix::<f64>::zeros(n, n);
        for (r, row) in flat.iter().enumerate() {
            for c in 0..n {
                a_flat[(r, c)] = row.a[c + 1];
            }
        }
        let inv = a_flat
            .clone()
            .try_inverse()
            .ok_or(Error::NonDominantMatrix { row: 0 })?;
        let d_norm = dev
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|r| r.a[1..=n].iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let bound = inf_norm(&inv) * d_norm;

        let tol = p.solver.tolerance;
        let mut w = scheme.with_boundary(&vec![0.0; n]);
        let mut factors = Vec::new();
        let mut history = Vec::new();
        let mut prev_step: Option<f64> = None;
        for it in 1..=p.solver.max_iterations {
            let rows: Vec<Row> = (0..n)
                .map(|r| {
                    let pert = dev.iter().map(|d| d[r].apply(&w)).fold(f64::INFINITY, f64::min);
                    Row {
                        a: flat[r].a.clone(),
                        rhs: flat[r].rhs + pert,
                    }
                })
                .collect();
            let next = scheme.with_boundary(&solve_rows(&rows, bnd)?);
            let step = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            history.push(step);
            if let Some(ps) = prev_step {
                if ps > 100.0 * tol {
                    let g = step / ps;
                    factors.push(g);
                    if g >= 1.0 {
                        return Err(Error::NoContraction { factor: g });
                    }
                }
            }
            w = next;
            if step <= tol {
                let sel: Vec<Row> = (0..n)
                    .map(|r| {
                        fam.iter()
                            .min_by(|x, y| x[r].apply(&w).total_cmp(&y[r].apply(&w)))
                            .expect("nonempty family")[r]
                            .clone()
                    })
                    .collect();
                let (raw, scaled) = howard::residuals(&sel, &w);
                return Ok(SolveReport {
                    solution: to_grid(w, &p.exterior)?,
                    residual: scaled,
                    raw_residual: raw,
                    iterations: it,
                    policy_trace: Vec::new(),
                    residual_history: history,
                    contraction_factors: factors,
                    contraction_bound: Some(bound),
                });
            }
            prev_step = Some(step);
        }
        Err(Error::MaxIterations {
            iterations: p.solver.max_iterations,
            residual: history.last().copied().unwrap_or(f64::INFINITY),
        })
    })
}

/// Policy iteration on the same rescaled mollified problem.
pub fn solve_small_ball_direct(p: &DirichletProblem, ball: &SmallBall) -> Result<SolveReport> {
    with_scheme(p, ball, |scheme| {
        let ids: Vec<usize> = (1..scheme.branches.len()).collect();
        let out = howard::solve(scheme, &ids, p.solver.tolerance, p.solver.max_iterations)?;
        report(p, out)
    })
}
