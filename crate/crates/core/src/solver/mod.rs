//! Dirichlet problems on `(−1, 1)` with exterior data: linear solves,
//! policy iteration for Bellman and extremal equations, the small-ball
//! fixed-point solver, ball-replacement sweeps and barrier checks.

mod assembly;
mod barrier;
mod contraction;
mod exterior;
mod howard;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{GridFunction, Interpolation, TailSpec};
use crate::kernels::{KernelSpec, Modulated};
use crate::operators::{Coefficient, OperatorFamily, QuadratureConfig, Sign};
use crate::params::EllipticityParams;

pub use barrier::{barrier_check, barrier_refinement, BarrierReport};
pub use contraction::{solve_contraction, solve_small_ball_direct, SmallBall};
pub use sweep::ball_update_sweep;

use assembly::{Branch, Rule, Scheme};

/// The operator of a Dirichlet problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemOperator {
    /// `L u + c = 0`.
    Linear {
        kernel: KernelSpec,
        #[serde(default)]
        coefficient: Coefficient,
    },
    /// `M^± u + c = 0`.
    Extremal {
        sign: Sign,
        sigma: f64,
        params: EllipticityParams,
        #[serde(default)]
        coefficient: Coefficient,
    },
    /// `min_a (L_a u + c_a) = 0`.
    Bellman { family: OperatorFamily },
}

impl ProblemOperator {
    pub fn sigma(&self) -> f64 {
        match self {
            ProblemOperator::Linear { kernel, .. } => kernel.sigma(),
            ProblemOperator::Extremal { sigma, .. } => *sigma,
            ProblemOperator::Bellman { family } => family.sigma(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Bound on `|F_i(u)| / |a_ii|`.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_iter")]
    pub max_iterations: usize,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_iter() -> usize {
    50
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tol(),
            max_iterations: default_iter(),
        }
    }
}

/// Dirichlet problem on `(−1, 1)` with `cells` uniform cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletProblem {
    pub operator: ProblemOperator,
    /// Data on `ℝ ∖ (−1, 1)`.
    pub exterior: TailSpec,
    pub cells: usize,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl DirichletProblem {
    pub fn new(operator: ProblemOperator, exterior: TailSpec, cells: usize) -> Result<Self> {
        let p = Self {
            operator,
            exterior,
            cells,
            quadrature: QuadratureConfig::default(),
            solver: SolverConfig::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.cells as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells < 2 {
            return Err(invalid("need at least two cells"));
        }
        self.exterior.validate(1.0)?;
        if self.exterior.sup_abs().is_none() {
            return Err(invalid("exterior data must be bounded"));
        }
        self.quadrature.validate(self.spacing())?;
        self.r0_cells()?;
        match &self.operator {
            ProblemOperator::Linear { coefficient, .. } => coefficient.validate(),
            ProblemOperator::Extremal {
                sigma,
                params,
                coefficient,
                ..
            } => {
                crate::params::check_sigma(*sigma)?;
                params.validate()?;
                coefficient.validate()
            }
            ProblemOperator::Bellman { family } => family.validate(),
        }
    }

    fn r0_cells(&self) -> Result<usize> {
        match self.quadrature.r0 {
            None => Ok(4),
            Some(r0) => {
                let c = r0 / self.spacing();
                if (c - c.round()).abs() > 1e-9 || c.round() < 2.0 {
                    return Err(invalid(format!("r0 = {r0} must be a whole number (≥ 2) of cells")));
                }
                Ok(c.round() as usize)
            }
        }
    }

    /// Discrete scheme and the branch indices of the operator.
    fn scheme(&self) -> Result<(Scheme<'_>, Vec<usize>)> {
        self.validate()?;
        let sigma = self.operator.sigma();
        let coeff = |c: &Coefficient| -> Box<dyn Fn(f64) -> f64 + Sync + '_> {
            let c = c.clone();
            Box::new(move |x| c.eval(x))
        };
        let (branches, rule) = match &self.operator {
            ProblemOperator::Linear { kernel, coefficient } => (
                vec![Branch {
                    kernel: Some(kernel as &dyn crate::kernels::Modulated),
                    coeff: coeff(coefficient),
                }],
                Rule::Linear,
            ),
            ProblemOperator::Extremal {
                sign,
                params,
                coefficient,
                ..
            } => {
                let rule = match sign.response(params) {
                    crate::operators::Response::Extremal { pos, neg } => Rule::Extremal { pos, neg },
                    _ => unreachable!("extremal response"),
                };
                (
                    vec![Branch {
                        kernel: None,
                        coeff: coeff(coefficient),
                    }],
                    rule,
                )
            }
            ProblemOperator::Bellman { family } => (
                family
                    .members
                    .iter()
                    .map(|m| Branch {
                        kernel: Some(&m.kernel as &dyn crate::kernels::Modulated),
                        coeff: coeff(&m.coefficient),
                    })
                    .collect(),
                Rule::Linear,
            ),
        };
        let ids = (0..branches.len()).collect();
        let scheme = Scheme::new(sigma, self.cells, self.r0_cells()?, &self.exterior, branches, rule)?;
        Ok((scheme, ids))
    }
}

/// Result of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: GridFunction,
    /// `sup_i |F_i(u)| / |a_ii|`.
    pub residual: f64,
    /// `sup_i |F_i(u)|`.
    pub raw_residual: f64,
    pub iterations: usize,
    /// Member chosen at each interior node, per iteration (Bellman families).
    pub policy_trace: Vec<Vec<usize>>,
    /// Residual after each iteration or pass.
    pub residual_history: Vec<f64>,
    /// Ratios of successive fixed-point increments.
    pub contraction_factors: Vec<f64>,
    /// `‖A⁻¹‖ · max_a ‖D_a‖` for the fixed-point map.
    pub contraction_bound: Option<f64>,
}

impl SolveReport {
    /// Largest measured contraction factor.
    pub fn contraction_factor(&self) -> Option<f64> {
        self.contraction_factors.iter().copied().reduce(f64::max)
    }
}

fn to_grid(values: Vec<f64>, tail: &TailSpec) -> Result<GridFunction> {
    Ok(GridFunction::new(1.0, values, tail.clone())?.with_interpolation(Interpolation::Linear))
}

fn report(p: &DirichletProblem, out: howard::Outcome) -> Result<SolveReport> {
    Ok(SolveReport {
        solution: to_grid(out.u, &p.exterior)?,
        residual: out.residual,
        raw_residual: out.raw_residual,
        iterations: out.iterations,
        policy_trace: out.trace,
        residual_history: out.history,
        contraction_factors: Vec::new(),
        contraction_bound: None,
    })
}

/// Solves `L u + c = 0` in `(−1, 1)`, `u = g` outside.
pub fn solve_linear_dirichlet(p: &DirichletProblem) -> Result<SolveReport> {
    if !matches!(p.operator, ProblemOperator::Linear { .. }) {
        return Err(invalid("solve_linear_dirichlet needs a single linear kernel"));
    }
    let (scheme, ids) = p.scheme()?;
    let out = howard::solve(&scheme, &ids, p.solver.tolerance, 1)?;
    report(p, out)
}

/// Policy iteration for Bellman families and extremal operators (a linear
/// operator is a family of one).
pub fn solve_bellman_dirichlet(p: &DirichletProblem) -> Result<SolveReport> {
    let (scheme, ids) = p.scheme()?;
    let out = howard::solve(&scheme, &ids, p.solver.tolerance, p.solver.max_iterations)?;
    report(p, out)
}

/// Dispatches on the operator kind.
pub fn solve_dirichlet(p: &DirichletProblem) -> Result<SolveReport> {
    match p.operator {
        ProblemOperator::Linear { .. } => solve_linear_dirichlet(p),
        _ => solve_bellman_dirichlet(p),
    }
}

/// Solves the linear system of a frozen member choice: interior node `i`
/// (1-based) uses member `policy[i − 1]`. Returns nodal values `0..=N`.
pub fn solve_fixed_policy(p: &DirichletProblem, policy: &[usize]) -> Result<Vec<f64>> {
    let (scheme, ids) = p.scheme()?;
    if !matches!(scheme.rule, Rule::Linear) {
        return Err(invalid("fixed policies apply to linear families"));
    }
    if policy.len() != scheme.cells - 1 || policy.iter().any(|&a| a >= ids.len()) {
        return Err(invalid("policy must pick a member for every interior node"));
    }
    let rows: Vec<_> = policy
        .iter()
        .enumerate()
        .map(|(r, &a)| scheme.row(ids[a], r + 1, None))
        .collect();
    let bnd = (scheme.tail.eval(-1.0), scheme.tail.eval(1.0));
    Ok(scheme.with_boundary(&assembly::solve_rows(&rows, bnd)?))
}

/// Residual `sup_i |F_i(u)| / |a_ii|` of the discrete equation at the nodal
/// values of `u` (boundary nodes taken from the exterior data).
pub fn discrete_residual(p: &DirichletProblem, u: &GridFunction) -> Result<f64> {
    let (scheme, ids) = p.scheme()?;
    let nodal = nodal_values(&scheme, u)?;
    Ok(sweep::global_residual(&scheme, &ids, &nodal).1)
}

fn nodal_values(scheme: &Scheme<'_>, u: &GridFunction) -> Result<Vec<f64>> {
    let interior: Vec<f64> = (1..scheme.cells).map(|i| u.eval(scheme.node(i))).collect();
    Ok(scheme.with_boundary(&interior))
}
