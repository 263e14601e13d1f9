//! The oscillating-data counterexamples: bounded exterior data
//! `sign sin(mπx)` beyond a zero collar, a rough kernel `K_m` (linear case)
//! or `M⁺` (nonlinear case), and the quantities whose behaviour in `m`
//! rules out a uniform `C^{σ+α}` estimate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, TailSpec};
use crate::holder::{seminorm, Region, SeminormQuery};
use crate::kernels::KernelSpec;
use crate::operators::{linear_apply, Coefficient, QuadratureConfig, Sign};
use crate::par;
use crate::params::EllipticityParams;
use crate::solver::{
    barrier_check, solve_bellman_dirichlet, solve_linear_dirichlet, BarrierReport, DirichletProblem, ProblemOperator,
    SolverConfig,
};

/// Outer edge of the zero collar.
pub const COLLAR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    Linear,
    Nonlinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub kind: Kind,
    pub sigma: f64,
    /// Ellipticity of `M⁺` (nonlinear case).
    #[serde(default = "default_params")]
    pub params: EllipticityParams,
    pub ms: Vec<u32>,
    pub alpha: f64,
    /// Cells on `[−1, 1]`.
    pub cells: usize,
    /// Exponent of the boundary envelope.
    #[serde(default = "default_barrier")]
    pub barrier_exponent: f64,
    /// Re-solve the largest `m` with half the spacing.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_params() -> EllipticityParams {
    EllipticityParams::new(1.0, 2.0).expect("valid defaults")
}

fn default_barrier() -> f64 {
    0.1
}

impl CounterexampleConfig {
    pub fn new(kind: Kind, sigma: f64, ms: Vec<u32>, alpha: f64, cells: usize) -> Result<Self> {
        let c = Self {
            kind,
            sigma,
            params: default_params(),
            ms,
            alpha,
            cells,
            barrier_exponent: default_barrier(),
            refine: false,
            quadrature: QuadratureConfig::default(),
            solver: SolverConfig::default(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        crate::params::check_sigma(self.sigma)?;
        self.params.validate()?;
        if self.kind == Kind::Nonlinear && !(self.params.lambda < self.params.big_lambda) {
            return Err(invalid("nonlinear counterexample needs lambda < Lambda"));
        }
        if self.ms.is_empty() || self.ms.contains(&0) {
            return Err(invalid("m values must be positive integers"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        let m_max = *self.ms.iter().max().expect("nonempty") as usize;
        // h ≤ 1/(8m): eight cells per half-period near the collar
        if self.cells < 16 * m_max || !self.cells.is_multiple_of(2) {
            return Err(invalid(format!(
                "{} cells do not resolve m = {m_max} (need an even count ≥ {})",
                self.cells,
                16 * m_max
            )));
        }
        if !(self.barrier_exponent > 0.0) {
            return Err(invalid("barrier exponent must be positive"));
        }
        Ok(())
    }
}

/// `K_m`: flat on `|y| < 1`, `2 + sign cos(mπy)` beyond.
pub fn kernel(sigma: f64, m: u32) -> Result<KernelSpec> {
    KernelSpec::oscillating(sigma, m)
}

/// Exterior data: zero on the collar, `sign sin(mπx)` beyond.
pub fn exterior(m: u32) -> TailSpec {
    TailSpec::collar_sign_sin(1.0, COLLAR, m)
}

fn problem(cfg: &CounterexampleConfig, m: u32, cells: usize) -> Result<DirichletProblem> {
    let operator = match cfg.kind {
        Kind::Linear => ProblemOperator::Linear {
            kernel: kernel(cfg.sigma, m)?,
            coefficient: Coefficient::default(),
        },
        Kind::Nonlinear => ProblemOperator::Extremal {
            sign: Sign::Plus,
            sigma: cfg.sigma,
            params: cfg.params,
            coefficient: Coefficient::default(),
        },
    };
    let mut p = DirichletProblem::new(operator, exterior(m), cells)?;
    p.quadrature = cfg.quadrature;
    p.solver = cfg.solver;
    p.validate()?;
    Ok(p)
}

/// `L_m u = 0` in `(−1, 1)` with the oscillating data, for the first `m`.
pub fn build_linear(cfg: &CounterexampleConfig) -> Result<DirichletProblem> {
    if cfg.kind != Kind::Linear {
        return Err(invalid("build_linear needs kind = linear"));
    }
    cfg.validate()?;
    problem(cfg, cfg.ms[0], cfg.cells)
}

/// `M⁺ u = 0` in `(−1, 1)` with the oscillating data, for the first `m`.
pub fn build_nonlinear(cfg: &CounterexampleConfig) -> Result<DirichletProblem> {
    if cfg.kind != Kind::Nonlinear {
        return Err(invalid("build_nonlinear needs kind = nonlinear"));
    }
    cfg.validate()?;
    problem(cfg, cfg.ms[0], cfg.cells)
}

/// `u = u⁽¹⁾ + u⁽²⁾`: `u⁽¹⁾` keeps the values on `[−1, 1]` with a zero
/// tail, `u⁽²⁾` is zero on `[−1, 1]` and carries the exterior data.
pub fn split_solution(u: &GridFunction) -> Result<(GridFunction, GridFunction)> {
    let x = u.halfwidth();
    let u1 = u.clone().with_tail(TailSpec::zero(x))?;
    let u2 = u.with_values(vec![0.0; u.cells() + 1])?;
    Ok((u1, u2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub m: u32,
    /// `L_m u⁽²⁾(0)`; zero by odd symmetry.
    pub at_zero: f64,
    /// `L_m u⁽²⁾(1/(2m))`.
    pub at_half: f64,
    /// Large-`m` limit of `at_half`.
    pub limit: f64,
    pub deviation: f64,
}

/// Limit of `L_m u⁽²⁾(1/(2m))` under the `(2−σ)|y|^{−1−σ}` normalization:
/// `(2−σ) ∫_{|y|>2} |y|^{−1−σ} dy = (2−σ) 2^{1−σ}/σ`.
pub fn oscillation_limit(sigma: f64) -> f64 {
    (2.0 - sigma) * 2f64.powf(1.0 - sigma) / sigma
}

/// `L_m u⁽²⁾` at `0` and `1/(2m)` by exact piecewise quadrature.
pub fn oscillation_identities(cfg: &CounterexampleConfig, u2: &GridFunction, m: u32) -> Result<OscillationReport> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    let k = kernel(cfg.sigma, m)?;
    let at_zero = linear_apply(u2, &k, 0.0, &cfg.quadrature)?;
    let at_half = linear_apply(u2, &k, 0.5 / m as f64, &cfg.quadrature)?;
    let limit = oscillation_limit(cfg.sigma);
    Ok(OscillationReport {
        m,
        at_zero,
        at_half,
        limit,
        deviation: (at_half - limit).abs(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSample {
    pub y: f64,
    pub delta2: f64,
    /// Weight selected by the sign of `δ²u`.
    pub weight: f64,
    pub expected: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearReport {
    pub m: u32,
    pub u_at_zero: f64,
    pub u_at_half: f64,
    /// `1 − sup_{[−1/2, 1/2]} u`.
    pub tau: f64,
    /// `b_m` at `|y| > 2`, expected `λ`.
    pub b: Vec<WeightSample>,
    /// `b̃_m` at `|y| > 2 + 1/(2m)`, expected the closed form.
    pub b_tilde: Vec<WeightSample>,
    pub pass: bool,
}

/// Sample points `|y| > from` off the jump set of `sign cos(mπy)`.
fn weight_samples(m: u32, from: f64, count: usize) -> Vec<f64> {
    let mf = m as f64;
    let start = (from * mf).ceil();
    (0..count)
        .map(|k| {
            // Fractional parts of m|y| stay clear of 0 and 1/2, where the data
            // and the kernel switch sign.
            const FRAC: [f64; 4] = [0.15, 0.3, 0.65, 0.8];
            let y = (start + (k / 2) as f64 + FRAC[(k / 2) % 4]) / mf;
            if k % 2 == 0 {
                y
            } else {
                -y
            }
        })
        .collect()
}

/// `u_m(0)`, the measured `τ`, and the weights `b_m`, `b̃_m` against their
/// predicted values.
pub fn nonlinear_identities(cfg: &CounterexampleConfig, u: &GridFunction, m: u32) -> Result<NonlinearReport> {
    if m == 0 {
        return Err(invalid("m must be positive"));
    }
    let EllipticityParams { lambda, big_lambda, .. } = cfg.params;
    let choose = |d: f64| if d > 0.0 { big_lambda } else { lambda };
    let half = 0.5 / m as f64;
    let sup = u
        .nodes()
        .zip(u.values())
        .filter(|(x, _)| x.abs() <= 0.5 + 1e-12)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);

    let b: Vec<WeightSample> = weight_samples(m, COLLAR, 20)
        .into_iter()
        .map(|y| {
            let d = u.delta2(0.0, y);
            let weight = choose(d);
            WeightSample {
                y,
                delta2: d,
                weight,
                expected: lambda,
                ok: d <= 0.0 && weight == lambda,
            }
        })
        .collect();
    let b_tilde: Vec<WeightSample> = weight_samples(m, COLLAR + half, 20)
        .into_iter()
        .map(|y| {
            let d = u.delta2(half, y);
            let weight = choose(d);
            let sc = crate::grid::sign_cos_pi(m as f64 * y);
            let expected = lambda + 0.5 * (big_lambda - lambda) * (1.0 + sc);
            WeightSample {
                y,
                delta2: d,
                weight,
                expected,
                ok: weight == expected,
            }
        })
        .collect();
    let u_at_zero = u.eval(0.0);
    let pass = b.iter().chain(&b_tilde).all(|s| s.ok) && u_at_zero >= -1e-8;
    Ok(NonlinearReport {
        m,
        u_at_zero,
        u_at_half: u.eval(half),
        tau: 1.0 - sup,
        b,
        b_tilde,
        pass,
    })
}

/// Per-`m` entry of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupEntry {
    pub m: u32,
    pub sup_norm: f64,
    /// `[u_m]_{C^α([−1, 1])}`.
    pub calpha_seminorm: f64,
    /// `[u_m]_{C^{σ+α}(−1/2, 1/2)}`.
    pub csigma_alpha_seminorm: f64,
    pub oscillation: OscillationReport,
    pub nonlinear: Option<NonlinearReport>,
    pub barrier: BarrierReport,
    /// `[L_m u⁽¹⁾]_{C^{α/2}(−1/4, 1/4)}`.
    pub claim_lhs: f64,
    /// `‖u⁽¹⁾‖_{C^{σ+α}(−1/2,1/2)} + ‖u⁽¹⁾‖_{C^α}`.
    pub claim_rhs: f64,
    /// Largest odd-symmetry defect `|u(x) + u(−x)|` (linear case).
    pub odd_defect: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub m: u32,
    pub cells: usize,
    pub coarse: f64,
    pub fine: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub kind: Kind,
    pub sigma: f64,
    pub alpha: f64,
    pub cells: usize,
    pub entries: Vec<BlowupEntry>,
    /// Least-squares slope of `log [u_m]_{C^{σ+α}}` against `log m`.
    pub growth_rate: Option<f64>,
    pub refinement: Option<Refinement>,
}

impl BlowupReport {
    /// CSV with columns
    /// `m,sup_norm,calpha_seminorm,csigma_alpha_seminorm,id_at_zero,id_at_half_over_m`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "m",
            "sup_norm",
            "calpha_seminorm",
            "csigma_alpha_seminorm",
            "id_at_zero",
            "id_at_half_over_m",
        ])?;
        for e in &self.entries {
            out.write_record(&[
                e.m.to_string(),
                e.sup_norm.to_string(),
                e.calpha_seminorm.to_string(),
                e.csigma_alpha_seminorm.to_string(),
                e.oscillation.at_zero.to_string(),
                e.oscillation.at_half.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn interval(a: f64, b: f64) -> Region {
    Region::Interval { a, b }
}

fn order_seminorm(cfg: &CounterexampleConfig, u: &GridFunction) -> Result<f64> {
    seminorm(u, &SeminormQuery::new(cfg.sigma + cfg.alpha, interval(-0.5, 0.5)))
}

fn sup_abs(u: &GridFunction) -> f64 {
    u.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Solves the counterexample for one `m`.
pub fn solve(cfg: &CounterexampleConfig, m: u32, cells: usize) -> Result<crate::solver::SolveReport> {
    let p = problem(cfg, m, cells)?;
    match cfg.kind {
        Kind::Linear => solve_linear_dirichlet(&p),
        Kind::Nonlinear => solve_bellman_dirichlet(&p),
    }
}

fn entry(cfg: &CounterexampleConfig, m: u32) -> Result<BlowupEntry> {
    let sol = solve(cfg, m, cfg.cells)?;
    let u = &sol.solution;
    let (u1, u2) = split_solution(u)?;
    let calpha = seminorm(u, &SeminormQuery::new(cfg.alpha, interval(-1.0, 1.0)))?;
    let csa = order_seminorm(cfg, u)?;

    // Claim cross-check on (−1/4, 1/4)
    let k = kernel(cfg.sigma, m)?;
    let h = u.spacing();
    let half = (0.25 / h).round() as i64;
    let stride = (half / 16).max(1);
    let xs: Vec<f64> = (-half..=half).step_by(stride as usize).map(|i| i as f64 * h).collect();
    let lu = par::try_map_range(xs.len(), |i| linear_apply(&u1, &k, xs[i], &cfg.quadrature))?;
    let claim_lhs = holder_of_samples(&xs, &lu, 0.5 * cfg.alpha);
    let claim_rhs = 2.0 * sup_abs(&u1) + csa + calpha;

    let odd_defect = match cfg.kind {
        Kind::Linear => {
            let v = u.values();
            (0..v.len())
                .map(|i| (v[i] + v[v.len() - 1 - i]).abs())
                .fold(0.0, f64::max)
        }
        Kind::Nonlinear => f64::NAN,
    };
    Ok(BlowupEntry {
        m,
        sup_norm: sup_abs(u),
        calpha_seminorm: calpha,
        csigma_alpha_seminorm: csa,
        oscillation: oscillation_identities(cfg, &u2, m)?,
        nonlinear: match cfg.kind {
            Kind::Linear => None,
            Kind::Nonlinear => Some(nonlinear_identities(cfg, u, m)?),
        },
        barrier: barrier_check(u, cfg.barrier_exponent, (-1.0, 1.0)),
        claim_lhs,
        claim_rhs,
        odd_defect,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

/// `sup |f_i − f_j| / |x_i − x_j|^β` over sample pairs.
fn holder_of_samples(xs: &[f64], f: &[f64], beta: f64) -> f64 {
    let mut best = 0.0f64;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            best = best.max((f[i] - f[j]).abs() / (xs[j] - xs[i]).abs().powf(beta));
        }
    }
    best
}

fn log_slope(ms: &[u32], vals: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = ms
        .iter()
        .zip(vals)
        .filter(|(_, v)| **v > 0.0)
        .map(|(m, v)| ((*m as f64).ln(), v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |a, p| {
        (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2))
    });
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Solves every `m` (in parallel), collects the diagnostics and, when
/// `cfg.refine`, repeats the largest `m` on a grid twice as fine.
pub fn blowup_sweep(cfg: &CounterexampleConfig) -> Result<BlowupReport> {
    cfg.validate()?;
    let entries = par::map_slice(&cfg.ms, |&m| entry(cfg, m))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let vals: Vec<f64> = entries.iter().map(|e| e.csigma_alpha_seminorm).collect();
    let growth_rate = log_slope(&cfg.ms, &vals);
    let refinement = if cfg.refine {
        let (pos, &m) = cfg
            .ms
            .iter()
            .enumerate()
            .max_by_key(|(_, m)| **m)
            .ok_or_else(|| Error::InvalidParameter("empty m list".into()))?;
        let fine = solve(cfg, m, 2 * cfg.cells)?;
        let fine = order_seminorm(cfg, &fine.solution)?;
        let coarse = entries[pos].csigma_alpha_seminorm;
        Some(Refinement {
            m,
            cells: 2 * cfg.cells,
            coarse,
            fine,
            relative_change: (fine - coarse).abs() / coarse.abs().max(f64::MIN_POSITIVE),
        })
    } else {
        None
    };
    Ok(BlowupReport {
        kind: cfg.kind,
        sigma: cfg.sigma,
        alpha: cfg.alpha,
        cells: cfg.cells,
        entries,
        growth_rate,
        refinement,
    })
}

/// `u⁽¹⁾ + u⁽²⁾ − u` at the nodes and at sample exterior points.
pub fn reconstruction_error(u: &GridFunction, u1: &GridFunction, u2: &GridFunction) -> f64 {
    let inside = u.nodes().map(|x| (u1.eval(x) + u2.eval(x) - u.eval(x)).abs());
    let outside = (0..200).map(|k| {
        let x = 1.0 + 0.0173 * k as f64;
        (u1.eval(x) + u2.eval(x) - u.eval(x))
            .abs()
            .max((u1.eval(-x) + u2.eval(-x) - u.eval(-x)).abs())
    });
    inside.chain(outside).fold(0.0, f64::max)
}

/// Exterior data viewed as a grid function vanishing on `[−1, 1]`.
pub fn oscillating_part(m: u32, cells: usize) -> Result<GridFunction> {
    GridFunction::new(1.0, vec![0.0; cells + 1], exterior(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::check_l0;

    fn cfg(kind: Kind, ms: Vec<u32>) -> CounterexampleConfig {
        CounterexampleConfig::new(kind, 1.0, ms, 0.1, 128).unwrap()
    }

    #[test]
    fn linear_problem_structure() {
        let c = cfg(Kind::Linear, vec![1]);
        let p = build_linear(&c).unwrap();
        let ProblemOperator::Linear { kernel, .. } = &p.operator else {
            panic!("linear operator expected")
        };
        assert!(check_l0(kernel, &EllipticityParams::new(1.0, 3.0).unwrap()).pass);
        for m in [1, 3, 8] {
            let g = exterior(m);
            for k in 0..400 {
                let x = 1.0 + 0.0217 * k as f64;
                assert_eq!(g.eval(x), -g.eval(-x));
                if x <= COLLAR {
                    assert_eq!(g.eval(x), 0.0);
                }
            }
        }
        assert!(build_nonlinear(&c).is_err());
    }

    #[test]
    fn nonlinear_problem_structure() {
        let c = cfg(Kind::Nonlinear, vec![2]);
        let p = build_nonlinear(&c).unwrap();
        assert!(matches!(p.operator, ProblemOperator::Extremal { sign: Sign::Plus, .. }));
        assert_eq!(p.exterior, exterior(2));
    }

    #[test]
    fn config_rejects_unresolved_m() {
        assert!(CounterexampleConfig::new(Kind::Linear, 1.0, vec![16], 0.1, 128).is_err());
        assert!(CounterexampleConfig::new(Kind::Linear, 1.0, vec![0], 0.1, 128).is_err());
        assert!(CounterexampleConfig::new(Kind::Linear, 2.5, vec![2], 0.1, 128).is_err());
    }

    #[test]
    fn split_reconstructs() {
        let c = cfg(Kind::Linear, vec![2]);
        let u = solve(&c, 2, 128).unwrap().solution;
        let (u1, u2) = split_solution(&u).unwrap();
        for k in 0..100 {
            let x = -2.0 + 0.04 * k as f64;
            if x.abs() < 2.0 {
                assert_eq!(u2.eval(x), 0.0);
            }
        }
        assert_eq!(u1.eval(5.3), 0.0);
        assert_eq!(u1.eval(-1.5), 0.0);
        assert_eq!(reconstruction_error(&u, &u1, &u2), 0.0);
    }

    #[test]
    fn oscillation_identities_trend() {
        let c = cfg(Kind::Linear, vec![2]);
        let mut devs = Vec::new();
        for m in [4, 16, 64] {
            let u2 = oscillating_part(m, 64).unwrap();
            let r = oscillation_identities(&c, &u2, m).unwrap();
            assert!(r.at_zero.abs() <= 1e-9, "{}", r.at_zero);
            devs.push(r.deviation);
        }
        assert!(devs[0] > devs[1] && devs[1] > devs[2], "{devs:?}");
        assert!(devs[2] <= 0.1);
    }

    #[test]
    fn nonlinear_identities_hold() {
        let c = cfg(Kind::Nonlinear, vec![4]);
        let u = solve(&c, 4, 128).unwrap().solution;
        let r = nonlinear_identities(&c, &u, 4).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.tau > 0.01);
        assert_eq!(r.b.len(), 20);
        assert!(r.b_tilde.iter().any(|s| s.expected == 2.0));
        assert!(r.b_tilde.iter().any(|s| s.expected == 1.0));
    }

    #[test]
    fn small_sweep_is_bounded_and_odd() {
        let c = cfg(Kind::Linear, vec![2, 4]);
        let r = blowup_sweep(&c).unwrap();
        for e in &r.entries {
            assert!(e.sup_norm <= 1.0 + 1e-8);
            assert!(e.odd_defect <= 1e-8);
            assert!(e.barrier.pass);
            assert!(e.claim_lhs.is_finite() && e.claim_rhs > 0.0);
        }
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("m,sup_norm,calpha_seminorm,csigma_alpha_seminorm,id_at_zero,id_at_half_over_m"));
        assert_eq!(text.lines().count(), 3);
    }
}
