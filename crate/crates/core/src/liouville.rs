//! Sampled checks of the Liouville hypotheses and of the comparison
//! quantities `P`, `N` on a concrete global function.
//!
//! Every check runs on finite samples of shifts, measures and points: a
//! pass means "not falsified on the sample", never the quantified statement.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::holder::{growth_control_check, l2_poly_fit, GrowthReport};
use crate::operators::{
    apply_signal, average_difference_apply, translation_difference_apply, DiscreteMeasure, QuadratureConfig, Response,
    Sign, Term, Weight,
};
use crate::par;
use crate::params::{EllipticityParams, HolderExponents};

/// A global function with the constants of the hypotheses.
#[derive(Debug, Clone)]
pub struct LiouvilleInput {
    pub u: GridFunction,
    pub exponents: HolderExponents,
    pub c1: f64,
    pub params: EllipticityParams,
    pub quadrature: QuadratureConfig,
    /// Additive slack for sign and comparability checks.
    pub tolerance: f64,
}

impl LiouvilleInput {
    pub fn new(u: GridFunction, exponents: HolderExponents, c1: f64, params: EllipticityParams) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(invalid("growth constant C1 must be positive"));
        }
        params.validate()?;
        Ok(Self {
            u,
            exponents,
            c1,
            params,
            quadrature: QuadratureConfig::default(),
            tolerance: 1e-8,
        })
    }

    fn sigma(&self) -> f64 {
        self.exponents.sigma
    }
}

/// `P` and `N` at `x` relative to `base`.
pub fn compute_p_n(inp: &LiouvilleInput, x: f64, base: f64) -> Result<(f64, f64)> {
    let terms = [
        Term { center: x, weight: 1.0 },
        Term {
            center: base,
            weight: -1.0,
        },
    ];
    let part = |r| apply_signal(&inp.u, &terms, r, Weight::Flat, inp.sigma(), &inp.quadrature);
    Ok((part(Response::Positive)?, part(Response::Negative)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparabilityStatus {
    Pass,
    Fail,
    /// The translation hypothesis failed at the shift `x − base`; no claim.
    HypothesisNotVerified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityPoint {
    pub x: f64,
    pub p: f64,
    pub n: f64,
    /// `M^-` and `M^+` of `u(· + (x − base)) − u` at `base`.
    pub m_minus: f64,
    pub m_plus: f64,
    pub status: ComparabilityStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub base: f64,
    pub points: Vec<ComparabilityPoint>,
    /// No point failed (points without the hypothesis are skipped).
    pub pass: bool,
}

/// `λ/Λ · P ≤ N ≤ Λ/λ · P` at each point with base `0`, gated on the
/// translation hypothesis at the shift that produces `P` and `N`.
pub fn check_comparability(inp: &LiouvilleInput, points: &[f64]) -> Result<ComparabilityReport> {
    let base = 0.0;
    let (lam, big) = (inp.params.lambda, inp.params.big_lambda);
    let rows = par::try_map_range(points.len(), |k| {
        let x = points[k];
        let (p, n) = compute_p_n(inp, x, base)?;
        let tdiff =
            |s| translation_difference_apply(&inp.u, x - base, s, &inp.params, inp.sigma(), base, &inp.quadrature);
        let (m_minus, m_plus) = (tdiff(Sign::Minus)?, tdiff(Sign::Plus)?);
        let tol = inp.tolerance * (1.0 + p + n);
        let status = if m_minus > tol || m_plus < -tol {
            ComparabilityStatus::HypothesisNotVerified
        } else if lam / big * p <= n + tol && n <= big / lam * p + tol {
            ComparabilityStatus::Pass
        } else {
            ComparabilityStatus::Fail
        };
        Ok::<_, Error>(ComparabilityPoint {
            x,
            p,
            n,
            m_minus,
            m_plus,
            status,
        })
    })?;
    let pass = rows.iter().all(|r| r.status != ComparabilityStatus::Fail);
    Ok(ComparabilityReport {
        base,
        points: rows,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationSample {
    pub shift: f64,
    pub x: f64,
    pub m_minus: f64,
    pub m_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageSample {
    /// Index into the supplied measures.
    pub measure: usize,
    pub x: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesesReport {
    pub growth: GrowthReport,
    pub translation: Vec<TranslationSample>,
    pub average: Vec<AverageSample>,
    /// `min(−M^-, M^+)` over the translation samples (`∞` when empty).
    pub translation_margin: f64,
    /// `min M^+` over the average samples (`∞` when empty).
    pub average_margin: f64,
    pub growth_pass: bool,
    pub translation_pass: bool,
    pub average_pass: bool,
    pub pass: bool,
    pub note: String,
}

/// Runs the growth check on `radii`, the translation sign check at every
/// `(shift, point)` pair and the averaged-difference check at every
/// `(measure, point)` pair.
pub fn check_hypotheses(
    inp: &LiouvilleInput,
    shifts: &[f64],
    measures: &[DiscreteMeasure],
    radii: &[f64],
    points: &[f64],
) -> Result<HypothesesReport> {
    for m in measures {
        m.validate()?;
    }
    let growth = growth_control_check(&inp.u, &inp.exponents, inp.c1, radii)?;

    let np = points.len();
    let translation = par::try_map_range(shifts.len() * np, |k| {
        let (shift, x) = (shifts[k / np], points[k % np]);
        let t = |s| translation_difference_apply(&inp.u, shift, s, &inp.params, inp.sigma(), x, &inp.quadrature);
        Ok::<_, Error>(TranslationSample {
            shift,
            x,
            m_minus: t(Sign::Minus)?,
            m_plus: t(Sign::Plus)?,
        })
    })?;
    let average = par::try_map_range(measures.len() * np, |k| {
        let (measure, x) = (k / np, points[k % np]);
        Ok::<_, Error>(AverageSample {
            measure,
            x,
            value: average_difference_apply(&inp.u, &measures[measure], &inp.params, inp.sigma(), x, &inp.quadrature)?,
        })
    })?;

    let translation_margin = translation
        .iter()
        .map(|t| (-t.m_minus).min(t.m_plus))
        .fold(f64::INFINITY, f64::min);
    let average_margin = average.iter().map(|a| a.value).fold(f64::INFINITY, f64::min);
    let translation_pass = translation_margin >= -inp.tolerance;
    let average_pass = average_margin >= -inp.tolerance;
    Ok(HypothesesReport {
        growth_pass: growth.pass,
        pass: growth.pass && translation_pass && average_pass,
        growth,
        translation,
        average,
        translation_margin,
        average_margin,
        translation_pass,
        average_pass,
        note: format!(
            "not falsified on {} shifts, {} measures, {} points, {} radii",
            shifts.len(),
            measures.len(),
            np,
            radii.len()
        ),
    })
}

/// `‖u − p‖_∞ / ‖u‖_∞` on `[−X, X]`, with `p` the degree-`ν` least-squares
/// fit on the whole grid.
pub fn polynomial_conclusion_residual(inp: &LiouvilleInput) -> Result<f64> {
    let u = &inp.u;
    let r = u.halfwidth();
    let fit = l2_poly_fit(u, inp.exponents.nu as usize, 0.0, r)?;
    let (mut num, mut den) = (0.0f64, 0.0f64);
    for (x, &v) in u.nodes().zip(u.values()) {
        num = num.max((v - fit.eval(x)).abs());
        den = den.max(v.abs());
    }
    Ok(if den == 0.0 { 0.0 } else { num / den })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{TailFormula, TailSpec};
    use crate::kernels::KernelSpec;
    use crate::operators::linear_apply;
    use crate::solver::{solve_bellman_dirichlet, DirichletProblem, ProblemOperator};
    use std::f64::consts::PI;

    fn exps() -> HolderExponents {
        HolderExponents::new(1.5, 0.7).unwrap()
    }

    fn params() -> EllipticityParams {
        EllipticityParams::new(1.0, 2.0).unwrap()
    }

    fn quadratic() -> LiouvilleInput {
        let u = GridFunction::polynomial(8.0, 512, &[0.5, -1.0, 0.25]).unwrap();
        LiouvilleInput::new(u, exps(), 2.0, params()).unwrap()
    }

    fn cosine(cells: usize) -> LiouvilleInput {
        let tail = TailSpec::uniform(
            8.0,
            TailFormula::Cos {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
            },
        );
        let u = GridFunction::from_fn(8.0, cells, f64::cos, tail).unwrap();
        LiouvilleInput::new(u, HolderExponents::new(1.0, 0.5).unwrap(), 1.0, params()).unwrap()
    }

    fn measures() -> Vec<DiscreteMeasure> {
        vec![
            DiscreteMeasure::new(vec![(0.5, 0.5), (-0.25, 0.5)]).unwrap(),
            DiscreteMeasure::new(vec![(1.0, 0.2), (2.0, 0.3), (-1.5, 0.5)]).unwrap(),
        ]
    }

    #[test]
    fn quadratic_has_no_p_or_n() {
        let q = quadratic();
        for x in [-2.0, 0.0, 1.3] {
            assert_eq!(compute_p_n(&q, x, 0.0).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn cosine_p_and_n() {
        let c = cosine(8192);
        let (p, n) = compute_p_n(&c, PI, 0.0).unwrap();
        assert!((p - 2.0 * PI).abs() < 1e-3, "{p}");
        assert!(n.abs() < 1e-3, "{n}");
        let (p2, n2) = compute_p_n(&c, 0.0, PI).unwrap();
        assert!((p2 - n).abs() < 1e-12 && (n2 - p).abs() < 1e-12);
    }

    #[test]
    fn p_minus_n_is_a_laplacian_difference() {
        let c = cosine(4096);
        let k = KernelSpec::flat(1.0).unwrap();
        let cfg = QuadratureConfig::default();
        for (x, b) in [(0.7, 0.0), (2.0, -1.0)] {
            let (p, n) = compute_p_n(&c, x, b).unwrap();
            let d = linear_apply(&c.u, &k, x, &cfg).unwrap() - linear_apply(&c.u, &k, b, &cfg).unwrap();
            assert!((p - n - d).abs() < 1e-8, "{} vs {d}", p - n);
        }
    }

    #[test]
    fn p_and_n_are_homogeneous() {
        let c = cosine(2048);
        let (p, n) = compute_p_n(&c, 1.1, 0.0).unwrap();
        let mut s = c.clone();
        s.u = c.u.scaled(3.0);
        let (p3, n3) = compute_p_n(&s, 1.1, 0.0).unwrap();
        assert!((p3 - 3.0 * p).abs() < 1e-9 && (n3 - 3.0 * n).abs() < 1e-9);
        s.u = c.u.scaled(-2.0);
        let (pm, nm) = compute_p_n(&s, 1.1, 0.0).unwrap();
        assert!((pm - 2.0 * n).abs() < 1e-9 && (nm - 2.0 * p).abs() < 1e-9);
    }

    #[test]
    fn quadratic_passes_everything() {
        let q = quadratic();
        let r = check_hypotheses(&q, &[0.5, -1.0, 3.0], &measures(), &[1.0, 2.0, 4.0], &[-1.0, 0.0, 2.0]).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.translation.iter().all(|t| t.m_minus == 0.0 && t.m_plus == 0.0));
        assert!(r.average.iter().all(|a| a.value == 0.0));
        let c = check_comparability(&q, &[-1.0, 0.5, 2.0]).unwrap();
        assert!(c.pass);
        assert!(polynomial_conclusion_residual(&q).unwrap() <= 1e-10);
    }

    #[test]
    fn zero_passes() {
        let u = GridFunction::polynomial(8.0, 256, &[0.0]).unwrap();
        let z = LiouvilleInput::new(u, exps(), 1.0, params()).unwrap();
        let r = check_hypotheses(&z, &[1.0], &measures(), &[1.0, 3.0], &[0.0]).unwrap();
        assert!(r.pass);
        assert_eq!(polynomial_conclusion_residual(&z).unwrap(), 0.0);
    }

    #[test]
    fn cosine_is_not_polynomial() {
        assert!(polynomial_conclusion_residual(&cosine(1024)).unwrap() > 0.1);
    }

    #[test]
    fn noisy_quadratic_is_nearly_polynomial() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let base = GridFunction::polynomial(8.0, 512, &[1.0, 0.5, -0.3]).unwrap();
        let noisy: Vec<f64> = base
            .values()
            .iter()
            .map(|v| v + 1e-6 * rng.random_range(-1.0..1.0))
            .collect();
        let u = GridFunction::new(8.0, noisy, base.tail().clone()).unwrap();
        let inp = LiouvilleInput::new(u, exps(), 2.0, params()).unwrap();
        assert!(polynomial_conclusion_residual(&inp).unwrap() <= 1e-5);
    }

    #[test]
    fn failed_translation_hypothesis_is_flagged() {
        // cos violates the translation inequalities at some shifts
        let c = cosine(2048);
        let r = check_comparability(&c, &[PI / 2.0, PI, 2.5]).unwrap();
        assert!(r
            .points
            .iter()
            .any(|p| p.status == ComparabilityStatus::HypothesisNotVerified));
    }

    #[test]
    fn extremal_solution_is_comparable() {
        let p = DirichletProblem::new(
            ProblemOperator::Extremal {
                sign: Sign::Plus,
                sigma: 1.0,
                params: params(),
                coefficient: Default::default(),
            },
            TailSpec::collar_sign_sin(1.0, 2.0, 2),
            64,
        )
        .unwrap();
        let u = solve_bellman_dirichlet(&p).unwrap().solution;
        let mut inp = LiouvilleInput::new(u, HolderExponents::new(1.0, 0.5).unwrap(), 1.0, params()).unwrap();
        inp.tolerance = 1e-6;
        let r = check_comparability(&inp, &[-0.25, 0.125, 0.375]).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.points.iter().all(|p| p.status == ComparabilityStatus::Pass), "{r:?}");
    }

    #[test]
    fn signed_square_margins_are_reported() {
        use crate::grid::TailPiece;
        let side = |from, to, c: f64| TailPiece {
            from,
            to,
            formula: TailFormula::Polynomial {
                coeffs: vec![0.0, 0.0, c],
            },
        };
        let tail = TailSpec {
            pieces: vec![side(None, Some(-8.0), -1.0), side(Some(8.0), None, 1.0)],
        };
        let u = GridFunction::from_fn(8.0, 1024, |x| x * x.abs(), tail).unwrap();
        let inp = LiouvilleInput::new(u, exps(), 4.0, params()).unwrap();
        let r = check_hypotheses(&inp, &[0.5, -1.0], &measures(), &[1.0, 2.0], &[-0.5, 0.0, 1.0]).unwrap();
        assert!(r.translation_margin.is_finite() && r.average_margin.is_finite());
        assert_eq!(r.translation.len(), 6);
        assert_eq!(r.average.len(), 6);
    }
}
