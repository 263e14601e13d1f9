//! Structural properties of the operators, solvers and seminorms on random
//! inputs.

use proptest::prelude::*;

use nonlocal_core::holder::{seminorm, Region, SeminormQuery};
use nonlocal_core::kernels::{KernelSpec, ModPiece, Modulation, Profile};
use nonlocal_core::liouville::{compute_p_n, LiouvilleInput};
use nonlocal_core::operators::{extremal_apply, linear_apply, Coefficient, QuadratureConfig, Sign};
use nonlocal_core::solver::{solve_dirichlet, DirichletProblem, ProblemOperator};
use nonlocal_core::{EllipticityParams, GridFunction, HolderExponents, TailFormula, TailSpec};

const X: f64 = 2.0;
const CELLS: usize = 128;

/// Smooth bump on `[-2, 2]` modulated by a short cosine series, zero tail.
fn bump(coeffs: &[f64]) -> GridFunction {
    let c = coeffs.to_vec();
    GridFunction::from_fn(
        X,
        CELLS,
        move |x| {
            let env = (1.0 - (x / X).powi(2)).max(0.0).powi(3);
            env * c
                .iter()
                .enumerate()
                .map(|(k, a)| a * (k as f64 * std::f64::consts::FRAC_PI_2 * x).cos())
                .sum::<f64>()
        },
        TailSpec::zero(X),
    )
    .unwrap()
}

fn piecewise(sigma: f64, edges: &[f64], values: &[f64]) -> KernelSpec {
    let mut e: Vec<f64> = edges.to_vec();
    e.sort_by(f64::total_cmp);
    e.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut pieces = Vec::new();
    let mut from = 0.0;
    for (i, to) in e.iter().copied().map(Some).chain([None]).enumerate() {
        pieces.push(ModPiece {
            from,
            to,
            profile: Profile::Constant {
                value: values[i % values.len()],
            },
        });
        from = to.unwrap_or(0.0);
    }
    KernelSpec::new(sigma, Modulation::Piecewise { pieces }).unwrap()
}

fn params() -> EllipticityParams {
    EllipticityParams::new(1.0, 3.0).unwrap()
}

fn linear_problem(kernel: KernelSpec, c: f64, left: f64, right: f64) -> DirichletProblem {
    let exterior = TailSpec {
        pieces: vec![
            nonlocal_core::TailPiece {
                from: None,
                to: Some(-1.0),
                formula: TailFormula::Constant { value: left },
            },
            nonlocal_core::TailPiece {
                from: Some(1.0),
                to: None,
                formula: TailFormula::Constant { value: right },
            },
        ],
    };
    DirichletProblem::new(
        ProblemOperator::Linear {
            kernel,
            coefficient: Coefficient::Constant { value: c },
        },
        exterior,
        16,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn linear_operators_sit_between_the_extremal_ones(
        sigma in 0.3f64..1.9,
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
        edges in prop::collection::vec(0.05f64..3.0, 0..3),
        values in prop::collection::vec(1.0f64..3.0, 1..4),
        x in -1.5f64..1.5,
    ) {
        let u = bump(&coeffs);
        let k = piecewise(sigma, &edges, &values);
        let cfg = QuadratureConfig::default();
        let l = linear_apply(&u, &k, x, &cfg).unwrap();
        let lo = extremal_apply(&u, Sign::Minus, &params(), sigma, x, &cfg).unwrap();
        let hi = extremal_apply(&u, Sign::Plus, &params(), sigma, x, &cfg).unwrap();
        let slack = 1e-9 * (1.0 + l.abs());
        prop_assert!(lo <= l + slack && l <= hi + slack, "{lo} {l} {hi}");
    }

    #[test]
    fn extremal_operators_are_dual_and_homogeneous(
        sigma in 0.3f64..1.9,
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
        t in 0.1f64..4.0,
        x in -1.5f64..1.5,
    ) {
        let u = bump(&coeffs);
        let cfg = QuadratureConfig::default();
        let m = |g: &GridFunction, s| extremal_apply(g, s, &params(), sigma, x, &cfg).unwrap();
        let plus = m(&u, Sign::Plus);
        let tol = 1e-9 * (1.0 + plus.abs());
        prop_assert!((m(&u.scaled(-1.0), Sign::Minus) + plus).abs() <= tol);
        prop_assert!((m(&u.scaled(t), Sign::Plus) - t * plus).abs() <= tol * t.max(1.0));
    }

    #[test]
    fn p_and_n_are_nonnegative_and_split_the_flat_operator(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
        x in -1.0f64..1.0,
    ) {
        let sigma = 1.2;
        let u = bump(&coeffs);
        let inp = LiouvilleInput::new(u.clone(), HolderExponents::new(sigma, 0.3).unwrap(), 1.0, params()).unwrap();
        let (p, n) = compute_p_n(&inp, x, 0.0).unwrap();
        prop_assert!(p >= 0.0 && n >= 0.0);
        let cfg = QuadratureConfig::default();
        let flat = KernelSpec::flat(sigma).unwrap();
        let diff = linear_apply(&u, &flat, x, &cfg).unwrap() - linear_apply(&u, &flat, 0.0, &cfg).unwrap();
        prop_assert!((p - n - diff).abs() <= 1e-8 * (1.0 + p + n), "{p} - {n} vs {diff}");
    }

    #[test]
    fn discrete_comparison_principle(
        sigma in 0.4f64..1.8,
        edges in prop::collection::vec(0.05f64..3.0, 0..3),
        values in prop::collection::vec(1.0f64..3.0, 1..4),
        c in -2.0f64..2.0,
        dc in 0.0f64..2.0,
        g in -1.0f64..1.0,
        dg in 0.0f64..1.0,
    ) {
        let k = piecewise(sigma, &edges, &values);
        let lo = solve_dirichlet(&linear_problem(k.clone(), c, g, g)).unwrap();
        let hi = solve_dirichlet(&linear_problem(k, c + dc, g + dg, g)).unwrap();
        for (a, b) in lo.solution.values().iter().zip(hi.solution.values()) {
            prop_assert!(a <= &(b + 1e-10), "{a} > {b}");
        }
    }

    #[test]
    fn maximum_principle_without_source(
        sigma in 0.4f64..1.8,
        edges in prop::collection::vec(0.05f64..3.0, 0..3),
        values in prop::collection::vec(1.0f64..3.0, 1..4),
        left in -1.0f64..1.0,
        right in -1.0f64..1.0,
    ) {
        let k = piecewise(sigma, &edges, &values);
        let rep = solve_dirichlet(&linear_problem(k, 0.0, left, right)).unwrap();
        let (lo, hi) = (left.min(right), left.max(right));
        for v in rep.solution.values() {
            prop_assert!(*v >= lo - 1e-10 && *v <= hi + 1e-10);
        }
    }

    #[test]
    fn seminorms_ignore_constants_and_scale_linearly(
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..5),
        beta in prop::sample::select(vec![0.3, 0.7, 1.4]),
        shift in -3.0f64..3.0,
        t in 0.1f64..5.0,
    ) {
        let u = bump(&coeffs);
        let q = SeminormQuery::new(beta, Region::Interval { a: -1.0, b: 1.0 });
        let base = seminorm(&u, &q).unwrap();
        let shifted = u.with_values(u.values().iter().map(|v| v + shift).collect()).unwrap();
        prop_assert!((seminorm(&shifted, &q).unwrap() - base).abs() <= 1e-9 * (1.0 + base));
        prop_assert!((seminorm(&u.scaled(t), &q).unwrap() - t * base).abs() <= 1e-9 * (1.0 + t * base));
    }
}
