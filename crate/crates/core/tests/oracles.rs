//! Closed-form identities of the difference operators and brute-force
//! minima of Bellman families.

use std::f64::consts::PI;

use nonlocal_core::kernels::{KernelSpec, ModPiece, Modulation, Profile};
use nonlocal_core::operators::{
    average_difference_apply, bellman_apply, extremal_apply, linear_apply, translation_difference_apply, Coefficient,
    DiscreteMeasure, FamilyMember, OperatorFamily, QuadratureConfig, Sign,
};
use nonlocal_core::{EllipticityParams, GridFunction, TailFormula, TailSpec};

const X: f64 = 8.0;

fn cosine(amplitude: f64) -> GridFunction {
    GridFunction::from_fn(
        X,
        2048,
        |t| amplitude * t.cos(),
        TailSpec::uniform(
            X,
            TailFormula::Cos {
                amplitude,
                frequency: 1.0,
                phase: 0.0,
            },
        ),
    )
    .unwrap()
}

#[test]
fn half_period_shift_doubles_the_cosine() {
    let p = EllipticityParams::new(1.0, 2.0).unwrap();
    let cfg = QuadratureConfig::default();
    let u = cosine(1.0);
    let v = cosine(-2.0);
    for sign in [Sign::Plus, Sign::Minus] {
        for x in [-1.0, 0.0, 0.4, 1.3] {
            let shifted = translation_difference_apply(&u, PI, sign, &p, 1.0, x, &cfg).unwrap();
            let direct = extremal_apply(&v, sign, &p, 1.0, x, &cfg).unwrap();
            assert!(
                (shifted - direct).abs() <= 1e-6 * (1.0 + direct.abs()),
                "{sign:?} {x}: {shifted} vs {direct}"
            );
        }
    }
}

#[test]
fn symmetric_average_scales_the_cosine() {
    let p = EllipticityParams::new(1.0, 3.0).unwrap();
    let cfg = QuadratureConfig::default();
    let u = cosine(1.0);
    for h in [0.3, 1.1, 2.5] {
        let mu = DiscreteMeasure::new(vec![(h, 0.5), (-h, 0.5)]).unwrap();
        let v = cosine(h.cos() - 1.0);
        for x in [0.0, 0.7, 2.0] {
            let avg = average_difference_apply(&u, &mu, &p, 1.3, x, &cfg).unwrap();
            let direct = extremal_apply(&v, Sign::Plus, &p, 1.3, x, &cfg).unwrap();
            // The three unit-size terms cancel down to |cos h − 1|, so the
            // error is measured against the unit scale of the input.
            assert!((avg - direct).abs() <= 1e-5, "h {h}, x {x}: {avg} vs {direct}");
        }
    }
}

#[test]
fn extremal_on_a_scaled_cosine_at_its_peak() {
    // δ²(a cos)(0, y) = |a|(1 − cos y) ≥ 0 for a < 0, so M⁺ = Λ|a|(2−σ)·2∫(1−cos y)y^{−1−σ}dy
    // with ∫₀^∞(1−cos y)y^{−1−s}dy = −Γ(−s)cos(πs/2); at s = 1.3, a = cos 0.3 − 1 this is
    // 0.28345068617279 (mpmath).
    let p = EllipticityParams::new(1.0, 3.0).unwrap();
    let v = cosine(0.3f64.cos() - 1.0);
    let m = extremal_apply(&v, Sign::Plus, &p, 1.3, 0.0, &QuadratureConfig::default()).unwrap();
    assert!((m - 0.28345068617279).abs() <= 1e-5 * 0.2834, "{m}");
}

#[test]
fn crossing_costs_match_pointwise_enumeration() {
    let sigma = 1.0;
    let heavy = KernelSpec::new(
        sigma,
        Modulation::Piecewise {
            pieces: vec![ModPiece {
                from: 0.0,
                to: None,
                profile: Profile::Constant { value: 3.0 },
            }],
        },
    )
    .unwrap();
    let members = vec![
        FamilyMember {
            kernel: KernelSpec::flat(sigma).unwrap(),
            coefficient: Coefficient::Polynomial { coeffs: vec![0.0, 2.0] },
        },
        FamilyMember {
            kernel: heavy,
            coefficient: Coefficient::Polynomial {
                coeffs: vec![0.0, -2.0],
            },
        },
    ];
    let fam = OperatorFamily::new(members.clone(), EllipticityParams::new(1.0, 3.0).unwrap()).unwrap();
    let u = GridFunction::from_fn(4.0, 512, |t| (1.0 - t * t).max(0.0).powi(3), TailSpec::zero(4.0)).unwrap();
    let cfg = QuadratureConfig::default();
    let mut chosen = Vec::new();
    for x in [-0.8, -0.4, 0.0, 0.4, 0.8] {
        let costs: Vec<f64> = members
            .iter()
            .map(|m| linear_apply(&u, &m.kernel, x, &cfg).unwrap() + m.coefficient.eval(x))
            .collect();
        let best = if costs[1] < costs[0] { 1 } else { 0 };
        let (v, arg) = bellman_apply(&u, &fam, x, &cfg).unwrap();
        assert_eq!(arg, best);
        assert_eq!(v, costs[best]);
        chosen.push(arg);
    }
    // The costs cross inside the interval.
    assert!(chosen.contains(&0) && chosen.contains(&1), "{chosen:?}");
}
