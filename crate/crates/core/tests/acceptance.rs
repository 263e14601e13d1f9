//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

use std::f64::consts::PI;
use std::time::Instant;

use nonlocal_core::counterexamples::{
    blowup_sweep, oscillating_part, oscillation_identities, oscillation_limit, solve as solve_counterexample,
    BlowupReport, CounterexampleConfig, Kind,
};
use nonlocal_core::holder::{dyadic_samples, interpolation_claim_check, l2_poly_fit, seminorm, Region, SeminormQuery};
use nonlocal_core::kernels::{
    certify_mollified, check_l0, check_y_holder_tail, Inner, KernelSpec, ModPiece, Modulation, MollifierSpec, Profile,
};
use nonlocal_core::liouville::{check_hypotheses, compute_p_n, polynomial_conclusion_residual, LiouvilleInput};
use nonlocal_core::operators::{
    bellman_apply, extremal_apply, linear_apply, Coefficient, DiscreteMeasure, FamilyMember, OperatorFamily,
    QuadratureConfig, Sign,
};
use nonlocal_core::solver::{
    solve_bellman_dirichlet, solve_contraction, solve_fixed_policy, solve_small_ball_direct, DirichletProblem,
    ProblemOperator, SmallBall,
};
use nonlocal_core::{EllipticityParams, Error, GridFunction, HolderExponents, TailFormula, TailPiece, TailSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: String) -> Outcome {
    if cond {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn err(e: Error) -> String {
    format!("error: {e}")
}

fn cos_tail(x: f64, frequency: f64, phase: f64) -> TailSpec {
    TailSpec::uniform(
        x,
        TailFormula::Cos {
            amplitude: 1.0,
            frequency,
            phase,
        },
    )
}

fn c1_operator_oracle() -> Outcome {
    let start = Instant::now();
    let cells = 8192; // X = 4, h = 2^-10
    let u = GridFunction::from_fn(4.0, cells, f64::cos, cos_tail(4.0, 1.0, 0.0)).map_err(err)?;
    let k = KernelSpec::flat(1.0).map_err(err)?;
    let cfg = QuadratureConfig::default();
    let mut worst = 0.0f64;
    for x in [0.0, 0.5, 1.0] {
        let v = linear_apply(&u, &k, x, &cfg).map_err(err)?;
        let want = -PI * f64::cos(x);
        worst = worst.max((v - want).abs() / want.abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst <= 1e-4 && secs < 10.0,
        format!("max rel error {worst:.2e}, {secs:.2}s"),
    )
}

fn c2_affine_nullity() -> Outcome {
    let tail = TailSpec::uniform(
        3.0,
        TailFormula::Polynomial {
            coeffs: vec![0.4, -1.3],
        },
    );
    let u = GridFunction::from_fn(3.0, 600, |x| 0.4 - 1.3 * x, tail).map_err(err)?;
    let cfg = QuadratureConfig::default();
    let p = EllipticityParams::new(1.0, 3.0).map_err(err)?;
    let k = KernelSpec::oscillating(1.3, 3).map_err(err)?;
    let fam = OperatorFamily::new(
        vec![
            FamilyMember {
                kernel: k.clone(),
                coefficient: Coefficient::Cos {
                    amplitude: 1.0,
                    frequency: 2.0,
                    phase: 0.0,
                },
            },
            FamilyMember {
                kernel: KernelSpec::flat(1.3).map_err(err)?,
                coefficient: Coefficient::Constant { value: 0.25 },
            },
        ],
        p,
    )
    .map_err(err)?;
    let mut worst = 0.0f64;
    for x in [-1.7, -0.2, 0.0, 0.9, 2.5] {
        worst = worst.max(linear_apply(&u, &k, x, &cfg).map_err(err)?.abs());
        for s in [Sign::Plus, Sign::Minus] {
            worst = worst.max(extremal_apply(&u, s, &p, 1.3, x, &cfg).map_err(err)?.abs());
        }
        let (v, _) = bellman_apply(&u, &fam, x, &cfg).map_err(err)?;
        let inf_c = (2.0 * x).cos().min(0.25);
        worst = worst.max((v - inf_c).abs());
    }
    check(worst <= 1e-10, format!("max deviation {worst:.2e}"))
}

fn random_l0_kernel(rng: &mut ChaCha8Rng, sigma: f64, p: &EllipticityParams) -> Result<KernelSpec, Error> {
    let (lo, hi) = (p.lambda, p.big_lambda);
    let modulation = if rng.random_bool(0.5) {
        let n = rng.random_range(2..5);
        let mut edges: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.05..3.0)).collect();
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut pieces = Vec::new();
        let mut from = 0.0;
        for e in edges.iter().copied().map(Some).chain([None]) {
            pieces.push(ModPiece {
                from,
                to: e,
                profile: Profile::Constant {
                    value: rng.random_range(lo..hi),
                },
            });
            from = e.unwrap_or(0.0);
        }
        Modulation::Piecewise { pieces }
    } else {
        let amplitude = rng.random_range(0.0..(hi - lo) / 2.0);
        let base = rng.random_range(lo + amplitude..hi - amplitude);
        Modulation::SignCos {
            m: rng.random_range(1..5),
            inner: Inner::Constant(rng.random_range(lo..hi)),
            radius: rng.random_range(0.2..2.0),
            base,
            amplitude,
        }
    };
    KernelSpec::new(sigma, modulation)
}

fn c3_extremal_sandwich() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let p = EllipticityParams::new(1.0, 3.0).map_err(err)?;
    let cfg = QuadratureConfig::default();
    let x = 4.0;
    let cells = 1024;
    let tests: Vec<GridFunction> = vec![
        GridFunction::from_fn(x, cells, |t| (PI * t).cos(), cos_tail(x, PI, 0.0)),
        GridFunction::from_fn(x, cells, |t| (2.0 * PI * t).sin(), cos_tail(x, 2.0 * PI, -PI / 2.0)),
        GridFunction::from_fn(x, cells, |t| (1.0 - t * t).max(0.0).powi(3), TailSpec::zero(x)),
        GridFunction::from_fn(x, cells, |t| (1.0 - t.abs()).max(0.0), TailSpec::zero(x)),
        // Kinked at ±1/2, constant ±1 tails.
        GridFunction::from_fn(
            x,
            cells,
            |t| (2.0 * t).clamp(-1.0, 1.0),
            TailSpec {
                pieces: vec![
                    TailPiece {
                        from: None,
                        to: Some(-x),
                        formula: TailFormula::Constant { value: -1.0 },
                    },
                    TailPiece {
                        from: Some(x),
                        to: None,
                        formula: TailFormula::Constant { value: 1.0 },
                    },
                ],
            },
        ),
    ]
    .into_iter()
    .collect::<Result<_, _>>()
    .map_err(err)?;
    let xs = [-1.3, -0.4, 0.0, 0.37, 1.1];
    let mut margin = f64::INFINITY;
    for _ in 0..20 {
        let sigma = rng.random_range(0.6..1.8);
        let k = random_l0_kernel(&mut rng, sigma, &p).map_err(err)?;
        if !check_l0(&k, &p).pass {
            return Err(format!("random kernel not in L0: {k:?}"));
        }
        for u in &tests {
            for &xv in &xs {
                let l = linear_apply(u, &k, xv, &cfg).map_err(err)?;
                let lo = extremal_apply(u, Sign::Minus, &p, sigma, xv, &cfg).map_err(err)?;
                let hi = extremal_apply(u, Sign::Plus, &p, sigma, xv, &cfg).map_err(err)?;
                margin = margin.min(l - lo).min(hi - l);
            }
        }
    }
    check(
        margin >= -1e-9,
        format!("min margin {margin:.3e} over 20 kernels x 5 functions x 5 points"),
    )
}

fn two_kernel_family() -> Result<OperatorFamily, Error> {
    OperatorFamily::new(
        vec![
            FamilyMember {
                kernel: KernelSpec::flat(1.0)?,
                coefficient: Coefficient::Constant { value: 1.0 },
            },
            FamilyMember {
                kernel: KernelSpec::oscillating(1.0, 1)?,
                coefficient: Coefficient::Cos {
                    amplitude: 2.0,
                    frequency: 3.0,
                    phase: 0.0,
                },
            },
        ],
        EllipticityParams::new(1.0, 3.0)?,
    )
}

fn c4_policy_exactness() -> Outcome {
    let p = DirichletProblem::new(
        ProblemOperator::Bellman {
            family: two_kernel_family().map_err(err)?,
        },
        TailSpec::collar_sign_sin(1.0, 2.0, 1),
        9,
    )
    .map_err(err)?;
    let r = solve_bellman_dirichlet(&p).map_err(err)?;
    let mut best = vec![f64::INFINITY; 10];
    for mask in 0u32..256 {
        let policy: Vec<usize> = (0..8).map(|i| ((mask >> i) & 1) as usize).collect();
        let u = solve_fixed_policy(&p, &policy).map_err(err)?;
        for (b, v) in best.iter_mut().zip(&u) {
            *b = b.min(*v);
        }
    }
    let gap = r
        .solution
        .values()
        .iter()
        .zip(&best)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    check(
        gap <= 1e-10 && r.iterations <= 8,
        format!(
            "gap to exhaustive min over 2^8 policies {gap:.2e}, {} Howard iterations",
            r.iterations
        ),
    )
}

fn c5_maximum_principle() -> Outcome {
    let mut sup = 0.0f64;
    let mut odd = 0.0f64;
    for m in [2, 4, 8, 16, 32] {
        let cfg = CounterexampleConfig::new(Kind::Linear, 1.0, vec![m], 0.1, 512).map_err(err)?;
        let u = solve_counterexample(&cfg, m, 512).map_err(err)?.solution;
        let v = u.values();
        sup = sup.max(v.iter().fold(0.0, |a, b| a.max(b.abs())));
        odd = odd.max(
            (0..v.len())
                .map(|i| (v[i] + v[v.len() - 1 - i]).abs())
                .fold(0.0, f64::max),
        );
    }
    check(
        sup <= 1.0 + 1e-8 && odd <= 1e-8,
        format!("max |u_m| {sup:.6}, odd defect {odd:.2e}"),
    )
}

fn c6_identities() -> Outcome {
    let cfg = CounterexampleConfig::new(Kind::Linear, 1.0, vec![1], 0.1, 64).map_err(err)?;
    let c = oscillation_limit(1.0);
    let mut zero = 0.0f64;
    for m in [1, 2, 4, 8, 16, 32, 64] {
        let u2 = oscillating_part(m, 64).map_err(err)?;
        zero = zero.max(oscillation_identities(&cfg, &u2, m).map_err(err)?.at_zero.abs());
    }
    let mut devs = Vec::new();
    for m in [4, 16, 64] {
        let u2 = oscillating_part(m, 64).map_err(err)?;
        devs.push(oscillation_identities(&cfg, &u2, m).map_err(err)?.deviation);
    }
    check(
        zero <= 1e-9 && devs[0] > devs[1] && devs[1] > devs[2] && devs[2] <= 0.1 && (c - 1.0).abs() < 1e-15,
        format!("max |id(0)| {zero:.2e}; |id(1/2m) - c| at m=4,16,64: {devs:.4?}"),
    )
}

fn sweep(kind: Kind) -> Result<BlowupReport, Error> {
    let mut cfg = CounterexampleConfig::new(kind, 1.0, vec![2, 4, 8, 16, 32], 0.1, 512)?;
    cfg.refine = true;
    blowup_sweep(&cfg)
}

fn blowup_verdict(r: &BlowupReport) -> (bool, String) {
    let s: Vec<f64> = r.entries.iter().map(|e| e.csigma_alpha_seminorm).collect();
    let a: Vec<f64> = r.entries.iter().map(|e| e.calpha_seminorm).collect();
    let increasing = s.windows(2).all(|w| w[1] > w[0]);
    let ratio = s[s.len() - 1] / s[0];
    let amax = a.iter().copied().fold(f64::MIN, f64::max);
    let amin = a.iter().copied().fold(f64::MAX, f64::min);
    let refine = r
        .refinement
        .as_ref()
        .map(|x| x.relative_change)
        .unwrap_or(f64::INFINITY);
    let ok = increasing && ratio >= 3.0 && amax / amin <= 2.0 && refine < 0.1;
    (
        ok,
        format!(
            "{:?}: C^(s+a) {:.4?} (ratio {ratio:.3}), C^a spread {:.3}, refinement change {:.2}%, rate {:.3}",
            r.kind,
            s,
            amax / amin,
            100.0 * refine,
            r.growth_rate.unwrap_or(f64::NAN)
        ),
    )
}

fn c7_8_blowup() -> (Outcome, Outcome) {
    let start = Instant::now();
    let lin = sweep(Kind::Linear);
    let non = sweep(Kind::Nonlinear);
    let secs = start.elapsed().as_secs_f64();
    let (lin, non) = match (lin, non) {
        (Ok(l), Ok(n)) => (l, n),
        (Err(e), _) | (_, Err(e)) => return (Err(err(e)), Err("sweep failed".into())),
    };
    let (ok_l, msg_l) = blowup_verdict(&lin);
    let (ok_n, msg_n) = blowup_verdict(&non);
    let c7 = check(ok_l && ok_n && secs < 300.0, format!("{msg_l}; {msg_n}; {secs:.1}s"));

    let mut ok = true;
    let mut taus = Vec::new();
    let mut u0 = f64::INFINITY;
    for e in &non.entries {
        let n = e.nonlinear.as_ref().expect("nonlinear extras");
        ok &= n.pass && n.b.len() == 20 && n.b_tilde.len() == 20;
        ok &= n.u_at_zero >= -1e-8 && n.u_at_zero <= 1.0 - n.tau && n.tau > 0.01;
        taus.push(n.tau);
        u0 = u0.min(n.u_at_zero);
    }
    let c8 = check(
        ok,
        format!("min u_m(0) {u0:.3e}, measured tau {taus:.4?}, 20+20 weight samples per m"),
    );
    (c7, c8)
}

fn ball_family() -> Result<OperatorFamily, Error> {
    let kernel = KernelSpec::new(
        1.0,
        Modulation::Piecewise {
            pieces: vec![
                ModPiece {
                    from: 0.0,
                    to: Some(0.3),
                    profile: Profile::Constant { value: 1.0 },
                },
                ModPiece {
                    from: 0.3,
                    to: Some(1.0),
                    profile: Profile::Constant { value: 2.0 },
                },
                ModPiece {
                    from: 1.0,
                    to: None,
                    profile: Profile::Constant { value: 1.5 },
                },
            ],
        },
    )?;
    OperatorFamily::new(
        vec![
            FamilyMember {
                kernel,
                coefficient: Coefficient::Constant { value: 1.0 },
            },
            FamilyMember {
                kernel: KernelSpec::flat(1.0)?,
                coefficient: Coefficient::Cos {
                    amplitude: 1.0,
                    frequency: 2.0,
                    phase: 0.0,
                },
            },
        ],
        EllipticityParams::new(1.0, 2.0)?,
    )
}

fn c9_contraction() -> Outcome {
    let p = DirichletProblem::new(
        ProblemOperator::Bellman {
            family: ball_family().map_err(err)?,
        },
        TailSpec::uniform(1.0, TailFormula::Constant { value: 0.5 }),
        32,
    )
    .map_err(err)?;
    let mollifier = MollifierSpec::new(0.1).map_err(err)?;
    let mut gammas = Vec::new();
    let mut gap = 0.0f64;
    for delta in [0.02, 0.01, 0.005] {
        let ball = SmallBall {
            center: 0.0,
            delta,
            mollifier,
        };
        let r = solve_contraction(&p, &ball).map_err(err)?;
        let d = solve_small_ball_direct(&p, &ball).map_err(err)?;
        gap = gap.max(
            r.solution
                .values()
                .iter()
                .zip(d.solution.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        );
        gammas.push(r.contraction_factor().unwrap_or(0.0));
    }
    check(
        gammas[0] > gammas[1] && gammas[1] > gammas[2] && gammas[2] < 0.5 && gap <= 10.0 * p.solver.tolerance,
        format!("gamma at delta 0.02, 0.01, 0.005: {gammas:.4?}; fixed point vs direct {gap:.2e}"),
    )
}

fn c10_liouville() -> Outcome {
    let params = EllipticityParams::new(1.0, 2.0).map_err(err)?;
    let u = GridFunction::polynomial(8.0, 512, &[0.5, -1.0, 0.25]).map_err(err)?;
    let q = LiouvilleInput::new(u, HolderExponents::new(1.5, 0.7).map_err(err)?, 2.0, params).map_err(err)?;
    let measures = vec![
        DiscreteMeasure::new(vec![(0.5, 0.5), (-0.25, 0.5)]).map_err(err)?,
        DiscreteMeasure::new(vec![(1.0, 0.2), (2.0, 0.3), (-1.5, 0.5)]).map_err(err)?,
    ];
    let rep = check_hypotheses(&q, &[0.5, -1.0, 3.0], &measures, &[1.0, 2.0, 4.0], &[-1.0, 0.0, 2.0]).map_err(err)?;
    let exact = rep.translation.iter().all(|t| t.m_minus == 0.0 && t.m_plus == 0.0)
        && rep.average.iter().all(|a| a.value == 0.0);
    let pn = compute_p_n(&q, 1.3, 0.0).map_err(err)?;
    let resid = polynomial_conclusion_residual(&q).map_err(err)?;

    let cu = GridFunction::from_fn(8.0, 8192, f64::cos, cos_tail(8.0, 1.0, 0.0)).map_err(err)?;
    let c = LiouvilleInput::new(cu, HolderExponents::new(1.0, 0.5).map_err(err)?, 1.0, params).map_err(err)?;
    let (p, n) = compute_p_n(&c, PI, 0.0).map_err(err)?;
    check(
        rep.pass && exact && pn == (0.0, 0.0) && resid <= 1e-10 && (p - 2.0 * PI).abs() <= 1e-3 && n.abs() <= 1e-3,
        format!(
            "quadratic: hypotheses pass, exact zeros, residual {resid:.1e}; cos P-2pi {:.1e}, N {n:.1e}",
            p - 2.0 * PI
        ),
    )
}

fn c11_holder() -> Outcome {
    let half = SeminormQuery::new(0.5, Region::Interval { a: -1.0, b: 1.0 });
    let sq = GridFunction::from_fn(
        2.0,
        1024,
        |x| x.abs().sqrt(),
        TailSpec::uniform(
            2.0,
            TailFormula::Power {
                coefficient: 1.0,
                exponent: 0.5,
            },
        ),
    )
    .map_err(err)?;
    let s1 = seminorm(&sq, &half).map_err(err)?;
    let quad = GridFunction::polynomial(2.0, 1024, &[0.0, 0.0, 1.0]).map_err(err)?;
    let s2 = seminorm(&quad, &SeminormQuery::new(1.5, Region::Interval { a: -1.0, b: 1.0 })).map_err(err)?;
    let want2 = 2.0 * 2f64.sqrt();
    let cube = GridFunction::polynomial(2.0, 1024, &[0.0, 0.0, 0.0, 1.0]).map_err(err)?;
    let fit = l2_poly_fit(&cube, 2, 0.0, 1.0).map_err(err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let samples = dyadic_samples(4);
    let mut worst = f64::INFINITY;
    let mut holds = true;
    for _ in 0..10 {
        let terms: Vec<(f64, f64, f64)> = (0..3)
            .map(|k| {
                (
                    rng.random_range(-1.0..1.0),
                    (k + 1) as f64 * rng.random_range(0.5..1.5),
                    rng.random_range(0.0..PI),
                )
            })
            .collect();
        let f = |x: f64| terms.iter().map(|(a, w, ph)| a * (w * x + ph).cos()).sum::<f64>();
        let u = GridFunction::from_fn(2.0, 512, f, TailSpec::zero(2.0)).map_err(err)?;
        let rep = interpolation_claim_check(&u, 1.5, 1.25, &samples).map_err(err)?;
        holds &= rep.holds;
        worst = worst.min(rep.ratio);
    }
    check(
        (s1 - 1.0).abs() <= 0.03
            && (s2 - want2).abs() <= 0.03 * want2
            && (fit.coeffs[1] - 0.6).abs() <= 1e-8
            && fit.orthogonality <= 1e-10
            && holds,
        format!(
            "[|x|^.5] {s1:.4}, [x^2]_1.5 {s2:.4} (2sqrt2 {want2:.4}), x^3 fit c1 {:.10}, orth {:.1e}, interpolation min ratio {worst:.3}",
            fit.coeffs[1], fit.orthogonality
        ),
    )
}

fn c12_kernels() -> Outcome {
    let p13 = EllipticityParams::new(1.0, 3.0).map_err(err)?;
    let km = KernelSpec::oscillating(1.0, 4).map_err(err)?;
    let certified = check_l0(&km, &p13).pass;
    let rejected = matches!(check_y_holder_tail(&km, 1.0, 0.5), Err(Error::NonHolderKernel(_)));
    let mut cs = Vec::new();
    let mut all = true;
    for eps in [0.2, 0.1, 0.05] {
        let c = certify_mollified(&km, &p13, eps).map_err(err)?;
        all &= c.report.pass;
        cs.push(c.constant);
    }
    let spread = cs.iter().copied().fold(f64::MIN, f64::max) / cs.iter().copied().fold(f64::MAX, f64::min);
    check(
        certified && rejected && all && spread <= 1.05,
        format!(
            "K_m in L0(1,3): {certified}; y-Holder rejected: {rejected}; mollified C over eps 0.2,0.1,0.05: {cs:.4?}"
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, Outcome)> = vec![
        (1, c1_operator_oracle()),
        (2, c2_affine_nullity()),
        (3, c3_extremal_sandwich()),
        (4, c4_policy_exactness()),
        (5, c5_maximum_principle()),
        (6, c6_identities()),
    ];
    let (c7, c8) = c7_8_blowup();
    results.push((7, c7));
    results.push((8, c8));
    results.push((9, c9_contraction()));
    results.push((10, c10_liouville()));
    results.push((11, c11_holder()));
    results.push((12, c12_kernels()));

    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(msg) => println!("PASS criterion {n:>2}: {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {n:>2}: {msg}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
