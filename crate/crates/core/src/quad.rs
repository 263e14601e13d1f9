//! Quadrature primitives: Gauss–Legendre rules, exact power-law integrals and
//! the Euler–Maclaurin summation used for periodic integrands on half-lines.

use std::sync::OnceLock;

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over `[a, b]`.
    #[inline]
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        let mut s = 0.0;
        for (t, w) in self.nodes.iter().zip(&self.weights) {
            s += w * f(c + r * t);
        }
        s * r
    }

    /// Quadrature points mapped to `[a, b]` with their weights.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(t, w)| (c + r * t, w * r))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 8-point rule.
pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// Shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

#[inline]
fn expm1_over(e: f64) -> f64 {
    if e.abs() < 1e-8 {
        1.0 + 0.5 * e
    } else {
        e.exp_m1() / e
    }
}

/// `∫_a^b y^{-q} dy` for `0 < a <= b <= ∞`, stable for `q` near 1 and for
/// narrow intervals far from the origin.
pub fn pow_integral(a: f64, b: f64, q: f64) -> f64 {
    debug_assert!(a > 0.0 && b >= a);
    if b.is_infinite() {
        assert!(q > 1.0, "divergent power integral");
        return a.powf(1.0 - q) / (q - 1.0);
    }
    if b == a {
        return 0.0;
    }
    let l = (b / a).ln();
    let e = (1.0 - q) * l;
    a.powf(1.0 - q) * l * expm1_over(e)
}

/// Mass of the flat kernel `(2-σ)|y|^{-1-σ}` on `a < y < b` (one side).
#[inline]
pub fn flat_mass(a: f64, b: f64, sigma: f64) -> f64 {
    (2.0 - sigma) * pow_integral(a, b, 1.0 + sigma)
}

/// First moment `∫_a^b y (2-σ) y^{-1-σ} dy`.
#[inline]
pub fn flat_first_moment(a: f64, b: f64, sigma: f64) -> f64 {
    (2.0 - sigma) * pow_integral(a, b, sigma)
}

/// `∫_0^r (2-σ) y^{1-σ} dy = r^{2-σ}`: the flat near-origin second moment.
#[inline]
pub fn flat_near_weight(r: f64, sigma: f64) -> f64 {
    if r <= 0.0 {
        0.0
    } else {
        r.powf(2.0 - sigma)
    }
}

/// One piece of a periodic integrand, offsets relative to the period start.
#[derive(Debug, Clone, Copy)]
pub struct PeriodicPiece {
    pub a: f64,
    pub b: f64,
    /// `Some(v)` for a constant piece, `None` for a smooth piece evaluated
    /// through the callback.
    pub value: Option<f64>,
}

const BERNOULLI_OVER_FACTORIAL: [f64; 5] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40320.0,
    5.0 / 66.0 / 3628800.0,
];

/// `Σ_pieces ∫_a^b g(t) (base + t)^{-q} dt` over one period.
fn period_moment(pieces: &[PeriodicPiece], base: f64, q: f64, start: f64, smooth: &dyn Fn(f64) -> f64) -> f64 {
    let rule = gl16();
    let mut s = 0.0;
    for p in pieces {
        if p.b <= p.a {
            continue;
        }
        match p.value {
            Some(v) => {
                if v != 0.0 {
                    s += v * pow_integral(base + p.a, base + p.b, q);
                }
            }
            None => {
                s += rule.integrate(p.a, p.b, |t| smooth(start + t) * (base + t).powf(-q));
            }
        }
    }
    s
}

/// `∫_start^∞ g(y) (2-σ) y^{-1-σ} dy` for `g` periodic with period `period`.
///
/// `pieces` tile `[0, period)`; smooth pieces call `smooth(y)` with `y` in the
/// reference period `[start, start + period)`. A few dozen periods are summed
/// directly, the remainder by Euler–Maclaurin in the period index.
pub fn periodic_power_tail(
    start: f64,
    period: f64,
    pieces: &[PeriodicPiece],
    sigma: f64,
    smooth: &dyn Fn(f64) -> f64,
) -> f64 {
    debug_assert!(start > 0.0 && period > 0.0);
    let q = 1.0 + sigma;
    let direct = (32.0 - start / period).ceil().max(4.0) as usize;
    let mut total = 0.0;
    for k in 0..direct {
        total += period_moment(pieces, start + k as f64 * period, q, start, smooth);
    }
    let y1 = start + direct as f64 * period;
    let integral = period_moment(pieces, y1, sigma, start, smooth) / (sigma * period);
    let f0 = period_moment(pieces, y1, q, start, smooth);
    let mut correction = 0.0;
    let mut falling = 1.0;
    let mut order = 0usize;
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let r = 2 * j + 1;
        while order < r {
            falling *= -(q + order as f64);
            order += 1;
        }
        let deriv = falling * period.powi(r as i32) * period_moment(pieces, y1, q + r as f64, start, smooth);
        correction += c * deriv;
    }
    total += integral + 0.5 * f0 - correction;
    (2.0 - sigma) * total
}

/// Smallest common period of two positive periods, if they are commensurate
/// with small integer ratios.
pub fn common_period(p1: f64, p2: f64) -> Option<f64> {
    for n1 in 1..=256u32 {
        let t = n1 as f64 * p1;
        let n2 = (t / p2).round();
        if n2 >= 1.0 && (t - n2 * p2).abs() <= 1e-11 * t {
            return Some(t);
        }
    }
    None
}
