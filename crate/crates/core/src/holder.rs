//! Empirical Hölder seminorms, growth control and local polynomial fits.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::par;
use crate::params::HolderExponents;
use crate::quad::gl8;

/// Above this many nodes the pair set is sampled instead of enumerated.
pub const EXHAUSTIVE_LIMIT: usize = 4096;

/// Interval `(a, b)` or ball `B_r(z)`; in one dimension both are intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    Interval { a: f64, b: f64 },
    Ball { center: f64, radius: f64 },
}

impl Region {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Region::Interval { a, b } => (a, b),
            Region::Ball { center, radius } => (center - radius, center + radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeminormQuery {
    pub beta: f64,
    pub region: Region,
    /// Use every `stride`-th node.
    #[serde(default = "one")]
    pub stride: usize,
    /// Seed for pair sampling on fine grids.
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}

impl SeminormQuery {
    pub fn new(beta: f64, region: Region) -> Self {
        Self {
            beta,
            region,
            stride: 1,
            seed: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(invalid(format!("seminorm order {} must be positive", self.beta)));
        }
        if (self.beta - self.beta.round()).abs() < 1e-12 {
            return Err(Error::IntegerOrder { order: self.beta });
        }
        if self.beta >= 3.0 {
            return Err(invalid("seminorm orders of 3 and above are not supported"));
        }
        if self.stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        let (a, b) = self.region.bounds();
        if !(b > a) {
            return Err(invalid("empty region"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormReport {
    pub beta: f64,
    pub value: f64,
    /// Pair attaining the maximum.
    pub argmax: Option<[f64; 2]>,
    pub pairs: usize,
    pub exhaustive: bool,
    /// Bound on the finite-difference bias of `value`.
    pub bias: f64,
    pub spacing: f64,
}

/// Node indices in `[a, b]` with the given stride, checked against the
/// difference stencil.
fn region_nodes(u: &GridFunction, a: f64, b: f64, stride: usize, k: usize) -> Result<Vec<usize>> {
    let h = u.spacing();
    let x = u.halfwidth();
    let tol = 1e-9 * h;
    let first = (((a + x) / h) - 1e-9).ceil().max(0.0) as usize;
    let mut idx = Vec::new();
    let mut i = first;
    while i <= u.cells() && u.node(i) <= b + tol {
        if u.node(i) >= a - tol {
            if i < k || i + k > u.cells() {
                return Err(Error::OutOfStencil { x: u.node(i), order: k });
            }
            idx.push(i);
        }
        i += stride;
    }
    if idx.len() < 2 {
        return Err(invalid(format!("region [{a}, {b}] holds fewer than two nodes")));
    }
    Ok(idx)
}

fn nodal_derivative(u: &GridFunction, k: usize, i: usize) -> f64 {
    if k == 0 {
        u.values()[i]
    } else {
        u.nodal_difference(k, i)
    }
}

/// Leading truncation error of the order-`k` central difference, maximized
/// over the nodes.
fn difference_bias(u: &GridFunction, k: usize, idx: &[usize]) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let v = u.values();
    let h = u.spacing();
    let n = u.cells();
    let mut worst = 0.0f64;
    for &i in idx {
        if i < 2 || i + 2 > n {
            continue;
        }
        let e = if k == 1 {
            (v[i + 2] - 2.0 * v[i + 1] + 2.0 * v[i - 1] - v[i - 2]) / (2.0 * h.powi(3)) * h * h / 6.0
        } else {
            (v[i + 2] - 4.0 * v[i + 1] + 6.0 * v[i] - 4.0 * v[i - 1] + v[i - 2]) / h.powi(4) * h * h / 12.0
        };
        worst = worst.max(e.abs());
    }
    worst
}

struct PairMax {
    value: f64,
    argmax: Option<(usize, usize)>,
    pairs: usize,
    exhaustive: bool,
}

/// `max_{i<j} w(i,j)|d_i − d_j| / |x_i − x_j|^γ` over all pairs or a
/// dyadic stratified sample.
fn pair_max(xs: &[f64], d: &[f64], gamma: f64, weight: &(dyn Fn(usize, usize) -> f64 + Sync), seed: u64) -> PairMax {
    let n = xs.len();
    let q = |i: usize, j: usize| weight(i, j) * (d[i] - d[j]).abs() / (xs[j] - xs[i]).abs().powf(gamma);
    let fold = |rows: Vec<(f64, Option<(usize, usize)>)>| {
        rows.into_iter()
            .fold((0.0f64, None), |acc, r| if r.0 > acc.0 { r } else { acc })
    };
    if n <= EXHAUSTIVE_LIMIT {
        let rows = par::map_range(n, |i| {
            let mut best = (0.0f64, None);
            for j in i + 1..n {
                let v = q(i, j);
                if v > best.0 {
                    best = (v, Some((i, j)));
                }
            }
            best
        });
        let (value, argmax) = fold(rows);
        return PairMax {
            value,
            argmax,
            pairs: n * (n - 1) / 2,
            exhaustive: true,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample: Vec<(usize, usize)> = Vec::new();
    let mut s = 1;
    while s < n {
        for i in 0..n - s {
            sample.push((i, i + s));
        }
        let hi = (2 * s).min(n);
        if hi > s + 1 {
            for _ in 0..n {
                let sep = rng.random_range(s + 1..hi);
                let i = rng.random_range(0..n - sep);
                sample.push((i, i + sep));
            }
        }
        s *= 2;
    }
    let chunk = 4096;
    let rows = par::map_range(sample.len().div_ceil(chunk), |c| {
        let mut best = (0.0f64, None);
        for &(i, j) in &sample[c * chunk..((c + 1) * chunk).min(sample.len())] {
            let v = q(i, j);
            if v > best.0 {
                best = (v, Some((i, j)));
            }
        }
        best
    });
    let (value, argmax) = fold(rows);
    PairMax {
        value,
        argmax,
        pairs: sample.len(),
        exhaustive: false,
    }
}

/// Exponent record for `(σ, α)`, including `α′` and `ν`.
pub fn alpha_prime(sigma: f64, alpha: f64) -> Result<HolderExponents> {
    HolderExponents::new(sigma, alpha)
}

/// `[u]_{C^β}` over the query region with diagnostics.
pub fn seminorm_report(u: &GridFunction, q: &SeminormQuery) -> Result<SeminormReport> {
    q.check()?;
    let k = q.beta.floor() as usize;
    let gamma = q.beta - k as f64;
    let (a, b) = q.region.bounds();
    let idx = region_nodes(u, a, b, q.stride, k)?;
    let xs: Vec<f64> = idx.iter().map(|&i| u.node(i)).collect();
    let d: Vec<f64> = idx.iter().map(|&i| nodal_derivative(u, k, i)).collect();
    let pm = pair_max(&xs, &d, gamma, &|_, _| 1.0, q.seed);
    let hmin = u.spacing() * q.stride as f64;
    Ok(SeminormReport {
        beta: q.beta,
        value: pm.value,
        argmax: pm.argmax.map(|(i, j)| [xs[i], xs[j]]),
        pairs: pm.pairs,
        exhaustive: pm.exhaustive,
        bias: 2.0 * difference_bias(u, k, &idx) / hmin.powf(gamma),
        spacing: u.spacing(),
    })
}

/// `[u]_{C^β}` over the query region.
pub fn seminorm(u: &GridFunction, q: &SeminormQuery) -> Result<f64> {
    seminorm_report(u, q).map(|r| r.value)
}

/// `sup d_{x,y}^β |D^k u(x) − D^k u(y)| / |x − y|^{β−k}` over `Ω = (a, b)`,
/// with `d_{x,y}` the smaller distance of `x, y` to `∂Ω`.
pub fn adimensional_seminorm(u: &GridFunction, beta: f64, omega: (f64, f64)) -> Result<f64> {
    let q = SeminormQuery::new(beta, Region::Interval { a: omega.0, b: omega.1 });
    q.check()?;
    let k = beta.floor() as usize;
    let idx = region_nodes(u, omega.0, omega.1, 1, k)?;
    let xs: Vec<f64> = idx.iter().map(|&i| u.node(i)).collect();
    let d: Vec<f64> = idx.iter().map(|&i| nodal_derivative(u, k, i)).collect();
    let dist = |x: f64| (x - omega.0).min(omega.1 - x).max(0.0);
    let w = |i: usize, j: usize| dist(xs[i]).min(dist(xs[j])).powf(beta);
    Ok(pair_max(&xs, &d, beta - k as f64, &w, 0).value)
}

/// `sup |D^k u|` over the region (`k = 0, 1, 2`).
pub fn sup_derivative(u: &GridFunction, k: usize, region: Region) -> Result<f64> {
    let (a, b) = region.bounds();
    let idx = region_nodes(u, a, b, 1, k)?;
    Ok(idx.iter().map(|&i| nodal_derivative(u, k, i).abs()).fold(0.0, f64::max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEntry {
    pub beta: f64,
    pub radius: f64,
    pub measured: f64,
    pub bound: f64,
    pub ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub c1: f64,
    pub entries: Vec<GrowthEntry>,
    pub pass: bool,
}

/// Checks `[u]_{C^β(B_R)} ≤ C₁ R^{σ+α−β}` for `β ∈ {0, …, ⌊σ+α′⌋} ∪ {σ+α′}`.
pub fn growth_control_check(u: &GridFunction, e: &HolderExponents, c1: f64, radii: &[f64]) -> Result<GrowthReport> {
    let top = e.sigma + e.alpha_prime;
    let mut betas: Vec<f64> = (0..=top.floor() as usize).map(|k| k as f64).collect();
    betas.push(top);
    let order = e.sigma + e.alpha;
    let mut entries = Vec::new();
    for &r in radii {
        if !(r >= 1.0) {
            return Err(invalid(format!("growth radius {r} below 1")));
        }
        let region = Region::Ball { center: 0.0, radius: r };
        for &beta in &betas {
            let measured = if beta.fract() == 0.0 {
                sup_derivative(u, beta as usize, region)?
            } else {
                seminorm(u, &SeminormQuery::new(beta, region))?
            };
            let bound = c1 * r.powf(order - beta);
            entries.push(GrowthEntry {
                beta,
                radius: r,
                measured,
                bound,
                ratio: measured / bound,
                pass: measured <= bound * (1.0 + 1e-9),
            });
        }
    }
    let pass = entries.iter().all(|e| e.pass);
    Ok(GrowthReport { c1, entries, pass })
}

/// Least-squares polynomial on `B_r(z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    pub degree: usize,
    pub center: f64,
    pub radius: f64,
    /// Coefficients of `(x − z)^j`.
    pub coeffs: Vec<f64>,
    /// `‖u − p‖_{L²(B_r(z))}`.
    pub residual: f64,
    /// Largest `|∫(u − p) q| / (‖u‖ ‖q‖)` over the Legendre basis `q`.
    pub orthogonality: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        crate::grid::horner(&self.coeffs, x - self.center)
    }
}

/// Monomial coefficients (in `t`) of the Legendre polynomials up to `n`.
fn legendre_monomials(n: usize) -> Vec<Vec<f64>> {
    let mut p = vec![vec![1.0]];
    if n >= 1 {
        p.push(vec![0.0, 1.0]);
    }
    for k in 1..n {
        // (k+1)P_{k+1} = (2k+1) t P_k − k P_{k−1}
        let mut next = vec![0.0; k + 2];
        for (j, c) in p[k].iter().enumerate() {
            next[j + 1] += (2 * k + 1) as f64 * c / (k + 1) as f64;
        }
        for (j, c) in p[k - 1].iter().enumerate() {
            next[j] -= k as f64 * c / (k + 1) as f64;
        }
        p.push(next);
    }
    p
}

/// Quadrature nodes and weights on `[lo, hi]` aligned with the grid cells.
fn ball_rule(u: &GridFunction, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let mut cuts = vec![lo];
    cuts.extend(u.nodes().filter(|&x| x > lo && x < hi));
    cuts.push(hi);
    let mut out = Vec::with_capacity(8 * cuts.len());
    for w in cuts.windows(2) {
        out.extend(gl8().mapped(w[0], w[1]));
    }
    out
}

/// Best `L²(B_r(z))` approximation of `u` of degree `ν`.
pub fn l2_poly_fit(u: &GridFunction, nu: usize, z: f64, r: f64) -> Result<PolyFit> {
    if !(r > 0.0) {
        return Err(invalid("fit radius must be positive"));
    }
    if nu > 6 {
        return Err(invalid("fit degree above 6"));
    }
    let rule = ball_rule(u, z - r, z + r);
    let legendre = legendre_monomials(nu);
    let basis = |j: usize, x: f64| crate::grid::horner(&legendre[j], (x - z) / r);
    let uv: Vec<f64> = rule.iter().map(|&(x, _)| u.eval(x)).collect();
    let m = nu + 1;
    let mut gram = DMatrix::<f64>::zeros(m, m);
    let mut rhs = DVector::<f64>::zeros(m);
    for (&(x, w), &ux) in rule.iter().zip(&uv) {
        let b: Vec<f64> = (0..m).map(|j| basis(j, x)).collect();
        for i in 0..m {
            rhs[i] += w * b[i] * ux;
            for j in 0..m {
                gram[(i, j)] += w * b[i] * b[j];
            }
        }
    }
    let a = gram
        .clone()
        .lu()
        .solve(&rhs)
        .ok_or_else(|| invalid("singular fit system"))?;
    // Legendre coefficients to monomials in (x − z).
    let mut coeffs = vec![0.0; m];
    for (j, poly) in legendre.iter().enumerate() {
        for (k, c) in poly.iter().enumerate() {
            coeffs[k] += a[j] * c / r.powi(k as i32);
        }
    }
    let fit = |x: f64| (0..m).map(|j| a[j] * basis(j, x)).sum::<f64>();
    let mut res2 = 0.0;
    let mut u2 = 0.0;
    let mut inner = vec![0.0; m];
    for (&(x, w), &ux) in rule.iter().zip(&uv) {
        let v = ux - fit(x);
        res2 += w * v * v;
        u2 += w * ux * ux;
        for (j, s) in inner.iter_mut().enumerate() {
            *s += w * v * basis(j, x);
        }
    }
    let orthogonality = if u2 == 0.0 {
        0.0
    } else {
        (0..m)
            .map(|j| inner[j].abs() / (u2.sqrt() * gram[(j, j)].sqrt()))
            .fold(0.0, f64::max)
    };
    Ok(PolyFit {
        degree: nu,
        center: z,
        radius: r,
        coeffs,
        residual: res2.sqrt(),
        orthogonality,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationReport {
    pub beta: f64,
    pub beta_prime: f64,
    /// `[u]_{C^β(B_{1/2})}`.
    pub lhs: f64,
    /// `sup r^{β′−β} [u]_{C^{β′}(B_r(z))}` over the samples.
    pub sup_scaled: f64,
    /// Sample `(r, z)` attaining the supremum.
    pub witness: Option<[f64; 2]>,
    pub ratio: f64,
    pub holds: bool,
}

/// Compares `[u]_{C^β(B_{1/2})}` with the scaled lower-order seminorms over
/// the sampled balls `B_r(z)`.
pub fn interpolation_claim_check(
    u: &GridFunction,
    beta: f64,
    beta_prime: f64,
    samples: &[(f64, f64)],
) -> Result<InterpolationReport> {
    if !(beta.floor() < beta_prime && beta_prime < beta) {
        return Err(invalid(format!("need ⌊β⌋ < β′ < β, got β = {beta}, β′ = {beta_prime}")));
    }
    if samples.is_empty() {
        return Err(invalid("no (r, z) samples"));
    }
    let lhs = seminorm(
        u,
        &SeminormQuery::new(
            beta,
            Region::Ball {
                center: 0.0,
                radius: 0.5,
            },
        ),
    )?;
    let scaled = par::try_map_range(samples.len(), |s| {
        let (r, z) = samples[s];
        let q = SeminormQuery::new(beta_prime, Region::Ball { center: z, radius: r });
        seminorm(u, &q).map(|v| r.powf(beta_prime - beta) * v)
    })?;
    let (best, witness) = scaled.iter().enumerate().fold(
        (0.0f64, None),
        |acc, (s, &v)| if v > acc.0 { (v, Some(s)) } else { acc },
    );
    let ratio = if best > 0.0 {
        lhs / best
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(InterpolationReport {
        beta,
        beta_prime,
        lhs,
        sup_scaled: best,
        witness: witness.map(|s| [samples[s].0, samples[s].1]),
        ratio,
        holds: lhs <= best * (1.0 + 1e-9) + 1e-12,
    })
}

/// Dyadic radii `2^{-1}, …, 2^{-levels}` with centers every `r/2` in
/// `[-1/2, 1/2]`.
pub fn dyadic_samples(levels: u32) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for l in 1..=levels {
        let r = 0.5f64.powi(l as i32);
        let steps = (1.0 / (r / 2.0)).round() as i64;
        for s in 0..=steps {
            out.push((r, -0.5 + s as f64 * r / 2.0));
        }
    }
    out
}
