//! Singular-integral engine shared by every operator evaluation.
//!
//! Computes `∫ r(s(y)) b(x, y)(2−σ)|y|^{−1−σ} dy` for a signal
//! `s(y) = Σ_k w_k δ²u(c_k, y)` and a positively homogeneous response `r`.
//! The integral is split into a Taylor term on `|y| < r₀`, panel quadrature
//! aligned with every break of the integrand up to the point where all
//! sides sit in the unbounded tail pieces, and a symbolic far field.

use crate::error::{Error, Result};
use crate::grid::{horner, poly_derivative, sign_sin_pi, GridFunction, TailFormula};
use crate::kernels::{FarProfile, Modulated};
use crate::quad::{common_period, gl16, gl8, periodic_power_tail, pow_integral, PeriodicPiece};

use super::QuadratureConfig;

/// One `w · δ²u(c, ·)` term of the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub center: f64,
    pub weight: f64,
}

/// Pointwise response applied to the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Response {
    Linear,
    /// `pos · s⁺ − neg · s⁻`.
    Extremal {
        pos: f64,
        neg: f64,
    },
    /// `s⁺`.
    Positive,
    /// `s⁻`.
    Negative,
}

impl Response {
    #[inline]
    pub fn apply(&self, s: f64) -> f64 {
        match *self {
            Response::Linear => s,
            Response::Extremal { pos, neg } => {
                if s >= 0.0 {
                    pos * s
                } else {
                    neg * s
                }
            }
            Response::Positive => s.max(0.0),
            Response::Negative => (-s).max(0.0),
        }
    }

    fn is_linear(&self) -> bool {
        matches!(self, Response::Linear)
    }
}

/// Kernel modulation used as integration weight.
#[derive(Clone, Copy)]
pub enum Weight<'a> {
    Flat,
    Kernel { kernel: &'a dyn Modulated, x: f64 },
}

impl Weight<'_> {
    #[inline]
    pub(crate) fn value(&self, y: f64) -> f64 {
        match self {
            Weight::Flat => 1.0,
            Weight::Kernel { kernel, x } => kernel.value(*x, y),
        }
    }

    pub(crate) fn constant_on(&self, lo: f64, hi: f64) -> Option<f64> {
        match self {
            Weight::Flat => Some(1.0),
            Weight::Kernel { kernel, x } => kernel.constant_on(*x, lo, hi),
        }
    }

    pub(crate) fn breaks(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if let Weight::Kernel { kernel, x } = self {
            kernel.breaks(*x, lo, hi, out);
        }
    }

    pub(crate) fn smooth_scale(&self) -> f64 {
        match self {
            Weight::Flat => f64::INFINITY,
            Weight::Kernel { kernel, .. } => kernel.smooth_scale(),
        }
    }

    pub(crate) fn far(&self) -> FarProfile {
        match self {
            Weight::Flat => FarProfile::Constant { from: 0.0, value: 1.0 },
            Weight::Kernel { kernel, x } => kernel.far_field(*x),
        }
    }

    pub(crate) fn near(&self, r: f64, sigma: f64) -> f64 {
        match self {
            Weight::Flat => crate::quad::flat_near_weight(r, sigma),
            Weight::Kernel { kernel, x } => kernel.near_weight(*x, r),
        }
    }
}

struct Signal<'a> {
    u: &'a GridFunction,
    terms: Vec<(f64, f64, f64)>, // (center, weight, u(center))
}

impl Signal<'_> {
    #[inline]
    fn eval(&self, y: f64) -> f64 {
        let mut s = 0.0;
        for &(c, w, uc) in &self.terms {
            s += w * (0.5 * (self.u.eval(c + y) + self.u.eval(c - y)) - uc);
        }
        s
    }

    /// Whether every side lies in a step tail piece at `y`.
    fn is_step_at(&self, y: f64) -> bool {
        let x = self.u.halfwidth();
        self.terms.iter().all(|&(c, _, _)| {
            [c + y, c - y]
                .iter()
                .all(|&p| p.abs() > x && self.u.tail().formula_at(p).is_some_and(TailFormula::is_step))
        })
    }

    pub(crate) fn smooth_scale(&self) -> f64 {
        self.u
            .tail()
            .pieces
            .iter()
            .filter_map(|p| match p.formula {
                TailFormula::Cos { frequency, .. } => Some(0.5 / frequency.abs()),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// `∫_ℝ r(s(y)) b(x,y)(2−σ)|y|^{−1−σ} dy`.
pub fn integrate(
    u: &GridFunction,
    terms: &[Term],
    response: Response,
    weight: Weight<'_>,
    sigma: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let terms: Vec<Term> = terms.iter().copied().filter(|t| t.weight != 0.0).collect();
    if terms.is_empty() {
        return Ok(0.0);
    }
    if let Some(p) = u.exact_polynomial() {
        return polynomial_signal(p, &terms, sigma);
    }
    let xw = u.halfwidth();
    let h = u.spacing();
    let mut r_near = cfg.r0.unwrap_or(4.0 * h);
    for t in &terms {
        let d = xw - t.center.abs();
        if d < h * (1.0 - 1e-9) {
            return Err(Error::OutOfDomain {
                x: t.center,
                reason: "evaluation point closer than one cell to the grid boundary",
            });
        }
        r_near = r_near.min(d);
    }
    let signal = Signal {
        u,
        terms: terms.iter().map(|t| (t.center, t.weight, u.eval(t.center))).collect(),
    };

    let s2: f64 = terms.iter().map(|t| t.weight * u.second_derivative(t.center)).sum();
    let near = response.apply(s2) * weight.near(r_near, sigma);

    let cmax = terms.iter().fold(0.0f64, |a, t| a.max(t.center.abs()));
    let reach = xw.max(u.tail().reach());
    let far_profile = weight.far();
    let y_far = (reach + cmax).max(far_profile.from()).max(r_near);

    let mid = mid_range(&signal, response, weight, sigma, cfg, r_near, y_far);
    let far = far_field(&signal, response, weight, sigma, y_far)?;
    Ok(near + mid + far)
}

fn polynomial_signal(p: &[f64], terms: &[Term], sigma: f64) -> Result<f64> {
    // δ²p(c, y) = Σ_j p^{(2j)}(c)/(2j)! y^{2j}
    let mut d = poly_derivative(&poly_derivative(p));
    let mut fact = 2.0;
    let mut j = 1;
    while !d.is_empty() {
        let mut coeff = 0.0;
        let mut scale = 0.0;
        let abs_d: Vec<f64> = d.iter().map(|c| c.abs()).collect();
        for t in terms {
            coeff += t.weight * horner(&d, t.center);
            scale += t.weight.abs() * horner(&abs_d, t.center.abs());
        }
        if coeff.abs() > 1e-12 * scale / fact * fact && coeff.abs() > 1e-300 {
            return Err(Error::DivergentTail {
                growth: 2.0 * j as f64,
                sigma,
            });
        }
        d = poly_derivative(&poly_derivative(&d));
        j += 1;
        fact *= (2 * j - 1) as f64 * (2 * j) as f64;
    }
    Ok(0.0)
}

pub(crate) fn push_unique(pts: &mut Vec<f64>) {
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs().max(1.0));
}

/// Panel quadrature on `[r_near, y_far]`.
fn mid_range(
    signal: &Signal<'_>,
    response: Response,
    weight: Weight<'_>,
    sigma: f64,
    cfg: &QuadratureConfig,
    lo: f64,
    hi: f64,
) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let u = signal.u;
    let xw = u.halfwidth();
    let mut pts = vec![lo, hi];
    let mut xb = Vec::new();
    for &(c, _, _) in &signal.terms {
        // grid nodes seen from c
        let n = u.cells();
        for j in 0..=n {
            let y = (u.node(j) - c).abs();
            if y > lo && y < hi {
                pts.push(y);
            }
        }
        for e in [xw - c, c + xw] {
            if e > lo && e < hi {
                pts.push(e);
            }
        }
        xb.clear();
        u.tail().breaks_in(c - hi, c + hi, &mut xb);
        for &b in &xb {
            let y = (b - c).abs();
            if y > lo && y < hi {
                pts.push(y);
            }
        }
    }
    weight.breaks(lo, hi, &mut pts);
    push_unique(&mut pts);

    let cap = signal.smooth_scale().min(weight.smooth_scale());
    let ratio = cfg.panel_ratio;
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        if signal.is_step_at(mid) {
            if let Some(bv) = weight.constant_on(a, b) {
                let s = signal.eval(mid);
                total += 2.0 * response.apply(s) * bv * (2.0 - sigma) * pow_integral(a, b, 1.0 + sigma);
                continue;
            }
        }
        let n_ratio = ((b / a).ln() / ratio.ln()).ceil().max(1.0);
        let n_len = if cap.is_finite() { ((b - a) / cap).ceil() } else { 1.0 };
        let n = n_ratio.max(n_len) as usize;
        let geometric = n_len <= n_ratio;
        for k in 0..n {
            let (pa, pb) = if geometric {
                let q = (b / a).powf(1.0 / n as f64);
                (
                    a * q.powi(k as i32),
                    if k + 1 == n { b } else { a * q.powi(k as i32 + 1) },
                )
            } else {
                (
                    a + (b - a) * k as f64 / n as f64,
                    if k + 1 == n {
                        b
                    } else {
                        a + (b - a) * (k + 1) as f64 / n as f64
                    },
                )
            };
            total += 2.0 * panel(signal, response, weight, sigma, pa, pb, gl8());
        }
    }
    total
}

/// `∫_a^b r(s) b κ` by Gauss–Legendre, split at sign changes of `s` for
/// nonlinear responses.
fn panel(
    signal: &Signal<'_>,
    response: Response,
    weight: Weight<'_>,
    sigma: f64,
    a: f64,
    b: f64,
    rule: &crate::quad::GaussLegendre,
) -> f64 {
    let f = |y: f64| response.apply(signal.eval(y)) * weight.value(y) * (2.0 - sigma) * y.powf(-1.0 - sigma);
    if response.is_linear() {
        return rule.integrate(a, b, f);
    }
    let mut cuts = vec![a];
    cuts.extend(sign_changes(|y| signal.eval(y), a, b, rule));
    cuts.push(b);
    cuts.windows(2).map(|w| rule.integrate(w[0], w[1], f)).sum()
}

/// Roots of `s` on `(a, b)` located by sampling at the rule nodes and
/// bisecting each bracket to `1e-12`.
pub(crate) fn sign_changes(s: impl Fn(f64) -> f64, a: f64, b: f64, rule: &crate::quad::GaussLegendre) -> Vec<f64> {
    let mut xs = vec![a];
    xs.extend(rule.mapped(a, b).map(|(x, _)| x));
    xs.push(b);
    let vs: Vec<f64> = xs.iter().map(|&x| s(x)).collect();
    let mut roots = Vec::new();
    for i in 0..xs.len() - 1 {
        if vs[i] * vs[i + 1] < 0.0 {
            let (mut lo, mut hi, mut flo) = (xs[i], xs[i + 1], vs[i]);
            while hi - lo > 1e-12 * hi.max(1.0) {
                let m = 0.5 * (lo + hi);
                let fm = s(m);
                if fm == 0.0 {
                    lo = m;
                    hi = m;
                    break;
                }
                if (fm < 0.0) == (flo < 0.0) {
                    lo = m;
                    flo = fm;
                } else {
                    hi = m;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
    }
    roots
}

#[derive(Debug, Clone, Copy)]
enum OscKind {
    SignSin { m: f64 },
    Cos { frequency: f64, phase: f64 },
}

/// `factor · f(shift + dir·y)` with `f` oscillating.
#[derive(Debug, Clone, Copy)]
struct Osc {
    factor: f64,
    shift: f64,
    dir: f64,
    kind: OscKind,
}

impl Osc {
    #[inline]
    fn eval(&self, y: f64) -> f64 {
        let t = self.shift + self.dir * y;
        match self.kind {
            OscKind::SignSin { m } => self.factor * sign_sin_pi(m * t),
            OscKind::Cos { frequency, phase } => self.factor * (frequency * t + phase).cos(),
        }
    }

    fn period(&self) -> f64 {
        match self.kind {
            OscKind::SignSin { m } => 2.0 / m,
            OscKind::Cos { frequency, .. } => 2.0 * std::f64::consts::PI / frequency.abs(),
        }
    }

    pub(crate) fn breaks(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if let OscKind::SignSin { m } = self.kind {
            let (t0, t1) = {
                let a = self.shift + self.dir * lo;
                let b = self.shift + self.dir * hi;
                (a.min(b), a.max(b))
            };
            let k0 = (t0 * m).ceil() as i64;
            let k1 = (t1 * m).floor() as i64;
            for k in k0..=k1 {
                let y = (k as f64 / m - self.shift) * self.dir;
                if y > lo && y < hi {
                    out.push(y);
                }
            }
        }
    }
}

/// Signal on `y ≥ y_far`, where every side sits in an unbounded tail piece.
struct FarSignal {
    constant: f64,
    constant_scale: f64,
    /// Coefficients of `y^k`, `k ≥ 1`, with absolute scales for snapping.
    poly: Vec<f64>,
    poly_scale: Vec<f64>,
    /// Groups `Σ_i A_i (y + s_i)^p` keyed by exponent.
    powers: Vec<(f64, Vec<(f64, f64)>)>,
    osc: Vec<Osc>,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl FarSignal {
    fn build(signal: &Signal<'_>) -> Self {
        let (left, right) = signal.u.tail().far_pieces();
        let mut fs = FarSignal {
            constant: 0.0,
            constant_scale: 0.0,
            poly: Vec::new(),
            poly_scale: Vec::new(),
            powers: Vec::new(),
            osc: Vec::new(),
        };
        for &(c, w, uc) in &signal.terms {
            fs.constant -= w * uc;
            fs.constant_scale += (w * uc).abs();
            for (formula, dir) in [(&right.formula, 1.0), (&left.formula, -1.0)] {
                fs.add_side(formula, 0.5 * w, c, dir);
            }
        }
        fs
    }

    fn add_side(&mut self, f: &TailFormula, factor: f64, c: f64, dir: f64) {
        match f {
            TailFormula::Zero => {}
            TailFormula::Constant { value } => {
                self.constant += factor * value;
                self.constant_scale += (factor * value).abs();
            }
            TailFormula::SignSin { m, amplitude } => self.osc.push(Osc {
                factor: factor * amplitude,
                shift: c,
                dir,
                kind: OscKind::SignSin { m: *m as f64 },
            }),
            TailFormula::Cos {
                amplitude,
                frequency,
                phase,
            } => self.osc.push(Osc {
                factor: factor * amplitude,
                shift: c,
                dir,
                kind: OscKind::Cos {
                    frequency: *frequency,
                    phase: *phase,
                },
            }),
            TailFormula::Polynomial { coeffs } => {
                // Σ a_k (c + dir·y)^k expanded in powers of y.
                for (k, a) in coeffs.iter().enumerate() {
                    for j in 0..=k {
                        let coef = factor * a * binomial(k, j) * c.powi((k - j) as i32) * dir.powi(j as i32);
                        if j == 0 {
                            self.constant += coef;
                            self.constant_scale += coef.abs();
                        } else {
                            if self.poly.len() <= j {
                                self.poly.resize(j + 1, 0.0);
                                self.poly_scale.resize(j + 1, 0.0);
                            }
                            self.poly[j] += coef;
                            self.poly_scale[j] += coef.abs();
                        }
                    }
                }
            }
            TailFormula::Power { coefficient, exponent } => {
                // |c + dir·y|^p = (y + dir·c)^p for large y.
                let entry = (factor * coefficient, dir * c);
                match self.powers.iter_mut().find(|(p, _)| *p == *exponent) {
                    Some((_, v)) => v.push(entry),
                    None => self.powers.push((*exponent, vec![entry])),
                }
            }
        }
    }

    /// Snaps cancelled coefficients and returns the growth exponent
    /// (`-inf` when the non-oscillating part vanishes identically).
    fn normalize(&mut self) -> f64 {
        let mut growth = f64::NEG_INFINITY;
        if self.constant.abs() <= 1e-13 * self.constant_scale {
            self.constant = 0.0;
        }
        if self.constant != 0.0 {
            growth = 0.0;
        }
        for k in 1..self.poly.len() {
            if self.poly[k].abs() <= 1e-12 * self.poly_scale[k] {
                self.poly[k] = 0.0;
            }
            if self.poly[k] != 0.0 {
                growth = growth.max(k as f64);
            }
        }
        for (p, group) in &self.powers {
            let scale: f64 = group.iter().map(|(a, s)| (a * (1.0 + s.abs()).powi(2)).abs()).sum();
            let m0: f64 = group.iter().map(|(a, _)| a).sum();
            let m1: f64 = group.iter().map(|(a, s)| a * s).sum();
            let g = if m0.abs() > 1e-12 * scale {
                *p
            } else if m1.abs() > 1e-12 * scale {
                p - 1.0
            } else {
                p - 2.0
            };
            growth = growth.max(g);
        }
        growth
    }

    fn non_osc(&self, y: f64) -> f64 {
        let mut s = self.constant;
        for (k, c) in self.poly.iter().enumerate().skip(1) {
            if *c != 0.0 {
                s += c * y.powi(k as i32);
            }
        }
        for (p, group) in &self.powers {
            let m0: f64 = group.iter().map(|(a, _)| a).sum();
            let scale: f64 = group.iter().map(|(a, _)| a.abs()).sum();
            let m0 = if m0.abs() <= 1e-12 * scale { 0.0 } else { m0 };
            let dev: f64 = group.iter().map(|(a, sh)| a * (p * (sh / y).ln_1p()).exp_m1()).sum();
            s += y.powf(*p) * (dev + m0);
        }
        s
    }

    fn eval(&self, y: f64) -> f64 {
        self.non_osc(y) + self.osc.iter().map(|o| o.eval(y)).sum::<f64>()
    }

    fn has_growth_terms(&self) -> bool {
        self.poly.iter().skip(1).any(|c| *c != 0.0) || !self.powers.is_empty()
    }
}

fn far_field(signal: &Signal<'_>, response: Response, weight: Weight<'_>, sigma: f64, y_far: f64) -> Result<f64> {
    let mut fs = FarSignal::build(signal);
    let growth = fs.normalize();
    if growth >= sigma {
        return Err(Error::DivergentTail { growth, sigma });
    }
    let far = weight.far();
    let kappa = |y: f64| (2.0 - sigma) * y.powf(-1.0 - sigma);

    if fs.osc.is_empty() && !fs.has_growth_terms() {
        // Constant signal.
        let s = fs.constant;
        if s == 0.0 {
            return Ok(0.0);
        }
        if let FarProfile::Constant { value, .. } = far {
            return Ok(2.0
                * response.apply(s)
                * value
                * (2.0 - sigma)
                * pow_integral(y_far, f64::INFINITY, 1.0 + sigma));
        }
    }

    if fs.osc.is_empty() && !matches!(far, FarProfile::Periodic { .. }) {
        // Smooth, non-oscillating: geometric panels then a leading-order
        // remainder.
        let rule = gl16();
        let mut total = 0.0;
        let mut a = y_far;
        let end = y_far * 2f64.powi(40);
        let f = |y: f64| response.apply(fs.eval(y)) * weight.value(y) * kappa(y);
        while a < end {
            let b = 2.0 * a;
            if response.is_linear() {
                total += rule.integrate(a, b, f);
            } else {
                let mut cuts = vec![a];
                cuts.extend(sign_changes(|y| fs.eval(y), a, b, rule));
                cuts.push(b);
                total += cuts.windows(2).map(|w| rule.integrate(w[0], w[1], f)).sum::<f64>();
            }
            a = b;
        }
        let g = growth.max(0.0);
        let b_end = match far {
            FarProfile::Constant { value, .. } => value,
            FarProfile::Asymptotic { limit, .. } if limit.is_finite() => limit,
            _ => weight.value(end),
        };
        let s_end = fs.eval(end);
        total += response.apply(s_end) * b_end * (2.0 - sigma) * end.powf(-sigma) / (sigma - g);
        return Ok(2.0 * total);
    }

    if fs.has_growth_terms() {
        return Err(Error::Unsupported(
            "growing tail combined with an oscillating tail or kernel".into(),
        ));
    }
    let mut period: Option<f64> = None;
    let mut fold = |p: f64| -> Result<()> {
        period = Some(match period {
            None => p,
            Some(q) => common_period(q, p)
                .ok_or_else(|| Error::Unsupported(format!("incommensurate periods {q} and {p} in the far field")))?,
        });
        Ok(())
    };
    for o in &fs.osc {
        fold(o.period())?;
    }
    match far {
        FarProfile::Periodic { period: p, .. } => fold(p)?,
        FarProfile::Asymptotic { .. } => {
            return Err(Error::Unsupported(
                "oscillating tail against a non-periodic smooth kernel".into(),
            ))
        }
        FarProfile::Constant { .. } => {}
    }
    let period = period.expect("oscillating far field has a period");

    let start = y_far;
    let end = start + period;
    let mut pts = vec![start, end];
    for o in &fs.osc {
        o.breaks(start, end, &mut pts);
    }
    weight.breaks(start, end, &mut pts);
    push_unique(&mut pts);
    let smooth_osc = fs.osc.iter().any(|o| matches!(o.kind, OscKind::Cos { .. }));
    let cap = (period / 16.0).min(weight.smooth_scale());
    let rule = gl16();
    let mut pieces = Vec::new();
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let bconst = weight.constant_on(a, b);
        if !smooth_osc {
            if let Some(bv) = bconst {
                pieces.push(PeriodicPiece {
                    a: a - start,
                    b: b - start,
                    value: Some(response.apply(fs.eval(mid)) * bv),
                });
                continue;
            }
        }
        let n = ((b - a) / cap).ceil().max(1.0) as usize;
        for k in 0..n {
            let pa = a + (b - a) * k as f64 / n as f64;
            let pb = if k + 1 == n {
                b
            } else {
                a + (b - a) * (k + 1) as f64 / n as f64
            };
            let mut cuts = vec![pa];
            if !response.is_linear() {
                cuts.extend(sign_changes(|y| fs.eval(y), pa, pb, rule));
            }
            cuts.push(pb);
            for c in cuts.windows(2) {
                pieces.push(PeriodicPiece {
                    a: c[0] - start,
                    b: c[1] - start,
                    value: None,
                });
            }
        }
    }
    let smooth = |y: f64| response.apply(fs.eval(y)) * weight.value(y);
    Ok(2.0 * periodic_power_tail(start, period, &pieces, sigma, &smooth))
}
