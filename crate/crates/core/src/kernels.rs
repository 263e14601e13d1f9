//! Kernel classes: power-law envelopes with piecewise modulations, their
//! certification, and the mollified kernels used by the small-ball solver.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::sign_cos_pi;
use crate::params::{check_sigma, EllipticityParams};
use crate::quad::{gl16, pow_integral};

/// Large-`|y|` structure of a modulation, used by the tail quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FarProfile {
    /// `b(x, y) = value` for `|y| ≥ from`.
    Constant { from: f64, value: f64 },
    /// `b(x, y + period) = b(x, y)` for `|y| ≥ from`.
    Periodic { from: f64, period: f64 },
    /// Smooth for `|y| ≥ from`, tending to `limit`.
    Asymptotic { from: f64, limit: f64 },
}

impl FarProfile {
    pub fn from(&self) -> f64 {
        match *self {
            FarProfile::Constant { from, .. }
            | FarProfile::Periodic { from, .. }
            | FarProfile::Asymptotic { from, .. } => from,
        }
    }
}

/// A kernel `b(x, y)(2−σ)|y|^{−1−σ}` seen through its modulation `b`.
///
/// Every method works with `|y|`; modulations are even in `y`.
pub trait Modulated: Sync {
    fn sigma(&self) -> f64;

    /// `b(x, y)` for `y ≠ 0`.
    fn value(&self, x: f64, y: f64) -> f64;

    /// Points of `(lo, hi)` where `b(x, ·)` jumps or changes analytic form.
    fn breaks(&self, x: f64, lo: f64, hi: f64, out: &mut Vec<f64>);

    /// `Some(v)` when `b(x, ·) ≡ v` on `(lo, hi)`, an interval free of breaks.
    fn constant_on(&self, x: f64, lo: f64, hi: f64) -> Option<f64>;

    /// Panel length that resolves the smooth parts of `b`.
    fn smooth_scale(&self) -> f64;

    fn far_field(&self, x: f64) -> FarProfile;

    /// `∫_0^r b(x, y)(2−σ) y^{1−σ} dy`, the weight of `u''` in the
    /// near-origin Taylor term.
    fn near_weight(&self, x: f64, r: f64) -> f64 {
        let s = self.sigma();
        let q = 2.0 - s;
        let mut pts = vec![0.0];
        self.breaks(x, 0.0, r, &mut pts);
        pts.push(r);
        pts.sort_by(f64::total_cmp);
        let rule = gl16();
        let scale = self.smooth_scale();
        let mut total = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            if let Some(v) = self.constant_on(x, a, b) {
                total += v * (b.powf(q) - a.powf(q));
                continue;
            }
            let n = ((b - a) / scale).ceil().max(1.0) as usize;
            for k in 0..n {
                let (ya, yb) = (
                    a + (b - a) * k as f64 / n as f64,
                    a + (b - a) * (k + 1) as f64 / n as f64,
                );
                total += rule.integrate(ya.powf(q), yb.powf(q), |t| self.value(x, t.powf(1.0 / q)));
            }
        }
        total
    }
}

/// Profile of a modulation on one `|y|` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant {
        value: f64,
    },
    /// `base + amplitude · sign cos(mπy)`.
    SignCos {
        m: u32,
        #[serde(default = "two")]
        base: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `base + amplitude · cos(frequency · y)`.
    Cosine {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

impl Profile {
    fn eval(&self, y: f64) -> f64 {
        match *self {
            Profile::Constant { value } => value,
            Profile::SignCos { m, base, amplitude } => base + amplitude * sign_cos_pi(m as f64 * y),
            Profile::Cosine {
                base,
                amplitude,
                frequency,
            } => base + amplitude * (frequency * y).cos(),
        }
    }

    fn is_step(&self) -> bool {
        !matches!(self, Profile::Cosine { amplitude, .. } if *amplitude != 0.0)
    }

    fn jumps(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if let Profile::SignCos { m, amplitude, .. } = *self {
            if amplitude == 0.0 {
                return;
            }
            let two_m = 2.0 * m as f64;
            // sign cos(mπy) jumps at y = (2k+1)/(2m).
            let k0 = ((lo * two_m - 1.0) / 2.0).ceil().max(0.0) as i64;
            let mut k = k0;
            loop {
                let y = (2 * k + 1) as f64 / two_m;
                if y >= hi {
                    break;
                }
                if y > lo {
                    out.push(y);
                }
                k += 1;
            }
        }
    }
}

/// Modulation on `|y| ∈ [from, to)`; `to = None` means infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModPiece {
    pub from: f64,
    pub to: Option<f64>,
    pub profile: Profile,
}

/// Value of the modulation inside the inner radius of `sign_cos`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inner {
    #[default]
    Flat,
    Constant(f64),
}

/// Kernel modulation DSL.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Modulation {
    #[default]
    Flat,
    /// `inner` on `|y| < radius`, `base + amplitude·sign cos(mπy)` beyond.
    SignCos {
        m: u32,
        #[serde(default)]
        inner: Inner,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "two")]
        base: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Cosine {
        base: f64,
        amplitude: f64,
        frequency: f64,
    },
    Piecewise {
        pieces: Vec<ModPiece>,
    },
}

/// Multiplicative `x`-dependence `a(x)` of the modulation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum XFactor {
    #[default]
    None,
    /// `a(x) = 1 + amplitude · min(1, |x|^alpha)`.
    HolderCap { amplitude: f64, alpha: f64 },
}

impl XFactor {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            XFactor::None => 1.0,
            XFactor::HolderCap { amplitude, alpha } => 1.0 + amplitude * x.abs().powf(alpha).min(1.0),
        }
    }

    fn range(&self) -> (f64, f64, f64, f64) {
        // (min, argmin x, max, argmax x)
        match *self {
            XFactor::None => (1.0, 0.0, 1.0, 0.0),
            XFactor::HolderCap { amplitude, .. } if amplitude >= 0.0 => (1.0, 0.0, 1.0 + amplitude, 1.0),
            XFactor::HolderCap { amplitude, .. } => (1.0 + amplitude, 1.0, 1.0, 0.0),
        }
    }
}

/// `K(x, y) = a(x) b(y) (2−σ)|y|^{−1−σ}` with an even modulation `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRaw", into = "KernelSpecRaw")]
pub struct KernelSpec {
    sigma: f64,
    modulation: Modulation,
    x_factor: XFactor,
    pieces: Vec<ModPiece>,
}

#[derive(Serialize, Deserialize)]
struct KernelSpecRaw {
    sigma: f64,
    #[serde(default)]
    modulation: Modulation,
    #[serde(default, skip_serializing_if = "is_none_factor")]
    x_factor: XFactor,
}

fn is_none_factor(x: &XFactor) -> bool {
    *x == XFactor::None
}

impl TryFrom<KernelSpecRaw> for KernelSpec {
    type Error = Error;
    fn try_from(r: KernelSpecRaw) -> Result<Self> {
        Self::new(r.sigma, r.modulation)?.with_x_factor(r.x_factor)
    }
}

impl From<KernelSpec> for KernelSpecRaw {
    fn from(k: KernelSpec) -> Self {
        Self {
            sigma: k.sigma,
            modulation: k.modulation,
            x_factor: k.x_factor,
        }
    }
}

impl KernelSpec {
    pub fn new(sigma: f64, modulation: Modulation) -> Result<Self> {
        check_sigma(sigma)?;
        let pieces = normalize(&modulation)?;
        Ok(Self {
            sigma,
            modulation,
            x_factor: XFactor::None,
            pieces,
        })
    }

    /// `b ≡ 1`.
    pub fn flat(sigma: f64) -> Result<Self> {
        Self::new(sigma, Modulation::Flat)
    }

    /// Flat on `|y| < 1`, `2 + sign cos(mπy)` beyond.
    pub fn oscillating(sigma: f64, m: u32) -> Result<Self> {
        Self::new(
            sigma,
            Modulation::SignCos {
                m,
                inner: Inner::Flat,
                radius: 1.0,
                base: 2.0,
                amplitude: 1.0,
            },
        )
    }

    pub fn with_x_factor(mut self, f: XFactor) -> Result<Self> {
        if let XFactor::HolderCap { amplitude, alpha } = f {
            if !(alpha > 0.0 && amplitude > -1.0 && amplitude.is_finite()) {
                return Err(invalid("x factor needs alpha > 0 and amplitude > -1"));
            }
        }
        self.x_factor = f;
        Ok(self)
    }

    pub fn modulation(&self) -> &Modulation {
        &self.modulation
    }
    pub fn x_factor(&self) -> XFactor {
        self.x_factor
    }
    pub fn pieces(&self) -> &[ModPiece] {
        &self.pieces
    }

    fn piece_for(&self, t: f64) -> &ModPiece {
        let i = self.pieces.partition_point(|p| p.from <= t);
        &self.pieces[i.saturating_sub(1)]
    }

    /// `b(y)` without the `x` factor.
    pub fn profile_value(&self, y: f64) -> f64 {
        let t = y.abs();
        self.piece_for(t).profile.eval(t)
    }

    /// `K(x, y)`.
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        if y == 0.0 {
            return Err(Error::SingularArgument);
        }
        Ok(self.value(x, y) * (2.0 - self.sigma) * y.abs().powf(-1.0 - self.sigma))
    }

    /// Whether `b(x, ·)` is piecewise constant.
    pub fn is_step(&self) -> bool {
        self.pieces.iter().all(|p| p.profile.is_step())
    }

    /// `∫_lo^hi b(y)(2−σ) y^{-1-σ} dy` for `0 < lo < hi ≤ ∞` (no x factor).
    pub fn profile_mass(&self, lo: f64, hi: f64) -> f64 {
        let s = self.sigma;
        let mut total = 0.0;
        for p in &self.pieces {
            let a = p.from.max(lo);
            let b = p.to.unwrap_or(f64::INFINITY).min(hi);
            if a >= b {
                continue;
            }
            match p.profile {
                Profile::Constant { value } => total += value * (2.0 - s) * pow_integral(a, b, 1.0 + s),
                Profile::SignCos { m, base, amplitude } => {
                    total += base * (2.0 - s) * pow_integral(a, b, 1.0 + s);
                    if amplitude != 0.0 {
                        let osc = if b.is_infinite() {
                            let period = 2.0 / m as f64;
                            let mut pts = Vec::new();
                            p.profile.jumps(a, a + period, &mut pts);
                            let mut edges = vec![0.0];
                            edges.extend(pts.iter().map(|y| y - a));
                            edges.push(period);
                            let pieces: Vec<_> = edges
                                .windows(2)
                                .map(|w| crate::quad::PeriodicPiece {
                                    a: w[0],
                                    b: w[1],
                                    value: Some(sign_cos_pi(m as f64 * (a + 0.5 * (w[0] + w[1])))),
                                })
                                .collect();
                            crate::quad::periodic_power_tail(a, period, &pieces, s, &|_| 0.0)
                        } else {
                            let mut pts = vec![a];
                            p.profile.jumps(a, b, &mut pts);
                            pts.push(b);
                            pts.windows(2)
                                .map(|w| {
                                    sign_cos_pi(m as f64 * 0.5 * (w[0] + w[1]))
                                        * (2.0 - s)
                                        * pow_integral(w[0], w[1], 1.0 + s)
                                })
                                .sum()
                        };
                        total += amplitude * osc;
                    }
                }
                Profile::Cosine { .. } => {
                    let end = if b.is_infinite() { a.max(1.0) * 1e4 } else { b };
                    let scale = self.smooth_scale();
                    let rule = gl16();
                    let mut y = a;
                    while y < end {
                        let step = (0.5 * y).min(scale);
                        let z = (y + step).min(end);
                        total += rule.integrate(y, z, |t| p.profile.eval(t) * (2.0 - s) * t.powf(-1.0 - s));
                        y = z;
                    }
                    if b.is_infinite() {
                        if let Profile::Cosine { base, .. } = p.profile {
                            total += base * (2.0 - s) * pow_integral(end, f64::INFINITY, 1.0 + s);
                        }
                    }
                }
            }
        }
        total
    }
}

fn normalize(m: &Modulation) -> Result<Vec<ModPiece>> {
    let pieces = match m {
        Modulation::Flat => vec![ModPiece {
            from: 0.0,
            to: None,
            profile: Profile::Constant { value: 1.0 },
        }],
        Modulation::SignCos {
            m,
            inner,
            radius,
            base,
            amplitude,
        } => {
            if *m == 0 || !(*radius >= 0.0) {
                return Err(invalid("sign_cos modulation needs m >= 1 and radius >= 0"));
            }
            let value = match inner {
                Inner::Flat => 1.0,
                Inner::Constant(v) => *v,
            };
            let mut v = Vec::new();
            if *radius > 0.0 {
                v.push(ModPiece {
                    from: 0.0,
                    to: Some(*radius),
                    profile: Profile::Constant { value },
                });
            }
            v.push(ModPiece {
                from: *radius,
                to: None,
                profile: Profile::SignCos {
                    m: *m,
                    base: *base,
                    amplitude: *amplitude,
                },
            });
            v
        }
        Modulation::Cosine {
            base,
            amplitude,
            frequency,
        } => vec![ModPiece {
            from: 0.0,
            to: None,
            profile: Profile::Cosine {
                base: *base,
                amplitude: *amplitude,
                frequency: *frequency,
            },
        }],
        Modulation::Piecewise { pieces } => pieces.clone(),
    };
    let mut cursor = 0.0;
    for (i, p) in pieces.iter().enumerate() {
        if p.from != cursor {
            return Err(invalid(format!(
                "modulation pieces must tile [0, inf): gap at {cursor}"
            )));
        }
        match p.to {
            Some(t) if t > p.from => cursor = t,
            None if i + 1 == pieces.len() => cursor = f64::INFINITY,
            _ => return Err(invalid("modulation piece is empty or unbounded before the last")),
        }
        let ok = match p.profile {
            Profile::Constant { value } => value > 0.0 && value.is_finite(),
            Profile::SignCos { m, base, amplitude } => m > 0 && base - amplitude.abs() > 0.0,
            Profile::Cosine {
                base,
                amplitude,
                frequency,
            } => base - amplitude.abs() > 0.0 && frequency > 0.0 && frequency.is_finite(),
        };
        if !ok {
            return Err(invalid(format!("modulation profile {:?} is not positive", p.profile)));
        }
    }
    if cursor != f64::INFINITY {
        return Err(invalid("modulation must extend to infinity"));
    }
    Ok(pieces)
}

impl Modulated for KernelSpec {
    fn sigma(&self) -> f64 {
        self.sigma
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.x_factor.eval(x) * self.profile_value(y)
    }

    fn breaks(&self, _x: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
        for p in &self.pieces {
            let to = p.to.unwrap_or(f64::INFINITY);
            if p.from > lo && p.from < hi {
                out.push(p.from);
            }
            let a = p.from.max(lo);
            let b = to.min(hi);
            if a < b {
                p.profile.jumps(a, b, out);
            }
        }
    }

    fn constant_on(&self, x: f64, lo: f64, hi: f64) -> Option<f64> {
        let mid = if hi.is_infinite() { lo + 1.0 } else { 0.5 * (lo + hi) };
        let p = self.piece_for(mid);
        p.profile.is_step().then(|| self.x_factor.eval(x) * p.profile.eval(mid))
    }

    fn smooth_scale(&self) -> f64 {
        self.pieces
            .iter()
            .filter_map(|p| match p.profile {
                Profile::Cosine {
                    frequency, amplitude, ..
                } if amplitude != 0.0 => Some(0.5 / frequency),
                _ => None,
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn far_field(&self, x: f64) -> FarProfile {
        let last = self.pieces.last().expect("normalized modulation is nonempty");
        let a = self.x_factor.eval(x);
        match last.profile {
            Profile::Constant { value } => FarProfile::Constant {
                from: last.from,
                value: a * value,
            },
            Profile::SignCos { m, amplitude, base } if amplitude != 0.0 => {
                let _ = base;
                FarProfile::Periodic {
                    from: last.from,
                    period: 2.0 / m as f64,
                }
            }
            Profile::SignCos { base, .. } => FarProfile::Constant {
                from: last.from,
                value: a * base,
            },
            Profile::Cosine {
                frequency,
                amplitude,
                base,
            } => {
                if amplitude == 0.0 {
                    FarProfile::Constant {
                        from: last.from,
                        value: a * base,
                    }
                } else {
                    FarProfile::Periodic {
                        from: last.from,
                        period: 2.0 * std::f64::consts::PI / frequency,
                    }
                }
            }
        }
    }
}

/// Outcome of an `L₀` certification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Report {
    #[serde(rename = "L0")]
    pub pass: bool,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    /// Smallest and largest modulation values found.
    pub b_min: f64,
    pub b_max: f64,
    /// Derivative-based uncertainty of the sampled extrema (0 when exact).
    pub sampling_margin: f64,
    /// `(x, y)` where a bound fails.
    pub witness: Option<[f64; 2]>,
}

fn l0_report(p: &EllipticityParams, lo: (f64, [f64; 2]), hi: (f64, [f64; 2]), margin: f64) -> L0Report {
    let tol = 1e-12 * p.big_lambda;
    let low_ok = lo.0 >= p.lambda - tol;
    let high_ok = hi.0 <= p.big_lambda + tol;
    let witness = if !low_ok {
        Some(lo.1)
    } else if !high_ok {
        Some(hi.1)
    } else {
        None
    };
    L0Report {
        pass: low_ok && high_ok,
        lambda: p.lambda,
        big_lambda: p.big_lambda,
        b_min: lo.0,
        b_max: hi.0,
        sampling_margin: margin,
        witness,
    }
}

/// Checks `λ ≤ b ≤ Λ`: exactly for step profiles, by sampling with a
/// derivative bound for smooth ones.
pub fn check_l0(k: &KernelSpec, p: &EllipticityParams) -> L0Report {
    let (amin, xmin, amax, xmax) = k.x_factor.range();
    let mut lo = (f64::INFINITY, [0.0, 0.0]);
    let mut hi = (f64::NEG_INFINITY, [0.0, 0.0]);
    let mut margin: f64 = 0.0;
    let mut visit = |v: f64, y: f64| {
        if v < lo.0 {
            lo = (v, [xmin, y]);
        }
        if v > hi.0 {
            hi = (v, [xmax, y]);
        }
    };
    for piece in &k.pieces {
        let from = piece.from;
        let to = piece.to.unwrap_or(f64::INFINITY);
        match piece.profile {
            Profile::Constant { value } => {
                let y = if to.is_finite() { 0.5 * (from + to) } else { from + 1.0 };
                visit(value, y);
            }
            Profile::SignCos { m, .. } => {
                let end = if to.is_finite() { to } else { from + 4.0 / m as f64 };
                let mut pts = vec![from];
                piece.profile.jumps(from, end, &mut pts);
                pts.push(end);
                for w in pts.windows(2) {
                    let y = 0.5 * (w[0] + w[1]);
                    visit(piece.profile.eval(y), y);
                }
            }
            Profile::Cosine {
                amplitude, frequency, ..
            } => {
                let period = 2.0 * std::f64::consts::PI / frequency;
                let end = if to.is_finite() {
                    to.min(from + period)
                } else {
                    from + period
                };
                let n = 1000;
                let dy = (end - from) / (n - 1) as f64;
                for i in 0..n {
                    let y = from + i as f64 * dy;
                    visit(piece.profile.eval(y), y);
                }
                margin = margin.max(0.5 * amplitude.abs() * frequency * dy);
            }
        }
    }
    let lo = (lo.0 * if lo.0 >= 0.0 { amin } else { amax }, lo.1);
    let hi = (hi.0 * if hi.0 >= 0.0 { amax } else { amin }, hi.1);
    l0_report(p, lo, hi, margin * amax)
}

/// Sampled `L₀` check for any modulation: 1000 samples per break-free
/// piece of `(0, y_max]` at each `x` plus one far period.
pub fn check_l0_sampled(k: &dyn Modulated, p: &EllipticityParams, xs: &[f64], y_min: f64, y_max: f64) -> L0Report {
    let mut lo = (f64::INFINITY, [0.0, 0.0]);
    let mut hi = (f64::NEG_INFINITY, [0.0, 0.0]);
    let mut margin: f64 = 0.0;
    for &x in xs {
        let far = k.far_field(x);
        let end = match far {
            FarProfile::Periodic { from, period } => y_max.max(from + period),
            _ => y_max.max(far.from() * 2.0),
        };
        let mut pts = vec![y_min];
        k.breaks(x, y_min, end, &mut pts);
        pts.push(end);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = 1000;
            let dy = (b - a) / (n + 1) as f64;
            let mut prev: Option<f64> = None;
            for i in 1..=n {
                let y = a + i as f64 * dy;
                let v = k.value(x, y);
                if v < lo.0 {
                    lo = (v, [x, y]);
                }
                if v > hi.0 {
                    hi = (v, [x, y]);
                }
                if let Some(pv) = prev {
                    margin = margin.max(0.5 * (v - pv).abs());
                }
                prev = Some(v);
            }
        }
    }
    l0_report(p, lo, hi, margin)
}

/// Smallest `A₀` with `∫_{r<|y|<2r} |K(x,y) − K(x′,y)| dy ≤ A₀ |x−x′|^α (2−σ) r^{−σ}`.
pub fn check_x_holder(k: &KernelSpec, x: f64, x_prime: f64, r: f64, alpha: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(invalid("annulus radius must be positive"));
    }
    let da = (k.x_factor.eval(x) - k.x_factor.eval(x_prime)).abs();
    if da == 0.0 {
        return Ok(0.0);
    }
    let annulus = 2.0 * k.profile_mass(r, 2.0 * r);
    let s = k.sigma;
    Ok(da * annulus / ((x - x_prime).abs().powf(alpha) * (2.0 - s) * r.powf(-s)))
}

/// Normalized `C^α` seminorm of `K(x, ·)` outside `B_ρ`:
/// `[K(x,·)]_{C^α(ℝ∖B_ρ)} ρ^{1+σ+α} / ((2−σ)Λ)`, maximized over sampled `x`.
pub fn check_y_holder_tail(k: &KernelSpec, rho: f64, alpha: f64) -> Result<f64> {
    if !(rho > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("need rho > 0 and alpha in (0, 1]"));
    }
    for (i, p) in k.pieces.iter().enumerate() {
        let to = p.to.unwrap_or(f64::INFINITY);
        if to <= rho {
            continue;
        }
        if let Profile::SignCos { amplitude, .. } = p.profile {
            if amplitude != 0.0 {
                return Err(Error::NonHolderKernel(format!("sign modulation jumps on |y| > {rho}")));
            }
        }
        if i > 0 && p.from > rho {
            let left = k.pieces[i - 1].profile.eval(p.from);
            let right = p.profile.eval(p.from);
            if (left - right).abs() > 1e-12 {
                return Err(Error::NonHolderKernel(format!("modulation jumps at |y| = {}", p.from)));
            }
        }
    }
    let s = k.sigma;
    let mut ys: Vec<f64> = (0..1024).map(|i| rho * (1.0 + 3.0 * i as f64 / 1023.0)).collect();
    ys.extend((1..1024).map(|i| 4.0 * rho * 64f64.powf(i as f64 / 1023.0)));
    let big = k
        .pieces
        .iter()
        .map(|p| match p.profile {
            Profile::Constant { value } => value,
            Profile::SignCos { base, amplitude, .. } => base + amplitude.abs(),
            Profile::Cosine { base, amplitude, .. } => base + amplitude.abs(),
        })
        .fold(0.0, f64::max)
        * k.x_factor.range().2;
    let mut best: f64 = 0.0;
    for &x in &[-1.0, -0.5, 0.0, 0.5, 1.0] {
        let kv: Vec<f64> = ys
            .iter()
            .map(|&y| k.value(x, y) * (2.0 - s) * y.powf(-1.0 - s))
            .collect();
        for i in 0..ys.len() {
            for j in 0..i {
                let q = (kv[i] - kv[j]).abs() / (ys[i] - ys[j]).abs().powf(alpha);
                best = best.max(q);
            }
        }
    }
    Ok(best * rho.powf(1.0 + s + alpha) / ((2.0 - s) * big))
}

fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

const MOLLIFIER_PANELS: usize = 8;

fn bump_normalizer() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| {
        let rule = gl16();
        let mut s = 0.0;
        for k in 0..MOLLIFIER_PANELS {
            let a = -1.0 + 2.0 * k as f64 / MOLLIFIER_PANELS as f64;
            let b = a + 2.0 / MOLLIFIER_PANELS as f64;
            s += rule.integrate(a, b, bump);
        }
        1.0 / s
    })
}

/// `f(s) = e^{-1/s}` for `s > 0`.
fn smooth_zero(s: f64) -> f64 {
    if s > 0.0 {
        (-1.0 / s).exp()
    } else {
        0.0
    }
}

/// Cutoff `ξ`: 1 on `|t| ≤ 1/2`, 0 on `|t| ≥ 1`, smooth in between.
pub fn cutoff(t: f64) -> f64 {
    let a = t.abs();
    if a <= 0.5 {
        1.0
    } else if a >= 1.0 {
        0.0
    } else {
        let p = smooth_zero(1.0 - a);
        let q = smooth_zero(a - 0.5);
        p / (p + q)
    }
}

/// Mollification scale `ε` with the fixed bump `η` and cutoff `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    pub epsilon: f64,
}

impl MollifierSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        if epsilon > 0.0 && epsilon < 1.0 {
            Ok(Self { epsilon })
        } else {
            Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")))
        }
    }

    /// Unit-mass bump `η(t) = c·exp(−1/(1−t²))` on `(−1, 1)`.
    pub fn eta(t: f64) -> f64 {
        bump_normalizer() * bump(t)
    }

    /// `η_ε(t) = η(t/ε)/ε`.
    pub fn eta_eps(&self, t: f64) -> f64 {
        Self::eta(t / self.epsilon) / self.epsilon
    }

    /// `∫ f(s) η_ε(s) ds` by composite 16-point Gauss–Legendre with
    /// additional splits at `splits` (offsets in `(−ε, ε)`).
    pub fn average(&self, splits: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let e = self.epsilon;
        let mut pts: Vec<f64> = (0..=MOLLIFIER_PANELS)
            .map(|k| -e + 2.0 * e * k as f64 / MOLLIFIER_PANELS as f64)
            .collect();
        pts.extend(splits.iter().copied().filter(|s| s.abs() < e));
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let rule = gl16();
        pts.windows(2)
            .map(|w| rule.integrate(w[0], w[1], |s| f(s) * self.eta_eps(s)))
            .sum()
    }
}

/// `(c ⋆ η_ε)(x)`.
pub fn mollify_coeff(c: impl Fn(f64) -> f64, m: &MollifierSpec, x: f64) -> f64 {
    m.average(&[], |s| c(x - s))
}

/// `K^ε(x, y) = ξ(y/4ε)(2−σ)|y|^{−1−σ} + (1 − ξ(y/4ε)) (K ⋆ η_ε⊗η_ε)(x, y)`.
pub fn mollify_kernel(k: &KernelSpec, m: &MollifierSpec, x: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::SingularArgument);
    }
    let mk = MollifiedKernel::new(k.clone(), *m);
    let s = k.sigma;
    Ok(mk.value(x, y) * (2.0 - s) * y.abs().powf(-1.0 - s))
}

/// The mollified kernel `K^ε`, viewed through `b^ε = K^ε / flat`.
#[derive(Debug, Clone)]
pub struct MollifiedKernel {
    base: KernelSpec,
    mollifier: MollifierSpec,
}

impl MollifiedKernel {
    pub fn new(base: KernelSpec, mollifier: MollifierSpec) -> Self {
        Self { base, mollifier }
    }

    pub fn epsilon(&self) -> f64 {
        self.mollifier.epsilon
    }

    /// `(a ⋆ η_ε)(x)`.
    fn x_average(&self, x: f64) -> f64 {
        match self.base.x_factor {
            XFactor::None => 1.0,
            f => self.mollifier.average(&[x, x - 1.0, x + 1.0], |s| f.eval(x - s)),
        }
    }

    /// `∫ b(t)(2−σ)|t|^{−1−σ} η_ε(y − t) dt / flat(y)` for `|y| > 2ε`.
    fn y_average(&self, t: f64) -> f64 {
        let e = self.mollifier.epsilon;
        let s = self.base.sigma;
        let mut br = Vec::new();
        self.base.breaks(0.0, (t - e).max(0.0), t + e, &mut br);
        // offsets s with t - s at a break
        let splits: Vec<f64> = br.iter().map(|b| t - b).collect();
        let conv = self.mollifier.average(&splits, |off| {
            let z = t - off;
            self.base.profile_value(z) * z.abs().powf(-1.0 - s)
        });
        conv / t.powf(-1.0 - s)
    }
}

impl Modulated for MollifiedKernel {
    fn sigma(&self) -> f64 {
        self.base.sigma
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        let e = self.mollifier.epsilon;
        let t = y.abs();
        if t <= 2.0 * e {
            return 1.0;
        }
        let xi = cutoff(t / (4.0 * e));
        xi + (1.0 - xi) * self.x_average(x) * self.y_average(t)
    }

    fn breaks(&self, x: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let e = self.mollifier.epsilon;
        for p in [2.0 * e, 4.0 * e] {
            if p > lo && p < hi {
                out.push(p);
            }
        }
        let mut br = Vec::new();
        self.base.breaks(x, (lo - e).max(0.0), hi + e, &mut br);
        for b in br {
            for p in [b - e, b + e] {
                if p > lo && p < hi && p > 2.0 * e {
                    out.push(p);
                }
            }
        }
    }

    fn constant_on(&self, _x: f64, _lo: f64, hi: f64) -> Option<f64> {
        (hi <= 2.0 * self.mollifier.epsilon).then_some(1.0)
    }

    fn smooth_scale(&self) -> f64 {
        (0.5 * self.mollifier.epsilon).min(self.base.smooth_scale())
    }

    fn far_field(&self, x: f64) -> FarProfile {
        let e = self.mollifier.epsilon;
        let base = self.base.far_field(x);
        let from = base.from().max(4.0 * e) + e;
        let limit = match base {
            FarProfile::Constant { value, .. } => value / self.base.x_factor.eval(x) * self.x_average(x),
            _ => f64::NAN,
        };
        FarProfile::Asymptotic { from, limit }
    }
}

/// `b̄(x̄, ȳ) = b(z + δx̄, δȳ)`: a modulation seen from the unit ball after
/// rescaling `B_δ(z)`.
pub struct Rescaled<'a> {
    pub inner: &'a dyn Modulated,
    pub center: f64,
    pub delta: f64,
}

impl Modulated for Rescaled<'_> {
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }
    fn value(&self, x: f64, y: f64) -> f64 {
        self.inner.value(self.center + self.delta * x, self.delta * y)
    }
    fn breaks(&self, x: f64, lo: f64, hi: f64, out: &mut Vec<f64>) {
        let d = self.delta;
        let start = out.len();
        self.inner.breaks(self.center + d * x, d * lo, d * hi, out);
        for b in &mut out[start..] {
            *b /= d;
        }
    }
    fn constant_on(&self, x: f64, lo: f64, hi: f64) -> Option<f64> {
        let d = self.delta;
        self.inner.constant_on(self.center + d * x, d * lo, d * hi)
    }
    fn smooth_scale(&self) -> f64 {
        self.inner.smooth_scale() / self.delta
    }
    fn far_field(&self, x: f64) -> FarProfile {
        let d = self.delta;
        match self.inner.far_field(self.center + d * x) {
            FarProfile::Constant { from, value } => FarProfile::Constant { from: from / d, value },
            FarProfile::Periodic { from, period } => FarProfile::Periodic {
                from: from / d,
                period: period / d,
            },
            FarProfile::Asymptotic { from, limit } => FarProfile::Asymptotic { from: from / d, limit },
        }
    }
}

/// Measured ellipticity loss: the smallest `C ≥ 1` with the mollified
/// kernel in `L₀(λ/C, CΛ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MollifiedCertificate {
    pub epsilon: f64,
    pub constant: f64,
    pub report: L0Report,
}

/// Certifies the mollified kernel at `ε` against `(λ/C, CΛ)` for the
/// measured `C`.
pub fn certify_mollified(k: &KernelSpec, p: &EllipticityParams, epsilon: f64) -> Result<MollifiedCertificate> {
    let m = MollifierSpec::new(epsilon)?;
    let mk = MollifiedKernel::new(k.clone(), m);
    let xs = [-0.5, 0.0, 0.5];
    let probe = check_l0_sampled(&mk, p, &xs, 0.5 * epsilon, 4.0);
    let constant = (p.lambda / probe.b_min).max(probe.b_max / p.big_lambda).max(1.0);
    let widened = EllipticityParams {
        lambda: p.lambda / constant,
        big_lambda: p.big_lambda * constant,
        ..*p
    };
    let report = check_l0_sampled(&mk, &widened, &xs, 0.5 * epsilon, 4.0);
    Ok(MollifiedCertificate {
        epsilon,
        constant,
        report,
    })
}
