//! Integrals of exterior data against a kernel where both sides of the
//! second difference lie outside the domain.

use crate::error::{Error, Result};
use crate::grid::TailSpec;
use crate::kernels::FarProfile;
use crate::operators::engine::push_unique;
use crate::operators::Weight;
use crate::quad::{common_period, gl16, periodic_power_tail, pow_integral, PeriodicPiece};

fn tail_smooth_scale(g: &TailSpec) -> f64 {
    g.pieces
        .iter()
        .filter_map(|p| match p.formula {
            crate::grid::TailFormula::Cos { frequency, .. } => Some(0.5 / frequency.abs()),
            _ => None,
        })
        .fold(f64::INFINITY, f64::min)
}

fn both_step(g: &TailSpec, x: f64, y: f64) -> bool {
    [x + y, x - y]
        .iter()
        .all(|&p| g.formula_at(p).is_some_and(|f| f.is_step()))
}

/// `∫_d^∞ f(g(x+y), g(x−y)) b(x,y)(2−σ) y^{−1−σ} dy` with `x ± y` outside
/// `(−1, 1)` for every `y ≥ d`.
pub(crate) fn exterior_integral(
    g: &TailSpec,
    w: Weight<'_>,
    x: f64,
    sigma: f64,
    d: f64,
    f: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    let far = w.far();
    let y_far = (g.reach() + x.abs()).max(far.from()).max(d);
    let q = 2.0 - sigma;
    let eval = |y: f64| f(g.eval(x + y), g.eval(x - y));
    let cap = tail_smooth_scale(g).min(w.smooth_scale());
    let rule = gl16();

    let mut total = 0.0;
    if y_far > d {
        let mut pts = vec![d, y_far];
        let mut xb = Vec::new();
        g.breaks_in(x + d, x + y_far, &mut xb);
        pts.extend(xb.iter().map(|b| b - x));
        xb.clear();
        g.breaks_in(x - y_far, x - d, &mut xb);
        pts.extend(xb.iter().map(|b| x - b));
        w.breaks(d, y_far, &mut pts);
        pts.retain(|&y| y >= d && y <= y_far);
        push_unique(&mut pts);
        for win in pts.windows(2) {
            let (a, b) = (win[0], win[1]);
            if b <= a {
                continue;
            }
            let mid = 0.5 * (a + b);
            if both_step(g, x, mid) {
                if let Some(bv) = w.constant_on(a, b) {
                    let v = eval(mid);
                    if v != 0.0 {
                        total += v * bv * q * pow_integral(a, b, 1.0 + sigma);
                    }
                    continue;
                }
            }
            let n_ratio = ((b / a).ln() / 1.5f64.ln()).ceil().max(1.0);
            let n_len = if cap.is_finite() { ((b - a) / cap).ceil() } else { 1.0 };
            let n = n_ratio.max(n_len) as usize;
            for k in 0..n {
                let pa = a + (b - a) * k as f64 / n as f64;
                let pb = if k + 1 == n {
                    b
                } else {
                    a + (b - a) * (k + 1) as f64 / n as f64
                };
                total += rule.integrate(pa, pb, |y| eval(y) * w.value(y) * q * y.powf(-1.0 - sigma));
            }
        }
    }

    let (left, right) = g.far_pieces();
    if left.formula.growth() > 0.0 || right.formula.growth() > 0.0 {
        return Err(Error::Unsupported("unbounded exterior data".into()));
    }
    let mut period: Option<f64> = None;
    for p in [right.formula.period(), left.formula.period()].into_iter().flatten() {
        period = Some(match period {
            None => p,
            Some(o) => common_period(o, p)
                .ok_or_else(|| Error::Unsupported(format!("incommensurate exterior periods {o} and {p}")))?,
        });
    }
    match far {
        FarProfile::Constant { value, .. } if period.is_none() => {
            let v = eval(2.0 * y_far + 1.0);
            total += v * value * q * pow_integral(y_far, f64::INFINITY, 1.0 + sigma);
        }
        FarProfile::Asymptotic { limit, .. } => {
            if period.is_some() {
                return Err(Error::Unsupported(
                    "oscillating exterior data against a non-periodic smooth kernel".into(),
                ));
            }
            let v = eval(2.0 * y_far + 1.0);
            if v != 0.0 {
                let end = y_far * 2f64.powi(40);
                let mut a = y_far;
                let mut s = 0.0;
                while a < end {
                    s += rule.integrate(a, 2.0 * a, |y| w.value(y) * q * y.powf(-1.0 - sigma));
                    a *= 2.0;
                }
                let b_end = if limit.is_finite() { limit } else { w.value(end) };
                s += b_end * q * end.powf(-sigma) / sigma;
                total += v * s;
            }
        }
        _ => {
            if let FarProfile::Periodic { period: p, .. } = far {
                period = Some(match period {
                    None => p,
                    Some(o) => common_period(o, p).ok_or_else(|| {
                        Error::Unsupported(format!("incommensurate kernel and data periods {p} and {o}"))
                    })?,
                });
            }
            let period = period.expect("periodic far field");
            let start = y_far;
            let end = start + period;
            let mut pts = vec![start, end];
            let mut xb = Vec::new();
            g.breaks_in(x + start, x + end, &mut xb);
            pts.extend(xb.iter().map(|b| b - x));
            xb.clear();
            g.breaks_in(x - end, x - start, &mut xb);
            pts.extend(xb.iter().map(|b| x - b));
            w.breaks(start, end, &mut pts);
            pts.retain(|&y| y >= start && y <= end);
            push_unique(&mut pts);
            let pcap = (period / 16.0).min(cap);
            let mut pieces = Vec::new();
            for win in pts.windows(2) {
                let (a, b) = (win[0], win[1]);
                if b <= a {
                    continue;
                }
                let mid = 0.5 * (a + b);
                if both_step(g, x, mid) {
                    if let Some(bv) = w.constant_on(a, b) {
                        pieces.push(PeriodicPiece {
                            a: a - start,
                            b: b - start,
                            value: Some(eval(mid) * bv),
                        });
                        continue;
                    }
                }
                let n = ((b - a) / pcap).ceil().max(1.0) as usize;
                for k in 0..n {
                    let pa = a + (b - a) * k as f64 / n as f64;
                    let pb = if k + 1 == n {
                        b
                    } else {
                        a + (b - a) * (k + 1) as f64 / n as f64
                    };
                    pieces.push(PeriodicPiece {
                        a: pa - start,
                        b: pb - start,
                        value: None,
                    });
                }
            }
            let smooth = |y: f64| eval(y) * w.value(y);
            total += periodic_power_tail(start, period, &pieces, sigma, &smooth);
        }
    }
    Ok(total)
}

/// Values `v = ½(g(x+y) + g(x−y))` taken on `y ≥ d` with their masses
/// `∫ 1[class] b κ`; requires step data.
pub(crate) fn exterior_classes(g: &TailSpec, w: Weight<'_>, x: f64, sigma: f64, d: f64) -> Result<Vec<(f64, f64)>> {
    if !g.is_step() {
        return Err(Error::Unsupported(
            "extremal problems need piecewise-constant exterior data".into(),
        ));
    }
    let vals = g.step_values();
    let mut classes: Vec<f64> = Vec::new();
    for a in &vals {
        for b in &vals {
            let v = 0.5 * (a + b);
            if !classes.contains(&v) {
                classes.push(v);
            }
        }
    }
    classes.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for v in classes {
        let mass = exterior_integral(g, w, x, sigma, d, &|p, m| if 0.5 * (p + m) == v { 1.0 } else { 0.0 })?;
        if mass > 0.0 {
            out.push((v, mass));
        }
    }
    Ok(out)
}
