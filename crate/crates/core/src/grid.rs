//! Grid functions on a symmetric interval with analytic exterior tails.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad::gl16;

/// Closed-form description of a function on part of the exterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailFormula {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · sign sin(mπx)`, zero on the jump set.
    SignSin {
        m: u32,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// `amplitude · cos(frequency·x + phase)`.
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `Σ coeffs[k] x^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `coefficient · |x|^exponent`.
    Power {
        coefficient: f64,
        exponent: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// Exact `sign sin(π t)`: `±1` off the integers, `0` on them.
#[inline]
pub fn sign_sin_pi(t: f64) -> f64 {
    let k = t.floor();
    if t == k {
        0.0
    } else if (k * 0.5).floor() * 2.0 == k {
        1.0
    } else {
        -1.0
    }
}

/// Exact `sign cos(π t)`: `±1` off the half-integers, `0` on them.
#[inline]
pub fn sign_cos_pi(t: f64) -> f64 {
    let s = t + 0.5;
    let k = s.floor();
    if s == k {
        0.0
    } else if (k * 0.5).floor() * 2.0 == k {
        1.0
    } else {
        -1.0
    }
}

pub(crate) fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

pub(crate) fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
}

pub(crate) fn poly_degree(coeffs: &[f64]) -> Option<usize> {
    coeffs.iter().rposition(|c| *c != 0.0)
}

impl TailFormula {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TailFormula::Zero => 0.0,
            TailFormula::Constant { value } => *value,
            TailFormula::SignSin { m, amplitude } => amplitude * sign_sin_pi(*m as f64 * x),
            TailFormula::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).cos(),
            TailFormula::Polynomial { coeffs } => horner(coeffs, x),
            TailFormula::Power { coefficient, exponent } => coefficient * x.abs().powf(*exponent),
        }
    }

    /// Second derivative away from the jump set of step formulas.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            TailFormula::Zero | TailFormula::Constant { .. } | TailFormula::SignSin { .. } => 0.0,
            TailFormula::Cos {
                amplitude,
                frequency,
                phase,
            } => -amplitude * frequency * frequency * (frequency * x + phase).cos(),
            TailFormula::Polynomial { coeffs } => horner(&poly_derivative(&poly_derivative(coeffs)), x),
            TailFormula::Power { coefficient, exponent } => {
                coefficient * exponent * (exponent - 1.0) * x.abs().powf(exponent - 2.0)
            }
        }
    }

    /// Piecewise constant formulas.
    pub fn is_step(&self) -> bool {
        matches!(
            self,
            TailFormula::Zero | TailFormula::Constant { .. } | TailFormula::SignSin { .. }
        )
    }

    /// Polynomial growth exponent at infinity (0 for bounded formulas).
    pub fn growth(&self) -> f64 {
        match self {
            TailFormula::Polynomial { coeffs } => poly_degree(coeffs).unwrap_or(0) as f64,
            TailFormula::Power { exponent, .. } => exponent.max(0.0),
            _ => 0.0,
        }
    }

    /// Supremum of `|f|` for bounded formulas.
    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            TailFormula::Zero => Some(0.0),
            TailFormula::Constant { value } => Some(value.abs()),
            TailFormula::SignSin { amplitude, .. } => Some(amplitude.abs()),
            TailFormula::Cos { amplitude, .. } => Some(amplitude.abs()),
            TailFormula::Polynomial { coeffs } => match poly_degree(coeffs) {
                None => Some(0.0),
                Some(0) => Some(coeffs[0].abs()),
                _ => None,
            },
            TailFormula::Power { coefficient, exponent } => {
                (*exponent == 0.0 || *coefficient == 0.0).then_some(coefficient.abs())
            }
        }
    }

    /// Jump points of a step formula inside `[lo, hi]`.
    pub fn step_breaks(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        if let TailFormula::SignSin { m, .. } = self {
            let mf = *m as f64;
            let k0 = (lo * mf).ceil() as i64;
            let k1 = (hi * mf).floor() as i64;
            for k in k0..=k1 {
                out.push(k as f64 / mf);
            }
        }
    }

    /// Period of an oscillating formula.
    pub fn period(&self) -> Option<f64> {
        match self {
            TailFormula::SignSin { m, .. } => Some(2.0 / *m as f64),
            TailFormula::Cos { frequency, .. } => Some(2.0 * std::f64::consts::PI / frequency.abs()),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            TailFormula::Zero => true,
            TailFormula::Constant { value } => value.is_finite(),
            TailFormula::SignSin { m, amplitude } => *m > 0 && amplitude.is_finite(),
            TailFormula::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude.is_finite() && frequency.is_finite() && *frequency != 0.0 && phase.is_finite(),
            TailFormula::Polynomial { coeffs } => coeffs.iter().all(|c| c.is_finite()),
            TailFormula::Power { coefficient, exponent } => {
                coefficient.is_finite() && exponent.is_finite() && *exponent >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("malformed tail formula {self:?}")))
        }
    }
}

/// One exterior interval with its formula; `None` endpoints are infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPiece {
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub formula: TailFormula,
}

impl TailPiece {
    fn lo(&self) -> f64 {
        self.from.unwrap_or(f64::NEG_INFINITY)
    }
    fn hi(&self) -> f64 {
        self.to.unwrap_or(f64::INFINITY)
    }
    fn contains(&self, x: f64) -> bool {
        self.lo() <= x && x <= self.hi()
    }
}

/// Exterior description: pieces partitioning `ℝ ∖ [-X, X]`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSpec {
    pub pieces: Vec<TailPiece>,
}

impl TailSpec {
    /// The same formula on both sides of `[-x, x]`.
    pub fn uniform(x: f64, formula: TailFormula) -> Self {
        Self {
            pieces: vec![
                TailPiece {
                    from: None,
                    to: Some(-x),
                    formula: formula.clone(),
                },
                TailPiece {
                    from: Some(x),
                    to: None,
                    formula,
                },
            ],
        }
    }

    pub fn zero(x: f64) -> Self {
        Self::uniform(x, TailFormula::Zero)
    }

    /// Zero on the collar `x ≤ |t| ≤ collar`, `sign sin(mπt)` beyond.
    pub fn collar_sign_sin(x: f64, collar: f64, m: u32) -> Self {
        let ss = TailFormula::SignSin { m, amplitude: 1.0 };
        Self {
            pieces: vec![
                TailPiece {
                    from: None,
                    to: Some(-collar),
                    formula: ss.clone(),
                },
                TailPiece {
                    from: Some(-collar),
                    to: Some(-x),
                    formula: TailFormula::Zero,
                },
                TailPiece {
                    from: Some(x),
                    to: Some(collar),
                    formula: TailFormula::Zero,
                },
                TailPiece {
                    from: Some(collar),
                    to: None,
                    formula: ss,
                },
            ],
        }
    }

    /// Checks that the pieces partition `ℝ ∖ (-x, x)` in order.
    pub fn validate(&self, x: f64) -> Result<()> {
        let tol = 1e-12 * x.max(1.0);
        let mut cursor = f64::NEG_INFINITY;
        let mut crossed = false;
        for p in &self.pieces {
            p.formula.validate()?;
            let (lo, hi) = (p.lo(), p.hi());
            if !(lo < hi) {
                return Err(invalid(format!("empty tail interval [{lo}, {hi}]")));
            }
            if cursor == f64::NEG_INFINITY && !crossed {
                if p.from.is_some() {
                    return Err(invalid("tail must start at -infinity"));
                }
            } else if !crossed && (lo - x).abs() <= tol && (cursor + x).abs() <= tol {
                crossed = true;
            } else if (lo - cursor).abs() > tol {
                return Err(invalid(format!("tail pieces leave a gap or overlap at {cursor}")));
            }
            cursor = hi;
        }
        if !crossed || cursor != f64::INFINITY {
            return Err(invalid(format!("tail pieces must cover (-inf, {}] and [{x}, inf)", -x)));
        }
        Ok(())
    }

    fn piece_at(&self, x: f64) -> Option<&TailPiece> {
        self.pieces.iter().find(|p| p.contains(x))
    }

    /// Evaluates the exterior formula; points not covered evaluate to 0.
    pub fn eval(&self, x: f64) -> f64 {
        self.piece_at(x).map_or(0.0, |p| p.formula.eval(x))
    }

    pub fn formula_at(&self, x: f64) -> Option<&TailFormula> {
        self.piece_at(x).map(|p| &p.formula)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.piece_at(x).map_or(0.0, |p| p.formula.second_derivative(x))
    }

    pub fn is_step(&self) -> bool {
        self.pieces.iter().all(|p| p.formula.is_step())
    }

    pub fn growth(&self) -> f64 {
        self.pieces.iter().map(|p| p.formula.growth()).fold(0.0, f64::max)
    }

    /// `sup |g|` when every formula is bounded.
    pub fn sup_abs(&self) -> Option<f64> {
        self.pieces
            .iter()
            .map(|p| p.formula.sup_abs())
            .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
    }

    /// Finite interval endpoints of the pieces.
    pub fn finite_breaks(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pieces.iter().flat_map(|p| [p.from, p.to]).flatten().collect();
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Piece endpoints and jump points inside `[lo, hi]`.
    pub fn breaks_in(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        for p in &self.pieces {
            for e in [p.from, p.to].into_iter().flatten() {
                if e >= lo && e <= hi {
                    out.push(e);
                }
            }
            let a = p.lo().max(lo);
            let b = p.hi().min(hi);
            if a <= b {
                p.formula.step_breaks(a, b, out);
            }
        }
    }

    /// The unbounded pieces `(-inf, a]` and `[b, inf)`.
    pub fn far_pieces(&self) -> (&TailPiece, &TailPiece) {
        let left = self
            .pieces
            .iter()
            .find(|p| p.from.is_none())
            .expect("validated tail has a left piece");
        let right = self
            .pieces
            .iter()
            .find(|p| p.to.is_none())
            .expect("validated tail has a right piece");
        (left, right)
    }

    /// Largest finite endpoint in absolute value.
    pub fn reach(&self) -> f64 {
        self.finite_breaks().iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    /// Values a step tail can take off its jump set.
    pub fn step_values(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for p in &self.pieces {
            match &p.formula {
                TailFormula::Zero => v.push(0.0),
                TailFormula::Constant { value } => v.push(*value),
                TailFormula::SignSin { amplitude, .. } => {
                    v.push(*amplitude);
                    v.push(-amplitude);
                }
                _ => {}
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// Multiplies every formula by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        let pieces = self
            .pieces
            .iter()
            .map(|p| TailPiece {
                from: p.from,
                to: p.to,
                formula: scale_formula(&p.formula, c),
            })
            .collect();
        Self { pieces }
    }
}

fn scale_formula(f: &TailFormula, c: f64) -> TailFormula {
    match f {
        TailFormula::Zero => TailFormula::Zero,
        TailFormula::Constant { value } => TailFormula::Constant { value: c * value },
        TailFormula::SignSin { m, amplitude } => TailFormula::SignSin {
            m: *m,
            amplitude: c * amplitude,
        },
        TailFormula::Cos {
            amplitude,
            frequency,
            phase,
        } => TailFormula::Cos {
            amplitude: c * amplitude,
            frequency: *frequency,
            phase: *phase,
        },
        TailFormula::Polynomial { coeffs } => TailFormula::Polynomial {
            coeffs: coeffs.iter().map(|a| c * a).collect(),
        },
        TailFormula::Power { coefficient, exponent } => TailFormula::Power {
            coefficient: c * coefficient,
            exponent: *exponent,
        },
    }
}

/// Interior reconstruction between grid nodes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Local four-node Lagrange cubic.
    #[default]
    Cubic,
    /// Piecewise linear; used for solver output so that evaluation matches
    /// the discretization exactly.
    Linear,
}

/// Values on the uniform grid `x_i = -X + i h` plus an exterior tail.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    halfwidth: f64,
    cells: usize,
    h: f64,
    values: Vec<f64>,
    tail: TailSpec,
    interpolation: Interpolation,
    polynomial: Option<Vec<f64>>,
}

impl GridFunction {
    /// Builds from nodal values; `values.len() - 1` cells on `[-X, X]`.
    pub fn new(halfwidth: f64, values: Vec<f64>, tail: TailSpec) -> Result<Self> {
        if !(halfwidth > 0.0 && halfwidth.is_finite()) {
            return Err(invalid(format!("halfwidth must be positive, got {halfwidth}")));
        }
        if values.len() < 3 {
            return Err(invalid("a grid function needs at least three nodes"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("grid values must be finite"));
        }
        tail.validate(halfwidth)?;
        let cells = values.len() - 1;
        Ok(Self {
            halfwidth,
            cells,
            h: 2.0 * halfwidth / cells as f64,
            values,
            tail,
            interpolation: Interpolation::Cubic,
            polynomial: None,
        })
    }

    /// Samples `f` at the nodes of `cells` uniform cells on `[-X, X]`.
    pub fn from_fn(halfwidth: f64, cells: usize, f: impl Fn(f64) -> f64, tail: TailSpec) -> Result<Self> {
        if cells < 2 {
            return Err(invalid("at least two cells required"));
        }
        let h = 2.0 * halfwidth / cells as f64;
        let values = (0..=cells).map(|i| f(node_position(i, cells, h))).collect();
        Self::new(halfwidth, values, tail)
    }

    /// A global polynomial `Σ coeffs[k] x^k`, including its tails. The
    /// exact coefficients are retained for symbolic cancellation.
    pub fn polynomial(halfwidth: f64, cells: usize, coeffs: &[f64]) -> Result<Self> {
        let tail = TailSpec::uniform(
            halfwidth,
            TailFormula::Polynomial {
                coeffs: coeffs.to_vec(),
            },
        );
        let mut g = Self::from_fn(halfwidth, cells, |x| horner(coeffs, x), tail)?;
        g.polynomial = Some(coeffs.to_vec());
        Ok(g)
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_tail(mut self, tail: TailSpec) -> Result<Self> {
        tail.validate(self.halfwidth)?;
        self.tail = tail;
        self.polynomial = None;
        Ok(self)
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }
    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn tail(&self) -> &TailSpec {
        &self.tail
    }
    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }
    pub fn exact_polynomial(&self) -> Option<&[f64]> {
        self.polynomial.as_deref()
    }

    /// Position of node `i`; exactly antisymmetric in `i ↦ cells - i`.
    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        node_position(i, self.cells, self.h)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.cells).map(|i| self.node(i))
    }

    /// Index of the node at `x`, if `x` is a node up to rounding.
    pub fn node_index(&self, x: f64) -> Option<usize> {
        let t = (x + self.halfwidth) / self.h;
        let i = t.round();
        if i < 0.0 || i > self.cells as f64 {
            return None;
        }
        let i = i as usize;
        ((self.node(i) - x).abs() <= 1e-9 * self.h).then_some(i)
    }

    /// Evaluates `u` anywhere: interpolated inside, tail formula outside.
    pub fn eval(&self, x: f64) -> f64 {
        if x.abs() <= self.halfwidth {
            self.interpolate(x)
        } else {
            self.tail.eval(x)
        }
    }

    fn interpolate(&self, x: f64) -> f64 {
        let n = self.cells;
        let t = (x + self.halfwidth) / self.h;
        let j = (t.floor().max(0.0) as usize).min(n - 1);
        match self.interpolation {
            Interpolation::Linear => {
                let s = t - j as f64;
                if s == 0.0 {
                    return self.values[j];
                }
                self.values[j] * (1.0 - s) + self.values[j + 1] * s
            }
            Interpolation::Cubic => {
                let start = j.saturating_sub(1).min(n.saturating_sub(3));
                let s = t - start as f64;
                let v = &self.values[start..start + 4];
                if s == (s as usize) as f64 && (s as usize) < 4 {
                    return v[s as usize];
                }
                let (s0, s1, s2, s3) = (s, s - 1.0, s - 2.0, s - 3.0);
                -v[0] * s1 * s2 * s3 / 6.0 + v[1] * s0 * s2 * s3 / 2.0 - v[2] * s0 * s1 * s3 / 2.0
                    + v[3] * s0 * s1 * s2 / 6.0
            }
        }
    }

    /// Second-order incremental quotient `½(u(x+y) + u(x−y)) − u(x)`.
    pub fn delta2(&self, x: f64, y: f64) -> f64 {
        0.5 * (self.eval(x + y) + self.eval(x - y)) - self.eval(x)
    }

    /// Central finite difference of order 1 or 2 at a grid node.
    pub fn finite_diff_derivative(&self, order: usize, x: f64) -> Result<f64> {
        if !(order == 1 || order == 2) {
            return Err(invalid(format!("derivative order {order} not in {{1, 2}}")));
        }
        let i = self.node_index(x).ok_or(Error::OutOfDomain {
            x,
            reason: "not a grid node",
        })?;
        if i < order || i + order > self.cells {
            return Err(Error::OutOfStencil { x, order });
        }
        Ok(self.nodal_difference(order, i))
    }

    /// Central difference of order 1 or 2 at interior node `i`.
    pub(crate) fn nodal_difference(&self, order: usize, i: usize) -> f64 {
        let v = &self.values;
        match order {
            1 => (v[i + 1] - v[i - 1]) / (2.0 * self.h),
            _ => (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (self.h * self.h),
        }
    }

    /// Estimate of `u''(x)`: exact for tagged polynomials, central
    /// differences at nodes (linearly blended between nodes), analytic in
    /// the tail.
    pub fn second_derivative(&self, x: f64) -> f64 {
        if let Some(p) = &self.polynomial {
            return horner(&poly_derivative(&poly_derivative(p)), x);
        }
        if x.abs() > self.halfwidth {
            return self.tail.second_derivative(x);
        }
        if let Some(i) = self.node_index(x) {
            let i = i.clamp(1, self.cells - 1);
            return self.nodal_difference(2, i);
        }
        let t = (x + self.halfwidth) / self.h;
        let j = t.floor() as usize;
        let (a, b) = (j.clamp(1, self.cells - 1), (j + 1).clamp(1, self.cells - 1));
        let s = t - j as f64;
        self.nodal_difference(2, a) * (1.0 - s) + self.nodal_difference(2, b) * s
    }

    /// `∫ |u(y)| (1+|y|)^{-1-σ} dy`.
    pub fn weighted_l1_norm(&self, sigma: f64) -> Result<f64> {
        let growth = self.tail.growth();
        if growth >= sigma {
            return Err(Error::DivergentTail { growth, sigma });
        }
        let w = |y: f64| (1.0 + y.abs()).powf(-1.0 - sigma);
        let rule = crate::quad::gl8();
        let mut total = 0.0;
        for j in 0..self.cells {
            let (a, b) = (self.node(j), self.node(j + 1));
            total += rule.integrate(a, b, |y| self.interpolate(y).abs() * w(y));
        }
        for p in &self.tail.pieces {
            total += weighted_tail_piece(p, sigma);
        }
        Ok(total)
    }

    /// `c · u`, keeping the tail description exact.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| c * v).collect(),
            tail: self.tail.scaled(c),
            polynomial: self.polynomial.as_ref().map(|p| p.iter().map(|a| c * a).collect()),
            ..self.clone()
        }
    }

    /// Same grid and interpolation with replaced nodal values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(invalid("value count does not match the grid"));
        }
        Ok(Self {
            values,
            polynomial: None,
            ..self.clone()
        })
    }

    /// Writes `x,value` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["x", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            wr.write_record([format!("{:e}", self.node(i)), format!("{v:e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads `x,value` rows on a uniform symmetric grid. Without a tail the
    /// function is zero beyond the grid.
    pub fn read_csv<R: Read>(r: R, tail: Option<TailSpec>) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for rec in rd.deserialize() {
            let (x, v): (f64, f64) = rec?;
            xs.push(x);
            vs.push(v);
        }
        if xs.len() < 3 {
            return Err(invalid("grid csv needs at least three rows"));
        }
        let x0 = xs[0];
        let x1 = *xs.last().unwrap();
        if (x0 + x1).abs() > 1e-9 * x1.abs() || x1 <= 0.0 {
            return Err(invalid("grid must be symmetric about 0"));
        }
        let n = xs.len() - 1;
        let h = 2.0 * x1 / n as f64;
        for (i, x) in xs.iter().enumerate() {
            if (node_position(i, n, h) - x).abs() > 1e-7 * h {
                return Err(invalid(format!("grid is not uniform at row {}", i + 1)));
            }
        }
        Self::new(x1, vs, tail.unwrap_or_else(|| TailSpec::zero(x1)))
    }
}

#[inline]
fn node_position(i: usize, cells: usize, h: f64) -> f64 {
    (2.0 * i as f64 - cells as f64) * (0.5 * h)
}

/// `∫_piece |g(y)| (1+|y|)^{-1-σ} dy`, closed form for step formulas.
fn weighted_tail_piece(p: &TailPiece, sigma: f64) -> f64 {
    // Work on |y| so that both sides use the same antiderivative.
    let (lo, hi) = (p.lo(), p.hi());
    let (a, b) = if hi <= 0.0 { (-hi, -lo) } else { (lo, hi) };
    let anti = |t: f64| {
        if t.is_infinite() {
            0.0
        } else {
            (1.0 + t).powf(-sigma) / sigma
        }
    };
    let closed = anti(a) - anti(b);
    match &p.formula {
        TailFormula::Zero => 0.0,
        TailFormula::Constant { value } => value.abs() * closed,
        TailFormula::SignSin { amplitude, .. } => amplitude.abs() * closed,
        f => {
            let sign = if hi <= 0.0 { -1.0 } else { 1.0 };
            let g = |t: f64| f.eval(sign * t).abs() * (1.0 + t).powf(-1.0 - sigma);
            let cap = match f {
                TailFormula::Cos { frequency, .. } => 0.25 / frequency.abs(),
                _ => f64::INFINITY,
            };
            let end = b.min(1e4 * a.max(1.0));
            let rule = gl16();
            let mut s = 0.0;
            let mut x = a;
            while x < end {
                let step = (0.5 * x.max(0.5)).min(cap);
                let y = (x + step).min(end);
                s += rule.integrate(x, y, &g);
                x = y;
            }
            if b > end {
                // Leading-order remainder: mean of |g| times the weight tail.
                let rem = match f {
                    TailFormula::Cos { amplitude, .. } => 2.0 / std::f64::consts::PI * amplitude.abs() * anti(end),
                    _ => {
                        let gr = f.growth();
                        let lead = f.eval(sign * end).abs() / end.powf(gr);
                        lead * end.powf(gr - sigma) / (sigma - gr)
                    }
                };
                s += rem;
            }
            s
        }
    }
}
