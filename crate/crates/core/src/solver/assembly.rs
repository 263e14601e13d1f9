//! Monotone quadrature discretization of nonlocal operators on `(−1, 1)`.
//!
//! Row `i` approximates `∫_0^∞ (u(x_i+y) + u(x_i−y) − 2u(x_i)) b κ dy`:
//! a Taylor term on `[0, r)`, one atom per `y`-cell while a side is inside
//! the grid (linear interpolation, exact moments), and exterior integrals
//! once both sides have left the domain. Every off-diagonal weight is
//! nonnegative.

use crate::error::{Error, Result};
use crate::grid::TailSpec;
use crate::kernels::Modulated;
use crate::operators::engine::sign_changes;
use crate::operators::Weight;
use crate::par;
use crate::quad::{gl16, pow_integral};

use super::exterior::{exterior_classes, exterior_integral};

/// How atoms are weighted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Rule {
    Linear,
    /// `pos` on nonnegative atoms, `neg` on negative ones.
    Extremal {
        pos: f64,
        neg: f64,
    },
}

impl Rule {
    #[inline]
    fn beta(&self, e: f64) -> f64 {
        match *self {
            Rule::Linear => 1.0,
            Rule::Extremal { pos, neg } => {
                if e > 0.0 {
                    pos
                } else if e < 0.0 {
                    neg
                } else {
                    pos.min(neg)
                }
            }
        }
    }

    fn lower(&self) -> f64 {
        match *self {
            Rule::Linear => 1.0,
            Rule::Extremal { pos, neg } => pos.min(neg),
        }
    }
}

/// One operator `L_a u + c_a`.
pub(crate) struct Branch<'a> {
    /// `None` is the flat kernel.
    pub kernel: Option<&'a dyn Modulated>,
    pub coeff: Box<dyn Fn(f64) -> f64 + Sync + 'a>,
}

impl<'a> Branch<'a> {
    fn weight(&self, x: f64) -> Weight<'a> {
        match self.kernel {
            Some(k) => Weight::Kernel { kernel: k, x },
            None => Weight::Flat,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Side {
    /// `u_lo (1 − t) + u_hi t` with `t = (y − t0)/h`.
    Node { lo: usize, hi: usize },
    /// `g(x + dir·y)`.
    Ext { dir: f64 },
}

#[derive(Debug, Clone)]
struct Segment {
    a: f64,
    b: f64,
    t0: f64,
    plus: Side,
    minus: Side,
    /// Constant modulation on the segment.
    bconst: Option<f64>,
    /// Constant exterior values on the segment, when step.
    gp: Option<f64>,
    gm: Option<f64>,
}

#[derive(Debug, Clone)]
enum Far {
    Linear { g: f64, mass: f64 },
    Classes(Vec<(f64, f64)>),
}

#[derive(Debug, Clone)]
struct RowGeom {
    /// Weight of `u_{i±1} − u_i` from the Taylor term.
    near: f64,
    segments: Vec<Segment>,
    far: Far,
}

/// A dense row: `Σ_j a[j] u_j + rhs` over nodes `0..=N`.
#[derive(Debug, Clone)]
pub(crate) struct Row {
    pub a: Vec<f64>,
    pub rhs: f64,
}

impl Row {
    pub fn apply(&self, u: &[f64]) -> f64 {
        self.a.iter().zip(u).map(|(a, u)| a * u).sum::<f64>() + self.rhs
    }
}

pub(crate) struct Scheme<'a> {
    pub sigma: f64,
    pub cells: usize,
    pub r0_cells: usize,
    pub tail: &'a TailSpec,
    pub branches: Vec<Branch<'a>>,
    pub rule: Rule,
    geoms: Vec<Vec<RowGeom>>,
}

impl<'a> Scheme<'a> {
    pub fn new(
        sigma: f64,
        cells: usize,
        r0_cells: usize,
        tail: &'a TailSpec,
        branches: Vec<Branch<'a>>,
        rule: Rule,
    ) -> Result<Self> {
        let mut s = Self {
            sigma,
            cells,
            r0_cells,
            tail,
            branches,
            rule,
            geoms: Vec::new(),
        };
        let geoms = (0..s.branches.len())
            .map(|b| par::try_map_range(cells - 1, |r| s.geometry(b, r + 1)))
            .collect::<Result<Vec<_>>>()?;
        s.geoms = geoms;
        Ok(s)
    }

    pub fn h(&self) -> f64 {
        2.0 / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (2.0 * i as f64 - self.cells as f64) * (self.h() / 2.0)
    }

    pub fn kappa(&self, y: f64) -> f64 {
        (2.0 - self.sigma) * y.powf(-1.0 - self.sigma)
    }

    /// Nodal vector with boundary values from the exterior data.
    pub fn with_boundary(&self, interior: &[f64]) -> Vec<f64> {
        let mut u = Vec::with_capacity(self.cells + 1);
        u.push(self.tail.eval(-1.0));
        u.extend_from_slice(interior);
        u.push(self.tail.eval(1.0));
        u
    }

    fn geometry(&self, branch: usize, i: usize) -> Result<RowGeom> {
        let n = self.cells;
        let h = self.h();
        let x = self.node(i);
        let w = self.branches[branch].weight(x);
        let r_cells = self.r0_cells.min(i).min(n - i);
        let near = w.near(r_cells as f64 * h, self.sigma) / (h * h);
        let dmax = i.max(n - i);
        let mut segments = Vec::new();
        let mut pts = Vec::new();
        let mut xb = Vec::new();
        for d in r_cells..dmax {
            let (a, b) = (d as f64 * h, (d + 1) as f64 * h);
            let plus = if i + d < n {
                Side::Node {
                    lo: i + d,
                    hi: i + d + 1,
                }
            } else {
                Side::Ext { dir: 1.0 }
            };
            let minus = if i > d {
                Side::Node {
                    lo: i - d,
                    hi: i - d - 1,
                }
            } else {
                Side::Ext { dir: -1.0 }
            };
            pts.clear();
            pts.push(a);
            pts.push(b);
            w.breaks(a, b, &mut pts);
            if let Side::Ext { .. } = plus {
                xb.clear();
                self.tail.breaks_in(x + a, x + b, &mut xb);
                pts.extend(xb.iter().map(|p| p - x));
            }
            if let Side::Ext { .. } = minus {
                xb.clear();
                self.tail.breaks_in(x - b, x - a, &mut xb);
                pts.extend(xb.iter().map(|p| x - p));
            }
            pts.retain(|&y| y >= a && y <= b);
            crate::operators::engine::push_unique(&mut pts);
            for win in pts.windows(2) {
                let (sa, sb) = (win[0], win[1]);
                if sb <= sa {
                    continue;
                }
                let mid = 0.5 * (sa + sb);
                let ext_const = |dir: f64| {
                    let p = x + dir * mid;
                    self.tail
                        .formula_at(p)
                        .filter(|f| f.is_step())
                        .map(|_| self.tail.eval(p))
                };
                segments.push(Segment {
                    a: sa,
                    b: sb,
                    t0: a,
                    plus,
                    minus,
                    bconst: w.constant_on(sa, sb),
                    gp: matches!(plus, Side::Ext { .. }).then(|| ext_const(1.0)).flatten(),
                    gm: matches!(minus, Side::Ext { .. }).then(|| ext_const(-1.0)).flatten(),
                });
            }
        }
        let d = dmax as f64 * h;
        let far = match self.rule {
            Rule::Linear => Far::Linear {
                g: exterior_integral(self.tail, w, x, self.sigma, d, &|p, m| p + m)?,
                mass: exterior_integral(self.tail, w, x, self.sigma, d, &|_, _| 1.0)?,
            },
            Rule::Extremal { .. } => Far::Classes(exterior_classes(self.tail, w, x, self.sigma, d)?),
        };
        Ok(RowGeom { near, segments, far })
    }

    /// `(∫ b κ, ∫ t b κ, ∫ g₊ b κ, ∫ g₋ b κ)` over `[a, b]` within `seg`.
    fn moments(&self, seg: &Segment, w: Weight<'_>, x: f64, a: f64, b: f64) -> [f64; 4] {
        let h = self.h();
        let q = 2.0 - self.sigma;
        let rule = gl16();
        let smooth_g = (matches!(seg.plus, Side::Ext { .. }) && seg.gp.is_none())
            || (matches!(seg.minus, Side::Ext { .. }) && seg.gm.is_none());
        if let (Some(bv), false) = (seg.bconst, smooth_g) {
            let m0 = bv * q * pow_integral(a, b, 1.0 + self.sigma);
            let m1 = if seg.t0 > 0.0 && (b - a) < 0.5 * seg.t0 {
                rule.integrate(a, b, |y| (y - seg.t0) / h * bv * self.kappa(y))
            } else {
                bv * q * (pow_integral(a, b, self.sigma) - seg.t0 * pow_integral(a, b, 1.0 + self.sigma)) / h
            };
            return [m0, m1, seg.gp.unwrap_or(0.0) * m0, seg.gm.unwrap_or(0.0) * m0];
        }
        let mut m = [0.0; 4];
        for (y, wt) in rule.mapped(a, b) {
            let k = w.value(y) * self.kappa(y) * wt;
            m[0] += k;
            m[1] += (y - seg.t0) / h * k;
            if let Side::Ext { .. } = seg.plus {
                m[2] += self.tail.eval(x + y) * k;
            }
            if let Side::Ext { .. } = seg.minus {
                m[3] += self.tail.eval(x - y) * k;
            }
        }
        m
    }

    /// Row `i` of branch `branch`. For extremal rules the atom weights are
    /// chosen from the sign of each atom at `u` (nodes `0..=N`); `None`
    /// selects the lower weight everywhere.
    pub fn row(&self, branch: usize, i: usize, u: Option<&[f64]>) -> Row {
        let n = self.cells;
        let h = self.h();
        let x = self.node(i);
        let geom = &self.geoms[branch][i - 1];
        let w = self.branches[branch].weight(x);
        let mut a = vec![0.0; n + 1];
        let mut rhs = 0.0;
        let rule = self.rule;
        let beta_at = |e: Option<f64>| match e {
            Some(e) => rule.beta(e),
            None => rule.lower(),
        };

        let e_near = u.map(|u| u[i + 1] + u[i - 1] - 2.0 * u[i]);
        let bn = beta_at(e_near) * geom.near;
        a[i + 1] += bn;
        a[i - 1] += bn;
        a[i] -= 2.0 * bn;

        let add = |a: &mut Vec<f64>, rhs: &mut f64, seg: &Segment, lo: f64, hi: f64, beta: f64| {
            let [m0, m1, gp, gm] = self.moments(seg, w, x, lo, hi);
            a[i] -= 2.0 * beta * m0;
            for (side, gint) in [(seg.plus, gp), (seg.minus, gm)] {
                match side {
                    Side::Node { lo, hi } => {
                        a[lo] += beta * (m0 - m1);
                        a[hi] += beta * m1;
                    }
                    Side::Ext { .. } => *rhs += beta * gint,
                }
            }
        };

        for seg in &geom.segments {
            let Some(u) = u.filter(|_| matches!(rule, Rule::Extremal { .. })) else {
                let beta = beta_at(None);
                add(&mut a, &mut rhs, seg, seg.a, seg.b, beta);
                continue;
            };
            let side_val = |side: Side, y: f64| match side {
                Side::Node { lo, hi } => {
                    let t = (y - seg.t0) / h;
                    u[lo] * (1.0 - t) + u[hi] * t
                }
                Side::Ext { dir } => self.tail.eval(x + dir * y),
            };
            let e = |y: f64| side_val(seg.plus, y) + side_val(seg.minus, y) - 2.0 * u[i];
            let affine = !(matches!(seg.plus, Side::Ext { .. }) && seg.gp.is_none()
                || matches!(seg.minus, Side::Ext { .. }) && seg.gm.is_none());
            let mut cuts = vec![seg.a];
            if affine {
                let (ea, eb) = (e(seg.a), e(seg.b));
                if ea * eb < 0.0 {
                    let r = seg.a + (seg.b - seg.a) * ea / (ea - eb);
                    if r > seg.a && r < seg.b {
                        cuts.push(r);
                    }
                }
            } else {
                cuts.extend(sign_changes(e, seg.a, seg.b, crate::quad::gl8()));
            }
            cuts.push(seg.b);
            for c in cuts.windows(2) {
                let beta = rule.beta(e(0.5 * (c[0] + c[1])));
                add(&mut a, &mut rhs, seg, c[0], c[1], beta);
            }
        }

        match &geom.far {
            Far::Linear { g, mass } => {
                rhs += g;
                a[i] -= 2.0 * mass;
            }
            Far::Classes(classes) => {
                for &(v, mass) in classes {
                    let beta = beta_at(u.map(|u| v - u[i]));
                    rhs += 2.0 * beta * mass * v;
                    a[i] -= 2.0 * beta * mass;
                }
            }
        }
        rhs += (self.branches[branch].coeff)(x);
        Row { a, rhs }
    }

    /// All interior rows of one branch.
    pub fn rows(&self, branch: usize, u: Option<&[f64]>) -> Vec<Row> {
        par::map_range(self.cells - 1, |r| self.row(branch, r + 1, u))
    }
}

/// Monotonicity check: nonnegative off-diagonals dominated by the diagonal.
pub(crate) fn check_dominance(rows: &[Row]) -> Result<()> {
    for (r, row) in rows.iter().enumerate() {
        let i = r + 1;
        let diag = row.a[i];
        let mut off = 0.0;
        for (j, &v) in row.a.iter().enumerate() {
            if j == i {
                continue;
            }
            if v < -1e-13 * diag.abs() {
                return Err(Error::NonDominantMatrix { row: i });
            }
            off += v;
        }
        if !(diag < 0.0) || off > -diag * (1.0 + 1e-12) {
            return Err(Error::NonDominantMatrix { row: i });
        }
    }
    Ok(())
}

/// Solves `Σ_j a_ij u_j + rhs_i = 0` for the interior nodes, boundary
/// nodes fixed from `boundary = (u_0, u_N)`.
pub(crate) fn solve_rows(rows: &[Row], boundary: (f64, f64)) -> Result<Vec<f64>> {
    let n = rows.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(n, n);
    let mut b = nalgebra::DVector::<f64>::zeros(n);
    for (r, row) in rows.iter().enumerate() {
        for c in 0..n {
            m[(r, c)] = row.a[c + 1];
        }
        b[r] = -(row.rhs + row.a[0] * boundary.0 + row.a[n + 1] * boundary.1);
    }
    let sol = m.lu().solve(&b).ok_or(Error::NonDominantMatrix { row: 0 })?;
    Ok(sol.iter().copied().collect())
}
