//! Pointwise evaluation of linear, extremal and Bellman nonlocal operators.

pub(crate) mod engine;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{horner, GridFunction};
use crate::kernels::{KernelSpec, Modulated};
use crate::par;
use crate::params::EllipticityParams;

pub use engine::{Response, Term, Weight};

/// Quadrature controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig {
    /// Inner cutoff `r₀`; `None` means four grid cells.
    #[serde(default)]
    pub r0: Option<f64>,
    /// Largest ratio `b/a` of a mid-range panel `[a, b]`.
    #[serde(default = "default_ratio")]
    pub panel_ratio: f64,
    #[serde(default = "default_tol")]
    pub tolerance: f64,
}

fn default_ratio() -> f64 {
    1.5
}
fn default_tol() -> f64 {
    1e-10
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            r0: None,
            panel_ratio: default_ratio(),
            tolerance: default_tol(),
        }
    }
}

impl QuadratureConfig {
    /// Checks the config against a grid spacing.
    pub fn validate(&self, h: f64) -> Result<()> {
        if let Some(r0) = self.r0 {
            if !(r0 >= 2.0 * h * (1.0 - 1e-12)) {
                return Err(invalid(format!("r0 = {r0} must be at least twice the spacing {h}")));
            }
        }
        if !(self.panel_ratio > 1.0) {
            return Err(invalid("panel_ratio must exceed 1"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

/// Which extremal operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Response weighting `(δ²)⁺` and `(δ²)⁻`.
    pub fn response(self, p: &EllipticityParams) -> Response {
        match self {
            Sign::Plus => Response::Extremal {
                pos: p.big_lambda,
                neg: p.lambda,
            },
            Sign::Minus => Response::Extremal {
                pos: p.lambda,
                neg: p.big_lambda,
            },
        }
    }
}

/// Drift field `c_a(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Coefficient {
    Constant {
        value: f64,
    },
    Polynomial {
        coeffs: Vec<f64>,
    },
    Cos {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · |x − center|^exponent`.
    AbsPower {
        amplitude: f64,
        exponent: f64,
        #[serde(default)]
        center: f64,
    },
    /// Uniform table on `[from, to]`, linearly interpolated, clamped outside.
    Table {
        from: f64,
        to: f64,
        values: Vec<f64>,
    },
}

fn one() -> f64 {
    1.0
}

impl Default for Coefficient {
    fn default() -> Self {
        Coefficient::Constant { value: 0.0 }
    }
}

impl Coefficient {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Polynomial { coeffs } => horner(coeffs, x),
            Coefficient::Cos {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * x + phase).cos(),
            Coefficient::AbsPower {
                amplitude,
                exponent,
                center,
            } => amplitude * (x - center).abs().powf(*exponent),
            Coefficient::Table { from, to, values } => {
                let n = values.len() - 1;
                if n == 0 {
                    return values[0];
                }
                let t = ((x - from) / (to - from) * n as f64).clamp(0.0, n as f64);
                let i = (t.floor() as usize).min(n - 1);
                let f = t - i as f64;
                values[i] * (1.0 - f) + values[i + 1] * f
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Coefficient::Table { from, to, values } if values.is_empty() || !(to > from) => {
                Err(invalid("coefficient table needs values and from < to"))
            }
            Coefficient::AbsPower { exponent, .. } if !(*exponent >= 0.0) => {
                Err(invalid("coefficient exponent must be nonnegative"))
            }
            _ => Ok(()),
        }
    }
}

/// One member `(K_a, c_a)` of a Bellman family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyMember {
    pub kernel: KernelSpec,
    #[serde(default)]
    pub coefficient: Coefficient,
}

/// Finite family defining `I(u, x) = min_a (L_a u(x) + c_a(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorFamily {
    pub members: Vec<FamilyMember>,
    pub params: EllipticityParams,
}

impl OperatorFamily {
    pub fn new(members: Vec<FamilyMember>, params: EllipticityParams) -> Result<Self> {
        let f = Self { members, params };
        f.validate()?;
        Ok(f)
    }

    /// Nonempty, one order, every kernel within `(λ, Λ)`.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let first = self
            .members
            .first()
            .ok_or_else(|| invalid("operator family is empty"))?;
        let sigma = first.kernel.sigma();
        for (i, m) in self.members.iter().enumerate() {
            if (m.kernel.sigma() - sigma).abs() > 1e-15 {
                return Err(invalid("family members must share one order"));
            }
            m.coefficient.validate()?;
            let rep = crate::kernels::check_l0(&m.kernel, &self.params);
            if !rep.pass {
                return Err(invalid(format!(
                    "member {i} leaves [{}, {}]: b ranges over [{}, {}]",
                    self.params.lambda, self.params.big_lambda, rep.b_min, rep.b_max
                )));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.members[0].kernel.sigma()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Finitely supported probability measure `Σ w_j δ_{h_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let m = Self { atoms };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() {
            return Err(Error::BadMeasure("no atoms".into()));
        }
        if let Some((h, w)) = self.atoms.iter().find(|(h, w)| !(*w >= 0.0) || !h.is_finite()) {
            return Err(Error::BadMeasure(format!("atom at {h} has weight {w}")));
        }
        let total: f64 = self.atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::BadMeasure(format!("total mass {total} is not 1")));
        }
        Ok(())
    }
}

/// General entry point: `∫ r(Σ w_k δ²u(c_k, y)) b(y) κ(y) dy`.
pub fn apply_signal(
    u: &GridFunction,
    terms: &[Term],
    response: Response,
    weight: Weight<'_>,
    sigma: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    cfg.validate(u.spacing())?;
    engine::integrate(u, terms, response, weight, sigma, cfg)
}

fn single(x: f64) -> [Term; 1] {
    [Term { center: x, weight: 1.0 }]
}

/// `L u(x) = ∫ δ²u(x, y) K(x, y) dy`.
pub fn linear_apply(u: &GridFunction, k: &dyn Modulated, x: f64, cfg: &QuadratureConfig) -> Result<f64> {
    apply_signal(
        u,
        &single(x),
        Response::Linear,
        Weight::Kernel { kernel: k, x },
        k.sigma(),
        cfg,
    )
}

/// `M^± u(x)` over the class with bounds `p`.
pub fn extremal_apply(
    u: &GridFunction,
    sign: Sign,
    p: &EllipticityParams,
    sigma: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    apply_signal(u, &single(x), sign.response(p), Weight::Flat, sigma, cfg)
}

/// `min_a (L_a u(x) + c_a(x))` and the lowest minimizing index.
pub fn bellman_apply(u: &GridFunction, f: &OperatorFamily, x: f64, cfg: &QuadratureConfig) -> Result<(f64, usize)> {
    if f.is_empty() {
        return Err(invalid("operator family is empty"));
    }
    let mut best = (f64::INFINITY, 0);
    for (a, m) in f.members.iter().enumerate() {
        let v = linear_apply(u, &m.kernel, x, cfg)? + m.coefficient.eval(x);
        if v < best.0 {
            best = (v, a);
        }
    }
    Ok(best)
}

/// `M^±(u(· + h) − u)(x)`.
pub fn translation_difference_apply(
    u: &GridFunction,
    h: f64,
    sign: Sign,
    p: &EllipticityParams,
    sigma: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let terms = [
        Term {
            center: x + h,
            weight: 1.0,
        },
        Term {
            center: x,
            weight: -1.0,
        },
    ];
    apply_signal(u, &terms, sign.response(p), Weight::Flat, sigma, cfg)
}

/// `M⁺(Σ_j w_j u(· + h_j) − u)(x)`.
pub fn average_difference_apply(
    u: &GridFunction,
    mu: &DiscreteMeasure,
    p: &EllipticityParams,
    sigma: f64,
    x: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    mu.validate()?;
    let mut terms: Vec<Term> = Vec::with_capacity(mu.atoms.len() + 1);
    let mut self_weight = -1.0;
    for &(h, w) in &mu.atoms {
        if h == 0.0 {
            self_weight += w;
        } else {
            terms.push(Term {
                center: x + h,
                weight: w,
            });
        }
    }
    terms.push(Term {
        center: x,
        weight: self_weight,
    });
    apply_signal(u, &terms, Sign::Plus.response(p), Weight::Flat, sigma, cfg)
}

/// Evaluates `f` at every point, in parallel when enabled.
pub fn apply_many<T: Send>(xs: &[f64], f: impl Fn(f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    par::try_map_range(xs.len(), |i| f(xs[i]))
}
