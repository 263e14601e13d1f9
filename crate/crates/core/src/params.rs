//! Exponent and ellipticity bookkeeping.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `σ`, `α`, `α′` and `ν = ⌊σ+α⌋` with their mutual constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderExponents {
    pub sigma: f64,
    pub alpha: f64,
    pub alpha_prime: f64,
    pub nu: u32,
}

impl HolderExponents {
    /// Derives `ν` and `α′ = max{α/2, (σ+α+ν)/2 − σ}`.
    pub fn new(sigma: f64, alpha: f64) -> Result<Self> {
        check_sigma(sigma)?;
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid(format!("alpha must be positive, got {alpha}")));
        }
        let order = sigma + alpha;
        if (order - order.round()).abs() <= 1e-12 {
            return Err(Error::IntegerOrder { order });
        }
        let nu = order.floor();
        let alpha_prime = (0.5 * alpha).max(0.5 * (order + nu) - sigma);
        let e = Self {
            sigma,
            alpha,
            alpha_prime,
            nu: nu as u32,
        };
        debug_assert!(e.alpha_prime < e.alpha);
        debug_assert!(nu < sigma + alpha_prime && sigma + alpha_prime < order);
        Ok(e)
    }

    /// `σ + α`.
    pub fn order(&self) -> f64 {
        self.sigma + self.alpha
    }
}

pub(crate) fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma < 2.0 {
        Ok(())
    } else {
        Err(invalid(format!("sigma must lie in (0, 2), got {sigma}")))
    }
}

/// Ellipticity constants `λ ≤ Λ` with the regularity budgets `A₀`, `C₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticityParams {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
    #[serde(default)]
    pub a0: f64,
    #[serde(default)]
    pub c0: f64,
}

impl EllipticityParams {
    pub fn new(lambda: f64, big_lambda: f64) -> Result<Self> {
        let p = Self {
            lambda,
            big_lambda,
            a0: 0.0,
            c0: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= self.big_lambda && self.big_lambda.is_finite()) {
            return Err(invalid(format!(
                "ellipticity requires 0 < lambda <= Lambda, got ({}, {})",
                self.lambda, self.big_lambda
            )));
        }
        if !(self.a0 >= 0.0 && self.c0 >= 0.0) {
            return Err(invalid("A0 and C0 must be nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponent_examples() {
        let e = HolderExponents::new(1.5, 0.2).unwrap();
        assert_eq!(e.nu, 1);
        assert!((e.alpha_prime - 0.1).abs() < 1e-15);
        let e = HolderExponents::new(1.9, 0.3).unwrap();
        assert_eq!(e.nu, 2);
        assert!((e.alpha_prime - 0.2).abs() < 1e-12);
        assert!(matches!(
            HolderExponents::new(1.5, 0.5),
            Err(Error::IntegerOrder { .. })
        ));
        assert!(HolderExponents::new(2.5, 0.1).is_err());
    }

    #[test]
    fn ellipticity_ordering() {
        assert!(EllipticityParams::new(1.0, 2.0).is_ok());
        assert!(EllipticityParams::new(2.0, 1.0).is_err());
        assert!(EllipticityParams::new(0.0, 1.0).is_err());
    }
}
