//! Boundary decay envelopes `|u(x)| ≤ C dist(x, ℝ∖(−1,1))^p`.

use serde::{Deserialize, Serialize};

use crate::grid::GridFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierReport {
    pub exponent: f64,
    /// Smallest admissible `C`; infinite when `u` is nonzero on the boundary.
    pub constant: f64,
    /// Node attaining `C`.
    pub witness: Option<f64>,
    pub pass: bool,
}

/// Smallest `C` with `|u(x)| ≤ C dist(x, ℝ∖(−1,1))^p` at the nodes of `u`
/// in `[a, b]`.
pub fn barrier_check(u: &GridFunction, p_exp: f64, region: (f64, f64)) -> BarrierReport {
    let mut c = 0.0f64;
    let mut witness = None;
    for x in u.nodes().filter(|&x| x >= region.0 - 1e-12 && x <= region.1 + 1e-12) {
        let v = u.eval(x).abs();
        let d = (1.0 - x.abs()).max(0.0);
        let q = if d <= 1e-12 {
            if v > 1e-12 {
                f64::INFINITY
            } else {
                0.0
            }
        } else {
            v / d.powf(p_exp)
        };
        if q > c {
            c = q;
            witness = Some(x);
        }
    }
    BarrierReport {
        exponent: p_exp,
        constant: c,
        witness,
        pass: c.is_finite(),
    }
}

/// Relative change of the barrier constant between two resolutions.
pub fn barrier_refinement(coarse: &BarrierReport, fine: &BarrierReport) -> f64 {
    if coarse.constant == fine.constant {
        return 0.0;
    }
    (fine.constant - coarse.constant).abs() / coarse.constant.abs().max(fine.constant.abs())
}
