//! Calibration and invariant audit of the periodization window.
//!
//! The closed forms live in [`crate::bump`]; this wrapper runs the
//! deterministic coefficient calibration and verifies on grids everything
//! the construction relies on: compact support, unit mass, two-sided
//! positivity, the quartic transform envelope, and the unit-shift
//! comparability of the transform.

use serde::{Deserialize, Serialize};

use crate::bump;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxPhi {
    pub a1: f64,
    pub a2: f64,
    /// c such that `phi_hat(xi+r)/phi_hat(xi)` stays in `[1/c, c]` for all
    /// grid xi and |r| <= 1.
    pub ratio_constant: f64,
    /// Envelope constants: `lo (1+|xi|)^-4 <= phi_hat <= hi (1+|xi|)^-4`
    /// over the audited grid.
    pub envelope_lo: f64,
    pub envelope_hi: f64,
    pub min_grid_value: f64,
    pub integral: f64,
}

impl AuxPhi {
    pub fn phi(&self, x: f64) -> f64 {
        bump::aux_phi(x)
    }

    pub fn phi_hat(&self, xi: f64) -> f64 {
        bump::aux_phi_hat(xi)
    }

    pub fn phi0(&self, x: f64) -> f64 {
        bump::phi0(x)
    }

    pub fn phi0_hat(&self, xi: f64) -> f64 {
        bump::phi0_hat(xi)
    }
}

/// Runs the deterministic calibration (second coefficient pinned to one,
/// first doubled until the physical-space grid is nonnegative, then both
/// scaled to unit mass) and audits every window invariant. Any violation
/// aborts with the witness point.
pub fn build_phi() -> Result<AuxPhi> {
    let grid_n = 1 << 16;
    // calibration: raw a2 = 1, raw a1 doubles until grid-nonnegative
    let mut a1_raw = 1.0f64;
    let a2_raw = 1.0f64;
    loop {
        let mut min_val = f64::INFINITY;
        for i in 0..=grid_n {
            let x = -1.0 + 2.0 * i as f64 / grid_n as f64;
            let v = a1_raw * bump::phi0(x) + a2_raw * bump::g_kernel(4.0 * x);
            min_val = min_val.min(v);
        }
        if min_val >= 0.0 {
            break;
        }
        a1_raw *= 2.0;
        if a1_raw > 1e6 {
            return Err(Error::Calibration("first coefficient diverged".into()));
        }
    }
    // unit mass: integral of the raw combination is (3/2) a1 + a2/4
    let scale = 1.0 / (1.5 * a1_raw + 0.25 * a2_raw);
    let a1 = a1_raw * scale;
    let a2 = a2_raw * scale;
    if (a1 - bump::AUX_A1).abs() > 1e-14 || (a2 - bump::AUX_A2).abs() > 1e-14 {
        return Err(Error::Calibration(format!(
            "calibrated ({a1}, {a2}) disagrees with the frozen coefficients"
        )));
    }

    // support and physical-space nonnegativity
    let mut min_grid_value = f64::INFINITY;
    for i in 0..=grid_n {
        let x = -1.0 + 2.0 * i as f64 / grid_n as f64;
        let v = bump::aux_phi(x);
        if v < 0.0 {
            return Err(Error::Calibration(format!("phi({x}) = {v} < 0")));
        }
        min_grid_value = min_grid_value.min(v);
    }
    for i in 0..=64 {
        let x = 1.0 + i as f64 * 0.25;
        if bump::aux_phi(x) != 0.0 || bump::aux_phi(-x) != 0.0 {
            return Err(Error::Calibration(format!("support leaks at |x| = {x}")));
        }
    }

    // unit mass within 1e-8 (midpoint rule)
    let m = 1 << 17;
    let h = 2.0 / m as f64;
    let integral: f64 = (0..m)
        .map(|i| bump::aux_phi(-1.0 + (i as f64 + 0.5) * h))
        .sum::<f64>()
        * h;
    if (integral - 1.0).abs() > 1e-8 {
        return Err(Error::Calibration(format!("integral {integral} != 1")));
    }

    // transform positivity, envelope, and unit-shift comparability up to 1e4
    let mut envelope_lo = f64::INFINITY;
    let mut envelope_hi = 0.0f64;
    let mut ratio_hi = 1.0f64;
    let steps = 200_000;
    let xi_max = 1e4;
    for i in 0..=steps {
        let xi = i as f64 * xi_max / steps as f64;
        let v = bump::aux_phi_hat(xi);
        if v <= 0.0 {
            return Err(Error::Calibration(format!("phi_hat({xi}) = {v} <= 0")));
        }
        let shape = (1.0 + xi).powi(4);
        envelope_lo = envelope_lo.min(v * shape);
        envelope_hi = envelope_hi.max(v * shape);
        for r in [-1.0, -0.5, 0.25, 1.0] {
            let w = bump::aux_phi_hat(xi + r);
            if w <= 0.0 {
                return Err(Error::Calibration(format!("phi_hat({}) <= 0", xi + r)));
            }
            let ratio = (w / v).max(v / w);
            ratio_hi = ratio_hi.max(ratio);
        }
    }
    if envelope_lo <= 0.0 || !envelope_hi.is_finite() {
        return Err(Error::Calibration("quartic envelope failed".into()));
    }
    Ok(AuxPhi {
        a1,
        a2,
        ratio_constant: ratio_hi,
        envelope_lo,
        envelope_hi,
        min_grid_value,
        integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn build_passes_all_invariants() {
        let phi = build_phi().unwrap();
        assert!((phi.a1 - 4.0 / 7.0).abs() < 1e-14);
        assert!((phi.a2 - 4.0 / 7.0).abs() < 1e-14);
        assert!(phi.ratio_constant.is_finite());
        assert!(phi.envelope_lo > 0.0);
        assert!(phi.envelope_hi / phi.envelope_lo < 1e4);
        assert!((phi.integral - 1.0).abs() < 1e-8);
    }

    #[test]
    fn component_transform_values() {
        // rectangle transform at 1/2
        assert!((bump::sinc(0.5) - 2.0 / PI).abs() < 1e-14);
        // odd component modulus at nonzero integers is 1/(pi |k|)
        assert!((bump::g_odd(3.0).abs() - 1.0 / (3.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn quartic_limit_constant() {
        // (pi xi / 4)^4 phi_hat(xi) approaches a2/4 (checked at xi = 1e4)
        let phi = build_phi().unwrap();
        let xi = 1e4;
        let v = (PI * xi / 4.0).powi(4) * phi.phi_hat(xi);
        let target = phi.a2 / 4.0;
        assert!(
            (v - target).abs() < 0.05 * target,
            "limit value {v} vs {target}"
        );
    }
}
