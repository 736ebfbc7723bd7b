//! The fixed bump `phi0` and the positive-transform window `aux_phi`.
//!
//! `phi0` is the cubic B-spline `24 * (chi_{[-1/4,1/4]} convolved 4 times)`:
//! even, C^2, supported on [-1,1], nonnegative, with nonnegative transform
//! `(3/2) sinc^4(xi/2)`, and `phi0 >= 1/2` on [-1/2, 1/2].
//!
//! `aux_phi` is the window used by the prime-periodized construction,
//!
//! ```text
//!     phi(x) = A1 * phi0(x) + A2 * G(4x),       G = H * H (convolution),
//!     H      = phi1*phi1 + phi2*phi2^-,
//!     phi1   = chi_[-1/2,1/2],   phi2(x) = 2x on [-1/2,1/2],
//! ```
//!
//! whose transform is strictly positive with an exact quartic envelope:
//! `phi_hat(xi) = A1 (3/2) sinc^4(xi/2) + (A2/4) (sinc^2(xi/4) + g(xi/4)^2)^2`
//! with `g(u) = (pi u cos(pi u) - sin(pi u)) / (pi u)^2`.
//!
//! H and G are exact piecewise polynomials (G has rational coefficients,
//! verified in tests against a numerical convolution of H).

use std::f64::consts::PI;

/// sin(pi u)/(pi u), with sinc(0) = 1.
pub fn sinc(u: f64) -> f64 {
    let v = PI * u;
    if v.abs() < 1e-8 {
        1.0 - v * v / 6.0
    } else {
        v.sin() / v
    }
}

/// Imaginary part of the transform of `phi2(x) = 2x` on [-1/2,1/2]:
/// `phi2_hat(u) = i * g(u)` with `g(u) = (pi u cos(pi u) - sin(pi u))/(pi u)^2`.
pub fn g_odd(u: f64) -> f64 {
    let v = PI * u;
    if v.abs() < 1e-4 {
        // series: (v cos v - sin v)/v^2 = -v/3 + v^3/30 - ...
        -v / 3.0 + v * v * v / 30.0
    } else {
        (v * v.cos() - v.sin()) / (v * v)
    }
}

/// The fixed even bump: support [-1,1], C^2, `phi0 >= 1/2` on [-1/2,1/2],
/// `phi0(0) = 2`, integral 3/2.
pub fn phi0(x: f64) -> f64 {
    let t = 2.0 * x.abs(); // reduce to b3 on [2,4) by evenness: t in [0,2)
    if t >= 2.0 {
        return 0.0;
    }
    // b3(2+t) for t in [0,2): piece [2,3): (3u^3-24u^2+60u-44)/6; [3,4): (4-u)^3/6
    let u = 2.0 + t;
    let b = if u < 3.0 {
        ((3.0 * u - 24.0) * u * u + 60.0 * u - 44.0) / 6.0
    } else {
        let w = 4.0 - u;
        w * w * w / 6.0
    };
    3.0 * b
}

/// Transform of `phi0`: `(3/2) sinc^4(xi/2) >= 0`.
pub fn phi0_hat(xi: f64) -> f64 {
    let s = sinc(xi / 2.0);
    1.5 * s * s * s * s
}

/// Total integral of `phi0`.
pub const PHI0_MASS: f64 = 1.5;

/// Normalized primitive of `phi0`: S(u) = Int_{-1}^{2u-1} phi0 / (3/2),
/// a C^3 smoothstep with S(u)=0 for u<=0 and S(u)=1 for u>=1.
/// Reduces to the B-spline primitive: S(u) = Int_0^{4u} b3.
pub fn smoothstep(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        b3_primitive(4.0 * u)
    }
}

// Int_0^t b3, for t in [0,4].
fn b3_primitive(t: f64) -> f64 {
    let t = t.clamp(0.0, 4.0);
    if t < 1.0 {
        t * t * t * t / 24.0
    } else if t < 2.0 {
        // b3(1+u) = (1 + 3u + 3u^2 - 3u^3)/6
        let u = t - 1.0;
        1.0 / 24.0 + (4.0 * u + 6.0 * u * u + 4.0 * u * u * u - 3.0 * u * u * u * u) / 24.0
    } else if t < 3.0 {
        // b3(2+u) = (4 - 6u^2 + 3u^3)/6
        let u = t - 2.0;
        0.5 + (16.0 * u - 8.0 * u * u * u + 3.0 * u * u * u * u) / 24.0
    } else {
        let w = 4.0 - t;
        1.0 - w * w * w * w / 24.0
    }
}

/// Plateau taper: 1 on [delta, 1-delta], 0 outside (0,1), C^3 in between.
pub fn plateau(x: f64, delta: f64) -> f64 {
    smoothstep(x / delta) * smoothstep((1.0 - x) / delta)
}

/// H = phi1*phi1 + phi2*phi2^-  (even, support [-1,1], nonnegative):
/// `H(x) = 4/3 - 2|x| + (2/3)|x|^3`.
pub fn h_kernel(x: f64) -> f64 {
    let a = x.abs();
    if a >= 1.0 {
        0.0
    } else {
        4.0 / 3.0 - 2.0 * a + (2.0 / 3.0) * a * a * a
    }
}

/// Transform of H: `sinc^2(u) + g(u)^2 > 0` everywhere.
pub fn h_hat(u: f64) -> f64 {
    let s = sinc(u);
    let g = g_odd(u);
    s * s + g * g
}

/// G = H * H: even, C^2, support [-2,2], nonnegative, integral 1.
/// Exact piecewise degree-7 polynomial.
pub fn g_kernel(x: f64) -> f64 {
    let z = x.abs();
    if z >= 2.0 {
        0.0
    } else if z <= 1.0 {
        // z^7/105 - (2/5) z^5 + (4/9) z^4 + (4/3) z^3 - (32/15) z^2 + 88/105
        (((((((1.0 / 105.0) * z + 0.0) * z - 2.0 / 5.0) * z + 4.0 / 9.0) * z + 4.0 / 3.0) * z
            - 32.0 / 15.0)
            * z
            + 0.0)
            * z
            + 88.0 / 105.0
    } else {
        // -z^7/315 + (2/15) z^5 - (4/9) z^4 + (32/15) z^2 - (32/9) z + 64/35
        (((((((-1.0 / 315.0) * z + 0.0) * z + 2.0 / 15.0) * z - 4.0 / 9.0) * z + 0.0) * z
            + 32.0 / 15.0)
            * z
            - 32.0 / 9.0)
            * z
            + 64.0 / 35.0
    }
}

/// Calibrated coefficients: A2 = 1 and A1 = 1 pass the nonnegativity grid
/// immediately (both summands are pointwise nonnegative), then both are
/// scaled so the integral is one: A1 (3/2) + A2/4 = 7/4.
pub const AUX_A1: f64 = 4.0 / 7.0;
pub const AUX_A2: f64 = 4.0 / 7.0;

/// The window `phi(x) = A1 phi0(x) + A2 G(4x)`: C^2, support [-1,1] with
/// interior vanishing only at the endpoints, integral 1.
pub fn aux_phi(x: f64) -> f64 {
    AUX_A1 * phi0(x) + AUX_A2 * g_kernel(4.0 * x)
}

/// Strictly positive transform of `aux_phi`, comparable to `(1+|xi|)^-4`.
pub fn aux_phi_hat(xi: f64) -> f64 {
    AUX_A1 * phi0_hat(xi) + (AUX_A2 / 4.0) * {
        let hh = h_hat(xi / 4.0);
        hh * hh
    }
}

/// Upper majorant for `aux_phi_hat`, monotone usable for tail sums:
/// `aux_phi_hat(xi) <= maj(|xi|)` for all xi.
pub fn aux_phi_hat_majorant(xi: f64) -> f64 {
    let a = xi.abs();
    if a < 4.0 {
        return 1.0;
    }
    // sinc^4(a/2) <= (2/(pi a))^4 ; (sinc^2 + g^2)(a/4) <= (4/(pi a))^2 (1 + 4/(pi a))^2 roughly;
    // keep a safe algebraic bound: sinc(u) <= 1/(pi u), |g(u)| <= 1/(pi u) + 1/(pi u)^2.
    let u = a / 4.0;
    let iu = 1.0 / (PI * u);
    let hh = iu * iu + (iu + iu * iu) * (iu + iu * iu);
    let s2 = 2.0 / (PI * a);
    AUX_A1 * 1.5 * s2 * s2 * s2 * s2 + (AUX_A2 / 4.0) * hh * hh
}

#[cfg(test)]
mod tests {
    use super::*;

    fn riemann<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        (0..n).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    #[test]
    fn phi0_values_and_mass() {
        assert!((phi0(0.0) - 2.0).abs() < 1e-12);
        assert!((phi0(0.5) - 0.5).abs() < 1e-12);
        assert!((phi0(-0.5) - 0.5).abs() < 1e-12);
        assert_eq!(phi0(1.0), 0.0);
        assert_eq!(phi0(-1.2), 0.0);
        for i in 0..=1000 {
            let x = -0.5 + i as f64 / 1000.0;
            assert!(phi0(x) >= 0.5 - 1e-12, "phi0({x}) = {}", phi0(x));
        }
        let mass = riemann(phi0, -1.0, 1.0, 1 << 16);
        assert!((mass - PHI0_MASS).abs() < 1e-9);
    }

    #[test]
    fn phi0_hat_matches_quadrature() {
        for &xi in &[0.0, 0.37, 1.0, 2.0, 5.5, 13.25] {
            let re = riemann(
                |x| phi0(x) * (2.0 * PI * x * xi).cos(),
                -1.0,
                1.0,
                1 << 17,
            );
            assert!(
                (re - phi0_hat(xi)).abs() < 1e-8,
                "xi={xi}: {re} vs {}",
                phi0_hat(xi)
            );
        }
    }

    #[test]
    fn g_kernel_matches_numeric_convolution() {
        for &z in &[0.0, 0.3, 0.77, 1.0, 1.5, 1.9, 2.0] {
            let num = riemann(|t| h_kernel(t) * h_kernel(z - t), -1.0, 1.0, 1 << 16);
            assert!(
                (num - g_kernel(z)).abs() < 1e-9,
                "z={z}: {num} vs {}",
                g_kernel(z)
            );
        }
        // rational spot values from the exact piecewise form
        assert!((g_kernel(0.0) - 88.0 / 105.0).abs() < 1e-15);
        assert!((g_kernel(1.0) - 29.0 / 315.0).abs() < 1e-12);
    }

    #[test]
    fn h_hat_matches_quadrature() {
        for &u in &[0.0, 0.5, 1.0, 2.25, 7.0] {
            let re = riemann(
                |x| h_kernel(x) * (2.0 * PI * x * u).cos(),
                -1.0,
                1.0,
                1 << 16,
            );
            assert!((re - h_hat(u)).abs() < 1e-8, "u={u}");
        }
    }

    #[test]
    fn aux_phi_unit_mass_and_nonnegative() {
        let mass = riemann(aux_phi, -1.0, 1.0, 1 << 17);
        assert!((mass - 1.0).abs() < 1e-9, "mass {mass}");
        for i in 0..=(1 << 16) {
            let x = -1.0 + 2.0 * i as f64 / (1 << 16) as f64;
            assert!(aux_phi(x) >= 0.0);
        }
        assert!((aux_phi_hat(0.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smoothstep_plateau() {
        assert_eq!(smoothstep(-1.0), 0.0);
        assert_eq!(smoothstep(2.0), 1.0);
        assert!((smoothstep(0.5) - 0.5).abs() < 1e-12); // phi0 even
        assert!(smoothstep(0.3) > 0.0 && smoothstep(0.3) < 0.5);
        let d = 0.125;
        assert_eq!(plateau(0.5, d), 1.0);
        assert_eq!(plateau(d, d), 1.0);
        assert_eq!(plateau(0.0, d), 0.0);
    }

    #[test]
    fn majorant_dominates() {
        for i in 1..2000 {
            let xi = i as f64 * 5.0;
            assert!(
                aux_phi_hat(xi) <= aux_phi_hat_majorant(xi) * (1.0 + 1e-12),
                "xi={xi}"
            );
        }
    }
}
