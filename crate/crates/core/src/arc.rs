//! The weighted planar arc `x -> (x, sqrt(1-x^2))` over [-1/2, 1/2]:
//! oscillatory transform by adaptive Gauss-Kronrod panels, square-root
//! decay scan, and the exactness of the integer-frequency Gram matrix
//! along the horizontal axis.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::envelope::{Band, FourierProfile};
use crate::error::{Error, Result};
use crate::rng::unit_f64;

// 15-point Kronrod nodes with embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

fn integrand(x: f64, xi1: f64, xi2: f64) -> Complex64 {
    let phase = -2.0 * PI * (x * xi1 + (1.0 - x * x).sqrt() * xi2);
    Complex64::from_polar(1.0, phase)
}

fn gk15(a: f64, b: f64, xi1: f64, xi2: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = integrand(c, xi1, xi2);
    let mut kronrod = fc * WGK[7];
    let mut gauss = Complex64::new(0.0, 0.0);
    for (i, &x) in XGK.iter().enumerate().take(7) {
        let f1 = integrand(c - h * x, xi1, xi2);
        let f2 = integrand(c + h * x, xi1, xi2);
        kronrod += (f1 + f2) * WGK[i];
        if i % 2 == 1 {
            gauss += (f1 + f2) * WG[i / 2];
        }
    }
    gauss += fc * WG[3];
    let value = kronrod * h;
    let err = ((kronrod - gauss) * h).norm();
    (value, err)
}

struct Panel {
    err: f64,
    a: f64,
    b: f64,
    value: Complex64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One evaluated transform value with its quadrature error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArcEvaluation {
    pub xi: (f64, f64),
    pub value_re: f64,
    pub value_im: f64,
    pub error_bound: f64,
    pub panels: usize,
}

impl ArcEvaluation {
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.value_re, self.value_im)
    }
}

const PANEL_BUDGET: usize = 1 << 21;

/// Adaptive transform of the arc measure. The initial panelization keeps
/// the phase span per panel near one period (the stationary-phase-aware
/// trigger); panels then split greedily on the Kronrod error estimate
/// until the accumulated estimate clears `tol`.
pub fn arc_fourier(xi1: f64, xi2: f64, tol: f64) -> Result<ArcEvaluation> {
    if tol < 1e-12 {
        return Err(Error::BadParameter(format!("tol {tol} below 1e-12")));
    }
    // |phase'| <= 2 pi (|xi1| + 0.578 |xi2|) on [-1/2, 1/2]
    let slope = 2.0 * PI * (xi1.abs() + 0.5774 * xi2.abs());
    let initial = ((slope / (2.0 * PI)).ceil() as usize).clamp(1, PANEL_BUDGET / 4);
    let mut heap = BinaryHeap::new();
    let mut total = Complex64::new(0.0, 0.0);
    let mut total_err = 0.0;
    let width = 1.0 / initial as f64;
    for i in 0..initial {
        let a = -0.5 + i as f64 * width;
        let b = a + width;
        let (v, e) = gk15(a, b, xi1, xi2);
        total += v;
        total_err += e;
        heap.push(Panel {
            err: e,
            a,
            b,
            value: v,
        });
    }
    let mut panels = initial;
    while total_err > tol {
        if panels >= PANEL_BUDGET {
            return Err(Error::QuadratureBudget {
                xi: (xi1 * xi1 + xi2 * xi2).sqrt(),
                panels,
            });
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(worst.a, mid, xi1, xi2);
        let (v2, e2) = gk15(mid, worst.b, xi1, xi2);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            err: e1,
            a: worst.a,
            b: mid,
            value: v1,
        });
        heap.push(Panel {
            err: e2,
            a: mid,
            b: worst.b,
            value: v2,
        });
        panels += 1;
    }
    Ok(ArcEvaluation {
        xi: (xi1, xi2),
        value_re: total.re,
        value_im: total.im,
        error_bound: total_err,
        panels,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayScanReport {
    pub profile: FourierProfile,
    /// Running sup of |xi|^{1/2} |transform|.
    pub sup_scaled: f64,
    /// Same sup over the nested first half of each band's samples.
    pub sup_scaled_half: f64,
    /// Relative change across the final doubling (< 2% means stabilized).
    pub refinement_change: f64,
    pub stabilized: bool,
    /// Max of |xi|^{1/2} |transform| per direction sector over [0, pi).
    pub per_sector_sup: Vec<f64>,
}

/// Jittered directional and radial scan of `|xi|^{1/2} |sigma_hat(xi)|` up
/// to `r_max`, with per-band envelopes of the unscaled transform. Sample
/// sets nest under refinement, so the half-sample sup is a genuine coarse
/// stage of the full sup.
pub fn decay_scan(r_max: f64, samples_per_band: u32, seed: u64) -> Result<DecayScanReport> {
    if r_max > 1e5 {
        return Err(Error::BadParameter("scan capped at |xi| = 1e5".into()));
    }
    if samples_per_band < 16 {
        return Err(Error::BadParameter("need >= 16 samples per band".into()));
    }
    let m_max = (r_max.log2().floor() as i32 - 1).max(2);
    let sectors = 8usize;
    let mut per_sector = vec![0.0f64; sectors];
    let mut sup_full = 0.0f64;
    let mut sup_half = 0.0f64;
    let mut bands = Vec::new();
    use rayon::prelude::*;
    let rows: Vec<(Band, Vec<(usize, f64, bool)>)> = (0..=m_max)
        .collect::<Vec<i32>>()
        .par_iter()
        .map(|&m| -> Result<(Band, Vec<(usize, f64, bool)>)> {
            let lo = (2.0f64).powi(m);
            let mut envelope: f64 = 0.0;
            let mut contributions = Vec::new();
            for i in 0..samples_per_band as u64 {
                // nested radial offsets, jittered angles
                let off = if i == 0 {
                    unit_f64(seed, m as u64, 0)
                } else {
                    let depth = 64 - i.leading_zeros();
                    let w = (0.5f64).powi(depth as i32);
                    (i.reverse_bits() >> (64 - depth)) as f64 * w
                        + w * unit_f64(seed, m as u64, i)
                };
                let r = lo * (1.0 + off);
                let theta = PI * unit_f64(seed ^ 0xa5a5, m as u64, i);
                let xi1 = r * theta.cos();
                let xi2 = r * theta.sin();
                let v = arc_fourier(xi1, xi2, 1e-9)?.value().norm();
                envelope = envelope.max(v);
                let scaled = r.sqrt() * v;
                let sector = ((theta / PI) * sectors as f64) as usize % sectors;
                let in_half = i < (samples_per_band as u64) / 2;
                contributions.push((sector, scaled, in_half));
            }
            Ok((Band { m, envelope }, contributions))
        })
        .collect::<Result<Vec<_>>>()?;
    for (band, contributions) in rows {
        bands.push(band);
        for (sector, scaled, in_half) in contributions {
            per_sector[sector] = per_sector[sector].max(scaled);
            sup_full = sup_full.max(scaled);
            if in_half {
                sup_half = sup_half.max(scaled);
            }
        }
    }
    let mut profile = FourierProfile {
        bands,
        fitted_beta: 0.0,
        slack_epsilon: 0.0,
        residual: 0.0,
        degenerate: false,
        tag: Some("arc".into()),
    };
    let _ = crate::envelope::fit_decay_exponent(&mut profile, 2);
    let change = if sup_full > 0.0 {
        (sup_full - sup_half) / sup_full
    } else {
        0.0
    };
    Ok(DecayScanReport {
        profile,
        sup_scaled: sup_full,
        sup_scaled_half: sup_half,
        refinement_change: change,
        stabilized: change < 0.02,
        per_sector_sup: per_sector,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GramReport {
    pub k_max: u32,
    pub max_offdiag: f64,
    pub evaluations: usize,
}

/// Gram matrix of the integer exponentials along the horizontal axis.
/// By the Toeplitz structure only the 2K difference frequencies are
/// evaluated; the diagonal is the total mass, exactly one.
pub fn gram_onb(k_max: u32, tol: f64) -> Result<GramReport> {
    if k_max > 512 {
        return Err(Error::BadParameter("Gram size capped at 512".into()));
    }
    let mut max_offdiag = 0.0f64;
    let mut evaluations = 0usize;
    for m in 1..=(2 * k_max as i64) {
        let v = arc_fourier(m as f64, 0.0, tol)?;
        evaluations += 1;
        let norm = v.value().norm();
        if norm > max_offdiag {
            max_offdiag = norm;
        }
    }
    Ok(GramReport {
        k_max,
        max_offdiag,
        evaluations,
    })
}

/// Change-of-variables oracle: the same transform through the angular
/// parametrization `int e^{-2 pi i |xi| cos(theta - theta_0)} sin(theta)`
/// over [pi/3, 2pi/3], fixed-grid Simpson.
pub fn arc_fourier_angular_oracle(xi1: f64, xi2: f64, n: usize) -> Complex64 {
    let r = (xi1 * xi1 + xi2 * xi2).sqrt();
    let theta0 = xi2.atan2(xi1);
    let (a, b) = (PI / 3.0, 2.0 * PI / 3.0);
    let f = |theta: f64| -> Complex64 {
        Complex64::from_polar(theta.sin(), -2.0 * PI * r * (theta - theta0).cos())
    };
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += f(a + i as f64 * h) * w;
    }
    sum * (h / 3.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_origin_is_one() {
        let v = arc_fourier(0.0, 0.0, 1e-12).unwrap();
        assert!((v.value() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn integer_horizontal_frequencies_vanish() {
        for k in [1i64, 2, 5, 17, 64] {
            let v = arc_fourier(k as f64, 0.0, 1e-12).unwrap();
            assert!(v.value().norm() < 1e-10, "k={k}: {}", v.value().norm());
        }
    }

    #[test]
    fn vertical_frequency_matches_angular_oracle() {
        let v = arc_fourier(0.0, 100.0, 1e-10).unwrap();
        let oracle = arc_fourier_angular_oracle(0.0, 100.0, 1 << 20);
        assert!(
            (v.value() - oracle).norm() < 1e-8,
            "{} vs {}",
            v.value(),
            oracle
        );
    }

    #[test]
    fn conjugate_symmetry() {
        for &(a, b) in &[(3.3, 7.1), (12.0, -5.0), (0.4, 19.7)] {
            let v1 = arc_fourier(a, b, 1e-11).unwrap().value();
            let v2 = arc_fourier(-a, -b, 1e-11).unwrap().value();
            assert!((v1 - v2.conj()).norm() < 1e-9);
        }
    }

    #[test]
    fn modulus_bounded_by_mass() {
        for i in 0..20 {
            let r = 1.0 + i as f64 * 37.7;
            let v = arc_fourier(r * 0.6, r * 0.8, 1e-10).unwrap();
            assert!(v.value().norm() <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn horizontal_axis_closed_form_is_cardinal_sine() {
        for &xi in &[0.3f64, 1.7, 6.5] {
            let v = arc_fourier(xi, 0.0, 1e-12).unwrap().value();
            let expect = (PI * xi).sin() / (PI * xi);
            assert!((v.re - expect).abs() < 1e-10, "xi={xi}");
            assert!(v.im.abs() < 1e-10);
        }
    }

    #[test]
    fn gram_identity_small() {
        let rep = gram_onb(32, 1e-12).unwrap();
        assert!(rep.max_offdiag < 1e-10, "offdiag {}", rep.max_offdiag);
        assert_eq!(rep.evaluations, 64);
    }

    #[test]
    fn decay_scan_runs_and_reports() {
        let rep = decay_scan(256.0, 16, 3).unwrap();
        assert!(rep.sup_scaled.is_finite());
        assert!(rep.sup_scaled >= rep.sup_scaled_half);
        assert_eq!(rep.per_sector_sup.len(), 8);
        // the vertical sector carries the stationary point and dominates
        let max_sector = rep
            .per_sector_sup
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        assert!(max_sector > 0.2, "sup {max_sector}");
    }
}
