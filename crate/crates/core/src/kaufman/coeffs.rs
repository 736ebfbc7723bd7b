//! Fourier coefficients of the prime-periodized factors and their products.
//!
//! Two independent computation routes are kept side by side:
//! coefficient-domain dense convolutions (exact formulas, FFT products,
//! documented truncation bounds), and density-domain evaluation built from
//! the bump structure (used for real-frequency profiles and as the oracle
//! side of the equivalence checks).

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::primes::KaufmanParams;
use crate::bump::{aux_phi, aux_phi_hat, aux_phi_hat_majorant};
use crate::error::{Error, Result};

/// Truncation radius of the window-factor coefficient kernel
/// (`phi_hat(k/2)` decays quartically; the l1 tail beyond 4096 is < 1e-9).
pub const KERNEL0_RADIUS: i64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Mu,
    Nu,
}

/// Single-factor coefficient by formula.
///
/// Target variant: `k = 0 -> 1`, otherwise
/// `#{p in P : p | k} / #P * phi_hat(k/q)` (the unit "prime" divides
/// everything, so this is strictly positive). Auxiliary variant: the signed
/// form `(#{p | k} - sum_{p not| k} 1/(p-1)) / #P * phi_hat(k/q)`.
pub fn coeff_f(params: &KaufmanParams, level: usize, variant: Variant, k: i64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let q = params.q[level - 1];
    let ka = k.unsigned_abs();
    match variant {
        Variant::Mu => {
            let set = &params.p_mu[level - 1];
            let count = set
                .iter()
                .filter(|&&p| p == 1 || ka % p == 0)
                .count() as f64;
            count / set.len() as f64 * aux_phi_hat(k as f64 / q)
        }
        Variant::Nu => {
            let set = &params.p_nu[level - 1];
            let mut count = 0.0;
            let mut missing = 0.0;
            for &p in set {
                if ka % p == 0 {
                    count += 1.0;
                } else {
                    missing += 1.0 / (p as f64 - 1.0);
                }
            }
            (count - missing) / set.len() as f64 * aux_phi_hat(k as f64 / q)
        }
    }
}

/// Dense factor coefficients for |k| <= k_max (index k + k_max), built with
/// sieve-style marking so each prime touches only its multiples.
pub fn build_level_coeffs(
    params: &KaufmanParams,
    level: usize,
    variant: Variant,
    k_max: i64,
) -> Vec<f64> {
    let q = params.q[level - 1];
    let n = k_max as usize;
    let mut count = vec![0u32; n + 1];
    let mut recip = vec![0f64; n + 1];
    let (set, has_unit): (&[u64], bool) = match variant {
        Variant::Mu => (&params.p_mu[level - 1], true),
        Variant::Nu => (&params.p_nu[level - 1], false),
    };
    let mut recip_total = 0.0f64;
    for &p in set {
        if p == 1 {
            continue;
        }
        recip_total += 1.0 / (p as f64 - 1.0);
        let mut m = p as usize;
        while m <= n {
            count[m] += 1;
            recip[m] += 1.0 / (p as f64 - 1.0);
            m += p as usize;
        }
    }
    let denom = set.len() as f64;
    let mut out = vec![0f64; 2 * n + 1];
    for k in -(k_max)..=k_max {
        let idx = (k + k_max) as usize;
        if k == 0 {
            out[idx] = 1.0;
            continue;
        }
        let a = k.unsigned_abs() as usize;
        let weight = match variant {
            Variant::Mu => count[a] as f64 + if has_unit { 1.0 } else { 0.0 },
            Variant::Nu => count[a] as f64 - (recip_total - recip[a]),
        };
        out[idx] = weight / denom * aux_phi_hat(k as f64 / q);
    }
    out
}

/// Coefficients of the fixed window factor `2 phi(2x)`: `phi_hat(k/2)`.
pub fn kernel0(k_max: i64) -> Vec<f64> {
    (-(k_max)..=k_max)
        .map(|k| aux_phi_hat(k as f64 / 2.0))
        .collect()
}

/// Full linear convolution via FFT (sequences are centered: index i holds
/// frequency i - k_max).
pub fn conv_fft(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let size = out_len.next_power_of_two();
    let mut fa: Vec<Complex64> = Vec::with_capacity(size);
    fa.extend(a.iter().map(|&x| Complex64::new(x, 0.0)));
    fa.resize(size, Complex64::new(0.0, 0.0));
    let mut fb: Vec<Complex64> = Vec::with_capacity(size);
    fb.extend(b.iter().map(|&x| Complex64::new(x, 0.0)));
    fb.resize(size, Complex64::new(0.0, 0.0));
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut fa);
    fft.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    drop(fb);
    let ifft = planner.plan_fft_inverse(size);
    ifft.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa.truncate(out_len);
    fa.iter().map(|z| z.re * scale).collect()
}

/// `sum_{|k| > cutoff} majorant(k/q)` for the window transform, used in the
/// documented truncation bounds (integral comparison plus one boundary
/// term).
pub fn phi_hat_tail_sum(q: f64, cutoff: f64) -> f64 {
    if cutoff <= 4.0 * q {
        // majorant is capped at 1 below 4q; fall back to a crude cap
        return 2.0 * (4.0 * q - cutoff).max(0.0) + phi_hat_tail_sum(q, 4.0 * q);
    }
    let u0 = cutoff / q;
    // integral of the majorant over [u0, inf) by the substitution u = 1/w
    let steps = 2048;
    let h = (1.0 / u0) / steps as f64;
    let mut integral = 0.0;
    for i in 0..steps {
        let w = (i as f64 + 0.5) * h;
        let u = 1.0 / w;
        integral += aux_phi_hat_majorant(u) * u * u;
    }
    integral *= h;
    2.0 * (q * integral + aux_phi_hat_majorant(u0))
}

/// Product coefficients over levels 0..=n with a documented absolute
/// truncation bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoeffSequence {
    pub tag: String,
    pub k_max: i64,
    /// values[i] is the coefficient at k = i - k_max
    pub values: Vec<f64>,
    /// Absolute bound on the truncation error of every entry.
    pub truncation_bound: f64,
}

impl CoeffSequence {
    pub fn get(&self, k: i64) -> f64 {
        let idx = k + self.k_max;
        assert!(
            (0..self.values.len() as i64).contains(&idx),
            "k = {k} outside +-{}",
            self.k_max
        );
        self.values[idx as usize]
    }

    pub fn min_value(&self) -> (i64, f64) {
        let mut best = (0i64, f64::INFINITY);
        for (i, &v) in self.values.iter().enumerate() {
            if v < best.1 {
                best = (i as i64 - self.k_max, v);
            }
        }
        best
    }
}

/// Dense product of factor coefficient sequences,
/// `levels = n` meaning levels 0 (window) through n.
///
/// Level 0 is truncated at `KERNEL0_RADIUS` (l1 tail < 1e-9); every other
/// factor with `q_i` below the last level is carried on a padded range
/// `pad`, whose neglected contribution is bounded through the quartic
/// majorant and reported in `truncation_bound`. For the target variant all
/// terms are nonnegative, so values are also honest lower bounds.
pub fn product_coeffs(
    params: &KaufmanParams,
    variant: Variant,
    levels: usize,
    k_out: i64,
    pad: Option<i64>,
) -> Result<CoeffSequence> {
    if levels > params.levels() {
        return Err(Error::BadParameter(format!(
            "levels {levels} exceeds schedule length {}",
            params.levels()
        )));
    }
    if k_out < 16 {
        return Err(Error::BadParameter("k_out too small".into()));
    }
    let tag = format!("{:?}-n{}", variant, levels);
    let tail0 = phi_hat_tail_sum(2.0, KERNEL0_RADIUS as f64);
    if levels == 0 {
        return Ok(CoeffSequence {
            tag,
            k_max: k_out,
            values: kernel0(k_out),
            truncation_bound: 0.0,
        });
    }
    if levels == 1 {
        let lvl1 = build_level_coeffs(params, 1, variant, k_out + KERNEL0_RADIUS);
        let full = conv_fft(&kernel0(KERNEL0_RADIUS), &lvl1);
        let full_k_max = k_out + 2 * KERNEL0_RADIUS;
        let values = slice_center(&full, full_k_max, k_out);
        // |F_1| <= 1 entrywise, so dropping the kernel tail costs at most
        // its l1 mass; FFT roundoff is far below it
        return Ok(CoeffSequence {
            tag,
            k_max: k_out,
            values,
            truncation_bound: tail0 + 1e-10,
        });
    }
    if levels != 2 {
        return Err(Error::TruncationBudget {
            k_out,
            why: "only truncations with up to two periodized levels are supported at desk scale"
                .into(),
        });
    }
    // two periodized levels: W = kernel0 * F_1 carried on a padded range,
    // then G = W * F_2 read at +-k_out
    let pad = pad.unwrap_or(1 << 21);
    const PAD_CAP: i64 = 1 << 22;
    if pad > PAD_CAP {
        return Err(Error::TruncationBudget {
            k_out,
            why: format!("pad {pad} exceeds the memory cap {PAD_CAP}"),
        });
    }
    let q1 = params.q[0];
    let lvl1 = build_level_coeffs(params, 1, variant, pad);
    let w_full = conv_fft(&kernel0(KERNEL0_RADIUS), &lvl1);
    let w_k_max = pad + KERNEL0_RADIUS;
    let w = slice_center(&w_full, w_k_max, pad);
    drop(w_full);
    let lvl2 = build_level_coeffs(params, 2, variant, pad + k_out);
    let g_full = conv_fft(&w, &lvl2);
    let g_k_max = pad + (pad + k_out);
    let values = slice_center(&g_full, g_k_max, k_out);
    drop(g_full);
    // truncation bound: kernel tail, the W tail beyond the pad radius paired
    // with the worst off-zero second-level coefficient, and FFT roundoff
    let l1_kernel: f64 = kernel0(KERNEL0_RADIUS).iter().sum();
    let max_offzero = {
        let n2 = params.p_nu[1].len().min(params.p_mu[1].len()) as f64;
        // at most 15 distinct primes can divide any i64
        16.0 / n2
    };
    let w_tail = l1_kernel * phi_hat_tail_sum(q1, (pad - KERNEL0_RADIUS) as f64) * max_offzero;
    let bound = tail0 + w_tail + 1e-9;
    Ok(CoeffSequence {
        tag,
        k_max: k_out,
        values,
        truncation_bound: bound,
    })
}

fn slice_center(full: &[f64], full_k_max: i64, k_out: i64) -> Vec<f64> {
    let lo = (full_k_max - k_out) as usize;
    let hi = (full_k_max + k_out) as usize;
    full[lo..=hi].to_vec()
}

/// Pointwise value of one periodized factor.
pub fn factor_value(params: &KaufmanParams, level: usize, variant: Variant, x: f64) -> f64 {
    let q = params.q[level - 1];
    let (set, unit_weighting): (&[u64], bool) = match variant {
        Variant::Mu => (&params.p_mu[level - 1], false),
        Variant::Nu => (&params.p_nu[level - 1], true),
    };
    let mut acc = 0.0;
    for &p in set {
        let pf = p as f64;
        let v = (pf * x).round();
        let t = q * (x - v / pf);
        if t.abs() < 1.0 {
            if unit_weighting {
                // auxiliary variant: translates on the integers are removed
                let vi = v as i64;
                if vi.rem_euclid(p as i64) == 0 {
                    continue;
                }
                acc += pf / (pf - 1.0) * q / pf * aux_phi(t);
            } else {
                acc += q / pf * aux_phi(t);
            }
        }
    }
    acc / set.len() as f64
}

/// Pointwise truncated density `2 phi(2x) * prod_{i<=n} F_i(x)`.
pub fn density_value(params: &KaufmanParams, variant: Variant, levels: usize, x: f64) -> f64 {
    let mut acc = 2.0 * aux_phi(2.0 * x);
    for i in 1..=levels {
        if acc == 0.0 {
            return 0.0;
        }
        acc *= factor_value(params, i, variant, x);
    }
    acc
}

/// Structured transform evaluator at arbitrary real frequency: the level-n
/// bumps are collapsed to point contributions `amp * e^{-2 pi i xi c}`
/// weighted by the cached lower-level window value at each bump center,
/// times the closed-form bump transform `phi_hat(xi/q_n)`.
///
/// The neglected window variation across one bump is O(q_{n-1}/q_n)
/// relative, far below profile tolerances.
#[derive(Debug, Clone)]
pub struct DensityEvaluator {
    centers: Vec<f64>,
    amps: Vec<f64>,
    q_n: f64,
    /// total |amp| for error reporting
    pub l1_amps: f64,
}

impl DensityEvaluator {
    pub fn new(params: &KaufmanParams, variant: Variant, levels: usize) -> Result<Self> {
        if levels == 0 || levels > params.levels() {
            return Err(Error::BadParameter(format!(
                "levels must be in 1..={}",
                params.levels()
            )));
        }
        let q = params.q[levels - 1];
        let (set, is_nu): (&[u64], bool) = match variant {
            Variant::Mu => (&params.p_mu[levels - 1], false),
            Variant::Nu => (&params.p_nu[levels - 1], true),
        };
        let denom = set.len() as f64;
        let mut centers = Vec::new();
        let mut amps = Vec::new();
        let margin = 1.0 / q;
        for &p in set {
            let pf = p as f64;
            let v_lo = (-(0.5 + margin) * pf).ceil() as i64;
            let v_hi = ((0.5 + margin) * pf).floor() as i64;
            for v in v_lo..=v_hi {
                if is_nu && v.rem_euclid(p as i64) == 0 {
                    continue;
                }
                let c = v as f64 / pf;
                // window value: everything below the top level
                let w = density_value(params, variant, levels - 1, c);
                if w == 0.0 {
                    continue;
                }
                let amp = if is_nu {
                    w / (denom * (pf - 1.0))
                } else {
                    w / (denom * pf)
                };
                centers.push(c);
                amps.push(amp);
            }
        }
        let l1_amps = amps.iter().map(|a| a.abs()).sum();
        Ok(DensityEvaluator {
            centers,
            amps,
            q_n: q,
            l1_amps,
        })
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for (&c, &a) in self.centers.iter().zip(&self.amps) {
            let (s, co) = (-2.0 * PI * xi * c).sin_cos();
            re += a * co;
            im += a * s;
        }
        Complex64::new(re, im) * aux_phi_hat(xi / self.q_n)
    }

    pub fn bump_count(&self) -> usize {
        self.centers.len()
    }
}

/// Independent density-domain transform: integrates the explicit truncated
/// density bump by bump with composite Simpson panels (512 intervals per
/// bump), valid for one periodized level.
pub fn density_transform_oracle(
    params: &KaufmanParams,
    variant: Variant,
    k: f64,
) -> Result<Complex64> {
    let q = params.q[0];
    if k.abs() > q {
        return Err(Error::BadParameter(format!(
            "oracle restricted to |k| <= q_1 = {q}"
        )));
    }
    let (set, is_nu): (&[u64], bool) = match variant {
        Variant::Mu => (&params.p_mu[0], false),
        Variant::Nu => (&params.p_nu[0], true),
    };
    let denom = set.len() as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for &p in set {
        let pf = p as f64;
        let v_lo = (-(0.5 + 1.0 / q) * pf).ceil() as i64;
        let v_hi = ((0.5 + 1.0 / q) * pf).floor() as i64;
        for v in v_lo..=v_hi {
            if is_nu && v.rem_euclid(p as i64) == 0 {
                continue;
            }
            let c = v as f64 / pf;
            let weight = if is_nu { pf / (pf - 1.0) } else { 1.0 };
            let lo = c - 1.0 / q;
            let hi = c + 1.0 / q;
            // Simpson over the bump support
            let n = 512usize;
            let h = (hi - lo) / n as f64;
            let f = |x: f64| -> Complex64 {
                let val = 2.0 * aux_phi(2.0 * x) * q / pf * aux_phi(q * (x - c));
                Complex64::from_polar(val, -2.0 * PI * k * x)
            };
            let mut sum = f(lo) + f(hi);
            for i in 1..n {
                let x = lo + i as f64 * h;
                sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc += sum * (h / 3.0) * weight / denom;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn desk_params() -> KaufmanParams {
        KaufmanParams::new(1.0, vec![1e4, 1e7], None).unwrap()
    }

    #[test]
    fn mu_coeff_values() {
        let p = desk_params();
        assert_eq!(coeff_f(&p, 1, Variant::Mu, 0), 1.0);
        // k = 6: divisors in P_mu are {1, 2, 3}
        let expect = 3.0 / 16.0 * aux_phi_hat(6.0 / 1e4);
        assert!((coeff_f(&p, 1, Variant::Mu, 6) - expect).abs() < 1e-15);
        // strictly positive for any k
        for k in [1i64, 49, 97, 1000, 123_456] {
            assert!(coeff_f(&p, 1, Variant::Mu, k) > 0.0);
        }
    }

    #[test]
    fn nu_coeff_sign_structure() {
        let p = desk_params();
        assert_eq!(coeff_f(&p, 1, Variant::Nu, 0), 1.0);
        // k divisible by no window prime is negative
        let k = 97; // prime above the window top 50
        assert!(coeff_f(&p, 1, Variant::Nu, k) < 0.0);
        // k divisible by two window primes is positive
        let (p1, p2) = (p.p_nu[0][0], p.p_nu[0][1]);
        let k2 = (p1 * p2) as i64;
        assert!(coeff_f(&p, 1, Variant::Nu, k2) > 0.0);
    }

    #[test]
    fn dense_matches_formula() {
        let p = desk_params();
        for variant in [Variant::Mu, Variant::Nu] {
            let dense = build_level_coeffs(&p, 1, variant, 500);
            for k in -500i64..=500 {
                let d = dense[(k + 500) as usize];
                let f = coeff_f(&p, 1, variant, k);
                assert!((d - f).abs() < 1e-14, "{variant:?} k={k}: {d} vs {f}");
            }
        }
    }

    #[test]
    fn conv_fft_matches_direct() {
        let a = vec![1.0, 2.0, -0.5, 0.25, 3.0];
        let b = vec![0.5, -1.0, 2.0];
        let got = conv_fft(&a, &b);
        let mut want = vec![0.0; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                want[i + j] += x * y;
            }
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn product_level0_is_window() {
        let p = desk_params();
        let seq = product_coeffs(&p, Variant::Mu, 0, 64, None).unwrap();
        assert_eq!(seq.get(0), aux_phi_hat(0.0));
        assert!((seq.get(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_level1_positive_and_matches_oracle() {
        let p = desk_params();
        let seq = product_coeffs(&p, Variant::Mu, 1, 2048, None).unwrap();
        let (k_min, v_min) = seq.min_value();
        assert!(v_min > 0.0, "min {v_min} at {k_min}");
        // density-domain quadrature agreement at a spread of frequencies
        for &k in &[0i64, 1, 7, 30, 97, 210, 1024, 2003] {
            let coeff = seq.get(k);
            let oracle = density_transform_oracle(&p, Variant::Mu, k as f64).unwrap();
            assert!(
                (coeff - oracle.re).abs() < 1e-6 && oracle.im.abs() < 1e-6,
                "k={k}: {coeff} vs {oracle}"
            );
        }
    }

    #[test]
    fn tail_sum_is_small_for_kernel() {
        let t = phi_hat_tail_sum(2.0, KERNEL0_RADIUS as f64);
        assert!(t < 1e-9, "kernel tail {t}");
        assert!(t > 0.0);
    }

    #[test]
    fn evaluator_agrees_with_coefficients_at_integers() {
        let p = desk_params();
        let seq = product_coeffs(&p, Variant::Mu, 1, 512, None).unwrap();
        let ev = DensityEvaluator::new(&p, Variant::Mu, 1).unwrap();
        for &k in &[1i64, 5, 42, 100, 333, 512] {
            let a = seq.get(k);
            let b = ev.eval(k as f64).re;
            // the evaluator freezes the window across each bump; agreement
            // is at the documented O(q_0/q_1) relative level
            assert!(
                (a - b).abs() < 2e-3 * a.abs().max(1.0),
                "k={k}: {a} vs {b}"
            );
        }
    }
}
