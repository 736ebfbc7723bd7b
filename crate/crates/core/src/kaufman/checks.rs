//! Quantitative audits of the periodized construction: coefficient
//! stability under one factor, ball-mass control of the auxiliary measure,
//! the two density/frequency comparison inequalities, and the divisor
//! bound behind the auxiliary coefficients.

use serde::{Deserialize, Serialize};

use super::coeffs::{
    build_level_coeffs, coeff_f, conv_fft, density_value, factor_value, kernel0, product_coeffs,
    Variant, KERNEL0_RADIUS,
};
use super::primes::KaufmanParams;
use crate::bump::aux_phi;
use crate::error::{Error, Result};
use crate::rng::SeedTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub level: usize,
    pub k_max: i64,
    /// max over k of |(psi F_i)^(k) - psi_hat(k)| / rhs(k) with
    /// rhs = q^{-s/2} ln^2 q below q and |k|^{-s/2} ln^2 |k| above.
    pub implied_constant: f64,
    pub witness_k: i64,
}

/// Stability of one factor against the running product `psi` of all lower
/// levels (for level 1, psi is the fixed window `2 phi(2x)`).
pub fn stability_check(
    params: &KaufmanParams,
    level: usize,
    k_max: i64,
) -> Result<StabilityReport> {
    if level < 1 || level > params.levels() {
        return Err(Error::BadParameter("level out of range".into()));
    }
    let q = params.q[level - 1];
    let s = params.s;
    // psi_hat: product of levels 0..level-1, padded so the convolution with
    // the new factor is exact on the reported range
    let psi = product_coeffs(params, Variant::Mu, level - 1, k_max + KERNEL0_RADIUS, None)?;
    let psi_k_max = psi.k_max;
    let lvl = build_level_coeffs(params, level, Variant::Mu, k_max + psi_k_max);
    let full = conv_fft(&psi.values, &lvl);
    let full_k_max = psi_k_max + (k_max + psi_k_max);
    let mut worst = 0.0f64;
    let mut witness = 0i64;
    for k in -k_max..=k_max {
        let combined = full[(k + full_k_max) as usize];
        let base = psi.get(k);
        let diff = (combined - base).abs();
        let rhs = if (k.unsigned_abs() as f64) <= q {
            q.powf(-s / 2.0) * q.ln().powi(2)
        } else {
            let ka = k.unsigned_abs() as f64;
            ka.powf(-s / 2.0) * ka.ln().powi(2)
        };
        let c = diff / rhs;
        if c > worst {
            worst = c;
            witness = k;
        }
    }
    Ok(StabilityReport {
        level,
        k_max,
        implied_constant: worst,
        witness_k: witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub levels: usize,
    pub grid_points: usize,
    /// sup over x of the auxiliary ball mass at radius 1/q_n.
    pub sup_ball_mass: f64,
    /// `q_n^{-s} ln q_n * prod_{i<n} (q_i^{1-s} ln q_i) * prod h(i)`.
    pub bound_shape: f64,
    pub implied_constant: f64,
    /// Grid max of the top factor against the closed-form single-bump peak.
    pub factor_sup_grid: f64,
    pub factor_sup_predicted: f64,
    /// Exact minimum of |m/p - m'/p'| over distinct admissible fractions,
    /// and the separation the construction requires.
    pub separation_min: f64,
    pub separation_required: f64,
    pub separation_ok: bool,
}

/// Ball-mass audit of the auxiliary truncation: integrates the explicit
/// density over every radius-`1/q_n` ball on a grid much finer than the
/// bump scale, and re-derives the factor sup from bump disjointness.
pub fn frostman_nu(
    params: &KaufmanParams,
    levels: usize,
    samples_per_ball: usize,
) -> Result<FrostmanReport> {
    if levels < 1 || levels > params.levels() {
        return Err(Error::BadParameter("levels out of range".into()));
    }
    if samples_per_ball < 64 {
        return Err(Error::GridTooCoarse(format!(
            "need >= 64 samples per ball, got {samples_per_ball}"
        )));
    }
    let q_n = params.q[levels - 1];
    let n_grid = (q_n * samples_per_ball as f64 / 2.0).ceil() as usize;
    if n_grid > 200_000_000 {
        return Err(Error::GridTooCoarse(format!(
            "grid of {n_grid} points exceeds the desk budget; lower the level"
        )));
    }
    let h = 1.0 / n_grid as f64;
    // prefix sums of the density over [-1/2, 1/2]
    let mut prefix = Vec::with_capacity(n_grid + 1);
    prefix.push(0.0f64);
    let mut acc = 0.0f64;
    for i in 0..n_grid {
        let x = -0.5 + (i as f64 + 0.5) * h;
        acc += density_value(params, Variant::Nu, levels, x) * h;
        prefix.push(acc);
    }
    let radius = 1.0 / q_n;
    let window = (2.0 * radius / h).ceil() as usize;
    let mut sup_ball = 0.0f64;
    for lo in 0..n_grid {
        let hi = (lo + window).min(n_grid);
        let mass = prefix[hi] - prefix[lo];
        if mass > sup_ball {
            sup_ball = mass;
        }
    }
    let s = params.s;
    let mut bound_shape = q_n.powf(-s) * q_n.ln();
    for i in 0..levels - 1 {
        bound_shape *= params.q[i].powf(1.0 - s) * params.q[i].ln();
    }
    for i in 0..levels {
        bound_shape *= params.h[i];
    }

    // factor sup: disjoint translated bumps make the max a single term,
    // attained at the smallest window prime
    let set = &params.p_nu[levels - 1];
    let p_min = *set.iter().min().unwrap() as f64;
    let predicted = q_n * aux_phi(0.0) / ((p_min - 1.0) * set.len() as f64);
    let mut grid_sup = 0.0f64;
    let m = 1 << 16;
    for i in 0..=m {
        let x = -0.5 + i as f64 / m as f64;
        let v = factor_value(params, levels, Variant::Nu, x);
        if v > grid_sup {
            grid_sup = v;
        }
    }
    // the coarse sweep brackets a peak; refine around the best center
    let best_center = 1.0 / p_min; // first admissible translate of p_min
    for i in 0..=256 {
        let x = best_center + (i as f64 - 128.0) / (128.0 * q_n);
        let v = factor_value(params, levels, Variant::Nu, x);
        if v > grid_sup {
            grid_sup = v;
        }
    }

    // separation of admissible fractions, exact in integer arithmetic
    let q_i = params.q[levels - 1];
    let required = 4.0 * q_i.powf(-s);
    let mut sep_min = f64::INFINITY;
    for (ia, &p) in set.iter().enumerate() {
        for &p2 in &set[ia..] {
            let (p, p2) = (p as i64, p2 as i64);
            for m1 in -(p)..=p {
                if m1.rem_euclid(p) == 0 {
                    continue;
                }
                for m2 in -(p2)..=p2 {
                    if m2.rem_euclid(p2) == 0 {
                        continue;
                    }
                    if p == p2 && m1 == m2 {
                        continue;
                    }
                    let num = (m1 * p2 - m2 * p).abs();
                    if num == 0 {
                        sep_min = 0.0;
                        continue;
                    }
                    let gap = num as f64 / (p as f64 * p2 as f64);
                    if gap < sep_min {
                        sep_min = gap;
                    }
                }
            }
        }
    }
    Ok(FrostmanReport {
        levels,
        grid_points: n_grid,
        sup_ball_mass: sup_ball,
        bound_shape,
        implied_constant: sup_ball / bound_shape,
        factor_sup_grid: grid_sup,
        factor_sup_predicted: predicted,
        separation_min: sep_min,
        separation_required: required,
        separation_ok: sep_min > required,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonAReport {
    pub level: usize,
    pub factor: f64,
    pub grid_points: usize,
    /// min over grid points with positive auxiliary value of
    /// `factor * F_mu / F_nu` (>= 1 when the inequality holds).
    pub min_slack: f64,
}

/// Pointwise density comparison `F_nu <= factor * F_mu` on a uniform grid.
/// A violation is a hard error: the inequality is exact.
pub fn comparison_pointwise(
    params: &KaufmanParams,
    level: usize,
    grid_points: usize,
) -> Result<ComparisonAReport> {
    let factor = params.comparison_factor(level);
    let mut min_slack = f64::INFINITY;
    for i in 0..=grid_points {
        let x = -0.5 + i as f64 / grid_points as f64;
        let nu = factor_value(params, level, Variant::Nu, x);
        if nu <= 0.0 {
            continue;
        }
        let mu = factor_value(params, level, Variant::Mu, x);
        let rhs = factor * mu;
        if nu > rhs * (1.0 + 1e-12) {
            return Err(Error::ComparisonViolation {
                x,
                lhs: nu,
                rhs,
            });
        }
        let slack = rhs / nu;
        if slack < min_slack {
            min_slack = slack;
        }
    }
    Ok(ComparisonAReport {
        level,
        factor,
        grid_points,
        min_slack,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonBReport {
    pub levels: usize,
    pub samples: usize,
    /// max over sampled (k, l) of |nu_hat(k+l)| / (mu_hat(k) + (1+|k|)^-0.9).
    pub c_combined: f64,
    /// max of |nu_hat(k+l)| / mu_hat(k) alone.
    pub c_mu: f64,
    /// max of |nu_hat(k+l)| (1+|k|)^{0.9} alone.
    pub c_eps: f64,
    pub witness: (i64, i64),
}

/// Sampled frequency comparison `|nu_hat(k+l)| <= C mu_hat(k) + C_eps (1+|k|)^{-0.9}`
/// over |k| > 2 q_n, |l| < q_n / 2, with q_n the top built level.
pub fn comparison_frequency(
    params: &KaufmanParams,
    levels: usize,
    n_samples: usize,
    k_hi: i64,
    seed: u64,
) -> Result<ComparisonBReport> {
    if levels != 1 {
        return Err(Error::BadParameter(
            "frequency comparison is run against the first periodized level at desk scale".into(),
        ));
    }
    let q_n = params.q[levels - 1];
    let k_lo = (2.0 * q_n).ceil() as i64 + 1;
    if k_hi <= k_lo {
        return Err(Error::BadParameter(format!(
            "k_hi must exceed 2 q_n = {}",
            2.0 * q_n
        )));
    }
    let l_max = (q_n / 2.0).floor() as i64 - 1;
    let k_out = k_hi + l_max + 1;
    let mu = product_coeffs(params, Variant::Mu, levels, k_out, None)?;
    let nu = product_coeffs(params, Variant::Nu, levels, k_out, None)?;
    let mut rng = SeedTree::new(seed).child("comparison-b").rng();
    let mut c_combined = 0.0f64;
    let mut c_mu = 0.0f64;
    let mut c_eps = 0.0f64;
    let mut witness = (0i64, 0i64);
    for _ in 0..n_samples {
        let k = k_lo + (rand::Rng::gen_range(&mut rng, 0..(k_hi - k_lo + 1)));
        let k = if rand::Rng::gen_bool(&mut rng, 0.5) { k } else { -k };
        let l = rand::Rng::gen_range(&mut rng, -l_max..=l_max);
        let nu_val = nu.get(k + l).abs();
        let mu_val = mu.get(k);
        let err_shape = (1.0 + k.abs() as f64).powf(-0.9);
        let combined = nu_val / (mu_val + err_shape);
        if combined > c_combined {
            c_combined = combined;
            witness = (k, l);
        }
        c_mu = c_mu.max(nu_val / mu_val);
        c_eps = c_eps.max(nu_val / err_shape);
    }
    Ok(ComparisonBReport {
        levels,
        samples: n_samples,
        c_combined,
        c_mu,
        c_eps,
        witness,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivisorBoundReport {
    pub level: usize,
    pub sampled: usize,
    /// max over sampled k of |count - missing| / (ln k / ln Q + #P / Q).
    pub implied_constant: f64,
    pub witness_k: i64,
}

/// Divisor bound behind the auxiliary coefficients: for the window primes,
/// `|#{p | k} - sum_{p not| k} 1/(p-1)|` is controlled by
/// `ln k / ln Q + #P/Q` with `Q = q^{s/2}/h`.
pub fn divisor_bound_check(
    params: &KaufmanParams,
    level: usize,
    k_hi: i64,
    n_samples: usize,
    seed: u64,
) -> DivisorBoundReport {
    let set = &params.p_nu[level - 1];
    let q_ratio = params.q[level - 1].powf(params.s / 2.0) / params.h[level - 1];
    let mut rng = SeedTree::new(seed).child("divisor").rng();
    let mut worst = 0.0f64;
    let mut witness = 2i64;
    for _ in 0..n_samples {
        let k = rand::Rng::gen_range(&mut rng, 2..=k_hi);
        let ka = k as u64;
        let mut count = 0.0;
        let mut missing = 0.0;
        for &p in set {
            if ka % p == 0 {
                count += 1.0;
            } else {
                missing += 1.0 / (p as f64 - 1.0);
            }
        }
        let lhs = (count - missing).abs();
        let rhs = (k as f64).ln() / q_ratio.ln() + set.len() as f64 / q_ratio;
        let c = lhs / rhs;
        if c > worst {
            worst = c;
            witness = k;
        }
    }
    DivisorBoundReport {
        level,
        sampled: n_samples,
        implied_constant: worst,
        witness_k: witness,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub levels: usize,
    pub k_out: i64,
    pub all_positive: bool,
    pub min_value: f64,
    pub min_k: i64,
    pub truncation_bound: f64,
}

/// Positivity of every target-variant product coefficient up to `k_out`.
/// Computed sums are term-by-term nonnegative lower bounds of the true
/// coefficients, so a positive verdict is rigorous.
pub fn positivity_check(
    params: &KaufmanParams,
    levels: usize,
    k_out: i64,
    pad: Option<i64>,
) -> Result<PositivityReport> {
    let seq = product_coeffs(params, Variant::Mu, levels, k_out, pad)?;
    let (min_k, min_value) = seq.min_value();
    Ok(PositivityReport {
        levels,
        k_out,
        all_positive: min_value > 0.0,
        min_value,
        min_k,
        truncation_bound: seq.truncation_bound,
    })
}

/// psi = constant 1: one factor leaves the zero coefficient untouched.
pub fn stability_trivial_identity(params: &KaufmanParams, level: usize) -> f64 {
    (coeff_f(params, level, Variant::Mu, 0) - 1.0).abs()
}

/// Convenience: l1 mass of the window kernel (used in documentation of the
/// truncation bounds and in tests).
pub fn kernel0_l1() -> f64 {
    kernel0(KERNEL0_RADIUS).iter().sum()
}
