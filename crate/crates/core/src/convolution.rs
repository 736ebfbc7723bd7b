//! Infinite-convolution Cantor measure with unequal weights.
//!
//! Level k places `d_k = k+1` atoms at scaled positions inside the unit
//! interval, with gaps confined to `(L_k, 1/d_k)` where `L_k = d_k^{-1/s}`,
//! and weights that raise one branch and lower another by the factor
//! `1 -/+ 1/(k+1)`. The max/min weight-product ratio then diverges like
//! `(N+1)(N+2)/2` while the transform keeps near-optimal decay; the measure
//! is also almost Ahlfors regular, which `ahlfors_check` audits level by
//! level.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{AtomicMeasure, ProductMeasure};
use crate::rng::SeedTree;

/// Separation lower-bound constant: accepted point sets must satisfy
/// `a_r_min(points, r_k) >= (C r_k)^{-2 d_k}`.
pub const SEPARATION_C: f64 = 4.0;

/// Default retry cap for rejection sampling of level point sets.
pub const DEFAULT_RETRY_CAP: u64 = 10_000;

/// Parameters of one construction level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalemLevelParams {
    pub k: u32,
    pub d_k: u32,
    pub r_k: f64,
    /// Cap on contraction: L_k = d_k^{-1/s}.
    pub l_cap: f64,
    pub t_k: f64,
    /// Realized contraction l_k = (1 - (k+1)^-2) L_k + t_k L_k (k+1)^-2.
    pub l_k: f64,
    /// Strictly increasing points in (0,1).
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    /// Achieved separation minimum for the accepted point set.
    pub a_r_min: f64,
}

/// Per-level weights: `p_1 = (1 - 1/(k+1))/d_k`, `p_2 = (1 + 1/(k+1))/d_k`,
/// `p_j = 1/d_k` for j >= 3.
pub fn weights(k: u32) -> Vec<f64> {
    let d = (k + 1) as f64;
    let bump = 1.0 / (k as f64 + 1.0);
    let mut w = vec![1.0 / d; k as usize + 1];
    w[0] = (1.0 - bump) / d;
    w[1] = (1.0 + bump) / d;
    w
}

/// Cumulative max/min weight-product ratios for levels 1..=n_max.
/// Carried as an exactly reduced rational, so entry N equals
/// `(N+1)(N+2)/2` with no rounding.
pub fn ratio_sequence(n_max: u32) -> Vec<f64> {
    fn gcd(mut a: u128, mut b: u128) -> u128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    let mut out = Vec::with_capacity(n_max as usize);
    for k in 1..=n_max as u128 {
        num *= k + 2;
        den *= k;
        let g = gcd(num, den);
        num /= g;
        den /= g;
        out.push(num as f64 / den as f64);
    }
    out
}

/// Exact minimum of |sum_j m_j x_j| over integer vectors m != 0 with
/// |m_j| <= floor(2r) and sum_j m_j = 0.
pub fn a_r_min(points: &[f64], r: f64) -> Result<f64> {
    let d = points.len();
    if d < 2 {
        return Err(Error::BadParameter("need at least 2 points".into()));
    }
    let m_cap = (2.0 * r).floor() as i64;
    let base = (2 * m_cap + 1) as u128;
    let mut candidates: u128 = 1;
    for _ in 0..d {
        candidates = candidates.saturating_mul(base);
        if candidates > 100_000_000 {
            return Err(Error::EnumerationBudget {
                candidates,
                cap: 100_000_000,
            });
        }
    }
    let mut best = f64::INFINITY;
    let mut m = vec![-m_cap; d];
    loop {
        let sum_m: i64 = m.iter().sum();
        if sum_m == 0 && m.iter().any(|&v| v != 0) {
            let s: f64 = m
                .iter()
                .zip(points)
                .map(|(&mj, &xj)| mj as f64 * xj)
                .sum();
            let a = s.abs();
            if a < best {
                best = a;
            }
        }
        // odometer increment
        let mut i = 0;
        loop {
            if i == d {
                return Ok(best);
            }
            m[i] += 1;
            if m[i] <= m_cap {
                break;
            }
            m[i] = -m_cap;
            i += 1;
        }
    }
}

/// Draws a point set for level k satisfying the gap constraints and the
/// separation threshold, by rejection. On cap exhaustion the error carries
/// the best separation seen.
pub fn sample_points(k: u32, s: f64, rng: &mut ChaCha8Rng, retry_cap: u64) -> Result<(Vec<f64>, f64)> {
    let d = k as usize + 1;
    let dk = d as f64;
    let l_cap = dk.powf(-1.0 / s);
    if !(l_cap < 1.0 / dk) {
        return Err(Error::BadParameter(format!(
            "level {k}: L_k = {l_cap} must be < 1/d_k = {}; requires s < 1",
            1.0 / dk
        )));
    }
    let r_k = level_r(k);
    let threshold = (SEPARATION_C * r_k).powi(-2 * d as i32);
    let mut best = 0.0f64;
    for _ in 0..retry_cap {
        let mut pts = Vec::with_capacity(d);
        let x1 = rng.gen::<f64>() * (1.0 / dk - l_cap);
        pts.push(x1);
        for _ in 1..d {
            let gap = l_cap + rng.gen::<f64>() * (1.0 / dk - l_cap);
            pts.push(pts.last().unwrap() + gap);
        }
        debug_assert!(*pts.last().unwrap() < 1.0 - l_cap);
        let a = a_r_min(&pts, r_k)?;
        if a >= threshold {
            return Ok((pts, a));
        }
        if a > best {
            best = a;
        }
    }
    Err(Error::RetryCapExceeded {
        cap: retry_cap,
        best,
    })
}

/// `r_k = max(1, sqrt(ln k))`; the floor keeps the moment order usable at
/// the first level.
pub fn level_r(k: u32) -> f64 {
    (k as f64).ln().sqrt().max(1.0)
}

/// A built truncation: per-level parameters plus the product measure.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvolutionBuild {
    pub s: f64,
    pub levels: Vec<SalemLevelParams>,
    pub product: ProductMeasure,
}

/// Builds the K-level truncation. `t` supplies the contraction dials in
/// [0,1] (one per level); when absent they are drawn i.i.d. uniform from the
/// seeded stream, which is the generic instance.
pub fn build(s: f64, levels: u32, t: Option<&[f64]>, seed: u64) -> Result<ConvolutionBuild> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::BadParameter(format!(
            "convolution build needs s in (0,1), got {s}"
        )));
    }
    if levels == 0 || levels > 12 {
        return Err(Error::BadParameter(format!(
            "levels must be in 1..=12, got {levels}"
        )));
    }
    if let Some(tv) = t {
        if tv.len() != levels as usize {
            return Err(Error::BadParameter(format!(
                "t vector has {} entries for {} levels",
                tv.len(),
                levels
            )));
        }
        if tv.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
            return Err(Error::BadParameter("t entries must lie in [0,1]".into()));
        }
    }
    let tree = SeedTree::new(seed).child("convolution");
    let mut level_params = Vec::with_capacity(levels as usize);
    let mut factors = Vec::with_capacity(levels as usize);
    let mut l_prod = 1.0f64;
    for k in 1..=levels {
        let mut rng = tree.child("points").child_u(k as u64).rng();
        let (points, ar) = sample_points(k, s, &mut rng, DEFAULT_RETRY_CAP)?;
        let t_k = match t {
            Some(tv) => tv[k as usize - 1],
            None => tree.child("t").child_u(k as u64).rng().gen::<f64>(),
        };
        let d = k as f64 + 1.0;
        let l_cap = d.powf(-1.0 / s);
        let damp = 1.0 / (d * d);
        let l_k = (1.0 - damp) * l_cap + t_k * l_cap * damp;
        let w = weights(k);
        let atoms: Vec<(f64, f64)> = points
            .iter()
            .zip(&w)
            .map(|(&x, &p)| (l_prod * x, p))
            .collect();
        factors.push(AtomicMeasure::new(atoms)?);
        level_params.push(SalemLevelParams {
            k,
            d_k: k + 1,
            r_k: level_r(k),
            l_cap,
            t_k,
            l_k,
            points,
            weights: w,
            a_r_min: ar,
        });
        l_prod *= l_k;
    }
    let product = ProductMeasure::new(factors)?;
    Ok(ConvolutionBuild {
        s,
        levels: level_params,
        product,
    })
}

/// One audited interval of the level-n net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhlforsWitness {
    pub level: u32,
    pub index_path: Vec<u32>,
    pub mass: f64,
    pub r_pow_s: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AhlforsReport {
    pub passed: bool,
    /// Worst of mass/upper and lower/mass over every audited interval.
    pub worst_ratio: f64,
    pub intervals_checked: u64,
    pub violation: Option<AhlforsWitness>,
}

/// Verifies the two-sided n-interval bounds
/// `(n+1)^-1 r^s <= mass <= (n+1) r^s`, `r = prod_{k<=n} l_k`, at every
/// built level, with relative slack `eps` for the exact-equality corners.
pub fn ahlfors_check(build: &ConvolutionBuild, eps: f64) -> AhlforsReport {
    let mut worst = 0.0f64;
    let mut checked = 0u64;
    let mut violation = None;
    // running products over a depth-first walk of index paths;
    // the level-0 interval (unit interval, mass 1, bounds (1,1)) is trivial
    fn walk(
        levels: &[SalemLevelParams],
        s: f64,
        depth: usize,
        mass: f64,
        path: &mut Vec<u32>,
        r_here: f64,
        eps: f64,
        worst: &mut f64,
        checked: &mut u64,
        violation: &mut Option<AhlforsWitness>,
    ) {
        if depth == 0 {
            return;
        }
        let lvl = &levels[levels.len() - depth];
        let r_next = r_here * lvl.l_k;
        let rs = r_next.powf(s);
        let n = (levels.len() - depth + 1) as f64 + 1.0; // (n+1) with n = level index
        for (j, &w) in lvl.weights.iter().enumerate() {
            let m = mass * w;
            path.push(j as u32);
            *checked += 1;
            let upper = n * rs;
            let lower = rs / n;
            let ratio = (m / upper).max(lower / m);
            if ratio > *worst {
                *worst = ratio;
            }
            if ratio > 1.0 + eps && violation.is_none() {
                *violation = Some(AhlforsWitness {
                    level: lvl.k,
                    index_path: path.clone(),
                    mass: m,
                    r_pow_s: rs,
                    lower_bound: lower,
                    upper_bound: upper,
                });
            }
            walk(
                levels, s, depth - 1, m, path, r_next, eps, worst, checked, violation,
            );
            path.pop();
        }
    }
    let mut path = Vec::new();
    walk(
        &build.levels,
        build.s,
        build.levels.len(),
        1.0,
        &mut path,
        1.0,
        eps,
        &mut worst,
        &mut checked,
        &mut violation,
    );
    AhlforsReport {
        passed: violation.is_none(),
        worst_ratio: worst,
        intervals_checked: checked,
        violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{fourier_atomic, fourier_product};
    use crate::rng::SeedTree;
    use rand::Rng;

    #[test]
    fn weights_small_levels() {
        let w1 = weights(1);
        assert_eq!(w1.len(), 2);
        assert!((w1[0] - 0.25).abs() < 1e-15);
        assert!((w1[1] - 0.75).abs() < 1e-15);
        let w2 = weights(2);
        assert!((w2[0] - 2.0 / 9.0).abs() < 1e-15);
        assert!((w2[1] - 4.0 / 9.0).abs() < 1e-15);
        assert!((w2[2] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_one_up_to_50() {
        for k in 1..=50 {
            let s: f64 = weights(k).iter().sum();
            assert!((s - 1.0).abs() < 1e-15, "k={k}: sum {s}");
        }
    }

    #[test]
    fn ratio_sequence_closed_form() {
        let r = ratio_sequence(50);
        assert_eq!(r[0], 3.0);
        assert_eq!(r[2], 10.0);
        assert_eq!(r[19], 231.0);
        for (i, &v) in r.iter().enumerate() {
            let n = (i + 1) as f64;
            assert_eq!(v, (n + 1.0) * (n + 2.0) / 2.0, "N={}", i + 1);
        }
        // strictly increasing
        for w in r.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn a_r_min_hand_case() {
        let v = a_r_min(&[0.1, 0.35], 1.0).unwrap();
        assert!((v - 0.25).abs() < 1e-15);
        // degenerate duplicate
        let z = a_r_min(&[0.4, 0.4], 1.0).unwrap();
        assert_eq!(z, 0.0);
    }

    // independent enumerator fixing the last coordinate from the zero-sum
    // constraint, looped in the opposite nesting order
    fn a_r_min_oracle(points: &[f64], r: f64) -> f64 {
        let m_cap = (2.0 * r).floor() as i64;
        let mut best = f64::INFINITY;
        fn rec(
            points: &[f64],
            m_cap: i64,
            idx: usize,
            partial_sum_m: i64,
            partial: f64,
            best: &mut f64,
            any_nonzero: bool,
        ) {
            let d = points.len();
            if idx == d - 1 {
                let last = -partial_sum_m;
                if last.abs() <= m_cap && (any_nonzero || last != 0) {
                    let v = (partial + last as f64 * points[d - 1]).abs();
                    if v < *best {
                        *best = v;
                    }
                }
                return;
            }
            for m in (-m_cap..=m_cap).rev() {
                rec(
                    points,
                    m_cap,
                    idx + 1,
                    partial_sum_m + m,
                    partial + m as f64 * points[idx],
                    best,
                    any_nonzero || m != 0,
                );
            }
        }
        rec(points, m_cap, 0, 0, 0.0, &mut best, false);
        best
    }

    #[test]
    fn a_r_min_matches_second_enumerator() {
        let mut rng = SeedTree::new(5).child("armin").rng();
        for _ in 0..20 {
            let pts: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let a = a_r_min(&pts, 1.0).unwrap();
            let b = a_r_min_oracle(&pts, 1.0);
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_points_respects_constraints() {
        let mut rng = SeedTree::new(9).child("pts").rng();
        let (pts, ar) = sample_points(1, 0.5, &mut rng, 1000).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0] > 0.0 && pts[0] < 0.25);
        let gap = pts[1] - pts[0];
        assert!(gap > 0.25 && gap < 0.5);
        assert!(pts[1] < 0.75);
        // post echo: threshold re-checked
        let threshold = (SEPARATION_C * level_r(1)).powi(-4);
        assert!(ar >= threshold);
        assert!((a_r_min(&pts, level_r(1)).unwrap() - ar).abs() < 1e-18);
    }

    #[test]
    fn acceptance_rate_at_small_levels() {
        // volume argument predicts high acceptance; demand >= 50%
        for k in 1..=5u32 {
            let mut accepted = 0;
            for trial in 0..100u64 {
                let mut rng = SeedTree::new(1000 + trial)
                    .child("acc")
                    .child_u(k as u64)
                    .rng();
                if sample_points(k, 0.5, &mut rng, 1).is_ok() {
                    accepted += 1;
                }
            }
            assert!(accepted >= 50, "k={k}: acceptance {accepted}/100");
        }
    }

    #[test]
    fn build_k1_single_factor() {
        let b = build(0.5, 1, None, 7).unwrap();
        assert_eq!(b.product.factors.len(), 1);
        assert_eq!(b.product.factors[0].atoms.len(), 2);
        assert!((b.product.factors[0].total_mass() - 1.0).abs() < 1e-12);
        assert!((fourier_product(&b.product, 0.0).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn build_support_inside_unit_interval() {
        let b = build(0.5, 6, None, 42).unwrap();
        let expanded = b.product.expand().unwrap();
        assert!(expanded.support_hint.0 > 0.0);
        assert!(expanded.support_hint.1 < 1.0);
        // factor separation invariants re-validated post hoc
        for (lvl, f) in b.levels.iter().zip(&b.product.factors) {
            let scale: f64 = b
                .levels
                .iter()
                .take_while(|l| l.k < lvl.k)
                .map(|l| l.l_k)
                .product();
            for (j, &(pos, _)) in f.atoms.iter().enumerate() {
                assert!((pos - scale * lvl.points[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn product_matches_full_expansion_at_random_frequencies() {
        let b = build(0.5, 5, None, 3).unwrap();
        let expanded = b.product.expand().unwrap();
        let mut rng = SeedTree::new(77).child("freqs").rng();
        for _ in 0..100 {
            let xi = (rng.gen::<f64>() - 0.5) * 2e4;
            let p = fourier_product(&b.product, xi).unwrap();
            let e = fourier_atomic(&expanded, xi).unwrap();
            assert!((p - e).norm() < 1e-9, "xi={xi}: {p} vs {e}");
        }
    }

    #[test]
    fn ahlfors_holds_on_built_instance() {
        let b = build(0.5, 6, None, 42).unwrap();
        let rep = ahlfors_check(&b, 1e-9);
        assert!(rep.passed, "worst ratio {}", rep.worst_ratio);
        assert!(rep.worst_ratio <= 1.0 + 1e-9);
        assert_eq!(
            rep.intervals_checked,
            2 + 2 * 3 + 6 * 4 + 24 * 5 + 120 * 6 + 720 * 7
        );
    }

    #[test]
    fn ahlfors_detects_corruption() {
        let mut b = build(0.5, 4, None, 42).unwrap();
        b.levels[2].weights[0] *= 60.0;
        let rep = ahlfors_check(&b, 1e-9);
        assert!(!rep.passed);
        let w = rep.violation.expect("witness expected");
        assert_eq!(w.level, 3);
    }

    #[test]
    fn build_is_deterministic_per_seed() {
        let a = build(0.5, 6, None, 42).unwrap();
        let b = build(0.5, 6, None, 42).unwrap();
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        assert_eq!(ja, jb);
    }
}
