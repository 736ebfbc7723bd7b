//! Random dyadic Cantor measure with a heavy-node weight chain.
//!
//! Levels alternate between deterministic doubling steps (`t = 2`, every
//! node splits; the distinguished node splits `(1/sqrt2, 1 - 1/sqrt2)`, all
//! others evenly) and random thinning steps (`t = 1`, every node keeps one
//! uniformly chosen child, resampled until an exponential-sum statistic
//! passes a Bernstein-type threshold). The distinguished chain keeps
//! `p_{j,a_j} = (t_1 ... t_j)^{-1/2}` exactly, which is the heavy-ball lever
//! of the frame criterion.
//!
//! Weights are stored exactly as integer exponent triples
//! `(1/2)^h (1/sqrt2)^r (1 - 1/sqrt2)^c`, so the heavy-chain identity is
//! checked in integer arithmetic, not floating point.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};

use crate::bump::plateau;
use crate::error::{Error, Result};
use crate::measure::{fourier_step, StepDensity};
use crate::rng::SeedTree;

/// Default retry cap for the thinning rejection sampler: the union bound
/// puts single-attempt failure below 1/2, so 64 retries is far past any
/// practical need.
pub const DEFAULT_RETRY_CAP: u64 = 64;

/// Weight as exact exponents: value = (1/2)^half * (2^-1/2)^rt * (1-2^-1/2)^comp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Weight {
    pub half: u32,
    pub rt: u32,
    pub comp: u32,
}

impl Weight {
    pub const ONE: Weight = Weight {
        half: 0,
        rt: 0,
        comp: 0,
    };

    pub fn value(&self) -> f64 {
        let inv_sqrt2 = 1.0 / SQRT_2;
        (0.5f64).powi(self.half as i32)
            * inv_sqrt2.powi(self.rt as i32)
            * (1.0 - inv_sqrt2).powi(self.comp as i32)
    }

    fn times_half(self) -> Weight {
        Weight {
            half: self.half + 1,
            ..self
        }
    }

    fn times_rt(self) -> Weight {
        Weight {
            rt: self.rt + 1,
            ..self
        }
    }

    fn times_comp(self) -> Weight {
        Weight {
            comp: self.comp + 1,
            ..self
        }
    }
}

/// The `{1,2}` branching sequence: `t_1 = 2`, then `t_j = 1` exactly when
/// the running product already meets `2^{sj}`. Every prefix satisfies
/// `2^{sj} <= t_1...t_j <= 2^{sj+1}`.
pub fn t_sequence(s: f64, levels: u32) -> Result<Vec<u8>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::BadParameter(format!("s must be in (0,1], got {s}")));
    }
    if levels == 0 {
        return Err(Error::BadParameter("need at least one level".into()));
    }
    let mut t = Vec::with_capacity(levels as usize);
    let mut count2: u32 = 0; // log2 of the running product
    for j in 1..=levels {
        let tj = if j == 1 {
            2
        } else if (count2 as f64) >= s * j as f64 {
            1
        } else {
            2
        };
        if tj == 2 {
            count2 += 1;
        }
        // sandwich (exact: the product is the power 2^count2)
        debug_assert!(s * j as f64 <= count2 as f64 && (count2 as f64) <= s * j as f64 + 1.0);
        t.push(tj);
    }
    Ok(t)
}

/// State after j growth steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DyadicState {
    pub j: u32,
    /// Sorted numerators: node positions are `nodes[i] / 2^j`.
    pub nodes: Vec<u64>,
    pub weights: Vec<Weight>,
    /// The `{1,2}` prefix consumed so far.
    pub t: Vec<u8>,
    /// sum of squared weights
    pub sigma_sq: f64,
    /// Index into `nodes` of the smallest node in [1/2, 1], when present.
    pub heavy_idx: Option<usize>,
}

impl DyadicState {
    pub fn root() -> Self {
        DyadicState {
            j: 0,
            nodes: vec![0],
            weights: vec![Weight::ONE],
            t: Vec::new(),
            sigma_sq: 1.0,
            heavy_idx: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn prod_t(&self) -> u64 {
        self.t.iter().map(|&x| x as u64).product()
    }

    fn recompute_heavy(&mut self) {
        if self.j == 0 {
            self.heavy_idx = None;
            return;
        }
        let half = 1u64 << (self.j - 1);
        let idx = self.nodes.partition_point(|&n| n < half);
        self.heavy_idx = (idx < self.nodes.len()).then_some(idx);
    }

    fn recompute_sigma(&mut self) {
        self.sigma_sq = self.weights.iter().map(|w| w.value() * w.value()).sum();
    }

    pub fn weight_values(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.value()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().map(|w| w.value()).sum()
    }

    /// The heavy node's position numerator.
    pub fn heavy_node(&self) -> Option<u64> {
        self.heavy_idx.map(|i| self.nodes[i])
    }

    pub fn to_step_density(&self) -> Result<StepDensity> {
        let mut cells = BTreeMap::new();
        for (&n, w) in self.nodes.iter().zip(&self.weights) {
            cells.insert(n, w.value());
        }
        StepDensity::new(self.j, cells)
    }

    /// Step density with cell weights multiplied by a plateau taper that is
    /// 1 on [delta, 1-delta]; delta = 2^-j0 with j0 the level of the second
    /// doubling step. Cell sampling is at midpoints.
    pub fn tapered_density(&self) -> Result<StepDensity> {
        let delta = self.taper_delta();
        let scale = (1u64 << self.j) as f64;
        let mut cells = BTreeMap::new();
        for (&n, w) in self.nodes.iter().zip(&self.weights) {
            let mid = (n as f64 + 0.5) / scale;
            let tw = w.value() * plateau(mid, delta);
            if tw > 0.0 {
                cells.insert(n, tw);
            }
        }
        StepDensity::new(self.j, cells)
    }

    pub fn taper_delta(&self) -> f64 {
        let mut seen = 0;
        for (idx, &tj) in self.t.iter().enumerate() {
            if tj == 2 {
                seen += 1;
                if seen == 2 {
                    return (0.5f64).powi(idx as i32 + 1);
                }
            }
        }
        0.25
    }
}

/// `lambda = 2 sqrt2 sigma sqrt(ln 2^{j+4})`.
pub fn bernstein_threshold(sigma_sq: f64, j: u32) -> f64 {
    2.0 * SQRT_2 * sigma_sq.sqrt() * ((j as f64 + 4.0) * std::f64::consts::LN_2).sqrt()
}

/// Outcome of one growth step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrowOutcome {
    pub state: DyadicState,
    /// False only when the retry cap was exhausted; the best candidate is
    /// kept and flagged, never silently accepted.
    pub threshold_met: bool,
    pub attempts: u64,
    /// Max exponential-sum statistic of the returned configuration
    /// (0 for deterministic doubling steps).
    pub max_stat: f64,
    pub threshold: f64,
}

/// max over k in [0, 2^{j+1}) of |sum_a chi_a(k)| for the sign pattern
/// `signs`, via one FFT of the signed weight profile.
fn thinning_stat(state: &DyadicState, signs: &[bool]) -> f64 {
    let j = state.j;
    let n = 1usize << j;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for ((&node, w), &keep_left) in state.nodes.iter().zip(&state.weights).zip(signs) {
        let s = if keep_left { 1.0 } else { -1.0 };
        buf[node as usize].re += s * w.value();
    }
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    // |sum chi_a(k)| = |sin(pi k / 2^{j+1})| * |S(k mod 2^j)|
    let mut worst = 0.0f64;
    let m = 2 * n;
    for k in 0..m {
        let damp = (PI * k as f64 / m as f64).sin().abs();
        let v = damp * buf[k % n].norm();
        if v > worst {
            worst = v;
        }
    }
    worst
}

/// Grows one level. Doubling steps are deterministic; thinning steps redraw
/// the per-node child choices until the statistic clears the Bernstein
/// threshold computed from the CURRENT level's sigma.
pub fn grow_level(
    state: &DyadicState,
    t_next: u8,
    tree: &SeedTree,
    retry_cap: u64,
) -> Result<GrowOutcome> {
    let j = state.j;
    let mut t = state.t.clone();
    t.push(t_next);
    match t_next {
        2 => {
            let mut nodes = Vec::with_capacity(2 * state.nodes.len());
            let mut weights = Vec::with_capacity(2 * state.nodes.len());
            for (i, (&n, w)) in state.nodes.iter().zip(&state.weights).enumerate() {
                let heavy = if j == 0 {
                    // base step: the root splits with the distinguished
                    // factor on the RIGHT child so the chain starts at 1/2
                    true
                } else {
                    state.heavy_idx == Some(i)
                };
                if heavy && j == 0 {
                    nodes.push(2 * n);
                    weights.push(w.times_comp());
                    nodes.push(2 * n + 1);
                    weights.push(w.times_rt());
                } else if heavy {
                    nodes.push(2 * n);
                    weights.push(w.times_rt());
                    nodes.push(2 * n + 1);
                    weights.push(w.times_comp());
                } else {
                    nodes.push(2 * n);
                    weights.push(w.times_half());
                    nodes.push(2 * n + 1);
                    weights.push(w.times_half());
                }
            }
            let mut next = DyadicState {
                j: j + 1,
                nodes,
                weights,
                t,
                sigma_sq: 0.0,
                heavy_idx: None,
            };
            next.recompute_heavy();
            next.recompute_sigma();
            Ok(GrowOutcome {
                state: next,
                threshold_met: true,
                attempts: 0,
                max_stat: 0.0,
                threshold: f64::INFINITY,
            })
        }
        1 => {
            let lambda = bernstein_threshold(state.sigma_sq, j);
            let mut best: Option<(f64, Vec<bool>)> = None;
            let mut attempts = 0;
            while attempts < retry_cap {
                attempts += 1;
                let mut rng = tree
                    .child("thin")
                    .child_u(j as u64)
                    .child_u(attempts)
                    .rng();
                let signs: Vec<bool> = (0..state.nodes.len())
                    .map(|_| rand::Rng::gen_bool(&mut rng, 0.5))
                    .collect();
                let stat = thinning_stat(state, &signs);
                if stat <= lambda {
                    best = Some((stat, signs));
                    break;
                }
                if best.as_ref().map_or(true, |(b, _)| stat < *b) {
                    best = Some((stat, signs));
                }
            }
            let (stat, signs) = best.expect("at least one attempt");
            let threshold_met = stat <= lambda;
            let nodes: Vec<u64> = state
                .nodes
                .iter()
                .zip(&signs)
                .map(|(&n, &left)| 2 * n + if left { 0 } else { 1 })
                .collect();
            let mut next = DyadicState {
                j: j + 1,
                nodes,
                weights: state.weights.clone(),
                t,
                sigma_sq: 0.0,
                heavy_idx: None,
            };
            next.recompute_heavy();
            next.recompute_sigma();
            Ok(GrowOutcome {
                state: next,
                threshold_met,
                attempts,
                max_stat: stat,
                threshold: lambda,
            })
        }
        other => Err(Error::BadParameter(format!("t must be 1 or 2, got {other}"))),
    }
}

/// Heavy-chain mass `p_{j,a_j}`; equals `(t_1...t_j)^{-1/2}`.
pub fn heavy_mass(state: &DyadicState) -> Result<f64> {
    let idx = state
        .heavy_idx
        .ok_or_else(|| Error::InvalidMeasure("no heavy node at level 0".into()))?;
    Ok(state.weights[idx].value())
}

/// Exact-exponent check of the heavy-chain identity
/// `p_{j,a_j}^2 * (t_1...t_j) = 1`: the heavy weight must be a pure power
/// of `1/sqrt2` whose exponent is the doubling count.
pub fn heavy_identity_exact(state: &DyadicState) -> bool {
    match state.heavy_idx {
        None => state.j == 0,
        Some(i) => {
            let w = state.weights[i];
            let count2 = state.t.iter().filter(|&&x| x == 2).count() as u32;
            w.half == 0 && w.comp == 0 && w.rt == count2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub j: u32,
    pub t: u8,
    pub attempts: u64,
    pub threshold_met: bool,
    pub max_stat: f64,
    pub threshold: f64,
}

/// A full trajectory up to level J.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CantorBuild {
    pub s: f64,
    pub t: Vec<u8>,
    pub states: Vec<DyadicState>,
    pub records: Vec<LevelRecord>,
}

impl CantorBuild {
    pub fn final_state(&self) -> &DyadicState {
        self.states.last().expect("at least the root")
    }
}

pub fn build(s: f64, levels: u32, seed: u64, retry_cap: u64) -> Result<CantorBuild> {
    let t = t_sequence(s, levels)?;
    let tree = SeedTree::new(seed).child("cantor");
    let mut states = vec![DyadicState::root()];
    let mut records = Vec::with_capacity(levels as usize);
    for (i, &tj) in t.iter().enumerate() {
        let out = grow_level(states.last().unwrap(), tj, &tree, retry_cap)?;
        records.push(LevelRecord {
            j: i as u32 + 1,
            t: tj,
            attempts: out.attempts,
            threshold_met: out.threshold_met,
            max_stat: out.max_stat,
            threshold: out.threshold,
        });
        states.push(out.state);
    }
    Ok(CantorBuild {
        s,
        t,
        states,
        records,
    })
}

/// Report of the transform-increment audit between consecutive levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub j: u32,
    /// max over |k| <= 2^{j+4} of |phi_{j+1}hat(k) - phi_jhat(k)| divided by
    /// `min(1, 2^{j+1}/|k|) * 2^{-(s-eps) j / 2}`.
    pub max_normalized: f64,
    pub witness_k: i64,
    pub passed: bool,
    pub bound_c: f64,
}

/// Verifies `|phi_{j+1}hat(k) - phi_jhat(k)| <= C min(1, 2^{j+1}/|k|) 2^{-(s-eps)j/2}`
/// for all |k| <= 2^{j+4}. The k = 0 increment vanishes since both masses
/// are 1.
pub fn increment_bound_check(
    prev: &DyadicState,
    next: &DyadicState,
    s: f64,
    c_bound: f64,
    eps: f64,
) -> Result<IncrementReport> {
    if next.j != prev.j + 1 {
        return Err(Error::BadParameter("states must be consecutive".into()));
    }
    let j = prev.j;
    let d_prev = prev.to_step_density()?;
    let d_next = next.to_step_density()?;
    let k_max = 1i64 << (j + 4);
    let decay = (0.5f64).powf((s - eps) * j as f64 / 2.0);
    let mut worst = 0.0f64;
    let mut witness = 0i64;
    for k in -k_max..=k_max {
        let diff = (fourier_step(&d_next, k) - fourier_step(&d_prev, k)).norm();
        let shape = if k == 0 {
            1.0
        } else {
            (1.0f64).min((1i64 << (j + 1)) as f64 / k.abs() as f64)
        };
        let normalized = diff / (shape * decay);
        if normalized > worst {
            worst = normalized;
            witness = k;
        }
    }
    Ok(IncrementReport {
        j,
        max_normalized: worst,
        witness_k: witness,
        passed: worst <= c_bound,
        bound_c: c_bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaReport {
    /// Recursion verified against direct sums at every step.
    pub recursion_ok: bool,
    pub max_abs_dev: f64,
    /// `sigma_j^2 <= (1 + #{doubling steps}) / (t_1...t_j)` at every level.
    pub bound_ok: bool,
    /// Whether the tighter `#{doubling steps} / prod t` form also held at
    /// every level j >= 3 (it fails at j <= 2 because the root already
    /// carries unit squared mass).
    pub tight_bound_ok_from_3: bool,
    pub witness_level: Option<u32>,
}

/// Verifies the sigma recursion
/// `sigma_{j+1}^2 = sigma_j^2` (thinning) or
/// `sigma_{j+1}^2 = sigma_j^2/2 + (3/2 - sqrt2) p_{j,heavy}^2` (doubling)
/// against directly recomputed sums, plus the induction upper bound.
pub fn sigma_recursion_check(build: &CantorBuild) -> SigmaReport {
    let mut max_dev = 0.0f64;
    let mut witness = None;
    for w in build.states.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let t_step = b.t.last().copied().unwrap();
        let predicted = match t_step {
            1 => a.sigma_sq,
            _ => {
                let heavy = if a.j == 0 {
                    1.0
                } else {
                    a.weights[a.heavy_idx.unwrap()].value()
                };
                a.sigma_sq / 2.0 + (1.5 - SQRT_2) * heavy * heavy
            }
        };
        let dev = (predicted - b.sigma_sq).abs();
        if dev > max_dev {
            max_dev = dev;
            if dev > 1e-12 {
                witness = Some(b.j);
            }
        }
    }
    let mut bound_ok = true;
    let mut tight_ok = true;
    for st in &build.states[1..] {
        let count2 = st.t.iter().filter(|&&x| x == 2).count() as f64;
        let inv_prod = 1.0 / st.prod_t() as f64;
        if st.sigma_sq > (1.0 + count2) * inv_prod * (1.0 + 1e-12) {
            bound_ok = false;
        }
        if st.j >= 3 && st.sigma_sq > count2 * inv_prod * (1.0 + 1e-12) {
            tight_ok = false;
        }
    }
    SigmaReport {
        recursion_ok: max_dev <= 1e-12,
        max_abs_dev: max_dev,
        bound_ok,
        tight_bound_ok_from_3: tight_ok,
        witness_level: witness,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ball_mass_step;

    #[test]
    fn t_sequence_half() {
        assert_eq!(t_sequence(0.5, 6).unwrap(), vec![2, 1, 2, 1, 2, 1]);
    }

    #[test]
    fn t_sequence_one_doubles_forever() {
        assert_eq!(t_sequence(1.0, 4).unwrap(), vec![2, 2, 2, 2]);
    }

    #[test]
    fn t_sequence_sandwich_all_prefixes() {
        for &s in &[0.2, 0.35, 0.5, 0.8, 1.0] {
            let t = t_sequence(s, 40).unwrap();
            let mut count2 = 0u32;
            for (idx, &tj) in t.iter().enumerate() {
                if tj == 2 {
                    count2 += 1;
                }
                let j = (idx + 1) as f64;
                assert!(s * j <= count2 as f64 && (count2 as f64) <= s * j + 1.0);
            }
        }
    }

    #[test]
    fn bernstein_threshold_value_and_scaling() {
        let l0 = bernstein_threshold(1.0, 0);
        assert!((l0 - 2.0 * SQRT_2 * (4.0 * std::f64::consts::LN_2).sqrt()).abs() < 1e-12);
        assert!((l0 - 4.709).abs() < 1e-3);
        let l1 = bernstein_threshold(2.0, 0);
        assert!((l1 / l0 - SQRT_2).abs() < 1e-12);
        assert!(bernstein_threshold(1.0, 1) > l0);
    }

    #[test]
    fn base_split_weights_and_chain_start() {
        let root = DyadicState::root();
        let tree = SeedTree::new(0).child("t");
        let out = grow_level(&root, 2, &tree, 4).unwrap();
        let st = out.state;
        assert_eq!(st.nodes, vec![0, 1]);
        let inv = 1.0 / SQRT_2;
        assert!((st.weights[1].value() - inv).abs() < 1e-15);
        assert!((st.weights[0].value() - (1.0 - inv)).abs() < 1e-15);
        assert_eq!(st.heavy_node(), Some(1)); // position 1/2
        assert!((heavy_mass(&st).unwrap() - inv).abs() < 1e-15);
        // sigma_1^2 = 2 - sqrt2 both ways
        assert!((st.sigma_sq - (2.0 - SQRT_2)).abs() < 1e-14);
    }

    #[test]
    fn heavy_mass_follows_prod_t() {
        let b = build(0.5, 12, 11, DEFAULT_RETRY_CAP).unwrap();
        for st in &b.states[1..] {
            let hm = heavy_mass(st).unwrap();
            let pt = st.prod_t() as f64;
            assert!((hm * hm * pt - 1.0).abs() < 1e-10, "j={}", st.j);
            assert!(heavy_identity_exact(st), "exact identity at j={}", st.j);
        }
        // j = 3, s = 1/2: t = (2,1,2), heavy mass 1/2
        assert!((heavy_mass(&b.states[3]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn node_count_is_prod_t_and_mass_one() {
        let b = build(0.5, 12, 5, DEFAULT_RETRY_CAP).unwrap();
        for st in &b.states {
            assert_eq!(st.node_count() as u64, st.prod_t().max(1));
            assert!((st.total_weight() - 1.0).abs() < 1e-12, "j={}", st.j);
        }
    }

    #[test]
    fn thinning_respects_threshold_post_echo() {
        let b = build(0.5, 12, 23, DEFAULT_RETRY_CAP).unwrap();
        for rec in &b.records {
            assert!(rec.threshold_met, "j={} flagged", rec.j);
            if rec.t == 1 {
                assert!(rec.max_stat <= rec.threshold);
                // independent re-verification of the accepted configuration
                let prev = &b.states[(rec.j - 1) as usize];
                let next = &b.states[rec.j as usize];
                let signs: Vec<bool> = prev
                    .nodes
                    .iter()
                    .zip(&next.nodes)
                    .map(|(&n, &m)| m == 2 * n)
                    .collect();
                let stat = thinning_stat(prev, &signs);
                assert!((stat - rec.max_stat).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn empirical_acceptance_rate() {
        // paper's union bound gives failure <= 1/2; demand >= 0.4 at j <= 10
        let mut accepted = 0u32;
        let mut total = 0u32;
        for seed in 0..200u64 {
            let t = t_sequence(0.5, 10).unwrap();
            let tree = SeedTree::new(30_000 + seed).child("acc");
            let mut st = DyadicState::root();
            for &tj in &t {
                let out = grow_level(&st, tj, &tree, 1).unwrap();
                if tj == 1 {
                    total += 1;
                    if out.threshold_met {
                        accepted += 1;
                        st = out.state;
                    } else {
                        // re-draw with a fresh cap so the trajectory continues
                        let out2 = grow_level(&st, tj, &tree, DEFAULT_RETRY_CAP).unwrap();
                        st = out2.state;
                    }
                } else {
                    st = out.state;
                }
            }
        }
        let rate = accepted as f64 / total as f64;
        assert!(rate >= 0.4, "acceptance rate {rate}");
    }

    #[test]
    fn increment_zero_at_k0_and_doubling_exact_bound() {
        let b = build(0.5, 8, 9, DEFAULT_RETRY_CAP).unwrap();
        for w in b.states.windows(2) {
            let (prev, next) = (&w[0], &w[1]);
            let dp = prev.to_step_density().unwrap();
            let dn = next.to_step_density().unwrap();
            let d0 = (fourier_step(&dn, 0) - fourier_step(&dp, 0)).norm();
            assert!(d0 < 1e-12);
            if *next.t.last().unwrap() == 2 && prev.j >= 1 {
                // doubling increments are carried by the heavy node alone
                let p_heavy = prev.weights[prev.heavy_idx.unwrap()].value();
                let m = 1i64 << (prev.j + 1);
                for k in 1..(4 * m) {
                    let diff = (fourier_step(&dn, k) - fourier_step(&dp, k)).norm();
                    let theta = PI * k as f64 / m as f64;
                    let pref = if k % m == 0 {
                        0.0
                    } else {
                        (theta.sin() / theta).abs()
                    };
                    let bound = (SQRT_2 - 1.0) * pref * p_heavy + 1e-12;
                    assert!(diff <= bound, "j={} k={k}: {diff} vs {bound}", prev.j);
                }
            }
        }
    }

    #[test]
    fn increment_normalized_ratio_is_finite() {
        let b = build(0.5, 10, 7, DEFAULT_RETRY_CAP).unwrap();
        for w in b.states.windows(2) {
            let rep = increment_bound_check(&w[0], &w[1], 0.5, 16.0, 0.05).unwrap();
            assert!(rep.max_normalized.is_finite());
            assert!(rep.passed, "j={} ratio {}", rep.j, rep.max_normalized);
        }
    }

    #[test]
    fn sigma_recursion_and_bounds() {
        let b = build(0.5, 14, 3, DEFAULT_RETRY_CAP).unwrap();
        let rep = sigma_recursion_check(&b);
        assert!(rep.recursion_ok, "max dev {}", rep.max_abs_dev);
        assert!(rep.bound_ok);
        assert!(rep.tight_bound_ok_from_3);
    }

    #[test]
    fn heavy_cell_ball_mass_dominates() {
        let b = build(0.5, 10, 19, DEFAULT_RETRY_CAP).unwrap();
        let st = b.final_state();
        let d = st.to_step_density().unwrap();
        let hm = heavy_mass(st).unwrap();
        let a = st.heavy_node().unwrap() as f64 / (1u64 << st.j) as f64;
        let r = (0.5f64).powi(st.j as i32);
        // closed cell as a ball: exactly the heavy mass
        let cell = ball_mass_step(&d, a + r / 2.0, r / 2.0);
        assert!((cell - hm).abs() < 1e-12);
        // dyadic-radius ball at the chain point dominates it
        assert!(ball_mass_step(&d, a, r) >= hm - 1e-12);
    }

    #[test]
    fn taper_delta_is_second_doubling_scale() {
        let b = build(0.5, 6, 2, DEFAULT_RETRY_CAP).unwrap();
        // t = (2,1,2,...): second doubling at level 3
        assert!((b.final_state().taper_delta() - 0.125).abs() < 1e-15);
        let tapered = b.final_state().tapered_density().unwrap();
        assert!(tapered.total_mass > 0.0);
        assert!(tapered.total_mass <= 1.0 + 1e-12);
    }
}
