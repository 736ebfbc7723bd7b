//! Prime windows and the level schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Plain sieve of Eratosthenes; desk bounds are tiny, determinism matters.
pub fn sieve(limit: u64) -> Vec<u64> {
    if limit < 2 {
        return Vec::new();
    }
    let n = limit as usize;
    let mut composite = vec![false; n + 1];
    let mut primes = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            primes.push(p as u64);
            let mut m = p * p;
            while m <= n {
                composite[m] = true;
                m += p;
            }
        }
    }
    primes
}

/// Level schedule and prime windows for the target and auxiliary measures.
///
/// Level i uses modulus-scale `q_i`, window function value `h_i = c_s ln q_i`,
/// and prime sets `P_mu = {1} u {p <= q^{s/2}/2}`,
/// `P_nu = {q^{s/2}/h <= p <= q^{s/2}/2}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KaufmanParams {
    pub s: f64,
    pub q: Vec<f64>,
    pub c_s: f64,
    pub h: Vec<f64>,
    pub p_mu: Vec<Vec<u64>>,
    pub p_nu: Vec<Vec<u64>>,
    /// Per-level density-comparison factor
    /// `(Q/(Q-1)) * #P_mu/#P_nu`, `Q = q^{s/2}/h`.
    pub factors: Vec<f64>,
    pub factor_product: f64,
    /// True when `c_s` met both calibration rules (nonempty windows and
    /// factor product <= 4); false when only nonemptiness was achievable.
    pub calibrated: bool,
    /// Levels where `q^{s/2}/2 < 2`, leaving `P_mu = {1}` only.
    pub mu_window_flagged: Vec<bool>,
}

impl KaufmanParams {
    /// Builds the parameter set. When `c_s` is absent it is calibrated as
    /// the smallest power of two (2^k, k in -6..=6) such that every level
    /// has a nonempty auxiliary window with `Q > 1` and the comparison
    /// factor product stays <= 4; when no power of two satisfies the factor
    /// rule the smallest one with valid windows is kept and flagged.
    pub fn new(s: f64, q: Vec<f64>, c_s: Option<f64>) -> Result<Self> {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::BadParameter(format!("s must be in (0,1], got {s}")));
        }
        if q.is_empty() {
            return Err(Error::BadParameter("need at least one level".into()));
        }
        for w in q.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::BadParameter("q must be increasing".into()));
            }
        }
        if q[0] < 16.0 {
            return Err(Error::BadParameter("q_1 too small".into()));
        }
        match c_s {
            Some(c) => Self::with_cs(s, q, c, true),
            None => {
                let mut fallback: Option<KaufmanParams> = None;
                for k in -6i32..=6 {
                    let c = (2.0f64).powi(k);
                    if let Ok(p) = Self::with_cs(s, q.clone(), c, false) {
                        if p.factor_product <= 4.0 {
                            return Ok(KaufmanParams {
                                calibrated: true,
                                ..p
                            });
                        }
                        if fallback.is_none() {
                            fallback = Some(p);
                        }
                    }
                }
                fallback.ok_or(Error::EmptyPrimeWindow {
                    level: 1,
                    q: q[0],
                    h: 0.0,
                })
            }
        }
    }

    fn with_cs(s: f64, q: Vec<f64>, c_s: f64, calibrated: bool) -> Result<Self> {
        let mut h = Vec::new();
        let mut p_mu = Vec::new();
        let mut p_nu = Vec::new();
        let mut factors = Vec::new();
        let mut flagged = Vec::new();
        for (idx, &qi) in q.iter().enumerate() {
            let hi = c_s * qi.ln();
            let top = qi.powf(s / 2.0) / 2.0;
            let bottom = qi.powf(s / 2.0) / hi;
            let primes = sieve(top.floor() as u64);
            let mut mu = vec![1u64];
            mu.extend(&primes);
            flagged.push(primes.is_empty());
            let nu: Vec<u64> = primes.iter().copied().filter(|&p| p as f64 >= bottom).collect();
            if nu.is_empty() {
                return Err(Error::EmptyPrimeWindow {
                    level: idx + 1,
                    q: qi,
                    h: hi,
                });
            }
            if bottom <= 1.0 {
                return Err(Error::Calibration(format!(
                    "level {}: Q = q^{{s/2}}/h = {bottom} must exceed 1",
                    idx + 1
                )));
            }
            let factor = (bottom / (bottom - 1.0)) * (mu.len() as f64 / nu.len() as f64);
            factors.push(factor);
            h.push(hi);
            p_mu.push(mu);
            p_nu.push(nu);
        }
        let factor_product = factors.iter().product();
        Ok(KaufmanParams {
            s,
            q,
            c_s,
            h,
            p_mu,
            p_nu,
            factors,
            factor_product,
            calibrated,
            mu_window_flagged: flagged,
        })
    }

    pub fn levels(&self) -> usize {
        self.q.len()
    }

    /// Comparison factor for one level (1-based), as used by the pointwise
    /// density inequality.
    pub fn comparison_factor(&self, level: usize) -> f64 {
        self.factors[level - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_small() {
        assert_eq!(sieve(1), Vec::<u64>::new());
        assert_eq!(sieve(2), vec![2]);
        assert_eq!(
            sieve(50),
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]
        );
        assert_eq!(sieve(50).len(), 15);
    }

    #[test]
    fn mu_window_q1e4_s1() {
        let p = KaufmanParams::new(1.0, vec![1e4], Some(1.0)).unwrap();
        // {1} plus the 15 primes <= 50
        assert_eq!(p.p_mu[0].len(), 16);
        assert_eq!(p.p_mu[0][0], 1);
        assert!((p.h[0] - (1e4f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn nu_window_subset_of_mu() {
        let p = KaufmanParams::new(1.0, vec![1e4, 1e7], None).unwrap();
        for (mu, nu) in p.p_mu.iter().zip(&p.p_nu) {
            for x in nu {
                assert!(mu.contains(x));
            }
            assert!(!nu.is_empty());
        }
    }

    #[test]
    fn calibration_meets_factor_rule_at_default_schedule() {
        let p = KaufmanParams::new(1.0, vec![1e4, 1e7], None).unwrap();
        assert!(p.calibrated);
        assert!(p.factor_product <= 4.0, "product {}", p.factor_product);
        // power of two
        let log = p.c_s.log2();
        assert!((log - log.round()).abs() < 1e-12, "c_s {}", p.c_s);
    }

    #[test]
    fn empty_window_is_an_error() {
        // tiny q with huge h leaves no primes in the window
        let r = KaufmanParams::new(0.3, vec![64.0], Some(4.0));
        assert!(r.is_err());
    }
}
