//! Deterministic prime-periodized measures with positive Fourier
//! coefficients, plus the auxiliary comparison measure living on reduced
//! fractions, all at desk-scale truncations of the level schedule.

mod checks;
mod coeffs;
mod phi;
mod primes;

pub use checks::{
    comparison_frequency, comparison_pointwise, divisor_bound_check, frostman_nu,
    kernel0_l1, positivity_check, stability_check, stability_trivial_identity,
    ComparisonAReport, ComparisonBReport, DivisorBoundReport, FrostmanReport, PositivityReport,
    StabilityReport,
};
pub use coeffs::{
    build_level_coeffs, coeff_f, conv_fft, density_transform_oracle, density_value,
    factor_value, kernel0, phi_hat_tail_sum, product_coeffs, CoeffSequence, DensityEvaluator,
    Variant, KERNEL0_RADIUS,
};
pub use phi::{build_phi, AuxPhi};
pub use primes::{sieve, KaufmanParams};

use crate::envelope::{band_envelope, FourierProfile, Sampling};
use crate::error::Result;

/// Band envelope of the truncated transform at real frequencies, using the
/// structured density evaluator.
pub fn transform_profile(
    params: &KaufmanParams,
    variant: Variant,
    levels: usize,
    m_min: i32,
    m_max: i32,
    samples_per_band: u32,
    seed: u64,
) -> Result<FourierProfile> {
    let ev = DensityEvaluator::new(params, variant, levels)?;
    // normalize by the total mass so profiles of different truncations are
    // comparable
    let mass = ev.eval(0.0).norm();
    let mut profile = band_envelope(
        |xi| Ok(ev.eval(xi).norm() / mass),
        m_min,
        m_max,
        samples_per_band,
        Sampling::Jittered,
        seed,
    )?;
    profile.tag = Some(format!("kaufman-{variant:?}-n{levels}"));
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_of_first_level_decays() {
        let p = KaufmanParams::new(1.0, vec![1e3], None).unwrap();
        let prof = transform_profile(&p, Variant::Mu, 1, 2, 11, 64, 7).unwrap();
        assert!(prof.fitted_beta.is_finite());
        // the window factor alone already forces some decay
        assert!(prof.fitted_beta > 0.0, "beta {}", prof.fitted_beta);
    }
}
