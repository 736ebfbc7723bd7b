//! Exact measure representations and their Fourier transforms.
//!
//! Three concrete carriers cover every construction in this crate:
//! finite atomic measures, level-j dyadic step densities, and ordered
//! products of atomic factors standing for truncated infinite convolutions.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::bump;
use crate::error::{Error, Result};
use crate::numeric::{CompSum, CompSumC};

/// Atom count above which transforms switch to compensated accumulation.
const COMPENSATED_THRESHOLD: usize = 10_000;

/// A finite weighted sum of point masses, positions strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicMeasure {
    /// `(position, weight)` pairs, sorted by position, weights >= 0.
    pub atoms: Vec<(f64, f64)>,
    /// Closed interval containing all positions.
    pub support_hint: (f64, f64),
}

impl AtomicMeasure {
    /// Builds from arbitrary pairs: sorts, merges exactly-equal positions,
    /// rejects negative weights and non-finite entries.
    pub fn new(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, w) in &atoms {
            if !x.is_finite() || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("non-finite atom ({x}, {w})")));
            }
            if w < 0.0 {
                return Err(Error::InvalidMeasure(format!("negative weight {w} at {x}")));
            }
        }
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let support_hint = match (merged.first(), merged.last()) {
            (Some(a), Some(b)) => (a.0, b.0),
            _ => (0.0, 0.0),
        };
        Ok(AtomicMeasure {
            atoms: merged,
            support_hint,
        })
    }

    pub fn dirac(x: f64) -> Self {
        AtomicMeasure {
            atoms: vec![(x, 1.0)],
            support_hint: (x, x),
        }
    }

    /// Uniform discretization of Lebesgue measure on [0,1] at cell midpoints.
    pub fn lebesgue_unit(n: usize) -> Self {
        let w = 1.0 / n as f64;
        let atoms = (0..n).map(|i| ((i as f64 + 0.5) * w, w)).collect();
        AtomicMeasure {
            atoms,
            support_hint: (0.0, 1.0),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = CompSum::default();
        for &(_, w) in &self.atoms {
            s.add(w);
        }
        s.value()
    }
}

/// Level-j piecewise-constant density: weight `p_{j,a}` sits on the dyadic
/// cell `[a, a + 2^-j]` with density value `2^j p_{j,a}`. Cells are keyed by
/// the integer numerator of `a = key / 2^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDensity {
    pub level: u32,
    pub cells: BTreeMap<u64, f64>,
    pub total_mass: f64,
}

impl StepDensity {
    pub fn new(level: u32, cells: BTreeMap<u64, f64>) -> Result<Self> {
        let span = 1u64
            .checked_shl(level)
            .ok_or_else(|| Error::BadParameter(format!("level {level} too large")))?;
        let mut mass = CompSum::default();
        for (&a, &w) in &cells {
            if a >= span {
                return Err(Error::InvalidMeasure(format!(
                    "cell {a} outside level-{level} range"
                )));
            }
            if !(w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("cell {a} weight {w} < 0")));
            }
            mass.add(w);
        }
        Ok(StepDensity {
            level,
            cells,
            total_mass: mass.value(),
        })
    }

    pub fn cell_width(&self) -> f64 {
        (0.5f64).powi(self.level as i32)
    }

    /// Verifies the declared mass against a direct re-sum.
    pub fn check_mass(&self, tol: f64) -> Result<()> {
        let mut s = CompSum::default();
        for &w in self.cells.values() {
            s.add(w);
        }
        if (s.value() - self.total_mass).abs() > tol {
            return Err(Error::InvalidMeasure(format!(
                "declared mass {} vs recomputed {}",
                self.total_mass,
                s.value()
            )));
        }
        Ok(())
    }

    /// Density value at a point (0 outside occupied cells).
    pub fn density_at(&self, x: f64) -> f64 {
        if x < 0.0 || x >= 1.0 {
            return 0.0;
        }
        let idx = (x * (1u64 << self.level) as f64).floor() as u64;
        self.cells
            .get(&idx)
            .map(|w| w * (1u64 << self.level) as f64)
            .unwrap_or(0.0)
    }
}

/// Smooth window attached to a product measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    /// `scale * aux_phi(scale * x)`: unit mass, transform `aux_phi_hat(xi/scale)`.
    AuxPhiScaled { scale: f64 },
}

impl Window {
    pub fn transform(&self, xi: f64) -> Complex64 {
        match self {
            Window::AuxPhiScaled { scale } => {
                Complex64::new(bump::aux_phi_hat(xi / scale), 0.0)
            }
        }
    }
}

/// Ordered factors of a truncated infinite convolution; the transform is the
/// product of factor transforms (times an optional window transform).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductMeasure {
    pub factors: Vec<AtomicMeasure>,
    pub envelope: Option<Window>,
}

impl ProductMeasure {
    pub fn new(factors: Vec<AtomicMeasure>) -> Result<Self> {
        for (i, f) in factors.iter().enumerate() {
            let m = f.total_mass();
            if (m - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidMeasure(format!(
                    "factor {i} has mass {m}, expected 1"
                )));
            }
        }
        Ok(ProductMeasure {
            factors,
            envelope: None,
        })
    }

    /// Expands the convolution into a single atomic measure.
    /// Guarded: the atom count is the product of factor sizes.
    pub fn expand(&self) -> Result<AtomicMeasure> {
        const CAP: u128 = 10_000_000;
        let mut count: u128 = 1;
        for f in &self.factors {
            count = count.saturating_mul(f.atoms.len() as u128);
            if count > CAP {
                return Err(Error::EnumerationBudget {
                    candidates: count,
                    cap: CAP,
                });
            }
        }
        let mut atoms = vec![(0.0f64, 1.0f64)];
        for f in &self.factors {
            let mut next = Vec::with_capacity(atoms.len() * f.atoms.len());
            for &(x, w) in &atoms {
                for &(y, v) in &f.atoms {
                    next.push((x + y, w * v));
                }
            }
            atoms = next;
        }
        AtomicMeasure::new(atoms)
    }
}

/// Transform of an atomic measure: `sum_j w_j e^{-2 pi i x_j xi}`.
pub fn fourier_atomic(m: &AtomicMeasure, xi: f64) -> Result<Complex64> {
    if m.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if m.atoms.len() > COMPENSATED_THRESHOLD {
        let mut acc = CompSumC::default();
        for &(x, w) in &m.atoms {
            let phase = -2.0 * PI * x * xi;
            acc.add(Complex64::from_polar(w, phase));
        }
        Ok(acc.value())
    } else {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(x, w) in &m.atoms {
            let phase = -2.0 * PI * x * xi;
            acc += Complex64::from_polar(w, phase);
        }
        Ok(acc)
    }
}

/// Exact Fourier coefficient of a step density at integer frequency k:
/// each cell contributes `p_{j,a} e^{-2 pi i k a} (1 - e^{-2 pi i k / 2^j}) / (2 pi i k / 2^j)`.
pub fn fourier_step(d: &StepDensity, k: i64) -> Complex64 {
    if k == 0 {
        return Complex64::new(d.total_mass, 0.0);
    }
    let width = d.cell_width();
    // prefactor (1 - e^{-2 pi i k w}) / (2 pi i k w)
    let theta = 2.0 * PI * k as f64 * width;
    let pref = (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta))
        / Complex64::new(0.0, theta);
    let scale = (1u64 << d.level) as f64;
    let mut acc = CompSumC::default();
    for (&a, &w) in &d.cells {
        let pos = a as f64 / scale;
        acc.add(Complex64::from_polar(w, -2.0 * PI * k as f64 * pos));
    }
    pref * acc.value()
}

/// Transform of a step density at arbitrary real frequency.
pub fn fourier_step_real(d: &StepDensity, xi: f64) -> Complex64 {
    if xi == 0.0 {
        return Complex64::new(d.total_mass, 0.0);
    }
    let width = d.cell_width();
    let theta = 2.0 * PI * xi * width;
    let pref = if theta.abs() < 1e-9 {
        Complex64::new(1.0, -theta / 2.0)
    } else {
        (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -theta)) / Complex64::new(0.0, theta)
    };
    let scale = (1u64 << d.level) as f64;
    let mut acc = CompSumC::default();
    for (&a, &w) in &d.cells {
        let pos = a as f64 / scale;
        acc.add(Complex64::from_polar(w, -2.0 * PI * xi * pos));
    }
    pref * acc.value()
}

/// Transform of a product measure: product of the factor transforms,
/// times the window transform when a window is attached.
pub fn fourier_product(p: &ProductMeasure, xi: f64) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    for f in &p.factors {
        acc *= fourier_atomic(f, xi)?;
    }
    if let Some(w) = &p.envelope {
        acc *= w.transform(xi);
    }
    Ok(acc)
}

/// Mass of the closed ball B(x, r). Atoms exactly on the boundary count
/// fully; step cells contribute proportionally to overlap length.
pub fn ball_mass_atomic(m: &AtomicMeasure, x: f64, r: f64) -> f64 {
    let lo = x - r;
    let hi = x + r;
    let start = m.atoms.partition_point(|&(p, _)| p < lo);
    let mut s = CompSum::default();
    for &(p, w) in &m.atoms[start..] {
        if p > hi {
            break;
        }
        s.add(w);
    }
    s.value()
}

/// Ball mass for a step density (exact overlap integration).
pub fn ball_mass_step(d: &StepDensity, x: f64, r: f64) -> f64 {
    let lo = x - r;
    let hi = x + r;
    let width = d.cell_width();
    let scale = (1u64 << d.level) as f64;
    let first = (lo / width).floor().max(0.0) as u64;
    let mut s = CompSum::default();
    for (&a, &w) in d.cells.range(first.saturating_sub(1)..) {
        let cell_lo = a as f64 / scale;
        if cell_lo > hi {
            break;
        }
        let cell_hi = cell_lo + width;
        let overlap = (hi.min(cell_hi) - lo.max(cell_lo)).max(0.0);
        if overlap > 0.0 {
            s.add(w * overlap / width);
        }
    }
    s.value()
}

/// Either carrier, for callers generic over the two exact representations.
pub enum MeasureRef<'a> {
    Atomic(&'a AtomicMeasure),
    Step(&'a StepDensity),
}

pub fn ball_mass(m: &MeasureRef<'_>, x: f64, r: f64) -> f64 {
    match m {
        MeasureRef::Atomic(a) => ball_mass_atomic(a, x, r),
        MeasureRef::Step(d) => ball_mass_step(d, x, r),
    }
}

/// Result of the translate-plus-taper combination
/// `d mu(x) = d nu(x+1) + psi(x) d nu(x)` with `psi(x) = phi0(x) (x - x0)^2`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CombinedMeasure {
    pub measure: AtomicMeasure,
    /// Integral of the taper against nu.
    pub taper_mass: f64,
    /// Set when the taper annihilates nu entirely (psi = 0 at every atom).
    pub degenerate: bool,
    /// The chosen vanishing point of the taper.
    pub x0: f64,
}

/// Combines a measure on [0,1] with its translate, weighting the original
/// copy by a smooth taper that vanishes exactly at `x0`. The restriction to
/// [0,1] is then absolutely continuous with respect to `nu` with an
/// unbounded reciprocal density near `x0`.
pub fn one_line_combine(nu: &AtomicMeasure, x0: f64) -> Result<CombinedMeasure> {
    if nu.is_empty() {
        return Err(Error::EmptyMeasure);
    }
    if nu.support_hint.0 < 0.0 || nu.support_hint.1 > 1.0 {
        return Err(Error::InvalidMeasure(
            "one_line_combine expects support in [0,1]".into(),
        ));
    }
    if !nu.atoms.iter().any(|&(x, _)| x == x0) {
        return Err(Error::OutsideSupport { x0 });
    }
    let psi = |x: f64| bump::phi0(x) * (x - x0) * (x - x0);
    let mut atoms: Vec<(f64, f64)> = Vec::with_capacity(2 * nu.atoms.len());
    let mut taper = CompSum::default();
    for &(x, w) in &nu.atoms {
        atoms.push((x - 1.0, w));
        let tw = w * psi(x);
        taper.add(tw);
        atoms.push((x, tw));
    }
    let taper_mass = taper.value();
    let measure = AtomicMeasure::new(atoms)?;
    Ok(CombinedMeasure {
        measure,
        taper_mass,
        degenerate: taper_mass == 0.0,
        x0,
    })
}

/// Independent cross-check: composite midpoint rule for
/// `int_a^b density(x) e^{-2 pi i x xi} dx`.
///
/// Error is O(resolution^-2 (1+|xi|)^2) for C^2 densities; a Nyquist-style
/// guard rejects resolutions that cannot resolve the requested frequency.
pub fn quadrature_oracle<F: Fn(f64) -> f64>(
    density: F,
    a: f64,
    b: f64,
    xi: f64,
    resolution: u64,
) -> Result<Complex64> {
    if resolution < 1 << 10 {
        return Err(Error::ResolutionTooLow {
            resolution,
            xi,
            length: b - a,
            needed: 1 << 10,
        });
    }
    let needed = (64.0 * (b - a) * xi.abs()).ceil() as u64;
    if resolution < needed {
        return Err(Error::ResolutionTooLow {
            resolution,
            xi,
            length: b - a,
            needed,
        });
    }
    let h = (b - a) / resolution as f64;
    let mut acc = CompSumC::default();
    for i in 0..resolution {
        let x = a + (i as f64 + 0.5) * h;
        let f = density(x);
        if f != 0.0 {
            acc.add(Complex64::from_polar(f, -2.0 * PI * x * xi));
        }
    }
    Ok(acc.value() * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;
    use rand::Rng;

    #[test]
    fn single_atom_phase_at_origin() {
        let m = AtomicMeasure::dirac(0.0);
        for &xi in &[0.0, 1.3, -7.7, 100.0] {
            let v = fourier_atomic(&m, xi).unwrap();
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn symmetric_pair_is_cosine() {
        let m = AtomicMeasure::new(vec![(-0.5, 0.5), (0.5, 0.5)]).unwrap();
        for i in 0..50 {
            let xi = -5.0 + i as f64 * 0.21;
            let v = fourier_atomic(&m, xi).unwrap();
            assert!((v.re - (PI * xi).cos()).abs() < 1e-14, "xi={xi}");
            assert!(v.im.abs() < 1e-14);
        }
    }

    #[test]
    fn empty_measure_errors() {
        let m = AtomicMeasure::new(vec![]).unwrap();
        assert!(matches!(fourier_atomic(&m, 1.0), Err(Error::EmptyMeasure)));
    }

    #[test]
    fn random_atoms_match_reversed_compensated_sum() {
        // independent oracle: summation in reversed order with compensated
        // accumulation
        let mut rng = SeedTree::new(17).child("measure-test").rng();
        let atoms: Vec<(f64, f64)> = (0..50)
            .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let m = AtomicMeasure::new(atoms.clone()).unwrap();
        let xi = 17.3;
        let fast = fourier_atomic(&m, xi).unwrap();
        let mut oracle = CompSumC::default();
        for &(x, w) in m.atoms.iter().rev() {
            oracle.add(Complex64::from_polar(w, -2.0 * PI * x * xi));
        }
        assert!((fast - oracle.value()).norm() < 1e-10);
    }

    #[test]
    fn transform_bounded_by_mass_at_random_frequencies() {
        let mut rng = SeedTree::new(3).child("bound").rng();
        let atoms: Vec<(f64, f64)> = (0..40)
            .map(|_| (rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>()))
            .collect();
        let m = AtomicMeasure::new(atoms).unwrap();
        let mass = m.total_mass();
        for _ in 0..1000 {
            let xi = (rng.gen::<f64>() - 0.5) * 2e4;
            let v = fourier_atomic(&m, xi).unwrap().norm();
            assert!(v <= mass * (1.0 + 1e-12));
        }
    }

    #[test]
    fn step_level0_is_unit_cell_indicator() {
        let mut cells = BTreeMap::new();
        cells.insert(0u64, 1.0);
        let d = StepDensity::new(0, cells).unwrap();
        assert!((fourier_step(&d, 0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for k in [1i64, 5, -3, 100] {
            assert!(
                fourier_step(&d, k).norm() < 1e-14,
                "chi_[0,1] should kill nonzero integers"
            );
        }
    }

    #[test]
    fn step_matches_riemann_oracle() {
        let mut rng = SeedTree::new(11).child("step").rng();
        let level = 3u32;
        let mut cells = BTreeMap::new();
        for a in 0..(1u64 << level) {
            cells.insert(a, rng.gen::<f64>());
        }
        let d = StepDensity::new(level, cells).unwrap();
        let k = 7i64;
        let exact = fourier_step(&d, k);
        let dd = d.clone();
        let oracle =
            quadrature_oracle(move |x| dd.density_at(x), 0.0, 1.0, k as f64, 1 << 20).unwrap();
        assert!((exact - oracle).norm() < 1e-9, "{exact} vs {oracle}");
    }

    #[test]
    fn product_of_two_pairs_matches_expansion() {
        let f1 = AtomicMeasure::new(vec![(0.0, 0.3), (0.4, 0.7)]).unwrap();
        let f2 = AtomicMeasure::new(vec![(0.1, 0.6), (0.25, 0.4)]).unwrap();
        let p = ProductMeasure::new(vec![f1, f2]).unwrap();
        let expanded = p.expand().unwrap();
        assert_eq!(expanded.atoms.len(), 4);
        for i in 0..40 {
            let xi = -9.0 + i as f64 * 0.47;
            let a = fourier_product(&p, xi).unwrap();
            let b = fourier_atomic(&expanded, xi).unwrap();
            assert!((a - b).norm() < 1e-12, "xi={xi}");
        }
        assert!((fourier_product(&p, 0.0).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ball_mass_counts_boundary_atoms() {
        let m = AtomicMeasure::new(vec![(0.3, 1.0)]).unwrap();
        assert_eq!(ball_mass_atomic(&m, 0.3, 0.01), 1.0);
        assert_eq!(ball_mass_atomic(&m, 0.29, 0.01), 1.0); // boundary counts
        assert_eq!(ball_mass_atomic(&m, 0.27, 0.01), 0.0);
    }

    #[test]
    fn ball_mass_step_full_cell() {
        let mut cells = BTreeMap::new();
        cells.insert(2u64, 0.25);
        cells.insert(3u64, 0.75);
        let d = StepDensity::new(2, cells).unwrap();
        // cell [1/2, 3/4] fully covered
        let got = ball_mass_step(&d, 0.625, 0.125);
        assert!((got - 0.25).abs() < 1e-15);
    }

    #[test]
    fn one_line_combine_two_atoms() {
        let nu = AtomicMeasure::new(vec![(0.25, 1.0), (0.75, 1.0)]).unwrap();
        let c = one_line_combine(&nu, 0.25).unwrap();
        let expect_pos = [-0.75, -0.25, 0.25, 0.75];
        assert_eq!(c.measure.atoms.len(), 4);
        for (atom, &pos) in c.measure.atoms.iter().zip(&expect_pos) {
            assert!((atom.0 - pos).abs() < 1e-15);
        }
        assert_eq!(c.measure.atoms[0].1, 1.0);
        assert_eq!(c.measure.atoms[1].1, 1.0);
        assert_eq!(c.measure.atoms[2].1, 0.0); // psi vanishes at x0
        let psi_34 = bump::phi0(0.75) * 0.25;
        assert!((c.measure.atoms[3].1 - psi_34).abs() < 1e-15);
        assert!(!c.degenerate);
        // mass identity: total = mass(nu) + int psi d nu
        let total = c.measure.total_mass();
        assert!((total - (nu.total_mass() + c.taper_mass)).abs() < 1e-12);
    }

    #[test]
    fn one_line_combine_degenerate_single_atom() {
        let nu = AtomicMeasure::dirac(0.5);
        let c = one_line_combine(&nu, 0.5).unwrap();
        assert!(c.degenerate);
        assert_eq!(c.measure.atoms.len(), 2);
        assert_eq!(c.measure.atoms[1].1, 0.0);
    }

    #[test]
    fn one_line_combine_rejects_foreign_x0() {
        let nu = AtomicMeasure::dirac(0.5);
        assert!(matches!(
            one_line_combine(&nu, 0.3),
            Err(Error::OutsideSupport { .. })
        ));
    }

    #[test]
    fn oracle_on_unit_indicator() {
        let v = quadrature_oracle(|_| 1.0, 0.0, 1.0, 0.0, 1 << 12).unwrap();
        assert!((v.re - 1.0).abs() < 1e-12 && v.im.abs() < 1e-12);
        let v3 = quadrature_oracle(|_| 1.0, 0.0, 1.0, 3.0, 1 << 12).unwrap();
        assert!(v3.norm() < 1e-6);
    }

    #[test]
    fn oracle_guards_resolution() {
        assert!(quadrature_oracle(|_| 1.0, 0.0, 1.0, 0.0, 512).is_err());
        assert!(quadrature_oracle(|_| 1.0, 0.0, 1.0, 1e4, 1 << 12).is_err());
    }
}
