//! Small numeric helpers: compensated summation and least-squares lines.

use num_complex::Complex64;

/// Neumaier compensated accumulator. Products of many near-unit phases
/// amplify roundoff, so transforms over large atom sets accumulate here.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompSum {
    sum: f64,
    comp: f64,
}

impl CompSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated complex accumulator (real and imaginary parts separately).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompSumC {
    re: CompSum,
    im: CompSum,
}

impl CompSumC {
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

/// Ordinary least squares fit y = a + b x.
/// Returns (intercept, slope, slope standard error, rms residual).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (xs.len().max(3) - 2) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();
    let rms = (ss_res / n).sqrt();
    (intercept, slope, stderr, rms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_beats_naive() {
        // 1 + 1e-16 added 10^7 times: naive drops the tail entirely
        let mut c = CompSum::default();
        c.add(1.0);
        for _ in 0..10_000_000 {
            c.add(1e-16);
        }
        let exact = 1.0 + 1e-9;
        assert!((c.value() - exact).abs() < 1e-15);
    }

    #[test]
    fn exact_line_has_zero_stderr() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 2.0 * x).collect();
        let (a, b, se, rms) = fit_line(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12);
        assert!((b + 2.0).abs() < 1e-12);
        assert!(se < 1e-12);
        assert!(rms < 1e-12);
    }
}
