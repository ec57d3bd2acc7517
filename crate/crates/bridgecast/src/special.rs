//! Small special-function helpers.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.5;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function (Lanczos approximation, reflection for
/// x < 0.5). Accurate to ~1e-13 relative error on the positive axis.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = LANCZOS[0];
        for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + LANCZOS_G;
        0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Log of the beta function B(a, b).
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Density of the Beta(a, b) distribution at `x` in (0, 1).
pub fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    ((a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_beta(a, b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-13);
        assert!((ln_gamma(2.0)).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - 0.5 * PI.ln()).abs() < 1e-12);
        // Gamma(0.1) = 9.513507698668731...
        assert!((ln_gamma(0.1) - 9.513_507_698_668_731f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn beta_pdf_integrates_to_one() {
        // The (0.1, 0.1) density has x^{-0.9} endpoint singularities that
        // defeat direct quadrature, so substitute u = x^a on the left half:
        // integral of p(x) dx over [0, 1/2] becomes a smooth integrand
        // (1/a) (1 - u^{1/a})^{b-1} / B(a,b) on [0, 2^{-a}]; the density is
        // symmetric, so the total is twice that.
        let (a, b) = (0.1, 0.1);
        let hi = 0.5f64.powf(a);
        let n = 200_000;
        let norm = (-ln_beta(a, b)).exp();
        let mut left = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) / n as f64 * hi;
            left += (1.0 / a) * (1.0 - u.powf(1.0 / a)).powf(b - 1.0) * norm * hi / n as f64;
        }
        let integral = 2.0 * left;
        assert!((integral - 1.0).abs() < 1e-6, "integral {integral}");
    }

    #[test]
    fn beta_pdf_symmetry() {
        for &x in &[0.05, 0.2, 0.4] {
            let a = beta_pdf(x, 0.1, 0.1);
            let b = beta_pdf(1.0 - x, 0.1, 0.1);
            assert!((a - b).abs() < 1e-12 * a.abs());
        }
    }
}
