//! Special functions: modified Bessel functions of the second kind and the
//! standard normal distribution.
//!
//! `K0`/`K1` switch between the power series (x <= 2) and Steed's continued
//! fraction (x > 2). Arbitrary real order uses the integral representation
//! `K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt` evaluated with the
//! trapezoidal rule, which converges geometrically for this integrand.

use statrs::function::erf::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Argument at which K0/K1 switch from the series to the continued fraction.
pub const BESSEL_SWITCHOVER: f64 = 2.0;

const SERIES_EPS: f64 = 1e-17;
const CF_EPS: f64 = 1e-16;
const CF_MAXIT: usize = 10_000;

/// Returns `(K0(x), K1(x))` scaled by `exp(x)`.
fn k01_scaled(x: f64) -> (f64, f64) {
    debug_assert!(x > 0.0);
    if x <= BESSEL_SWITCHOVER {
        let (k0, k1) = k01_series(x);
        let e = x.exp();
        (k0 * e, k1 * e)
    } else {
        k01_continued_fraction_scaled(x)
    }
}

fn k01_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let ln_half = (0.5 * x).ln();

    // I0, I1 and the harmonic-weighted tails.
    let mut term0 = 1.0; // y^k / (k!)^2
    let mut term1 = 1.0; // y^k / (k! (k+1)!)
    let mut i0 = 0.0;
    let mut i1 = 0.0;
    let mut tail0 = 0.0;
    let mut tail1 = 0.0;
    let mut harmonic = 0.0; // H_k
    for k in 0..200 {
        let kf = k as f64;
        if k > 0 {
            term0 *= y / (kf * kf);
            term1 *= y / (kf * (kf + 1.0));
            harmonic += 1.0 / kf;
        }
        i0 += term0;
        i1 += term1;
        tail0 += harmonic * term0;
        // psi(k+1) + psi(k+2) = -2 gamma + 2 H_k + 1/(k+1)
        tail1 += (-2.0 * EULER_GAMMA + 2.0 * harmonic + 1.0 / (kf + 1.0)) * term1;
        if term0 < SERIES_EPS * i0 && term1 < SERIES_EPS * i1 && k > 2 {
            break;
        }
    }
    let i1 = 0.5 * x * i1;
    let k0 = -(ln_half + EULER_GAMMA) * i0 + tail0;
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * tail1;
    (k0, k1)
}

/// Steed's method for the second continued fraction (order 0 and 1).
fn k01_continued_fraction_scaled(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..CF_MAXIT {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < CF_EPS {
            break;
        }
    }
    let h = a1 * h;
    let k0 = (PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

/// Modified Bessel function of the second kind, order 0.
pub fn bessel_k0(x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k0 requires x > 0");
    if x <= BESSEL_SWITCHOVER {
        k01_series(x).0
    } else {
        k01_continued_fraction_scaled(x).0 * (-x).exp()
    }
}

/// Modified Bessel function of the second kind, order 1.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k1 requires x > 0");
    if x <= BESSEL_SWITCHOVER {
        k01_series(x).1
    } else {
        k01_continued_fraction_scaled(x).1 * (-x).exp()
    }
}

/// `exp(x) * K0(x)`.
pub fn bessel_k0_scaled(x: f64) -> f64 {
    assert!(x > 0.0);
    k01_scaled(x).0
}

/// `exp(x) * K1(x)`.
pub fn bessel_k1_scaled(x: f64) -> f64 {
    assert!(x > 0.0);
    k01_scaled(x).1
}

/// `exp(x) * K_nu(x)` for real order `nu` and `x > 0`.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled requires x > 0");
    let nu = nu.abs();
    // Integrand exp(-x (cosh t - 1)) cosh(nu t) is even, analytic and decays
    // double exponentially; the trapezoidal rule is spectrally accurate.
    let step: f64 = 0.02;
    let mut sum = 0.5; // t = 0 contributes exp(0) * cosh(0) with weight 1/2
    let mut t = step;
    loop {
        let log_term = -x * (t.cosh() - 1.0) + log_cosh(nu * t);
        let term = log_term.exp();
        sum += term;
        if log_term < -46.0 && t > 1.0 {
            break;
        }
        t += step;
        if t > 200.0 {
            break;
        }
    }
    sum * step
}

/// `ln K_nu(x)`, stable for large arguments.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    bessel_k_scaled(nu, x).ln() - x
}

/// `K_nu(x)` for real order.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    ln_bessel_k(nu, x).exp()
}

fn log_cosh(z: f64) -> f64 {
    let a = z.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(x)`.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Quantile of the standard normal law.
pub fn norm_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "norm_quantile requires p in (0,1)");
    statrs::function::erf::erfc_inv(2.0 * p) * -std::f64::consts::SQRT_2
}

/// `E (X - a)_+` for `X ~ N(mu, sigma^2)`.
pub fn normal_stop_loss(mu: f64, sigma: f64, a: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - a).max(0.0);
    }
    let z = (a - mu) / sigma;
    sigma * norm_pdf(z) - (a - mu) * norm_sf(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values (Abramowitz & Stegun table 9.8 / high-precision).
    const K0_REF: [(f64, f64); 5] = [
        (0.1, 2.427_069_024_702_017),
        (1.0, 0.421_024_438_240_708_3),
        (2.0, 0.113_893_872_749_533_4),
        (5.0, 0.003_691_098_334_042_594),
        (10.0, 1.778_006_231_616_918e-5),
    ];
    const K1_REF: [(f64, f64); 5] = [
        (0.1, 9.853_844_780_870_606),
        (1.0, 0.601_907_230_197_234_6),
        (2.0, 0.139_865_881_816_522_4),
        (5.0, 0.004_044_613_445_452_164),
        (10.0, 1.864_877_345_382_558e-5),
    ];

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn k0_k1_reference_values() {
        for (x, v) in K0_REF {
            assert!(rel(bessel_k0(x), v) < 1e-12, "K0({x}) = {}", bessel_k0(x));
        }
        for (x, v) in K1_REF {
            assert!(rel(bessel_k1(x), v) < 1e-12, "K1({x}) = {}", bessel_k1(x));
        }
    }

    #[test]
    fn continuous_across_switchover() {
        let below = k01_series(2.0);
        let above = k01_continued_fraction_scaled(2.0);
        let e = (-2.0f64).exp();
        assert!(rel(above.0 * e, below.0) < 1e-13);
        assert!(rel(above.1 * e, below.1) < 1e-13);
    }

    #[test]
    fn general_order_matches_k0_k1_and_half_integer() {
        for &x in &[1e-3, 0.05, 0.7, 2.0, 3.5, 20.0, 200.0] {
            assert!(rel(bessel_k_scaled(0.0, x), bessel_k0_scaled(x)) < 1e-11, "x={x}");
            assert!(rel(bessel_k_scaled(1.0, x), bessel_k1_scaled(x)) < 1e-11, "x={x}");
            let half = (PI / (2.0 * x)).sqrt();
            assert!(rel(bessel_k_scaled(0.5, x), half) < 1e-11);
            assert!(rel(bessel_k_scaled(-0.5, x), half) < 1e-11);
        }
    }

    #[test]
    fn small_argument_asymptotics() {
        let z = 1e-6;
        assert!(rel(bessel_k1(z) * z, 1.0) < 1e-6);
    }

    #[test]
    fn normal_helpers() {
        assert!((norm_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((norm_cdf(1.96) - 0.975_002_104_851_779_5).abs() < 1e-11);
        assert!((norm_quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-9);
        // sigma phi(0) at a = 0
        assert!((normal_stop_loss(0.0, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-14);
    }
}
