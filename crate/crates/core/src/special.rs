//! Scalar special functions used across the crate.
//!
//! The Gaussian tail function and its inverse, the regularized lower
//! incomplete gamma function (chi-square CDF), and a couple of summation
//! helpers that keep reductions deterministic.

use statrs::function::{erf, gamma};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Gaussian tail probability `Q(x) = P(Z > x)` for standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Inverse of [`q_function`] on the open interval `(0, 1)`.
///
/// Starts from the `erfc` inverse and polishes with a bracketed Newton
/// iteration on `Q(x) - p`. Returns `+inf` for `p <= 0`, `-inf` for `p >= 1`
/// and NaN for NaN input.
pub fn q_inverse(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return f64::INFINITY;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let mut x = SQRT_2 * erf::erfc_inv(2.0 * p);
    // Q is strictly decreasing: keep a bracket [lo, hi] with Q(lo) >= p >= Q(hi).
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    for _ in 0..50 {
        let r = q_function(x) - p;
        if r == 0.0 {
            return x;
        }
        if r > 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let d = normal_pdf(x);
        let mut next = if d > 0.0 { x + r / d } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

/// Natural log of the gamma function.
pub fn ln_gamma(x: f64) -> f64 {
    gamma::ln_gamma(x)
}

/// Regularized lower incomplete gamma `P(a, x)`; zero for `x <= 0`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else {
        gamma::gamma_lr(a, x)
    }
}

/// `ln` of the Gamma(shape, 1) density at `t > 0`.
pub fn ln_gamma_density(shape: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * t.ln() - t - ln_gamma(shape)
}

/// `ln(exp(a) + exp(b))` without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Pairwise (cascade) summation. The order of additions depends only on the
/// slice length, which keeps parallel reductions bit-reproducible.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_reference_values() {
        assert_eq!(q_function(0.0), 0.5);
        // Q(1.2815515655446004) = 0.1
        assert!((q_function(1.281_551_565_544_600_4) - 0.1).abs() < 1e-15);
        // deep tail, relative accuracy
        let q6 = 9.865_876_450_376_98e-10;
        assert!(((q_function(6.0) - q6) / q6).abs() < 1e-12);
    }

    #[test]
    fn q_inverse_roundtrip() {
        for &p in &[1e-12, 1e-6, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.999, 1.0 - 1e-9] {
            let x = q_inverse(p);
            assert!((q_function(x) - p).abs() <= 1e-14 * p.max(1e-3), "p={p}");
        }
        assert_eq!(q_inverse(0.5), 0.0);
        assert!(q_inverse(0.0).is_infinite());
    }

    #[test]
    fn q_inverse_monotone() {
        let mut prev = f64::INFINITY;
        for i in 1..1000 {
            let x = q_inverse(i as f64 / 1000.0);
            assert!(x < prev);
            prev = x;
        }
    }

    #[test]
    fn gamma_p_is_exponential_cdf_for_unit_shape() {
        for &x in &[0.1, 1.0, 3.0, 10.0] {
            assert!((gamma_p(1.0, x) - (1.0 - (-x as f64).exp())).abs() < 1e-14);
        }
        assert_eq!(gamma_p(3.0, 0.0), 0.0);
    }

    #[test]
    fn log_add_exp_matches_direct() {
        let v = log_add_exp(1.0_f64.ln(), 3.0_f64.ln());
        assert!((v - 4.0_f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 2.0), 2.0);
        assert!(log_add_exp(1000.0, 1000.0).is_finite());
    }

    #[test]
    fn pairwise_sum_exact_on_integers() {
        let xs: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 500_500.0);
    }
}
