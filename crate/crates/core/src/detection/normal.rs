//! Standard-normal upper tail and its inverse.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// Gaussian Q-function, the upper-tail probability of a standard normal.
pub fn q_func(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse of [`q_func`] on (0, 1).
///
/// For `p > 0.5` the computation runs on `1 - p`, which is exact in that
/// range, and the result is negated.
pub fn q_inv(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityDomain(p));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-upper_tail_quantile(1.0 - p));
    }
    Ok(upper_tail_quantile(p))
}

/// Solves Q(x) = p for p in (0, 0.5), returning x > 0.
///
/// Starts from a rational approximation and polishes with Newton steps on
/// ln Q, falling back to bisection whenever a step leaves the bracket.
fn upper_tail_quantile(p: f64) -> f64 {
    let target = p.ln();
    let mut lo = 0.0_f64;
    let mut hi = 40.0_f64;
    let mut x = initial_guess(p).clamp(lo, hi);
    for _ in 0..100 {
        let q = q_func(x);
        let g = q.ln() - target;
        if g == 0.0 {
            return x;
        }
        // ln Q is decreasing: g > 0 means x is still too small.
        if g > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = -std_normal_pdf(x) / q;
        let mut next = x - g / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1.0) {
            return next;
        }
        x = next;
    }
    x
}

// Acklam's rational approximation of the lower-tail quantile, |rel err| < 1.2e-9.
fn initial_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let lower = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    };
    -lower
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_func_symmetry() {
        assert_eq!(q_func(0.0), 0.5);
        for x in [0.1, 1.0, 3.0, 6.5] {
            assert!((q_func(x) + q_func(-x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn q_func_decreasing() {
        // below about -8.3 the upper tail rounds to exactly 1.0
        let mut prev = q_func(-8.0);
        for i in -79..=100 {
            let q = q_func(i as f64 / 10.0);
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn q_inv_basics() {
        assert_eq!(q_inv(0.5).unwrap(), 0.0);
        assert!((q_inv(q_func(2.3)).unwrap() - 2.3).abs() < 1e-9);
        assert!((q_inv(q_func(-1.7)).unwrap() + 1.7).abs() < 1e-9);
        for bad in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(matches!(q_inv(bad), Err(Error::ProbabilityDomain(_))));
        }
    }

    #[test]
    fn q_inv_round_trip_over_range() {
        for k in 1..300 {
            let p = 10f64.powf(-(k as f64) / 10.0);
            for target in [p, 1.0 - p] {
                if !(target > 0.0 && target < 1.0) {
                    continue;
                }
                let x = q_inv(target).unwrap();
                assert!((q_func(x) - target).abs() <= 1e-10, "p={target} x={x}");
                assert!(((q_func(x) - target) / target).abs() < 1e-12, "p={target}");
            }
        }
    }

    #[test]
    fn q_inv_extreme_tail() {
        let x = q_inv(1e-300).unwrap();
        assert!(x > 37.0 && x < 37.1);
        assert!(((q_func(x) - 1e-300) / 1e-300).abs() < 1e-10);
    }
}
