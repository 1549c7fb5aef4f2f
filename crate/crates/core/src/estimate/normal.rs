//! Normal distribution functions used by the samplers and the test ladder.
//!
//! `erfc` is computed from the Taylor series of `erf` near zero and the
//! Legendre continued fraction in the tails, which keeps it accurate to a
//! few ulp over the whole line. `normal_quantile` is the Acklam rational
//! approximation (relative error below 1.2e-9), plenty for sampling and far
//! cheaper than a fully refined inverse.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_SQRT_PI};

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.5 {
        1.0 - erf_series(x)
    } else if x > 27.0 {
        0.0 // below the smallest positive normal
    } else {
        erfc_continued_fraction(x)
    }
}

/// Taylor series for `erf`, used for |x| < 1.5 where it converges fast and
/// suffers no cancellation.
fn erf_series(x: f64) -> f64 {
    let x2 = x * x;
    let mut term = x;
    let mut sum = x;
    let mut n = 0u32;
    loop {
        n += 1;
        term *= -x2 / n as f64;
        let contribution = term / (2 * n + 1) as f64;
        sum += contribution;
        if contribution.abs() <= 1e-17 * sum.abs() + 1e-300 {
            break;
        }
    }
    FRAC_2_SQRT_PI * sum
}

/// Legendre continued fraction for `erfc`, evaluated with the modified
/// Lentz algorithm. Valid for x >= 1.5.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    // Convergents of x + (1/2)/(x + 1/(x + (3/2)/(x + 2/(x + ...)))) via
    // modified Lentz, seeded with the leading denominator x.
    let mut f: f64 = x;
    let mut c: f64 = x;
    let mut d: f64 = 0.0;
    let mut n = 0.5f64;
    for _ in 0..300 {
        d = x + n * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + n / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
        n += 0.5;
    }
    (-x * x).exp() / f * FRAC_2_SQRT_PI / 2.0
}

/// Standard normal cumulative distribution function.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

const FRAC_1_SQRT_2PI: f64 = 0.3989422804014327;

/// Fast normal CDF for the samplers (Zelen-Severo rational approximation,
/// absolute error below 7.5e-8). The truncated-normal inverse-CDF body uses
/// this; anything needing more accuracy goes through [`normal_cdf`].
#[inline]
pub(crate) fn normal_cdf_fast(x: f64) -> f64 {
    const P: f64 = 0.231_641_9;
    const B1: f64 = 0.319_381_530;
    const B2: f64 = -0.356_563_782;
    const B3: f64 = 1.781_477_937;
    const B4: f64 = -1.821_255_978;
    const B5: f64 = 1.330_274_429;
    let ax = x.abs();
    if ax > 37.0 {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    let t = 1.0 / (1.0 + P * ax);
    let phi = (-0.5 * ax * ax).exp() * FRAC_1_SQRT_2PI;
    let tail = phi * (t * (B1 + t * (B2 + t * (B3 + t * (B4 + t * B5)))));
    if x >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Standard normal upper tail probability.
#[inline]
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal quantile (Acklam's algorithm).
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p));
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

    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
