//! Gaussian special functions: complementary error function, its scaled
//! variant, tail probabilities, the Mills ratio and the quantile function.
//!
//! The `erfc` rational approximations come from FreeBSD's `s_erf.c`
//! (via Go's `math/erf.go`) and carry this notice:
//!
//! ```text
//! Copyright (C) 1993 by Sun Microsystems, Inc. All rights reserved.
//!
//! Developed at SunPro, a Sun Microsystems, Inc. business.
//! Permission to use, copy, modify, and distribute this
//! software is freely granted, provided that this notice
//! is preserved.
//! ```
//!
//! The tail region is evaluated in the scaled form `erfcx(x) = exp(x²) erfc(x)`
//! so that tail probabilities and Mills ratios keep full relative precision
//! where `1 - Φ` would cancel.

#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

const ERX: f64 = 8.45062911510467529297e-01;

// erf on [0, 0.84375]
const PP0: f64 = 1.28379167095512558561e-01;
const PP1: f64 = -3.25042107247001499370e-01;
const PP2: f64 = -2.84817495755985104766e-02;
const PP3: f64 = -5.77027029648944159157e-03;
const PP4: f64 = -2.37630166566501626084e-05;
const QQ1: f64 = 3.97917223959155352819e-01;
const QQ2: f64 = 6.50222499887672944485e-02;
const QQ3: f64 = 5.08130628187576562776e-03;
const QQ4: f64 = 1.32494738004321644526e-04;
const QQ5: f64 = -3.96022827877536812320e-06;

// erf on [0.84375, 1.25]
const PA0: f64 = -2.36211856075265944077e-03;
const PA1: f64 = 4.14856118683748331666e-01;
const PA2: f64 = -3.72207876035701323847e-01;
const PA3: f64 = 3.18346619901161753674e-01;
const PA4: f64 = -1.10894694282396677476e-01;
const PA5: f64 = 3.54783043256182359371e-02;
const PA6: f64 = -2.16637559486879084300e-03;
const QA1: f64 = 1.06420880400844228286e-01;
const QA2: f64 = 5.40397917702171048937e-01;
const QA3: f64 = 7.18286544141962662868e-02;
const QA4: f64 = 1.26171219808761642112e-01;
const QA5: f64 = 1.36370839120290507362e-02;
const QA6: f64 = 1.19844998467991074170e-02;

// erfc on [1.25, 1/0.35]
const RA0: f64 = -9.86494403484714822705e-03;
const RA1: f64 = -6.93858572707181764372e-01;
const RA2: f64 = -1.05586262253232909814e+01;
const RA3: f64 = -6.23753324503260060396e+01;
const RA4: f64 = -1.62396669462573470355e+02;
const RA5: f64 = -1.84605092906711035994e+02;
const RA6: f64 = -8.12874355063065934246e+01;
const RA7: f64 = -9.81432934416914548592e+00;
const SA1: f64 = 1.96512716674392571292e+01;
const SA2: f64 = 1.37657754143519042600e+02;
const SA3: f64 = 4.34565877475229228821e+02;
const SA4: f64 = 6.45387271733267880336e+02;
const SA5: f64 = 4.29008140027567833386e+02;
const SA6: f64 = 1.08635005541779435134e+02;
const SA7: f64 = 6.57024977031928170135e+00;
const SA8: f64 = -6.04244152148580987438e-02;

// erfc on [1/0.35, inf)
const RB0: f64 = -9.86494292470009928597e-03;
const RB1: f64 = -7.99283237680523006574e-01;
const RB2: f64 = -1.77579549177547519889e+01;
const RB3: f64 = -1.60636384855821916062e+02;
const RB4: f64 = -6.37566443368389627722e+02;
const RB5: f64 = -1.02509513161107724954e+03;
const RB6: f64 = -4.83519191608651397019e+02;
const SB1: f64 = 3.03380607434824582924e+01;
const SB2: f64 = 3.25792512996573918826e+02;
const SB3: f64 = 1.53672958608443695994e+03;
const SB4: f64 = 3.19985821950859553908e+03;
const SB5: f64 = 2.55305040643316442583e+03;
const SB6: f64 = 4.74528541206955367215e+02;
const SB7: f64 = -2.24409524465858183362e+01;

const TINY: f64 = 1.3877787807814457e-17; // 2^-56

/// `1 / sqrt(2π)`
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Exponent `g` with `erfc(x) = exp(-x² + g(x)) / x` for `x ≥ 1.25`.
fn tail_exponent(x: f64) -> f64 {
    let s = 1.0 / (x * x);
    let (r, q) = if x < 1.0 / 0.35 {
        (
            RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
            1.0 + s
                * (SA1
                    + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
        )
    } else {
        (
            RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
            1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
        )
    };
    -0.5625 + r / q
}

/// erfc on `[0, 1.25)`, where no scaling is needed.
fn erfc_small(x: f64) -> f64 {
    debug_assert!((0.0..1.25).contains(&x));
    if x < 0.84375 {
        if x < TINY {
            return 1.0 - x;
        }
        let z = x * x;
        let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
        let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
        let y = r / s;
        if x < 0.25 {
            1.0 - (x + x * y)
        } else {
            0.5 - (x * y + (x - 0.5))
        }
    } else {
        let s = x - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        1.0 - ERX - p / q
    }
}

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < 1.25 {
        return erfc_small(x);
    }
    if x >= 28.0 {
        return 0.0;
    }
    // exp(-x²) split so the large square does not lose bits
    let hi = f64::from_bits(x.to_bits() & 0xffff_ffff_0000_0000);
    (-hi * hi).exp() * ((hi - x) * (hi + x) + tail_exponent(x)).exp() / x
}

/// Scaled complementary error function `exp(x²)·erfc(x)`.
///
/// Finite and relatively accurate for all `x ≥ 0`; overflows to `+inf`
/// for `x ≲ -26.6`.
pub fn erfcx(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 * (x * x).exp() - erfcx(-x);
    }
    if x < 1.25 {
        return (x * x).exp() * erfc_small(x);
    }
    if x.is_infinite() {
        return 0.0;
    }
    tail_exponent(x).exp() / x
}

/// Standard normal density.
pub fn norm_pdf(a: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * a * a).exp()
}

/// Standard normal CDF `Φ(a)`.
pub fn norm_cdf(a: f64) -> f64 {
    0.5 * erfc(-a * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Φ(a)`, computed without cancellation.
pub fn norm_sf(a: f64) -> f64 {
    0.5 * erfc(a * FRAC_1_SQRT_2)
}

/// Mills ratio `φ(a) / (1 - Φ(a))`, the hazard of the standard normal.
pub fn mills_ratio(a: f64) -> f64 {
    if a >= 0.0 {
        // φ(a)/Q(a) = sqrt(2/π) / erfcx(a/√2)
        (2.0 / PI).sqrt() / erfcx(a * FRAC_1_SQRT_2)
    } else {
        norm_pdf(a) / norm_sf(a)
    }
}

const ACKLAM_A: [f64; 6] = [
    -3.969683028665376e+01,
    2.209460984245205e+02,
    -2.759285104469687e+02,
    1.383577518672690e+02,
    -3.066479806614716e+01,
    2.506628277459239e+00,
];
const ACKLAM_B: [f64; 5] = [
    -5.447609879822406e+01,
    1.615858368580409e+02,
    -1.556989798598866e+02,
    6.680131188771972e+01,
    -1.328068155288572e+01,
];
const ACKLAM_C: [f64; 6] = [
    -7.784894002430293e-03,
    -3.223964580411365e-01,
    -2.400758277161838e+00,
    -2.549732539343734e+00,
    4.374664141464968e+00,
    2.938163982698783e+00,
];
const ACKLAM_D: [f64; 4] = [
    7.784695709041462e-03,
    3.224671290700398e-01,
    2.445134137142996e+00,
    3.754408661907416e+00,
];

/// Lower-half rational approximation, `p ∈ (0, 0.5]`.
fn quantile_rational(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        let c = &ACKLAM_C;
        let d = &ACKLAM_D;
        (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
            / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        let a = &ACKLAM_A;
        let b = &ACKLAM_B;
        (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    }
}

/// Standard normal quantile `Φ⁻¹(p)` for `p ∈ (0, 1)`.
///
/// Rational starting point followed by one Newton step on the CDF. Returns
/// NaN outside `(0, 1)`.
pub fn norm_quantile(p: f64) -> f64 {
    if !(p > 0.0 && p < 1.0) {
        return f64::NAN;
    }
    // work in the lower half so that Φ(x) - p does not cancel
    let (lower, sign) = if p > 0.5 { (1.0 - p, -1.0) } else { (p, 1.0) };
    let mut x = quantile_rational(lower);
    let resid = 0.5 * erfc(-x / SQRT_2) - lower;
    x -= resid / norm_pdf(x);
    sign * x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn erfc_reference_values() {
        // reference values from arbitrary-precision evaluation
        let cases = [
            (0.0, 1.0),
            (0.1, 0.887_537_083_981_715_1),
            (0.5, 0.479_500_122_186_953_46),
            (1.0, 0.157_299_207_050_285_13),
            (2.0, 0.004_677_734_981_047_265_8),
            (3.0, 2.209_049_699_858_544e-5),
            (5.0, 1.537_459_794_428_034_8e-12),
            (6.0, 2.151_973_671_249_891_3e-17),
            (10.0, 2.088_487_583_762_544_8e-45),
            (20.0, 5.395_865_611_607_901e-176),
        ];
        for (x, want) in cases {
            assert!(rel(erfc(x), want) < 1e-14, "erfc({x}) = {} vs {want}", erfc(x));
        }
        assert!(rel(erfc(-1.0), 1.842_700_792_949_714_9) < 1e-15);
        assert_eq!(erfc(f64::INFINITY), 0.0);
        assert_eq!(erfc(f64::NEG_INFINITY), 2.0);
        assert!(erfc(f64::NAN).is_nan());
    }

    #[test]
    fn erfcx_matches_unscaled_where_representable() {
        for i in 0..400 {
            let x = -3.0 + i as f64 * 0.06;
            let direct = (x * x).exp() * erfc(x);
            assert!(rel(erfcx(x), direct) < 1e-13, "x = {x}");
        }
        // far tail: asymptotic 1/(x√π)·(1 - 1/(2x²) + 3/(4x⁴))
        let x = 1e4;
        let asym = 1.0 / (x * PI.sqrt()) * (1.0 - 0.5 / (x * x));
        assert!(rel(erfcx(x), asym) < 1e-14);
        assert_eq!(erfcx(f64::INFINITY), 0.0);
    }

    #[test]
    fn tail_probability_is_relatively_accurate() {
        // Q(10) = 7.619853024160526e-24
        assert!(rel(norm_sf(10.0), 7.619_853_024_160_527e-24) < 1e-13);
        assert!(rel(norm_cdf(-10.0), 7.619_853_024_160_527e-24) < 1e-13);
        assert_eq!(norm_sf(0.0), 0.5);
    }

    #[test]
    fn mills_ratio_is_continuous_at_zero() {
        let left = mills_ratio(-1e-12);
        let right = mills_ratio(1e-12);
        assert!((left - right).abs() < 1e-11);
        assert!(rel(mills_ratio(0.0), 2.0 * INV_SQRT_2PI) < 1e-15);
        // large-argument expansion M(a) ≈ a + 1/a - 2/a³
        let a = 50.0;
        assert!(rel(mills_ratio(a), a + 1.0 / a - 2.0 / a.powi(3)) < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = norm_quantile(p);
            assert!((norm_cdf(x) - p).abs() < 1e-14, "p = {p}");
        }
        for p in [1e-300, 1e-20, 1e-10, 1.0 - 1e-10] {
            let x = norm_quantile(p);
            assert!(rel(norm_cdf(x), p) < 1e-12, "p = {p}");
        }
        assert!(norm_quantile(0.0).is_nan());
        assert!(norm_quantile(1.0).is_nan());
        assert_eq!(norm_quantile(0.5), 0.0);
    }
}
