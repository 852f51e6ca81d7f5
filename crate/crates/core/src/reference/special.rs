//! Special functions: modified Bessel function `K_1` and the Gamma function.

use crate::error::{Error, Result};
use crate::scalar::Real;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;
const MAX_TERMS: usize = 10_000;

/// Modified Bessel function of the second kind, order one.
///
/// Temme's series for `x < 2`, Steed's continued fraction (CF2) for
/// `x >= 2`. Both branches evaluate `K_0` alongside `K_1`.
pub fn bessel_k1<F: Real>(x: F) -> Result<F> {
    bessel_k01(x).map(|(_, k1)| k1)
}

/// `(K_0(x), K_1(x))` for `x > 0`.
pub fn bessel_k01<F: Real>(x: F) -> Result<(F, F)> {
    if !(x > F::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("K1 requires finite x > 0, got {x}")));
    }
    if x < F::lit(2.0) {
        Ok(temme_series(x))
    } else {
        Ok(steed_cf2(x))
    }
}

fn temme_series<F: Real>(x: F) -> (F, F) {
    let eps = F::epsilon();
    let half = F::lit(0.5);
    let x2 = half * x;
    let mut ff = -F::lit(EULER_GAMMA) - x2.ln();
    let mut sum = ff;
    let mut p = half;
    let mut q = half;
    let mut c = F::one();
    let d = x2 * x2;
    let mut sum1 = p;
    for i in 1..MAX_TERMS {
        let fi = F::from_usize_lossy(i);
        ff = (fi * ff + p + q) / (fi * fi);
        c = c * d / fi;
        p = p / fi;
        q = q / fi;
        let del = c * ff;
        sum = sum + del;
        sum1 = sum1 + c * (p - fi * ff);
        if del.abs() < sum.abs() * eps {
            break;
        }
    }
    (sum, sum1 * F::lit(2.0) / x)
}

fn steed_cf2<F: Real>(x: F) -> (F, F) {
    let eps = F::epsilon();
    let two = F::lit(2.0);
    let a1 = F::lit(0.25);
    let mut b = two * (F::one() + x);
    let mut d = F::one() / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = F::zero();
    let mut q2 = F::one();
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = F::one() + q * delh;
    for i in 1..MAX_TERMS {
        let fi = F::from_usize_lossy(i);
        a = a - two * fi;
        c = -a * c / (fi + F::one());
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q = q + c * qnew;
        b = b + two;
        d = F::one() / (b + a * d);
        delh = (b * d - F::one()) * delh;
        h = h + delh;
        let dels = q * delh;
        s = s + dels;
        if (dels / s).abs() < eps {
            break;
        }
    }
    h = a1 * h;
    let k0 = (F::PI() / (two * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + F::lit(0.5) - h) / x;
    (k0, k1)
}

const LANCZOS_G: f64 = 7.0;
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

/// Gamma function via the Lanczos approximation (g = 7, n = 9), with the
/// reflection formula below 1/2.
pub fn gamma<F: Real>(x: F) -> F {
    let half = F::lit(0.5);
    if x < half {
        let pi = F::PI();
        return pi / ((pi * x).sin() * gamma(F::one() - x));
    }
    let x = x - F::one();
    let mut acc = F::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + F::lit(c) / (x + F::from_usize_lossy(i));
    }
    let t = x + F::lit(LANCZOS_G) + half;
    (F::lit(2.0) * F::PI()).sqrt() * t.powf(x + half) * (-t).exp() * acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // High-precision reference values (40-digit arithmetic).
    const K1_TABLE: [(f64, f64); 11] = [
        (1e-6, 999_999.999_992_784_278_963_2),
        (1e-4, 9_999.999_508_686_404_957_253),
        (0.5, 1.656_441_120_003_300_893_696),
        (1.0, 0.601_907_230_197_234_574_737_5),
        (1.9999, 0.139_884_265_831_691_019_172_4),
        (2.0, 0.139_865_881_816_522_427_284_6),
        (2.0001, 0.139_847_500_468_811_433_718_7),
        (5.0, 0.004_044_613_445_452_164_208_365),
        (10.0, 1.864_877_345_382_558_459_682e-5),
        (30.0, 2.167_732_001_891_549_424_867e-14),
        (50.0, 3.444_102_226_717_555_612_592e-23),
    ];

    #[test]
    fn k1_matches_reference_table() {
        for &(x, want) in &K1_TABLE {
            let got = bessel_k1(x).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-12);
        }
    }

    #[test]
    fn k1_small_argument_limit() {
        let x = 1e-4_f64;
        assert!((x * bessel_k1(x).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn k1_large_argument_asymptote() {
        let x = 30.0_f64;
        let lead = bessel_k1(x).unwrap() * x.exp() * (2.0 * x / std::f64::consts::PI).sqrt();
        // 1 + 3/(8x) - 15/(128x^2) + 105/(1024x^3) - ...; the leading term alone is off by 1.2e-2.
        let series = 1.0 + 3.0 / (8.0 * x) - 15.0 / (128.0 * x * x) + 105.0 / (1024.0 * x * x * x);
        assert!((lead - series).abs() < 1e-6, "{lead}");
        assert!((lead - 1.0).abs() < 1.3e-2);
    }

    #[test]
    fn k1_rejects_nonpositive() {
        assert!(bessel_k1(0.0_f64).is_err());
        assert!(bessel_k1(-1.0_f64).is_err());
    }

    #[test]
    fn branch_seam_is_continuous() {
        let below = bessel_k1(2.0_f64 - 1e-12).unwrap();
        let above = bessel_k1(2.0_f64).unwrap();
        assert_relative_eq!(below, above, max_relative = 1e-11);
    }

    #[test]
    fn gamma_values() {
        assert_relative_eq!(gamma(0.5_f64), std::f64::consts::PI.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(gamma(5.0_f64), 24.0, max_relative = 1e-14);
        assert_relative_eq!(gamma(1.25_f64), 0.906_402_477_055_477_0, max_relative = 1e-13);
        assert_relative_eq!(gamma(0.25_f64), 3.625_609_908_221_908_3, max_relative = 1e-13);
        assert_relative_eq!(gamma(9.5_f64), 119_292.461_994_609_007, max_relative = 1e-13);
    }

    #[test]
    fn k1_single_precision() {
        assert_relative_eq!(bessel_k1(1.0_f32).unwrap(), 0.601_907_23, max_relative = 1e-5);
    }
}
