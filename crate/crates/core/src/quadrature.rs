//! Adaptive Gauss–Kronrod (10/21) quadrature.
//!
//! Global adaptive bisection: the panel with the largest error estimate is
//! split until the summed estimate meets `max(abs_tol, rel_tol * |I|)`.
//! Error estimates follow the QUADPACK rescaling of `|K21 - G10|`.

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_938_386_730,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureOptions<F> {
    pub abs_tol: F,
    pub rel_tol: F,
    pub max_subdivisions: usize,
}

impl<F: Real> Default for QuadratureOptions<F> {
    fn default() -> Self {
        let eps = F::epsilon();
        Self {
            abs_tol: F::lit(1e-12).max(eps * F::lit(100.0)),
            rel_tol: F::lit(1e-10).max(eps * F::lit(100.0)),
            max_subdivisions: 400,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult<F> {
    pub value: F,
    pub error: F,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
struct Panel<F> {
    a: F,
    b: F,
    value: F,
    error: F,
}

fn kronrod21<F: Real, G: Fn(F) -> F>(f: &G, a: F, b: F) -> Panel<F> {
    let half = F::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let f_center = f(center);

    let mut res_kronrod = f_center * F::lit(WGK[10]);
    let mut res_gauss = F::zero();
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [F::zero(); 10];
    let mut fv2 = [F::zero(); 10];

    for j in 0..10 {
        let dx = half_len * F::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = F::lit(WGK[j]);
        res_kronrod = res_kronrod + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_gauss = res_gauss + F::lit(WG[j / 2]) * (f1 + f2);
        }
    }

    let mean = res_kronrod * half;
    let mut res_asc = F::lit(WGK[10]) * (f_center - mean).abs();
    for j in 0..10 {
        res_asc = res_asc + F::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let abs_half = half_len.abs();
    let value = res_kronrod * half_len;
    let res_abs = res_abs * abs_half;
    let res_asc = res_asc * abs_half;
    let mut err = ((res_kronrod - res_gauss) * half_len).abs();
    if res_asc != F::zero() && err != F::zero() {
        let scale = (F::lit(200.0) * err / res_asc).powf(F::lit(1.5));
        err = if scale < F::one() { res_asc * scale } else { res_asc };
    }
    let eps = F::epsilon();
    if res_abs > F::min_positive_value() / (F::lit(50.0) * eps) {
        err = err.max(F::lit(50.0) * eps * res_abs);
    }
    Panel { a, b, value, error: err }
}

/// Integrates `f` over `[a, b]` with global adaptive bisection.
pub fn integrate<F, G>(f: G, a: F, b: F, opts: &QuadratureOptions<F>) -> Result<QuadratureResult<F>>
where
    F: Real,
    G: Fn(F) -> F,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidInput("integration bounds must be finite".into()));
    }
    if a == b {
        return Ok(QuadratureResult { value: F::zero(), error: F::zero(), evaluations: 0 });
    }

    let mut panels = vec![kronrod21(&f, a, b)];
    let mut evaluations = 21;
    loop {
        let total: F = panels.iter().map(|p| p.value).collect::<CompensatedSum<F>>().value();
        let err: F = panels.iter().map(|p| p.error).fold(F::zero(), |acc, e| acc + e);
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            return Ok(QuadratureResult { value: total, error: err, evaluations });
        }
        if panels.len() >= opts.max_subdivisions {
            return Err(Error::Quadrature {
                lower: a.to_f64_lossy(),
                upper: b.to_f64_lossy(),
                partial: total.to_f64_lossy(),
                error_estimate: err.to_f64_lossy(),
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, F::neg_infinity()), |(bi, be), (i, p)| if p.error > be { (i, p.error) } else { (bi, be) });
        let p = panels.swap_remove(worst);
        let mid = F::lit(0.5) * (p.a + p.b);
        if mid <= p.a.min(p.b) || mid >= p.a.max(p.b) {
            // Panel collapsed to adjacent floating-point values.
            return Err(Error::Quadrature {
                lower: a.to_f64_lossy(),
                upper: b.to_f64_lossy(),
                partial: total.to_f64_lossy(),
                error_estimate: err.to_f64_lossy(),
            });
        }
        panels.push(kronrod21(&f, p.a, mid));
        panels.push(kronrod21(&f, mid, p.b));
        evaluations += 42;
    }
}

/// Integrates `f` over `(0, upper]` where `f(y) ~ y^(-exponent)` as `y -> 0`
/// with `exponent < 1`.
///
/// The substitution `y = upper * u^m`, `m = 1 / (1 - exponent)`, removes the
/// algebraic endpoint singularity before adaptive integration.
pub fn integrate_origin_singular<F, G>(
    f: G,
    upper: F,
    exponent: F,
    opts: &QuadratureOptions<F>,
) -> Result<QuadratureResult<F>>
where
    F: Real,
    G: Fn(F) -> F,
{
    if exponent >= F::one() {
        return Err(Error::InvalidInput(format!(
            "non-integrable origin singularity y^-{exponent}"
        )));
    }
    let m = if exponent > F::zero() { F::one() / (F::one() - exponent) } else { F::one() };
    let g = |u: F| {
        if u <= F::zero() {
            return F::zero();
        }
        let um1 = u.powf(m - F::one());
        let y = upper * um1 * u;
        f(y) * upper * m * um1
    };
    integrate(g, F::zero(), F::one(), opts)
}
