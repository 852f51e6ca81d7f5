//! Even Lévy densities `sigma(y) = U(y)^2` and the quantities they generate.
//!
//! With no Gaussian part the characteristic function is
//! `C(s) = exp(-psi(s))`, `psi(s) = ∫ (1 - cos(s y)) sigma(y) dy`.
//! Every density here is even, so integrals run over `y > 0` and are doubled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::interp::MonotoneCubic;
use crate::linalg::symmetric_eigenvalues;
use crate::quadrature::{integrate, integrate_origin_singular, QuadratureOptions};
use crate::reference::special::{bessel_k01, bessel_k1};
use crate::scalar::{CompensatedSum, Real};

/// Inner cut for the series treatment of `1 - cos(s y)` is `ORIGIN_SCALE / s`.
const ORIGIN_SCALE: f64 = 1e-4;
/// Full periods integrated before an exact `1/y^2` tail takes over.
const POWER_TAIL_PERIODS: f64 = 64.0;
const MAX_CUTOFF_STEPS: usize = 2000;

/// Tolerances for the quadratures behind `psi` and the moments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances<F> {
    pub abs: F,
    pub rel: F,
}

impl<F: Real> Default for Tolerances<F> {
    fn default() -> Self {
        let floor = F::epsilon() * F::lit(100.0);
        Self { abs: F::lit(1e-12).max(floor), rel: F::lit(1e-10).max(floor) }
    }
}

/// Parametric or tabulated family of Lévy densities.
#[derive(Clone, Debug, PartialEq)]
pub enum LevyFamily<F> {
    /// `sigma(y) = a / (pi y^2)`; `psi(s) = a |s|`.
    CauchyTail { scale: F },
    /// `sigma(y) = b rho K1(rho |y|) / (pi |y|)`.
    BesselK1 { scale: F, rate: F },
    /// `sigma(y) = exp(-y^2) / (pi |y|^alpha)`, `2 <= alpha < 3`.
    AlphaFamily { alpha: F },
    /// Even, nonnegative samples; zero beyond the table.
    Tabulated(TabulatedDensity<F>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedDensity<F> {
    table: GridFunction<F>,
    interp: MonotoneCubic<F>,
}

impl<F: Real> TabulatedDensity<F> {
    pub fn new(table: GridFunction<F>) -> Result<Self> {
        let scale = table.values().iter().fold(F::one(), |m, v| m.max(v.abs()));
        let defect = table.evenness_defect();
        if defect > F::lit(1e-12) * scale {
            return Err(Error::InvalidInput(format!("tabulated density is not even (defect {defect})")));
        }
        if let Some(i) = table.values().iter().position(|&v| v < F::zero()) {
            return Err(Error::InvalidInput(format!(
                "tabulated density is negative at y = {}",
                table.x(i)
            )));
        }
        let interp = MonotoneCubic::new(&table);
        Ok(Self { table, interp })
    }

    pub fn table(&self) -> &GridFunction<F> {
        &self.table
    }
}

/// Behaviour of `sigma` beyond the integration cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Tail<F> {
    /// `sigma(y) = coef / y^2` for all `y > 0`.
    InversePower { coef: F },
    /// Tail mass beyond `cutoff` is below tolerance (or exactly zero).
    Negligible { cutoff: F },
}

/// Result of a `sigma`-moment query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Moment<F> {
    Finite(F),
    Divergent,
}

impl<F: Real> Moment<F> {
    pub fn finite(self) -> Option<F> {
        match self {
            Moment::Finite(v) => Some(v),
            Moment::Divergent => None,
        }
    }
}

/// An even Lévy density together with the quadrature tolerances used for it.
#[derive(Clone, Debug, PartialEq)]
pub struct LevyDensity<F> {
    family: LevyFamily<F>,
    tol: Tolerances<F>,
    tail: Tail<F>,
}

impl<F: Real> LevyDensity<F> {
    pub fn new(family: LevyFamily<F>) -> Result<Self> {
        Self::with_tolerances(family, Tolerances::default())
    }

    pub fn cauchy_tail(scale: F) -> Result<Self> {
        Self::new(LevyFamily::CauchyTail { scale })
    }

    pub fn bessel_k1(scale: F, rate: F) -> Result<Self> {
        Self::new(LevyFamily::BesselK1 { scale, rate })
    }

    pub fn alpha_family(alpha: F) -> Result<Self> {
        Self::new(LevyFamily::AlphaFamily { alpha })
    }

    pub fn tabulated(table: GridFunction<F>) -> Result<Self> {
        Self::new(LevyFamily::Tabulated(TabulatedDensity::new(table)?))
    }

    pub fn with_tolerances(family: LevyFamily<F>, tol: Tolerances<F>) -> Result<Self> {
        let positive = |v: F, name: &str| -> Result<()> {
            if v > F::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        match &family {
            LevyFamily::CauchyTail { scale } => positive(*scale, "Cauchy scale a")?,
            LevyFamily::BesselK1 { scale, rate } => {
                positive(*scale, "Bessel scale b")?;
                positive(*rate, "Bessel rate rho")?;
            }
            LevyFamily::AlphaFamily { alpha } => {
                if !(*alpha >= F::lit(2.0) && *alpha < F::lit(3.0)) {
                    return Err(Error::InvalidInput(format!("alpha must lie in [2, 3), got {alpha}")));
                }
            }
            LevyFamily::Tabulated(_) => {}
        }
        positive(tol.abs, "absolute tolerance")?;
        positive(tol.rel, "relative tolerance")?;
        let mut density = Self { family, tol, tail: Tail::Negligible { cutoff: F::zero() } };
        density.tail = density.classify_tail()?;
        Ok(density)
    }

    pub fn family(&self) -> &LevyFamily<F> {
        &self.family
    }

    pub fn tolerances(&self) -> Tolerances<F> {
        self.tol
    }

    /// `sigma(y)`; even in `y`. Infinite at `y = 0` for the singular families.
    pub fn sigma(&self, y: F) -> F {
        let y = y.abs();
        let pi = F::PI();
        match &self.family {
            LevyFamily::CauchyTail { scale } => *scale / (pi * y * y),
            LevyFamily::BesselK1 { scale, rate } => {
                if y == F::zero() {
                    return F::infinity();
                }
                let k1 = bessel_k1(*rate * y).unwrap_or(F::zero());
                *scale * *rate * k1 / (pi * y)
            }
            LevyFamily::AlphaFamily { alpha } => (-y * y).exp() / (pi * y.powf(*alpha)),
            LevyFamily::Tabulated(t) => t.interp.eval(y),
        }
    }

    /// Model function `U(y) = sqrt(sigma(y))`.
    pub fn model_function(&self, y: F) -> F {
        self.sigma(y).sqrt()
    }

    /// Exponent `beta` with `sigma(y) ~ y^-beta` as `y -> 0`.
    pub fn origin_exponent(&self) -> F {
        match &self.family {
            LevyFamily::CauchyTail { .. } | LevyFamily::BesselK1 { .. } => F::lit(2.0),
            LevyFamily::AlphaFamily { alpha } => *alpha,
            LevyFamily::Tabulated(_) => F::zero(),
        }
    }

    fn classify_tail(&self) -> Result<Tail<F>> {
        let target = self.tol.abs * F::lit(1e-2);
        let pi = F::PI();
        match &self.family {
            LevyFamily::CauchyTail { scale } => Ok(Tail::InversePower { coef: *scale / pi }),
            LevyFamily::Tabulated(t) => Ok(Tail::Negligible { cutoff: t.table.x_max() }),
            LevyFamily::AlphaFamily { alpha } => {
                // ∫_Y^∞ e^{-y²} y^{-α} dy / π <= e^{-Y²} / (2 π Y^{α+1})
                let bound = |y: F| (-y * y).exp() / (F::lit(2.0) * pi * y.powf(*alpha + F::one()));
                search_cutoff(F::one(), bound, target)
            }
            LevyFamily::BesselK1 { scale, rate } => {
                // ∫_Y^∞ b ρ K1(ρy)/(π y) dy <= b K0(ρY) / (π Y)
                let bound = |y: F| {
                    let k0 = bessel_k01(*rate * y).map(|(k0, _)| k0).unwrap_or(F::zero());
                    *scale * k0 / (pi * y)
                };
                search_cutoff(F::one() / *rate, bound, target)
            }
        }
    }

    fn quad_options(&self, panels: usize) -> QuadratureOptions<F> {
        QuadratureOptions {
            abs_tol: self.tol.abs / F::from_usize_lossy(panels.max(1)),
            rel_tol: self.tol.rel,
            max_subdivisions: 400,
        }
    }

    /// Lévy exponent `psi(s) = ∫ (1 - cos(s y)) sigma(y) dy`.
    pub fn levy_exponent(&self, s: F) -> Result<F> {
        if !s.is_finite() {
            return Err(Error::InvalidInput(format!("s must be finite, got {s}")));
        }
        let s = s.abs();
        if s == F::zero() {
            return Ok(F::zero());
        }
        let two = F::lit(2.0);
        let mut acc = CompensatedSum::new();

        let (upper, tail) = match self.tail {
            Tail::Negligible { cutoff } => (cutoff, None),
            Tail::InversePower { coef } => {
                (F::lit(2.0 * POWER_TAIL_PERIODS) * F::PI() / s, Some(coef))
            }
        };
        let eps = (F::lit(ORIGIN_SCALE) / s).min(upper);

        // (0, eps]: 1 - cos(sy) by its series; s*y <= 1e-4 so three terms are exact.
        let s2 = s * s;
        let series = |y: F| {
            let u = s2 * y * y;
            u * (F::lit(0.5) - u * (F::one() / F::lit(24.0) - u / F::lit(720.0))) * self.sigma(y)
        };
        let origin = integrate_origin_singular(
            series,
            eps,
            self.origin_exponent() - two,
            &self.quad_options(1),
        )
        .map_err(|e| annotate(e, acc.value()))?;
        acc.add(origin.value);

        // [eps, upper]: geometric panels up to half a period, then half-period panels.
        let half_period = F::PI() / s;
        let breaks = panel_breaks(eps, upper, half_period);
        let opts = self.quad_options(breaks.len());
        let integrand = |y: F| {
            let h = (F::lit(0.5) * s * y).sin();
            two * h * h * self.sigma(y)
        };
        for w in breaks.windows(2) {
            let r = integrate(integrand, w[0], w[1], &opts).map_err(|e| annotate(e, acc.value()))?;
            acc.add(r.value);
        }

        if let Some(coef) = tail {
            acc.add(coef * inverse_square_cosine_tail(s, upper));
        }
        Ok(two * acc.value())
    }

    /// `C(s)^r = exp(-r psi(s))`.
    pub fn characteristic(&self, s: F, r: F) -> Result<F> {
        if !(r > F::zero()) || !r.is_finite() {
            return Err(Error::InvalidInput(format!("power r must be positive, got {r}")));
        }
        Ok((-r * self.levy_exponent(s)?).exp())
    }

    /// `∫ y^(2p) sigma(y) dy`, the `2p`-th truncated moment.
    pub fn sigma_moment(&self, p: u32) -> Result<Moment<F>> {
        if p == 0 {
            return Err(Error::InvalidInput("moment order p must be >= 1".into()));
        }
        let two = F::lit(2.0);
        let power = F::from_u32(2 * p).expect("small integer");
        match &self.family {
            LevyFamily::CauchyTail { .. } => Ok(Moment::Divergent),
            LevyFamily::Tabulated(t) => {
                let full = self.truncated_moment(power, t.table.x_max())?;
                let half = self.truncated_moment(power, t.table.x_max() / two)?;
                if full == F::zero() {
                    return Ok(Moment::Finite(F::zero()));
                }
                if ((full - half) / full).abs() > F::lit(0.1) {
                    Ok(Moment::Divergent)
                } else {
                    Ok(Moment::Finite(full))
                }
            }
            LevyFamily::BesselK1 { .. } | LevyFamily::AlphaFamily { .. } => {
                self.open_moment(power).map(Moment::Finite)
            }
        }
    }

    fn truncated_moment(&self, power: F, upper: F) -> Result<F> {
        let f = |y: F| y.powf(power) * self.sigma(y);
        let opts = self.quad_options(1);
        let r = integrate_origin_singular(f, upper, self.origin_exponent() - power, &opts)?;
        Ok(F::lit(2.0) * r.value)
    }

    // Exponentially damped families: geometric panels until contributions vanish.
    fn open_moment(&self, power: F) -> Result<F> {
        let f = |y: F| y.powf(power) * self.sigma(y);
        let opts = self.quad_options(64);
        let mut acc = CompensatedSum::new();
        let first = integrate_origin_singular(f, F::one(), self.origin_exponent() - power, &opts)?;
        acc.add(first.value);
        let mut lo = F::one();
        let mut previous = F::infinity();
        for _ in 0..200 {
            let hi = lo * F::lit(2.0);
            let r = integrate(f, lo, hi, &opts)?;
            acc.add(r.value);
            if r.value < previous && r.value <= F::epsilon() * F::lit(0.01) * acc.value() {
                return Ok(F::lit(2.0) * acc.value());
            }
            previous = r.value;
            lo = hi;
        }
        Err(Error::Quadrature {
            lower: 0.0,
            upper: lo.to_f64_lossy(),
            partial: (F::lit(2.0) * acc.value()).to_f64_lossy(),
            error_estimate: f64::INFINITY,
        })
    }

    /// `∫ y^2/(1+y^2) sigma(y) dy`; finite for every admissible density.
    pub fn integrability_integral(&self) -> Result<F> {
        let f = |y: F| y * y / (F::one() + y * y) * self.sigma(y);
        let opts = self.quad_options(64);
        let two = F::lit(2.0);
        let mut acc = CompensatedSum::new();
        let inner_end = match self.tail {
            Tail::Negligible { cutoff } => cutoff.min(F::one()),
            Tail::InversePower { .. } => F::one(),
        };
        acc.add(integrate_origin_singular(f, inner_end, self.origin_exponent() - two, &opts)?.value);
        match self.tail {
            Tail::InversePower { coef } => {
                // coef ∫_1^∞ dy / (1 + y²) = coef π/4
                acc.add(coef * F::FRAC_PI_4());
            }
            Tail::Negligible { cutoff } => {
                let mut lo = inner_end;
                while lo < cutoff {
                    let hi = (lo * two).min(cutoff);
                    acc.add(integrate(f, lo, hi, &opts)?.value);
                    lo = hi;
                }
            }
        }
        Ok(two * acc.value())
    }
}

fn annotate(e: Error, partial_before: impl Real) -> Error {
    match e {
        Error::Quadrature { lower, upper, partial, error_estimate } => Error::Quadrature {
            lower,
            upper,
            partial: partial + partial_before.to_f64_lossy(),
            error_estimate,
        },
        other => other,
    }
}

fn search_cutoff<F: Real>(start: F, bound: impl Fn(F) -> F, target: F) -> Result<Tail<F>> {
    let mut y = start.max(F::lit(0.5));
    for _ in 0..MAX_CUTOFF_STEPS {
        if bound(y) < target {
            return Ok(Tail::Negligible { cutoff: y });
        }
        y = y * F::lit(1.05);
    }
    Err(Error::InvalidInput("could not bound the tail of sigma".into()))
}

fn panel_breaks<F: Real>(eps: F, upper: F, half_period: F) -> Vec<F> {
    let mut breaks = vec![eps];
    let mut y = eps;
    let geometric_end = half_period.min(upper);
    while y < geometric_end {
        y = (y * F::lit(4.0)).min(geometric_end);
        breaks.push(y);
    }
    while y < upper {
        y = (y + half_period).min(upper);
        breaks.push(y);
    }
    breaks
}

/// `∫_Y^∞ (1 - cos(s y)) / y^2 dy` in closed form via the sine integral.
fn inverse_square_cosine_tail<F: Real>(s: F, y: F) -> F {
    let u = s * y;
    // ∫_Y^∞ cos(sy)/y² dy = s [cos(u)/u - (π/2 - Si(u))]
    let cos_part = s * (u.cos() / u - sine_integral_complement(u));
    F::one() / y - cos_part
}

/// `pi/2 - Si(u)` for large `u` from the auxiliary asymptotic series.
fn sine_integral_complement<F: Real>(u: F) -> F {
    let inv2 = F::one() / (u * u);
    let mut f = F::zero();
    let mut g = F::zero();
    let mut term_f = F::one();
    let mut term_g = F::one();
    for k in 0..20usize {
        f = f + term_f;
        g = g + term_g;
        let k2 = F::from_usize_lossy(2 * k);
        // (2k+2)!/(2k)! and (2k+3)!/(2k+1)!
        term_f = -term_f * (k2 + F::one()) * (k2 + F::lit(2.0)) * inv2;
        term_g = -term_g * (k2 + F::lit(2.0)) * (k2 + F::lit(3.0)) * inv2;
        if term_f.abs() < F::epsilon() * f.abs() && term_g.abs() < F::epsilon() * g.abs() {
            break;
        }
    }
    f / u * u.cos() + g * inv2 * u.sin()
}

/// Samples of `C(s)` together with the power `r` applied when forming `C^r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicSamples<F> {
    pub s_values: Vec<F>,
    pub c_values: Vec<F>,
    pub power: F,
}

impl<F: Real> CharacteristicSamples<F> {
    pub fn new(s_values: Vec<F>, c_values: Vec<F>, power: F) -> Result<Self> {
        if s_values.len() != c_values.len() || s_values.is_empty() {
            return Err(Error::InvalidInput("s and C sample counts differ or are empty".into()));
        }
        if s_values.iter().any(|&s| s < F::zero()) || s_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("s samples must be ascending and nonnegative".into()));
        }
        if c_values.iter().any(|&c| !(c.abs() <= F::one() + F::lit(1e-12))) {
            return Err(Error::InvalidInput("characteristic samples must be bounded by 1".into()));
        }
        if !(power > F::zero()) {
            return Err(Error::InvalidInput(format!("power must be positive, got {power}")));
        }
        Ok(Self { s_values, c_values, power })
    }

    /// Samples `c` at every distinct pairwise distance of `probe`.
    pub fn for_probe(c: impl Fn(F) -> Result<F>, probe: &[F], power: F) -> Result<Self> {
        let mut s: Vec<F> = Vec::new();
        for &a in probe {
            for &b in probe {
                s.push((a - b).abs());
            }
        }
        s.sort_by(|a, b| a.partial_cmp(b).expect("finite probe"));
        s.dedup();
        let c_values = s.iter().map(|&v| c(v)).collect::<Result<Vec<_>>>()?;
        Self::new(s, c_values, power)
    }

    /// Same as [`CharacteristicSamples::for_probe`] with `c = exp(-psi)`.
    pub fn from_density(sigma: &LevyDensity<F>, probe: &[F], power: F) -> Result<Self> {
        Self::for_probe(|s| sigma.characteristic(s, F::one()), probe, power)
    }

    /// `C(s)^r` at a stored `|s|`.
    pub fn powered(&self, s: F) -> Result<F> {
        let s = s.abs();
        let tol = F::lit(1e-12) * F::one().max(s);
        let i = self
            .s_values
            .binary_search_by(|v| v.partial_cmp(&s).expect("finite"))
            .or_else(|i| {
                let near = |j: usize| j < self.s_values.len() && (self.s_values[j] - s).abs() <= tol;
                if near(i) {
                    Ok(i)
                } else if i > 0 && near(i - 1) {
                    Ok(i - 1)
                } else {
                    Err(())
                }
            })
            .map_err(|_| Error::InvalidInput(format!("characteristic not sampled at s = {s}")))?;
        Ok(self.c_values[i].powf(self.power))
    }
}

/// Smallest eigenvalue of `M_ij = C^r(p_i - p_j)`; a characteristic function
/// gives a positive semidefinite matrix for every probe set.
pub fn bochner_check<F: Real>(samples: &CharacteristicSamples<F>, probe: &[F]) -> Result<F> {
    let n = probe.len();
    if n == 0 || n > 16 {
        return Err(Error::InvalidInput(format!("probe must have 1..=16 points, got {n}")));
    }
    for i in 0..n {
        for j in 0..i {
            if probe[i] == probe[j] {
                return Err(Error::InvalidInput("probe points must be distinct".into()));
            }
        }
    }
    let mut m = vec![F::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = samples.powered(probe[i] - probe[j])?;
        }
    }
    Ok(symmetric_eigenvalues(&m, n)?[0])
}
