//! Time-ordered spectral correlators and the `chi2` diagnostic.
//!
//! With `Q_kl = <k|x|l>` and shifted energies `E_k`, the window integral
//! `W = ∫_{-T}^{T} X(t) dt` has
//!
//! ```text
//! <W^2> = sum_k Q_0k^2 J(E_k),            J = 2 tau^2 exp[0, 0, -tau E]
//! <W^4> = 24 sum_{k,l,m} Q_0k Q_kl Q_lm Q_m0 I(E_k, E_l, E_m),
//!                                         I = tau^4 exp[0, 0, -tau E_k, -tau E_l, -tau E_m]
//! ```
//!
//! where `tau = 2T` and `exp[...]` is a divided difference of `exp`. The
//! powers of `tau` cancel against the `(1 + 2T)^3 / (2T)^4` rescaling.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::divdiff::exp_divided_difference;
use crate::error::{Error, Result};
use crate::grid::fmt17;
use crate::schrodinger::MatrixElements;
use crate::scalar::{CompensatedSum, Real};

/// Rescaling convention for `chi2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Options<F> {
    /// Characteristic energy `E` in `(1 + 2ET)^3 / (2ET)^4`; `None` means 1.
    pub energy_scale: Option<F>,
    /// States dropped for the truncation diagnostic.
    pub truncation_step: usize,
    /// Largest accepted relative change under truncation.
    pub convergence_tol: F,
    /// Number of `(k, l, m)` contributions kept in the breakdown.
    pub breakdown_terms: usize,
}

impl<F: Real> Default for Chi2Options<F> {
    fn default() -> Self {
        Self { energy_scale: None, truncation_step: 4, convergence_tol: F::lit(1e-3), breakdown_terms: 12 }
    }
}

impl<F: Real> Chi2Options<F> {
    fn scale(&self) -> F {
        self.energy_scale.unwrap_or(F::one())
    }
}

fn check_energies<F: Real>(q: &MatrixElements<F>) -> Result<()> {
    for (k, &e) in q.energies().iter().enumerate().skip(1) {
        if !(e > F::zero()) {
            return Err(Error::NonPositiveEnergy { state: k, energy: e.to_f64_lossy() });
        }
    }
    Ok(())
}

/// `<X(t) X(u)> = sum_{n>=1} Q_0n^2 exp(-E_n |t - u|)`.
pub fn two_point<F: Real>(q: &MatrixElements<F>, lag: F) -> Result<F> {
    if !(lag >= F::zero()) {
        return Err(Error::InvalidInput(format!("lag must be nonnegative, got {lag}")));
    }
    let e = q.energies();
    Ok((1..q.size()).map(|n| q.get(0, n) * q.get(0, n) * (-e[n] * lag).exp()).collect::<CompensatedSum<F>>().value())
}

/// `<X(0)^4> = sum_{k,l,m} Q_0k Q_kl Q_lm Q_m0` over all retained states.
pub fn sharp_moment4<F: Real>(q: &MatrixElements<F>) -> F {
    four_path_sum(q, 0, |_, _, _| F::one())
}

/// `sum_{k,l,m >= first} Q_0k Q_kl Q_lm Q_m0 * weight(k, l, m)`, accumulated
/// in ascending `(k, l, m)` order.
fn four_path_sum<F: Real>(q: &MatrixElements<F>, first: usize, weight: impl Fn(usize, usize, usize) -> F) -> F {
    let size = q.size();
    let mut acc = CompensatedSum::new();
    for k in first..size {
        let a = q.get(0, k);
        if a == F::zero() {
            continue;
        }
        for l in first..size {
            let b = a * q.get(k, l);
            if b == F::zero() {
                continue;
            }
            for m in first..size {
                let term = b * q.get(l, m) * q.get(m, 0);
                if term != F::zero() {
                    acc.add(term * weight(k, l, m));
                }
            }
        }
    }
    acc.value()
}

/// Sharp-time truncated fourth moment:
/// `sum_{k,l,m>=1} Q_0k Q_kl Q_lm Q_m0 - 2 (sum_{k>=1} Q_0k^2)^2`.
pub fn chi2_small<F: Real>(q: &MatrixElements<F>) -> F {
    let m2 = second_moment(q);
    four_path_sum(q, 1, |_, _, _| F::one()) - F::lit(2.0) * m2 * m2
}

fn second_moment<F: Real>(q: &MatrixElements<F>) -> F {
    (1..q.size()).map(|k| q.get(0, k) * q.get(0, k)).collect::<CompensatedSum<F>>().value()
}

/// Large-`T` limit:
/// `24 sum Q_0k Q_kl Q_lm Q_m0 / (E_k E_l E_m) - 24 sum Q_0k^2 Q_0m^2 / (E_k E_m^2)`.
pub fn chi2_large<F: Real>(q: &MatrixElements<F>) -> Result<F> {
    check_energies(q)?;
    let e = q.energies();
    let a = four_path_sum(q, 1, |k, l, m| F::one() / (e[k] * e[l] * e[m]));
    let mut b = CompensatedSum::new();
    for k in 1..q.size() {
        for m in 1..q.size() {
            let t = q.get(0, k) * q.get(0, k) * q.get(0, m) * q.get(0, m);
            if t != F::zero() {
                b.add(t / (e[k] * e[m] * e[m]));
            }
        }
    }
    Ok(F::lit(24.0) * (a - b.value()))
}

/// `I(E_k, E_l, E_m; T)`: the ordered four-time integral over
/// `T >= t >= u >= v >= w >= -T` of `exp(-E_k (t-u) - E_l (u-v) - E_m (v-w))`.
pub fn ordered_integral<F: Real>(ek: F, el: F, em: F, t: F) -> Result<F> {
    let tau = F::lit(2.0) * t;
    let d = exp_divided_difference(&[F::zero(), F::zero(), -tau * ek, -tau * el, -tau * em])?;
    Ok(tau.powi(4) * d)
}

/// `J(E; T) = 2 [2T/E - (1 - exp(-2ET))/E^2]`, the two-point window integral.
pub fn window_two_point<F: Real>(e: F, t: F) -> Result<F> {
    let tau = F::lit(2.0) * t;
    Ok(F::lit(2.0) * tau * tau * exp_divided_difference(&[F::zero(), F::zero(), -tau * e])?)
}

/// Exact finite-`T` value
/// `(1+2T)^3/(2T)^4 [24 sum_{k,m>=1,l>=0} Q_0k Q_kl Q_lm Q_m0 I - 3 (sum Q_0k^2 J)^2]`.
pub fn chi2_exact<F: Real>(q: &MatrixElements<F>, t: F) -> Result<F> {
    chi2_exact_scaled(q, t, F::one())
}

fn chi2_exact_scaled<F: Real>(q: &MatrixElements<F>, t: F, scale: F) -> Result<F> {
    if !(t > F::zero()) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("T must be positive and finite, got {t}")));
    }
    check_energies(q)?;
    let e = q.energies();
    let size = q.size();
    let tau = F::lit(2.0) * t;
    let x: Vec<F> = e.iter().map(|&v| -tau * v).collect();
    let zero = F::zero();

    let mut four = CompensatedSum::new();
    for k in 1..size {
        let a = q.get(0, k);
        if a == zero {
            continue;
        }
        for l in 0..size {
            let b = a * q.get(k, l);
            if b == zero {
                continue;
            }
            for m in 1..size {
                let term = b * q.get(l, m) * q.get(m, 0);
                if term != zero {
                    four.add(term * exp_divided_difference(&[zero, zero, x[k], x[l], x[m]])?);
                }
            }
        }
    }
    let mut two = CompensatedSum::new();
    for k in 1..size {
        let a = q.get(0, k) * q.get(0, k);
        if a != zero {
            two.add(a * exp_divided_difference(&[zero, zero, x[k]])?);
        }
    }
    // tau^4 [24 S5 - 3 (2 S3)^2] times (1 + s tau)^3 / (s tau)^4
    let bracket = F::lit(24.0) * four.value() - F::lit(12.0) * two.value() * two.value();
    let s4 = scale * scale * scale * scale;
    Ok((F::one() + scale * tau).powi(3) / s4 * bracket)
}

/// Largest `|G(t + shift, u + shift) - G(t, u)|` over the given time pairs.
pub fn stationarity_check<F: Real>(q: &MatrixElements<F>, shift: F, pairs: &[(F, F)]) -> Result<F> {
    let g = |t: F, u: F| two_point(q, (t - u).abs());
    let mut worst = F::zero();
    for &(t, u) in pairs {
        let d = (g(t + shift, u + shift)? - g(t, u)?).abs();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// One `(k, l, m)` contribution to a four-path sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term<F> {
    pub k: usize,
    pub l: usize,
    pub m: usize,
    pub value: F,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<F> {
    pub t: F,
    pub chi2: F,
    /// Value with the last `truncation_step` states dropped.
    pub truncated: F,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Report<F> {
    pub chi2_small: F,
    pub chi2_large: F,
    pub curve: Vec<CurvePoint<F>>,
    pub truncation_k: usize,
    pub comparison_k: usize,
    pub chi2_small_truncated: F,
    pub chi2_large_truncated: F,
    pub small_converged: bool,
    pub large_converged: bool,
    pub convergence_tol: F,
    pub energy_scale: F,
    /// `<X^2>` and `<X^4>` from the spectral sums.
    pub second_moment: F,
    pub sharp_moment4: F,
    /// Leading terms of the large-`T` four-path sum, by magnitude.
    pub term_breakdown: Vec<Term<F>>,
    /// The subtracted `24 sum Q_0k^2 Q_0m^2 / (E_k E_m^2)` part of `chi2_large`.
    pub large_subtraction: F,
}

impl<F: Real> Chi2Report<F> {
    pub fn all_converged(&self) -> bool {
        self.small_converged && self.large_converged && self.curve.iter().all(|p| p.converged)
    }

    /// `T,chi2`.
    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "T,chi2")?;
        for p in &self.curve {
            writeln!(out, "{},{}", fmt17(p.t), fmt17(p.chi2))?;
        }
        Ok(())
    }
}

/// Small-`T`, large-`T` and exact curve with truncation diagnostics.
pub fn chi2_report<F: Real>(q: &MatrixElements<F>, times: &[F], opts: &Chi2Options<F>) -> Result<Chi2Report<F>> {
    check_energies(q)?;
    let size = q.size();
    let comparison_k = size.saturating_sub(opts.truncation_step).max(2).min(size);
    let coarse = q.truncated(comparison_k);
    let s = opts.scale();
    let s4 = s * s * s * s;

    let m2 = second_moment(q);
    // Values whose natural size is (sum Q_0k^2)^2 are compared relative to the
    // larger of the two truncations, with a floor at that size times 1e-8.
    let noise = F::lit(1e-8) * m2 * m2;
    let close = |a: F, b: F, floor: F| (a - b).abs() <= opts.convergence_tol * a.abs().max(b.abs()).max(floor);

    let small = chi2_small(q) / s4;
    let small_t = chi2_small(&coarse) / s4;
    let large = chi2_large(q)? / s;
    let large_t = chi2_large(&coarse)? / s;
    let e = q.energies();

    let mut curve = Vec::with_capacity(times.len());
    for &t in times {
        let v = chi2_exact_scaled(q, t, s)?;
        let vt = chi2_exact_scaled(&coarse, t, s)?;
        let floor = noise * (F::one() + s * F::lit(2.0) * t).powi(3) / s4;
        curve.push(CurvePoint { t, chi2: v, truncated: vt, converged: close(v, vt, floor) });
    }

    let mut terms = Vec::new();
    for k in 1..size {
        for l in 1..size {
            for m in 1..size {
                let v = q.get(0, k) * q.get(k, l) * q.get(l, m) * q.get(m, 0);
                if v != F::zero() {
                    terms.push(Term { k, l, m, value: F::lit(24.0) * v / (e[k] * e[l] * e[m]) / s });
                }
            }
        }
    }
    terms.sort_by(|a, b| {
        b.value.abs().partial_cmp(&a.value.abs()).expect("finite terms").then((a.k, a.l, a.m).cmp(&(b.k, b.l, b.m)))
    });
    terms.truncate(opts.breakdown_terms);

    let mut sub = CompensatedSum::new();
    for k in 1..size {
        for m in 1..size {
            let t = q.get(0, k) * q.get(0, k) * q.get(0, m) * q.get(0, m);
            if t != F::zero() {
                sub.add(t / (e[k] * e[m] * e[m]));
            }
        }
    }

    Ok(Chi2Report {
        chi2_small: small,
        chi2_large: large,
        curve,
        truncation_k: size,
        comparison_k,
        chi2_small_truncated: small_t,
        chi2_large_truncated: large_t,
        small_converged: close(small, small_t, noise / s4),
        large_converged: close(large, large_t, noise / (e[1] * e[1] * e[1] * s)),
        convergence_tol: opts.convergence_tol,
        energy_scale: s,
        second_moment: m2,
        sharp_moment4: sharp_moment4(q),
        term_breakdown: terms,
        large_subtraction: F::lit(24.0) * sub.value() / s,
    })
}
