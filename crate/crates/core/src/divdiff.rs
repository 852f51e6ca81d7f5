//! Divided differences of `exp` at real nodes.
//!
//! `exp[x_0, ..., x_n]` is the integral of `exp` over the standard simplex
//! (Hermite–Genocchi), so it is positive and stays finite for coincident
//! nodes. Clusters of nodes with small spread use the Taylor expansion about
//! their mean; wider sets use the recursion, which is then well conditioned.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Spread below which a node cluster is expanded about its mean.
const TAYLOR_SPREAD: f64 = 1.0;
const TAYLOR_TERMS: usize = 40;
const MAX_RELATIVE_ERROR: f64 = 1e-6;

/// Value and relative error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<F> {
    pub value: F,
    pub rel_error: F,
}

/// `exp[x_0, ..., x_n]`; errors if the estimated relative error exceeds 1e-6
/// (or `1000 eps` for low-precision scalars).
pub fn exp_divided_difference<F: Real>(nodes: &[F]) -> Result<F> {
    let est = exp_divided_difference_estimate(nodes)?;
    let limit = F::lit(MAX_RELATIVE_ERROR).max(F::epsilon() * F::lit(1e3));
    if est.rel_error > limit {
        // Wide clusters lose accuracy in the recursion; retry with the series.
        let series = taylor_about_mean(&sorted(nodes), 4 * TAYLOR_TERMS);
        if series.rel_error <= limit {
            return Ok(series.value);
        }
        return Err(Error::Cancellation {
            estimate: est.rel_error.to_f64_lossy(),
            nodes: nodes.iter().map(|x| x.to_f64_lossy()).collect(),
        });
    }
    Ok(est.value)
}

pub fn exp_divided_difference_estimate<F: Real>(nodes: &[F]) -> Result<Estimate<F>> {
    if nodes.is_empty() || nodes.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("divided difference needs finite nodes".into()));
    }
    Ok(recurse(&sorted(nodes)))
}

fn sorted<F: Real>(nodes: &[F]) -> Vec<F> {
    let mut x = nodes.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
    x
}

fn recurse<F: Real>(x: &[F]) -> Estimate<F> {
    let n = x.len();
    let spread = x[n - 1] - x[0];
    if n == 1 {
        return Estimate { value: x[0].exp(), rel_error: F::epsilon() };
    }
    if spread <= F::lit(TAYLOR_SPREAD) {
        return taylor_about_mean(x, TAYLOR_TERMS);
    }
    let hi = recurse(&x[1..]);
    let lo = recurse(&x[..n - 1]);
    let diff = hi.value - lo.value;
    let value = diff / spread;
    let abs_err = hi.value.abs() * hi.rel_error
        + lo.value.abs() * lo.rel_error
        + F::epsilon() * (hi.value.abs() + lo.value.abs());
    let rel_error = if value == F::zero() {
        if abs_err == F::zero() {
            F::zero()
        } else {
            F::infinity()
        }
    } else {
        abs_err / diff.abs() + F::epsilon()
    };
    Estimate { value, rel_error }
}

/// `e^c * sum_j h_j(x - c) / (j + n)!` with `h_j` the complete homogeneous
/// symmetric polynomials of the shifted nodes.
fn taylor_about_mean<F: Real>(x: &[F], terms: usize) -> Estimate<F> {
    let n = x.len() - 1;
    let c = x.iter().fold(F::zero(), |s, &v| s + v) / F::from_usize_lossy(x.len());
    let mut h = vec![F::zero(); terms];
    h[0] = F::one();
    for &xi in x {
        let y = xi - c;
        for j in 1..terms {
            h[j] = h[j] + y * h[j - 1];
        }
    }
    let mut factorial = F::one();
    for k in 2..=n {
        factorial = factorial * F::from_usize_lossy(k);
    }
    let mut sum = F::zero();
    let mut magnitude = F::zero();
    let mut last = F::zero();
    for (j, hj) in h.iter().enumerate() {
        if j > 0 {
            factorial = factorial * F::from_usize_lossy(j + n);
        }
        last = *hj / factorial;
        sum = sum + last;
        magnitude = magnitude + last.abs();
    }
    let ec = c.exp();
    let rel_error = if sum == F::zero() {
        F::infinity()
    } else {
        (F::epsilon() * F::from_usize_lossy(n + 4) * magnitude + F::lit(10.0) * last.abs()) / sum.abs()
    };
    Estimate { value: ec * sum, rel_error }
}
