//! Uniform symmetric grids and sampled functions.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{compensated_sum, CompensatedSum, Real};

/// Smallest admissible grid.
pub const MIN_POINTS: usize = 9;

/// Symmetric grid `x_i = (i - (n-1)/2) * dx` on `[-half_width, half_width]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<F> {
    pub half_width: F,
    pub points: usize,
}

impl<F: Real> GridSpec<F> {
    pub fn new(half_width: F, points: usize) -> Result<Self> {
        if !(half_width > F::zero()) || !half_width.is_finite() {
            return Err(Error::InvalidInput(format!("grid half-width must be positive, got {half_width}")));
        }
        validate_points(points)?;
        Ok(Self { half_width, points })
    }

    pub fn dx(&self) -> F {
        F::lit(2.0) * self.half_width / F::from_usize_lossy(self.points - 1)
    }

    pub fn x_min(&self) -> F {
        -self.half_width
    }

    /// Same extent, spacing halved.
    pub fn refined(&self) -> Self {
        Self { half_width: self.half_width, points: 2 * self.points - 1 }
    }
}

fn validate_points(points: usize) -> Result<()> {
    if points < MIN_POINTS || points % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "grid needs an odd number of points >= {MIN_POINTS}, got {points}"
        )));
    }
    Ok(())
}

/// Real function sampled on a symmetric uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<F> {
    x_min: F,
    dx: F,
    values: Vec<F>,
}

impl<F: Real> GridFunction<F> {
    pub fn new(x_min: F, dx: F, values: Vec<F>) -> Result<Self> {
        validate_points(values.len())?;
        if !(dx > F::zero()) || !dx.is_finite() {
            return Err(Error::InvalidInput(format!("grid spacing must be positive, got {dx}")));
        }
        let c = F::from_usize_lossy((values.len() - 1) / 2);
        let expected = -c * dx;
        if (x_min - expected).abs() > F::lit(1e-9) * dx.max(expected.abs()) {
            return Err(Error::InvalidInput(format!(
                "grid is not symmetric about 0: x_min = {x_min}, expected {expected}"
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at grid index {i}")));
        }
        Ok(Self { x_min: expected, dx, values })
    }

    pub fn from_fn(spec: &GridSpec<F>, f: impl Fn(F) -> F) -> Result<Self> {
        let dx = spec.dx();
        let c = (spec.points - 1) / 2;
        let values = (0..spec.points)
            .map(|i| f((F::from_usize_lossy(i) - F::from_usize_lossy(c)) * dx))
            .collect();
        Self::new(spec.x_min(), dx, values)
    }

    /// Same grid geometry, new values.
    pub fn with_values(&self, values: Vec<F>) -> Result<Self> {
        if values.len() != self.values.len() {
            return Err(Error::InvalidInput("value count does not match grid".into()));
        }
        Self::new(self.x_min, self.dx, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dx(&self) -> F {
        self.dx
    }

    pub fn x_min(&self) -> F {
        self.x_min
    }

    pub fn x_max(&self) -> F {
        -self.x_min
    }

    pub fn center(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    /// Index of the point at `-x_i`.
    pub fn mirror(&self, i: usize) -> usize {
        self.values.len() - 1 - i
    }

    /// Grid coordinate; exactly antisymmetric under `mirror`.
    pub fn x(&self, i: usize) -> F {
        (F::from_usize_lossy(i) - F::from_usize_lossy(self.center())) * self.dx
    }

    pub fn xs(&self) -> Vec<F> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn into_values(self) -> Vec<F> {
        self.values
    }

    pub fn spec(&self) -> GridSpec<F> {
        GridSpec { half_width: self.x_max(), points: self.len() }
    }

    pub fn max_value(&self) -> F {
        self.values.iter().fold(F::neg_infinity(), |m, &v| m.max(v))
    }

    /// Trapezoidal integral over the grid.
    pub fn trapezoid(&self) -> F {
        trapezoid(&self.values, self.dx)
    }

    /// Trapezoidal `∫ a b dx` on this grid, summed in mirror pairs so that an
    /// odd integrand gives exactly zero.
    pub fn trapezoid_of(&self, a: &[F], b: &[F]) -> F {
        self.mirror_trapezoid(|i| a[i] * b[i])
    }

    /// Trapezoidal integral of `f(i)` summed in mirror pairs.
    pub fn mirror_trapezoid(&self, f: impl Fn(usize) -> F) -> F {
        let n = self.len();
        let c = self.center();
        let mut acc = CompensatedSum::new();
        for i in 0..c {
            let w = if i == 0 { F::lit(0.5) } else { F::one() };
            acc.add(w * (f(i) + f(n - 1 - i)));
        }
        acc.add(f(c));
        acc.value() * self.dx()
    }

    /// Largest `|f(x) - f(-x)|`.
    pub fn evenness_defect(&self) -> F {
        (0..self.center())
            .map(|i| (self.values[i] - self.values[self.mirror(i)]).abs())
            .fold(F::zero(), F::max)
    }

    pub fn is_even_within(&self, tol: F) -> bool {
        self.evenness_defect() <= tol
    }

    /// Restriction to the symmetric index window `[center - half, center + half]`.
    pub fn restrict_symmetric(&self, half: usize) -> Result<Self> {
        let c = self.center();
        if half > c {
            return Err(Error::InvalidInput("restriction wider than grid".into()));
        }
        let values = self.values[c - half..=c + half].to_vec();
        Self::new(-F::from_usize_lossy(half) * self.dx, self.dx, values)
    }

    /// Piecewise-linear interpolation; `None` outside the grid.
    pub fn interpolate_linear(&self, x: F) -> Option<F> {
        let t = (x - self.x_min) / self.dx;
        if !(t >= F::zero()) || t > F::from_usize_lossy(self.len() - 1) {
            return None;
        }
        let i = t.floor().to_usize()?.min(self.len() - 2);
        let w = t - F::from_usize_lossy(i);
        Some(self.values[i] * (F::one() - w) + self.values[i + 1] * w)
    }

    /// Writes `x,value` CSV with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", fmt17(self.x(i)), fmt17(*v))?;
        }
        Ok(())
    }

    /// Reads the `x,value` CSV written by [`GridFunction::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(e.to_string()))?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<F> {
                s.and_then(|s| s.trim().parse::<f64>().ok())
                    .map(F::lit)
                    .ok_or_else(|| Error::InvalidInput(format!("malformed CSV line {}: {line}", lineno + 1)))
            };
            xs.push(parse(parts.next())?);
            vs.push(parse(parts.next())?);
        }
        if xs.len() < 2 {
            return Err(Error::InvalidInput("CSV grid has fewer than two rows".into()));
        }
        let dx = (xs[xs.len() - 1] - xs[0]) / F::from_usize_lossy(xs.len() - 1);
        for (i, &x) in xs.iter().enumerate() {
            let expected = xs[0] + F::from_usize_lossy(i) * dx;
            if (x - expected).abs() > F::lit(1e-6) * dx {
                return Err(Error::InvalidInput(format!("CSV grid is not uniform at row {i}")));
            }
        }
        Self::new(xs[0], dx, vs)
    }
}

/// Trapezoidal rule for uniformly spaced samples.
pub fn trapezoid<F: Real>(values: &[F], dx: F) -> F {
    match values.len() {
        0 | 1 => F::zero(),
        n => {
            let half = F::lit(0.5);
            let interior = compensated_sum(values[1..n - 1].iter().copied());
            dx * (interior + half * (values[0] + values[n - 1]))
        }
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt17<F: Real>(x: F) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}
