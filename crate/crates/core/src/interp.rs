//! Monotone piecewise-cubic (Fritsch–Carlson) interpolation on a uniform grid.

use crate::grid::GridFunction;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCubic<F> {
    x0: F,
    dx: F,
    values: Vec<F>,
    slopes: Vec<F>,
}

impl<F: Real> MonotoneCubic<F> {
    pub fn new(grid: &GridFunction<F>) -> Self {
        let values = grid.values().to_vec();
        let dx = grid.dx();
        let n = values.len();
        let secants: Vec<F> = values.windows(2).map(|w| (w[1] - w[0]) / dx).collect();
        let mut slopes = vec![F::zero(); n];
        slopes[0] = secants[0];
        slopes[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            let (a, b) = (secants[i - 1], secants[i]);
            slopes[i] = if a * b <= F::zero() {
                F::zero()
            } else {
                // Harmonic mean keeps each cell monotone on a uniform grid.
                F::lit(2.0) * a * b / (a + b)
            };
        }
        // Endpoint slopes must not overshoot the adjacent secant.
        for (end, sec) in [(0, secants[0]), (n - 1, secants[n - 2])] {
            if slopes[end] * sec <= F::zero() {
                slopes[end] = F::zero();
            } else if slopes[end].abs() > F::lit(3.0) * sec.abs() {
                slopes[end] = F::lit(3.0) * sec;
            }
        }
        Self { x0: grid.x_min(), dx, values, slopes }
    }

    /// Interpolated value; zero outside the table.
    pub fn eval(&self, x: F) -> F {
        let n = self.values.len();
        let t = (x - self.x0) / self.dx;
        if !(t >= F::zero()) || t > F::from_usize_lossy(n - 1) {
            return F::zero();
        }
        let i = t.floor().to_usize().unwrap_or(0).min(n - 2);
        let u = t - F::from_usize_lossy(i);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.slopes[i] * self.dx, self.slopes[i + 1] * self.dx);
        let u2 = u * u;
        let u3 = u2 * u;
        let two = F::lit(2.0);
        let three = F::lit(3.0);
        let h00 = two * u3 - three * u2 + F::one();
        let h10 = u3 - two * u2 + u;
        let h01 = -two * u3 + three * u2;
        let h11 = u3 - u2;
        h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    }
}
