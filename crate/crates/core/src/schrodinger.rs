//! Lowest eigenpairs of `-1/2 d^2/dx^2 + V` on a uniform grid with hard walls.
//!
//! The three-point Laplacian gives a symmetric tridiagonal matrix. Eigenvalues
//! come from Sturm-sequence bisection, eigenvectors from inverse iteration.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{fmt17, GridFunction, GridSpec};
use crate::scalar::{CompensatedSum, Real};

const MAX_BISECTIONS: usize = 300;
const INVERSE_ITERATIONS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions<F> {
    /// Abort when `E_{k+1} - E_k < degeneracy_rel * (1 + |E_k|)`.
    pub degeneracy_rel: F,
    /// Each state is made positive at its last grid value above
    /// `sign_threshold * max |phi_k|` (scanning from `x_max`), which matches
    /// the Hermite-function signs of the oscillator.
    pub sign_threshold: F,
    /// Allowed Rayleigh-quotient defect, relative to `max(1, |E|)`.
    pub rayleigh_rel: F,
}

impl<F: Real> Default for SolveOptions<F> {
    fn default() -> Self {
        Self {
            degeneracy_rel: F::lit(1e-10),
            sign_threshold: F::lit(1e-6),
            rayleigh_rel: F::lit(1e-8).max(F::epsilon() * F::lit(1e4)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<F> {
    /// `E_k - E_0`; `energies[0] == 0`.
    pub energies: Vec<F>,
    /// Lowest eigenvalue before the shift.
    pub raw_ground_energy: F,
    pub states: Vec<GridFunction<F>>,
    pub parity: Vec<i8>,
    pub max_rayleigh_defect: F,
    pub max_orthonormality_defect: F,
}

impl<F: Real> Spectrum<F> {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn raw_energy(&self, k: usize) -> F {
        self.energies[k] + self.raw_ground_energy
    }

    /// `k,E_k,parity`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,E_k,parity")?;
        for (k, (e, p)) in self.energies.iter().zip(&self.parity).enumerate() {
            writeln!(out, "{k},{},{p}", fmt17(*e))?;
        }
        Ok(())
    }

    /// `x,phi_0,...,phi_{K-1}`.
    pub fn write_states_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.len()).map(|k| format!("phi_{k}")).collect();
        writeln!(out, "x,{}", header.join(","))?;
        let grid = &self.states[0];
        for i in 0..grid.len() {
            let row: Vec<String> = self.states.iter().map(|s| fmt17(s.values()[i])).collect();
            writeln!(out, "{},{}", fmt17(grid.x(i)), row.join(","))?;
        }
        Ok(())
    }
}

/// Symmetric tridiagonal matrix with constant off-diagonal.
struct Tridiagonal<F> {
    diag: Vec<F>,
    off: F,
}

impl<F: Real> Tridiagonal<F> {
    fn hamiltonian(v: &GridFunction<F>) -> Self {
        let dx = v.dx();
        let kinetic = F::one() / (dx * dx);
        Self { diag: v.values().iter().map(|&vi| kinetic + vi).collect(), off: -F::lit(0.5) * kinetic }
    }

    fn gershgorin(&self) -> (F, F) {
        let r = F::lit(2.0) * self.off.abs();
        let lo = self.diag.iter().fold(F::infinity(), |m, &d| m.min(d)) - r;
        let hi = self.diag.iter().fold(F::neg_infinity(), |m, &d| m.max(d)) + r;
        (lo, hi)
    }

    /// Number of eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: F) -> usize {
        let e2 = self.off * self.off;
        let guard = F::min_positive_value().sqrt();
        let mut count = 0;
        let mut q = F::one();
        for (i, &d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - lambda } else { d - lambda - e2 / q };
            if q.abs() < guard {
                q = -guard;
            }
            if q < F::zero() {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (0-based) by bisection.
    fn eigenvalue(&self, k: usize, bounds: (F, F)) -> F {
        let (mut lo, mut hi) = bounds;
        for _ in 0..MAX_BISECTIONS {
            let mid = F::lit(0.5) * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        F::lit(0.5) * (lo + hi)
    }

    fn apply(&self, x: &[F]) -> Vec<F> {
        let n = x.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y = y + self.off * x[i - 1];
                }
                if i + 1 < n {
                    y = y + self.off * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// LU factors of `T - shift I` with partial pivoting.
    fn factor(&self, shift: F) -> ShiftedLu<F> {
        let n = self.diag.len();
        let mut d: Vec<F> = self.diag.iter().map(|&v| v - shift).collect();
        let mut dl = vec![self.off; n.saturating_sub(1)];
        let mut du = vec![self.off; n.saturating_sub(1)];
        let mut du2 = vec![F::zero(); n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != F::zero() {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] = d[i + 1] - fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        let tiny = F::epsilon() * (self.off.abs() + self.diag.iter().fold(F::zero(), |m, v| m.max(v.abs())));
        for v in d.iter_mut() {
            if v.abs() < tiny {
                *v = if *v < F::zero() { -tiny } else { tiny };
            }
        }
        ShiftedLu { d, dl, du, du2, swapped }
    }
}

struct ShiftedLu<F> {
    d: Vec<F>,
    dl: Vec<F>,
    du: Vec<F>,
    du2: Vec<F>,
    swapped: Vec<bool>,
}

impl<F: Real> ShiftedLu<F> {
    fn solve(&self, b: &mut [F]) {
        let n = b.len();
        for i in 0..n - 1 {
            if self.swapped[i] {
                let temp = b[i];
                b[i] = b[i + 1];
                b[i + 1] = temp - self.dl[i] * b[i];
            } else {
                b[i + 1] = b[i + 1] - self.dl[i] * b[i];
            }
        }
        b[n - 1] = b[n - 1] / self.d[n - 1];
        if n >= 2 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

fn dot<F: Real>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(x, y)| *x * *y).collect::<CompensatedSum<F>>().value()
}

fn scale_to_unit<F: Real>(x: &mut [F], dx: F) {
    let norm = (dx * dot(x, x)).sqrt();
    for v in x.iter_mut() {
        *v = *v / norm;
    }
}

/// Lowest `k` eigenpairs of `-1/2 D2 + V` with Dirichlet walls beyond the
/// ends of `v`'s grid.
pub fn solve<F: Real>(v: &GridFunction<F>, k: usize, opts: &SolveOptions<F>) -> Result<Spectrum<F>> {
    let n = v.len();
    if k == 0 || 4 * k > n {
        return Err(Error::InvalidInput(format!("need 1 <= K <= n/4, got K = {k} for n = {n}")));
    }
    if !v.is_even_within(F::zero()) {
        return Err(Error::InvalidInput("potential must be exactly even".into()));
    }
    let t = Tridiagonal::hamiltonian(v);
    let bounds = t.gershgorin();
    let raw: Vec<F> = (0..k).map(|j| t.eigenvalue(j, bounds)).collect();
    for j in 0..k.saturating_sub(1) {
        if raw[j + 1] - raw[j] < opts.degeneracy_rel * (F::one() + raw[j].abs()) {
            return Err(Error::Degeneracy {
                lower: j,
                upper: j + 1,
                energy_lower: raw[j].to_f64_lossy(),
                energy_upper: raw[j + 1].to_f64_lossy(),
            });
        }
    }

    let dx = v.dx();
    let mut vectors: Vec<Vec<F>> = Vec::with_capacity(k);
    let mut parity = Vec::with_capacity(k);
    let mut max_rayleigh = F::zero();
    for (j, &lambda) in raw.iter().enumerate() {
        let lu = t.factor(lambda);
        // Deterministic start with components of both parities.
        let mut x: Vec<F> = (0..n)
            .map(|i| F::one() + F::lit(0.25) * (F::lit(0.7) * F::from_usize_lossy(i)).sin())
            .collect();
        for _ in 0..INVERSE_ITERATIONS {
            lu.solve(&mut x);
            for prev in &vectors {
                let c = dx * dot(&x, prev);
                for (xi, pi) in x.iter_mut().zip(prev) {
                    *xi = *xi - c * *pi;
                }
            }
            scale_to_unit(&mut x, dx);
        }

        let mirrored: Vec<F> = x.iter().rev().copied().collect();
        let overlap = dx * dot(&x, &mirrored);
        let found: i8 = if overlap >= F::zero() { 1 } else { -1 };
        let expected: i8 = if j % 2 == 0 { 1 } else { -1 };
        if found != expected || overlap.abs() < F::lit(0.5) {
            return Err(Error::ParityViolation { state: j, expected, found });
        }
        let p = F::from_i8(found).expect("sign");
        let projected: Vec<F> = (0..n).map(|i| F::lit(0.5) * (x[i] + p * x[n - 1 - i])).collect();
        x = projected;
        scale_to_unit(&mut x, dx);

        let max = x.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        let first = x.iter().rev().find(|v| v.abs() > opts.sign_threshold * max).copied().unwrap_or(F::one());
        if first < F::zero() {
            for v in x.iter_mut() {
                *v = -*v;
            }
        }

        let rq = dx * dot(&x, &t.apply(&x));
        let defect = (rq - lambda).abs();
        if defect > opts.rayleigh_rel * F::one().max(lambda.abs()) {
            return Err(Error::EigenFailure(format!(
                "Rayleigh quotient {rq} disagrees with eigenvalue {lambda} for state {j}"
            )));
        }
        max_rayleigh = max_rayleigh.max(defect / F::one().max(lambda.abs()));
        vectors.push(x);
        parity.push(found);
    }

    let mut max_ortho = F::zero();
    for a in 0..k {
        for b in 0..=a {
            let target = if a == b { F::one() } else { F::zero() };
            max_ortho = max_ortho.max((v.trapezoid_of(&vectors[a], &vectors[b]) - target).abs());
        }
    }

    let e0 = raw[0];
    let energies = raw.iter().map(|&e| e - e0).collect();
    let states = vectors.into_iter().map(|x| v.with_values(x)).collect::<Result<Vec<_>>>()?;
    Ok(Spectrum {
        energies,
        raw_ground_energy: e0,
        states,
        parity,
        max_rayleigh_defect: max_rayleigh,
        max_orthonormality_defect: max_ortho,
    })
}

/// Symmetric position matrix `Q_kl = <k|x|l>` with the energies it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixElements<F> {
    size: usize,
    q: Vec<F>,
    energies: Vec<F>,
}

impl<F: Real> MatrixElements<F> {
    /// From a dense symmetric matrix (rows) and shifted energies.
    pub fn from_dense(q: &[Vec<F>], energies: &[F]) -> Result<Self> {
        let size = energies.len();
        if q.len() != size || q.iter().any(|r| r.len() != size) {
            return Err(Error::InvalidInput("matrix shape does not match energy count".into()));
        }
        let mut flat = Vec::with_capacity(size * size);
        for (k, row) in q.iter().enumerate() {
            for (l, &v) in row.iter().enumerate() {
                if v != q[l][k] {
                    return Err(Error::InvalidInput(format!("Q is not symmetric at ({k}, {l})")));
                }
                flat.push(v);
            }
        }
        Ok(Self { size, q: flat, energies: energies.to_vec() })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, k: usize, l: usize) -> F {
        self.q[k * self.size + l]
    }

    pub fn energies(&self) -> &[F] {
        &self.energies
    }

    pub fn max_abs(&self) -> F {
        self.q.iter().fold(F::zero(), |m, v| m.max(v.abs()))
    }

    /// Largest `|Q_kl|` over pairs of equal parity.
    pub fn parity_defect(&self) -> F {
        let mut worst = F::zero();
        for k in 0..self.size {
            for l in (k % 2..self.size).step_by(2) {
                worst = worst.max(self.get(k, l).abs());
            }
        }
        worst
    }

    /// Leading `k x k` block.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.min(self.size);
        let q = (0..k).flat_map(|a| (0..k).map(move |b| (a, b))).map(|(a, b)| self.get(a, b)).collect();
        Self { size: k, q, energies: self.energies[..k].to_vec() }
    }

    /// Elements after flipping the sign of each state with `flip[k] == true`.
    pub fn with_sign_flips(&self, flip: &[bool]) -> Self {
        let s = |k: usize| if flip.get(k).copied().unwrap_or(false) { -F::one() } else { F::one() };
        let mut out = self.clone();
        for k in 0..self.size {
            for l in 0..self.size {
                out.q[k * self.size + l] = self.get(k, l) * s(k) * s(l);
            }
        }
        out
    }

    /// Adds `delta` to the symmetric pair `(k, l)`; used to inject defects.
    pub fn perturbed(&self, k: usize, l: usize, delta: F) -> Self {
        let mut out = self.clone();
        out.q[k * self.size + l] = out.q[k * self.size + l] + delta;
        if k != l {
            out.q[l * self.size + k] = out.q[l * self.size + k] + delta;
        }
        out
    }

    /// `K x K` matrix, one row per line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for k in 0..self.size {
            let row: Vec<String> = (0..self.size).map(|l| fmt17(self.get(k, l))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// `Q_kl = ∫ phi_k x phi_l dx` by the trapezoidal rule; each unordered pair once.
pub fn matrix_elements<F: Real>(spectrum: &Spectrum<F>) -> MatrixElements<F> {
    let k = spectrum.len();
    let grid = &spectrum.states[0];
    let mut q = vec![F::zero(); k * k];
    for a in 0..k {
        for b in a..k {
            let (pa, pb) = (spectrum.states[a].values(), spectrum.states[b].values());
            let v = grid.mirror_trapezoid(|i| pa[i] * grid.x(i) * pb[i]);
            q[a * k + b] = v;
            q[b * k + a] = v;
        }
    }
    MatrixElements { size: k, q, energies: spectrum.energies.clone() }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport<F> {
    /// Grid point counts, coarsest first.
    pub points: Vec<usize>,
    /// `energies[level][k]`, shifted.
    pub energies: Vec<Vec<F>>,
    /// Richardson error estimate of the finest level, per state.
    pub estimated_error: Vec<F>,
    pub relative_error: Vec<F>,
    pub flagged: Vec<bool>,
    pub tolerance: F,
}

impl<F: Real> ConvergenceReport<F> {
    pub fn any_flagged(&self) -> bool {
        self.flagged.iter().any(|&f| f)
    }
}

/// Re-solves on successively halved spacings and estimates the discretization
/// error of each level by Richardson extrapolation (second order).
///
/// `potential_on` returns `V` sampled for the requested grid.
pub fn convergence_sweep<F: Real>(
    potential_on: impl Fn(&GridSpec<F>) -> Result<GridFunction<F>>,
    grid: &GridSpec<F>,
    k: usize,
    levels: usize,
    tolerance: F,
) -> Result<ConvergenceReport<F>> {
    let levels = levels.max(2);
    let mut spec = *grid;
    let mut points = Vec::new();
    let mut energies = Vec::new();
    for _ in 0..levels {
        let v = potential_on(&spec)?;
        let s = solve(&v, k, &SolveOptions::default())?;
        points.push(spec.points);
        energies.push(s.energies);
        spec = spec.refined();
    }
    let fine = &energies[levels - 1];
    let coarse = &energies[levels - 2];
    let estimated_error: Vec<F> = fine.iter().zip(coarse).map(|(f, c)| (*f - *c).abs() / F::lit(3.0)).collect();
    let relative_error: Vec<F> = estimated_error
        .iter()
        .zip(fine)
        .map(|(err, e)| if *e > F::zero() { *err / *e } else { F::zero() })
        .collect();
    // The estimate for the coarser level is four times the finer one.
    let flagged = relative_error.iter().map(|r| *r * F::lit(4.0) > tolerance).collect();
    Ok(ConvergenceReport { points, energies, estimated_error, relative_error, flagged, tolerance })
}
