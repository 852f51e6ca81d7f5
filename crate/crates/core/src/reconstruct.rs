//! Ground state and potential from a characteristic function.
//!
//! `rho(x) = (1/pi) ∫_0^{s_max} cos(s x) C(s) ds` is evaluated by composite
//! Simpson in `s`, `phi0 = sqrt(rho)`, and `V = phi0'' / (2 phi0)` by the
//! three-point stencil. Because `V` is built from the same stencil the
//! eigensolver uses, `phi0` is an exact discrete zero mode.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::levy::LevyDensity;
use crate::scalar::{CompensatedSum, Real};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionOptions<F> {
    /// Fixed cutoff; `None` selects it by doubling from `s_max_start`.
    pub s_max: Option<F>,
    pub s_max_start: F,
    /// Required bound on `C(s_max)`.
    pub characteristic_floor: F,
    /// Negative values down to `-clip_rel * max(rho)` are clipped to zero.
    pub clip_rel: F,
    /// Step halving stops once the largest change is below `refine_tol * max(rho)`.
    pub refine_tol: F,
    pub max_refinements: usize,
}

impl<F: Real> Default for InversionOptions<F> {
    fn default() -> Self {
        Self {
            s_max: None,
            s_max_start: F::lit(16.0),
            characteristic_floor: F::lit(1e-10),
            clip_rel: F::lit(1e-8).max(F::epsilon() * F::lit(100.0)),
            refine_tol: F::lit(1e-10).max(F::epsilon() * F::lit(1e3)),
            max_refinements: 6,
        }
    }
}

/// Reconstructed density with inversion diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Density<F> {
    pub rho: GridFunction<F>,
    pub s_max: F,
    pub characteristic_at_s_max: F,
    pub s_intervals: usize,
    pub refinements: usize,
    /// Largest change of `rho` in the last step halving.
    pub last_change: F,
    pub converged: bool,
    /// Trapezoidal mass of the clipped density on the grid.
    pub mass: F,
    pub clipped_points: usize,
    pub min_before_clip: F,
}

/// Inverts `C = exp(-psi)` of `sigma` onto `grid`.
pub fn density_from_characteristic<F: Real>(
    sigma: &LevyDensity<F>,
    grid: &GridSpec<F>,
    opts: &InversionOptions<F>,
) -> Result<Density<F>> {
    density_from_fn(|s| sigma.characteristic(s, F::one()), grid, opts)
}

/// Inverts an arbitrary even, real characteristic function onto `grid`.
pub fn density_from_fn<F, C>(c: C, grid: &GridSpec<F>, opts: &InversionOptions<F>) -> Result<Density<F>>
where
    F: Real,
    C: Fn(F) -> Result<F> + Sync,
{
    let s_max = select_cutoff(&c, opts)?;
    let c_at_max = c(s_max)?;

    // Simpson step no larger than pi / (4 x_extent).
    let max_step = F::PI() / (F::lit(4.0) * grid.half_width);
    let mut intervals = (s_max / max_step).ceil().to_usize().unwrap_or(2).max(2);
    if intervals % 2 == 1 {
        intervals += 1;
    }

    let dx = grid.dx();
    let n = grid.points;
    let center = (n - 1) / 2;
    let xs: Vec<F> = (0..=center).map(|j| F::from_usize_lossy(j) * dx).collect();

    let mut samples = sample_nodes(&c, s_max, intervals, None)?;
    let mut half = simpson_cosine(&samples, s_max, &xs);
    let mut refinements = 0;
    let mut last_change = F::infinity();
    let mut converged = false;
    while refinements < opts.max_refinements {
        intervals *= 2;
        samples = sample_nodes(&c, s_max, intervals, Some(&samples))?;
        let next = simpson_cosine(&samples, s_max, &xs);
        refinements += 1;
        let scale = next.iter().fold(F::zero(), |m, v| m.max(v.abs()));
        last_change = half.iter().zip(&next).fold(F::zero(), |m, (a, b)| m.max((*a - *b).abs()));
        half = next;
        if last_change <= opts.refine_tol * scale {
            converged = true;
            break;
        }
    }

    let mut values = vec![F::zero(); n];
    for (j, v) in half.iter().enumerate() {
        values[center + j] = *v;
        values[center - j] = *v;
    }
    let max = values.iter().fold(F::zero(), |m, &v| m.max(v));
    let clip_tol = opts.clip_rel * max;
    let (min_index, min_value) = values
        .iter()
        .enumerate()
        .fold((0, F::infinity()), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    if min_value < -clip_tol {
        return Err(Error::InversionFailure {
            x: (F::from_usize_lossy(min_index) * dx - grid.half_width).to_f64_lossy(),
            min_value: min_value.to_f64_lossy(),
            clip_tol: clip_tol.to_f64_lossy(),
        });
    }
    let clipped_points = values.iter().filter(|&&v| v < F::zero()).count();
    for v in values.iter_mut() {
        *v = v.max(F::zero());
    }
    let rho = GridFunction::new(grid.x_min(), dx, values)?;
    let mass = rho.trapezoid();
    Ok(Density {
        rho,
        s_max,
        characteristic_at_s_max: c_at_max,
        s_intervals: intervals,
        refinements,
        last_change,
        converged,
        mass,
        clipped_points,
        min_before_clip: min_value,
    })
}

fn select_cutoff<F: Real>(c: &impl Fn(F) -> Result<F>, opts: &InversionOptions<F>) -> Result<F> {
    let floor = opts.characteristic_floor;
    if let Some(s) = opts.s_max {
        let value = c(s)?;
        if !(value < floor) {
            return Err(Error::CutoffTooSmall { s_max: s.to_f64_lossy(), value: value.to_f64_lossy() });
        }
        return Ok(s);
    }
    let mut s = opts.s_max_start;
    for _ in 0..40 {
        let value = c(s)?;
        if value < floor {
            // psi is expected to increase; sample beyond the cutoff to confirm.
            for factor in [1.5, 2.0, 4.0] {
                let beyond = c(s * F::lit(factor))?;
                if !(beyond < floor) {
                    return Err(Error::CutoffTooSmall {
                        s_max: (s * F::lit(factor)).to_f64_lossy(),
                        value: beyond.to_f64_lossy(),
                    });
                }
            }
            return Ok(s);
        }
        s = s * F::lit(2.0);
    }
    Err(Error::CutoffTooSmall { s_max: s.to_f64_lossy(), value: c(s)?.to_f64_lossy() })
}

/// `C` on `intervals + 1` equispaced nodes; reuses every other node from `coarse`.
fn sample_nodes<F, C>(c: &C, s_max: F, intervals: usize, coarse: Option<&[F]>) -> Result<Vec<F>>
where
    F: Real,
    C: Fn(F) -> Result<F> + Sync,
{
    let h = s_max / F::from_usize_lossy(intervals);
    (0..=intervals)
        .into_par_iter()
        .map(|j| match coarse {
            Some(prev) if j % 2 == 0 => Ok(prev[j / 2]),
            _ => c(F::from_usize_lossy(j) * h),
        })
        .collect()
}

fn simpson_cosine<F: Real>(samples: &[F], s_max: F, xs: &[F]) -> Vec<F> {
    let intervals = samples.len() - 1;
    let h = s_max / F::from_usize_lossy(intervals);
    let third = h / (F::lit(3.0) * F::PI());
    xs.par_iter()
        .map(|&x| {
            let mut acc = CompensatedSum::new();
            for (j, &cj) in samples.iter().enumerate() {
                let w = if j == 0 || j == intervals {
                    F::one()
                } else if j % 2 == 1 {
                    F::lit(4.0)
                } else {
                    F::lit(2.0)
                };
                acc.add(w * cj * (F::from_usize_lossy(j) * h * x).cos());
            }
            acc.value() * third
        })
        .collect()
}

/// `phi0 = sqrt(max(rho, 0))`, normalized so the trapezoidal `∫ phi0^2 = 1`.
pub fn ground_state<F: Real>(rho: &GridFunction<F>, clip_rel: F) -> Result<GridFunction<F>> {
    let max = rho.max_value();
    if !(max > F::zero()) {
        return Err(Error::InvalidInput("density has no positive values".into()));
    }
    let clip_tol = clip_rel * max;
    if let Some(i) = rho.values().iter().position(|&v| v < -clip_tol) {
        return Err(Error::InversionFailure {
            x: rho.x(i).to_f64_lossy(),
            min_value: rho.values()[i].to_f64_lossy(),
            clip_tol: clip_tol.to_f64_lossy(),
        });
    }
    let clipped: Vec<F> = rho.values().iter().map(|&v| v.max(F::zero())).collect();
    let mass = crate::grid::trapezoid(&clipped, rho.dx());
    let scale = mass.sqrt().recip();
    let phi: Vec<F> = clipped.iter().map(|&v| v.sqrt() * scale).collect();
    rho.with_values(phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialOptions<F> {
    /// Points with `phi0 < floor * max(phi0)` leave the retained domain.
    pub floor: F,
    /// Also end the domain where `phi0` stops decreasing away from the
    /// centre; such points are dominated by inversion noise.
    pub require_decreasing: bool,
}

impl<F: Real> Default for PotentialOptions<F> {
    fn default() -> Self {
        Self { floor: F::lit(1e-8), require_decreasing: true }
    }
}

/// `V` on the retained symmetric window of the `phi0` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Potential<F> {
    pub v: GridFunction<F>,
    /// Retained points are `center - half ..= center + half` of the full grid.
    pub retained_half: usize,
    pub full_points: usize,
    pub floor: F,
}

impl<F: Real> Potential<F> {
    /// Membership of each full-grid point in the retained domain.
    pub fn mask(&self) -> Vec<bool> {
        let c = (self.full_points - 1) / 2;
        (0..self.full_points).map(|i| i.abs_diff(c) <= self.retained_half).collect()
    }

    pub fn retained_extent(&self) -> F {
        self.v.x_max()
    }
}

/// `V = phi0'' / (2 phi0)` by second-order central differences, symmetrized.
pub fn potential<F: Real>(phi0: &GridFunction<F>, opts: &PotentialOptions<F>) -> Result<Potential<F>> {
    let n = phi0.len();
    let c = phi0.center();
    let p = phi0.values();
    let threshold = opts.floor * phi0.max_value();
    if !(p[c] > F::zero()) {
        return Err(Error::InvalidInput("ground state must be positive at the origin".into()));
    }
    // Largest symmetric window inside the open grid meeting the floor.
    let mut half = 0;
    while half + 1 < c {
        let k = half + 1;
        let (l, r) = (p[c - k], p[c + k]);
        if l < threshold || r < threshold || !(l > F::zero() && r > F::zero()) {
            break;
        }
        if opts.require_decreasing && (l >= p[c - half] || r >= p[c + half]) && half > 0 {
            break;
        }
        half = k;
    }
    let required = (crate::grid::MIN_POINTS - 1) / 2;
    if half < required {
        return Err(Error::RetainedDomainTooShort { points: 2 * half + 1, required: crate::grid::MIN_POINTS });
    }
    let dx = phi0.dx();
    let inv = F::one() / (F::lit(2.0) * dx * dx);
    let raw: Vec<F> = (c - half..=c + half)
        .map(|i| (p[i + 1] - F::lit(2.0) * p[i] + p[i - 1]) * inv / p[i])
        .collect();
    let m = raw.len();
    let values: Vec<F> = (0..m).map(|j| F::lit(0.5) * (raw[j] + raw[m - 1 - j])).collect();
    let v = GridFunction::new(-F::from_usize_lossy(half) * dx, dx, values)?;
    debug_assert!(n > 2 * half + 1);
    Ok(Potential { v, retained_half: half, full_points: n, floor: opts.floor })
}

/// Relative norm of `(-1/2 D2 + V) phi0` on the retained domain, with the
/// stencil reaching the true neighbours of the window ends.
pub fn zero_mode_residual<F: Real>(phi0: &GridFunction<F>, pot: &Potential<F>) -> F {
    let c = phi0.center();
    let h = pot.retained_half;
    let p = phi0.values();
    let dx = phi0.dx();
    let inv = F::one() / (F::lit(2.0) * dx * dx);
    let mut res = CompensatedSum::new();
    let mut norm = CompensatedSum::new();
    for (j, i) in (c - h..=c + h).enumerate() {
        if i == 0 || i + 1 >= p.len() {
            continue;
        }
        let r = -(p[i + 1] - F::lit(2.0) * p[i] + p[i - 1]) * inv + pot.v.values()[j] * p[i];
        res.add(r * r);
        norm.add(p[i] * p[i]);
    }
    (res.value() / norm.value()).sqrt()
}

/// Exponent `beta` in `phi0 ~ exp(-c |x|^beta)`, from a least-squares fit of
/// `ln(-ln(phi0/phi0(0)))` against `ln x` over the outer half of the domain.
pub fn tail_decay_exponent<F: Real>(phi0: &GridFunction<F>, retained_half: usize) -> Option<F> {
    let c = phi0.center();
    let p0 = phi0.values()[c];
    let (mut sx, mut sy, mut sxx, mut sxy, mut count) = (F::zero(), F::zero(), F::zero(), F::zero(), 0usize);
    for k in (retained_half / 2).max(1)..=retained_half {
        let ratio = phi0.values()[c + k] / p0;
        if !(ratio > F::zero() && ratio < F::one()) {
            continue;
        }
        let l = -ratio.ln();
        if !(l > F::zero()) {
            continue;
        }
        let (x, y) = (phi0.x(c + k).ln(), l.ln());
        sx = sx + x;
        sy = sy + y;
        sxx = sxx + x * x;
        sxy = sxy + x * y;
        count += 1;
    }
    if count < 3 {
        return None;
    }
    let nf = F::from_usize_lossy(count);
    let denom = nf * sxx - sx * sx;
    (denom > F::zero()).then(|| (nf * sxy - sx * sy) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn gaussian_phi0(spec: &GridSpec<f64>) -> GridFunction<f64> {
        let rho = GridFunction::from_fn(spec, |x| (-x * x).exp() / std::f64::consts::PI.sqrt()).unwrap();
        ground_state(&rho, 1e-8).unwrap()
    }

    #[test]
    fn gaussian_inversion() {
        let spec = GridSpec::new(8.0, 401).unwrap();
        let d = density_from_fn(|s| Ok((-s * s / 4.0_f64).exp()), &spec, &InversionOptions::default()).unwrap();
        assert!(d.converged);
        for (i, &v) in d.rho.values().iter().enumerate() {
            let x = d.rho.x(i);
            assert!((v - (-x * x).exp() / std::f64::consts::PI.sqrt()).abs() < 1e-12);
        }
        assert_relative_eq!(d.mass, 1.0, max_relative = 1e-12);
        assert_eq!(d.rho.evenness_defect(), 0.0);
    }

    #[test]
    fn cutoff_must_kill_characteristic() {
        let spec = GridSpec::new(8.0, 101).unwrap();
        let opts = InversionOptions { s_max: Some(2.0), ..InversionOptions::default() };
        let err = density_from_fn(|s| Ok((-s * s / 4.0_f64).exp()), &spec, &opts).unwrap_err();
        assert!(matches!(err, Error::CutoffTooSmall { .. }));
    }

    #[test]
    fn ground_state_normalization_and_clipping() {
        let spec = GridSpec::new(6.0, 601).unwrap();
        let phi = gaussian_phi0(&spec);
        assert_relative_eq!(crate::grid::trapezoid(&phi.values().iter().map(|v| v * v).collect::<Vec<_>>(), phi.dx()), 1.0, max_relative = 1e-12);

        let mut vals = GridFunction::from_fn(&spec, |x| (-x * x).exp()).unwrap().into_values();
        vals[0] = -1e-13;
        vals[600] = -1e-13;
        let rho = GridFunction::new(-6.0, spec.dx(), vals.clone()).unwrap();
        let phi = ground_state(&rho, 1e-8).unwrap();
        assert_eq!(phi.values()[0], 0.0);
        vals[10] = -1e-3;
        vals[590] = -1e-3;
        let rho = GridFunction::new(-6.0, spec.dx(), vals).unwrap();
        assert!(matches!(ground_state(&rho, 1e-8), Err(Error::InversionFailure { .. })));
    }

    #[test]
    fn oscillator_potential() {
        let spec = GridSpec::new(6.5, 8001).unwrap();
        let phi = gaussian_phi0(&spec);
        let pot = potential(&phi, &PotentialOptions::default()).unwrap();
        let err = pot
            .v
            .xs()
            .iter()
            .zip(pot.v.values())
            .map(|(x, v)| (v - (x * x / 2.0 - 0.5)).abs())
            .fold(0.0, f64::max);
        assert!(err < 2e-4, "{err}");
        assert_eq!(pot.v.evenness_defect(), 0.0);
        assert!(zero_mode_residual(&phi, &pot) < 1e-12);
        let beta = tail_decay_exponent(&phi, pot.retained_half).unwrap();
        assert!((beta - 2.0).abs() < 0.05, "{beta}");
        let mask = pot.mask();
        assert_eq!(mask.iter().filter(|&&m| m).count(), pot.v.len());
    }

    #[test]
    fn retained_domain_respects_floor() {
        let spec = GridSpec::new(12.0, 2001).unwrap();
        let phi = gaussian_phi0(&spec);
        let pot = potential(&phi, &PotentialOptions::default()).unwrap();
        // exp(-x^2/2) = 1e-8 at x = 6.07
        assert!(pot.retained_extent() < 6.1 && pot.retained_extent() > 6.0);

        let narrow = GridFunction::from_fn(&spec, |x| (-x.powi(2) * 1e4).exp()).unwrap();
        assert!(matches!(
            potential(&narrow, &PotentialOptions::default()),
            Err(Error::RetainedDomainTooShort { .. })
        ));
    }

    #[test]
    fn noisy_tail_is_cut() {
        let spec = GridSpec::new(12.0, 2001).unwrap();
        let rho = GridFunction::from_fn(&spec, |x: f64| {
            let noise = 1e-12 * (37.0 * x).sin().abs();
            (-x * x).exp() + noise
        })
        .unwrap();
        let phi = ground_state(&rho, 1e-8).unwrap();
        let pot = potential(&phi, &PotentialOptions::default()).unwrap();
        let loose = potential(&phi, &PotentialOptions { require_decreasing: false, ..Default::default() }).unwrap();
        assert!(pot.retained_half < loose.retained_half);
        assert!(pot.retained_extent() < 5.5);
    }

    #[test]
    fn f32_inversion() {
        let spec = GridSpec::new(6.0_f32, 121).unwrap();
        let opts = InversionOptions { max_refinements: 3, ..InversionOptions::default() };
        let d = density_from_fn(|s: f32| Ok((-s * s / 4.0).exp()), &spec, &opts).unwrap();
        assert!((d.rho.values()[60] - 1.0 / std::f32::consts::PI.sqrt()).abs() < 1e-5);
    }
}
