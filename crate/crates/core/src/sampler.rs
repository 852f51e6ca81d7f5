//! Monte Carlo oracle: the ground-state diffusion `dX = b(X) dt + dW` with
//! `b = phi0'/phi0`, whose invariant density is `phi0^2`.
//!
//! Paths are independent. Each path owns a ChaCha8 stream selected by its
//! index, so ensembles do not depend on the number of worker threads. Only
//! per-path summaries are kept: window integrals, lag products, the time
//! average and the end points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::scalar::compensated_sum;

/// Minimum ensemble size for a chi2 estimate.
pub const MIN_PATHS_CHI2: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftOptions {
    /// Walls sit where `phi0^2` falls below this fraction of its maximum.
    pub density_floor: f64,
}

impl Default for DriftOptions {
    fn default() -> Self {
        Self { density_floor: 1e-8 }
    }
}

/// Drift on the grid plus the reflecting walls and the stationary density.
#[derive(Clone, Debug)]
pub struct Drift {
    b: GridFunction<f64>,
    rho: Vec<f64>,
    lo: usize,
    hi: usize,
}

impl Drift {
    pub fn values(&self) -> &GridFunction<f64> {
        &self.b
    }

    pub fn walls(&self) -> (f64, f64) {
        (self.b.x(self.lo), self.b.x(self.hi))
    }

    /// Largest `|b|` between the walls.
    pub fn max_abs(&self) -> f64 {
        self.b.values()[self.lo..=self.hi].iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Linear interpolation of `b`.
    pub fn eval(&self, x: f64) -> f64 {
        let dx = self.b.dx();
        let n = self.b.len();
        let t = (x - self.b.x_min()) / dx;
        let i = (t.floor().max(0.0) as usize).min(n - 2);
        let w = t - i as f64;
        let v = self.b.values();
        v[i] + w * (v[i + 1] - v[i])
    }

    fn reflect(&self, x: f64) -> f64 {
        let (lo, hi) = self.walls();
        let y = if x > hi {
            2.0 * hi - x
        } else if x < lo {
            2.0 * lo - x
        } else {
            return x;
        };
        y.clamp(lo, hi)
    }
}

/// `b = (ln phi0)'` by central differences between the walls, linear
/// extrapolation outside.
pub fn drift(phi0: &GridFunction<f64>, opts: &DriftOptions) -> Result<Drift> {
    if !(opts.density_floor > 0.0 && opts.density_floor < 1.0) {
        return Err(Error::InvalidInput(format!("density floor must lie in (0, 1), got {}", opts.density_floor)));
    }
    let phi = phi0.values();
    let n = phi.len();
    if phi.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("ground state has non-finite values".into()));
    }
    let rho: Vec<f64> = phi.iter().map(|p| p * p).collect();
    let peak = rho.iter().cloned().fold(0.0, f64::max);
    let c = phi0.center();
    let cut = opts.density_floor * peak;
    if !(phi[c] > 0.0) || rho[c] < cut {
        return Err(Error::InvalidInput("ground state must be positive at the origin".into()));
    }
    let mut lo = c;
    while lo > 0 && rho[lo - 1] >= cut && phi[lo - 1] > 0.0 {
        lo -= 1;
    }
    let mut hi = c;
    while hi + 1 < n && rho[hi + 1] >= cut && phi[hi + 1] > 0.0 {
        hi += 1;
    }
    if hi - lo < 4 {
        return Err(Error::RetainedDomainTooShort { points: hi - lo + 1, required: 5 });
    }
    let dx = phi0.dx();
    let ln: Vec<f64> = phi.iter().map(|p| p.ln()).collect();
    let mut b = vec![0.0; n];
    for i in lo + 1..hi {
        b[i] = (ln[i + 1] - ln[i - 1]) / (2.0 * dx);
    }
    b[lo] = (-3.0 * ln[lo] + 4.0 * ln[lo + 1] - ln[lo + 2]) / (2.0 * dx);
    b[hi] = (3.0 * ln[hi] - 4.0 * ln[hi - 1] + ln[hi - 2]) / (2.0 * dx);
    let slope_lo = b[lo + 1] - b[lo];
    for i in 0..lo {
        b[i] = b[lo] - slope_lo * (lo - i) as f64;
    }
    let slope_hi = b[hi] - b[hi - 1];
    for i in hi + 1..n {
        b[i] = b[hi] + slope_hi * (i - hi) as f64;
    }
    let mut rho_in = vec![0.0; n];
    rho_in[lo..=hi].copy_from_slice(&rho[lo..=hi]);
    Ok(Drift { b: phi0.with_values(b)?, rho: rho_in, lo, hi })
}

/// What to simulate and which statistics to keep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    /// Steps discarded before recording.
    pub burn_in: usize,
    /// Half-widths `T` of the windows `[-T, T]`; each must be a multiple of `dt / 2`.
    pub windows: Vec<f64>,
    /// Lags; each must be a multiple of `dt`.
    pub lags: Vec<f64>,
}

/// Per-path summaries of a simulated ensemble.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEnsemble {
    pub spec: SimulationSpec,
    pub initial: Vec<f64>,
    pub last: Vec<f64>,
    pub time_mean: Vec<f64>,
    /// `[window][path]`; empty for windows longer than the path.
    window_integrals: Vec<Vec<f64>>,
    /// `[lag][path]`, the mean of `X(t) X(t + lag)` over origins.
    lag_products: Vec<Vec<f64>>,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.initial.len()
    }

    pub fn window_integrals(&self, t: f64) -> Option<&[f64]> {
        let i = self.spec.windows.iter().position(|&w| w == t)?;
        let w = &self.window_integrals[i];
        (!w.is_empty()).then_some(w.as_slice())
    }

    pub fn all_finite(&self) -> bool {
        let cols = [&self.initial, &self.last, &self.time_mean];
        cols.iter().all(|c| c.iter().all(|v| v.is_finite()))
            && self.window_integrals.iter().flatten().all(|v| v.is_finite())
            && self.lag_products.iter().flatten().all(|v| v.is_finite())
    }
}

fn steps_for(span: f64, dt: f64, what: &str) -> Result<usize> {
    let m = span / dt;
    let r = m.round();
    if !(span >= 0.0) || (m - r).abs() > 1e-9 * m.max(1.0) {
        return Err(Error::InvalidInput(format!("{what} {span} is not a whole number of steps of {dt}")));
    }
    Ok(r as usize)
}

/// Euler-Maruyama with reflecting walls, started from the stationary density.
pub fn simulate(drift: &Drift, spec: &SimulationSpec) -> Result<PathEnsemble> {
    if !(spec.dt > 0.0 && spec.dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {}", spec.dt)));
    }
    if spec.n_paths == 0 {
        return Err(Error::InvalidInput("need at least one path".into()));
    }
    let product = spec.dt * drift.max_abs();
    if product >= 0.5 {
        return Err(Error::Stiffness { product, suggested_dt: 0.25 / drift.max_abs() });
    }
    let window_steps: Vec<usize> =
        spec.windows.iter().map(|&t| steps_for(2.0 * t, spec.dt, "window 2T")).collect::<Result<_>>()?;
    let lag_steps: Vec<usize> = spec.lags.iter().map(|&l| steps_for(l, spec.dt, "lag")).collect::<Result<_>>()?;
    let cdf = StationaryCdf::new(drift);
    let sqrt_dt = spec.dt.sqrt();

    let per_path: Vec<(f64, f64, f64, Vec<f64>, Vec<f64>)> = (0..spec.n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(p as u64);
            let x0 = cdf.sample(rng.random::<f64>());
            let mut x = x0;
            let step = |x: f64, rng: &mut ChaCha8Rng| {
                let z: f64 = rng.sample(StandardNormal);
                drift.reflect(x + drift.eval(x) * spec.dt + sqrt_dt * z)
            };
            for _ in 0..spec.burn_in {
                x = step(x, &mut rng);
            }
            let mut path = Vec::with_capacity(spec.n_steps + 1);
            path.push(x);
            for _ in 0..spec.n_steps {
                x = step(x, &mut rng);
                path.push(x);
            }
            let time_mean = if spec.n_steps == 0 { path[0] } else { trapezoid(&path, spec.dt) / (spec.n_steps as f64 * spec.dt) };
            let windows = window_steps
                .iter()
                .map(|&m| if m <= spec.n_steps { trapezoid(&path[..=m], spec.dt) } else { f64::NAN })
                .collect();
            let lags = lag_steps
                .iter()
                .map(|&m| {
                    if m > spec.n_steps {
                        return f64::NAN;
                    }
                    let origins = spec.n_steps - m + 1;
                    compensated_sum((0..origins).map(|i| path[i] * path[i + m])) / origins as f64
                })
                .collect();
            (x0, x, time_mean, windows, lags)
        })
        .collect();

    let column = |k: usize, j: usize| -> Vec<f64> {
        per_path.iter().map(|r| if k == 3 { r.3[j] } else { r.4[j] }).collect()
    };
    let window_integrals = (0..window_steps.len())
        .map(|j| if window_steps[j] <= spec.n_steps { column(3, j) } else { Vec::new() })
        .collect();
    let lag_products =
        (0..lag_steps.len()).map(|j| if lag_steps[j] <= spec.n_steps { column(4, j) } else { Vec::new() }).collect();
    Ok(PathEnsemble {
        spec: spec.clone(),
        initial: per_path.iter().map(|r| r.0).collect(),
        last: per_path.iter().map(|r| r.1).collect(),
        time_mean: per_path.iter().map(|r| r.2).collect(),
        window_integrals,
        lag_products,
    })
}

fn trapezoid(v: &[f64], dt: f64) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    dt * (compensated_sum(v[1..n - 1].iter().copied()) + 0.5 * (v[0] + v[n - 1]))
}

/// Inverse CDF of the grid density, linear between nodes.
struct StationaryCdf {
    xs: Vec<f64>,
    cum: Vec<f64>,
}

impl StationaryCdf {
    fn new(d: &Drift) -> Self {
        let xs: Vec<f64> = (d.lo..=d.hi).map(|i| d.b.x(i)).collect();
        let rho = &d.rho[d.lo..=d.hi];
        let dx = d.b.dx();
        let mut cum = Vec::with_capacity(rho.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for w in rho.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            cum.push(acc);
        }
        Self { xs, cum }
    }

    fn sample(&self, u: f64) -> f64 {
        let target = u * self.cum[self.cum.len() - 1];
        let j = self.cum.partition_point(|&c| c < target).clamp(1, self.cum.len() - 1);
        let (c0, c1) = (self.cum[j - 1], self.cum[j]);
        let w = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.5 };
        self.xs[j - 1] + w * (self.xs[j] - self.xs[j - 1])
    }
}

/// Statistic with a leave-one-path-out jackknife error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub standard_error: f64,
}

impl McEstimate {
    /// `|value - target| <= k * standard_error`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.standard_error
    }
}

/// Jackknife of `f` applied to the column means.
pub fn jackknife(columns: &[&[f64]], f: impl Fn(&[f64]) -> f64) -> Result<McEstimate> {
    let n = columns.first().map_or(0, |c| c.len());
    if n < 2 || columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("jackknife needs at least two samples per column".into()));
    }
    let sums: Vec<f64> = columns.iter().map(|c| compensated_sum(c.iter().copied())).collect();
    let full: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let value = f(&full);
    let mut means = vec![0.0; columns.len()];
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            for (j, c) in columns.iter().enumerate() {
                means[j] = (sums[j] - c[i]) / (n - 1) as f64;
            }
            f(&means)
        })
        .collect();
    let bar = compensated_sum(loo.iter().copied()) / n as f64;
    let ss = compensated_sum(loo.iter().map(|t| (t - bar) * (t - bar)));
    Ok(McEstimate { value, standard_error: ((n - 1) as f64 / n as f64 * ss).sqrt() })
}

/// Exported chi2 estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chi2Estimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_paths: usize,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t: f64,
    pub seed: u64,
}

/// `(1+2T)^3 / (2T)^4 [m4(W) - 3 m2(W)^2]` with central sample moments of
/// the window integrals `W`.
pub fn estimate_chi2(ensemble: &PathEnsemble, t: f64) -> Result<Chi2Estimate> {
    let spec = &ensemble.spec;
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("T must be positive, got {t}")));
    }
    if 2.0 * t > spec.n_steps as f64 * spec.dt * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "window 2T = {} exceeds the path length {}",
            2.0 * t,
            spec.n_steps as f64 * spec.dt
        )));
    }
    if ensemble.n_paths() < MIN_PATHS_CHI2 {
        return Err(Error::Precondition(format!(
            "{} paths is too few for an error bar; need at least {MIN_PATHS_CHI2}",
            ensemble.n_paths()
        )));
    }
    let w = ensemble
        .window_integrals(t)
        .ok_or_else(|| Error::Precondition(format!("window T = {t} was not recorded by the simulation")))?;
    let p2: Vec<f64> = w.iter().map(|v| v * v).collect();
    let p3: Vec<f64> = w.iter().zip(&p2).map(|(v, s)| v * s).collect();
    let p4: Vec<f64> = p2.iter().map(|s| s * s).collect();
    let scale = (1.0 + 2.0 * t).powi(3) / (2.0 * t).powi(4);
    let est = jackknife(&[w, &p2, &p3, &p4], |m| {
        let (m1, r2, r3, r4) = (m[0], m[1], m[2], m[3]);
        let c2 = r2 - m1 * m1;
        let c4 = r4 - 4.0 * r3 * m1 + 6.0 * r2 * m1 * m1 - 3.0 * m1.powi(4);
        scale * (c4 - 3.0 * c2 * c2)
    })?;
    Ok(Chi2Estimate {
        estimate: est.value,
        standard_error: est.standard_error,
        n_paths: ensemble.n_paths(),
        dt: spec.dt,
        t,
        seed: spec.seed,
    })
}

/// Autocovariance at a recorded lag.
pub fn autocovariance(ensemble: &PathEnsemble, lag: f64) -> Result<McEstimate> {
    let i = ensemble
        .spec
        .lags
        .iter()
        .position(|&l| l == lag)
        .filter(|&i| !ensemble.lag_products[i].is_empty())
        .ok_or_else(|| Error::Precondition(format!("lag {lag} was not recorded or exceeds the path length")))?;
    jackknife(&[&ensemble.lag_products[i], &ensemble.time_mean], |m| m[0] - m[1] * m[1])
}

/// Ensemble mean of the per-path time averages.
pub fn mean_position(ensemble: &PathEnsemble) -> Result<McEstimate> {
    jackknife(&[&ensemble.time_mean], |m| m[0])
}

/// Variance of the final positions.
pub fn position_variance(ensemble: &PathEnsemble) -> Result<McEstimate> {
    let sq: Vec<f64> = ensemble.last.iter().map(|x| x * x).collect();
    jackknife(&[&ensemble.last, &sq], |m| m[1] - m[0] * m[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn ho_phi0(n: usize) -> GridFunction<f64> {
        let g = GridSpec::new(10.0, n).unwrap();
        GridFunction::from_fn(&g, |x: f64| (-x * x / 2.0).exp() / std::f64::consts::PI.powf(0.25)).unwrap()
    }

    fn spec(n_steps: usize, n_paths: usize, seed: u64) -> SimulationSpec {
        SimulationSpec { dt: 0.01, n_steps, n_paths, seed, burn_in: 0, windows: vec![0.5], lags: vec![0.5] }
    }

    #[test]
    fn oscillator_drift_is_linear() {
        let d = drift(&ho_phi0(2001), &DriftOptions::default()).unwrap();
        for i in 0..d.values().len() {
            let x = d.values().x(i);
            if x.abs() <= 8.0 {
                assert!((d.values().values()[i] + x).abs() < 1e-4, "x={x}");
            }
        }
        assert_eq!(d.eval(0.0), 0.0);
        let (lo, hi) = d.walls();
        assert_eq!(lo, -hi);
        assert!(hi > 4.2 && hi < 4.4);
    }

    #[test]
    fn cauchy_drift() {
        let g = GridSpec::new(30.0, 6001).unwrap();
        let phi0 = GridFunction::from_fn(&g, |x: f64| (1.0 / (std::f64::consts::PI * (1.0 + x * x))).sqrt()).unwrap();
        let d = drift(&phi0, &DriftOptions::default()).unwrap();
        let (lo, hi) = d.walls();
        for i in 0..phi0.len() {
            let x = phi0.x(i);
            if x >= lo && x <= hi {
                assert!((d.values().values()[i] + x / (1.0 + x * x)).abs() < 1e-4, "x={x}");
            }
        }
    }

    #[test]
    fn zero_steps_is_the_initial_draw() {
        let d = drift(&ho_phi0(2001), &DriftOptions::default()).unwrap();
        let e = simulate(&d, &spec(0, 500, 3)).unwrap();
        assert_eq!(e.initial, e.last);
        assert_eq!(e.initial, e.time_mean);
        assert!(e.window_integrals(0.5).is_none());
        let v = position_variance(&e).unwrap();
        assert!(v.within(0.5, 3.0), "{v:?}");
    }

    #[test]
    fn deterministic_under_seed() {
        let d = drift(&ho_phi0(2001), &DriftOptions::default()).unwrap();
        let a = simulate(&d, &spec(120, 300, 9)).unwrap();
        let b = simulate(&d, &spec(120, 300, 9)).unwrap();
        let c = simulate(&d, &spec(120, 300, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.last, c.last);
        assert!(a.all_finite());
        let ea = estimate_chi2(&a, 0.5).unwrap();
        let eb = estimate_chi2(&b, 0.5).unwrap();
        assert_eq!(ea.estimate.to_bits(), eb.estimate.to_bits());
    }

    #[test]
    fn oscillator_stationary_variance() {
        let d = drift(&ho_phi0(2001), &DriftOptions::default()).unwrap();
        let e = simulate(&d, &spec(300, 20_000, 1)).unwrap();
        let v = position_variance(&e).unwrap();
        assert!(v.within(0.5, 3.0), "{v:?}");
        let m = mean_position(&e).unwrap();
        assert!(m.within(0.0, 3.0), "{m:?}");
    }

    #[test]
    fn preconditions() {
        let d = drift(&ho_phi0(2001), &DriftOptions::default()).unwrap();
        let e = simulate(&d, &spec(50, 200, 1)).unwrap();
        assert!(matches!(estimate_chi2(&e, 0.5), Err(Error::Precondition(_))));
        let few = simulate(&d, &spec(120, 50, 1)).unwrap();
        assert!(matches!(estimate_chi2(&few, 0.5), Err(Error::Precondition(_))));
        let mut stiff = spec(10, 10, 1);
        stiff.dt = 0.2;
        stiff.windows.clear();
        stiff.lags.clear();
        assert!(matches!(simulate(&d, &stiff), Err(Error::Stiffness { .. })));
        let mut odd = spec(10, 10, 1);
        odd.lags = vec![0.123];
        assert!(simulate(&d, &odd).is_err());
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let est = jackknife(&[&x], |m| m[0]).unwrap();
        let var = x.iter().map(|v| (v - 4.5).powi(2)).sum::<f64>() / 9.0;
        assert!((est.standard_error - (var / 10.0).sqrt()).abs() < 1e-12);
        assert_eq!(est.value, 4.5);
    }
}
