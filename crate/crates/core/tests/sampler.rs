//! Monte Carlo oracle against the spectral results.

use std::f64::consts::PI;

use levylab_core::correlators::{chi2_exact, chi2_small, two_point};
use levylab_core::reconstruct::{density_from_characteristic, ground_state, potential, InversionOptions, PotentialOptions};
use levylab_core::reference::ho_exact;
use levylab_core::sampler::{
    autocovariance, drift, estimate_chi2, mean_position, simulate, DriftOptions, SimulationSpec,
};
use levylab_core::schrodinger::{matrix_elements, solve, SolveOptions};
use levylab_core::{GridFunction, GridSpec, LevyDensity, MatrixElements};

fn oscillator_phi0() -> GridFunction {
    let g = GridSpec::new(10.0, 2001).unwrap();
    GridFunction::from_fn(&g, |x| (-x * x / 2.0).exp() / PI.powf(0.25)).unwrap()
}

#[test]
fn oscillator_autocovariance_matches_spectral_sum() {
    let (e, q) = ho_exact(1.0, 20).unwrap();
    let q = MatrixElements::from_dense(&q, &e).unwrap();
    let b = drift(&oscillator_phi0(), &DriftOptions::default()).unwrap();
    let spec = SimulationSpec {
        dt: 0.01,
        n_steps: 400,
        n_paths: 40_000,
        seed: 31,
        burn_in: 0,
        windows: vec![],
        lags: vec![0.5, 1.0, 2.0],
    };
    let ens = simulate(&b, &spec).unwrap();
    for lag in [0.5, 1.0, 2.0] {
        let est = autocovariance(&ens, lag).unwrap();
        let want = two_point(&q, lag).unwrap();
        assert!(est.within(want, 3.0), "lag {lag}: {est:?} vs {want}");
    }
    assert!(mean_position(&ens).unwrap().within(0.0, 3.0));
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let b = drift(&oscillator_phi0(), &DriftOptions::default()).unwrap();
    let spec = SimulationSpec {
        dt: 0.01,
        n_steps: 100,
        n_paths: 500,
        seed: 5,
        burn_in: 10,
        windows: vec![0.5],
        lags: vec![0.25],
    };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| simulate(&b, &spec).unwrap())
    };
    assert_eq!(run(1), run(4));
}

/// At small `T` the window integral is `2T X`, so the estimator approaches
/// `(1+2T)^3` times the sharp-time cumulant, which is what `chi2_exact` gives.
#[test]
fn alpha_family_small_window_agrees_with_spectral_value() {
    let sigma = LevyDensity::alpha_family(2.5).unwrap();
    let grid = GridSpec::new(12.0, 2001).unwrap();
    let d = density_from_characteristic(&sigma, &grid, &InversionOptions::default()).unwrap();
    let phi0 = ground_state(&d.rho, 1e-8).unwrap();
    let pot = potential(&phi0, &PotentialOptions::default()).unwrap();
    let q = matrix_elements(&solve(&pot.v, 40, &SolveOptions::default()).unwrap());

    let b = drift(&phi0, &DriftOptions::default()).unwrap();
    let t = 0.05;
    let spec = SimulationSpec {
        dt: 0.01,
        n_steps: 10,
        n_paths: 100_000,
        seed: 77,
        burn_in: 0,
        windows: vec![t],
        lags: vec![],
    };
    let est = estimate_chi2(&simulate(&b, &spec).unwrap(), t).unwrap();
    let exact = chi2_exact(&q, t).unwrap();
    assert!((est.estimate - exact).abs() <= 3.0 * est.standard_error, "{est:?} vs {exact}");
    // The leading-order value without the prefactor sits well outside the error bar.
    let bare = chi2_small(&q);
    assert!((est.estimate - bare).abs() > 3.0 * est.standard_error, "{est:?} vs {bare}");
}
