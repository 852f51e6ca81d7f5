//! Stage-by-stage cross-validation of the numeric chain against closed forms.

use std::f64::consts::PI;

use levylab_core::correlators::{chi2_small, two_point};
use levylab_core::reconstruct::{
    density_from_characteristic, density_from_fn, ground_state, potential, zero_mode_residual, InversionOptions,
    PotentialOptions,
};
use levylab_core::reference::{gamma, ReferenceKind};
use levylab_core::schrodinger::{matrix_elements, solve, SolveOptions};
use levylab_core::{GridSpec, LevyDensity, ReferenceModel};

fn sup_err(f: &levylab_core::GridFunction, g: impl Fn(f64) -> f64, range: f64) -> f64 {
    (0..f.len()).filter(|&i| f.x(i).abs() <= range).map(|i| (f.values()[i] - g(f.x(i))).abs()).fold(0.0, f64::max)
}

#[test]
fn cauchy_chain_matches_closed_forms() {
    let model = ReferenceModel::new(ReferenceKind::CauchyExample { a: 1.0 }).unwrap();
    let sigma = model.levy_density().unwrap();
    for s in [0.5, 1.0, 2.0] {
        assert!((sigma.characteristic(s, 1.0).unwrap() - model.characteristic(s).unwrap()).abs() < 1e-8);
    }
    let grid = GridSpec::new(12.0, 2001).unwrap();
    let d = density_from_characteristic(&sigma, &grid, &InversionOptions::default()).unwrap();
    assert!(d.converged);
    assert!(sup_err(&d.rho, |x| model.density(x).unwrap(), 10.0) < 1e-4);
    // Heavy tails: the grid holds only part of the mass.
    let expected_mass = 2.0 * 12.0f64.atan() / PI;
    assert!((d.mass - expected_mass).abs() < 1e-4, "mass {}", d.mass);

    let phi0 = ground_state(&d.rho, 1e-8).unwrap();
    let pot = potential(&phi0, &PotentialOptions::default()).unwrap();
    assert!(sup_err(&pot.v, |x| model.potential(x).unwrap(), 20.0) < 1e-3);
    assert!(zero_mode_residual(&phi0, &pot) < 1e-10);
}

#[test]
fn bessel_density_matches_closed_form() {
    let model = ReferenceModel::new(ReferenceKind::BesselExample { b: 1.0, rho: 1.0 }).unwrap();
    let sigma = model.levy_density().unwrap();
    let grid = GridSpec::new(10.0, 1001).unwrap();
    let d = density_from_characteristic(&sigma, &grid, &InversionOptions::default()).unwrap();
    let err = sup_err(&d.rho, |x| model.density(x).unwrap(), 10.0);
    assert!(err < 1e-6, "sup err {err}");
}

#[test]
fn oscillator_from_its_characteristic_function() {
    let model = ReferenceModel::new(ReferenceKind::HarmonicOscillator { omega: 1.0 }).unwrap();
    let grid = GridSpec::new(8.0, 1601).unwrap();
    let d = density_from_fn(|s| model.characteristic(s), &grid, &InversionOptions::default()).unwrap();
    assert!(sup_err(&d.rho, |x| model.density(x).unwrap(), 8.0) < 1e-10);
    let phi0 = ground_state(&d.rho, 1e-8).unwrap();
    let pot = potential(&phi0, &PotentialOptions::default()).unwrap();
    let sp = solve(&pot.v, 6, &SolveOptions::default()).unwrap();
    for n in 1..6 {
        assert!((sp.energies[n] - n as f64).abs() < 2e-3, "E_{n} = {}", sp.energies[n]);
    }
}

#[test]
fn alpha_family_moments_through_the_chain() {
    for alpha in [2.0, 2.25, 2.75] {
        let sigma = LevyDensity::alpha_family(alpha).unwrap();
        let grid = GridSpec::new(12.0, 2001).unwrap();
        let d = density_from_characteristic(&sigma, &grid, &InversionOptions::default()).unwrap();
        let phi0 = ground_state(&d.rho, 1e-8).unwrap();
        let pot = potential(&phi0, &PotentialOptions::default()).unwrap();
        let q = matrix_elements(&solve(&pot.v, 40, &SolveOptions::default()).unwrap());
        let m2 = gamma((3.0 - alpha) / 2.0) / PI;
        let m4 = gamma((5.0 - alpha) / 2.0) / PI;
        assert!(((two_point(&q, 0.0).unwrap() - m2) / m2).abs() < 1e-2, "alpha {alpha}");
        assert!(((chi2_small(&q) - m4) / m4).abs() < 1e-2, "alpha {alpha}");
        // The sigma moments are the same cumulants.
        let s2 = sigma.sigma_moment(1).unwrap().finite().unwrap();
        let s4 = sigma.sigma_moment(2).unwrap().finite().unwrap();
        assert!(((s2 - m2) / m2).abs() < 1e-8, "alpha {alpha}: {s2} vs {m2}");
        assert!(((s4 - m4) / m4).abs() < 1e-8, "alpha {alpha}: {s4} vs {m4}");
    }
}

#[test]
fn f32_chain_runs() {
    let sigma = levylab_core::levy::LevyDensity::<f32>::alpha_family(2.5).unwrap();
    let grid = levylab_core::grid::GridSpec::<f32>::new(10.0, 801).unwrap();
    let d = density_from_characteristic(&sigma, &grid, &InversionOptions::<f32>::default()).unwrap();
    let phi0 = ground_state(&d.rho, 1e-5_f32).unwrap();
    let pot = potential(&phi0, &PotentialOptions { floor: 1e-3_f32, require_decreasing: true }).unwrap();
    let q = matrix_elements(&solve(&pot.v, 12, &SolveOptions::<f32>::default()).unwrap());
    let m2 = (gamma(0.25f64) / PI) as f32;
    assert!(((two_point(&q, 0.0).unwrap() - m2) / m2).abs() < 2e-2);
}
