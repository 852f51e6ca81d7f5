//! Acceptance criteria, one line per criterion.
//!
//! Criteria listed in `EXPECTED_FAIL` are run at their stated tolerance and
//! reported as FAIL; they do not fail the target unless they start passing.

use std::f64::consts::PI;
use std::fs;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use levylab::config::PipelineConfig;
use levylab::pipeline::{run_pipeline, Pipeline, Stage};
use levylab::validate::{alpha_moments, k1_integral, oscillator_potential};
use levylab_core::correlators::{chi2_exact, chi2_large, chi2_report, chi2_small, stationarity_check, two_point, Chi2Options};
use levylab_core::levy::bochner_check;
use levylab_core::reference::{bessel_k1, ho_exact, ReferenceKind};
use levylab_core::schrodinger::{matrix_elements, solve, SolveOptions};
use levylab_core::{CharacteristicSamples, LevyDensity, MatrixElements, ReferenceModel};

/// Criteria whose literal statement cannot hold; the reason is printed.
const EXPECTED_FAIL: &[(&str, &str)] = &[
    ("4c", "the quoted V omits the factor 1/2 of V = phi0''/(2 phi0)"),
    ("7a", "chi2_exact(T)/chi2_small tends to (1+2T)^3 = 1.0612 at T = 0.01"),
];

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

struct Criterion {
    id: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn config(toml: &str) -> PipelineConfig {
    PipelineConfig::from_toml(toml).expect("static config")
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn ho_matrix(omega: f64, k: usize) -> MatrixElements {
    let (e, q) = ho_exact(omega, k).expect("valid oscillator");
    MatrixElements::from_dense(&q, &e).expect("symmetric")
}

fn alpha_pipeline(alpha: f64, stage: Stage) -> Result<Pipeline, Box<dyn std::error::Error>> {
    let mut p = Pipeline::new(config(&format!("[model]\nfamily = \"alpha\"\nalpha = {alpha:?}\n")));
    p.run(stage)?;
    Ok(p)
}

fn c1_oscillator_zeros() -> Outcome {
    let q = ho_matrix(1.0, 30);
    let (s, l) = (chi2_small(&q), chi2_large(&q)?);
    Ok((s.abs() < 1e-12 && l.abs() < 1e-12, format!("chi2_small {s:.1e}, chi2_large {l:.1e}")))
}

fn c2_oscillator_finite_t() -> Outcome {
    let q = ho_matrix(1.0, 30);
    let mut worst: f64 = 0.0;
    for t in [0.1, 1.0, 10.0] {
        worst = worst.max(chi2_exact(&q, t)?.abs());
    }
    Ok((worst < 1e-10, format!("max |chi2_exact| {worst:.1e}")))
}

fn c3_eigensolver() -> Outcome {
    let sp = solve(&oscillator_potential(12.0, 2001)?, 10, &SolveOptions::default())?;
    let q = matrix_elements(&sp);
    let e = (1..=8).map(|n| rel(sp.energies[n], n as f64)).fold(0.0, f64::max);
    let q01 = (q.get(0, 1) - 0.5f64.sqrt()).abs();
    let q12 = (q.get(1, 2) - 1.0).abs();
    let parity = sp.parity.iter().enumerate().all(|(k, &p)| p == if k % 2 == 0 { 1 } else { -1 });
    Ok((
        e < 1e-3 && q01 < 1e-4 && q12 < 1e-4 && parity,
        format!("E rel {e:.1e}, Q01 {q01:.1e}, Q12 {q12:.1e}, parity alternates {parity}"),
    ))
}

fn c4a_cauchy_exponent() -> Outcome {
    let d = LevyDensity::cauchy_tail(1.0)?;
    let mut worst: f64 = 0.0;
    for s in [0.5_f64, 1.0, 2.0] {
        worst = worst.max(rel(d.levy_exponent(s)?, s));
    }
    Ok((worst < 1e-6, format!("max rel err {worst:.1e}")))
}

fn cauchy_pipeline() -> Result<Pipeline, Box<dyn std::error::Error>> {
    let mut p = Pipeline::new(config("[model]\nfamily = \"cauchy\"\nscale = 1.0\n"));
    p.run(Stage::Potential)?;
    Ok(p)
}

fn c4b_cauchy_density() -> Outcome {
    let p = cauchy_pipeline()?;
    let rho = &p.outputs.density.as_ref().expect("ran").rho;
    let err = (0..rho.len())
        .filter(|&i| rho.x(i).abs() <= 10.0)
        .map(|i| (rho.values()[i] - 1.0 / (PI * (1.0 + rho.x(i).powi(2)))).abs())
        .fold(0.0, f64::max);
    Ok((err < 1e-4, format!("sup err {err:.1e} on |x| <= 10")))
}

fn c4c_cauchy_potential() -> Outcome {
    let p = cauchy_pipeline()?;
    let v = &p.outputs.potential.as_ref().expect("ran").potential.v;
    let (mut quoted, mut halved) = (0.0_f64, 0.0_f64);
    for i in 0..v.len() {
        let x = v.x(i);
        let w = (2.0 * x * x - 1.0) / (1.0 + x * x).powi(2);
        quoted = quoted.max((v.values()[i] - w).abs());
        halved = halved.max((v.values()[i] - 0.5 * w).abs());
    }
    Ok((
        quoted < 1e-3,
        format!("sup err {quoted:.2e} vs quoted V; {halved:.1e} vs V/2 on |x| <= {:.2}", v.x_max()),
    ))
}

fn c5a_bessel_characteristic() -> Outcome {
    let d = LevyDensity::bessel_k1(1.0, 1.0)?;
    let mut worst: f64 = 0.0;
    for s in [0.5_f64, 1.0, 2.0] {
        worst = worst.max((d.characteristic(s, 1.0)? - (-(s * s + 1.0).sqrt() + 1.0).exp()).abs());
    }
    Ok((worst < 1e-6, format!("max abs err {worst:.1e}")))
}

fn c5b_k1_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    for x in [0.5_f64, 1.0, 5.0] {
        worst = worst.max(rel(bessel_k1(x)?, k1_integral(x)?));
    }
    Ok((worst < 1e-10, format!("max rel err {worst:.1e}")))
}

fn c5c_small_rate_limit() -> Outcome {
    let d = LevyDensity::bessel_k1(1.0, 1e-3)?;
    let mut worst: f64 = 0.0;
    for s in [0.5_f64, 1.0, 2.0] {
        worst = worst.max((d.characteristic(s, 1.0)? - (-s).exp()).abs());
    }
    let b = ReferenceModel::new(ReferenceKind::BesselExample { b: 1.0, rho: 1e-3 })?;
    let c = ReferenceModel::new(ReferenceKind::CauchyExample { a: 1.0 })?;
    for x in [0.0, 0.5, 1.0, 3.0] {
        worst = worst.max(rel(b.density(x)?, c.density(x)?));
    }
    Ok((worst < 1e-2, format!("max deviation {worst:.1e}")))
}

fn c6_moment_identity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for alpha in [2.0, 2.5] {
        let p = alpha_pipeline(alpha, Stage::Spectrum)?;
        let q = &p.outputs.spectrum.as_ref().expect("ran").q;
        let (m2, m4) = alpha_moments(alpha);
        let (e2, e4) = (rel(two_point(q, 0.0)?, m2), rel(chi2_small(q), m4));
        ok &= e2 < 1e-2 && e4 < 1e-2;
        parts.push(format!("alpha {alpha}: two_point(0) rel {e2:.1e}, chi2_small rel {e4:.1e}"));
    }
    Ok((ok, parts.join("; ")))
}

fn alpha25_matrix() -> Result<MatrixElements, Box<dyn std::error::Error>> {
    Ok(alpha_pipeline(2.5, Stage::Spectrum)?.outputs.spectrum.expect("ran").q)
}

fn c7a_small_t() -> Outcome {
    let q = alpha25_matrix()?;
    let r = chi2_exact(&q, 0.01)? / chi2_small(&q);
    Ok(((0.95..=1.05).contains(&r), format!("chi2_exact(0.01)/chi2_small = {r:.5}")))
}

fn c7b_large_t() -> Outcome {
    let q = alpha25_matrix()?;
    let r = chi2_exact(&q, 100.0)? / chi2_large(&q)?;
    Ok(((r - 1.0).abs() <= 0.05, format!("chi2_exact(100)/chi2_large = {r:.5}")))
}

fn c8_monte_carlo() -> Outcome {
    let mut p = Pipeline::new(config(
        "[model]\nfamily = \"harmonic\"\nomega = 1.0\nmode = \"analytic\"\n[grid]\nhalf_width = 10.0\n\
         [spectrum]\nstates = 30\n[sampler]\nenabled = true\nn_paths = 100000\ndt = 0.01\nseed = 2024\n\
         times = [1.0]\nlags = [1.0]\n",
    ));
    p.run(Stage::Spectrum)?;
    p.run(Stage::Sample)?;
    let r = p.outputs.sampler.expect("ran");
    let c = &r.chi2[0];
    let a = &r.autocovariance[0];
    let want = 0.5 * (-1.0f64).exp();
    let ok = c.estimate.abs() <= 3.0 * c.standard_error && (a.value - want).abs() <= 3.0 * a.standard_error;
    Ok((
        ok,
        format!(
            "chi2(1) = {:.4} +- {:.4}; C(1) = {:.5} +- {:.5} vs {want:.5}",
            c.estimate, c.standard_error, a.value, a.standard_error
        ),
    ))
}

fn c9_properties() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();

    let cauchy = LevyDensity::cauchy_tail(1.0)?;
    let probe: Vec<f64> = (0..14).map(|i| 0.29 * i as f64).collect();
    let mut min_eig = f64::INFINITY;
    for n in [2.0, 3.0, 5.0] {
        let samples = CharacteristicSamples::from_density(&cauchy, &probe, 1.0 / n)?;
        min_eig = min_eig.min(bochner_check(&samples, &probe)?);
    }
    ok &= min_eig >= -1e-10;
    parts.push(format!("Bochner min eig {min_eig:.2e}"));

    let q = alpha25_matrix()?;
    let flips: Vec<bool> = (0..q.size()).map(|k| k % 3 == 1).collect();
    let f = q.with_sign_flips(&flips);
    let times = [0.01, 0.1, 1.0, 10.0, 100.0];
    let a = chi2_report(&q, &times, &Chi2Options::default())?;
    let b = chi2_report(&f, &times, &Chi2Options::default())?;
    let mut flip = (a.chi2_small - b.chi2_small).abs() / a.chi2_small.abs();
    flip = flip.max((a.chi2_large - b.chi2_large).abs() / a.chi2_large.abs());
    for (x, y) in a.curve.iter().zip(&b.curve) {
        flip = flip.max((x.chi2 - y.chi2).abs() / x.chi2.abs());
    }
    ok &= flip <= 1e-14;
    parts.push(format!("sign-flip {flip:.1e}"));

    let stat = stationarity_check(&q, 3.7, &[(0.0, 1.0), (2.0, -0.5), (1.5, 1.5), (-4.0, 6.0)])?;
    ok &= stat <= 1e-14;
    parts.push(format!("stationarity {stat:.1e}"));

    let mut worst = f64::INFINITY;
    for model in [
        "family = \"alpha\"\nalpha = 2.0",
        "family = \"alpha\"\nalpha = 2.5",
        "family = \"cauchy\"\nscale = 1.0",
        "family = \"bessel\"\nscale = 1.0\nrate = 1.0",
        "family = \"harmonic\"\nomega = 1.0",
    ] {
        let mut p = Pipeline::new(config(&format!("[model]\n{model}\n")));
        p.run(Stage::Spectrum)?;
        worst = worst.min(chi2_small(&p.outputs.spectrum.expect("ran").q));
    }
    ok &= worst >= -1e-10;
    parts.push(format!("min chi2_small {worst:.2e}"));

    let dir = tempfile::tempdir()?;
    let mut bytes = Vec::new();
    for run in ["a", "b"] {
        let mut cfg = config(
            "[model]\nfamily = \"alpha\"\nalpha = 2.5\n[sampler]\nenabled = true\nn_paths = 2000\nseed = 11\n",
        );
        cfg.output.dir = dir.path().join(run);
        run_pipeline(&cfg, &Stage::ALL, true)?;
        let read = |f: &str| fs::read(cfg.output.dir.join(f));
        bytes.push((read("chi2_report.json")?, read("sampler.json")?, read("q.csv")?));
    }
    let same = bytes[0] == bytes[1];
    ok &= same;
    parts.push(format!("byte-identical reports {same}"));
    Ok((ok, parts.join(", ")))
}

fn c10_scientific_output() -> Outcome {
    let mut parts = Vec::new();
    for alpha in [2.0, 2.25, 2.5, 2.75] {
        let p = alpha_pipeline(alpha, Stage::Chi2)?;
        let r = p.outputs.chi2.as_ref().expect("ran");
        parts.push(format!(
            "alpha {alpha}: chi2_large = {:+.6e} (K={} vs {}: {:+.6e}, converged {})",
            r.chi2_large, r.truncation_k, r.comparison_k, r.chi2_large_truncated, r.large_converged
        ));
    }
    Ok((true, parts.join("; ")))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria = [
        Criterion { id: "1", limit: secs(1), run: c1_oscillator_zeros },
        Criterion { id: "2", limit: secs(1), run: c2_oscillator_finite_t },
        Criterion { id: "3", limit: secs(5), run: c3_eigensolver },
        Criterion { id: "4a", limit: secs(10), run: c4a_cauchy_exponent },
        Criterion { id: "4b", limit: secs(10), run: c4b_cauchy_density },
        Criterion { id: "4c", limit: secs(10), run: c4c_cauchy_potential },
        Criterion { id: "5a", limit: secs(10), run: c5a_bessel_characteristic },
        Criterion { id: "5b", limit: secs(10), run: c5b_k1_oracle },
        Criterion { id: "5c", limit: secs(10), run: c5c_small_rate_limit },
        Criterion { id: "6", limit: secs(120), run: c6_moment_identity },
        Criterion { id: "7a", limit: secs(60), run: c7a_small_t },
        Criterion { id: "7b", limit: secs(60), run: c7b_large_t },
        Criterion { id: "8", limit: secs(300), run: c8_monte_carlo },
        Criterion { id: "9", limit: secs(600), run: c9_properties },
        Criterion { id: "10", limit: secs(600), run: c10_scientific_output },
    ];
    let mut unexpected = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok((ok, d)) => (ok && elapsed <= c.limit, d),
            Err(e) => (false, format!("error: {e}")),
        };
        let expected = EXPECTED_FAIL.iter().find(|(id, _)| *id == c.id);
        let label = match (pass, expected, c.id) {
            (_, _, "10") => "INFO".to_string(),
            (true, None, _) => "PASS".to_string(),
            (false, Some((_, why)), _) => format!("FAIL (expected: {why})"),
            (true, Some(_), _) => {
                unexpected += 1;
                "PASS (unexpected)".to_string()
            }
            (false, None, _) => {
                unexpected += 1;
                "FAIL".to_string()
            }
        };
        println!("criterion {:<3} {label}  {detail}  [{:.2} s, limit {} s]", c.id, elapsed.as_secs_f64(), c.limit.as_secs());
    }
    if unexpected == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{unexpected} criteria deviated from the expected outcome");
        ExitCode::FAILURE
    }
}
