//! Stage-by-stage orchestration and artifact emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use levylab_core::correlators::{chi2_report, two_point, Chi2Options};
use levylab_core::grid::{fmt17, GridFunction};
use levylab_core::reconstruct::{
    density_from_characteristic, density_from_fn, ground_state, potential, tail_decay_exponent,
    zero_mode_residual, Density, InversionOptions, Potential, PotentialOptions,
};
use levylab_core::reference::{ClosedForm, ReferenceKind};
use levylab_core::sampler::{
    autocovariance, drift, estimate_chi2, mean_position, position_variance, simulate, Chi2Estimate, DriftOptions,
    McEstimate, SimulationSpec,
};
use levylab_core::schrodinger::{matrix_elements, solve, MatrixElements, SolveOptions, Spectrum};
use levylab_core::{Chi2Report, LevyDensity, ReferenceModel};
use serde::{Deserialize, Serialize};

use crate::config::{Family, Mode, PipelineConfig};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Density,
    Potential,
    Spectrum,
    Chi2,
    Sample,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Density, Stage::Potential, Stage::Spectrum, Stage::Chi2, Stage::Sample];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Density => "density",
            Stage::Potential => "potential",
            Stage::Spectrum => "spectrum",
            Stage::Chi2 => "chi2",
            Stage::Sample => "sample",
        }
    }

    fn prerequisite(self) -> Option<Stage> {
        match self {
            Stage::Density => None,
            Stage::Potential | Stage::Sample => Some(Stage::Density),
            Stage::Spectrum => Some(Stage::Potential),
            Stage::Chi2 => Some(Stage::Spectrum),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| CliError::Config(format!("unknown stage `{s}`; expected one of density, potential, spectrum, chi2, sample")))
    }
}

/// Parses a comma-separated stage list.
pub fn parse_stages(list: &str) -> Result<Vec<Stage>, CliError> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

/// Requested stages plus their prerequisites, in execution order.
pub fn with_prerequisites(stages: &[Stage]) -> Vec<Stage> {
    let mut all: Vec<Stage> = Vec::new();
    for &s in stages {
        let mut cur = Some(s);
        while let Some(st) = cur {
            if !all.contains(&st) {
                all.push(st);
            }
            cur = st.prerequisite();
        }
    }
    all.sort();
    all
}

/// Default stage list for a config: everything, sampling only when enabled.
pub fn default_stages(cfg: &PipelineConfig) -> Vec<Stage> {
    Stage::ALL.into_iter().filter(|&s| s != Stage::Sample || cfg.sampler.enabled).collect()
}

/// Inversion diagnostics without the sampled density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InversionSummary {
    pub s_max: f64,
    pub characteristic_at_s_max: f64,
    pub s_intervals: usize,
    pub refinements: usize,
    pub last_change: f64,
    pub converged: bool,
    pub mass: f64,
    pub clipped_points: usize,
    pub min_before_clip: f64,
}

impl From<&Density<f64>> for InversionSummary {
    fn from(d: &Density<f64>) -> Self {
        Self {
            s_max: d.s_max,
            characteristic_at_s_max: d.characteristic_at_s_max,
            s_intervals: d.s_intervals,
            refinements: d.refinements,
            last_change: d.last_change,
            converged: d.converged,
            mass: d.mass,
            clipped_points: d.clipped_points,
            min_before_clip: d.min_before_clip,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensityStage {
    pub rho: GridFunction<f64>,
    pub phi0: GridFunction<f64>,
    /// `None` when the density came from a closed form.
    pub inversion: Option<InversionSummary>,
}

#[derive(Clone, Debug)]
pub struct PotentialStage {
    pub potential: Potential<f64>,
    pub zero_mode_residual: f64,
    pub tail_exponent: Option<f64>,
    pub closed_form: bool,
}

#[derive(Clone, Debug)]
pub struct SpectrumStage {
    pub energies: Vec<f64>,
    pub parity: Vec<i8>,
    pub q: MatrixElements<f64>,
    /// Numerical eigenpairs; `None` for the exact oscillator spectrum.
    pub solved: Option<Spectrum<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagEstimate {
    pub lag: f64,
    pub value: f64,
    pub standard_error: f64,
    /// `<X(0) X(lag)>` from the spectral sum, when a spectrum is available.
    pub spectral: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub burn_in: usize,
    pub seed: u64,
    pub walls: [f64; 2],
    pub chi2: Vec<Chi2Estimate>,
    pub autocovariance: Vec<LagEstimate>,
    pub mean_position: McEstimate,
    pub variance: McEstimate,
}

#[derive(Clone, Debug, Default)]
pub struct Outputs {
    pub density: Option<DensityStage>,
    pub potential: Option<PotentialStage>,
    pub spectrum: Option<SpectrumStage>,
    pub chi2: Option<Chi2Report>,
    pub sampler: Option<SamplerReport>,
    pub timings_ms: BTreeMap<Stage, f64>,
}

/// Runs stages in memory; each stage is also callable on its own.
pub struct Pipeline {
    pub config: PipelineConfig,
    pub outputs: Outputs,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Self {
        Self { config, outputs: Outputs::default() }
    }

    /// Runs `stage`, computing missing prerequisites first.
    pub fn run(&mut self, stage: Stage) -> Result<(), CliError> {
        if let Some(pre) = stage.prerequisite() {
            if !self.done(pre) {
                self.run(pre)?;
            }
        }
        let start = Instant::now();
        let cfg = &self.config;
        let out = &mut self.outputs;
        match stage {
            Stage::Density => out.density = Some(density_stage(cfg)?),
            Stage::Potential => out.potential = Some(potential_stage(cfg, expect(&out.density))?),
            Stage::Spectrum => out.spectrum = Some(spectrum_stage(cfg, expect(&out.potential))?),
            Stage::Chi2 => out.chi2 = Some(chi2_stage(cfg, &expect(&out.spectrum).q)?),
            Stage::Sample => {
                let q = out.spectrum.as_ref().map(|s| &s.q);
                out.sampler = Some(sample_stage(cfg, &expect(&out.density).phi0, q)?)
            }
        }
        out.timings_ms.insert(stage, start.elapsed().as_secs_f64() * 1e3);
        Ok(())
    }

    pub fn done(&self, stage: Stage) -> bool {
        let o = &self.outputs;
        match stage {
            Stage::Density => o.density.is_some(),
            Stage::Potential => o.potential.is_some(),
            Stage::Spectrum => o.spectrum.is_some(),
            Stage::Chi2 => o.chi2.is_some(),
            Stage::Sample => o.sampler.is_some(),
        }
    }
}

fn expect<T>(v: &Option<T>) -> &T {
    v.as_ref().expect("prerequisite stage has run")
}

/// Closed-form model matching the configured family, if one exists.
pub fn reference_model(cfg: &PipelineConfig) -> Option<ReferenceModel> {
    let m = &cfg.model;
    let kind = match m.family {
        Family::Harmonic => ReferenceKind::HarmonicOscillator { omega: m.omega? },
        Family::Cauchy => ReferenceKind::CauchyExample { a: m.scale? },
        Family::Bessel => ReferenceKind::BesselExample { b: m.scale?, rho: m.rate? },
        Family::Alpha => ReferenceKind::AlphaExample { alpha: m.alpha? },
        Family::Tabulated => return None,
    };
    ReferenceModel::new(kind).ok()
}

/// Lévy density for the configured family; `None` for the oscillator.
pub fn levy_density(cfg: &PipelineConfig) -> Result<Option<LevyDensity>, CliError> {
    let m = &cfg.model;
    let stage = CliError::stage(Stage::Density);
    let d = match m.family {
        Family::Harmonic => return Ok(None),
        Family::Alpha => LevyDensity::alpha_family(m.alpha.unwrap_or_default()),
        Family::Cauchy => LevyDensity::cauchy_tail(m.scale.unwrap_or_default()),
        Family::Bessel => LevyDensity::bessel_k1(m.scale.unwrap_or_default(), m.rate.unwrap_or_default()),
        Family::Tabulated => {
            let path = m.table.as_deref().unwrap_or(Path::new(""));
            let file = File::open(path).map_err(|e| CliError::io(path, e))?;
            GridFunction::read_csv(BufReader::new(file)).and_then(LevyDensity::tabulated)
        }
    };
    d.map(Some).map_err(stage)
}

pub fn inversion_options(cfg: &PipelineConfig) -> InversionOptions<f64> {
    let d = InversionOptions::default();
    let t = &cfg.tolerances;
    InversionOptions {
        s_max: cfg.inversion.s_max,
        s_max_start: cfg.inversion.s_max_start,
        characteristic_floor: t.characteristic_floor.unwrap_or(d.characteristic_floor),
        clip_rel: t.clip_rel.unwrap_or(d.clip_rel),
        refine_tol: t.refine_tol.unwrap_or(d.refine_tol),
        max_refinements: cfg.inversion.max_refinements,
    }
}

pub fn density_stage(cfg: &PipelineConfig) -> Result<DensityStage, CliError> {
    let err = || CliError::stage(Stage::Density);
    let grid = cfg.grid_spec()?;
    let opts = inversion_options(cfg);
    if cfg.model.mode == Mode::Analytic {
        let model = reference_model(cfg).ok_or_else(|| CliError::Config("no closed form for this model".into()))?;
        let rho = GridFunction::from_fn(&grid, |x| model.density(x).unwrap_or(f64::NAN)).map_err(err())?;
        let phi0 = GridFunction::from_fn(&grid, |x| model.ground_state(x).unwrap_or(f64::NAN)).map_err(err())?;
        if rho.values().iter().any(|v| !v.is_finite()) {
            return Err(CliError::Config(format!("{} has no closed-form density", model.name())));
        }
        return Ok(DensityStage { rho, phi0, inversion: None });
    }
    let density = match levy_density(cfg)? {
        Some(sigma) => density_from_characteristic(&sigma, &grid, &opts),
        None => {
            let model = reference_model(cfg).expect("oscillator config was validated");
            density_from_fn(|s| model.characteristic(s), &grid, &opts)
        }
    }
    .map_err(err())?;
    let phi0 = ground_state(&density.rho, opts.clip_rel).map_err(err())?;
    let inversion = Some(InversionSummary::from(&density));
    Ok(DensityStage { rho: density.rho, phi0, inversion })
}

pub fn potential_options(cfg: &PipelineConfig) -> PotentialOptions<f64> {
    let d = PotentialOptions::default();
    PotentialOptions { floor: cfg.tolerances.potential_floor.unwrap_or(d.floor), ..d }
}

pub fn potential_stage(cfg: &PipelineConfig, density: &DensityStage) -> Result<PotentialStage, CliError> {
    let err = CliError::stage(Stage::Potential);
    let phi0 = &density.phi0;
    let closed = cfg.model.mode == Mode::Analytic
        && reference_model(cfg).is_some_and(|m| m.has(ClosedForm::Potential));
    let pot = if closed {
        let model = reference_model(cfg).expect("checked above");
        // Same layout as the numeric potential: the outermost points are walls.
        let half = (phi0.len() - 1) / 2 - 1;
        let v = GridFunction::from_fn(&phi0.spec(), |x| model.potential(x).unwrap_or(f64::NAN))
            .and_then(|v| v.restrict_symmetric(half))
            .map_err(err)?;
        Potential { v, retained_half: half, full_points: phi0.len(), floor: 0.0 }
    } else {
        potential(phi0, &potential_options(cfg)).map_err(err)?
    };
    Ok(PotentialStage {
        zero_mode_residual: zero_mode_residual(phi0, &pot),
        tail_exponent: tail_decay_exponent(phi0, pot.retained_half),
        potential: pot,
        closed_form: closed,
    })
}

pub fn solve_options(cfg: &PipelineConfig) -> SolveOptions<f64> {
    let d = SolveOptions::default();
    let t = &cfg.tolerances;
    SolveOptions {
        degeneracy_rel: t.degeneracy_rel.unwrap_or(d.degeneracy_rel),
        sign_threshold: t.sign_threshold.unwrap_or(d.sign_threshold),
        ..d
    }
}

pub fn spectrum_stage(cfg: &PipelineConfig, pot: &PotentialStage) -> Result<SpectrumStage, CliError> {
    let err = || CliError::stage(Stage::Spectrum);
    let k = cfg.spectrum.states;
    if cfg.model.mode == Mode::Analytic {
        if let Some(model) = reference_model(cfg).filter(|m| m.has(ClosedForm::Spectrum)) {
            let (energies, q) = model.spectrum(k).map_err(err())?;
            let q = MatrixElements::from_dense(&q, &energies).map_err(err())?;
            let parity = (0..k).map(|n| if n % 2 == 0 { 1 } else { -1 }).collect();
            return Ok(SpectrumStage { energies, parity, q, solved: None });
        }
    }
    let spectrum = solve(&pot.potential.v, k, &solve_options(cfg)).map_err(err())?;
    let q = matrix_elements(&spectrum);
    Ok(SpectrumStage { energies: spectrum.energies.clone(), parity: spectrum.parity.clone(), q, solved: Some(spectrum) })
}

pub fn chi2_options(cfg: &PipelineConfig) -> Chi2Options<f64> {
    Chi2Options {
        energy_scale: cfg.chi2.energy_scale,
        truncation_step: cfg.chi2.truncation_step,
        convergence_tol: cfg.chi2.convergence_tol,
        breakdown_terms: cfg.chi2.breakdown_terms,
    }
}

pub fn chi2_stage(cfg: &PipelineConfig, q: &MatrixElements<f64>) -> Result<Chi2Report, CliError> {
    chi2_report(q, &cfg.chi2.times, &chi2_options(cfg)).map_err(CliError::stage(Stage::Chi2))
}

pub fn sample_stage(
    cfg: &PipelineConfig,
    phi0: &GridFunction<f64>,
    q: Option<&MatrixElements<f64>>,
) -> Result<SamplerReport, CliError> {
    let err = || CliError::stage(Stage::Sample);
    let s = &cfg.sampler;
    let mut opts = DriftOptions::default();
    if let Some(f) = cfg.tolerances.density_floor {
        opts.density_floor = f;
    }
    let b = drift(phi0, &opts).map_err(err())?;
    let spec = SimulationSpec {
        dt: s.dt,
        n_steps: s.steps(),
        n_paths: s.n_paths,
        seed: s.seed,
        burn_in: s.burn_in,
        windows: s.times.clone(),
        lags: s.lags.clone(),
    };
    let ens = simulate(&b, &spec).map_err(err())?;
    let chi2 = s.times.iter().map(|&t| estimate_chi2(&ens, t)).collect::<Result<Vec<_>, _>>().map_err(err())?;
    let mut lags = Vec::with_capacity(s.lags.len());
    for &lag in &s.lags {
        let est = autocovariance(&ens, lag).map_err(err())?;
        let spectral = q.map(|q| two_point(q, lag)).transpose().map_err(err())?;
        lags.push(LagEstimate { lag, value: est.value, standard_error: est.standard_error, spectral });
    }
    let (lo, hi) = b.walls();
    Ok(SamplerReport {
        n_paths: s.n_paths,
        n_steps: spec.n_steps,
        dt: s.dt,
        burn_in: s.burn_in,
        seed: s.seed,
        walls: [lo, hi],
        chi2,
        autocovariance: lags,
        mean_position: mean_position(&ens).map_err(err())?,
        variance: position_variance(&ens).map_err(err())?,
    })
}

/// Writes the artifacts of one completed stage; returns the file names.
pub fn write_stage(dir: &Path, stage: Stage, out: &Outputs) -> Result<Vec<String>, CliError> {
    let mut names = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(&mut dyn Write) -> std::io::Result<()>| -> Result<(), CliError> {
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(&path, e))?;
        names.push(name.to_string());
        Ok(())
    };
    match stage {
        Stage::Density => {
            let d = expect(&out.density);
            emit("density.csv", &|w| d.rho.write_csv(w))?;
            emit("phi0.csv", &|w| d.phi0.write_csv(w))?;
        }
        Stage::Potential => {
            let p = expect(&out.potential);
            emit("potential.csv", &|w| p.potential.v.write_csv(w))?;
        }
        Stage::Spectrum => {
            let s = expect(&out.spectrum);
            emit("spectrum.csv", &|w| {
                writeln!(w, "k,E_k,parity")?;
                for (k, (e, p)) in s.energies.iter().zip(&s.parity).enumerate() {
                    writeln!(w, "{k},{},{p}", fmt17(*e))?;
                }
                Ok(())
            })?;
            emit("q.csv", &|w| s.q.write_csv(w))?;
            if let Some(solved) = &s.solved {
                emit("states.csv", &|w| solved.write_states_csv(w))?;
            }
        }
        Stage::Chi2 => {
            let r = expect(&out.chi2);
            let json = serde_json::to_string_pretty(r)?;
            emit("chi2_report.json", &|w| writeln!(w, "{json}"))?;
            emit("chi2_curve.csv", &|w| r.write_curve_csv(w))?;
        }
        Stage::Sample => {
            let json = serde_json::to_string_pretty(expect(&out.sampler))?;
            emit("sampler.json", &|w| writeln!(w, "{json}"))?;
        }
    }
    Ok(names)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Versions {
    pub levylab: String,
    pub levylab_core: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inversion: Option<InversionSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retained_extent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero_mode_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw_ground_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rayleigh_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_orthonormality_defect: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parity_defect: Option<f64>,
}

impl Diagnostics {
    fn collect(out: &Outputs) -> Self {
        let mut d = Self::default();
        if let Some(den) = &out.density {
            d.inversion = den.inversion.clone();
        }
        if let Some(p) = &out.potential {
            d.retained_extent = Some(p.potential.retained_extent());
            d.zero_mode_residual = Some(p.zero_mode_residual);
            d.tail_exponent = p.tail_exponent;
        }
        if let Some(s) = &out.spectrum {
            d.parity_defect = Some(s.q.parity_defect());
            if let Some(solved) = &s.solved {
                d.raw_ground_energy = Some(solved.raw_ground_energy);
                d.max_rayleigh_defect = Some(solved.max_rayleigh_defect);
                d.max_orthonormality_defect = Some(solved.max_orthonormality_defect);
            }
        }
        d
    }
}

/// `run.json`: enough to reproduce the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: PipelineConfig,
    pub stages: Vec<Stage>,
    pub versions: Versions,
    pub timings_ms: BTreeMap<Stage, f64>,
    pub artifacts: Vec<String>,
    pub diagnostics: Diagnostics,
}

pub const FAILED_MARKER: &str = "FAILED";

/// Runs `stages` (plus prerequisites), writing artifacts into the configured
/// output directory as each stage completes. On failure the artifacts of the
/// completed stages stay in place next to a `FAILED` marker.
pub fn run_pipeline(cfg: &PipelineConfig, stages: &[Stage], quiet: bool) -> Result<Outputs, CliError> {
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let marker = dir.join(FAILED_MARKER);
    if marker.exists() {
        fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))?;
    }
    let plan = with_prerequisites(stages);
    let mut pipe = Pipeline::new(cfg.clone());
    let mut artifacts = Vec::new();
    let mut failure = None;
    for &stage in &plan {
        if !quiet {
            eprintln!("[levylab] {stage} ...");
        }
        let step = pipe.run(stage).and_then(|_| write_stage(&dir, stage, &pipe.outputs));
        match step {
            Ok(names) => artifacts.extend(names),
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
        if !quiet {
            eprintln!("[levylab] {stage} done in {:.1} ms", pipe.outputs.timings_ms[&stage]);
        }
    }
    artifacts.push("run.json".into());
    let manifest = Manifest {
        status: if failure.is_some() { "failed".into() } else { "ok".into() },
        failed_stage: failure.as_ref().and_then(CliError::failed_stage),
        error: failure.as_ref().map(|e| e.to_string()),
        config: cfg.clone(),
        stages: plan,
        versions: Versions {
            levylab: env!("CARGO_PKG_VERSION").into(),
            levylab_core: levylab_core::VERSION.into(),
        },
        timings_ms: pipe.outputs.timings_ms.clone(),
        artifacts,
        diagnostics: Diagnostics::collect(&pipe.outputs),
    };
    write_json(&dir.join("run.json"), &manifest)?;
    match failure {
        Some(e) => {
            fs::write(&marker, format!("{e}\n")).map_err(|io| CliError::io(&marker, io))?;
            Err(e)
        }
        None => Ok(pipe.outputs),
    }
}

fn write_json<T: Serialize>(path: &PathBuf, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}
