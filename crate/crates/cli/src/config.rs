//! Pipeline configuration: a TOML file with one table per stage.

use std::fs;
use std::path::{Path, PathBuf};

use levylab_core::GridSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Defaults, printed by `--help`.
pub const DEFAULTS_HELP: &str = "\
Configuration defaults (TOML, unknown keys are rejected):
  [model]      family = alpha|cauchy|bessel|harmonic|tabulated (required)
               alpha (alpha family), scale (cauchy a, bessel b), rate (bessel rho),
               omega (harmonic), table (tabulated sigma, x,value CSV)
               mode = \"numeric\"   numeric: start from sigma (or C for harmonic)
                                   analytic: closed-form density, exact spectrum for harmonic
  [grid]       half_width = 12.0, points = 2001 (odd)
  [inversion]  s_max = auto, s_max_start = 16.0, max_refinements = 6
  [spectrum]   states = 40
  [chi2]       times = [0.01, 0.1, 1.0, 10.0, 100.0], truncation_step = 4,
               convergence_tol = 1e-3, energy_scale = 1, breakdown_terms = 12
  [sampler]    enabled = false, n_paths = 100000, dt = 0.01, n_steps = auto,
               burn_in = 0, seed = 1, times = [1.0], lags = [0.5, 1.0, 2.0]
  [output]     dir = \"out\"
  [tolerances] clip_rel = 1e-8, characteristic_floor = 1e-10, refine_tol = 1e-10,
               potential_floor = 1e-8, degeneracy_rel = 1e-10, sign_threshold = 1e-6,
               density_floor = 1e-8";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Alpha,
    Cauchy,
    Bessel,
    Harmonic,
    Tabulated,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Numeric,
    Analytic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default)]
    pub mode: Mode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { half_width: 12.0, points: 2001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_max: Option<f64>,
    pub s_max_start: f64,
    pub max_refinements: usize,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self { s_max: None, s_max_start: 16.0, max_refinements: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumConfig {
    pub states: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self { states: 40 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Chi2Config {
    pub times: Vec<f64>,
    pub truncation_step: usize,
    pub convergence_tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energy_scale: Option<f64>,
    pub breakdown_terms: usize,
}

impl Default for Chi2Config {
    fn default() -> Self {
        Self {
            times: vec![0.01, 0.1, 1.0, 10.0, 100.0],
            truncation_step: 4,
            convergence_tol: 1e-3,
            energy_scale: None,
            breakdown_terms: 12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    pub enabled: bool,
    pub n_paths: usize,
    pub dt: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<usize>,
    pub burn_in: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub lags: Vec<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            n_paths: 100_000,
            dt: 0.01,
            n_steps: None,
            burn_in: 0,
            seed: 1,
            times: vec![1.0],
            lags: vec![0.5, 1.0, 2.0],
        }
    }
}

impl SamplerConfig {
    /// Steps needed to cover the longest window and lag.
    pub fn steps(&self) -> usize {
        self.n_steps.unwrap_or_else(|| {
            let span = self.times.iter().map(|t| 2.0 * t).chain(self.lags.iter().copied()).fold(0.0, f64::max);
            (span / self.dt).round() as usize
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Overrides of numerical tolerances; unset entries keep the library defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clip_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub characteristic_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub potential_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degeneracy_rel: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density_floor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub inversion: InversionConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub chi2: Chi2Config,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

impl PipelineConfig {
    /// Parses TOML and validates.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config, or the `config` member of a `run.json` manifest.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            #[derive(Deserialize)]
            struct Manifest {
                config: PipelineConfig,
            }
            let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
            m.config.validate()?;
            return Ok(m.config);
        }
        Self::from_toml(&text)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        GridSpec::new(self.grid.half_width, self.grid.points).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        self.grid_spec()?;
        let m = &self.model;
        let positive = |name: &str, v: Option<f64>| -> Result<(), CliError> {
            match v {
                Some(x) if x > 0.0 && x.is_finite() => Ok(()),
                Some(x) => Err(CliError::Config(format!("model.{name} must be positive, got {x}"))),
                None => Err(CliError::Config(format!("model.{name} is required for family {:?}", m.family))),
            }
        };
        let allowed: &[&str] = match m.family {
            Family::Alpha => {
                match m.alpha {
                    Some(a) if (2.0..3.0).contains(&a) => {}
                    Some(a) => return bad(format!("model.alpha must lie in [2, 3), got {a}")),
                    None => return bad("model.alpha is required for the alpha family".into()),
                }
                if m.mode == Mode::Analytic {
                    return bad("the alpha family has no closed-form density; use mode = \"numeric\"".into());
                }
                &["alpha"]
            }
            Family::Cauchy => {
                positive("scale", m.scale)?;
                &["scale"]
            }
            Family::Bessel => {
                positive("scale", m.scale)?;
                positive("rate", m.rate)?;
                &["scale", "rate"]
            }
            Family::Harmonic => {
                positive("omega", m.omega)?;
                &["omega"]
            }
            Family::Tabulated => {
                if m.table.is_none() {
                    return bad("model.table is required for the tabulated family".into());
                }
                if m.mode == Mode::Analytic {
                    return bad("a tabulated density has no closed forms; use mode = \"numeric\"".into());
                }
                &["table"]
            }
        };
        let present = [
            ("alpha", m.alpha.is_some()),
            ("scale", m.scale.is_some()),
            ("rate", m.rate.is_some()),
            ("omega", m.omega.is_some()),
            ("table", m.table.is_some()),
        ];
        for (name, set) in present {
            if set && !allowed.contains(&name) {
                return bad(format!("model.{name} does not apply to family {:?}", m.family));
            }
        }
        if let Some(s) = self.inversion.s_max {
            if !(s > 0.0) {
                return bad(format!("inversion.s_max must be positive, got {s}"));
            }
        }
        if !(self.inversion.s_max_start > 0.0) {
            return bad("inversion.s_max_start must be positive".into());
        }
        if self.spectrum.states < 2 {
            return bad(format!("spectrum.states must be at least 2, got {}", self.spectrum.states));
        }
        if 4 * self.spectrum.states > self.grid.points {
            return bad(format!(
                "spectrum.states = {} needs at least {} grid points",
                self.spectrum.states,
                4 * self.spectrum.states
            ));
        }
        if self.chi2.times.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("chi2.times must be positive and finite".into());
        }
        if !(self.chi2.convergence_tol > 0.0) {
            return bad("chi2.convergence_tol must be positive".into());
        }
        if let Some(e) = self.chi2.energy_scale {
            if !(e > 0.0) {
                return bad(format!("chi2.energy_scale must be positive, got {e}"));
            }
        }
        let s = &self.sampler;
        if !(s.dt > 0.0 && s.dt.is_finite()) {
            return bad(format!("sampler.dt must be positive, got {}", s.dt));
        }
        if s.n_paths < 100 {
            return bad(format!("sampler.n_paths must be at least 100, got {}", s.n_paths));
        }
        if s.times.iter().chain(&s.lags).any(|t| !(*t > 0.0 && t.is_finite())) {
            return bad("sampler.times and sampler.lags must be positive".into());
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("clip_rel", t.clip_rel),
            ("characteristic_floor", t.characteristic_floor),
            ("refine_tol", t.refine_tol),
            ("potential_floor", t.potential_floor),
            ("degeneracy_rel", t.degeneracy_rel),
            ("sign_threshold", t.sign_threshold),
            ("density_floor", t.density_floor),
        ] {
            if let Some(x) = v {
                if !(x > 0.0 && x < 1.0) {
                    return bad(format!("tolerances.{name} must lie in (0, 1), got {x}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = PipelineConfig::from_toml("[model]\nfamily = \"alpha\"\nalpha = 2.5\n").unwrap();
        assert_eq!(cfg.grid, GridConfig::default());
        assert_eq!(cfg.spectrum.states, 40);
        assert_eq!(cfg.sampler.steps(), 200);
        assert_eq!(cfg.model.mode, Mode::Numeric);
    }

    #[test]
    fn rejects_bad_input() {
        let base = "[model]\nfamily = \"alpha\"\nalpha = 2.5\n";
        assert!(PipelineConfig::from_toml(&format!("{base}[grid]\npoints = 2000\n")).is_err());
        assert!(PipelineConfig::from_toml(&format!("{base}[grid]\nspacing = 0.1\n")).is_err());
        assert!(PipelineConfig::from_toml(&format!("{base}colour = 1\n")).is_err());
        assert!(PipelineConfig::from_toml("[model]\nfamily = \"alpha\"\nalpha = 3.0\n").is_err());
        assert!(PipelineConfig::from_toml("[model]\nfamily = \"cauchy\"\n").is_err());
        assert!(PipelineConfig::from_toml("[model]\nfamily = \"cauchy\"\nscale = 1.0\nomega = 2.0\n").is_err());
        assert!(PipelineConfig::from_toml(&format!("{base}[spectrum]\nstates = 1\n")).is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = PipelineConfig::from_toml("[model]\nfamily = \"bessel\"\nscale = 1.0\nrate = 0.5\n").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
