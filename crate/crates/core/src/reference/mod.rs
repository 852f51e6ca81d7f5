//! Closed-form models used as oracles.

pub mod special;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{LevyDensity, LevyFamily};
use crate::scalar::Real;

pub use special::{bessel_k1, gamma};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceKind<F> {
    HarmonicOscillator { omega: F },
    CauchyExample { a: F },
    BesselExample { b: F, rho: F },
    AlphaExample { alpha: F },
}

/// Pieces a model may provide in closed form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedForm {
    Sigma,
    Characteristic,
    Density,
    GroundState,
    Potential,
    Spectrum,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel<F> {
    pub kind: ReferenceKind<F>,
}

impl<F: Real> ReferenceModel<F> {
    pub fn new(kind: ReferenceKind<F>) -> Result<Self> {
        let ok = match kind {
            ReferenceKind::HarmonicOscillator { omega } => omega > F::zero(),
            ReferenceKind::CauchyExample { a } => a > F::zero(),
            ReferenceKind::BesselExample { b, rho } => b > F::zero() && rho > F::zero(),
            ReferenceKind::AlphaExample { alpha } => alpha >= F::lit(2.0) && alpha < F::lit(3.0),
        };
        if ok {
            Ok(Self { kind })
        } else {
            Err(Error::InvalidInput(format!("invalid reference model parameters: {kind:?}")))
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ReferenceKind::HarmonicOscillator { omega } => format!("harmonic_oscillator(omega={omega})"),
            ReferenceKind::CauchyExample { a } => format!("cauchy(a={a})"),
            ReferenceKind::BesselExample { b, rho } => format!("bessel_k1(b={b}, rho={rho})"),
            ReferenceKind::AlphaExample { alpha } => format!("alpha(alpha={alpha})"),
        }
    }

    /// The subset of closed forms this model provides.
    pub fn closed_forms(&self) -> Vec<ClosedForm> {
        use ClosedForm::*;
        match self.kind {
            ReferenceKind::HarmonicOscillator { .. } => {
                vec![Characteristic, Density, GroundState, Potential, Spectrum]
            }
            ReferenceKind::CauchyExample { .. } => vec![Sigma, Characteristic, Density, GroundState, Potential],
            ReferenceKind::BesselExample { .. } => vec![Sigma, Characteristic, Density, GroundState],
            ReferenceKind::AlphaExample { .. } => vec![Sigma],
        }
    }

    pub fn has(&self, what: ClosedForm) -> bool {
        self.closed_forms().contains(&what)
    }

    fn require(&self, what: ClosedForm, label: &'static str) -> Result<()> {
        if self.has(what) {
            Ok(())
        } else {
            Err(Error::Capability { model: self.name(), what: label })
        }
    }

    /// The Lévy density, for models that have one.
    pub fn levy_density(&self) -> Result<LevyDensity<F>> {
        self.require(ClosedForm::Sigma, "sigma")?;
        let family = match self.kind {
            ReferenceKind::CauchyExample { a } => LevyFamily::CauchyTail { scale: a },
            ReferenceKind::BesselExample { b, rho } => LevyFamily::BesselK1 { scale: b, rate: rho },
            ReferenceKind::AlphaExample { alpha } => LevyFamily::AlphaFamily { alpha },
            ReferenceKind::HarmonicOscillator { .. } => unreachable!("checked by require"),
        };
        LevyDensity::new(family)
    }

    pub fn sigma(&self, y: F) -> Result<F> {
        Ok(self.levy_density()?.sigma(y))
    }

    pub fn characteristic(&self, s: F) -> Result<F> {
        self.require(ClosedForm::Characteristic, "characteristic function")?;
        Ok(match self.kind {
            ReferenceKind::HarmonicOscillator { omega } => (-s * s / (F::lit(4.0) * omega)).exp(),
            ReferenceKind::CauchyExample { a } => (-a * s.abs()).exp(),
            ReferenceKind::BesselExample { b, rho } => (-b * (s * s + rho * rho).sqrt() + b * rho).exp(),
            ReferenceKind::AlphaExample { .. } => unreachable!("checked by require"),
        })
    }

    /// Ground-state density `phi0(x)^2`.
    pub fn density(&self, x: F) -> Result<F> {
        self.require(ClosedForm::Density, "density")?;
        let pi = F::PI();
        match self.kind {
            ReferenceKind::HarmonicOscillator { omega } => Ok((omega / pi).sqrt() * (-omega * x * x).exp()),
            ReferenceKind::CauchyExample { a } => Ok(a / (pi * (a * a + x * x))),
            ReferenceKind::BesselExample { b, rho } => {
                let r = (x * x + b * b).sqrt();
                Ok(b * rho / pi * bessel_k1(rho * r)? / r * (b * rho).exp())
            }
            ReferenceKind::AlphaExample { .. } => unreachable!("checked by require"),
        }
    }

    pub fn ground_state(&self, x: F) -> Result<F> {
        self.require(ClosedForm::GroundState, "ground state")?;
        Ok(self.density(x)?.sqrt())
    }

    /// `V = phi0'' / (2 phi0)`, zero at the ground-state energy.
    pub fn potential(&self, x: F) -> Result<F> {
        self.require(ClosedForm::Potential, "potential")?;
        let half = F::lit(0.5);
        Ok(match self.kind {
            ReferenceKind::HarmonicOscillator { omega } => half * omega * omega * x * x - half * omega,
            ReferenceKind::CauchyExample { a } => {
                let d = a * a + x * x;
                (F::lit(2.0) * x * x - a * a) / (F::lit(2.0) * d * d)
            }
            _ => unreachable!("checked by require"),
        })
    }

    /// Exact shifted energies and position matrix for the lowest `k` states.
    pub fn spectrum(&self, k: usize) -> Result<(Vec<F>, Vec<Vec<F>>)> {
        self.require(ClosedForm::Spectrum, "spectrum")?;
        match self.kind {
            ReferenceKind::HarmonicOscillator { omega } => ho_exact(omega, k),
            _ => unreachable!("checked by require"),
        }
    }
}

/// Oscillator levels `E_n = n omega` and `Q_{n,n+1} = sqrt((n+1)/(2 omega))`.
pub fn ho_exact<F: Real>(omega: F, k: usize) -> Result<(Vec<F>, Vec<Vec<F>>)> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("need at least two states, got {k}")));
    }
    if !(omega > F::zero()) {
        return Err(Error::InvalidInput(format!("omega must be positive, got {omega}")));
    }
    let energies = (0..k).map(|n| F::from_usize_lossy(n) * omega).collect();
    let mut q = vec![vec![F::zero(); k]; k];
    for n in 0..k - 1 {
        let v = (F::from_usize_lossy(n + 1) / (F::lit(2.0) * omega)).sqrt();
        q[n][n + 1] = v;
        q[n + 1][n] = v;
    }
    Ok((energies, q))
}
