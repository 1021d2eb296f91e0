use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Largest chain handled with dense storage (dimension 4096).
pub const MAX_SITES: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelSign {
    /// Ising term `-J Σ σzσz`.
    Ferro,
    /// Ising term `+J Σ σzσz`.
    Antiferro,
}

impl ModelSign {
    /// Prefactor multiplying `J Σ σzσz`.
    pub fn ising_prefactor(self) -> f64 {
        match self {
            ModelSign::Ferro => -1.0,
            ModelSign::Antiferro => 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathMode {
    Stationary,
    Nonstationary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelatorMode {
    Numeric,
    AnalyticAfm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateBoundMode {
    DirectNorm,
    Relaxed,
}

/// How Heisenberg-picture bath operators are propagated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    Eigen,
    CrankNicolson,
}

/// Integrand of the relaxed state-space bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelaxedIntegrand {
    /// `|Re Γ(t,s)|`
    AbsRe,
    /// Signed `Re Γ(t,s)`; may produce a non-monotone series.
    Re,
}

/// Which reduced state enters the direct state-space bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    Redfield,
    Exact,
}

/// Which matrix enters `‖L - L†‖` in the Liouville-space bound.
///
/// `M` is the plain vectorised generator, `d|ρ⟩/dt = M|ρ⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiouvilleConvention {
    /// `L = M`, so the integrand is `‖M - M†‖`.
    Generator,
    /// `i|ρ̇⟩ = L|ρ⟩`, so `L = iM` and the integrand is `‖M + M†‖`.
    Schrodinger,
}

/// Number of modes in the analytic antiferromagnetic correlator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AfmModes {
    Continuum,
    Finite(usize),
}

fn default_n() -> usize {
    10
}
fn default_j() -> f64 {
    0.65
}
fn default_h() -> f64 {
    0.9
}
fn default_g() -> f64 {
    0.4
}
fn default_beta() -> f64 {
    1.0
}
fn default_model() -> ModelSign {
    ModelSign::Ferro
}
fn default_bath() -> BathMode {
    BathMode::Stationary
}
fn default_correlator() -> CorrelatorMode {
    CorrelatorMode::Numeric
}
fn default_state_bound() -> StateBoundMode {
    StateBoundMode::Relaxed
}
fn default_propagation() -> Propagation {
    Propagation::Eigen
}
fn default_relaxed() -> RelaxedIntegrand {
    RelaxedIntegrand::AbsRe
}
fn default_state_source() -> StateSource {
    StateSource::Redfield
}
fn default_convention() -> LiouvilleConvention {
    LiouvilleConvention::Generator
}
fn default_afm_modes() -> AfmModes {
    AfmModes::Continuum
}

/// One simulation instance. Every field has a default so an empty JSON
/// object yields the canonical ferromagnetic run (N=10, J=0.65, h=0.9,
/// g=0.4, β=1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainParams {
    #[serde(default = "default_model")]
    pub model: ModelSign,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_j")]
    pub j: f64,
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    /// Grid step; defaults to `0.01 / J`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Horizon; defaults to `1.2 / J`.
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_bath")]
    pub bath_mode: BathMode,
    #[serde(default = "default_correlator")]
    pub correlator_mode: CorrelatorMode,
    #[serde(default = "default_state_bound")]
    pub state_bound_mode: StateBoundMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_propagation")]
    pub propagation: Propagation,
    #[serde(default = "default_relaxed")]
    pub relaxed_integrand: RelaxedIntegrand,
    #[serde(default = "default_state_source")]
    pub state_source: StateSource,
    #[serde(default = "default_convention")]
    pub liouville_convention: LiouvilleConvention,
    #[serde(default = "default_afm_modes")]
    pub afm_modes: AfmModes,
}

impl Default for ChainParams {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl ChainParams {
    pub fn paper_default() -> Self {
        Self::default()
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_couplings(mut self, j: f64, h: f64, g: f64) -> Self {
        self.j = j;
        self.h = h;
        self.g = g;
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_model(mut self, model: ModelSign) -> Self {
        self.model = model;
        self
    }

    pub fn with_grid(mut self, dt: f64, t_max: f64) -> Self {
        self.dt = Some(dt);
        self.t_max = Some(t_max);
        self
    }

    /// Energy scale used for the default grid; `J` unless it vanishes.
    fn time_unit(&self) -> f64 {
        if self.j.abs() > 0.0 {
            self.j.abs()
        } else {
            1.0
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt.unwrap_or(0.01 / self.time_unit())
    }

    pub fn t_max(&self) -> f64 {
        self.t_max.unwrap_or(1.2 / self.time_unit())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::with_horizon(self.dt(), self.t_max())
            .map_err(|e| Error::config("dt", e.to_string()))
    }

    pub fn hilbert_dim(&self) -> usize {
        1 << self.n
    }

    pub fn bath_dim(&self) -> usize {
        1 << (self.n - 1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "chain needs at least two sites"));
        }
        if self.n > MAX_SITES {
            return Err(Error::config(
                "n",
                format!("at most {MAX_SITES} sites are supported, got {}", self.n),
            ));
        }
        for (field, value) in [("j", self.j), ("h", self.h), ("g", self.g)] {
            if !value.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if self.j < 0.0 {
            return Err(Error::config(
                "j",
                "J is a magnitude; select the sign with `model`",
            ));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::config("beta", "must be finite and nonnegative"));
        }
        let dt = self.dt();
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config("dt", "must be positive"));
        }
        let t_max = self.t_max();
        if !(t_max.is_finite() && t_max >= dt) {
            return Err(Error::config("t_max", "must be at least dt"));
        }
        if self.correlator_mode == CorrelatorMode::AnalyticAfm {
            if self.model != ModelSign::Antiferro {
                return Err(Error::config(
                    "correlator_mode",
                    "analytic_afm requires model = antiferro",
                ));
            }
            if self.g >= 1.0 {
                return Err(Error::config("g", "analytic_afm requires g < 1"));
            }
            if self.bath_mode == BathMode::Nonstationary {
                return Err(Error::config(
                    "bath_mode",
                    "analytic_afm has no non-stationary variant",
                ));
            }
        }
        if let AfmModes::Finite(0) = self.afm_modes {
            return Err(Error::config("afm_modes", "need at least one mode"));
        }
        Ok(())
    }

    /// Intrinsic time of the single-spin subsystem, `1 / (2 sqrt(h² + g²))`.
    pub fn tau_system(&self) -> f64 {
        1.0 / (2.0 * (self.h * self.h + self.g * self.g).sqrt())
    }

    /// Interaction time `1 / J`.
    pub fn tau_interaction(&self) -> f64 {
        1.0 / self.j
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_gives_paper_parameters() {
        let p = ChainParams::default();
        assert_eq!(p.n, 10);
        assert_eq!(p.model, ModelSign::Ferro);
        assert_eq!((p.j, p.h, p.g, p.beta), (0.65, 0.9, 0.4, 1.0));
        assert!((p.dt() - 0.01 / 0.65).abs() < 1e-15);
        assert_eq!(p.grid().unwrap().len(), 121);
        p.validate().unwrap();
    }

    #[test]
    fn invariant_violations_name_the_field() {
        let err = ChainParams::default().with_n(1).validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "n"));
        let mut p = ChainParams {
            correlator_mode: CorrelatorMode::AnalyticAfm,
            ..Default::default()
        };
        let err = p.validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "correlator_mode"));
        p.model = ModelSign::Antiferro;
        p.validate().unwrap();
        let err = ChainParams::default().with_n(13).validate().unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "n"));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ChainParams>(r#"{"lambda": 1.0}"#).is_err());
        let p: ChainParams =
            serde_json::from_str(r#"{"model": "antiferro", "afm_modes": {"finite": 8}}"#).unwrap();
        assert_eq!(p.afm_modes, AfmModes::Finite(8));
    }

    #[test]
    fn timescales() {
        let p = ChainParams::default();
        assert!((p.tau_system() - 1.0 / (2.0 * 0.97f64.sqrt())).abs() < 1e-15);
        assert!((p.tau_interaction() - 1.0 / 0.65).abs() < 1e-15);
    }
}
