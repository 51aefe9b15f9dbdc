//! Scenario configuration, loaded from TOML. Every field has a default, so
//! an empty file is a valid scenario.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::FadingParams;
use crate::codebook::{universe_size, CodebookKind, DEFAULT_SDM_MAX_SWEEPS};
use crate::error::{invalid, Error, Result};
use crate::estimation::PilotConfig;
use crate::metrics::Scheme;
use crate::pbf::{AoConfig, Objective, WeightShift};
use crate::units::dbm_to_mw;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Rote,
    Fusion,
}

impl std::str::FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rote" => Ok(Learner::Rote),
            "fusion" => Ok(Learner::Fusion),
            other => Err(invalid(format!("unknown learner '{other}'"))),
        }
    }
}

/// Objective used to label codebook entries and to drive AO.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Rate,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// RIS elements (M).
    #[serde(alias = "M")]
    pub elements: usize,
    /// Phase levels per element (B).
    #[serde(alias = "B")]
    pub phase_levels: u32,
    /// Codebook cardinality (Q).
    #[serde(alias = "Q")]
    pub codebook_size: usize,
    pub n_subcarriers: usize,
    /// Pilots per pattern subframe.
    pub pilots_per_subframe: usize,
    /// Downlink transmit power, dBm.
    pub tx_power_dbm: f64,
    /// Uplink pilot power, dBm.
    pub pilot_power_dbm: f64,
    /// Noise power per subcarrier, dBm (uplink and downlink).
    pub noise_power_dbm: f64,
    pub codebook_kind: CodebookKind,
    pub learner: Learner,
    pub fusion_weights: WeightShift,
    pub objective: ObjectiveKind,
    pub schemes: Vec<Scheme>,
    /// Channel coherence time in pilot-subframe slots (T).
    pub coherence_slots: u64,
    pub n_trials: u64,
    pub master_seed: u64,
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    /// Fill the wall-time column. Off by default so output is byte-reproducible.
    pub record_timing: bool,
    pub sdm_max_sweeps: usize,
    pub ao: AoConfig,
    pub fading: FadingParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            elements: 32,
            phase_levels: 32,
            codebook_size: 32,
            n_subcarriers: 64,
            pilots_per_subframe: 1,
            tx_power_dbm: 0.0,
            pilot_power_dbm: -20.0,
            noise_power_dbm: -120.0,
            codebook_kind: CodebookKind::Dft,
            learner: Learner::Rote,
            fusion_weights: WeightShift::SubtractMin,
            objective: ObjectiveKind::Rate,
            schemes: Scheme::ALL.to_vec(),
            coherence_slots: 500,
            n_trials: 1000,
            master_seed: 1,
            workers: 0,
            record_timing: false,
            sdm_max_sweeps: DEFAULT_SDM_MAX_SWEEPS,
            ao: AoConfig::default(),
            fading: FadingParams::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "scenario config".into(),
            detail: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let (m, b, q) = (self.elements, self.phase_levels, self.codebook_size);
        if m == 0 || q == 0 || b < 2 {
            return Err(invalid(format!("need M >= 1, B >= 2, Q >= 1; got M = {m}, B = {b}, Q = {q}")));
        }
        let universe = universe_size(m, b);
        match self.codebook_kind {
            CodebookKind::Sdm => {
                if q < 2 || universe.is_some_and(|u| q as u64 > u) {
                    return Err(invalid(format!("SDM codebook needs 2 <= Q <= B^M, got Q = {q}")));
                }
            }
            CodebookKind::Dft => {
                if q > m || b as usize % m != 0 {
                    return Err(invalid(format!(
                        "DFT codebook needs Q <= M and B a multiple of M (M = {m}, B = {b}, Q = {q})"
                    )));
                }
            }
            CodebookKind::Exhaustive => {
                if universe != Some(q as u64) {
                    return Err(invalid(format!("exhaustive codebook needs Q = B^M, got Q = {q}")));
                }
            }
            CodebookKind::Random => {}
        }
        self.fading.validate()?;
        let spread = self
            .fading
            .direct
            .num_taps
            .max(self.fading.incident.num_taps + self.fading.reflected.num_taps - 1);
        if self.n_subcarriers < spread {
            return Err(invalid(format!(
                "{} subcarriers cannot resolve a {spread}-tap channel",
                self.n_subcarriers
            )));
        }
        self.pilot_config().validate()?;
        if !self.tx_power_dbm.is_finite() {
            return Err(invalid("tx power must be finite"));
        }
        if self.coherence_slots == 0 || self.n_trials == 0 {
            return Err(invalid("coherence_slots and n_trials must be >= 1"));
        }
        if self.schemes.is_empty() {
            return Err(invalid("at least one scheme must be enabled"));
        }
        if self.ao.max_sweeps == 0 || !(self.ao.rel_tol >= 0.0) {
            return Err(invalid("AO needs max_sweeps >= 1 and rel_tol >= 0"));
        }
        Ok(())
    }

    pub fn pilot_config(&self) -> PilotConfig {
        PilotConfig {
            pilot_power_dbm: self.pilot_power_dbm,
            noise_power_dbm: self.noise_power_dbm,
            pilots_per_subframe: self.pilots_per_subframe,
            n_subcarriers: self.n_subcarriers,
        }
    }

    pub fn tx_power(&self) -> f64 {
        dbm_to_mw(self.tx_power_dbm)
    }

    pub fn noise_power(&self) -> f64 {
        dbm_to_mw(self.noise_power_dbm)
    }

    pub fn objective_fn(&self) -> Objective {
        match self.objective {
            ObjectiveKind::Rate => Objective::Rate {
                tx_power: self.tx_power(),
                noise_power: self.noise_power(),
            },
            ObjectiveKind::Power => Objective::ReceivedPower {
                tx_power: self.tx_power(),
            },
        }
    }
}
