//! Link performance measures: OFDM achievable rate, received power and the
//! overhead-discounted effective rate.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::units::linear_to_db;

/// Mean over subcarriers of `log2(1 + P |h_k|^2 / sigma^2)`, equal power per subcarrier.
pub fn achievable_rate(h_eff: &[Complex64], tx_power: f64, noise_power: f64) -> f64 {
    if h_eff.is_empty() {
        return 0.0;
    }
    let snr_scale = tx_power / noise_power;
    h_eff
        .iter()
        .map(|h| (1.0 + snr_scale * h.norm_sqr()).log2())
        .sum::<f64>()
        / h_eff.len() as f64
}

/// Same as [`achievable_rate`] for per-subcarrier channel gains `|h_k|^2`.
pub fn achievable_rate_from_gains(gains: &[f64], tx_power: f64, noise_power: f64) -> f64 {
    if gains.is_empty() {
        return 0.0;
    }
    let snr_scale = tx_power / noise_power;
    gains.iter().map(|g| (1.0 + snr_scale * g).log2()).sum::<f64>() / gains.len() as f64
}

/// `(1 - tau / T) * rate`.
pub fn effective_rate(rate: f64, tau: u64, coherence: u64) -> Result<f64> {
    if coherence == 0 {
        return Err(invalid("coherence time must be > 0"));
    }
    if tau > coherence {
        return Err(invalid(format!(
            "training overhead {tau} exceeds coherence time {coherence}"
        )));
    }
    Ok((1.0 - tau as f64 / coherence as f64) * rate)
}

/// Received power in linear units and dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceivedPower {
    pub linear: f64,
    pub db: f64,
}

/// `P * mean_k |h_k|^2`.
pub fn received_power(h_eff: &[Complex64], tx_power: f64) -> ReceivedPower {
    let mean = if h_eff.is_empty() {
        0.0
    } else {
        h_eff.iter().map(|h| h.norm_sqr()).sum::<f64>() / h_eff.len() as f64
    };
    let linear = tx_power * mean;
    ReceivedPower {
        linear,
        db: linear_to_db(linear),
    }
}

/// Rate of a configured link together with its training overhead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateResult {
    pub rate_bps_hz: f64,
    pub effective_rate_bps_hz: f64,
    pub tau_slots: u64,
    pub coherence_slots: u64,
}

impl RateResult {
    pub fn new(rate_bps_hz: f64, tau_slots: u64, coherence_slots: u64) -> Result<Self> {
        Ok(Self {
            rate_bps_hz,
            effective_rate_bps_hz: effective_rate(rate_bps_hz, tau_slots, coherence_slots)?,
            tau_slots,
            coherence_slots,
        })
    }
}

/// Training and beamforming schemes compared by the harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Codebook scan (one composite estimate per pattern) plus learning.
    Codebook,
    /// Cascaded channel estimation followed by element-wise AO.
    Ao,
    /// A single random pattern.
    Random,
    /// Perfect-CSI coherent upper bound, no training.
    Oracle,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Codebook, Scheme::Ao, Scheme::Random, Scheme::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Codebook => "codebook",
            Scheme::Ao => "ao",
            Scheme::Random => "random",
            Scheme::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "codebook" => Ok(Scheme::Codebook),
            "ao" => Ok(Scheme::Ao),
            "random" => Ok(Scheme::Random),
            "oracle" => Ok(Scheme::Oracle),
            other => Err(invalid(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Pilot subframes spent on training before data transmission.
///
/// Only pattern-training subframes count; feedback and control signalling are
/// reported separately.
pub fn training_overhead(scheme: Scheme, num_elements: usize, codebook_size: usize, pilots: usize) -> u64 {
    let subframes = match scheme {
        Scheme::Codebook => codebook_size,
        Scheme::Ao => num_elements + 1,
        Scheme::Random => 1,
        Scheme::Oracle => 0,
    };
    (subframes * pilots) as u64
}
