//! Uplink pilot-based channel estimation: per-pattern composite estimates,
//! the cascaded least-squares baseline, and analytic overhead calculators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, ChannelResponse};
use crate::codebook::{gen_dft_codebook, ReflectionPattern};
use crate::error::{invalid, mismatch, Error, Result};
use crate::units::dbm_to_mw;

/// Relative singular-value threshold for the training-design rank test.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PilotConfig {
    pub pilot_power_dbm: f64,
    /// Noise power per subcarrier.
    pub noise_power_dbm: f64,
    /// Unit-modulus pilots sent per pattern subframe.
    pub pilots_per_subframe: usize,
    pub n_subcarriers: usize,
}

impl PilotConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.pilot_power_dbm.is_finite() || !self.noise_power_dbm.is_finite() {
            return Err(invalid("pilot and noise powers must be finite dBm values"));
        }
        if self.pilots_per_subframe == 0 || self.n_subcarriers == 0 {
            return Err(invalid("pilots_per_subframe and n_subcarriers must be >= 1"));
        }
        Ok(())
    }

    /// LS error variance of one subframe: `sigma^2 / (P * K)`.
    pub fn error_variance(&self) -> f64 {
        dbm_to_mw(self.noise_power_dbm)
            / (dbm_to_mw(self.pilot_power_dbm) * self.pilots_per_subframe as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeChannelEstimate {
    pub rp_index: usize,
    pub h_hat: Vec<Complex64>,
    pub noise_var_per_subcarrier: f64,
}

fn add_noise<R: Rng + ?Sized>(h: &mut [Complex64], variance: f64, rng: &mut R) {
    if variance <= 0.0 {
        return;
    }
    let s = (variance / 2.0).sqrt();
    for hk in h {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *hk += Complex64::new(s * re, s * im);
    }
}

/// Noisy LS observation of the composite channel under `rp`, given
/// precomputed link responses.
pub fn observe_composite<R: Rng + ?Sized>(
    response: &ChannelResponse,
    rp: &ReflectionPattern,
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if response.num_subcarriers() != cfg.n_subcarriers {
        return Err(mismatch(format!(
            "response has {} subcarriers, pilot config {}",
            response.num_subcarriers(),
            cfg.n_subcarriers
        )));
    }
    let mut h = response.compose(rp)?;
    add_noise(&mut h, cfg.error_variance(), rng);
    Ok(h)
}

/// Composite estimate for one pattern subframe.
pub fn estimate_composite<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    rp: &ReflectionPattern,
    rp_index: usize,
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<CompositeChannelEstimate> {
    cfg.validate()?;
    let response = ch.response(cfg.n_subcarriers)?;
    estimate_composite_response(&response, rp, rp_index, cfg, rng)
}

pub fn estimate_composite_response<R: Rng + ?Sized>(
    response: &ChannelResponse,
    rp: &ReflectionPattern,
    rp_index: usize,
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<CompositeChannelEstimate> {
    Ok(CompositeChannelEstimate {
        rp_index,
        h_hat: observe_composite(response, rp, cfg, rng)?,
        noise_var_per_subcarrier: cfg.error_variance(),
    })
}

/// Average of `subframes` independent estimates under the same pattern; the
/// error variance drops by the same factor.
pub fn estimate_composite_repeated<R: Rng + ?Sized>(
    response: &ChannelResponse,
    rp: &ReflectionPattern,
    rp_index: usize,
    cfg: &PilotConfig,
    subframes: usize,
    rng: &mut R,
) -> Result<CompositeChannelEstimate> {
    if subframes == 0 {
        return Err(invalid("need at least one subframe"));
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); cfg.n_subcarriers];
    for _ in 0..subframes {
        for (a, h) in acc.iter_mut().zip(observe_composite(response, rp, cfg, rng)?) {
            *a += h;
        }
    }
    let n = subframes as f64;
    Ok(CompositeChannelEstimate {
        rp_index,
        h_hat: acc.into_iter().map(|a| a / n).collect(),
        noise_var_per_subcarrier: cfg.error_variance() / n,
    })
}

/// Direct and per-element cascaded estimates with their error variances.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadedEstimate {
    pub response: ChannelResponse,
    /// Per-subcarrier error variance of the direct estimate.
    pub direct_error_var: f64,
    /// Per-subcarrier error variance of each cascaded estimate.
    pub cascaded_error_var: Vec<f64>,
    /// Training subframes consumed.
    pub subframes: usize,
}

/// All-off reference pattern followed by the `M` order-`M` DFT patterns.
pub fn default_training_patterns(num_elements: usize) -> Result<Vec<ReflectionPattern>> {
    let levels = (num_elements as u32).max(2);
    let dft = gen_dft_codebook(num_elements, num_elements, levels)?;
    let mut out = vec![ReflectionPattern::off(num_elements, levels)?];
    out.extend(dft.patterns().iter().cloned());
    Ok(out)
}

fn design_matrix(patterns: &[ReflectionPattern], num_elements: usize) -> Result<DMatrix<Complex64>> {
    let mut a = DMatrix::<Complex64>::zeros(patterns.len(), num_elements + 1);
    for (s, p) in patterns.iter().enumerate() {
        if p.num_elements() != num_elements {
            return Err(mismatch(format!(
                "training pattern {s} has {} elements, expected {num_elements}",
                p.num_elements()
            )));
        }
        a[(s, 0)] = Complex64::new(1.0, 0.0);
        for m in 0..num_elements {
            a[(s, m + 1)] = p.coefficient(m);
        }
    }
    Ok(a)
}

/// LS inversion of stacked composite observations.
///
/// `observations[s]` is the composite estimate under `patterns[s]` with
/// per-subcarrier error variance `noise_var`.
pub fn cascaded_ls_from_observations(
    patterns: &[ReflectionPattern],
    observations: &[Vec<Complex64>],
    noise_var: f64,
) -> Result<CascadedEstimate> {
    let first = patterns
        .first()
        .ok_or_else(|| invalid("training design has no patterns"))?;
    let m = first.num_elements();
    let unknowns = m + 1;
    if observations.len() != patterns.len() {
        return Err(mismatch(format!(
            "{} observations for {} training patterns",
            observations.len(),
            patterns.len()
        )));
    }
    let n_sc = observations[0].len();
    if observations.iter().any(|o| o.len() != n_sc) {
        return Err(mismatch("observations have differing subcarrier counts"));
    }

    let a = design_matrix(patterns, m)?;
    if patterns.len() < unknowns {
        return Err(Error::RankDeficient {
            rank: patterns.len().min(unknowns),
            unknowns,
            detail: format!("only {} training subframes", patterns.len()),
        });
    }
    let sv = a.clone().svd(false, false).singular_values;
    let max_sv = sv.iter().cloned().fold(0.0, f64::max);
    let rank = sv.iter().filter(|&&s| s > RANK_TOL * max_sv).count();
    if rank < unknowns {
        return Err(Error::RankDeficient {
            rank,
            unknowns,
            detail: format!("smallest singular value {:.3e}", sv.min()),
        });
    }

    let a_h = a.adjoint();
    let gram_inv = (&a_h * &a)
        .try_inverse()
        .ok_or_else(|| Error::RankDeficient {
            rank,
            unknowns,
            detail: "normal equations are singular".into(),
        })?;
    let pinv = &gram_inv * &a_h;
    let y = DMatrix::from_fn(patterns.len(), n_sc, |s, k| observations[s][k]);
    let x = pinv * y;

    let row = |r: usize| -> Vec<Complex64> { (0..n_sc).map(|k| x[(r, k)]).collect() };
    Ok(CascadedEstimate {
        response: ChannelResponse {
            direct: row(0),
            cascaded: (1..unknowns).map(row).collect(),
        },
        direct_error_var: noise_var * gram_inv[(0, 0)].re,
        cascaded_error_var: (1..unknowns).map(|i| noise_var * gram_inv[(i, i)].re).collect(),
        subframes: patterns.len(),
    })
}

/// Cascaded channel estimation: one composite observation per training
/// pattern, then LS inversion for the direct and per-element responses.
pub fn estimate_cascaded_ls<R: Rng + ?Sized>(
    response: &ChannelResponse,
    training: &[ReflectionPattern],
    cfg: &PilotConfig,
    rng: &mut R,
) -> Result<CascadedEstimate> {
    cfg.validate()?;
    if training.iter().any(|p| p.num_elements() != response.num_elements()) {
        return Err(mismatch("training pattern size differs from the RIS size"));
    }
    let observations = training
        .iter()
        .map(|p| observe_composite(response, p, cfg, rng))
        .collect::<Result<Vec<_>>>()?;
    cascaded_ls_from_observations(training, &observations, cfg.error_variance())
}

/// Pilot slots of the three-phase multi-user cascaded estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ThreePhaseOverhead {
    /// Direct channels with the RIS off: one slot per user.
    pub phase1: u64,
    /// Reference user's cascaded channels: one slot per element.
    pub phase2: u64,
    /// Remaining users' scaling factors.
    pub phase3: u64,
    pub total: u64,
}

/// `K + M + max(K - 1, ceil((K - 1) M / N))` slots for `K` users, `M`
/// elements and `N` BS antennas.
pub fn three_phase_overhead(users: u64, elements: u64, antennas: u64) -> Result<ThreePhaseOverhead> {
    if users == 0 || elements == 0 || antennas == 0 {
        return Err(invalid("users, elements and antennas must all be >= 1"));
    }
    let others = users - 1;
    let phase3 = others.max((others * elements).div_ceil(antennas));
    Ok(ThreePhaseOverhead {
        phase1: users,
        phase2: elements,
        phase3,
        total: users + elements + phase3,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signaling {
    /// Every element's phase index sent individually.
    PerElement,
    /// Index of the selected codebook entry.
    Codebook,
    /// One quantized weight bit per codebook entry.
    Fusion,
}

impl std::str::FromStr for Signaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "per-element" | "element" => Ok(Signaling::PerElement),
            "codebook" => Ok(Signaling::Codebook),
            "fusion" => Ok(Signaling::Fusion),
            other => Err(invalid(format!("unknown signaling scheme '{other}'"))),
        }
    }
}

fn ceil_log2(n: u64) -> u64 {
    if n <= 1 {
        0
    } else {
        64 - u64::from((n - 1).leading_zeros())
    }
}

/// Control bits needed to configure the RIS once.
pub fn control_signaling_bits(scheme: Signaling, elements: u64, levels: u64, codebook_size: u64) -> u64 {
    match scheme {
        Signaling::PerElement => elements * ceil_log2(levels),
        Signaling::Codebook => ceil_log2(codebook_size),
        Signaling::Fusion => codebook_size,
    }
}
