//! Passive beamforming: codebook learning (rote, fusion) and the baselines
//! (element-wise alternating optimization, random phases, continuous
//! phase-alignment oracle).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, ChannelResponse};
use crate::codebook::{phase_table, quantize_phase, random_phase_pattern, Codebook, ReflectionPattern};
use crate::error::{invalid, mismatch, Error, Result};
use crate::metrics::{achievable_rate, received_power};

/// Magnitude below which a fused element has no usable phase.
const FUSED_ZERO: f64 = 1e-12;

/// Objective value measured for one codebook entry during the scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub rp_index: usize,
    pub objective_value: f64,
}

fn check_samples(samples: &[LabeledSample], cb: &Codebook) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    for s in samples {
        if s.rp_index >= cb.len() {
            return Err(invalid(format!(
                "sample index {} outside codebook of size {}",
                s.rp_index,
                cb.len()
            )));
        }
        if !s.objective_value.is_finite() {
            return Err(invalid(format!("non-finite objective for pattern {}", s.rp_index)));
        }
    }
    Ok(())
}

/// Index of the best-scoring sample's pattern; ties go to the lowest index.
pub fn rote_index(samples: &[LabeledSample], cb: &Codebook) -> Result<usize> {
    check_samples(samples, cb)?;
    let mut best = samples[0];
    for &s in &samples[1..] {
        if s.objective_value > best.objective_value
            || (s.objective_value == best.objective_value && s.rp_index < best.rp_index)
        {
            best = s;
        }
    }
    Ok(best.rp_index)
}

/// Rote learning: the codebook entry with the largest objective.
pub fn rote_learn(samples: &[LabeledSample], cb: &Codebook) -> Result<ReflectionPattern> {
    Ok(cb.pattern(rote_index(samples, cb)?).clone())
}

/// How objective values become fusion weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightShift {
    /// `w_q ∝ f_q - min f`.
    #[default]
    SubtractMin,
    /// `w_q ∝ f_q`; objectives must be non-negative.
    Proportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusionStatus {
    Weighted,
    /// Every weight was zero after shifting; the unweighted centroid was used.
    UniformWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub pattern: ReflectionPattern,
    /// Normalized weights, indexed by codebook entry.
    pub weights: Vec<f64>,
    pub status: FusionStatus,
    /// Elements whose fused coefficient vanished and took the rote winner's phase.
    pub fallback_elements: usize,
}

/// Fusion learning: objective-weighted superposition of the codebook
/// coefficient vectors, projected element-wise back onto the B phase levels.
pub fn fusion_learn(samples: &[LabeledSample], cb: &Codebook, shift: WeightShift) -> Result<FusionOutcome> {
    check_samples(samples, cb)?;
    let mut seen = vec![false; cb.len()];
    for s in samples {
        if std::mem::replace(&mut seen[s.rp_index], true) {
            return Err(invalid(format!("duplicate sample for pattern {}", s.rp_index)));
        }
    }
    if samples.len() != cb.len() {
        return Err(invalid(format!(
            "fusion needs one sample per codebook entry: {} of {}",
            samples.len(),
            cb.len()
        )));
    }
    let winner = rote_index(samples, cb)?;

    let floor = match shift {
        WeightShift::SubtractMin => samples
            .iter()
            .map(|s| s.objective_value)
            .fold(f64::INFINITY, f64::min),
        WeightShift::Proportional => {
            if samples.iter().any(|s| s.objective_value < 0.0) {
                return Err(invalid("proportional fusion weights need non-negative objectives"));
            }
            0.0
        }
    };
    let mut weights = vec![0.0; cb.len()];
    for s in samples {
        weights[s.rp_index] = s.objective_value - floor;
    }
    let total: f64 = weights.iter().sum();
    let status = if total > 0.0 {
        weights.iter_mut().for_each(|w| *w /= total);
        FusionStatus::Weighted
    } else {
        weights.iter_mut().for_each(|w| *w = 1.0 / cb.len() as f64);
        FusionStatus::UniformWeights
    };

    let m = cb.num_elements();
    let levels = cb.levels();
    let mut fused = vec![Complex64::new(0.0, 0.0); m];
    for (w, p) in weights.iter().zip(cb.patterns()) {
        if *w == 0.0 {
            continue;
        }
        for (f, c) in fused.iter_mut().zip(p.coefficients()) {
            *f += c * *w;
        }
    }
    let winner_idx = cb.pattern(winner).phase_indices();
    let mut fallback_elements = 0;
    let idx = fused
        .iter()
        .enumerate()
        .map(|(el, f)| {
            if f.norm() < FUSED_ZERO {
                fallback_elements += 1;
                Ok(winner_idx[el])
            } else {
                quantize_phase(f.arg(), levels)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FusionOutcome {
        pattern: ReflectionPattern::new(idx, levels)?,
        weights,
        status,
        fallback_elements,
    })
}

/// Scalar objective maximized by pattern selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Objective {
    /// `P * mean_k |h_k|^2`.
    ReceivedPower { tx_power: f64 },
    /// Mean per-subcarrier Shannon rate.
    Rate { tx_power: f64, noise_power: f64 },
}

impl Objective {
    pub fn evaluate(&self, h: &[Complex64]) -> f64 {
        match *self {
            Objective::ReceivedPower { tx_power } => received_power(h, tx_power).linear,
            Objective::Rate { tx_power, noise_power } => achievable_rate(h, tx_power, noise_power),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AoConfig {
    /// Stop once a sweep improves the objective by less than this fraction.
    pub rel_tol: f64,
    pub max_sweeps: usize,
}

impl Default for AoConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            max_sweeps: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AoOutcome {
    pub pattern: ReflectionPattern,
    /// Objective at the initial pattern, then after every sweep.
    pub trace: Vec<f64>,
    /// False when `max_sweeps` ran out first.
    pub converged: bool,
}

impl AoOutcome {
    pub fn objective(&self) -> f64 {
        *self.trace.last().expect("trace holds the initial value")
    }
}

/// Element-wise alternating optimization over the B phase levels.
///
/// Elements are visited in index order; each moves to the level maximizing
/// the objective with the others fixed and only moves on strict improvement,
/// so the trace never decreases. The received-power objective uses the
/// closed-form alignment phase, the rate objective enumerates all levels.
pub fn ao_optimize(
    channel: &ChannelResponse,
    levels: u32,
    init: &ReflectionPattern,
    objective: Objective,
    cfg: AoConfig,
) -> Result<AoOutcome> {
    let m = channel.num_elements();
    if init.num_elements() != m {
        return Err(mismatch(format!(
            "initial pattern has {} elements, channel has {m}",
            init.num_elements()
        )));
    }
    if init.levels() != levels || init.is_off() {
        return Err(invalid("initial pattern must be an active pattern with the requested B"));
    }
    let table = phase_table(levels);
    let mut idx = init.phase_indices().to_vec();
    let mut h = channel.compose(init)?;
    let mut trace = vec![objective.evaluate(&h)];
    let mut converged = false;
    let mut rest = vec![Complex64::new(0.0, 0.0); h.len()];
    let mut trial = rest.clone();

    for _ in 0..cfg.max_sweeps {
        let before = *trace.last().unwrap();
        for el in 0..m {
            let g = &channel.cascaded[el];
            let cur = table[idx[el] as usize];
            for ((r, hk), gk) in rest.iter_mut().zip(&h).zip(g) {
                *r = hk - cur * gk;
            }
            let best = match objective {
                Objective::ReceivedPower { .. } => {
                    let z: Complex64 = rest.iter().zip(g).map(|(a, gk)| a.conj() * gk).sum();
                    if z.norm() == 0.0 {
                        idx[el]
                    } else {
                        let cand = quantize_phase(-z.arg(), levels)?;
                        let score = |c: Complex64| (c * z).re;
                        if score(table[cand as usize]) > score(cur) {
                            cand
                        } else {
                            idx[el]
                        }
                    }
                }
                Objective::Rate { .. } => {
                    let mut eval = |c: Complex64| {
                        for ((t, r), gk) in trial.iter_mut().zip(&rest).zip(g) {
                            *t = r + c * gk;
                        }
                        objective.evaluate(&trial)
                    };
                    // The incumbent is kept unless strictly beaten.
                    let mut best = (idx[el], eval(cur));
                    for lvl in (0..levels).filter(|&l| l != idx[el]) {
                        let v = eval(table[lvl as usize]);
                        if v > best.1 {
                            best = (lvl, v);
                        }
                    }
                    best.0
                }
            };
            if best != idx[el] {
                idx[el] = best;
                let c = table[best as usize];
                for ((hk, r), gk) in h.iter_mut().zip(&rest).zip(g) {
                    *hk = r + c * gk;
                }
            }
        }
        let after = objective.evaluate(&h).max(before);
        trace.push(after);
        if after - before <= cfg.rel_tol * before.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }
    Ok(AoOutcome {
        pattern: ReflectionPattern::new(idx, levels)?,
        trace,
        converged,
    })
}

/// Continuous-phase coherent alignment and its received power.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    /// Continuous phase per element, radians.
    pub phases: Vec<f64>,
    /// `P * (|h_d| + sum_m |g_m|)^2`.
    pub received_power: f64,
}

impl OracleSolution {
    pub fn coefficients(&self) -> Vec<Complex64> {
        self.phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect()
    }
}

/// Rotates every cascaded term onto the direct term's phase.
///
/// Multi-tap channels have no single closed form; with `narrowband` set the
/// flat (subcarrier-0) response is aligned, otherwise they are rejected.
pub fn continuous_alignment_oracle(
    ch: &ChannelRealization,
    tx_power: f64,
    narrowband: bool,
) -> Result<OracleSolution> {
    let multi_tap = ch.direct_taps().len() > 1 || ch.cascaded_taps()[0].len() > 1;
    if multi_tap && !narrowband {
        return Err(invalid(
            "continuous alignment needs a flat channel; set the narrowband flag for multi-tap input",
        ));
    }
    let resp = ch.narrowband_response();
    let hd = resp.direct[0];
    let reference = if hd.norm() > 0.0 { hd.arg() } else { 0.0 };
    let phases = resp.cascaded.iter().map(|g| reference - g[0].arg()).collect();
    let amplitude = hd.norm() + resp.cascaded.iter().map(|g| g[0].norm()).sum::<f64>();
    Ok(OracleSolution {
        phases,
        received_power: tx_power * amplitude * amplitude,
    })
}

/// Per-subcarrier upper bound `(|d_k| + sum_m |g_mk|)^2` on `|h_k|^2` over
/// all unit-modulus configurations. Equals the oracle gain for flat channels.
pub fn coherent_upper_bound(channel: &ChannelResponse) -> Vec<f64> {
    (0..channel.num_subcarriers())
        .map(|k| {
            let a = channel.direct[k].norm() + channel.cascaded.iter().map(|g| g[k].norm()).sum::<f64>();
            a * a
        })
        .collect()
}

/// Random phase-shift baseline.
pub fn random_phase_baseline(num_elements: usize, levels: u32, seed: u64) -> Result<ReflectionPattern> {
    random_phase_pattern(num_elements, levels, seed)
}
