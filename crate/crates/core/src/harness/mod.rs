//! Monte Carlo orchestration of the codebook pipeline and its baselines.
//!
//! Trial `t` of a scenario draws everything from substreams of
//! `(master_seed, t)`, so results do not depend on scheduling or on the
//! number of workers. Within a trial every scheme sees the same channel and
//! its own estimation-noise stream.

pub mod config;
pub mod output;
pub mod sweep;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{draw_channel, ChannelResponse};
use crate::codebook::{self, CodebookKind, ReflectionPattern};
use crate::error::{invalid, Error, Result};
use crate::estimation::{default_training_patterns, estimate_cascaded_ls, estimate_composite_response};
use crate::metrics::{achievable_rate, achievable_rate_from_gains, received_power, training_overhead, Scheme};
use crate::pbf::{ao_optimize, coherent_upper_bound, fusion_learn, random_phase_baseline, rote_index, LabeledSample};
use crate::units::linear_to_db;

pub use config::{Learner, ObjectiveKind, ScenarioConfig};

/// One (trial, scheme) outcome, evaluated on the true channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: u64,
    pub scheme: Scheme,
    /// Value of the swept parameter, empty outside sweeps.
    pub axis_value: Option<f64>,
    pub rate: f64,
    pub effective_rate: f64,
    pub received_power_dbm: f64,
    pub tau: u64,
    pub coherence: u64,
    /// Codebook entry used; empty for schemes that do not pick one.
    pub chosen_rp_index: Option<usize>,
    pub wall_time_s: f64,
}

/// Effective rate with the whole frame spent on training when `tau >= T`.
pub fn frame_effective_rate(rate: f64, tau: u64, coherence: u64) -> f64 {
    if tau >= coherence {
        0.0
    } else {
        (1.0 - tau as f64 / coherence as f64) * rate
    }
}

#[derive(Clone, Copy)]
#[repr(u64)]
enum Stream {
    Channel = 0,
    Codebook = 1,
    CodebookNoise = 2,
    CascadedNoise = 3,
    RandomPhase = 4,
}

/// Independent counter-based substream for `(master_seed, trial, purpose)`.
fn substream(master_seed: u64, trial: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial);
    rng.set_word_pos((purpose as u128) << 48);
    rng
}

/// Selected pattern and the measurement that selected it.
struct Selection {
    pattern: ReflectionPattern,
    chosen_rp_index: Option<usize>,
}

fn codebook_selection(cfg: &ScenarioConfig, response: &ChannelResponse, trial: u64) -> Result<Selection> {
    let seed = substream(cfg.master_seed, trial, Stream::Codebook).gen::<u64>();
    let (m, b, q) = (cfg.elements, cfg.phase_levels, cfg.codebook_size);
    let cb = match cfg.codebook_kind {
        CodebookKind::Sdm => codebook::gen_sdm_codebook_traced(m, b, q, seed, cfg.sdm_max_sweeps)?.0,
        kind => codebook::generate(kind, m, b, q, seed)?,
    };
    let pilots = cfg.pilot_config();
    let objective = cfg.objective_fn();
    let mut noise = substream(cfg.master_seed, trial, Stream::CodebookNoise);
    let samples = cb
        .patterns()
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let est = estimate_composite_response(response, p, i, &pilots, &mut noise)?;
            Ok(LabeledSample {
                rp_index: i,
                objective_value: objective.evaluate(&est.h_hat),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(match cfg.learner {
        Learner::Rote => {
            let idx = rote_index(&samples, &cb)?;
            Selection {
                pattern: cb.pattern(idx).clone(),
                chosen_rp_index: Some(idx),
            }
        }
        Learner::Fusion => Selection {
            pattern: fusion_learn(&samples, &cb, cfg.fusion_weights)?.pattern,
            chosen_rp_index: None,
        },
    })
}

fn ao_selection(cfg: &ScenarioConfig, response: &ChannelResponse, trial: u64) -> Result<Selection> {
    let training = default_training_patterns(cfg.elements)?;
    let mut noise = substream(cfg.master_seed, trial, Stream::CascadedNoise);
    let est = estimate_cascaded_ls(response, &training, &cfg.pilot_config(), &mut noise)?;
    let init = ReflectionPattern::new(vec![0; cfg.elements], cfg.phase_levels)?;
    let out = ao_optimize(&est.response, cfg.phase_levels, &init, cfg.objective_fn(), cfg.ao)?;
    Ok(Selection {
        pattern: out.pattern,
        chosen_rp_index: None,
    })
}

fn random_selection(cfg: &ScenarioConfig, trial: u64) -> Result<Selection> {
    let seed = substream(cfg.master_seed, trial, Stream::RandomPhase).gen::<u64>();
    Ok(Selection {
        pattern: random_phase_baseline(cfg.elements, cfg.phase_levels, seed)?,
        chosen_rp_index: None,
    })
}

fn record(
    cfg: &ScenarioConfig,
    trial: u64,
    scheme: Scheme,
    rate: f64,
    power_mw: f64,
    chosen_rp_index: Option<usize>,
    started: Instant,
) -> TrialRecord {
    let tau = training_overhead(scheme, cfg.elements, cfg.codebook_size, cfg.pilots_per_subframe);
    TrialRecord {
        trial_id: trial,
        scheme,
        axis_value: None,
        rate,
        effective_rate: frame_effective_rate(rate, tau, cfg.coherence_slots),
        received_power_dbm: linear_to_db(power_mw),
        tau,
        coherence: cfg.coherence_slots,
        chosen_rp_index,
        wall_time_s: if cfg.record_timing {
            started.elapsed().as_secs_f64()
        } else {
            0.0
        },
    }
}

fn run_scheme(cfg: &ScenarioConfig, response: &ChannelResponse, trial: u64, scheme: Scheme) -> Result<TrialRecord> {
    let started = Instant::now();
    let (p, s2) = (cfg.tx_power(), cfg.noise_power());
    if scheme == Scheme::Oracle {
        let gains = coherent_upper_bound(response);
        let mean_gain = gains.iter().sum::<f64>() / gains.len() as f64;
        let rate = achievable_rate_from_gains(&gains, p, s2);
        return Ok(record(cfg, trial, scheme, rate, p * mean_gain, None, started));
    }
    let sel = match scheme {
        Scheme::Codebook => codebook_selection(cfg, response, trial)?,
        Scheme::Ao => ao_selection(cfg, response, trial)?,
        Scheme::Random => random_selection(cfg, trial)?,
        Scheme::Oracle => unreachable!(),
    };
    let h = response.compose(&sel.pattern)?;
    let rate = achievable_rate(&h, p, s2);
    let power = received_power(&h, p).linear;
    Ok(record(cfg, trial, scheme, rate, power, sel.chosen_rp_index, started))
}

/// All enabled schemes on one channel draw, in scheme order.
pub fn run_trial(cfg: &ScenarioConfig, trial: u64) -> Result<Vec<TrialRecord>> {
    let wrap = |source: Error| Error::Trial {
        trial,
        source: Box::new(source),
    };
    let mut channel_rng = substream(cfg.master_seed, trial, Stream::Channel);
    let ch = draw_channel(&cfg.fading, cfg.elements, &mut channel_rng).map_err(wrap)?;
    let response = ch.response(cfg.n_subcarriers).map_err(wrap)?;
    let mut schemes = cfg.schemes.clone();
    schemes.sort();
    schemes.dedup();
    schemes
        .into_iter()
        .map(|s| run_scheme(cfg, &response, trial, s).map_err(wrap))
        .collect()
}

/// Runs `cfg.n_trials` trials on `cfg.workers` threads (0 = all cores).
///
/// Records are ordered by trial, then scheme, regardless of worker count.
pub fn run_trials(cfg: &ScenarioConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let work = || -> Result<Vec<TrialRecord>> {
        let per_trial = (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| run_trial(cfg, t))
            .collect::<Result<Vec<_>>>()?;
        Ok(per_trial.into_iter().flatten().collect())
    };
    if cfg.workers == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| invalid(format!("cannot build worker pool: {e}")))?
            .install(work)
    }
}

/// Codebook pipeline only.
pub fn run_codebook_pipeline(cfg: &ScenarioConfig) -> Result<Vec<TrialRecord>> {
    run_trials(&ScenarioConfig {
        schemes: vec![Scheme::Codebook],
        ..cfg.clone()
    })
}

/// One baseline scheme (`ao`, `random` or `oracle`).
pub fn run_baseline_pipeline(cfg: &ScenarioConfig, scheme: Scheme) -> Result<Vec<TrialRecord>> {
    if scheme == Scheme::Codebook {
        return Err(invalid("the codebook scheme is not a baseline"));
    }
    run_trials(&ScenarioConfig {
        schemes: vec![scheme],
        ..cfg.clone()
    })
}

/// Mean and standard error of per-trial differences `a - b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedStats {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

impl PairedStats {
    /// Mean difference in units of its standard error.
    pub fn z_score(&self) -> f64 {
        self.mean / self.std_error
    }
}

/// Mean and standard error of a sample.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Paired comparison of two schemes over the trials both appear in.
pub fn paired_difference(
    records: &[TrialRecord],
    a: Scheme,
    b: Scheme,
    metric: impl Fn(&TrialRecord) -> f64,
) -> PairedStats {
    use std::collections::BTreeMap;
    let mut by_trial: BTreeMap<(u64, Option<u64>), (Option<f64>, Option<f64>)> = BTreeMap::new();
    for r in records {
        let key = (r.trial_id, r.axis_value.map(f64::to_bits));
        let slot = by_trial.entry(key).or_default();
        if r.scheme == a {
            slot.0 = Some(metric(r));
        } else if r.scheme == b {
            slot.1 = Some(metric(r));
        }
    }
    let diffs: Vec<f64> = by_trial
        .values()
        .filter_map(|&(x, y)| Some(x? - y?))
        .collect();
    let (mean, std_error) = mean_and_se(&diffs);
    PairedStats {
        mean,
        std_error,
        n: diffs.len(),
    }
}
