//! Parameter sweeps aggregated into per-(value, scheme) rows.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{frame_effective_rate, mean_and_se, run_trials, ScenarioConfig, TrialRecord};
use crate::error::{invalid, Error, Result};
use crate::metrics::Scheme;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Codebook size.
    Q,
    /// RIS elements.
    M,
    /// Coherence time in slots.
    T,
    /// Uplink pilot power, dBm.
    PilotPower,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Q => "Q",
            SweepAxis::M => "M",
            SweepAxis::T => "T",
            SweepAxis::PilotPower => "pilot_power_dbm",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Rate,
    EffectiveRate,
    ReceivedPowerDbm,
}

impl Metric {
    pub fn of_record(self, r: &TrialRecord) -> f64 {
        match self {
            Metric::Rate => r.rate,
            Metric::EffectiveRate => r.effective_rate,
            Metric::ReceivedPowerDbm => r.received_power_dbm,
        }
    }

    pub fn of_row(self, r: &SweepRow) -> f64 {
        match self {
            Metric::Rate => r.mean_rate,
            Metric::EffectiveRate => r.mean_effective_rate,
            Metric::ReceivedPowerDbm => r.mean_received_power_dbm,
        }
    }
}

/// Mean and standard error of one scheme at one axis value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: String,
    pub value: f64,
    pub scheme: Scheme,
    pub n_trials: usize,
    pub mean_rate: f64,
    pub se_rate: f64,
    pub mean_effective_rate: f64,
    pub se_effective_rate: f64,
    pub mean_received_power_dbm: f64,
    pub se_received_power_dbm: f64,
    pub tau: u64,
}

pub const SWEEP_HEADER: [&str; 11] = [
    "axis",
    "value",
    "scheme",
    "n_trials",
    "mean_rate",
    "se_rate",
    "mean_effective_rate",
    "se_effective_rate",
    "mean_received_power_dbm",
    "se_received_power_dbm",
    "tau",
];

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub records: Vec<TrialRecord>,
    pub rows: Vec<SweepRow>,
}

fn as_count(axis: SweepAxis, v: f64) -> Result<u64> {
    if v.fract() != 0.0 || v < 1.0 || !v.is_finite() {
        return Err(invalid(format!("{axis} values must be positive integers, got {v}")));
    }
    Ok(v as u64)
}

fn apply(cfg: &ScenarioConfig, axis: SweepAxis, v: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    match axis {
        SweepAxis::Q => c.codebook_size = as_count(axis, v)? as usize,
        SweepAxis::M => c.elements = as_count(axis, v)? as usize,
        SweepAxis::T => c.coherence_slots = as_count(axis, v)?,
        SweepAxis::PilotPower => {
            if !v.is_finite() {
                return Err(invalid("pilot power values must be finite"));
            }
            c.pilot_power_dbm = v
        }
    }
    c.validate()?;
    Ok(c)
}

/// Runs the scenario at every axis value.
///
/// Coherence time only enters the effective rate, so a `T` sweep simulates
/// once and re-discounts the same trials.
pub fn sweep(cfg: &ScenarioConfig, axis: SweepAxis, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(invalid("sweep needs at least one axis value"));
    }
    let mut records = Vec::new();
    if axis == SweepAxis::T {
        let base = run_trials(cfg)?;
        for &v in values {
            let t = apply(cfg, axis, v)?.coherence_slots;
            records.extend(base.iter().map(|r| TrialRecord {
                axis_value: Some(v),
                coherence: t,
                effective_rate: frame_effective_rate(r.rate, r.tau, t),
                ..r.clone()
            }));
        }
    } else {
        for &v in values {
            let c = apply(cfg, axis, v)?;
            records.extend(run_trials(&c)?.into_iter().map(|r| TrialRecord {
                axis_value: Some(v),
                ..r
            }));
        }
    }
    let rows = aggregate(&records, axis);
    Ok(SweepResult { axis, records, rows })
}

/// Groups records by (axis value, scheme).
pub fn aggregate(records: &[TrialRecord], axis: SweepAxis) -> Vec<SweepRow> {
    let mut groups: BTreeMap<(u64, Scheme), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        // Order-preserving key for finite floats.
        let v = r.axis_value.unwrap_or(0.0);
        let bits = v.to_bits();
        let key = if v.is_sign_negative() { !bits } else { bits | (1 << 63) };
        groups.entry((key, r.scheme)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let col = |f: fn(&TrialRecord) -> f64| rs.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (mean_rate, se_rate) = mean_and_se(&col(|r| r.rate));
            let (mean_eff, se_eff) = mean_and_se(&col(|r| r.effective_rate));
            let (mean_pow, se_pow) = mean_and_se(&col(|r| r.received_power_dbm));
            SweepRow {
                axis: axis.to_string(),
                value: rs[0].axis_value.unwrap_or(0.0),
                scheme: rs[0].scheme,
                n_trials: rs.len(),
                mean_rate,
                se_rate,
                mean_effective_rate: mean_eff,
                se_effective_rate: se_eff,
                mean_received_power_dbm: mean_pow,
                se_received_power_dbm: se_pow,
                tau: rs[0].tau,
            }
        })
        .collect()
}

pub fn write_table<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let path = Path::new("<sweep table>");
    let wrap = |source: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(wrap)?;
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn save_table(rows: &[SweepRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_table(rows, file).map_err(|e| match e {
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

/// Axis positions where `metric(a) - metric(b)` changes sign, linearly
/// interpolated between neighbouring axis values.
pub fn crossovers(rows: &[SweepRow], a: Scheme, b: Scheme, metric: Metric) -> Vec<f64> {
    let series = |s: Scheme| -> BTreeMap<u64, (f64, f64)> {
        rows.iter()
            .filter(|r| r.scheme == s)
            .map(|r| (r.value.to_bits(), (r.value, metric.of_row(r))))
            .collect()
    };
    let (sa, sb) = (series(a), series(b));
    let mut diffs: Vec<(f64, f64)> = sa
        .iter()
        .filter_map(|(k, &(x, ya))| sb.get(k).map(|&(_, yb)| (x, ya - yb)))
        .collect();
    diffs.sort_by(|p, q| p.0.total_cmp(&q.0));
    diffs
        .windows(2)
        .filter_map(|w| {
            let ((x0, d0), (x1, d1)) = (w[0], w[1]);
            if d0 == 0.0 {
                Some(x0)
            } else if d0.signum() != d1.signum() && d1 != 0.0 {
                Some(x0 + (x1 - x0) * d0 / (d0 - d1))
            } else {
                None
            }
        })
        .collect()
}
