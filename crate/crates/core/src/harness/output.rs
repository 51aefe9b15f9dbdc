//! Trial-record emission as CSV or JSON lines.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrialRecord;
use crate::error::{invalid, Error, Result};

/// Column order of the CSV output (matches the field order of [`TrialRecord`]).
pub const CSV_HEADER: [&str; 10] = [
    "trial_id",
    "scheme",
    "axis_value",
    "rate",
    "effective_rate",
    "received_power_dbm",
    "tau",
    "coherence",
    "chosen_rp_index",
    "wall_time_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    JsonLines,
}

impl Format {
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") => Format::JsonLines,
            _ => Format::Csv,
        }
    }
}

/// Canonical record order: axis value, then scheme, then trial.
pub fn sort_records(records: &mut [TrialRecord]) {
    records.sort_by(|a, b| {
        let ax = a.axis_value.unwrap_or(f64::NEG_INFINITY);
        let bx = b.axis_value.unwrap_or(f64::NEG_INFINITY);
        ax.total_cmp(&bx)
            .then(a.scheme.cmp(&b.scheme))
            .then(a.trial_id.cmp(&b.trial_id))
    });
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// Serializes records to a writer. The CSV header is written iff `header`.
pub fn write_records<W: Write>(records: &[TrialRecord], out: W, format: Format, header: bool) -> Result<()> {
    let mut sorted = records.to_vec();
    sort_records(&mut sorted);
    let path = Path::new("<output>");
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
            if header {
                w.write_record(CSV_HEADER).map_err(csv_err(path))?;
            }
            for r in &sorted {
                w.serialize(r).map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
        }
        Format::JsonLines => {
            let mut w = BufWriter::new(out);
            for r in &sorted {
                serde_json::to_writer(&mut w, r).map_err(|e| invalid(format!("json encoding: {e}")))?;
                w.write_all(b"\n").map_err(io_err(path))?;
            }
            w.flush().map_err(io_err(path))?;
        }
    }
    Ok(())
}

/// Writes records to `path`. With `append`, rows are added to an existing
/// file and the CSV header is only written when the file is new or empty.
pub fn emit_results(records: &[TrialRecord], path: &Path, format: Format, append: bool) -> Result<()> {
    let existing = append && path.metadata().map(|m| m.len() > 0).unwrap_or(false);
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(io_err(path))?;
    write_records(records, file, format, !existing).map_err(|e| match e {
        Error::Io { source, .. } => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        Error::Csv { source, .. } => Error::Csv {
            path: path.to_path_buf(),
            source,
        },
        other => other,
    })
}

pub fn read_results(path: &Path, format: Format) -> Result<Vec<TrialRecord>> {
    let file = File::open(path).map_err(io_err(path))?;
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_reader(file);
            let header = r.headers().map_err(csv_err(path))?.clone();
            if header.iter().ne(CSV_HEADER) {
                return Err(Error::Parse {
                    what: path.display().to_string(),
                    detail: format!("unexpected CSV header {header:?}"),
                });
            }
            r.deserialize()
                .collect::<std::result::Result<Vec<TrialRecord>, _>>()
                .map_err(csv_err(path))
        }
        Format::JsonLines => BufReader::new(file)
            .lines()
            .filter(|l| !matches!(l, Ok(s) if s.trim().is_empty()))
            .map(|line| {
                let line = line.map_err(io_err(path))?;
                serde_json::from_str(&line).map_err(|e| Error::Parse {
                    what: path.display().to_string(),
                    detail: e.to_string(),
                })
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Scheme;

    fn rec(trial: u64, scheme: Scheme, axis: Option<f64>) -> TrialRecord {
        TrialRecord {
            trial_id: trial,
            scheme,
            axis_value: axis,
            rate: 1.0 / 3.0 + trial as f64,
            effective_rate: 0.1,
            received_power_dbm: -81.234567890123,
            tau: 33,
            coherence: 500,
            chosen_rp_index: if scheme == Scheme::Codebook { Some(7) } else { None },
            wall_time_s: 0.0,
        }
    }

    #[test]
    fn empty_set_writes_header_only() {
        let mut buf = Vec::new();
        write_records(&[], &mut buf, Format::Csv, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_HEADER.join(",") + "\n");
        let mut buf = Vec::new();
        write_records(&[], &mut buf, Format::JsonLines, true).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn ordering_is_canonical() {
        let recs = vec![
            rec(1, Scheme::Random, Some(2.0)),
            rec(0, Scheme::Random, Some(1.0)),
            rec(0, Scheme::Codebook, Some(2.0)),
            rec(1, Scheme::Codebook, Some(1.0)),
        ];
        let mut sorted = recs.clone();
        sort_records(&mut sorted);
        let keys: Vec<_> = sorted.iter().map(|r| (r.axis_value, r.scheme, r.trial_id)).collect();
        assert_eq!(
            keys,
            vec![
                (Some(1.0), Scheme::Codebook, 1),
                (Some(1.0), Scheme::Random, 0),
                (Some(2.0), Scheme::Codebook, 0),
                (Some(2.0), Scheme::Random, 1),
            ]
        );
    }

    #[test]
    fn round_trip_both_formats_with_append() {
        let dir = tempfile::tempdir().unwrap();
        let first = vec![rec(0, Scheme::Codebook, None), rec(0, Scheme::Ao, None)];
        let second = vec![rec(1, Scheme::Random, None)];
        for format in [Format::Csv, Format::JsonLines] {
            let path = dir.path().join(format!("out-{format:?}"));
            emit_results(&first, &path, format, false).unwrap();
            emit_results(&second, &path, format, true).unwrap();
            let back = read_results(&path, format).unwrap();
            let mut want = first.clone();
            sort_records(&mut want);
            want.extend(second.clone());
            assert_eq!(back, want);
        }
    }

    #[test]
    fn missing_directory_reports_path() {
        let path = Path::new("/nonexistent-dir/out.csv");
        let err = emit_results(&[], path, Format::Csv, false).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/out.csv"));
    }
}
