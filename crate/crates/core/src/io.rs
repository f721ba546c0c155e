//! File formats: JSON-Lines traces and feature CSV.
//!
//! Trace records carry a `format` tag. The feature CSV is identified by its
//! header, which must match [`feature_csv_header`] exactly.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{Provenance, SensorTrace};
use crate::dataset::FeatureRow;
use crate::features::{feature_names, FEATURE_COUNT};
use crate::waveform::{BreathingClass, ChestTrace};

pub const TRACE_FORMAT: &str = "breathsim-trace-v1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
}

impl IoError {
    fn at(line: usize, message: impl ToString) -> Self {
        IoError::Format {
            line,
            message: message.to_string(),
        }
    }
}

/// One line of a trace file. Chest traces omit the two channel fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub format: String,
    pub class_id: u32,
    pub true_rate: f64,
    pub true_depth: f64,
    pub sample_rate: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_seed: Option<u64>,
    pub samples: Vec<f64>,
}

impl From<&ChestTrace> for TraceRecord {
    fn from(t: &ChestTrace) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            class_id: t.label.id(),
            true_rate: t.true_rate,
            true_depth: t.true_depth,
            sample_rate: t.sample_rate,
            seed: t.seed,
            distance_m: None,
            channel_seed: None,
            samples: t.samples.clone(),
        }
    }
}

impl From<&SensorTrace> for TraceRecord {
    fn from(t: &SensorTrace) -> Self {
        Self {
            format: TRACE_FORMAT.into(),
            class_id: t.label.id(),
            true_rate: t.true_rate,
            true_depth: t.true_depth,
            sample_rate: t.sample_rate,
            seed: t.provenance.source_seed,
            distance_m: Some(t.provenance.distance),
            channel_seed: Some(t.provenance.channel_seed),
            samples: t.samples.clone(),
        }
    }
}

impl TraceRecord {
    fn into_sensor(self) -> Result<SensorTrace, String> {
        if self.format != TRACE_FORMAT {
            return Err(format!("unknown trace format {:?}", self.format));
        }
        let label = BreathingClass::from_id(self.class_id).map_err(|e| e.to_string())?;
        let (Some(distance), Some(channel_seed)) = (self.distance_m, self.channel_seed) else {
            return Err("not a sensor trace: distance_m and channel_seed are required".into());
        };
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(format!("sample_rate must be > 0, got {}", self.sample_rate));
        }
        if self.samples.iter().any(|v| !v.is_finite()) {
            return Err("samples must be finite".into());
        }
        Ok(SensorTrace {
            samples: self.samples,
            sample_rate: self.sample_rate,
            label,
            true_rate: self.true_rate,
            true_depth: self.true_depth,
            provenance: Provenance {
                distance,
                channel_seed,
                source_seed: self.seed,
            },
        })
    }
}

pub fn write_traces<W: Write>(mut out: W, traces: &[SensorTrace]) -> Result<(), IoError> {
    for t in traces {
        serde_json::to_writer(&mut out, &TraceRecord::from(t)).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads sensor traces, one JSON object per line. Blank lines are skipped.
pub fn read_traces<R: BufRead>(input: R) -> Result<Vec<SensorTrace>, IoError> {
    let mut traces = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(&line).map_err(|e| IoError::at(i + 1, e))?;
        traces.push(record.into_sensor().map_err(|e| IoError::at(i + 1, e))?);
    }
    Ok(traces)
}

pub fn feature_csv_header() -> Vec<&'static str> {
    let mut header = feature_names().to_vec();
    header.extend(["label", "distance_m", "seed"]);
    header
}

/// Values use Rust's shortest round-trip decimal formatting.
pub fn write_feature_csv<W: Write>(out: W, rows: &[FeatureRow]) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(feature_csv_header()).map_err(|e| csv_error(0, e))?;
    for row in rows {
        let mut record: Vec<String> = row.features.iter().map(|v| v.to_string()).collect();
        record.push(row.label.id().to_string());
        record.push(row.distance_m.to_string());
        record.push(row.seed.to_string());
        w.write_record(&record).map_err(|e| csv_error(0, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_feature_csv<R: std::io::Read>(input: R) -> Result<Vec<FeatureRow>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = match records.next() {
        None => return Err(IoError::at(1, "missing header")),
        Some(h) => h.map_err(|e| csv_error(1, e))?,
    };
    let expected = feature_csv_header();
    if header.iter().ne(expected.iter().copied()) {
        let missing: Vec<&str> = expected
            .iter()
            .copied()
            .filter(|c| !header.iter().any(|h| h == *c))
            .collect();
        let message = if missing.is_empty() {
            "header columns out of order".to_string()
        } else {
            format!("header is missing column(s): {}", missing.join(", "))
        };
        return Err(IoError::at(1, message));
    }

    let mut rows = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_error(line, e))?;
        if record.len() != expected.len() {
            return Err(IoError::at(
                line,
                format!("expected {} fields, got {}", expected.len(), record.len()),
            ));
        }
        let mut features = [0.0; FEATURE_COUNT];
        for (j, slot) in features.iter_mut().enumerate() {
            *slot = parse_finite(&record[j], expected[j]).map_err(|e| IoError::at(line, e))?;
        }
        let label = record[FEATURE_COUNT]
            .parse::<u32>()
            .map_err(|e| e.to_string())
            .and_then(|id| BreathingClass::from_id(id).map_err(|e| e.to_string()))
            .map_err(|e| IoError::at(line, format!("label: {e}")))?;
        let distance_m = parse_finite(&record[FEATURE_COUNT + 1], "distance_m").map_err(|e| IoError::at(line, e))?;
        let seed = record[FEATURE_COUNT + 2]
            .parse::<u64>()
            .map_err(|e| IoError::at(line, format!("seed: {e}")))?;
        rows.push(FeatureRow {
            features,
            label,
            distance_m,
            seed,
        });
    }
    Ok(rows)
}

fn csv_error(line: usize, e: csv::Error) -> IoError {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => IoError::Io(e),
        other => IoError::at(line, format!("{other:?}")),
    }
}

fn parse_finite(field: &str, column: &str) -> Result<f64, String> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(v) => Err(format!("{column}: non-finite value {v}")),
        Err(e) => Err(format!("{column}: {e} ({field:?})")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelConfig;
    use crate::dataset::{feature_rows, generate_traces, GeneratorConfig};
    use crate::dsp::DspConfig;

    fn traces() -> Vec<SensorTrace> {
        generate_traces(
            &[BreathingClass::Eupnea, BreathingClass::Faulty],
            2,
            1.0,
            &ChannelConfig::default(),
            &GeneratorConfig::default(),
            3,
        )
        .unwrap()
    }

    #[test]
    fn traces_round_trip() {
        let t = traces();
        let mut buf = Vec::new();
        write_traces(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().all(|l| l.contains("\"format\":\"breathsim-trace-v1\"")));
        assert_eq!(read_traces(&buf[..]).unwrap(), t);
    }

    #[test]
    fn corrupt_trace_line_is_named() {
        let mut buf = Vec::new();
        write_traces(&mut buf, &traces()).unwrap();
        let mut lines: Vec<String> = String::from_utf8(buf).unwrap().lines().map(String::from).collect();
        lines[2].truncate(40);
        let err = read_traces(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, IoError::Format { line: 3, .. }), "{err}");
    }

    #[test]
    fn chest_record_is_not_a_sensor_trace() {
        let chest = crate::dataset::chest_trace(BreathingClass::Apnea, &GeneratorConfig::default(), 1).unwrap();
        let line = serde_json::to_string(&TraceRecord::from(&chest)).unwrap();
        assert!(!line.contains("distance_m"));
        assert!(matches!(
            read_traces(line.as_bytes()),
            Err(IoError::Format { line: 1, .. })
        ));
    }

    #[test]
    fn features_round_trip_exactly() {
        let rows = feature_rows(&traces(), &DspConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), feature_csv_header().join(","));
        assert!(text.lines().skip(1).all(|l| !l.contains('e')));
        assert_eq!(read_feature_csv(&buf[..]).unwrap(), rows);
    }

    #[test]
    fn header_only_csv_is_empty() {
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &[]).unwrap();
        assert!(read_feature_csv(&buf[..]).unwrap().is_empty());
    }

    #[test]
    fn missing_label_column() {
        let header: Vec<&str> = feature_csv_header().into_iter().filter(|c| *c != "label").collect();
        let text = header.join(",") + "\n";
        let err = read_feature_csv(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("label"), "{err}");
    }

    #[test]
    fn bad_value_line_is_named() {
        let rows = feature_rows(&traces(), &DspConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_feature_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap().replacen(",0,", ",zero,", 1);
        match read_feature_csv(text.as_bytes()) {
            Err(IoError::Format { line, .. }) => assert!(line >= 2),
            other => panic!("{other:?}"),
        }
    }
}
