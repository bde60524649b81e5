//! Scenario label files: JSON documents naming each scenario's attack-phase
//! windows and, optionally, an explicit test window. Timestamps may be
//! ISO-8601 strings or raw epoch seconds.

use std::fs;
use std::path::Path;

use chrono::DateTime;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::model::{
    derive_default_test_window, AttackPhaseWindow, PhaseName, ScenarioLabels, TestWindow,
};

#[derive(Debug, Deserialize)]
struct LabelsFile {
    scenarios: Vec<ScenarioEntry>,
}

#[derive(Debug, Deserialize)]
struct ScenarioEntry {
    name: String,
    data_start: TimeValue,
    data_end: TimeValue,
    phases: Vec<PhaseEntry>,
    #[serde(default)]
    test_window: Option<WindowEntry>,
}

#[derive(Debug, Deserialize)]
struct PhaseEntry {
    phase: PhaseName,
    start: TimeValue,
    end: TimeValue,
}

#[derive(Debug, Deserialize)]
struct WindowEntry {
    start: TimeValue,
    end: TimeValue,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TimeValue {
    Epoch(f64),
    Iso(String),
}

impl TimeValue {
    fn resolve(&self) -> Result<f64> {
        match self {
            TimeValue::Epoch(v) => {
                if v.is_finite() {
                    Ok(*v)
                } else {
                    Err(Error::invalid("non-finite timestamp in label file"))
                }
            }
            TimeValue::Iso(s) => parse_iso8601(s),
        }
    }
}

/// Parses an ISO-8601 / RFC 3339 timestamp to epoch seconds (UTC).
pub fn parse_iso8601(s: &str) -> Result<f64> {
    let parsed = DateTime::parse_from_rfc3339(s)
        .or_else(|_| DateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S%.f%z"))
        .or_else(|_| DateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f%z"))
        .map_err(|e| Error::invalid(format!("bad timestamp {s:?}: {e}")))?;
    let utc = parsed.to_utc();
    Ok(utc.timestamp() as f64 + f64::from(utc.timestamp_subsec_nanos()) / 1e9)
}

/// Parses a label document. Scenarios without an explicit test window get
/// the derived default (one day before the attack, `test_duration` long);
/// an explicit window is passed through untouched.
pub fn parse_labels(json: &str, test_duration: f64) -> Result<Vec<ScenarioLabels>> {
    let file: LabelsFile =
        serde_json::from_str(json).map_err(|e| Error::config(format!("label file: {e}")))?;
    let mut out = Vec::with_capacity(file.scenarios.len());
    for entry in file.scenarios {
        let phases = entry
            .phases
            .iter()
            .map(|p| {
                Ok(AttackPhaseWindow {
                    phase: p.phase,
                    start: p.start.resolve()?,
                    end: p.end.resolve()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let data_start = entry.data_start.resolve()?;
        let data_end = entry.data_end.resolve()?;
        let test = match &entry.test_window {
            Some(w) => TestWindow { start: w.start.resolve()?, end: w.end.resolve()? },
            None => derive_default_test_window(&phases, data_start, test_duration)
                .map_err(|e| Error::config(format!("scenario {}: {e}", entry.name)))?,
        };
        let labels =
            ScenarioLabels { name: entry.name, phases, test, data_start, data_end };
        labels.validate()?;
        out.push(labels);
    }
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

pub fn load_labels(path: &Path, test_duration: f64) -> Result<Vec<ScenarioLabels>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text, test_duration)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"{
      "scenarios": [
        {
          "name": "s1",
          "data_start": "2022-01-14T00:00:00+00:00",
          "data_end": "2022-01-20T00:00:00+00:00",
          "phases": [
            {"phase": "network_scans", "start": "2022-01-18T11:00:00Z", "end": "2022-01-18T11:10:00Z"},
            {"phase": "dirb_scan", "start": "2022-01-18T11:20:00Z", "end": "2022-01-18T11:35:00Z"}
          ]
        },
        {
          "name": "s2",
          "data_start": 0,
          "data_end": 1000000,
          "phases": [
            {"phase": "service_scans", "start": 200000, "end": 201000}
          ],
          "test_window": {"start": 50000, "end": 68000}
        }
      ]
    }"#;

    #[test]
    fn derives_default_window_one_day_earlier() {
        let labels = parse_labels(FIXTURE, 18_000.0).unwrap();
        let s1 = &labels[0];
        let scan_start = parse_iso8601("2022-01-18T11:00:00Z").unwrap();
        assert_eq!(s1.test.start, scan_start - 86_400.0);
        assert_eq!(s1.test.duration(), 18_000.0);
    }

    #[test]
    fn explicit_window_passes_through() {
        let labels = parse_labels(FIXTURE, 18_000.0).unwrap();
        let s2 = &labels[1];
        assert_eq!(s2.test, TestWindow { start: 50_000.0, end: 68_000.0 });
    }

    #[test]
    fn iso_offsets_normalize_to_utc() {
        let a = parse_iso8601("2022-01-18T12:00:00+01:00").unwrap();
        let b = parse_iso8601("2022-01-18T11:00:00Z").unwrap();
        assert_eq!(a, b);
        let frac = parse_iso8601("2022-01-18T11:00:00.250Z").unwrap();
        assert!((frac - b - 0.25).abs() < 1e-9);
    }

    #[test]
    fn invalid_phase_name_is_a_config_error() {
        let bad = FIXTURE.replace("dirb_scan", "dirb");
        assert!(parse_labels(&bad, 18_000.0).is_err());
    }

    #[test]
    fn scenarios_sorted_by_name() {
        let labels = parse_labels(FIXTURE, 18_000.0).unwrap();
        assert_eq!(labels[0].name, "s1");
        assert_eq!(labels[1].name, "s2");
    }
}
