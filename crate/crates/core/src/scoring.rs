//! Detector scoring: alert rates per labeled interval, per-phase
//! robustness, detection scores, and the ranked detector table.
//!
//! Robustness of a detector for a phase contrasts its attack-window alert
//! rate with its test-window rate, averaged over the scenarios in which
//! it actually detected the phase; silent scenarios are penalized by the
//! detection score's cross-scenario fraction instead. The detection score
//! is the maximum over phases of robustness times that fraction.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alert, DetectorId, PhaseName, ScenarioLabels};
use crate::render::{fmt_rate, fmt_score};

/// One scenario's labels plus its alerts, the scoring input unit.
#[derive(Clone, Copy)]
pub struct ScenarioData<'a> {
    pub labels: &'a ScenarioLabels,
    pub alerts: &'a [Alert],
}

/// Alerts of one detector inside a half-open interval.
pub fn count_in_interval(alerts: &[Alert], detector: &DetectorId, start: f64, end: f64) -> u64 {
    alerts
        .iter()
        .filter(|a| &a.detector == detector && a.timestamp >= start && a.timestamp < end)
        .count() as u64
}

/// Alerts per minute.
pub fn alert_rate(count: u64, duration_seconds: f64) -> Result<f64> {
    if duration_seconds <= 0.0 || !duration_seconds.is_finite() {
        return Err(Error::invalid(format!(
            "interval duration must be positive, got {duration_seconds}"
        )));
    }
    Ok(count as f64 * 60.0 / duration_seconds)
}

/// Per-scenario counts needed by the robustness formula for one
/// (detector, phase) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseObservation {
    pub n_attack: u64,
    pub n_test: u64,
    pub attack_seconds: f64,
    pub test_seconds: f64,
}

/// Mean over detecting scenarios (`n_attack > 0`) of
/// `1 - min(1, (n_test/n_attack) * (attack/test))`; 0 when no scenario
/// detected the phase.
pub fn robustness_score(observations: &[PhaseObservation]) -> Result<f64> {
    let mut sum = 0.0;
    let mut detecting = 0u32;
    for obs in observations {
        if obs.attack_seconds <= 0.0 || obs.test_seconds <= 0.0 {
            return Err(Error::invalid("robustness: interval durations must be positive"));
        }
        if obs.n_attack == 0 {
            continue;
        }
        let ratio = (obs.n_test as f64 / obs.n_attack as f64)
            * (obs.attack_seconds / obs.test_seconds);
        sum += 1.0 - ratio.min(1.0);
        detecting += 1;
    }
    if detecting == 0 {
        Ok(0.0)
    } else {
        Ok(sum / f64::from(detecting))
    }
}

/// Row of the detection matrix for one detector.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    /// Scenarios with at least one alert inside the phase window(s).
    pub phase_scenarios: [u32; 10],
    /// Scenarios with at least one alert inside the test window.
    pub false_positives: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionMatrix {
    /// How many scenarios contain each phase at all.
    pub phase_totals: [u32; 10],
    pub rows: BTreeMap<DetectorId, MatrixRow>,
}

/// Everything known about one detector after scoring: matrix row,
/// per-phase robustness, and the detection score with its achieving phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub detector: DetectorId,
    pub robustness: BTreeMap<PhaseName, f64>,
    pub detection_score: f64,
    /// Phase achieving the detection-score maximum, if any.
    pub best_phase: Option<PhaseName>,
    #[serde(flatten)]
    pub matrix: MatrixRow,
}

impl ScoreRow {
    /// Robustness displayed in reports: the value for the phase that
    /// achieves the detection score.
    pub fn display_robustness(&self) -> f64 {
        self.best_phase.map_or(0.0, |p| self.robustness.get(&p).copied().unwrap_or(0.0))
    }
}

/// Detection score: max over phases of robustness times the fraction of
/// phase-bearing scenarios in which the detector alerted. Returns the
/// score and the achieving phase (ties prefer higher robustness, then
/// canonical phase order).
pub fn detection_score(
    robustness: &BTreeMap<PhaseName, f64>,
    row: &MatrixRow,
    phase_totals: &[u32; 10],
) -> (f64, Option<PhaseName>) {
    let mut best = 0.0f64;
    let mut best_phase: Option<PhaseName> = None;
    for phase in PhaseName::ALL {
        let i = phase.index();
        if phase_totals[i] == 0 {
            continue;
        }
        let rob = robustness.get(&phase).copied().unwrap_or(0.0);
        let fraction = f64::from(row.phase_scenarios[i]) / f64::from(phase_totals[i]);
        let score = rob * fraction;
        let better = score > best
            || (score == best
                && best_phase.is_some_and(|bp| {
                    rob > robustness.get(&bp).copied().unwrap_or(0.0)
                }));
        if score > 0.0 && (best_phase.is_none() || better) {
            best = score;
            best_phase = Some(phase);
        }
    }
    (best, best_phase)
}

#[derive(Debug, Clone, Copy, Default)]
struct DetectorTally {
    phase_counts: [u64; 10],
    test_count: u64,
}

fn tally_scenario(data: &ScenarioData<'_>) -> HashMap<DetectorId, DetectorTally> {
    let mut tallies: HashMap<DetectorId, DetectorTally> = HashMap::new();
    for alert in data.alerts {
        let entry = tallies.entry(alert.detector.clone()).or_default();
        for w in &data.labels.phases {
            if w.contains(alert.timestamp) {
                entry.phase_counts[w.phase.index()] += 1;
            }
        }
        if data.labels.test.contains(alert.timestamp) {
            entry.test_count += 1;
        }
    }
    tallies
}

fn tally_all(data: &[ScenarioData<'_>]) -> Vec<HashMap<DetectorId, DetectorTally>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_iter().map(tally_scenario).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.iter().map(tally_scenario).collect()
    }
}

fn phase_totals(data: &[ScenarioData<'_>]) -> [u32; 10] {
    let mut totals = [0u32; 10];
    for d in data {
        for phase in PhaseName::ALL {
            if d.labels.has_phase(phase) {
                totals[phase.index()] += 1;
            }
        }
    }
    totals
}

fn assemble_scores(
    data: &[ScenarioData<'_>],
    tallies: &[HashMap<DetectorId, DetectorTally>],
) -> Vec<ScoreRow> {
    let totals = phase_totals(data);
    let mut detectors: Vec<DetectorId> = tallies
        .iter()
        .flat_map(|t| t.keys().cloned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    detectors.sort();

    let mut rows = Vec::with_capacity(detectors.len());
    for detector in detectors {
        let mut matrix = MatrixRow::default();
        let mut robustness = BTreeMap::new();
        for phase in PhaseName::ALL {
            let i = phase.index();
            let mut observations = Vec::new();
            for (d, tally) in data.iter().zip(tallies) {
                if !d.labels.has_phase(phase) {
                    continue;
                }
                let t = tally.get(&detector).copied().unwrap_or_default();
                observations.push(PhaseObservation {
                    n_attack: t.phase_counts[i],
                    n_test: t.test_count,
                    attack_seconds: d.labels.phase_duration(phase),
                    test_seconds: d.labels.test.duration(),
                });
            }
            matrix.phase_scenarios[i] =
                observations.iter().filter(|o| o.n_attack > 0).count() as u32;
            if !observations.is_empty() {
                // Durations were validated with the labels; the formula
                // cannot fail here.
                robustness
                    .insert(phase, robustness_score(&observations).expect("positive durations"));
            }
        }
        matrix.false_positives = tallies
            .iter()
            .filter(|t| t.get(&detector).is_some_and(|x| x.test_count > 0))
            .count() as u32;
        let (score, best_phase) = detection_score(&robustness, &matrix, &totals);
        rows.push(ScoreRow { detector, robustness, detection_score: score, best_phase, matrix });
    }
    rows
}

/// Scores every detector observed in the data. Rows come back sorted by
/// detector id; use [`rank_detectors`] for the report order.
pub fn score_detectors(data: &[ScenarioData<'_>]) -> Vec<ScoreRow> {
    assemble_scores(data, &tally_all(data))
}

/// Sequential fallback of [`score_detectors`]; same output.
pub fn score_detectors_seq(data: &[ScenarioData<'_>]) -> Vec<ScoreRow> {
    let tallies: Vec<_> = data.iter().map(tally_scenario).collect();
    assemble_scores(data, &tallies)
}

/// Number of scenarios with at least one alert per (detector, phase),
/// plus the false-positive column.
pub fn detection_matrix(data: &[ScenarioData<'_>]) -> DetectionMatrix {
    let rows = score_detectors(data)
        .into_iter()
        .map(|r| (r.detector, r.matrix))
        .collect();
    DetectionMatrix { phase_totals: phase_totals(data), rows }
}

/// Descending by detection score, zero-score rows omitted; ties broken by
/// descending display robustness, then detector id.
pub fn rank_detectors(rows: &[ScoreRow]) -> Vec<ScoreRow> {
    let mut ranked: Vec<ScoreRow> =
        rows.iter().filter(|r| r.detection_score > 0.0).cloned().collect();
    ranked.sort_by(|a, b| {
        b.detection_score
            .total_cmp(&a.detection_score)
            .then_with(|| b.display_robustness().total_cmp(&a.display_robustness()))
            .then_with(|| a.detector.cmp(&b.detector))
    });
    ranked
}

/// Alert rates accumulated over all scenarios: counts summed, interval
/// durations summed over the scenarios that contain the interval.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub phase_counts: [u64; 10],
    pub phase_rates: [f64; 10],
    pub normal_count: u64,
    pub normal_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub rows: BTreeMap<DetectorId, RateRow>,
}

pub fn rate_table(data: &[ScenarioData<'_>]) -> RateTable {
    let tallies = tally_all(data);
    let mut phase_secs = [0.0f64; 10];
    let mut test_secs = 0.0f64;
    for d in data {
        for phase in PhaseName::ALL {
            phase_secs[phase.index()] += d.labels.phase_duration(phase);
        }
        test_secs += d.labels.test.duration();
    }

    let mut rows: BTreeMap<DetectorId, RateRow> = BTreeMap::new();
    for tally in &tallies {
        for (detector, t) in tally {
            let row = rows.entry(detector.clone()).or_default();
            for i in 0..10 {
                row.phase_counts[i] += t.phase_counts[i];
            }
            row.normal_count += t.test_count;
        }
    }
    for row in rows.values_mut() {
        for (i, &secs) in phase_secs.iter().enumerate() {
            row.phase_rates[i] = if secs > 0.0 {
                alert_rate(row.phase_counts[i], secs).expect("positive duration")
            } else {
                0.0
            };
        }
        row.normal_rate = if test_secs > 0.0 {
            alert_rate(row.normal_count, test_secs).expect("positive duration")
        } else {
            0.0
        };
    }
    RateTable { rows }
}

/// Ranked score table as CSV, mirroring the report layout: one count
/// column per phase (blank when zero), false positives, then the two
/// scores in display form.
pub fn write_scores_csv<W: Write>(out: W, ranked: &[ScoreRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["detector".to_string()];
    header.extend(PhaseName::ALL.iter().map(|p| p.label().to_string()));
    header.push("false_positives".into());
    header.push("robustness_score".into());
    header.push("detection_score".into());
    w.write_record(&header).map_err(csv_err)?;
    for row in ranked {
        let mut rec = vec![row.detector.to_string()];
        for phase in PhaseName::ALL {
            let n = row.matrix.phase_scenarios[phase.index()];
            rec.push(if n == 0 { String::new() } else { n.to_string() });
        }
        let fp = row.matrix.false_positives;
        rec.push(if fp == 0 { String::new() } else { fp.to_string() });
        rec.push(fmt_score(row.display_robustness()));
        rec.push(fmt_score(row.detection_score));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Rate heatmap as CSV: blank cells for silent intervals, ">0" below 0.01.
pub fn write_rates_csv<W: Write>(out: W, table: &RateTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["detector".to_string()];
    header.extend(PhaseName::ALL.iter().map(|p| p.label().to_string()));
    header.push("normal".into());
    w.write_record(&header).map_err(csv_err)?;
    for (detector, row) in &table.rows {
        let mut rec = vec![detector.to_string()];
        for i in 0..10 {
            rec.push(fmt_rate(row.phase_counts[i], row.phase_rates[i]));
        }
        rec.push(fmt_rate(row.normal_count, row.normal_rate));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("csv: {e}"))
}
