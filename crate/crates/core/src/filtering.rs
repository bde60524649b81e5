//! Score-threshold and attack-window filters, plus the per-scenario
//! reduction-rate report.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{assign_phase, Alert, DetectorId, ScenarioLabels};
use crate::render::fmt_pct;
use crate::scoring::{ScenarioData, ScoreRow};

/// Detection scores by detector, for filter lookups. Detectors absent
/// from the rows score 0.
#[derive(Debug, Clone, Default)]
pub struct ScoreLookup {
    scores: BTreeMap<DetectorId, f64>,
}

impl ScoreLookup {
    pub fn from_rows(rows: &[ScoreRow]) -> Self {
        ScoreLookup {
            scores: rows.iter().map(|r| (r.detector.clone(), r.detection_score)).collect(),
        }
    }

    pub fn score(&self, detector: &DetectorId) -> f64 {
        self.scores.get(detector).copied().unwrap_or(0.0)
    }
}

/// Keep predicate of the prioritization filter: strictly above the
/// threshold, and never an `unknown` detector.
pub fn passes_score(alert: &Alert, lookup: &ScoreLookup, threshold: f64) -> bool {
    !alert.detector.is_unknown() && lookup.score(&alert.detector) > threshold
}

fn retain_alerts(alerts: &[Alert], keep: impl Fn(&Alert) -> bool + Sync) -> Vec<Alert> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        alerts.par_iter().filter(|a| keep(a)).cloned().collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        alerts.iter().filter(|a| keep(a)).cloned().collect()
    }
}

/// Keeps alerts whose detector's detection score is strictly greater than
/// the threshold; unknown-detector alerts are always dropped.
pub fn filter_by_detection_score(
    alerts: &[Alert],
    rows: &[ScoreRow],
    threshold: f64,
) -> Vec<Alert> {
    let lookup = ScoreLookup::from_rows(rows);
    retain_alerts(alerts, |a| passes_score(a, &lookup, threshold))
}

/// Sequential fallback of [`filter_by_detection_score`]; same output.
pub fn filter_by_detection_score_seq(
    alerts: &[Alert],
    rows: &[ScoreRow],
    threshold: f64,
) -> Vec<Alert> {
    let lookup = ScoreLookup::from_rows(rows);
    alerts.iter().filter(|a| passes_score(a, &lookup, threshold)).cloned().collect()
}

/// Keeps alerts that fall inside any attack-phase window.
pub fn filter_to_attack_phases(alerts: &[Alert], labels: &ScenarioLabels) -> Vec<Alert> {
    retain_alerts(alerts, |a| assign_phase(a, labels).is_some())
}

/// Sequential fallback of [`filter_to_attack_phases`]; same output.
pub fn filter_to_attack_phases_seq(alerts: &[Alert], labels: &ScenarioLabels) -> Vec<Alert> {
    alerts.iter().filter(|a| assign_phase(a, labels).is_some()).cloned().collect()
}

/// Percentage of alerts removed, full precision.
pub fn reduction_rate(before: u64, after: u64) -> Result<f64> {
    if before == 0 {
        return Err(Error::invalid("reduction rate undefined for an empty input set"));
    }
    Ok((1.0 - after as f64 / before as f64) * 100.0)
}

/// Counts for one scenario across the four filter stages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioFilterRow {
    pub scenario: String,
    pub total: u64,
    pub prioritized: u64,
    pub in_phases: u64,
    pub combined: u64,
}

impl ScenarioFilterRow {
    pub fn prioritized_pct(&self) -> Option<f64> {
        reduction_rate(self.total, self.prioritized).ok()
    }

    pub fn in_phases_pct(&self) -> Option<f64> {
        reduction_rate(self.total, self.in_phases).ok()
    }

    pub fn combined_pct(&self) -> Option<f64> {
        reduction_rate(self.total, self.combined).ok()
    }
}

/// Per-scenario stage counts plus the unweighted mean reduction rate of
/// each stage over the scenarios that had alerts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub rows: Vec<ScenarioFilterRow>,
    pub avg_prioritized_pct: f64,
    pub avg_in_phases_pct: f64,
    pub avg_combined_pct: f64,
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

impl FilterReport {
    /// Assembles the report from per-scenario counts, computing the
    /// unweighted per-stage averages.
    pub fn from_rows(rows: Vec<ScenarioFilterRow>) -> Self {
        let collect = |f: fn(&ScenarioFilterRow) -> Option<f64>| {
            rows.iter().filter_map(f).collect::<Vec<f64>>()
        };
        FilterReport {
            avg_prioritized_pct: mean(&collect(ScenarioFilterRow::prioritized_pct)),
            avg_in_phases_pct: mean(&collect(ScenarioFilterRow::in_phases_pct)),
            avg_combined_pct: mean(&collect(ScenarioFilterRow::combined_pct)),
            rows,
        }
    }
}

/// Runs both filters over every scenario and assembles the report. The
/// combined stage is the true set intersection of the two predicates.
pub fn build_filter_report(
    data: &[ScenarioData<'_>],
    rows: &[ScoreRow],
    threshold: f64,
) -> FilterReport {
    let lookup = ScoreLookup::from_rows(rows);
    let mut report_rows = Vec::with_capacity(data.len());
    for d in data {
        let total = d.alerts.len() as u64;
        let mut prioritized = 0u64;
        let mut in_phases = 0u64;
        let mut combined = 0u64;
        for a in d.alerts {
            let scored = passes_score(a, &lookup, threshold);
            let phased = assign_phase(a, d.labels).is_some();
            prioritized += u64::from(scored);
            in_phases += u64::from(phased);
            combined += u64::from(scored && phased);
        }
        report_rows.push(ScenarioFilterRow {
            scenario: d.labels.name.clone(),
            total,
            prioritized,
            in_phases,
            combined,
        });
    }
    FilterReport::from_rows(report_rows)
}

const STAGE_NAMES: [&str; 4] =
    ["All", "Filtered by prioritization", "In attack phases", "Filtered and in attack phases"];

fn stage_cells(report: &FilterReport, stage: usize) -> Vec<String> {
    report
        .rows
        .iter()
        .map(|r| {
            let (count, pct) = match stage {
                0 => (r.total, None),
                1 => (r.prioritized, r.prioritized_pct()),
                2 => (r.in_phases, r.in_phases_pct()),
                _ => (r.combined, r.combined_pct()),
            };
            match pct {
                Some(p) => format!("{count} ({}%)", fmt_pct(p)),
                None => count.to_string(),
            }
        })
        .collect()
}

fn stage_avg(report: &FilterReport, stage: usize) -> String {
    match stage {
        0 => "-".to_string(),
        1 => format!("{}%", fmt_pct(report.avg_prioritized_pct)),
        2 => format!("{}%", fmt_pct(report.avg_in_phases_pct)),
        _ => format!("{}%", fmt_pct(report.avg_combined_pct)),
    }
}

/// Filter report as CSV: one row per stage, one column per scenario, plus
/// the average reduction rate.
pub fn write_filter_csv<W: Write>(out: W, report: &FilterReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["alerts".to_string()];
    header.extend(report.rows.iter().map(|r| r.scenario.clone()));
    header.push("avg_reduction_rate".into());
    w.write_record(&header).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    for (stage, name) in STAGE_NAMES.iter().enumerate() {
        let mut rec = vec![name.to_string()];
        rec.extend(stage_cells(report, stage));
        rec.push(stage_avg(report, stage));
        w.write_record(&rec).map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Aligned text rendering of the same table.
pub fn render_filter_table(report: &FilterReport) -> String {
    let mut columns: Vec<Vec<String>> = Vec::new();
    let mut first = vec!["Alerts".to_string()];
    first.extend(STAGE_NAMES.iter().map(|s| s.to_string()));
    columns.push(first);
    for (i, row) in report.rows.iter().enumerate() {
        let mut col = vec![row.scenario.clone()];
        for stage in 0..4 {
            col.push(stage_cells(report, stage)[i].clone());
        }
        columns.push(col);
    }
    let mut avg = vec!["Avg. reduction rate".to_string()];
    for stage in 0..4 {
        avg.push(stage_avg(report, stage));
    }
    columns.push(avg);

    let widths: Vec<usize> =
        columns.iter().map(|c| c.iter().map(String::len).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for line in 0..5 {
        let cells: Vec<String> = columns
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{:<w$}", c[line], w = w))
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
