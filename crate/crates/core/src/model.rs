//! Shared domain types: alert schema, detector taxonomy identifiers, and
//! phase/test-window labeling of scenarios.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One day in seconds; the default test window sits one day before the attack.
pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// Default test-window duration (5 hours).
pub const DEFAULT_TEST_WINDOW_SECS: f64 = 18_000.0;

/// The IDS that produced an alert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdsSource {
    Wazuh,
    Suricata,
    Aminer,
}

impl IdsSource {
    pub const ALL: [IdsSource; 3] = [IdsSource::Wazuh, IdsSource::Suricata, IdsSource::Aminer];

    pub fn as_str(self) -> &'static str {
        match self {
            IdsSource::Wazuh => "wazuh",
            IdsSource::Suricata => "suricata",
            IdsSource::Aminer => "aminer",
        }
    }

    /// Leading token of the detector abbreviation ("W-...", "S-...", "A-...").
    pub fn token(self) -> &'static str {
        match self {
            IdsSource::Wazuh => "W",
            IdsSource::Suricata => "S",
            IdsSource::Aminer => "A",
        }
    }
}

impl fmt::Display for IdsSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for IdsSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wazuh" => Ok(IdsSource::Wazuh),
            "suricata" => Ok(IdsSource::Suricata),
            "aminer" => Ok(IdsSource::Aminer),
            other => Err(Error::invalid(format!("unknown IDS source {other:?}"))),
        }
    }
}

/// Detector abbreviation in its rendered three-token form ("W-Acc-Att"),
/// or the sentinel `"unknown"` for signatures outside the taxonomy.
///
/// Ordering and equality follow the rendered string, so sorting a set of
/// ids yields the A-/S-/W- groups in lexicographic order with `unknown`
/// last.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DetectorId(String);

pub const UNKNOWN_DETECTOR: &str = "unknown";

impl DetectorId {
    pub fn new(ids: IdsSource, source: &str, event: &str) -> Self {
        DetectorId(format!("{}-{}-{}", ids.token(), source, event))
    }

    pub fn unknown() -> Self {
        DetectorId(UNKNOWN_DETECTOR.to_string())
    }

    pub fn is_unknown(&self) -> bool {
        self.0 == UNKNOWN_DETECTOR
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Parses a rendered abbreviation. Accepts the sentinel `"unknown"`;
    /// otherwise requires the `X-Yyy-Zzz` shape with a known IDS token.
    pub fn from_rendered(s: &str) -> Result<Self> {
        if s == UNKNOWN_DETECTOR {
            return Ok(DetectorId::unknown());
        }
        let mut parts = s.splitn(3, '-');
        let (ids, source, event) = (parts.next(), parts.next(), parts.next());
        match (ids, source, event) {
            (Some(t), Some(src), Some(ev))
                if matches!(t, "W" | "S" | "A") && !src.is_empty() && !ev.is_empty() =>
            {
                Ok(DetectorId(s.to_string()))
            }
            _ => Err(Error::invalid(format!("malformed detector id {s:?}"))),
        }
    }

    pub fn ids(&self) -> Option<IdsSource> {
        match self.0.split('-').next() {
            Some("W") => Some(IdsSource::Wazuh),
            Some("S") => Some(IdsSource::Suricata),
            Some("A") => Some(IdsSource::Aminer),
            _ => None,
        }
    }

    pub fn source(&self) -> Option<&str> {
        self.0.split('-').nth(1)
    }

    pub fn event(&self) -> Option<&str> {
        self.0.split('-').nth(2)
    }
}

impl fmt::Display for DetectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The ten labeled attack phases. Declaration order is the canonical
/// column order of reports; the first eight form the sequential
/// multi-step attack (A1..A8), the last two belong to the data
/// exfiltration case.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum PhaseName {
    NetworkScans,
    ServiceScans,
    WordpressScan,
    DirbScan,
    WebshellUpload,
    PasswordCracking,
    ReverseShell,
    PrivilegeEscalation,
    ServiceStop,
    DataExfiltration,
}

impl PhaseName {
    pub const ALL: [PhaseName; 10] = [
        PhaseName::NetworkScans,
        PhaseName::ServiceScans,
        PhaseName::WordpressScan,
        PhaseName::DirbScan,
        PhaseName::WebshellUpload,
        PhaseName::PasswordCracking,
        PhaseName::ReverseShell,
        PhaseName::PrivilegeEscalation,
        PhaseName::ServiceStop,
        PhaseName::DataExfiltration,
    ];

    /// The eight sequential multi-step phases (A1..A8).
    pub const MULTI_STEP: [PhaseName; 8] = [
        PhaseName::NetworkScans,
        PhaseName::ServiceScans,
        PhaseName::WordpressScan,
        PhaseName::DirbScan,
        PhaseName::WebshellUpload,
        PhaseName::PasswordCracking,
        PhaseName::ReverseShell,
        PhaseName::PrivilegeEscalation,
    ];

    pub fn index(self) -> usize {
        PhaseName::ALL.iter().position(|p| *p == self).unwrap()
    }

    pub fn is_multi_step(self) -> bool {
        self.index() < 8
    }

    pub fn label(self) -> &'static str {
        match self {
            PhaseName::NetworkScans => "network_scans",
            PhaseName::ServiceScans => "service_scans",
            PhaseName::WordpressScan => "wordpress_scan",
            PhaseName::DirbScan => "dirb_scan",
            PhaseName::WebshellUpload => "webshell_upload",
            PhaseName::PasswordCracking => "password_cracking",
            PhaseName::ReverseShell => "reverse_shell",
            PhaseName::PrivilegeEscalation => "privilege_escalation",
            PhaseName::ServiceStop => "service_stop",
            PhaseName::DataExfiltration => "data_exfiltration",
        }
    }
}

impl fmt::Display for PhaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PhaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhaseName::ALL
            .iter()
            .copied()
            .find(|p| p.label() == s)
            .ok_or_else(|| Error::invalid(format!("unknown attack phase {s:?}")))
    }
}

/// One normalized intrusion alert.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub id: String,
    /// Seconds since the Unix epoch, UTC; fractional seconds allowed.
    pub timestamp: f64,
    pub ids: IdsSource,
    pub detector: DetectorId,
    pub signature: String,
    pub host: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_ip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_ip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src_port: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dst_port: Option<u16>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, String>,
    /// Original record text, preserved verbatim.
    pub raw: String,
}

/// A labeled attack-phase time window, half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackPhaseWindow {
    pub phase: PhaseName,
    pub start: f64,
    pub end: f64,
}

impl AttackPhaseWindow {
    pub fn contains(&self, ts: f64) -> bool {
        ts >= self.start && ts < self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// The normal-operation baseline window, half-open `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestWindow {
    pub start: f64,
    pub end: f64,
}

impl TestWindow {
    pub fn contains(&self, ts: f64) -> bool {
        ts >= self.start && ts < self.end
    }

    pub fn duration(&self) -> f64 {
        self.end - self.start
    }
}

/// Phase and test-window labels for one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLabels {
    pub name: String,
    pub phases: Vec<AttackPhaseWindow>,
    pub test: TestWindow,
    pub data_start: f64,
    pub data_end: f64,
}

impl ScenarioLabels {
    /// Checks the structural invariants: every window is non-empty and lies
    /// within the capture, the eight multi-step phases are pairwise
    /// disjoint, and the test window overlaps no phase window.
    // Negated comparisons also reject NaN endpoints.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        let name = &self.name;
        if !(self.data_start < self.data_end) {
            return Err(Error::invalid(format!("{name}: empty capture range")));
        }
        for w in &self.phases {
            if !(w.start < w.end) {
                return Err(Error::invalid(format!(
                    "{name}: phase {} window has start >= end",
                    w.phase
                )));
            }
            if w.start < self.data_start || w.end > self.data_end {
                return Err(Error::invalid(format!(
                    "{name}: phase {} window outside capture range",
                    w.phase
                )));
            }
        }
        let multi: Vec<&AttackPhaseWindow> =
            self.phases.iter().filter(|w| w.phase.is_multi_step()).collect();
        for (i, a) in multi.iter().enumerate() {
            for b in &multi[i + 1..] {
                if a.start < b.end && b.start < a.end {
                    return Err(Error::invalid(format!(
                        "{name}: multi-step phases {} and {} overlap",
                        a.phase, b.phase
                    )));
                }
            }
        }
        if !(self.test.start < self.test.end) {
            return Err(Error::invalid(format!("{name}: empty test window")));
        }
        if self.test.start < self.data_start || self.test.end > self.data_end {
            return Err(Error::invalid(format!("{name}: test window outside capture range")));
        }
        for w in &self.phases {
            if w.start < self.test.end && self.test.start < w.end {
                return Err(Error::invalid(format!(
                    "{name}: test window overlaps phase {}",
                    w.phase
                )));
            }
        }
        Ok(())
    }

    pub fn has_phase(&self, phase: PhaseName) -> bool {
        self.phases.iter().any(|w| w.phase == phase)
    }

    pub fn phase_windows(&self, phase: PhaseName) -> impl Iterator<Item = &AttackPhaseWindow> {
        self.phases.iter().filter(move |w| w.phase == phase)
    }

    /// Total labeled duration of a phase in this scenario (zero if absent).
    pub fn phase_duration(&self, phase: PhaseName) -> f64 {
        self.phase_windows(phase).map(AttackPhaseWindow::duration).sum()
    }
}

/// Returns the phase whose half-open window contains `ts`. When several
/// windows contain it (the two attack cases may overlap in time), the
/// window with the latest start wins; equal starts fall back to the later
/// phase in canonical order.
pub fn assign_phase_at(ts: f64, labels: &ScenarioLabels) -> Option<PhaseName> {
    labels
        .phases
        .iter()
        .filter(|w| w.contains(ts))
        .max_by(|a, b| {
            a.start
                .partial_cmp(&b.start)
                .unwrap()
                .then(a.phase.index().cmp(&b.phase.index()))
        })
        .map(|w| w.phase)
}

/// Phase label for an alert, by timestamp only.
pub fn assign_phase(alert: &Alert, labels: &ScenarioLabels) -> Option<PhaseName> {
    assign_phase_at(alert.timestamp, labels)
}

pub fn in_test_window_at(ts: f64, labels: &ScenarioLabels) -> bool {
    labels.test.contains(ts)
}

/// True iff the alert falls in the scenario's normal-operation window.
pub fn in_test_window(alert: &Alert, labels: &ScenarioLabels) -> bool {
    in_test_window_at(alert.timestamp, labels)
}

/// Derives the default test window: `duration` seconds starting one day
/// before the earliest multi-step phase. Fails when the scenario has no
/// multi-step phase, when the derived window would precede the capture
/// start, or when it would overlap a phase window — all signals that the
/// scenario needs an explicit window in its label file.
pub fn derive_default_test_window(
    phases: &[AttackPhaseWindow],
    data_start: f64,
    duration: f64,
) -> Result<TestWindow> {
    if duration <= 0.0 {
        return Err(Error::invalid("test window duration must be positive"));
    }
    let earliest = phases
        .iter()
        .filter(|w| w.phase.is_multi_step())
        .map(|w| w.start)
        .fold(f64::INFINITY, f64::min);
    if !earliest.is_finite() {
        return Err(Error::invalid(
            "cannot derive a test window: no multi-step phase labeled",
        ));
    }
    let start = earliest - SECONDS_PER_DAY;
    let window = TestWindow { start, end: start + duration };
    if start < data_start {
        return Err(Error::invalid(
            "derived test window precedes the capture start; set one explicitly",
        ));
    }
    for w in phases {
        if w.start < window.end && window.start < w.end {
            return Err(Error::invalid(format!(
                "derived test window overlaps phase {}; set one explicitly",
                w.phase
            )));
        }
    }
    Ok(window)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(phase: PhaseName, start: f64, end: f64) -> AttackPhaseWindow {
        AttackPhaseWindow { phase, start, end }
    }

    fn labels() -> ScenarioLabels {
        ScenarioLabels {
            name: "fixture".into(),
            phases: vec![
                window(PhaseName::NetworkScans, 100_000.0, 100_600.0),
                window(PhaseName::DirbScan, 101_000.0, 101_900.0),
                window(PhaseName::PasswordCracking, 102_000.0, 104_120.0),
                // The exfiltration case overlaps the multi-step attack.
                window(PhaseName::DataExfiltration, 90_000.0, 103_000.0),
            ],
            test: TestWindow { start: 10_000.0, end: 28_000.0 },
            data_start: 0.0,
            data_end: 200_000.0,
        }
    }

    #[test]
    fn labels_fixture_is_valid() {
        labels().validate().unwrap();
    }

    #[test]
    fn assign_phase_interior_point() {
        assert_eq!(assign_phase_at(101_450.0, &labels()), Some(PhaseName::DirbScan));
    }

    #[test]
    fn assign_phase_window_end_is_exclusive() {
        // 101_900 is DirbScan's end: not that phase, but still inside the
        // overlapping exfiltration window.
        assert_eq!(
            assign_phase_at(101_900.0, &labels()),
            Some(PhaseName::DataExfiltration)
        );
        assert_eq!(assign_phase_at(104_120.0, &labels()), None);
    }

    #[test]
    fn assign_phase_before_everything_is_none() {
        assert_eq!(assign_phase_at(89_999.0, &labels()), None);
    }

    #[test]
    fn assign_phase_latest_start_wins_on_overlap() {
        // Inside both DataExfiltration (start 90k) and NetworkScans (start 100k).
        assert_eq!(assign_phase_at(100_300.0, &labels()), Some(PhaseName::NetworkScans));
        // Inside both DataExfiltration and PasswordCracking.
        assert_eq!(
            assign_phase_at(102_500.0, &labels()),
            Some(PhaseName::PasswordCracking)
        );
        // Exfiltration alone once the cracking window is past its own end.
        assert_eq!(
            assign_phase_at(90_500.0, &labels()),
            Some(PhaseName::DataExfiltration)
        );
    }

    #[test]
    fn assign_phase_is_order_independent() {
        let base = labels();
        let points = [89_999.0, 90_500.0, 100_300.0, 101_450.0, 102_500.0, 104_120.0];
        let mut perm = base.clone();
        // Enough permutations to cover every pairwise order of the 4 windows.
        for _ in 0..12 {
            perm.phases.rotate_left(1);
            perm.phases.swap(0, 1);
            for ts in points {
                assert_eq!(assign_phase_at(ts, &perm), assign_phase_at(ts, &base));
            }
        }
    }

    #[test]
    fn test_window_boundaries() {
        let l = labels();
        assert!(in_test_window_at(10_000.0, &l));
        assert!(!in_test_window_at(28_000.0, &l));
        assert!(!in_test_window_at(9_999.0, &l));
    }

    #[test]
    fn test_window_and_phase_are_mutually_exclusive() {
        let l = labels();
        let mut ts = l.data_start;
        while ts < l.data_end {
            if in_test_window_at(ts, &l) {
                assert_eq!(assign_phase_at(ts, &l), None);
            }
            ts += 500.0;
        }
    }

    #[test]
    fn derive_test_window_direct_construction() {
        let phases = vec![window(PhaseName::NetworkScans, 100_000.0, 100_600.0)];
        let w = derive_default_test_window(&phases, 0.0, DEFAULT_TEST_WINDOW_SECS).unwrap();
        assert_eq!(w.start, 100_000.0 - SECONDS_PER_DAY);
        assert_eq!(w.end, w.start + 18_000.0);
    }

    #[test]
    fn derive_test_window_rejects_overlap() {
        let phases = vec![
            window(PhaseName::NetworkScans, 100_000.0, 100_600.0),
            window(PhaseName::DataExfiltration, 10_000.0, 20_000.0),
        ];
        assert!(derive_default_test_window(&phases, 0.0, 18_000.0).is_err());
    }

    #[test]
    fn derive_test_window_rejects_preceding_capture() {
        let phases = vec![window(PhaseName::NetworkScans, 50_000.0, 50_600.0)];
        assert!(derive_default_test_window(&phases, 0.0, 18_000.0).is_err());
    }

    #[test]
    fn multi_step_overlap_is_rejected() {
        let mut l = labels();
        l.phases.push(window(PhaseName::ServiceScans, 100_500.0, 100_700.0));
        assert!(l.validate().is_err());
    }

    #[test]
    fn detector_id_round_trip() {
        let id = DetectorId::new(IdsSource::Wazuh, "Acc", "Att");
        assert_eq!(id.as_str(), "W-Acc-Att");
        assert_eq!(id.ids(), Some(IdsSource::Wazuh));
        assert_eq!(id.source(), Some("Acc"));
        assert_eq!(id.event(), Some("Att"));
        assert_eq!(DetectorId::from_rendered("W-Acc-Att").unwrap(), id);
        assert!(DetectorId::from_rendered("unknown").unwrap().is_unknown());
        assert!(DetectorId::from_rendered("X-Acc-Att").is_err());
        assert!(DetectorId::from_rendered("WAccAtt").is_err());
    }

    #[test]
    fn detector_ordering_is_rendered_lexicographic() {
        let mut ids = [
            DetectorId::unknown(),
            DetectorId::from_rendered("W-Acc-Att").unwrap(),
            DetectorId::from_rendered("A-Mon-Avg").unwrap(),
            DetectorId::from_rendered("S-Flw-Nmp").unwrap(),
        ];
        ids.sort();
        let rendered: Vec<&str> = ids.iter().map(|d| d.as_str()).collect();
        assert_eq!(rendered, ["A-Mon-Avg", "S-Flw-Nmp", "W-Acc-Att", "unknown"]);
    }

    #[test]
    fn phase_order_matches_report_columns() {
        assert_eq!(PhaseName::NetworkScans.index(), 0);
        assert_eq!(PhaseName::DataExfiltration.index(), 9);
        assert!(PhaseName::PrivilegeEscalation.is_multi_step());
        assert!(!PhaseName::ServiceStop.is_multi_step());
        assert_eq!("dirb_scan".parse::<PhaseName>().unwrap(), PhaseName::DirbScan);
    }
}
