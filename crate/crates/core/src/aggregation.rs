//! Groups temporally close alerts, measures group similarity, and
//! incrementally merges similar groups into meta-alerts.
//!
//! Similarity blends three signals: detector-set overlap, per-detector
//! frequency agreement, and sequence agreement (longest common
//! subsequence), weighted 0.4/0.4/0.2 by default. Merging walks groups in
//! global time order and folds each into the best-matching meta-alert, or
//! opens a new one.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alert, DetectorId, IdsSource};

/// Sequences longer than this are evenly subsampled before the LCS pass,
/// which is quadratic; grouped corpora stay exact well beyond any of the
/// published scenario sizes per group.
const LCS_MAX_LEN: usize = 2048;

/// A maximal run of alerts separated by gaps no longer than the interval
/// time, within one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertGroup {
    pub scenario: String,
    pub alerts: Vec<Alert>,
    pub start: f64,
    pub end: f64,
    pub detector_bag: BTreeMap<DetectorId, u32>,
}

impl AlertGroup {
    pub fn from_alerts(scenario: &str, alerts: Vec<Alert>) -> Self {
        debug_assert!(!alerts.is_empty());
        let start = alerts.first().map_or(0.0, |a| a.timestamp);
        let end = alerts.last().map_or(0.0, |a| a.timestamp);
        let mut detector_bag: BTreeMap<DetectorId, u32> = BTreeMap::new();
        for a in &alerts {
            *detector_bag.entry(a.detector.clone()).or_insert(0) += 1;
        }
        AlertGroup { scenario: scenario.to_string(), alerts, start, end, detector_bag }
    }

    pub fn detector_sequence(&self) -> Vec<&DetectorId> {
        self.alerts.iter().map(|a| &a.detector).collect()
    }

    pub fn len(&self) -> usize {
        self.alerts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alerts.is_empty()
    }
}

/// Splits a time-ordered alert list: a new group starts whenever the gap
/// to the previous alert strictly exceeds `interval_seconds`.
pub fn group_by_gap(
    alerts: &[Alert],
    scenario: &str,
    interval_seconds: f64,
) -> Result<Vec<AlertGroup>> {
    if interval_seconds < 0.0 || !interval_seconds.is_finite() {
        return Err(Error::invalid("interval time must be non-negative"));
    }
    let mut groups = Vec::new();
    let mut current: Vec<Alert> = Vec::new();
    let mut prev_ts = f64::NEG_INFINITY;
    for alert in alerts {
        if alert.timestamp < prev_ts {
            return Err(Error::invalid(format!(
                "{scenario}: alerts must be sorted by timestamp before grouping"
            )));
        }
        if !current.is_empty() && alert.timestamp - prev_ts > interval_seconds {
            groups.push(AlertGroup::from_alerts(scenario, std::mem::take(&mut current)));
        }
        prev_ts = alert.timestamp;
        current.push(alert.clone());
    }
    if !current.is_empty() {
        groups.push(AlertGroup::from_alerts(scenario, current));
    }
    Ok(groups)
}

/// Gap-groups every scenario and returns all groups in global time order
/// (ties broken by scenario name).
pub fn group_all(
    per_scenario: &BTreeMap<String, Vec<Alert>>,
    interval_seconds: f64,
) -> Result<Vec<AlertGroup>> {
    let scenarios: Vec<(&String, &Vec<Alert>)> = per_scenario.iter().collect();
    let grouped: Vec<Result<Vec<AlertGroup>>>;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        grouped = scenarios
            .par_iter()
            .map(|(name, alerts)| group_by_gap(alerts, name, interval_seconds))
            .collect();
    }
    #[cfg(not(feature = "parallel"))]
    {
        grouped = scenarios
            .iter()
            .map(|(name, alerts)| group_by_gap(alerts, name, interval_seconds))
            .collect();
    }
    let mut all = Vec::new();
    for groups in grouped {
        all.extend(groups?);
    }
    all.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.scenario.cmp(&b.scenario)));
    Ok(all)
}

/// Sequential fallback of [`group_all`]; same output.
pub fn group_all_seq(
    per_scenario: &BTreeMap<String, Vec<Alert>>,
    interval_seconds: f64,
) -> Result<Vec<AlertGroup>> {
    let mut all = Vec::new();
    for (name, alerts) in per_scenario {
        all.extend(group_by_gap(alerts, name, interval_seconds)?);
    }
    all.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.scenario.cmp(&b.scenario)));
    Ok(all)
}

/// Weights of the three group-similarity components; normalized by their
/// sum, so any positive combination keeps the score in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub detectors: f64,
    pub frequencies: f64,
    pub sequence: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        SimilarityWeights { detectors: 0.4, frequencies: 0.4, sequence: 0.2 }
    }
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] =
                if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn subsample<T>(items: &[T], max: usize) -> Vec<&T> {
    if items.len() <= max {
        items.iter().collect()
    } else {
        (0..max).map(|i| &items[i * items.len() / max]).collect()
    }
}

/// Sequence-similarity component: LCS length over the longer length.
fn sequence_similarity(g1: &AlertGroup, g2: &AlertGroup) -> f64 {
    let s1 = subsample(&g1.alerts, LCS_MAX_LEN);
    let s2 = subsample(&g2.alerts, LCS_MAX_LEN);
    let longer = s1.len().max(s2.len());
    if longer == 0 {
        return 1.0;
    }
    let a: Vec<&DetectorId> = s1.iter().map(|al| &al.detector).collect();
    let b: Vec<&DetectorId> = s2.iter().map(|al| &al.detector).collect();
    lcs_len(&a, &b) as f64 / longer as f64
}

/// Similarity of two alert groups in [0, 1], per the default weights.
pub fn group_similarity(g1: &AlertGroup, g2: &AlertGroup) -> f64 {
    group_similarity_weighted(g1, g2, &SimilarityWeights::default())
}

pub fn group_similarity_weighted(
    g1: &AlertGroup,
    g2: &AlertGroup,
    w: &SimilarityWeights,
) -> f64 {
    let keys1: BTreeSet<&DetectorId> = g1.detector_bag.keys().collect();
    let keys2: BTreeSet<&DetectorId> = g2.detector_bag.keys().collect();
    let shared: Vec<&&DetectorId> = keys1.intersection(&keys2).collect();
    let union = keys1.union(&keys2).count();

    let jaccard = if union == 0 { 1.0 } else { shared.len() as f64 / union as f64 };
    let frequency = if shared.is_empty() {
        0.0
    } else {
        let sum: f64 = shared
            .iter()
            .map(|d| {
                let c1 = f64::from(g1.detector_bag[**d]);
                let c2 = f64::from(g2.detector_bag[**d]);
                c1.min(c2) / c1.max(c2)
            })
            .sum();
        sum / shared.len() as f64
    };
    let sequence = sequence_similarity(g1, g2);

    let total = w.detectors + w.frequencies + w.sequence;
    if total <= 0.0 {
        return 0.0;
    }
    (w.detectors * jaccard + w.frequencies * frequency + w.sequence * sequence) / total
}

/// Similarity of two single alerts: 0 across detectors; otherwise the
/// fraction of shared attribute keys with equal values (1 when the alerts
/// share no keys).
pub fn alert_similarity(a: &Alert, b: &Alert) -> f64 {
    if a.detector != b.detector {
        return 0.0;
    }
    let shared: Vec<&String> =
        a.attributes.keys().filter(|k| b.attributes.contains_key(*k)).collect();
    if shared.is_empty() {
        return 1.0;
    }
    let equal = shared.iter().filter(|k| a.attributes[**k] == b.attributes[**k]).count();
    equal as f64 / shared.len() as f64
}

/// One merged alert pattern inside a meta-alert. Attribute values are
/// fixed strings or `None` for a wildcard; the frequency range tracks the
/// per-group occurrence counts seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertTemplate {
    pub detector: DetectorId,
    pub attributes: BTreeMap<String, Option<String>>,
    pub frequency_range: (u32, u32),
}

/// Reference to a contributing group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRef {
    pub id: String,
    pub scenario: String,
    pub start: f64,
    pub end: f64,
    pub alert_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaAlert {
    pub id: String,
    pub templates: Vec<AlertTemplate>,
    pub members: Vec<GroupRef>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeParams {
    pub group_threshold: f64,
    pub alert_threshold: f64,
    pub weights: SimilarityWeights,
}

impl Default for MergeParams {
    fn default() -> Self {
        MergeParams {
            group_threshold: 0.55,
            alert_threshold: 0.5,
            weights: SimilarityWeights::default(),
        }
    }
}

fn template_alert_similarity(template: &AlertTemplate, alert: &Alert) -> f64 {
    if template.detector != alert.detector {
        return 0.0;
    }
    // Wildcards carry no value to compare; only fixed keys participate.
    let fixed: Vec<(&String, &String)> = template
        .attributes
        .iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| (k, v)))
        .collect();
    let shared: Vec<(&String, &String)> = fixed
        .iter()
        .copied()
        .filter(|(k, _)| alert.attributes.contains_key(*k))
        .collect();
    if shared.is_empty() {
        return 1.0;
    }
    let equal = shared.iter().filter(|(k, v)| &alert.attributes[*k] == *v).count();
    equal as f64 / shared.len() as f64
}

/// Builds one template per detector from a cluster of same-detector
/// alerts: keys present in every alert stay (fixed when all values agree,
/// wildcard otherwise), keys absent from any alert are dropped.
fn template_from_cluster(detector: &DetectorId, alerts: &[&Alert]) -> AlertTemplate {
    let mut attributes: BTreeMap<String, Option<String>> = BTreeMap::new();
    if let Some(first) = alerts.first() {
        for (key, value) in &first.attributes {
            let mut keep = true;
            let mut fixed = Some(value.clone());
            for a in &alerts[1..] {
                match a.attributes.get(key) {
                    None => {
                        keep = false;
                        break;
                    }
                    Some(v) if Some(v) != fixed.as_ref() => fixed = None,
                    Some(_) => {}
                }
            }
            if keep {
                attributes.insert(key.clone(), fixed);
            }
        }
    }
    let n = alerts.len() as u32;
    AlertTemplate { detector: detector.clone(), attributes, frequency_range: (n, n) }
}

/// Clusters a group's alerts by detector in first-appearance order.
fn detector_clusters(alerts: &[&Alert]) -> Vec<(DetectorId, Vec<usize>)> {
    let mut order: Vec<DetectorId> = Vec::new();
    let mut clusters: BTreeMap<DetectorId, Vec<usize>> = BTreeMap::new();
    for (i, a) in alerts.iter().enumerate() {
        if !clusters.contains_key(&a.detector) {
            order.push(a.detector.clone());
        }
        clusters.entry(a.detector.clone()).or_default().push(i);
    }
    order
        .into_iter()
        .map(|d| {
            let idxs = clusters.remove(&d).unwrap_or_default();
            (d, idxs)
        })
        .collect()
}

fn meta_from_group(id: String, group: &AlertGroup, group_ref: GroupRef) -> MetaAlert {
    let alerts: Vec<&Alert> = group.alerts.iter().collect();
    let templates = detector_clusters(&alerts)
        .into_iter()
        .map(|(detector, idxs)| {
            let cluster: Vec<&Alert> = idxs.iter().map(|&i| alerts[i]).collect();
            template_from_cluster(&detector, &cluster)
        })
        .collect();
    MetaAlert { id, templates, members: vec![group_ref] }
}

fn merge_group(meta: &mut MetaAlert, group: &AlertGroup, group_ref: GroupRef, alert_threshold: f64) {
    // Each alert goes to its most similar same-detector template at or
    // above the threshold; leftovers become new templates.
    let mut buckets: Vec<Vec<&Alert>> = vec![Vec::new(); meta.templates.len()];
    let mut leftovers: Vec<&Alert> = Vec::new();
    for alert in &group.alerts {
        let mut best: Option<(usize, f64)> = None;
        for (i, template) in meta.templates.iter().enumerate() {
            if template.detector != alert.detector {
                continue;
            }
            let sim = template_alert_similarity(template, alert);
            if sim >= alert_threshold && best.is_none_or(|(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
        match best {
            Some((i, _)) => buckets[i].push(alert),
            None => leftovers.push(alert),
        }
    }

    for (template, bucket) in meta.templates.iter_mut().zip(&buckets) {
        if bucket.is_empty() {
            continue;
        }
        let mut kept: BTreeMap<String, Option<String>> = BTreeMap::new();
        for (key, value) in &template.attributes {
            if bucket.iter().all(|a| a.attributes.contains_key(key)) {
                let agreed = value
                    .as_ref()
                    .is_some_and(|v| bucket.iter().all(|a| &a.attributes[key] == v));
                kept.insert(key.clone(), if agreed { value.clone() } else { None });
            }
        }
        template.attributes = kept;
        let n = bucket.len() as u32;
        template.frequency_range.0 = template.frequency_range.0.min(n);
        template.frequency_range.1 = template.frequency_range.1.max(n);
    }

    for (detector, idxs) in detector_clusters(&leftovers) {
        let cluster: Vec<&Alert> = idxs.iter().map(|&i| leftovers[i]).collect();
        meta.templates.push(template_from_cluster(&detector, &cluster));
    }
    meta.members.push(group_ref);
}

/// A synthetic group standing in for a meta-alert during similarity
/// comparisons and re-merging: each template contributes its detector at
/// the maximum observed frequency, carrying only the fixed attributes.
pub fn representative_group(meta: &MetaAlert) -> AlertGroup {
    let mut alerts = Vec::new();
    let mut ts = 0.0;
    for (i, template) in meta.templates.iter().enumerate() {
        let attributes: BTreeMap<String, String> = template
            .attributes
            .iter()
            .filter_map(|(k, v)| v.clone().map(|v| (k.clone(), v)))
            .collect();
        for k in 0..template.frequency_range.1.max(1) {
            alerts.push(Alert {
                id: format!("{}/t{i}/{k}", meta.id),
                timestamp: ts,
                ids: template.detector.ids().unwrap_or(IdsSource::Wazuh),
                detector: template.detector.clone(),
                signature: template.detector.to_string(),
                host: String::new(),
                src_ip: None,
                dst_ip: None,
                src_port: None,
                dst_port: None,
                attributes: attributes.clone(),
                raw: String::new(),
            });
            ts += 1.0;
        }
    }
    AlertGroup::from_alerts(&meta.id, alerts)
}

/// Incrementally merges groups into meta-alerts. Groups are processed in
/// global time order (ties by scenario name, then end time); each joins
/// the most similar existing meta-alert at or above `group_threshold`, or
/// founds a new one.
pub fn merge_into_meta_alerts(groups: &[AlertGroup], params: &MergeParams) -> Result<Vec<MetaAlert>> {
    for (name, value) in [
        ("group threshold", params.group_threshold),
        ("alert threshold", params.alert_threshold),
    ] {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {value}")));
        }
    }

    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&i, &j| {
        groups[i]
            .start
            .total_cmp(&groups[j].start)
            .then_with(|| groups[i].scenario.cmp(&groups[j].scenario))
            .then_with(|| groups[i].end.total_cmp(&groups[j].end))
    });

    let mut metas: Vec<MetaAlert> = Vec::new();
    let mut representatives: Vec<AlertGroup> = Vec::new();
    for (processed, &gi) in order.iter().enumerate() {
        let group = &groups[gi];
        let group_ref = GroupRef {
            id: format!("g{processed}"),
            scenario: group.scenario.clone(),
            start: group.start,
            end: group.end,
            alert_count: group.len(),
        };
        let mut best: Option<(usize, f64)> = None;
        for (i, rep) in representatives.iter().enumerate() {
            let sim = group_similarity_weighted(group, rep, &params.weights);
            if best.is_none_or(|(_, b)| sim > b) {
                best = Some((i, sim));
            }
        }
        match best {
            Some((i, sim)) if sim >= params.group_threshold => {
                merge_group(&mut metas[i], group, group_ref, params.alert_threshold);
                representatives[i] = representative_group(&metas[i]);
            }
            _ => {
                let meta = meta_from_group(format!("m{}", metas.len()), group, group_ref);
                representatives.push(representative_group(&meta));
                metas.push(meta);
            }
        }
    }
    Ok(metas)
}

/// Total number of alert templates across all meta-alerts.
pub fn distinct_alert_count(metas: &[MetaAlert]) -> usize {
    metas.iter().map(|m| m.templates.len()).sum()
}

// ---------------------------------------------------------------------------
// Persistence and summary rendering
// ---------------------------------------------------------------------------

pub const META_STORE_FORMAT: &str = "meta-alert-store";
pub const META_STORE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct MetaHeader {
    format: String,
    version: u32,
}

pub fn write_meta_store(path: &Path, metas: &[MetaAlert]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let header = MetaHeader {
        format: META_STORE_FORMAT.to_string(),
        version: META_STORE_VERSION,
    };
    writeln!(out, "{}", serde_json::to_string(&header).expect("header serializes"))
        .map_err(|e| Error::io(path, e))?;
    for meta in metas {
        let line = serde_json::to_string(meta)
            .map_err(|e| Error::invalid(format!("unserializable meta-alert: {e}")))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_meta_store(path: &Path) -> Result<Vec<MetaAlert>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::invalid("meta-alert store is empty"))?
        .map_err(|e| Error::io(path, e))?;
    let header: MetaHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::invalid(format!("bad meta store header: {e}")))?;
    if header.format != META_STORE_FORMAT || header.version != META_STORE_VERSION {
        return Err(Error::invalid(format!(
            "unsupported meta store {}/{}",
            header.format, header.version
        )));
    }
    let mut metas = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        metas.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("bad meta store line: {e}")))?,
        );
    }
    Ok(metas)
}

fn truncated<T: std::fmt::Display>(items: impl Iterator<Item = T>, max: usize) -> String {
    let all: Vec<String> = items.map(|i| i.to_string()).collect();
    if all.len() <= max {
        all.join(", ")
    } else {
        format!("{}, … ({} more)", all[..max].join(", "), all.len() - max)
    }
}

/// Human-readable summary: each meta-alert with its member scenarios and
/// a truncated template list.
pub fn render_meta_summary(metas: &[MetaAlert]) -> String {
    let mut out = String::new();
    for meta in metas {
        let scenarios: BTreeSet<&str> =
            meta.members.iter().map(|m| m.scenario.as_str()).collect();
        out.push_str(&format!(
            "{}: {} templates, {} member groups from {}\n",
            meta.id,
            meta.templates.len(),
            meta.members.len(),
            truncated(scenarios.into_iter(), 8),
        ));
        let rendered = meta.templates.iter().map(|t| {
            format!("{}[{},{}]", t.detector, t.frequency_range.0, t.frequency_range.1)
        });
        out.push_str(&format!("  alerts: {}\n", truncated(rendered, 6)));
        let members = meta
            .members
            .iter()
            .map(|m| format!("{}({}, {} alerts)", m.id, m.scenario, m.alert_count));
        out.push_str(&format!("  groups: {}\n", truncated(members, 6)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alert(detector: &str, ts: f64, attrs: &[(&str, &str)]) -> Alert {
        Alert {
            id: format!("{detector}-{ts}"),
            timestamp: ts,
            ids: IdsSource::Wazuh,
            detector: DetectorId::from_rendered(detector).unwrap(),
            signature: "sig".into(),
            host: "h".into(),
            src_ip: None,
            dst_ip: None,
            src_port: None,
            dst_port: None,
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            raw: "{}".into(),
        }
    }

    fn group(scenario: &str, specs: &[(&str, f64)]) -> AlertGroup {
        let alerts = specs.iter().map(|&(d, ts)| alert(d, ts, &[])).collect();
        AlertGroup::from_alerts(scenario, alerts)
    }

    #[test]
    fn gap_grouping_examples() {
        let alerts: Vec<Alert> =
            [0.0, 1.5, 3.9, 10.0].iter().map(|&ts| alert("W-Acc-Att", ts, &[])).collect();
        let groups = group_by_gap(&alerts, "s1", 2.0).unwrap();
        let sizes: Vec<usize> = groups.iter().map(AlertGroup::len).collect();
        assert_eq!(sizes, [2, 1, 1]);
        assert_eq!(groups[0].start, 0.0);
        assert_eq!(groups[0].end, 1.5);

        // A gap of exactly the interval stays in the same group.
        let alerts: Vec<Alert> =
            [0.0, 2.0, 4.0].iter().map(|&ts| alert("W-Acc-Att", ts, &[])).collect();
        assert_eq!(group_by_gap(&alerts, "s1", 2.0).unwrap().len(), 1);

        let single = vec![alert("W-Acc-Att", 5.0, &[])];
        let groups = group_by_gap(&single, "s1", 2.0).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 1);

        let unsorted = vec![alert("W-Acc-Att", 5.0, &[]), alert("W-Acc-Att", 1.0, &[])];
        assert!(group_by_gap(&unsorted, "s1", 2.0).is_err());
    }

    #[test]
    fn gap_grouping_partitions_input() {
        let alerts: Vec<Alert> = (0..50)
            .map(|i| alert("W-Acc-Att", (i * i % 97) as f64, &[]))
            .collect();
        let mut sorted = alerts.clone();
        sorted.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
        let groups = group_by_gap(&sorted, "s1", 3.0).unwrap();
        let flattened: Vec<Alert> =
            groups.iter().flat_map(|g| g.alerts.iter().cloned()).collect();
        assert_eq!(flattened, sorted);
        for g in &groups {
            for pair in g.alerts.windows(2) {
                assert!(pair[1].timestamp - pair[0].timestamp <= 3.0);
            }
        }
    }

    #[test]
    fn alert_similarity_examples() {
        let a = alert("W-Acc-Att", 0.0, &[("k1", "v1"), ("k2", "v2")]);
        let b = alert("W-Acc-Att", 1.0, &[("k1", "v1"), ("k2", "v2")]);
        assert_eq!(alert_similarity(&a, &b), 1.0);

        let other = alert("W-Acc-400", 0.0, &[("k1", "v1")]);
        assert_eq!(alert_similarity(&a, &other), 0.0);

        let c = alert(
            "W-Acc-Att",
            0.0,
            &[("k1", "v1"), ("k2", "xx"), ("k3", "v3"), ("k4", "v4")],
        );
        let d = alert(
            "W-Acc-Att",
            0.0,
            &[("k1", "v1"), ("k2", "yy"), ("k3", "zz"), ("k4", "v4")],
        );
        assert_eq!(alert_similarity(&c, &d), 0.5);

        let no_shared = alert("W-Acc-Att", 0.0, &[("p", "1")]);
        let none = alert("W-Acc-Att", 0.0, &[("q", "2")]);
        assert_eq!(alert_similarity(&no_shared, &none), 1.0);
    }

    #[test]
    fn group_similarity_worked_example() {
        let g1 = group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-Att", 1.0), ("W-Acc-400", 2.0)]);
        let g2 = group("s2", &[("W-Acc-Att", 0.0), ("W-Acc-400", 1.0)]);
        // Jaccard 1.0, frequency (0.5 + 1)/2 = 0.75, LCS 2/3.
        let expected = 0.4 + 0.4 * 0.75 + 0.2 * (2.0 / 3.0);
        assert!((group_similarity(&g1, &g2) - expected).abs() < 1e-12);
        assert!((group_similarity(&g1, &g2) - group_similarity(&g2, &g1)).abs() < 1e-15);
    }

    #[test]
    fn group_similarity_bounds() {
        let g1 = group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-400", 1.0)]);
        assert_eq!(group_similarity(&g1, &g1), 1.0);
        let disjoint = group("s2", &[("S-Flw-Nmp", 0.0)]);
        assert_eq!(group_similarity(&g1, &disjoint), 0.0);
    }

    #[test]
    fn identical_groups_merge_into_one_meta() {
        let g1 = group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-Att", 1.0), ("W-Acc-400", 2.0)]);
        let g2 = group("s2", &[("W-Acc-Att", 10.0), ("W-Acc-Att", 11.0), ("W-Acc-400", 12.0)]);
        let metas = merge_into_meta_alerts(&[g1, g2], &MergeParams::default()).unwrap();
        assert_eq!(metas.len(), 1);
        assert_eq!(metas[0].id, "m0");
        assert_eq!(metas[0].members.len(), 2);
        for t in &metas[0].templates {
            assert_eq!(t.frequency_range.0, t.frequency_range.1);
        }
    }

    #[test]
    fn disjoint_groups_stay_separate() {
        let g1 = group("s1", &[("W-Acc-Att", 0.0)]);
        let g2 = group("s2", &[("S-Flw-Nmp", 5.0)]);
        let metas = merge_into_meta_alerts(&[g1, g2], &MergeParams::default()).unwrap();
        assert_eq!(metas.len(), 2);
        assert_eq!(metas[1].id, "m1");
    }

    #[test]
    fn thresholds_validated() {
        let g = group("s1", &[("W-Acc-Att", 0.0)]);
        let p = MergeParams { group_threshold: 1.5, ..MergeParams::default() };
        assert!(merge_into_meta_alerts(std::slice::from_ref(&g), &p).is_err());
        let p = MergeParams { alert_threshold: -0.1, ..MergeParams::default() };
        assert!(merge_into_meta_alerts(&[g], &p).is_err());
    }

    #[test]
    fn conflicting_attributes_wildcard_and_missing_keys_drop() {
        let g1 = AlertGroup::from_alerts(
            "s1",
            vec![alert("W-Acc-Att", 0.0, &[("url", "/a"), ("code", "400"), ("extra", "x")])],
        );
        let g2 = AlertGroup::from_alerts(
            "s2",
            vec![alert("W-Acc-Att", 5.0, &[("url", "/b"), ("code", "400")])],
        );
        let metas = merge_into_meta_alerts(&[g1, g2], &MergeParams::default()).unwrap();
        assert_eq!(metas.len(), 1);
        let t = &metas[0].templates[0];
        assert_eq!(t.attributes.get("url"), Some(&None)); // wildcard
        assert_eq!(t.attributes.get("code"), Some(&Some("400".to_string())));
        assert!(!t.attributes.contains_key("extra")); // dropped
        assert_eq!(t.frequency_range, (1, 1));
    }

    #[test]
    fn detector_support_is_conserved() {
        let groups = vec![
            group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-400", 1.0)]),
            group("s2", &[("W-Acc-Att", 10.0), ("S-Flw-Nmp", 11.0)]),
            group("s3", &[("A-Mon-Avg", 20.0)]),
        ];
        let metas = merge_into_meta_alerts(&groups, &MergeParams::default()).unwrap();
        let mut from_groups: BTreeSet<DetectorId> = BTreeSet::new();
        for g in &groups {
            from_groups.extend(g.detector_bag.keys().cloned());
        }
        let mut from_templates: BTreeSet<DetectorId> = BTreeSet::new();
        for m in &metas {
            from_templates.extend(m.templates.iter().map(|t| t.detector.clone()));
        }
        assert_eq!(from_groups, from_templates);
    }

    #[test]
    fn remerging_representatives_does_not_grow() {
        let groups = vec![
            group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-Att", 0.5), ("W-Acc-400", 1.0)]),
            group("s2", &[("W-Acc-Att", 10.0), ("W-Acc-400", 11.0)]),
            group("s3", &[("S-Flw-Nmp", 20.0), ("S-Smt-Wel", 20.5)]),
            group("s4", &[("A-Mon-Avg", 30.0)]),
        ];
        let params = MergeParams::default();
        let metas = merge_into_meta_alerts(&groups, &params).unwrap();
        let reps: Vec<AlertGroup> = metas.iter().map(representative_group).collect();
        let again = merge_into_meta_alerts(&reps, &params).unwrap();
        assert!(again.len() <= metas.len());
    }

    #[test]
    fn distinct_count_totals_templates() {
        assert_eq!(distinct_alert_count(&[]), 0);
        let g = group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-400", 1.0), ("S-Flw-Nmp", 2.0)]);
        let metas = merge_into_meta_alerts(&[g], &MergeParams::default()).unwrap();
        assert_eq!(distinct_alert_count(&metas), 3);
    }

    #[test]
    fn meta_store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("meta.ndjson");
        let g1 = group("s1", &[("W-Acc-Att", 0.0), ("W-Acc-400", 1.0)]);
        let g2 = group("s2", &[("W-Acc-Att", 9.0), ("W-Acc-400", 10.0)]);
        let metas = merge_into_meta_alerts(&[g1, g2], &MergeParams::default()).unwrap();
        write_meta_store(&path, &metas).unwrap();
        let read = read_meta_store(&path).unwrap();
        assert_eq!(read, metas);
        let summary = render_meta_summary(&read);
        assert!(summary.contains("m0"));
        assert!(summary.contains("s1"));
    }

    #[test]
    fn lcs_is_exact_on_small_sequences() {
        let a = ["x", "x", "y"];
        let b = ["x", "y"];
        assert_eq!(lcs_len(&a, &b), 2);
        assert_eq!(lcs_len(&a, &a), 3);
        let empty: [&str; 0] = [];
        assert_eq!(lcs_len(&a, &empty), 0);
    }
}
