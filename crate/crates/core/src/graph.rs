//! Per-victim attack graphs: victim remapping, short-window
//! deduplication, stage mapping, episode construction, and deterministic
//! node merging on (stage, service set).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SignatureTable;
use crate::model::{Alert, DetectorId};
use crate::store::StoredAlert;

/// Maps detector ids to high-level attack stages; ids on the drop list
/// are excluded from episode construction. A mapping must cover the whole
/// taxonomy one way or the other (checked by [`StageMapping::validate_against`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageMapping {
    stages: BTreeMap<DetectorId, String>,
    drop: BTreeSet<DetectorId>,
}

static BUNDLED_STAGES: &str = include_str!("../resources/stage_mapping.json");

impl StageMapping {
    pub fn from_json(json: &str) -> Result<Self> {
        let mapping: StageMapping = serde_json::from_str(json)
            .map_err(|e| Error::config(format!("stage mapping: {e}")))?;
        for id in mapping.stages.keys().chain(mapping.drop.iter()) {
            DetectorId::from_rendered(id.as_str())?;
        }
        if let Some(dup) = mapping.stages.keys().find(|id| mapping.drop.contains(*id)) {
            return Err(Error::config(format!(
                "stage mapping: {dup} is both mapped and dropped"
            )));
        }
        Ok(mapping)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn bundled() -> &'static StageMapping {
        use std::sync::OnceLock;
        static MAPPING: OnceLock<StageMapping> = OnceLock::new();
        MAPPING.get_or_init(|| {
            StageMapping::from_json(BUNDLED_STAGES).expect("bundled stage mapping is valid")
        })
    }

    pub fn stage_of(&self, detector: &DetectorId) -> Option<&str> {
        self.stages.get(detector).map(String::as_str)
    }

    pub fn is_dropped(&self, detector: &DetectorId) -> bool {
        self.drop.contains(detector)
    }

    pub fn mapped_count(&self) -> usize {
        self.stages.len()
    }

    pub fn dropped_count(&self) -> usize {
        self.drop.len()
    }

    /// Every detector reachable through the table must be either mapped
    /// or explicitly dropped; anything else is a configuration error.
    pub fn validate_against(&self, table: &SignatureTable) -> Result<()> {
        let uncovered: Vec<String> = table
            .distinct_detectors()
            .into_iter()
            .filter(|d| !self.stages.contains_key(d) && !self.drop.contains(d))
            .map(|d| d.to_string())
            .collect();
        if uncovered.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "stage mapping leaves {} detector(s) unhandled: {}",
                uncovered.len(),
                uncovered.join(", ")
            )))
        }
    }
}

/// Per-scenario rewrites of victim addresses onto canonical ones.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct IpMap {
    scenarios: BTreeMap<String, BTreeMap<String, String>>,
}

impl IpMap {
    pub fn empty() -> Self {
        IpMap::default()
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::config(format!("ip map: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn canonical(&self, scenario: &str, addr: &str) -> Option<&str> {
        self.scenarios.get(scenario)?.get(addr).map(String::as_str)
    }
}

/// Rewrites src/dst addresses and any attribute value that equals a
/// mapped address; everything else passes through unchanged.
pub fn remap_victims(mut alerts: Vec<StoredAlert>, map: &IpMap) -> Vec<StoredAlert> {
    for sa in &mut alerts {
        let Some(table) = map.scenarios.get(&sa.scenario) else {
            continue;
        };
        let rewrite = |field: &mut Option<String>| {
            if let Some(addr) = field.as_ref() {
                if let Some(canon) = table.get(addr) {
                    *field = Some(canon.clone());
                }
            }
        };
        rewrite(&mut sa.alert.src_ip);
        rewrite(&mut sa.alert.dst_ip);
        for value in sa.alert.attributes.values_mut() {
            if let Some(canon) = table.get(value) {
                *value = canon.clone();
            }
        }
    }
    alerts
}

/// The component an alert is directed at: destination address when
/// present, otherwise the reporting host.
pub fn victim_of(alert: &Alert) -> &str {
    alert.dst_ip.as_deref().unwrap_or(&alert.host)
}

/// Drops repetitions: per (detector, victim, attacker) key an alert is
/// kept only when at least `window_seconds` passed since the last kept
/// alert of that key. Input must be time-sorted.
pub fn dedupe_window(alerts: &[StoredAlert], window_seconds: f64) -> Result<Vec<StoredAlert>> {
    if window_seconds < 0.0 || !window_seconds.is_finite() {
        return Err(Error::invalid("dedupe window must be non-negative"));
    }
    let mut last_kept: HashMap<(DetectorId, String, String), f64> = HashMap::new();
    let mut kept = Vec::new();
    let mut prev_ts = f64::NEG_INFINITY;
    for sa in alerts {
        let ts = sa.alert.timestamp;
        if ts < prev_ts {
            return Err(Error::invalid("alerts must be sorted by timestamp before dedupe"));
        }
        prev_ts = ts;
        let key = (
            sa.alert.detector.clone(),
            victim_of(&sa.alert).to_string(),
            sa.scenario.clone(),
        );
        match last_kept.get(&key) {
            Some(&last) if ts - last < window_seconds => {}
            _ => {
                last_kept.insert(key, ts);
                kept.push(sa.clone());
            }
        }
    }
    Ok(kept)
}

/// A contiguous run of same-stage alerts by one attacker against one
/// victim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub attacker: String,
    pub victim: String,
    pub stage: String,
    pub start: f64,
    pub end: f64,
    pub services: BTreeSet<u16>,
    pub alert_count: u64,
}

/// Segments stage-mapped alerts into episodes: per (attacker, victim),
/// consecutive alerts with the same stage and gaps of at most
/// `gap_seconds` merge; a stage change or a longer gap closes the
/// episode. Drop-listed and unmapped detectors are skipped.
pub fn build_episodes(
    alerts: &[StoredAlert],
    mapping: &StageMapping,
    gap_seconds: f64,
) -> Vec<Episode> {
    let mut streams: BTreeMap<(String, String), Vec<(&StoredAlert, &str)>> = BTreeMap::new();
    for sa in alerts {
        let Some(stage) = mapping.stage_of(&sa.alert.detector) else {
            continue;
        };
        let key = (sa.scenario.clone(), victim_of(&sa.alert).to_string());
        streams.entry(key).or_default().push((sa, stage));
    }

    let mut episodes = Vec::new();
    for ((attacker, victim), mut stream) in streams {
        stream.sort_by(|a, b| a.0.alert.timestamp.total_cmp(&b.0.alert.timestamp));
        let mut open: Option<Episode> = None;
        for (sa, stage) in stream {
            let ts = sa.alert.timestamp;
            let split = match &open {
                Some(e) => e.stage != stage || ts - e.end > gap_seconds,
                None => true,
            };
            if split {
                if let Some(e) = open.take() {
                    episodes.push(e);
                }
                open = Some(Episode {
                    attacker: attacker.clone(),
                    victim: victim.clone(),
                    stage: stage.to_string(),
                    start: ts,
                    end: ts,
                    services: BTreeSet::new(),
                    alert_count: 0,
                });
            }
            let e = open.as_mut().expect("episode is open");
            e.end = ts;
            e.alert_count += 1;
            if let Some(port) = sa.alert.dst_port {
                e.services.insert(port);
            }
        }
        episodes.extend(open);
    }
    episodes.sort_by(|a, b| {
        a.victim
            .cmp(&b.victim)
            .then_with(|| a.attacker.cmp(&b.attacker))
            .then_with(|| a.start.total_cmp(&b.start))
    });
    episodes
}

/// A graph node: one attack stage against a specific service set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphNode {
    pub stage: String,
    pub services: BTreeSet<u16>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphEdge {
    pub from: usize,
    pub to: usize,
    pub attacker: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackGraph {
    pub victim: String,
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    /// Indices of the last node in each attacker's chain.
    pub terminals: BTreeSet<usize>,
}

impl AttackGraph {
    pub fn attackers(&self) -> BTreeSet<&str> {
        self.edges.iter().map(|e| e.attacker.as_str()).collect()
    }
}

/// Builds the graph for one victim. Nodes are keyed on (stage, service
/// set), so identical steps across attackers merge while the same stage
/// against different ports stays distinct; per attacker, edges follow its
/// episodes in time order and the chain's last node is marked terminal.
pub fn build_graph(episodes: &[Episode], victim: &str) -> AttackGraph {
    let mut chains: BTreeMap<&str, Vec<&Episode>> = BTreeMap::new();
    for e in episodes.iter().filter(|e| e.victim == victim) {
        chains.entry(&e.attacker).or_default().push(e);
    }

    let mut keys: BTreeSet<GraphNode> = BTreeSet::new();
    for chain in chains.values() {
        for e in chain {
            keys.insert(GraphNode { stage: e.stage.clone(), services: e.services.clone() });
        }
    }
    let nodes: Vec<GraphNode> = keys.into_iter().collect();
    let index: BTreeMap<&GraphNode, usize> =
        nodes.iter().enumerate().map(|(i, n)| (n, i)).collect();

    let mut edges: BTreeSet<GraphEdge> = BTreeSet::new();
    let mut terminals = BTreeSet::new();
    for (attacker, mut chain) in chains {
        chain.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.end.total_cmp(&b.end)));
        let node_of = |e: &Episode| {
            index[&GraphNode { stage: e.stage.clone(), services: e.services.clone() }]
        };
        for pair in chain.windows(2) {
            edges.insert(GraphEdge {
                from: node_of(pair[0]),
                to: node_of(pair[1]),
                attacker: attacker.to_string(),
            });
        }
        if let Some(last) = chain.last() {
            terminals.insert(node_of(last));
        }
    }
    AttackGraph {
        victim: victim.to_string(),
        nodes,
        edges: edges.into_iter().collect(),
        terminals,
    }
}

/// One graph per victim present in the episode list.
pub fn build_graphs(episodes: &[Episode]) -> Vec<AttackGraph> {
    let victims: Vec<&str> = episodes
        .iter()
        .map(|e| e.victim.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        victims.par_iter().map(|v| build_graph(episodes, v)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        victims.iter().map(|v| build_graph(episodes, v)).collect()
    }
}

/// Sequential fallback of [`build_graphs`]; same output.
pub fn build_graphs_seq(episodes: &[Episode]) -> Vec<AttackGraph> {
    let victims: BTreeSet<&str> = episodes.iter().map(|e| e.victim.as_str()).collect();
    victims.into_iter().map(|v| build_graph(episodes, v)).collect()
}

const PALETTE: [(&str, &str); 8] = [
    ("fox", "#800000"),
    ("harrison", "#e75480"),
    ("russellmitchell", "#b8860b"),
    ("santos", "#8b4513"),
    ("shaw", "#6a0dad"),
    ("wardbeck", "#228b22"),
    ("wheeler", "#ff8c00"),
    ("wilson", "#1e90ff"),
];

/// Stable edge color per attacker: the eight published scenario names get
/// fixed colors, anything else hashes onto the same palette.
pub fn scenario_color(name: &str) -> &'static str {
    for (scenario, color) in PALETTE {
        if scenario == name {
            return color;
        }
    }
    let hash: u64 = name.bytes().fold(1469598103934665603u64, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(1099511628211)
    });
    PALETTE[(hash % 8) as usize].1
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn node_label(node: &GraphNode) -> String {
    let stage = node.stage.replace('_', " ");
    if node.services.is_empty() {
        stage
    } else {
        let ports: Vec<String> = node.services.iter().map(u16::to_string).collect();
        format!("{stage}\\n{}", ports.join(","))
    }
}

/// Deterministic DOT rendering: nodes then edges, both in index order,
/// attacker edges colored by [`scenario_color`], terminal nodes drawn
/// with doubled peripheries.
pub fn export_dot(graph: &AttackGraph) -> String {
    let mut out = String::new();
    out.push_str(&format!("digraph \"{}\" {{\n", dot_escape(&graph.victim)));
    out.push_str("  rankdir=TB;\n");
    out.push_str("  node [shape=box, style=rounded];\n");
    for (i, node) in graph.nodes.iter().enumerate() {
        let peripheries = if graph.terminals.contains(&i) { ", peripheries=2" } else { "" };
        out.push_str(&format!(
            "  n{i} [label=\"{}\"{peripheries}];\n",
            node_label(node)
        ));
    }
    for edge in &graph.edges {
        out.push_str(&format!(
            "  n{} -> n{} [label=\"{}\", color=\"{}\"];\n",
            edge.from,
            edge.to,
            dot_escape(&edge.attacker),
            scenario_color(&edge.attacker)
        ));
    }
    out.push_str("}\n");
    out
}

/// Victim index: one CSV row per graph with node/edge/attacker counts.
pub fn write_graph_index<W: Write>(out: W, graphs: &[AttackGraph]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["victim", "nodes", "edges", "attackers", "terminals"])
        .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    for g in graphs {
        w.write_record([
            g.victim.clone(),
            g.nodes.len().to_string(),
            g.edges.len().to_string(),
            g.attackers().len().to_string(),
            g.terminals.len().to_string(),
        ])
        .map_err(|e| Error::invalid(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
