//! The six pipeline subcommands. Every stage reads its input from the
//! previous stage's persisted artifact and writes its own, so a run can
//! resume at any point and each stage is testable in isolation.

use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::Path;

use alertchain::aggregation::{
    distinct_alert_count, group_all, merge_into_meta_alerts, render_meta_summary,
    write_meta_store, MergeParams,
};
use alertchain::filtering::{
    passes_score, render_filter_table, write_filter_csv, FilterReport, ScenarioFilterRow,
    ScoreLookup,
};
use alertchain::graph::{
    build_episodes, build_graphs, dedupe_window, export_dot, remap_victims, write_graph_index,
    IpMap, StageMapping,
};
use alertchain::ingest::{
    parse_file, scan_scenario, DialectCounts, DialectManifest, IngestStats, SignatureTable,
};
use alertchain::labels::load_labels;
use alertchain::model::{assign_phase, ScenarioLabels};
use alertchain::render::fmt_pct;
use alertchain::scoring::{
    rank_detectors, rate_table, score_detectors, write_rates_csv, write_scores_csv, ScenarioData,
    ScoreRow,
};
use alertchain::store::{create_store, group_by_scenario, open_store, read_store, StoredAlert};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::CliError;

pub const ALERT_STORE: &str = "alerts.ndjson";
pub const INGEST_STATS: &str = "ingest_stats.json";
pub const SCORES_CSV: &str = "scores.csv";
pub const SCORES_JSON: &str = "scores.json";
pub const RATES_CSV: &str = "rates.csv";
pub const FILTERED_STORE: &str = "filtered.ndjson";
pub const FILTER_REPORT_CSV: &str = "filter_report.csv";
pub const FILTER_REPORT_TXT: &str = "filter_report.txt";
pub const META_STORE: &str = "meta_alerts.ndjson";
pub const META_SUMMARY: &str = "meta_summary.txt";
pub const GRAPH_DIR: &str = "graphs";
pub const GRAPH_INDEX: &str = "index.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

fn table(config: &PipelineConfig) -> Result<&'static SignatureTable, CliError> {
    match &config.signatures {
        Some(path) => {
            let table = SignatureTable::load(path).map_err(CliError::from_config)?;
            Ok(Box::leak(Box::new(table)))
        }
        None => Ok(SignatureTable::bundled()),
    }
}

fn manifest(config: &PipelineConfig) -> Result<&'static DialectManifest, CliError> {
    match &config.dialect_manifest {
        Some(path) => {
            let manifest = DialectManifest::load(path).map_err(CliError::from_config)?;
            Ok(Box::leak(Box::new(manifest)))
        }
        None => Ok(DialectManifest::bundled()),
    }
}

fn labels_map(config: &PipelineConfig) -> Result<BTreeMap<String, ScenarioLabels>, CliError> {
    let path = config
        .labels
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs a scenario label file (--labels)"))?;
    let labels =
        load_labels(path, config.test_window_duration).map_err(CliError::from_config)?;
    Ok(labels.into_iter().map(|l| (l.name.clone(), l)).collect())
}

fn read_scores(out: &Path) -> Result<Vec<ScoreRow>, CliError> {
    let path = out.join(SCORES_JSON);
    let text = fs::read_to_string(&path).map_err(|e| {
        CliError::processing(format!("{}: {e} (run `score` first)", path.display()))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::processing(format!("{}: {e}", path.display())))
}

fn read_filtered(out: &Path) -> Result<Vec<StoredAlert>, CliError> {
    let path = out.join(FILTERED_STORE);
    if !path.exists() {
        return Err(CliError::processing(format!(
            "{} missing (run `filter` first)",
            path.display()
        )));
    }
    read_store(&path).map_err(CliError::from_processing)
}

fn ensure_out(config: &PipelineConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.out)
        .map_err(|e| CliError::processing(format!("{}: {e}", config.out.display())))
}

#[derive(Debug, Serialize, Deserialize)]
struct NormalizeSummary {
    alerts: u64,
    parse_errors: u64,
    unknown_signatures: u64,
    dialects: IngestStats,
    scenarios: BTreeMap<String, DialectCounts>,
}

fn scenario_dirs(root: &Path) -> Result<Vec<String>, CliError> {
    let entries = fs::read_dir(root)
        .map_err(|e| CliError::ingest(format!("{}: {e}", root.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::ingest(format!("{}: {e}", root.display())))?;
        if entry.path().is_dir() {
            names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if names.is_empty() {
        return Err(CliError::ingest(format!(
            "{}: no scenario directories found",
            root.display()
        )));
    }
    names.sort();
    Ok(names)
}

pub fn normalize(config: &PipelineConfig) -> Result<(), CliError> {
    let table = table(config)?;
    let manifest = manifest(config)?;
    let scenarios = scenario_dirs(&config.root)?;
    ensure_out(config)?;

    let store_path = config.out.join(ALERT_STORE);
    let mut writer = create_store(&store_path).map_err(CliError::from_processing)?;
    let mut stats = IngestStats::default();
    let mut per_scenario: BTreeMap<String, DialectCounts> = BTreeMap::new();
    for scenario in &scenarios {
        let counts = per_scenario.entry(scenario.clone()).or_default();
        for file in scan_scenario(&config.root, scenario).map_err(CliError::from_ingest)? {
            parse_file(&file, scenario, table, manifest, &mut stats, |alert| {
                counts.add(alert.ids);
                writer.write(&StoredAlert { scenario: scenario.clone(), alert })
            })
            .map_err(CliError::from_ingest)?;
        }
        log::info!("{scenario}: {} alerts", counts.total());
    }
    writer.finish().map_err(CliError::from_processing)?;

    let summary = NormalizeSummary {
        alerts: stats.alerts(),
        parse_errors: stats.parse_errors(),
        unknown_signatures: stats.unknown_signatures(),
        dialects: stats,
        scenarios: per_scenario,
    };
    let stats_path = config.out.join(INGEST_STATS);
    fs::write(&stats_path, serde_json::to_string_pretty(&summary).expect("serializes"))
        .map_err(|e| CliError::processing(format!("{}: {e}", stats_path.display())))?;
    println!(
        "normalized {} alerts from {} scenario(s) ({} parse errors, {} unknown signatures) -> {}",
        summary.alerts,
        summary.scenarios.len(),
        summary.parse_errors,
        summary.unknown_signatures,
        store_path.display()
    );
    Ok(())
}

/// Scenario slices in label order; every scenario present in the store
/// must be labeled, and labeled-but-silent scenarios still count toward
/// the per-phase denominators.
fn scored_data<'a>(
    labels: &'a BTreeMap<String, ScenarioLabels>,
    by_scenario: &'a BTreeMap<String, Vec<alertchain::Alert>>,
) -> Result<Vec<ScenarioData<'a>>, CliError> {
    for name in by_scenario.keys() {
        if !labels.contains_key(name) {
            return Err(CliError::config(format!(
                "scenario {name} appears in the store but not in the label file"
            )));
        }
    }
    Ok(labels
        .values()
        .map(|l| ScenarioData {
            labels: l,
            alerts: by_scenario.get(&l.name).map_or(&[][..], Vec::as_slice),
        })
        .collect())
}

pub fn score(config: &PipelineConfig) -> Result<(), CliError> {
    let store_path = config.out.join(ALERT_STORE);
    if !store_path.exists() {
        return Err(CliError::processing(format!(
            "{} missing (run `normalize` first)",
            store_path.display()
        )));
    }
    let stored = read_store(&store_path).map_err(CliError::from_processing)?;
    let by_scenario = group_by_scenario(stored);
    let labels = labels_map(config)?;
    let data = scored_data(&labels, &by_scenario)?;

    let rows = score_detectors(&data);
    let ranked = rank_detectors(&rows);

    let scores_csv = fs::File::create(config.out.join(SCORES_CSV))
        .map_err(|e| CliError::processing(e.to_string()))?;
    write_scores_csv(scores_csv, &ranked).map_err(CliError::from_processing)?;
    let rates_csv = fs::File::create(config.out.join(RATES_CSV))
        .map_err(|e| CliError::processing(e.to_string()))?;
    write_rates_csv(rates_csv, &rate_table(&data)).map_err(CliError::from_processing)?;
    fs::write(
        config.out.join(SCORES_JSON),
        serde_json::to_string_pretty(&rows).expect("serializes"),
    )
    .map_err(|e| CliError::processing(e.to_string()))?;

    let above = ranked
        .iter()
        .filter(|r| r.detection_score > config.score_threshold)
        .count();
    println!(
        "scored {} detector(s); {} ranked, {} above threshold {}",
        rows.len(),
        ranked.len(),
        above,
        config.score_threshold
    );
    Ok(())
}

pub fn filter(config: &PipelineConfig) -> Result<(), CliError> {
    let rows = read_scores(&config.out)?;
    let labels = labels_map(config)?;
    let lookup = ScoreLookup::from_rows(&rows);

    let store_path = config.out.join(ALERT_STORE);
    let reader = open_store(&store_path).map_err(|e| {
        CliError::processing(format!("{e} (run `normalize` first)"))
    })?;
    let mut writer =
        create_store(&config.out.join(FILTERED_STORE)).map_err(CliError::from_processing)?;

    let mut counts: BTreeMap<String, ScenarioFilterRow> = BTreeMap::new();
    for item in reader {
        let sa = item.map_err(CliError::from_processing)?;
        let Some(scenario_labels) = labels.get(&sa.scenario) else {
            return Err(CliError::config(format!(
                "scenario {} appears in the store but not in the label file",
                sa.scenario
            )));
        };
        let row = counts.entry(sa.scenario.clone()).or_insert_with(|| ScenarioFilterRow {
            scenario: sa.scenario.clone(),
            total: 0,
            prioritized: 0,
            in_phases: 0,
            combined: 0,
        });
        row.total += 1;
        let scored = passes_score(&sa.alert, &lookup, config.score_threshold);
        let phased = assign_phase(&sa.alert, scenario_labels).is_some();
        row.prioritized += u64::from(scored);
        row.in_phases += u64::from(phased);
        if scored && phased {
            row.combined += 1;
            writer.write(&sa).map_err(CliError::from_processing)?;
        }
    }
    writer.finish().map_err(CliError::from_processing)?;

    let report = FilterReport::from_rows(counts.into_values().collect());
    let csv = fs::File::create(config.out.join(FILTER_REPORT_CSV))
        .map_err(|e| CliError::processing(e.to_string()))?;
    write_filter_csv(csv, &report).map_err(CliError::from_processing)?;
    let text = render_filter_table(&report);
    fs::write(config.out.join(FILTER_REPORT_TXT), &text)
        .map_err(|e| CliError::processing(e.to_string()))?;
    print!("{text}");
    println!("combined filter: avg reduction {}%", fmt_pct(report.avg_combined_pct));
    Ok(())
}

pub fn aggregate(config: &PipelineConfig) -> Result<(), CliError> {
    let filtered = read_filtered(&config.out)?;
    let mut by_scenario = group_by_scenario(filtered);
    for alerts in by_scenario.values_mut() {
        alerts.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    }
    let groups =
        group_all(&by_scenario, config.interval_time).map_err(CliError::from_processing)?;
    let params = MergeParams {
        group_threshold: config.group_threshold,
        alert_threshold: config.alert_threshold,
        ..MergeParams::default()
    };
    let metas = merge_into_meta_alerts(&groups, &params).map_err(CliError::from_processing)?;

    write_meta_store(&config.out.join(META_STORE), &metas).map_err(CliError::from_processing)?;
    let summary = render_meta_summary(&metas);
    fs::write(config.out.join(META_SUMMARY), &summary)
        .map_err(|e| CliError::processing(e.to_string()))?;
    println!(
        "aggregated {} group(s) into {} meta-alert(s) with {} template(s)",
        groups.len(),
        metas.len(),
        distinct_alert_count(&metas)
    );
    Ok(())
}

fn victim_file_name(victim: &str) -> String {
    let safe: String = victim
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect();
    format!("{safe}.dot")
}

pub fn graph(config: &PipelineConfig) -> Result<(), CliError> {
    let table = table(config)?;
    let mapping = match &config.stage_mapping {
        Some(path) => {
            let m = StageMapping::load(path).map_err(CliError::from_config)?;
            &*Box::leak(Box::new(m))
        }
        None => StageMapping::bundled(),
    };
    mapping.validate_against(table).map_err(CliError::from_config)?;
    let ip_map = match &config.ip_map {
        Some(path) => IpMap::load(path).map_err(CliError::from_config)?,
        None => IpMap::empty(),
    };

    let mut alerts = remap_victims(read_filtered(&config.out)?, &ip_map);
    alerts.sort_by(|a, b| {
        a.alert
            .timestamp
            .total_cmp(&b.alert.timestamp)
            .then_with(|| a.scenario.cmp(&b.scenario))
            .then_with(|| a.alert.id.cmp(&b.alert.id))
    });
    let deduped =
        dedupe_window(&alerts, config.dedupe_window).map_err(CliError::from_processing)?;
    let episodes = build_episodes(&deduped, mapping, config.episode_gap);
    let graphs = build_graphs(&episodes);

    let dir = config.out.join(GRAPH_DIR);
    fs::create_dir_all(&dir).map_err(|e| CliError::processing(e.to_string()))?;
    for g in &graphs {
        let path = dir.join(victim_file_name(&g.victim));
        fs::write(&path, export_dot(g))
            .map_err(|e| CliError::processing(format!("{}: {e}", path.display())))?;
    }
    let index = fs::File::create(dir.join(GRAPH_INDEX))
        .map_err(|e| CliError::processing(e.to_string()))?;
    write_graph_index(index, &graphs).map_err(CliError::from_processing)?;

    let nodes: usize = graphs.iter().map(|g| g.nodes.len()).sum();
    let edges: usize = graphs.iter().map(|g| g.edges.len()).sum();
    println!(
        "kept {} of {} alert(s) after dedupe; {} episode(s), {} victim graph(s) ({} nodes, {} edges) -> {}",
        deduped.len(),
        alerts.len(),
        episodes.len(),
        graphs.len(),
        nodes,
        edges,
        dir.display()
    );
    Ok(())
}

#[derive(Default)]
struct ScenarioSummary {
    normalized: u64,
    filtered: u64,
}

fn count_store(path: &Path, into: &mut BTreeMap<String, ScenarioSummary>, filtered: bool) {
    let Ok(reader) = open_store(path) else {
        return;
    };
    for sa in reader.flatten() {
        let entry = into.entry(sa.scenario).or_default();
        if filtered {
            entry.filtered += 1;
        } else {
            entry.normalized += 1;
        }
    }
}

pub fn report(config: &PipelineConfig) -> Result<(), CliError> {
    ensure_out(config)?;
    let mut scenarios: BTreeMap<String, ScenarioSummary> = BTreeMap::new();
    count_store(&config.out.join(ALERT_STORE), &mut scenarios, false);
    count_store(&config.out.join(FILTERED_STORE), &mut scenarios, true);

    let scores: Vec<ScoreRow> = fs::read_to_string(config.out.join(SCORES_JSON))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let ranked = rank_detectors(&scores).len();
    let above = scores
        .iter()
        .filter(|r| r.detection_score > config.score_threshold)
        .count();
    let metas = alertchain::aggregation::read_meta_store(&config.out.join(META_STORE))
        .unwrap_or_default();
    let (graph_count, graph_nodes, graph_edges) =
        read_graph_index(&config.out.join(GRAPH_DIR).join(GRAPH_INDEX));

    let mut csv = String::from("scenario,normalized,filtered,reduction_pct\n");
    let mut text = String::from("pipeline summary\n");
    text.push_str(&format!("  scenarios: {}\n", scenarios.len()));
    let mut reductions = Vec::new();
    for (name, s) in &scenarios {
        let pct = if s.normalized > 0 {
            let p = (1.0 - s.filtered as f64 / s.normalized as f64) * 100.0;
            reductions.push(p);
            fmt_pct(p)
        } else {
            String::new()
        };
        csv.push_str(&format!("{name},{},{},{pct}\n", s.normalized, s.filtered));
        text.push_str(&format!(
            "  {name}: {} normalized, {} after filtering{}\n",
            s.normalized,
            s.filtered,
            if pct.is_empty() { String::new() } else { format!(" ({pct}% reduction)") }
        ));
    }
    if !reductions.is_empty() {
        let avg = reductions.iter().sum::<f64>() / reductions.len() as f64;
        text.push_str(&format!("  avg reduction rate: {}%\n", fmt_pct(avg)));
    }
    text.push_str(&format!(
        "  detectors: {} scored, {} ranked, {} above threshold {}\n",
        scores.len(),
        ranked,
        above,
        config.score_threshold
    ));
    text.push_str(&format!(
        "  meta-alerts: {} with {} template(s)\n",
        metas.len(),
        distinct_alert_count(&metas)
    ));
    text.push_str(&format!(
        "  attack graphs: {} victim(s), {} node(s), {} edge(s)\n",
        graph_count, graph_nodes, graph_edges
    ));

    fs::write(config.out.join(SUMMARY_CSV), &csv)
        .map_err(|e| CliError::processing(e.to_string()))?;
    fs::write(config.out.join(SUMMARY_TXT), &text)
        .map_err(|e| CliError::processing(e.to_string()))?;
    print!("{text}");
    Ok(())
}

fn read_graph_index(path: &Path) -> (u64, u64, u64) {
    let Ok(file) = fs::File::open(path) else {
        return (0, 0, 0);
    };
    let mut graphs = 0;
    let mut nodes = 0;
    let mut edges = 0;
    for line in std::io::BufReader::new(file).lines().skip(1).map_while(Result::ok) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() >= 3 {
            graphs += 1;
            nodes += cells[1].parse::<u64>().unwrap_or(0);
            edges += cells[2].parse::<u64>().unwrap_or(0);
        }
    }
    (graphs, nodes, edges)
}
