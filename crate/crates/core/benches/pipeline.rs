//! Parallel vs sequential throughput for the pipeline's hot loops.
//!
//! Requires the default `parallel` feature: each group benchmarks the
//! rayon-backed entry point against its sequential fallback on the same
//! synthetic corpus.

use std::collections::BTreeMap;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use alertchain::aggregation::{group_all, group_all_seq};
use alertchain::filtering::{filter_by_detection_score, filter_by_detection_score_seq};
use alertchain::graph::{build_episodes, build_graphs, build_graphs_seq, dedupe_window, StageMapping};
use alertchain::ingest::{parse_records, parse_records_seq, DialectManifest, SignatureTable};
use alertchain::model::{Alert, IdsSource};
use alertchain::scoring::{score_detectors, score_detectors_seq, ScenarioData};
use alertchain::synth::{generate, SynthCorpus, SynthSpec};

fn corpus() -> SynthCorpus {
    generate(&SynthSpec {
        scenarios: 4,
        detectors: 8,
        phases: 5,
        max_alerts_per_scenario: 40_000,
        attribute_keys: 3,
        seed: 99,
    })
}

fn wazuh_lines(n: usize) -> Vec<(u64, String)> {
    (0..n)
        .map(|i| {
            let line = format!(
                r#"{{"timestamp":{}.25,"rule":{{"description":"Common web attack.","id":"31106","level":{}}},"agent":{{"name":"intranet_server"}},"data":{{"srcip":"172.16.100.{}","url":"/wp-admin/{:04}"}}}}"#,
                1_642_000_000u64 + i as u64,
                i % 15,
                i % 250,
                i % 977,
            );
            (i as u64 + 1, line)
        })
        .collect()
}

fn bench_parse(c: &mut Criterion) {
    let lines = wazuh_lines(20_000);
    let table = SignatureTable::bundled();
    let manifest = DialectManifest::bundled();
    let mut g = c.benchmark_group("parse_records");
    g.throughput(Throughput::Elements(lines.len() as u64));
    g.bench_function("parallel", |b| {
        b.iter(|| parse_records(IdsSource::Wazuh, black_box(&lines), table, manifest))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| parse_records_seq(IdsSource::Wazuh, black_box(&lines), table, manifest))
    });
    g.finish();
}

fn bench_score(c: &mut Criterion) {
    let corpus = corpus();
    let data: Vec<ScenarioData<'_>> = corpus.scenario_data();
    let mut g = c.benchmark_group("score_detectors");
    g.throughput(Throughput::Elements(corpus.total_alerts() as u64));
    g.bench_function("parallel", |b| b.iter(|| score_detectors(black_box(&data))));
    g.bench_function("sequential", |b| b.iter(|| score_detectors_seq(black_box(&data))));
    g.finish();
}

fn bench_filter(c: &mut Criterion) {
    let corpus = corpus();
    let data: Vec<ScenarioData<'_>> = corpus.scenario_data();
    let rows = score_detectors(&data);
    let all: Vec<Alert> = corpus.alerts.values().flatten().cloned().collect();
    let mut g = c.benchmark_group("filter_by_detection_score");
    g.throughput(Throughput::Elements(all.len() as u64));
    g.bench_function("parallel", |b| {
        b.iter(|| filter_by_detection_score(black_box(&all), &rows, 0.7))
    });
    g.bench_function("sequential", |b| {
        b.iter(|| filter_by_detection_score_seq(black_box(&all), &rows, 0.7))
    });
    g.finish();
}

fn bench_group(c: &mut Criterion) {
    let corpus = corpus();
    let per_scenario: BTreeMap<String, Vec<Alert>> = corpus.alerts.clone();
    let mut g = c.benchmark_group("group_by_gap");
    g.throughput(Throughput::Elements(corpus.total_alerts() as u64));
    g.bench_function("parallel", |b| b.iter(|| group_all(black_box(&per_scenario), 2.0)));
    g.bench_function("sequential", |b| {
        b.iter(|| group_all_seq(black_box(&per_scenario), 2.0))
    });
    g.finish();
}

fn bench_graphs(c: &mut Criterion) {
    let corpus = corpus();
    let stored = corpus.stored_alerts();
    let deduped = dedupe_window(&stored, 2.0).unwrap();
    let episodes = build_episodes(&deduped, StageMapping::bundled(), 7_200.0);
    let mut g = c.benchmark_group("build_graphs");
    g.throughput(Throughput::Elements(episodes.len() as u64));
    g.bench_function("parallel", |b| b.iter(|| build_graphs(black_box(&episodes))));
    g.bench_function("sequential", |b| b.iter(|| build_graphs_seq(black_box(&episodes))));
    g.finish();
}

criterion_group!(benches, bench_parse, bench_score, bench_filter, bench_group, bench_graphs);
criterion_main!(benches);
