//! Parses the three IDS alert dialects from newline-delimited JSON into
//! normalized [`Alert`]s and maps raw signatures onto the bundled
//! detector taxonomy.
//!
//! Field extraction per dialect is data, not code: a [`DialectManifest`]
//! names the JSON paths holding timestamp, signature, host, addresses,
//! ports, and extra attributes, so corrections against a published corpus
//! need no rebuild. The [`SignatureTable`] likewise ships as a resource
//! with one entry per taxonomy signature.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, ParseError, ParseErrorKind, Result};
use crate::labels::parse_iso8601;
use crate::model::{Alert, DetectorId, IdsSource};

/// Lines parsed per batch when scanning a file.
const CHUNK_LINES: usize = 4096;

/// One raw record read from a dialect file.
#[derive(Debug, Clone)]
pub struct DialectRecord<'a> {
    pub dialect: IdsSource,
    pub line_number: u64,
    pub text: &'a str,
}

// ---------------------------------------------------------------------------
// Signature table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum MatchRule {
    #[default]
    Exact,
    Prefix,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignatureEntry {
    pub ids: IdsSource,
    #[serde(rename = "match", default)]
    pub rule: MatchRule,
    pub signature: String,
    pub detector: DetectorId,
}

#[derive(Debug, Deserialize)]
struct SignatureTableFile {
    entries: Vec<SignatureEntry>,
}

/// Ordered signature-to-detector mapping; lookup returns the first entry
/// (in declaration order) whose pattern matches.
#[derive(Debug)]
pub struct SignatureTable {
    entries: Vec<SignatureEntry>,
    /// Entry indices per dialect, in declaration order.
    by_ids: BTreeMap<IdsSource, Vec<usize>>,
    /// Exact-lookup fast path, present for dialects without prefix rules.
    exact: BTreeMap<IdsSource, HashMap<String, usize>>,
}

static BUNDLED_TABLE: &str = include_str!("../resources/signature_table.json");

impl SignatureTable {
    pub fn from_entries(entries: Vec<SignatureEntry>) -> Result<Self> {
        let mut by_ids: BTreeMap<IdsSource, Vec<usize>> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.signature.is_empty() {
                return Err(Error::config("signature table: empty pattern"));
            }
            DetectorId::from_rendered(e.detector.as_str())?;
            by_ids.entry(e.ids).or_default().push(i);
        }
        let mut exact = BTreeMap::new();
        for (&ids, idxs) in &by_ids {
            if idxs.iter().all(|&i| entries[i].rule == MatchRule::Exact) {
                let mut map = HashMap::with_capacity(idxs.len());
                for &i in idxs {
                    map.entry(entries[i].signature.clone()).or_insert(i);
                }
                exact.insert(ids, map);
            }
        }
        Ok(SignatureTable { entries, by_ids, exact })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: SignatureTableFile = serde_json::from_str(json)
            .map_err(|e| Error::config(format!("signature table: {e}")))?;
        Self::from_entries(file.entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// The taxonomy shipped with the crate.
    pub fn bundled() -> &'static SignatureTable {
        use std::sync::OnceLock;
        static TABLE: OnceLock<SignatureTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            SignatureTable::from_json(BUNDLED_TABLE).expect("bundled signature table is valid")
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[SignatureEntry] {
        &self.entries
    }

    pub fn entry_count(&self, ids: IdsSource) -> usize {
        self.by_ids.get(&ids).map_or(0, Vec::len)
    }

    /// All detector abbreviations reachable through the table.
    pub fn distinct_detectors(&self) -> BTreeSet<DetectorId> {
        self.entries.iter().map(|e| e.detector.clone()).collect()
    }

    pub fn contains_detector(&self, detector: &DetectorId) -> bool {
        self.entries.iter().any(|e| &e.detector == detector)
    }

    /// First matching entry's detector, or `unknown`.
    pub fn map(&self, ids: IdsSource, signature: &str) -> DetectorId {
        if let Some(map) = self.exact.get(&ids) {
            if let Some(&i) = map.get(signature) {
                return self.entries[i].detector.clone();
            }
            return DetectorId::unknown();
        }
        if let Some(idxs) = self.by_ids.get(&ids) {
            for &i in idxs {
                let e = &self.entries[i];
                let hit = match e.rule {
                    MatchRule::Exact => e.signature == signature,
                    MatchRule::Prefix => signature.starts_with(&e.signature),
                };
                if hit {
                    return e.detector.clone();
                }
            }
        }
        DetectorId::unknown()
    }
}

/// Maps a raw signature to its detector abbreviation (`unknown` if the
/// table has no matching entry).
pub fn map_signature(ids: IdsSource, signature: &str, table: &SignatureTable) -> DetectorId {
    table.map(ids, signature)
}

// ---------------------------------------------------------------------------
// Dialect manifest
// ---------------------------------------------------------------------------

type JsonPath = Vec<String>;

#[derive(Debug, Clone, Deserialize)]
pub struct SignatureSpec {
    pub parts: Vec<JsonPath>,
    #[serde(default = "default_join")]
    pub join: String,
}

fn default_join() -> String {
    " ".to_string()
}

/// Where to find each normalized field inside one dialect's records.
#[derive(Debug, Clone, Deserialize)]
pub struct FieldSpec {
    pub timestamp: Vec<JsonPath>,
    pub signature: SignatureSpec,
    #[serde(default)]
    pub host: Vec<JsonPath>,
    #[serde(default)]
    pub src_ip: Vec<JsonPath>,
    #[serde(default)]
    pub dst_ip: Vec<JsonPath>,
    #[serde(default)]
    pub src_port: Vec<JsonPath>,
    #[serde(default)]
    pub dst_port: Vec<JsonPath>,
    #[serde(default)]
    pub attributes: BTreeMap<String, JsonPath>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DialectManifest {
    pub wazuh: FieldSpec,
    pub suricata: FieldSpec,
    pub aminer: FieldSpec,
}

static BUNDLED_MANIFEST: &str = include_str!("../resources/dialect_manifest.json");

impl DialectManifest {
    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::config(format!("dialect manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn bundled() -> &'static DialectManifest {
        use std::sync::OnceLock;
        static MANIFEST: OnceLock<DialectManifest> = OnceLock::new();
        MANIFEST.get_or_init(|| {
            DialectManifest::from_json(BUNDLED_MANIFEST)
                .expect("bundled dialect manifest is valid")
        })
    }

    pub fn dialect(&self, ids: IdsSource) -> &FieldSpec {
        match ids {
            IdsSource::Wazuh => &self.wazuh,
            IdsSource::Suricata => &self.suricata,
            IdsSource::Aminer => &self.aminer,
        }
    }
}

fn lookup<'v>(value: &'v Value, path: &[String]) -> Option<&'v Value> {
    let mut cur = value;
    for key in path {
        cur = cur.get(key)?;
    }
    Some(cur)
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().filter_map(scalar_string).collect();
            if parts.is_empty() {
                None
            } else {
                Some(parts.join(","))
            }
        }
        _ => None,
    }
}

fn timestamp_value(value: &Value) -> Option<std::result::Result<f64, String>> {
    match value {
        Value::Number(n) => n.as_f64().map(Ok),
        Value::String(s) => Some(
            s.parse::<f64>()
                .map_err(|_| ())
                .or_else(|_| parse_iso8601(s).map_err(|_| ()))
                .map_err(|_| s.clone()),
        ),
        Value::Array(items) => items.first().and_then(timestamp_value),
        _ => None,
    }
}

fn port_value(value: &Value) -> Option<u16> {
    match value {
        Value::Number(n) => n.as_u64().and_then(|v| u16::try_from(v).ok()),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

/// Parses one raw record into a normalized alert. The id is provisional
/// (`dialect:line`); [`parse_file`] replaces it with the stable
/// `scenario/ids/host#line` form.
pub fn parse_record(
    rec: &DialectRecord<'_>,
    table: &SignatureTable,
    manifest: &DialectManifest,
) -> std::result::Result<Alert, ParseError> {
    let err = |kind| ParseError { dialect: rec.dialect, line: rec.line_number, kind };
    let value: Value = serde_json::from_str(rec.text)
        .map_err(|e| err(ParseErrorKind::Json(e.to_string())))?;
    let spec = manifest.dialect(rec.dialect);

    let mut timestamp = None;
    for path in &spec.timestamp {
        if let Some(v) = lookup(&value, path) {
            match timestamp_value(v) {
                Some(Ok(ts)) => {
                    timestamp = Some(ts);
                    break;
                }
                Some(Err(text)) => return Err(err(ParseErrorKind::BadTimestamp(text))),
                None => {}
            }
        }
    }
    let timestamp = timestamp.ok_or_else(|| err(ParseErrorKind::MissingTimestamp))?;
    if !timestamp.is_finite() {
        return Err(err(ParseErrorKind::BadTimestamp(timestamp.to_string())));
    }

    let parts: Vec<String> = spec
        .signature
        .parts
        .iter()
        .filter_map(|p| lookup(&value, p).and_then(scalar_string))
        .filter(|s| !s.is_empty())
        .collect();
    if parts.is_empty() {
        return Err(err(ParseErrorKind::MissingSignature));
    }
    let signature = parts.join(&spec.signature.join);

    let first_string = |paths: &[JsonPath]| {
        paths.iter().find_map(|p| lookup(&value, p).and_then(scalar_string))
    };
    let first_port =
        |paths: &[JsonPath]| paths.iter().find_map(|p| lookup(&value, p).and_then(port_value));

    let host = first_string(&spec.host).unwrap_or_default();
    let mut attributes = BTreeMap::new();
    for (name, path) in &spec.attributes {
        if let Some(v) = lookup(&value, path).and_then(scalar_string) {
            attributes.insert(name.clone(), v);
        }
    }

    let detector = table.map(rec.dialect, &signature);
    Ok(Alert {
        id: format!("{}:{}", rec.dialect, rec.line_number),
        timestamp,
        ids: rec.dialect,
        detector,
        signature,
        host,
        src_ip: first_string(&spec.src_ip),
        dst_ip: first_string(&spec.dst_ip),
        src_port: first_port(&spec.src_port),
        dst_port: first_port(&spec.dst_port),
        attributes,
        raw: rec.text.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Directory ingestion
// ---------------------------------------------------------------------------

/// Per-dialect ingestion counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectStats {
    pub records: u64,
    pub parse_errors: u64,
    pub unknown_signatures: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub wazuh: DialectStats,
    pub suricata: DialectStats,
    pub aminer: DialectStats,
}

impl IngestStats {
    pub fn dialect_mut(&mut self, ids: IdsSource) -> &mut DialectStats {
        match ids {
            IdsSource::Wazuh => &mut self.wazuh,
            IdsSource::Suricata => &mut self.suricata,
            IdsSource::Aminer => &mut self.aminer,
        }
    }

    pub fn dialect(&self, ids: IdsSource) -> &DialectStats {
        match ids {
            IdsSource::Wazuh => &self.wazuh,
            IdsSource::Suricata => &self.suricata,
            IdsSource::Aminer => &self.aminer,
        }
    }

    pub fn alerts(&self) -> u64 {
        IdsSource::ALL
            .iter()
            .map(|&ids| {
                let d = self.dialect(ids);
                d.records - d.parse_errors
            })
            .sum()
    }

    pub fn parse_errors(&self) -> u64 {
        IdsSource::ALL.iter().map(|&ids| self.dialect(ids).parse_errors).sum()
    }

    pub fn unknown_signatures(&self) -> u64 {
        IdsSource::ALL.iter().map(|&ids| self.dialect(ids).unknown_signatures).sum()
    }

    pub fn merge(&mut self, other: &IngestStats) {
        for ids in IdsSource::ALL {
            let d = self.dialect_mut(ids);
            let o = other.dialect(ids);
            d.records += o.records;
            d.parse_errors += o.parse_errors;
            d.unknown_signatures += o.unknown_signatures;
        }
    }
}

/// One alert file in the `scenario/<ids>/<host>` layout.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub dialect: IdsSource,
    /// Component name, from the file name (compression suffix stripped).
    pub host: String,
    /// Path relative to the scenario directory, `/`-separated.
    pub rel: String,
    pub path: PathBuf,
}

/// Enumerates a scenario's alert files in lexicographic order of their
/// relative paths. Directory entries that are not one of the three
/// dialects are skipped.
pub fn scan_scenario(root: &Path, scenario: &str) -> Result<Vec<ScenarioFile>> {
    let dir = root.join(scenario);
    let mut files = Vec::new();
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(&dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        let Ok(dialect) = name.parse::<IdsSource>() else {
            continue;
        };
        let sub = entry.path();
        if !sub.is_dir() {
            continue;
        }
        for host_entry in fs::read_dir(&sub).map_err(|e| Error::io(&sub, e))? {
            let host_entry = host_entry.map_err(|e| Error::io(&sub, e))?;
            let path = host_entry.path();
            if !path.is_file() {
                continue;
            }
            let file_name = host_entry.file_name().to_string_lossy().into_owned();
            let host = file_name.strip_suffix(".gz").unwrap_or(&file_name).to_string();
            files.push(ScenarioFile {
                dialect,
                host,
                rel: format!("{name}/{file_name}"),
                path,
            });
        }
    }
    files.sort_by(|a, b| a.rel.cmp(&b.rel));
    Ok(files)
}

fn open_record_stream(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    let reader: Box<dyn Read> =
        if is_gz { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    Ok(Box::new(BufReader::with_capacity(1 << 16, reader)))
}

/// Parses a batch of (line number, text) records, preserving input order.
pub fn parse_records(
    dialect: IdsSource,
    chunk: &[(u64, String)],
    table: &SignatureTable,
    manifest: &DialectManifest,
) -> Vec<std::result::Result<Alert, ParseError>> {
    let parse = |(line_number, text): &(u64, String)| {
        parse_record(
            &DialectRecord { dialect, line_number: *line_number, text },
            table,
            manifest,
        )
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        chunk.par_iter().map(parse).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        chunk.iter().map(parse).collect()
    }
}

/// Sequential fallback of [`parse_records`]; same output.
pub fn parse_records_seq(
    dialect: IdsSource,
    chunk: &[(u64, String)],
    table: &SignatureTable,
    manifest: &DialectManifest,
) -> Vec<std::result::Result<Alert, ParseError>> {
    chunk
        .iter()
        .map(|(line_number, text)| {
            parse_record(
                &DialectRecord { dialect, line_number: *line_number, text },
                table,
                manifest,
            )
        })
        .collect()
}

/// Streams one file through the parser in bounded-size batches, invoking
/// `on_alert` in line order. Bad lines are counted and logged, never fatal;
/// an unreadable file or a failing sink is a hard error.
pub fn parse_file(
    file: &ScenarioFile,
    scenario: &str,
    table: &SignatureTable,
    manifest: &DialectManifest,
    stats: &mut IngestStats,
    mut on_alert: impl FnMut(Alert) -> Result<()>,
) -> Result<()> {
    let reader = open_record_stream(&file.path)?;
    let mut chunk: Vec<(u64, String)> = Vec::with_capacity(CHUNK_LINES);
    let mut line_number = 0u64;

    let mut flush = |chunk: &mut Vec<(u64, String)>, stats: &mut IngestStats| -> Result<()> {
        let results = parse_records(file.dialect, chunk, table, manifest);
        for ((line_no, _), result) in chunk.iter().zip(results) {
            let d = stats.dialect_mut(file.dialect);
            d.records += 1;
            match result {
                Ok(mut alert) => {
                    alert.id = format!("{scenario}/{}#{line_no}", file.rel);
                    if alert.host.is_empty() {
                        alert.host = file.host.clone();
                    }
                    if alert.detector.is_unknown() {
                        d.unknown_signatures += 1;
                    }
                    on_alert(alert)?;
                }
                Err(e) => {
                    d.parse_errors += 1;
                    log::warn!("{scenario}/{}: skipped record: {e}", file.rel);
                }
            }
        }
        chunk.clear();
        Ok(())
    };

    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(&file.path, e))?;
        line_number += 1;
        if line.trim().is_empty() {
            continue;
        }
        chunk.push((line_number, line));
        if chunk.len() >= CHUNK_LINES {
            flush(&mut chunk, stats)?;
        }
    }
    flush(&mut chunk, stats)
}

/// Loads every alert of one scenario into memory, in deterministic order
/// (files lexicographic, lines in file order).
pub fn load_scenario(
    root: &Path,
    scenario: &str,
    table: &SignatureTable,
    manifest: &DialectManifest,
) -> Result<(Vec<Alert>, IngestStats)> {
    let mut alerts = Vec::new();
    let mut stats = IngestStats::default();
    for file in scan_scenario(root, scenario)? {
        parse_file(&file, scenario, table, manifest, &mut stats, |a| {
            alerts.push(a);
            Ok(())
        })?;
    }
    Ok((alerts, stats))
}

/// Per-scenario, per-dialect alert counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialectCounts {
    pub wazuh: u64,
    pub suricata: u64,
    pub aminer: u64,
}

impl DialectCounts {
    pub fn add(&mut self, ids: IdsSource) {
        match ids {
            IdsSource::Wazuh => self.wazuh += 1,
            IdsSource::Suricata => self.suricata += 1,
            IdsSource::Aminer => self.aminer += 1,
        }
    }

    pub fn get(&self, ids: IdsSource) -> u64 {
        match ids {
            IdsSource::Wazuh => self.wazuh,
            IdsSource::Suricata => self.suricata,
            IdsSource::Aminer => self.aminer,
        }
    }

    pub fn total(&self) -> u64 {
        self.wazuh + self.suricata + self.aminer
    }
}

/// Exact counts grouped by scenario and dialect.
pub fn count_by_scenario<'a>(
    items: impl IntoIterator<Item = (&'a str, IdsSource)>,
) -> BTreeMap<String, DialectCounts> {
    let mut out: BTreeMap<String, DialectCounts> = BTreeMap::new();
    for (scenario, ids) in items {
        out.entry(scenario.to_string()).or_default().add(ids);
    }
    out
}
