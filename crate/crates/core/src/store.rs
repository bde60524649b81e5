//! Persisted alert stores: newline-delimited JSON, one alert per line,
//! preceded by a versioned header line. Each line carries the scenario of
//! origin alongside the alert so stages downstream of ingestion stay
//! self-contained.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Alert;

pub const STORE_FORMAT: &str = "alert-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct StoreHeader {
    format: String,
    version: u32,
}

/// An alert tagged with the scenario it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredAlert {
    pub scenario: String,
    #[serde(flatten)]
    pub alert: Alert,
}

pub struct StoreWriter<W: Write> {
    out: W,
}

impl<W: Write> StoreWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        let header =
            StoreHeader { format: STORE_FORMAT.to_string(), version: STORE_VERSION };
        let line = serde_json::to_string(&header).expect("header serializes");
        writeln!(out, "{line}").map_err(|e| Error::io("<store>", e))?;
        Ok(StoreWriter { out })
    }

    pub fn write(&mut self, alert: &StoredAlert) -> Result<()> {
        let line = serde_json::to_string(alert)
            .map_err(|e| Error::invalid(format!("unserializable alert: {e}")))?;
        writeln!(self.out, "{line}").map_err(|e| Error::io("<store>", e))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush().map_err(|e| Error::io("<store>", e))?;
        Ok(self.out)
    }
}

/// Line-by-line reader; validates the header eagerly.
pub struct StoreReader<R: BufRead> {
    lines: std::io::Lines<R>,
}

impl<R: BufRead> StoreReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header_line = match lines.next() {
            Some(Ok(line)) => line,
            Some(Err(e)) => return Err(Error::io("<store>", e)),
            None => return Err(Error::invalid("alert store is empty (missing header)")),
        };
        let header: StoreHeader = serde_json::from_str(&header_line)
            .map_err(|e| Error::invalid(format!("bad store header: {e}")))?;
        if header.format != STORE_FORMAT || header.version != STORE_VERSION {
            return Err(Error::invalid(format!(
                "unsupported store {}/{} (expected {STORE_FORMAT}/{STORE_VERSION})",
                header.format, header.version
            )));
        }
        Ok(StoreReader { lines })
    }
}

impl<R: BufRead> Iterator for StoreReader<R> {
    type Item = Result<StoredAlert>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.lines.next()? {
                Ok(line) => {
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(
                        serde_json::from_str(&line)
                            .map_err(|e| Error::invalid(format!("bad store line: {e}"))),
                    );
                }
                Err(e) => return Some(Err(Error::io("<store>", e))),
            }
        }
    }
}

pub fn open_store(path: &Path) -> Result<StoreReader<BufReader<File>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    StoreReader::new(BufReader::new(file))
}

pub fn read_store(path: &Path) -> Result<Vec<StoredAlert>> {
    open_store(path)?.collect()
}

pub fn create_store(path: &Path) -> Result<StoreWriter<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    StoreWriter::new(BufWriter::new(file))
}

pub fn write_store<'a>(
    path: &Path,
    alerts: impl IntoIterator<Item = &'a StoredAlert>,
) -> Result<()> {
    let mut writer = create_store(path)?;
    for alert in alerts {
        writer.write(alert)?;
    }
    writer.finish()?;
    Ok(())
}

/// Splits a store into per-scenario alert lists, preserving order.
pub fn group_by_scenario(alerts: Vec<StoredAlert>) -> BTreeMap<String, Vec<Alert>> {
    let mut out: BTreeMap<String, Vec<Alert>> = BTreeMap::new();
    for sa in alerts {
        out.entry(sa.scenario).or_default().push(sa.alert);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DetectorId, IdsSource};
    use std::io::Cursor;

    fn alert(ts: f64) -> StoredAlert {
        StoredAlert {
            scenario: "s1".into(),
            alert: Alert {
                id: format!("s1/wazuh/h#{}", ts as u64),
                timestamp: ts,
                ids: IdsSource::Wazuh,
                detector: DetectorId::from_rendered("W-Acc-Att").unwrap(),
                signature: "Common web attack.".into(),
                host: "intranet_server".into(),
                src_ip: Some("10.0.0.1".into()),
                dst_ip: None,
                src_port: None,
                dst_port: Some(80),
                attributes: [("rule_id".to_string(), "31106".to_string())].into(),
                raw: r#"{"some":"json"}"#.into(),
            },
        }
    }

    #[test]
    fn round_trip_preserves_alerts() {
        let alerts = vec![alert(1.0), alert(2.5)];
        let mut writer = StoreWriter::new(Vec::new()).unwrap();
        for a in &alerts {
            writer.write(a).unwrap();
        }
        let bytes = writer.finish().unwrap();
        let read: Vec<StoredAlert> = StoreReader::new(Cursor::new(bytes))
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(read, alerts);
    }

    #[test]
    fn header_is_checked() {
        let bad = b"{\"format\":\"alert-store\",\"version\":99}\n".to_vec();
        assert!(StoreReader::new(Cursor::new(bad)).is_err());
        let garbage = b"hello\n".to_vec();
        assert!(StoreReader::new(Cursor::new(garbage)).is_err());
        assert!(StoreReader::new(Cursor::new(Vec::new())).is_err());
    }

    #[test]
    fn groups_by_scenario_in_order() {
        let mut b = alert(9.0);
        b.scenario = "s0".into();
        let grouped = group_by_scenario(vec![alert(1.0), b, alert(2.0)]);
        let scenarios: Vec<&String> = grouped.keys().collect();
        assert_eq!(scenarios, ["s0", "s1"]);
        assert_eq!(grouped["s1"].len(), 2);
        assert!(grouped["s1"][0].timestamp < grouped["s1"][1].timestamp);
    }
}
