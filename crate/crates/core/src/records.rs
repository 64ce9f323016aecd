//! Line-delimited record files. Writers append one complete JSON record
//! per line and flush after each, so interrupted runs leave only whole
//! records behind. An optional header line carries the effective
//! configuration that produced the file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// First line of an output file: what produced it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHeader {
    pub record: String, // always "header"
    pub tool: String,
    pub config: std::collections::BTreeMap<String, String>,
}

impl FileHeader {
    pub fn new(tool: &str, config: std::collections::BTreeMap<String, String>) -> FileHeader {
        FileHeader { record: "header".into(), tool: tool.into(), config }
    }
}

pub struct JsonlWriter {
    out: BufWriter<File>,
}

impl JsonlWriter {
    pub fn create(path: &Path, header: Option<&FileHeader>) -> std::io::Result<JsonlWriter> {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                std::fs::create_dir_all(dir)?;
            }
        }
        let mut writer = JsonlWriter { out: BufWriter::new(File::create(path)?) };
        if let Some(header) = header {
            writer.append(header)?;
        }
        Ok(writer)
    }

    /// Writes one record and flushes: the line is either fully on disk or
    /// not there at all.
    pub fn append<T: Serialize>(&mut self, record: &T) -> std::io::Result<()> {
        let line = serde_json::to_string(record)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        self.out.write_all(line.as_bytes())?;
        self.out.write_all(b"\n")?;
        self.out.flush()
    }
}

/// Reads every non-header record from a line-delimited file.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> std::io::Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() || is_header(&line) {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        out.push(record);
    }
    Ok(out)
}

/// Reads the header line, if the file has one.
pub fn read_header(path: &Path) -> std::io::Result<Option<FileHeader>> {
    let reader = BufReader::new(File::open(path)?);
    if let Some(first) = reader.lines().next() {
        let first = first?;
        if is_header(&first) {
            return Ok(serde_json::from_str(&first).ok());
        }
    }
    Ok(None)
}

fn is_header(line: &str) -> bool {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("record").and_then(|r| r.as_str()).map(|r| r == "header"))
        .unwrap_or(false)
}
