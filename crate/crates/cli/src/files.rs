//! Reading and writing the JSON and CSV documents exchanged by the
//! subcommands.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stt_core::tube::{Tube, TubeRecord};

use crate::error::{CliError, CliResult};

/// Parses a JSON document, reporting the offending field path and position.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let value = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path.is_empty() || path == "." {
            CliError::usage(inner.to_string())
        } else {
            CliError::usage(format!("field `{path}`: {inner}"))
        }
    })?;
    Ok(value)
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    parse_json(&read_text(path)?).map_err(|e| e.context(path.display()))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::usage(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable document");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    write_text(path, &to_json(value))
}

/// Synthesized tubes of a scenario, one per mission segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TubeFile {
    pub scenario: String,
    pub segments: Vec<TubeRecord>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum TubeDocument {
    Mission(TubeFile),
    Single(TubeRecord),
}

impl TubeFile {
    /// Accepts either a segment list or a single bare tube record.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = read_text(path)?;
        let doc: TubeDocument = serde_json::from_str(&text)
            .map_err(|_| match parse_json::<TubeFile>(&text) {
                Err(e) => e.context(path.display()),
                Ok(_) => CliError::usage(format!("{}: not a tube document", path.display())),
            })?;
        let file = match doc {
            TubeDocument::Mission(f) => f,
            TubeDocument::Single(r) => TubeFile {
                scenario: String::new(),
                segments: vec![r],
            },
        };
        if file.segments.is_empty() {
            return Err(CliError::usage(format!("{}: tube document has no segments", path.display())));
        }
        Ok(file)
    }

    pub fn tubes(&self) -> CliResult<Vec<Tube>> {
        self.segments
            .iter()
            .enumerate()
            .map(|(k, r)| r.to_tube().map_err(|e| CliError::from(e).context(format!("segment {k}"))))
            .collect()
    }
}

/// One row of an exported trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub x1: f64,
    pub x2: f64,
    pub theta: f64,
    pub v: f64,
    pub omega: f64,
    pub e_d: f64,
    pub e_theta: f64,
    pub rho_d: f64,
    pub rho_theta: f64,
    pub in_tube: u8,
    pub clearance: f64,
}

pub fn parse_trace(text: &str) -> CliResult<Vec<TraceRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| CliError::usage(format!("row {}: {e}", i + 1))))
        .collect()
}

pub fn read_trace(path: &Path) -> CliResult<Vec<TraceRow>> {
    parse_trace(&read_text(path)?).map_err(|e| e.context(path.display()))
}
