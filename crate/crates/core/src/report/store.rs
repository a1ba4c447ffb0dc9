//! Append-only run store: one JSON record per run, a SHA-256 sidecar, a
//! timing sidecar and an index of stored ids.
//!
//! ```text
//! <root>/runs/<id>.json
//! <root>/runs/<id>.json.sha256
//! <root>/runs/<id>.timing.json
//! <root>/cases/<id>.json
//! <root>/index.jsonl
//! ```

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contingency::{Classification, ScreeningReport};
use crate::error::{Error, Result};
use crate::ga::{GAResult, StageTrace};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable naming the store root.
pub const DATA_DIR_ENV: &str = "GRIDSHED_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeRun {
    pub out_lines: Vec<usize>,
    pub mode: String,
    pub result: GAResult,
    pub stages: Option<Vec<StageTrace>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunPayload {
    Optimize(OptimizeRun),
    Screening(ScreeningReport),
}

impl RunPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            RunPayload::Optimize(_) => "optimize",
            RunPayload::Screening(_) => "screening",
        }
    }
}

/// Wall-clock data, stored beside the record so that records of identical
/// runs are byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTiming {
    pub created_unix_ms: u64,
    pub elapsed_s: f64,
    pub case_elapsed_s: Vec<f64>,
    /// Search time of each screened case that ran one.
    #[serde(default)]
    pub search_elapsed_s: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub run_id: String,
    pub case_id: String,
    /// Echo of the request that produced the run, seed included.
    pub config: serde_json::Value,
    pub payload: RunPayload,
    #[serde(skip)]
    pub timing: RunTiming,
}

impl RunRecord {
    pub fn new(case_id: &str, config: &impl Serialize, payload: RunPayload) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let run_id = run_id(payload.kind(), case_id, &config);
        let timing = RunTiming {
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_millis() as u64),
            elapsed_s: match &payload {
                RunPayload::Optimize(o) => o.result.elapsed_s,
                RunPayload::Screening(s) => s.runtime_s,
            },
            case_elapsed_s: match &payload {
                RunPayload::Optimize(_) => Vec::new(),
                RunPayload::Screening(s) => s.cases.iter().map(|c| c.elapsed_s).collect(),
            },
            search_elapsed_s: match &payload {
                RunPayload::Optimize(_) => Vec::new(),
                RunPayload::Screening(s) => s
                    .cases
                    .iter()
                    .map(|c| c.classification.result().map(|r| r.elapsed_s))
                    .collect(),
            },
        };
        Ok(RunRecord {
            schema_version: SCHEMA_VERSION,
            run_id,
            case_id: case_id.to_string(),
            config,
            payload,
            timing,
        })
    }

    fn restore_timing(&mut self) {
        match &mut self.payload {
            RunPayload::Optimize(o) => o.result.elapsed_s = self.timing.elapsed_s,
            RunPayload::Screening(s) => {
                s.runtime_s = self.timing.elapsed_s;
                for (c, t) in s.cases.iter_mut().zip(&self.timing.case_elapsed_s) {
                    c.elapsed_s = *t;
                }
                for (c, t) in s.cases.iter_mut().zip(&self.timing.search_elapsed_s) {
                    let result = match &mut c.classification {
                        Classification::NoInstability => None,
                        Classification::SolutionFound(r) => Some(r),
                        Classification::Infeasible(e) => e.best.as_mut(),
                    };
                    if let (Some(r), Some(t)) = (result, t) {
                        r.elapsed_s = *t;
                    }
                }
            }
        }
    }

    /// Serialized record body, the bytes written to disk.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of `(kind, case id, config)`; the seed is part of the config.
pub fn run_id(kind: &str, case_id: &str, config: &serde_json::Value) -> String {
    let digest = Sha256::new()
        .chain_update(kind.as_bytes())
        .chain_update([0])
        .chain_update(case_id.as_bytes())
        .chain_update([0])
        .chain_update(config.to_string().as_bytes())
        .finalize();
    hex::encode(&digest[..16])
}

/// Content address of a case document.
pub fn case_id(canonical: &str) -> String {
    hex::encode(&Sha256::digest(canonical.as_bytes())[..16])
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_hexdigit())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub run_id: String,
    pub kind: String,
    pub case_id: String,
    pub created_unix_ms: u64,
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

impl RunStore {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join("runs"))?;
        fs::create_dir_all(root.join("cases"))?;
        Ok(RunStore { root })
    }

    /// Opens the store named by `GRIDSHED_DATA_DIR`, or `./gridshed-data`.
    pub fn from_env() -> Result<Self> {
        let root = std::env::var_os(DATA_DIR_ENV).map_or_else(|| PathBuf::from("gridshed-data"), PathBuf::from);
        Self::open(root)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn run_path(&self, id: &str, suffix: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}{suffix}"))
    }

    fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    /// Writes a record once. Storing an identical record again is a no-op;
    /// different content under an existing id is an error.
    pub fn store_run(&self, record: &RunRecord) -> Result<()> {
        let body = record.to_bytes()?;
        let path = self.run_path(&record.run_id, ".json");
        if path.exists() {
            return if fs::read(&path)? == body {
                Ok(())
            } else {
                Err(Error::AlreadyStored(record.run_id.clone()))
            };
        }
        Self::write_atomic(&self.run_path(&record.run_id, ".timing.json"), &serde_json::to_vec(&record.timing)?)?;
        Self::write_atomic(&self.run_path(&record.run_id, ".json.sha256"), sha256_hex(&body).as_bytes())?;
        Self::write_atomic(&path, &body)?;

        let entry = IndexEntry {
            run_id: record.run_id.clone(),
            kind: record.payload.kind().to_string(),
            case_id: record.case_id.clone(),
            created_unix_ms: record.timing.created_unix_ms,
        };
        let mut line = serde_json::to_vec(&entry)?;
        line.push(b'\n');
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.root.join("index.jsonl"))?
            .write_all(&line)?;
        Ok(())
    }

    pub fn contains(&self, id: &str) -> bool {
        valid_id(id) && self.run_path(id, ".json").exists()
    }

    /// Raw record bytes after checksum verification.
    pub fn record_bytes(&self, id: &str) -> Result<Vec<u8>> {
        if !valid_id(id) {
            return Err(Error::NotFound(id.to_string()));
        }
        let body = match fs::read(self.run_path(id, ".json")) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let expected = fs::read_to_string(self.run_path(id, ".json.sha256"))
            .map_err(|_| Error::Checksum(id.to_string()))?;
        if expected.trim() != sha256_hex(&body) {
            return Err(Error::Checksum(id.to_string()));
        }
        Ok(body)
    }

    pub fn load_run(&self, id: &str) -> Result<RunRecord> {
        let body = self.record_bytes(id)?;
        let mut record: RunRecord = serde_json::from_slice(&body).map_err(|_| Error::Checksum(id.to_string()))?;
        if let Ok(t) = fs::read(self.run_path(id, ".timing.json")) {
            record.timing = serde_json::from_slice(&t)?;
            record.restore_timing();
        }
        Ok(record)
    }

    /// Index entries in insertion order.
    pub fn list(&self) -> Result<Vec<IndexEntry>> {
        let text = match fs::read_to_string(self.root.join("index.jsonl")) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(Error::from))
            .collect()
    }

    /// Stores a canonical case document under its content address.
    pub fn store_case(&self, canonical: &str) -> Result<String> {
        let id = case_id(canonical);
        let path = self.root.join("cases").join(format!("{id}.json"));
        if !path.exists() {
            Self::write_atomic(&path, canonical.as_bytes())?;
        }
        Ok(id)
    }

    pub fn load_case(&self, id: &str) -> Result<String> {
        if !valid_id(id) {
            return Err(Error::NotFound(id.to_string()));
        }
        match fs::read_to_string(self.root.join("cases").join(format!("{id}.json"))) {
            Ok(t) => Ok(t),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::NotFound(id.to_string())),
            Err(e) => Err(e.into()),
        }
    }
}
