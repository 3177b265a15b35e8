//! On-disk layout of the experiment store.
//!
//! ```text
//! <root>/sessions/<sid>/session.json
//! <root>/sessions/<sid>/manifest.jsonl        one line per accepted experiment
//! <root>/sessions/<sid>/state.json            reactor state after the last experiment
//! <root>/sessions/<sid>/experiments/<id>.json
//! <root>/sessions/<sid>/experiments/<id>.fields.tsv
//! ```
//!
//! The manifest is only ever appended to. Everything else is written to a
//! temporary file and renamed into place.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use alp_core::ReactorState;

use crate::record::{ExperimentRecord, SessionMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub experiment_id: u64,
    pub duration: f64,
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

fn invalid(e: serde_json::Error) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> io::Result<Option<T>> {
    match fs::read(path) {
        Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(invalid),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Store> {
        let root = root.into();
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn session_dir(&self, sid: &str) -> PathBuf {
        self.root.join("sessions").join(sid)
    }

    fn experiment_path(&self, sid: &str, id: u64, suffix: &str) -> PathBuf {
        self.session_dir(sid).join("experiments").join(format!("{id}{suffix}"))
    }

    pub fn create_session(&self, meta: &SessionMeta) -> io::Result<()> {
        let dir = self.session_dir(&meta.id);
        fs::create_dir_all(dir.join("experiments"))?;
        write_atomic(&dir.join("session.json"), &serde_json::to_vec_pretty(meta).map_err(invalid)?)?;
        OpenOptions::new().create(true).append(true).open(dir.join("manifest.jsonl"))?;
        Ok(())
    }

    pub fn append_manifest(&self, sid: &str, entry: &ManifestEntry) -> io::Result<()> {
        let mut f = OpenOptions::new()
            .append(true)
            .open(self.session_dir(sid).join("manifest.jsonl"))?;
        let mut line = serde_json::to_vec(entry).map_err(invalid)?;
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()
    }

    pub fn write_experiment(&self, record: &ExperimentRecord, fields: Option<&str>) -> io::Result<()> {
        if let Some(tsv) = fields {
            write_atomic(&self.experiment_path(&record.session, record.id, ".fields.tsv"), tsv.as_bytes())?;
        }
        let bytes = serde_json::to_vec(record).map_err(invalid)?;
        write_atomic(&self.experiment_path(&record.session, record.id, ".json"), &bytes)
    }

    pub fn read_experiment(&self, sid: &str, id: u64) -> io::Result<Option<ExperimentRecord>> {
        read_json(&self.experiment_path(sid, id, ".json"))
    }

    pub fn fields_path(&self, sid: &str, id: u64) -> PathBuf {
        self.experiment_path(sid, id, ".fields.tsv")
    }

    pub fn write_state(&self, sid: &str, state: &ReactorState) -> io::Result<()> {
        let bytes = serde_json::to_vec(state).map_err(invalid)?;
        write_atomic(&self.session_dir(sid).join("state.json"), &bytes)
    }

    pub fn read_state(&self, sid: &str) -> io::Result<Option<ReactorState>> {
        read_json(&self.session_dir(sid).join("state.json"))
    }

    pub fn read_meta(&self, sid: &str) -> io::Result<Option<SessionMeta>> {
        read_json(&self.session_dir(sid).join("session.json"))
    }

    pub fn read_manifest(&self, sid: &str) -> io::Result<Vec<ManifestEntry>> {
        let f = match File::open(self.session_dir(sid).join("manifest.jsonl")) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            // a torn final line from a crash is dropped
            match serde_json::from_str(&line) {
                Ok(entry) => out.push(entry),
                Err(_) => break,
            }
        }
        Ok(out)
    }

    /// Session ids present on disk, sorted.
    pub fn session_ids(&self) -> io::Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let entry = entry?;
            if entry.file_type()?.is_dir() {
                if let Some(name) = entry.file_name().to_str() {
                    ids.push(name.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }
}
