//! Append-only JSON-lines event log, one file per session.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use crate::session::Event;

pub struct EventLog {
    dir: PathBuf,
}

impl EventLog {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    fn path(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    pub fn append(&self, session_id: &str, event: &Event) -> std::io::Result<()> {
        let mut f = OpenOptions::new().create(true).append(true).open(self.path(session_id))?;
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        f.write_all(&line)?;
        f.sync_data()
    }

    /// Writes the latest export next to the log, replacing any earlier one.
    pub fn snapshot(&self, session_id: &str, bundle: &[u8]) -> std::io::Result<()> {
        let tmp = self.dir.join(format!("{session_id}.export.json.tmp"));
        fs::write(&tmp, bundle)?;
        fs::rename(tmp, self.dir.join(format!("{session_id}.export.json")))
    }

    /// Every logged session as `(id, events)`, sorted by id.
    pub fn sessions(&self) -> std::io::Result<Vec<(String, Vec<Event>)>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir)? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            out.push((id.to_string(), read_events(&path)?));
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(out)
    }
}

/// Reads events up to the first line that does not parse; a torn final
/// write is dropped.
pub fn read_events(path: &Path) -> std::io::Result<Vec<Event>> {
    let mut events = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(e) => events.push(e),
            Err(err) => {
                tracing::warn!(path = %path.display(), %err, "stopping replay at unreadable event");
                break;
            }
        }
    }
    Ok(events)
}
