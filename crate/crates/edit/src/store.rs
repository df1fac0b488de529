//! On-disk session checkpoints.
//!
//! Each session lives in `<data_dir>/<id>/` as the two input graphs, a small
//! metadata file and `log.jsonl`, which gets one line per applied action. A
//! restarted server rebuilds every session by replaying its log.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use roadtrace_core::graph_io::{read_graph, write_graph};

use crate::session::{LogEntry, Session};
use crate::EditError;

const BASE_FILE: &str = "base.graph";
const INFERRED_FILE: &str = "inferred.graph";
const META_FILE: &str = "session.json";
const LOG_FILE: &str = "log.jsonl";

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    id: String,
    merge_radius: f64,
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

fn store_err(path: &Path, e: impl std::fmt::Display) -> EditError {
    EditError::Store(format!("{}: {e}", path.display()))
}

impl Store {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Store, EditError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| store_err(&dir, e))?;
        Ok(Store { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn session_dir(&self, id: &str) -> PathBuf {
        self.dir.join(id)
    }

    /// Writes a new session's inputs and an empty log.
    ///
    /// Graphs are stored in the text format, so a session built from graphs
    /// that were themselves read from files reloads bit-for-bit.
    pub fn create(&self, s: &Session) -> Result<(), EditError> {
        let dir = self.session_dir(s.id());
        fs::create_dir_all(&dir).map_err(|e| store_err(&dir, e))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            fs::write(&p, text).map_err(|e| store_err(&p, e))
        };
        write(BASE_FILE, write_graph(s.base()))?;
        write(INFERRED_FILE, write_graph(s.inferred()))?;
        let meta = Meta {
            id: s.id().to_string(),
            merge_radius: s.merge_radius(),
        };
        write(META_FILE, serde_json::to_string(&meta).unwrap())?;
        write(LOG_FILE, String::new())?;
        for e in s.log() {
            self.append(s.id(), e)?;
        }
        Ok(())
    }

    /// Appends one action and flushes it to disk.
    pub fn append(&self, id: &str, entry: &LogEntry) -> Result<(), EditError> {
        let p = self.session_dir(id).join(LOG_FILE);
        let mut f = OpenOptions::new()
            .append(true)
            .open(&p)
            .map_err(|e| store_err(&p, e))?;
        let mut line = serde_json::to_string(entry).unwrap();
        line.push('\n');
        f.write_all(line.as_bytes()).map_err(|e| store_err(&p, e))?;
        f.sync_data().map_err(|e| store_err(&p, e))
    }

    /// Rebuilds one session from its directory.
    pub fn load(&self, id: &str) -> Result<Session, EditError> {
        let dir = self.session_dir(id);
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| store_err(&p, e))
        };
        let meta: Meta = serde_json::from_str(&read(META_FILE)?).map_err(|e| store_err(&dir, e))?;
        let base = read_graph(&read(BASE_FILE)?).map_err(|e| store_err(&dir.join(BASE_FILE), e))?;
        let inferred =
            read_graph(&read(INFERRED_FILE)?).map_err(|e| store_err(&dir.join(INFERRED_FILE), e))?;
        let log_path = dir.join(LOG_FILE);
        let mut log = Vec::new();
        for (i, line) in read(LOG_FILE)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogEntry = serde_json::from_str(line)
                .map_err(|e| store_err(&log_path, format!("line {}: {e}", i + 1)))?;
            log.push(entry);
        }
        Session::replay(meta.id, base, inferred, meta.merge_radius, &log)
    }

    /// Every session under the data directory, ordered by id.
    pub fn load_all(&self) -> Result<Vec<Session>, EditError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| store_err(&self.dir, e))? {
            let entry = entry.map_err(|e| store_err(&self.dir, e))?;
            if entry.path().join(META_FILE).is_file() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        ids.iter().map(|id| self.load(id)).collect()
    }
}
