//! Snapshot persistence: the whole state as one JSON file, replaced
//! atomically after each write.

use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use consent_core::State;
use serde::{Deserialize, Serialize};

use crate::auth::Credentials;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: State,
    pub credentials: Credentials,
}

#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    write: Mutex<()>,
}

impl Store {
    pub fn open(data_dir: &Path) -> io::Result<Self> {
        std::fs::create_dir_all(data_dir)?;
        Ok(Store {
            path: data_dir.join("state.json"),
            write: Mutex::new(()),
        })
    }

    pub fn load(&self) -> io::Result<Option<Snapshot>> {
        match std::fs::read(&self.path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(io::Error::other),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Writes the snapshot produced by `take`. It is taken under the write
    /// lock so that a later snapshot is never overwritten by an earlier one.
    pub fn save(&self, take: impl FnOnce() -> Snapshot) -> io::Result<()> {
        let _guard = self.write.lock().expect("store lock");
        let tmp = self.path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(&take()).map_err(io::Error::other)?)?;
        std::fs::rename(&tmp, &self.path)
    }
}
