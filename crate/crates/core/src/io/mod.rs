//! Configuration loading, dataset and checkpoint persistence, report files and
//! output-directory ownership.

pub mod config;
pub mod dataset;
pub mod report;

pub use crate::neural::checkpoint::{load as load_checkpoint, save as save_checkpoint};
pub use config::{load_config, resolve_config, valid_keys, write_resolved_config};
pub use dataset::{load_dataset, save_dataset};
pub use report::{emit_report, read_report_csv};

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const LOCK_FILE: &str = ".csiforge.lock";

/// Exclusive ownership of an output directory, released on drop.
#[derive(Debug)]
pub struct DirLock {
    path: PathBuf,
}

impl DirLock {
    /// Create `dir` if needed and take its lock file. Fails if another writer
    /// holds it; a stale lock left by a crash must be removed by hand.
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Config(format!(
                    "{} is locked by another run ({}); remove it if no run is active",
                    dir.display(),
                    path.display()
                ))
            } else {
                Error::Io(e)
            }
        })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self { path })
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}
