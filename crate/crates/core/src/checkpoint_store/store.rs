//! Directory-backed checkpoint store.
//!
//! Layout: `<root>/<id>.ckpt.json`, `<root>/LATEST`, `<root>/LOCK`. Records
//! and the `LATEST` pointer are published by write-to-temp, fsync, rename.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::record::{canonical_serialize, deserialize_addressed, CheckpointRecord};
use super::StoreError;

const SUFFIX: &str = ".ckpt.json";
const LATEST: &str = "LATEST";
const LOCK: &str = "LOCK";

/// Where an injected crash interrupts `put`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FaultPoint {
    /// Temp file written, record not yet renamed into place.
    BeforeRename,
    /// Record published, `LATEST` not yet updated.
    BeforeLatest,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    fault: Option<FaultPoint>,
}

fn io_err(context: &str, path: &Path) -> impl FnOnce(io::Error) -> StoreError {
    let what = format!("{context} {}", path.display());
    move |e| StoreError::StorageIO(format!("{what}: {e}"))
}

/// Exclusive advisory lock on `<root>/LOCK`, released on drop.
struct WriterLock(File);

impl Drop for WriterLock {
    fn drop(&mut self) {
        let _ = self.0.unlock();
    }
}

impl Store {
    /// Open (creating if needed) a store rooted at `root`.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err("creating", &root))?;
        Ok(Store { root, fault: None })
    }

    /// Open without creating; a missing directory reads as an empty store.
    pub fn open_existing(root: impl Into<PathBuf>) -> Self {
        Store {
            root: root.into(),
            fault: None,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Make the next `put` calls fail at `point` as if the process died.
    pub fn inject_fault(&mut self, point: Option<FaultPoint>) {
        self.fault = point;
    }

    fn record_path(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}{SUFFIX}"))
    }

    fn lock(&self) -> Result<WriterLock, StoreError> {
        let path = self.root.join(LOCK);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(io_err("opening", &path))?;
        file.lock().map_err(io_err("locking", &path))?;
        Ok(WriterLock(file))
    }

    fn write_atomic(&self, name: &str, bytes: &[u8], fault: bool) -> Result<(), StoreError> {
        let tmp = self.root.join(format!(".tmp-{name}"));
        let dest = self.root.join(name);
        {
            let mut f = File::create(&tmp).map_err(io_err("creating", &tmp))?;
            f.write_all(bytes).map_err(io_err("writing", &tmp))?;
            f.sync_all().map_err(io_err("syncing", &tmp))?;
        }
        if fault {
            return Err(StoreError::StorageIO(format!(
                "injected fault before publishing {name}"
            )));
        }
        fs::rename(&tmp, &dest).map_err(io_err("renaming into", &dest))?;
        if let Ok(dir) = File::open(&self.root) {
            let _ = dir.sync_all();
        }
        Ok(())
    }

    /// Publish a sealed record and point `LATEST` at it.
    pub fn put(&self, record: &CheckpointRecord) -> Result<String, StoreError> {
        if !record.is_sealed() {
            return Err(StoreError::SchemaError("record is not sealed".into()));
        }
        record.check_invariants()?;
        let _guard = self.lock()?;
        if let Some(parent) = &record.parent_id {
            match self.get(parent) {
                Ok(p) if p.program_digest == record.program_digest => {}
                Ok(_) => {
                    return Err(StoreError::ParentMissing(format!(
                        "{parent} belongs to a different program"
                    )))
                }
                Err(StoreError::NotFound(_)) => return Err(StoreError::ParentMissing(parent.clone())),
                Err(e) => return Err(e),
            }
        }
        let id = record.checkpoint_id.clone();
        let name = format!("{id}{SUFFIX}");
        self.write_atomic(
            &name,
            &canonical_serialize(record),
            self.fault == Some(FaultPoint::BeforeRename),
        )?;
        if self.fault == Some(FaultPoint::BeforeLatest) {
            return Err(StoreError::StorageIO("injected fault before updating LATEST".into()));
        }
        self.write_atomic(LATEST, format!("{id}\n").as_bytes(), false)?;
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<CheckpointRecord, StoreError> {
        let path = self.record_path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(io_err("reading", &path)(e)),
        };
        let record = deserialize_addressed(&bytes, id)?;
        Ok(record)
    }

    pub fn latest(&self) -> Result<Option<String>, StoreError> {
        let path = self.root.join(LATEST);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(Some(s.trim().to_string()).filter(|s| !s.is_empty())),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(io_err("reading", &path)(e)),
        }
    }

    /// Latest record, or `NotFound` on an empty store.
    pub fn latest_record(&self) -> Result<CheckpointRecord, StoreError> {
        match self.latest()? {
            Some(id) => self.get(&id),
            None => Err(StoreError::NotFound(format!(
                "no checkpoints in {}",
                self.root.display()
            ))),
        }
    }

    /// Ids from the chain root to `id`.
    pub fn lineage(&self, id: &str) -> Result<Vec<String>, StoreError> {
        let mut chain = vec![id.to_string()];
        let mut cur = self.get(id)?;
        while let Some(parent) = cur.parent_id.clone() {
            if chain.contains(&parent) {
                return Err(StoreError::SchemaError(format!("parent cycle through {parent}")));
            }
            cur = self.get(&parent).map_err(|e| match e {
                StoreError::NotFound(p) => StoreError::ParentMissing(p),
                e => e,
            })?;
            chain.push(parent);
        }
        chain.reverse();
        Ok(chain)
    }

    /// All published ids, sorted.
    pub fn list(&self) -> Result<Vec<String>, StoreError> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err("listing", &self.root)(e)),
        };
        let mut ids = Vec::new();
        for entry in entries {
            let entry = entry.map_err(io_err("listing", &self.root))?;
            if let Some(id) = entry.file_name().to_str().and_then(|n| n.strip_suffix(SUFFIX)) {
                if !id.starts_with('.') {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Size on disk of a published record.
    pub fn record_size(&self, id: &str) -> Result<u64, StoreError> {
        let path = self.record_path(id);
        fs::metadata(&path)
            .map(|m| m.len())
            .map_err(io_err("inspecting", &path))
    }
}
