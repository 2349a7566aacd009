use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use offense_core::{fingerprint, hex_hash};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Result;

/// A file written under a temporary name and renamed into place by
/// [`Staged::commit`]. Dropped without committing, the temporary is removed.
pub struct Staged {
    target: PathBuf,
    tmp: PathBuf,
    writer: Option<BufWriter<File>>,
}

impl Staged {
    pub fn create(target: &Path) -> Result<Self> {
        if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut name = target.file_name().unwrap_or_default().to_os_string();
        name.push(".partial");
        let tmp = target.with_file_name(name);
        let writer = BufWriter::new(File::create(&tmp)?);
        Ok(Self {
            target: target.to_path_buf(),
            tmp,
            writer: Some(writer),
        })
    }

    pub fn writer(&mut self) -> &mut BufWriter<File> {
        self.writer.as_mut().expect("writer open until commit")
    }

    pub fn target(&self) -> &Path {
        &self.target
    }

    pub fn commit(mut self) -> Result<PathBuf> {
        let mut w = self.writer.take().expect("writer open until commit");
        w.flush()?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        std::fs::rename(&self.tmp, &self.target)?;
        Ok(self.target.clone())
    }
}

impl Drop for Staged {
    fn drop(&mut self) {
        if self.writer.take().is_some() {
            let _ = std::fs::remove_file(&self.tmp);
        }
    }
}

/// Writes `bytes` to `target` through a [`Staged`] file.
pub fn write_file(target: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let mut s = Staged::create(target)?;
    s.writer().write_all(bytes)?;
    s.commit()
}

pub fn write_json<T: Serialize>(target: &Path, value: &T) -> Result<PathBuf> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(target, &bytes)
}

pub fn hash_file(path: &Path) -> Result<String> {
    Ok(hex_hash(fingerprint(&std::fs::read(path)?)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config: Value,
    /// Path to content hash.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

impl StageRecord {
    pub fn new<C: Serialize>(config: &C) -> Result<Self> {
        Ok(Self {
            config: serde_json::to_value(config)?,
            ..Self::default()
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.outputs.insert(path.display().to_string(), hash_file(path)?);
        Ok(())
    }
}

/// Per-stage records kept in `<out_dir>/manifest.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl RunManifest {
    pub fn load(out_dir: &Path) -> Result<Self> {
        let p = out_dir.join(MANIFEST_FILE);
        if !p.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_slice(&std::fs::read(p)?)?)
    }

    /// Replaces the stage's record and rewrites the manifest.
    pub fn record(out_dir: &Path, stage: &str, rec: StageRecord) -> Result<()> {
        let mut m = Self::load(out_dir)?;
        m.stages.insert(stage.to_string(), rec);
        write_json(&out_dir.join(MANIFEST_FILE), &m)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uncommitted_files_disappear() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("a.txt");
        {
            let mut s = Staged::create(&target).unwrap();
            s.writer().write_all(b"half").unwrap();
        }
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
        let mut s = Staged::create(&target).unwrap();
        s.writer().write_all(b"whole").unwrap();
        s.commit().unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"whole");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn manifest_accumulates_stages() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("x");
        std::fs::write(&f, b"1").unwrap();
        let mut rec = StageRecord::new(&serde_json::json!({"k": 1})).unwrap();
        rec.input(&f).unwrap();
        RunManifest::record(dir.path(), "b", rec.clone()).unwrap();
        RunManifest::record(dir.path(), "a", StageRecord::default()).unwrap();
        let m = RunManifest::load(dir.path()).unwrap();
        assert_eq!(m.stages.keys().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(m.stages["b"], rec);
    }
}
