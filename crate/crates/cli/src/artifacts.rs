//! Output-directory bookkeeping: atomic writes, input checks, hashes and manifests.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

/// A file a stage needs that is not there. Maps to exit code 3.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MissingArtifact {
    pub path: PathBuf,
    pub hint: String,
}

impl fmt::Display for MissingArtifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing artifact {} ({})", self.path.display(), self.hint)
    }
}

impl std::error::Error for MissingArtifact {}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| platewise::Error::Io { path: path.to_path_buf(), source: e })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `bytes` to a temp file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let io = |e: std::io::Error| platewise::Error::Io { path: path.to_path_buf(), source: e };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub config: PipelineConfig,
}

pub const MANIFEST_DIR: &str = "manifests";

/// One stage's view of the output directory. Records what it reads and
/// writes so the manifest can be emitted at the end.
pub struct StageIo {
    out: PathBuf,
    stage: String,
    inputs: BTreeMap<String, PathBuf>,
    outputs: BTreeMap<String, PathBuf>,
}

impl StageIo {
    pub fn new(out: &Path, stage: &str) -> Self {
        Self { out: out.to_path_buf(), stage: stage.to_string(), inputs: BTreeMap::new(), outputs: BTreeMap::new() }
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }

    /// An artifact written by an earlier stage.
    pub fn artifact(&mut self, name: &str, producer: &str) -> Result<PathBuf> {
        let path = self.out.join(name);
        if !path.is_file() {
            return Err(MissingArtifact { path, hint: format!("run `{producer}` first") }.into());
        }
        self.inputs.insert(name.to_string(), path.clone());
        Ok(path)
    }

    pub fn has_artifact(&self, name: &str) -> bool {
        self.out.join(name).is_file()
    }

    /// A user-supplied input named in the config.
    pub fn external(&mut self, path: Option<&PathBuf>, key: &str) -> Result<PathBuf> {
        let Some(path) = path else {
            return Err(platewise::Error::Config(format!("paths.{key} is not set")).into());
        };
        if !path.is_file() {
            return Err(MissingArtifact { path: path.clone(), hint: format!("paths.{key}") }.into());
        }
        self.inputs.insert(format!("{key}:{}", path.display()), path.clone());
        Ok(path.clone())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        self.outputs.insert(name.to_string(), path);
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    /// Serializes rows with a header taken from the row type.
    pub fn write_rows<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().context("flushing csv buffer")?;
        self.write(name, &bytes)
    }

    /// Writes through a caller-supplied writer into memory first.
    pub fn write_with<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> platewise::Result<()>,
    {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    /// Hashes every recorded input and output and writes `manifests/<stage>.json`.
    pub fn finish(self, cfg: &PipelineConfig) -> Result<Manifest> {
        let digest = |m: &BTreeMap<String, PathBuf>| -> Result<Vec<FileDigest>> {
            m.iter().map(|(k, p)| Ok(FileDigest { path: k.clone(), sha256: sha256_file(p)? })).collect()
        };
        let manifest = Manifest {
            stage: self.stage.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            inputs: digest(&self.inputs)?,
            outputs: digest(&self.outputs)?,
            config: cfg.for_manifest(),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        write_atomic(&self.out.join(MANIFEST_DIR).join(format!("{}.json", self.stage)), &bytes)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/a.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn sha256_known_vector() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        assert_eq!(sha256_file(&p).unwrap(), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn missing_artifact_names_path_and_producer() {
        let dir = tempfile::tempdir().unwrap();
        let mut io = StageIo::new(dir.path(), "generate");
        let err = io.artifact("sampler.json", "fit-sampler").unwrap_err();
        let missing = err.downcast_ref::<MissingArtifact>().unwrap();
        assert!(missing.path.ends_with("sampler.json"));
        assert!(err.to_string().contains("fit-sampler"));
    }

    #[test]
    fn manifest_lists_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut io = StageIo::new(dir.path(), "demo");
        io.write("x.csv", b"a\n1\n").unwrap();
        let m = io.finish(&PipelineConfig::default()).unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.outputs[0].path, "x.csv");
        assert!(dir.path().join("manifests/demo.json").is_file());
    }
}
