//! Run folders: `<root>/<run id>/{config.toml, record.json, model.ckpt, ...}`.

use std::path::{Path, PathBuf};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunRegistry {
    root: PathBuf,
}

/// Standard file locations inside one run folder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub config: PathBuf,
    pub record: PathBuf,
    pub checkpoint: PathBuf,
    pub report: PathBuf,
    pub figure: PathBuf,
    pub safe_set: PathBuf,
}

impl RunPaths {
    fn new(dir: PathBuf) -> Self {
        Self {
            config: dir.join("config.toml"),
            record: dir.join("record.json"),
            checkpoint: dir.join("model.ckpt"),
            report: dir.join("report.json"),
            figure: dir.join("figure.svg"),
            safe_set: dir.join("safe_set.toml"),
            dir,
        }
    }
}

impl RunRegistry {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates a fresh folder named `<kind>-<hash8>`, adding a numeric
    /// suffix if the name is taken.
    pub fn create(&self, kind: &str, config_hash: &str) -> Result<RunPaths> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let short = &config_hash[..config_hash.len().min(8)];
        let mut id = format!("{kind}-{short}");
        let mut n = 1;
        while self.root.join(&id).exists() {
            n += 1;
            id = format!("{kind}-{short}-{n}");
        }
        let dir = self.root.join(&id);
        std::fs::create_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RunPaths::new(dir))
    }

    /// Resolves a run id or a path to an existing run folder.
    pub fn open(&self, run: &str) -> Result<RunPaths> {
        let direct = PathBuf::from(run);
        let dir = if direct.join("record.json").is_file() {
            direct
        } else {
            self.root.join(run)
        };
        if !dir.join("record.json").is_file() {
            return Err(Error::UnknownRun(run.to_string()));
        }
        Ok(RunPaths::new(dir))
    }

    pub fn list(&self) -> Result<Vec<String>> {
        if !self.root.exists() {
            return Ok(Vec::new());
        }
        let mut ids: Vec<String> = std::fs::read_dir(&self.root)
            .map_err(|e| Error::io(&self.root, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("record.json").is_file())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_and_open() {
        let dir = tempfile::tempdir().unwrap();
        let reg = RunRegistry::new(dir.path());
        let a = reg.create("train", "0123456789").unwrap();
        let b = reg.create("train", "0123456789").unwrap();
        assert_ne!(a.dir, b.dir);
        assert!(matches!(reg.open("train-01234567"), Err(Error::UnknownRun(_))));
        std::fs::write(&a.record, "{}").unwrap();
        assert_eq!(reg.open("train-01234567").unwrap(), a);
        assert_eq!(reg.list().unwrap(), vec!["train-01234567".to_string()]);
    }
}
