use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Manifest file name, in `sha256sum` format (`<hex>  <relative path>`).
pub const MANIFEST_FILE: &str = "SHA256SUMS";

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChecksumManifest {
    pub entries: BTreeMap<PathBuf, String>,
}

impl ChecksumManifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (digest, file) = line.split_once(char::is_whitespace).ok_or_else(|| Error::CorruptData {
                path: PathBuf::from(MANIFEST_FILE),
                reason: format!("line {}: expected `<sha256>  <path>`", no + 1),
            })?;
            let file = file.trim_start().trim_start_matches('*');
            if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Err(Error::CorruptData {
                    path: PathBuf::from(MANIFEST_FILE),
                    reason: format!("line {}: malformed digest", no + 1),
                });
            }
            entries.insert(PathBuf::from(file), digest.to_ascii_lowercase());
        }
        Ok(Self { entries })
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(p, d)| format!("{d}  {}\n", p.display()))
            .collect()
    }
}

/// Checks every file listed in `dir/SHA256SUMS`. Returns `Ok(false)` when
/// there is no manifest, `Ok(true)` when all entries match.
pub fn verify_manifest(dir: &Path) -> Result<bool> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(false);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest = ChecksumManifest::parse(&text)?;
    for (file, expected) in &manifest.entries {
        let full = dir.join(file);
        let actual = sha256_file(&full)?;
        if &actual != expected {
            return Err(Error::ChecksumMismatch {
                path: full,
                expected: expected.clone(),
                actual,
            });
        }
    }
    Ok(true)
}

/// Writes `dir/SHA256SUMS` covering `files` (paths relative to `dir`).
pub fn write_manifest(dir: &Path, files: &[PathBuf]) -> Result<ChecksumManifest> {
    let mut manifest = ChecksumManifest::default();
    for f in files {
        manifest.entries.insert(f.clone(), sha256_file(&dir.join(f))?);
    }
    let path = dir.join(MANIFEST_FILE);
    std::fs::write(&path, manifest.render()).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
