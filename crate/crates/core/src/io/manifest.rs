use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Database,
    Query,
    Whitening,
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "database" | "db" => Ok(Role::Database),
            "query" => Ok(Role::Query),
            "whitening" => Ok(Role::Whitening),
            other => Err(Error::InvalidArgument(format!("unknown manifest role `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub image_id: String,
    pub path: PathBuf,
    pub role: Option<Role>,
}

/// Ordered list of `(image_id, tensor path)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }
}

/// Parses a manifest: one `image_id<TAB>path[<TAB>role]` per line, `#`
/// comments and blank lines skipped. Relative paths resolve against the
/// manifest's directory.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (Some(id), Some(file)) = (fields.next(), fields.next()) else {
            return Err(Error::malformed(path, format!("line {}: expected id<TAB>path", lineno + 1)));
        };
        let role = fields.next().map(str::parse).transpose()?;
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        let file = base.join(file);
        if !file.is_file() {
            return Err(Error::MissingFile(file));
        }
        entries.push(ManifestEntry {
            image_id: id.to_string(),
            path: file,
            role,
        });
    }
    Ok(DatasetManifest { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn touch(dir: &Path, name: &str) {
        std::fs::write(dir.join(name), b"").unwrap();
    }

    #[test]
    fn entries_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        for n in ["c.dft", "a.dft", "b.dft"] {
            touch(dir.path(), n);
        }
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "# comment\nc\tc.dft\na\ta.dft\tquery\n\nb\tb.dft\n").unwrap();
        let manifest = load_manifest(&m).unwrap();
        assert_eq!(manifest.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert_eq!(manifest.entries[1].role, Some(Role::Query));
        assert_eq!(manifest.entries[0].path, dir.path().join("c.dft"));
    }

    #[test]
    fn duplicate_id_rejected() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.dft");
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "a\ta.dft\na\ta.dft\n").unwrap();
        assert!(matches!(load_manifest(&m), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn missing_file_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let m = dir.path().join("m.tsv");
        std::fs::write(&m, "a\tnope.dft\n").unwrap();
        assert!(matches!(load_manifest(&m), Err(Error::MissingFile(_))));
    }
}
