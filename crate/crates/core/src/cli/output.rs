use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::{Error, Result};

/// Result files held in memory until the whole run has succeeded.
#[derive(Debug, Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn add_json(&mut self, name: impl Into<String>, value: &serde_json::Value) {
        let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
        s.push('\n');
        self.add(name, s);
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.files.iter().map(|(n, _)| n.as_str())
    }

    /// Writes every file to a temporary in `dir`, then renames them all into
    /// place. Any failure removes what was already renamed.
    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>> {
        let created = !dir.exists();
        std::fs::create_dir_all(dir)?;
        let staged: Result<Vec<(NamedTempFile, PathBuf)>> = self
            .files
            .iter()
            .map(|(name, bytes)| {
                let mut tmp = NamedTempFile::new_in(dir)?;
                tmp.write_all(bytes)?;
                tmp.as_file().sync_all()?;
                Ok((tmp, dir.join(name)))
            })
            .collect();
        let staged = match staged {
            Ok(s) => s,
            Err(e) => {
                if created {
                    let _ = std::fs::remove_dir(dir);
                }
                return Err(e);
            }
        };
        let mut done = Vec::with_capacity(staged.len());
        let mut pending = staged.into_iter();
        while let Some((tmp, target)) = pending.next() {
            if let Err(e) = tmp.persist(&target) {
                let message = e.error.to_string();
                drop(e.file);
                drop(pending);
                for p in &done {
                    let _ = std::fs::remove_file(p);
                }
                if created {
                    let _ = std::fs::remove_dir(dir);
                }
                return Err(Error::Io(format!("{}: {message}", target.display())));
            }
            done.push(target);
        }
        Ok(done)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a/b");
        let mut a = Artifacts::new();
        a.add("x.csv", "1,2\n");
        a.add_json("y.json", &serde_json::json!({"k": 1}));
        let paths = a.commit(&out).unwrap();
        assert_eq!(paths.len(), 2);
        assert_eq!(std::fs::read_to_string(out.join("x.csv")).unwrap(), "1,2\n");
        assert_eq!(std::fs::read_dir(&out).unwrap().count(), 2);
    }

    #[test]
    fn failed_commit_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fresh");
        let mut a = Artifacts::new();
        a.add("ok.csv", "1\n");
        a.add("missing/sub.csv", "2\n");
        assert!(a.commit(&out).is_err());
        assert!(!out.exists());
    }
}
