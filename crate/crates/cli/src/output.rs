//! Staged output files, published atomically once a command has finished.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{CliError, CliResult};

/// Files a command wants to write, kept in memory until [`Outputs::publish`].
#[derive(Debug, Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
    inputs: Vec<PathBuf>,
    notes: Vec<String>,
    deferred: Option<CliError>,
}

impl Outputs {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records an input so that publishing refuses to overwrite it.
    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        let path = path.into();
        let bytes = bytes.into();
        match self.files.iter_mut().find(|(p, _)| *p == path) {
            Some(slot) => slot.1 = bytes,
            None => self.files.push((path, bytes)),
        }
    }

    /// A line for standard output, printed before the written paths.
    pub fn note(&mut self, line: impl Into<String>) {
        self.notes.push(line.into());
    }

    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    /// Publishes what was staged, then reports `err` (e.g. a partial collection).
    pub fn fail_after_publish(&mut self, err: CliError) {
        self.deferred = Some(err);
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    /// Writes every staged file via a temporary sibling and a rename.
    ///
    /// Returns the notes followed by the written paths, as output lines.
    pub fn publish(self) -> CliResult<Vec<String>> {
        for (path, _) in &self.files {
            for input in &self.inputs {
                if same_file(path, input) {
                    return Err(CliError::precondition(format!(
                        "output {} would overwrite input {}",
                        path.display(),
                        input.display()
                    )));
                }
            }
        }
        let mut lines = self.notes;
        for (path, bytes) in self.files {
            write_atomic(&path, &bytes)?;
            lines.push(path.display().to_string());
        }
        match self.deferred {
            Some(e) => Err(e),
            None => Ok(lines),
        }
    }
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Temp files start out private; give the result the permissions of the
/// file it replaces, or ordinary ones.
#[cfg(unix)]
fn set_output_permissions(tmp: &fs::File, path: &Path) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    let perms = fs::metadata(path).map(|m| m.permissions()).unwrap_or_else(|_| fs::Permissions::from_mode(0o644));
    tmp.set_permissions(perms)
}

#[cfg(not(unix))]
fn set_output_permissions(_tmp: &fs::File, _path: &Path) -> std::io::Result<()> {
    Ok(())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io_err = |e: std::io::Error| CliError::io(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io_err)?;
    let mut tmp = tempfile::Builder::new().prefix(".chainpulse-").tempfile_in(&dir).map_err(io_err)?;
    tmp.write_all(bytes).map_err(io_err)?;
    set_output_permissions(tmp.as_file(), path).map_err(io_err)?;
    tmp.as_file().sync_all().map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}
