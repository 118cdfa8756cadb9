use crate::Failure;
use std::io::Write;
use std::path::Path;

/// A rendered output file.
pub struct File {
    pub name: &'static str,
    pub contents: String,
}

/// Writes every file through a temporary in the same directory, then
/// renames it into place.
pub fn write_all(dir: &Path, files: &[File]) -> Result<(), Failure> {
    let io = |what: &str, e: std::io::Error| Failure::Io(format!("{what} {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(|e| io("creating", e))?;
    for f in files {
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io("temp file in", e))?;
        tmp.write_all(f.contents.as_bytes()).map_err(|e| io("writing to", e))?;
        tmp.as_file().sync_all().map_err(|e| io("syncing in", e))?;
        tmp.persist(dir.join(f.name)).map_err(|e| io("renaming into", e.error))?;
    }
    Ok(())
}

pub fn json<T: serde::Serialize>(name: &'static str, value: &T) -> File {
    let mut contents = serde_json::to_string_pretty(value).expect("reports serialize");
    contents.push('\n');
    File { name, contents }
}
