//! Atomic file and directory output.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let mut tmp = tempfile::Builder::new()
        .prefix(".semloc-")
        .tempfile_in(parent_of(path))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Fills a fresh directory through `fill`, then moves it to `out`.
///
/// An existing `out` is replaced only if it is empty or holds a file named
/// `marker`; anything else is left untouched and reported as an error.
pub fn replace_dir_atomic<F>(out: &Path, marker: &str, fill: F) -> io::Result<()>
where
    F: FnOnce(&Path) -> io::Result<()>,
{
    let parent = parent_of(out);
    fs::create_dir_all(parent)?;
    let staging = tempfile::Builder::new().prefix(".semloc-").tempdir_in(parent)?;
    fill(staging.path())?;

    if out.exists() {
        let replaceable = out.is_dir() && (out.join(marker).is_file() || fs::read_dir(out)?.next().is_none());
        if !replaceable {
            return Err(io::Error::new(
                io::ErrorKind::AlreadyExists,
                format!("{} exists and is not a previous output (no {marker})", out.display()),
            ));
        }
        fs::remove_dir_all(out)?;
    }
    let staged = staging.keep();
    fs::rename(&staged, out).inspect_err(|_| {
        let _ = fs::remove_dir_all(&staged);
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn directory_replacement_rules() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let fill = |tag: &'static str| {
            move |p: &Path| {
                fs::write(p.join("manifest.toml"), tag)?;
                Ok(())
            }
        };
        replace_dir_atomic(&out, "manifest.toml", fill("a")).unwrap();
        replace_dir_atomic(&out, "manifest.toml", fill("b")).unwrap();
        assert_eq!(fs::read_to_string(out.join("manifest.toml")).unwrap(), "b");

        let foreign = dir.path().join("foreign");
        fs::create_dir(&foreign).unwrap();
        fs::write(foreign.join("keep.txt"), "x").unwrap();
        assert!(replace_dir_atomic(&foreign, "manifest.toml", fill("c")).is_err());
        assert!(foreign.join("keep.txt").is_file());

        let failing = dir.path().join("failing");
        let err = replace_dir_atomic(&failing, "manifest.toml", |_| Err(io::Error::other("boom")));
        assert!(err.is_err());
        assert!(!failing.exists());
        // Only `out` and `foreign` remain; no staging leftovers.
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 2);
    }
}
