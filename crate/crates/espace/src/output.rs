//! Shared CSV/number formatting and atomic file output.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Fixed 17-significant-digit formatting used in every CSV cell, so that any
/// f64 round-trips exactly and outputs are byte-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `contents` to `path` atomically: a temp file in the same directory
/// is renamed over the target, so partial runs never leave corrupt files.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = path.to_path_buf();
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    tmp.set_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
