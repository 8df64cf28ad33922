use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use urbanvqa_core::dataset::jsonl_lines;
use urbanvqa_core::{parse_metadata_record, SceneMetadata};

pub fn open(path: &Path) -> Result<BufReader<File>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(file))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn ensure_distinct(paths: &[&Path]) -> Result<()> {
    for (i, a) in paths.iter().enumerate() {
        if paths[i + 1..].contains(a) {
            anyhow::bail!("{} is used for both input and output", a.display());
        }
    }
    Ok(())
}

/// Every parseable, valid metadata record in file order, plus the number of
/// lines rejected. Rejections are logged.
pub fn read_metadata(path: &Path) -> Result<(Vec<SceneMetadata>, usize)> {
    let mut records = Vec::new();
    let mut rejected = 0;
    for item in jsonl_lines(open(path)?) {
        let (line, text) = item.with_context(|| format!("reading {}", path.display()))?;
        match parse_metadata_record(&text) {
            Ok(meta) => records.push(meta),
            Err(e) => {
                log::warn!("{}:{line}: {e}", path.display());
                rejected += 1;
            }
        }
    }
    Ok((records, rejected))
}
