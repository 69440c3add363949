//! Clip archives: a directory of `ANGK1` coordinate tensors (`jnt_x/y/z`
//! channels) indexed by `manifest.txt`.
//!
//! Manifest lines are `<file> <label or -> <valid frames>`; `#` starts a comment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::encoders::joint_features;
use crate::error::{Error, Result};
use crate::io::{clip_from_coords, read_tensor_file, write_tensor_file};
use crate::types::{Clip, FeatureTensor};

pub const MANIFEST: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArchiveEntry {
    pub file: String,
    pub label: Option<usize>,
    pub valid_frames: usize,
}

pub fn render_manifest(entries: &[ArchiveEntry]) -> String {
    let mut out = String::from("# file label valid_frames\n");
    for e in entries {
        let label = e.label.map_or_else(|| "-".to_string(), |l| l.to_string());
        let _ = writeln!(out, "{} {label} {}", e.file, e.valid_frames);
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ArchiveEntry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |m: &str| Error::Parse { line: i + 1, msg: format!("manifest: {m}") };
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [file, label, valid] = fields[..] else {
            return Err(err("expected `<file> <label> <valid frames>`"));
        };
        if file.contains('/') || file.contains('\\') || file.starts_with('.') {
            return Err(err(&format!("file name `{file}` must be a plain name")));
        }
        let label = match label {
            "-" => None,
            l => Some(l.parse().map_err(|_| err(&format!("bad label `{l}`")))?),
        };
        let valid_frames = valid.parse().map_err(|_| err(&format!("bad frame count `{valid}`")))?;
        out.push(ArchiveEntry { file: file.to_string(), label, valid_frames });
    }
    Ok(out)
}

pub fn write_manifest(dir: &Path, entries: &[ArchiveEntry]) -> Result<()> {
    fs::write(dir.join(MANIFEST), render_manifest(entries))?;
    Ok(())
}

pub fn read_manifest(dir: &Path) -> Result<Vec<ArchiveEntry>> {
    parse_manifest(&fs::read_to_string(dir.join(MANIFEST))?)
}

/// Writes `<stem>.angk` per clip and the manifest.
pub fn write_clip_archive(dir: &Path, clips: &[(String, Clip)]) -> Result<Vec<ArchiveEntry>> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(clips.len());
    for (stem, clip) in clips {
        let file = format!("{stem}.angk");
        write_tensor_file(&joint_features(clip), dir.join(&file))?;
        entries.push(ArchiveEntry { file, label: clip.label, valid_frames: clip.valid_frames() });
    }
    write_manifest(dir, &entries)?;
    Ok(entries)
}

pub fn read_clip_archive(dir: &Path) -> Result<Vec<(ArchiveEntry, Clip)>> {
    read_manifest(dir)?
        .into_iter()
        .map(|e| {
            let t = read_tensor_file(dir.join(&e.file))?;
            let clip = clip_from_coords(&t, e.label, e.valid_frames)?;
            Ok((e, clip))
        })
        .collect()
}

/// Reads feature tensors listed in a manifest, paired with their labels.
pub fn read_feature_archive(dir: &Path) -> Result<Vec<(ArchiveEntry, FeatureTensor)>> {
    read_manifest(dir)?
        .into_iter()
        .map(|e| {
            let t = read_tensor_file(dir.join(&e.file))?;
            Ok((e, t))
        })
        .collect()
}
