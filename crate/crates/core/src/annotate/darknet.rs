//! Darknet label files: one `class cx cy w h` line per box, fractions of the
//! image size, whitespace separated.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use thiserror::Error;

use super::{ClassVocabulary, DatasetManifest, GroundTruthBox, ImageRecord, SourceEncoding};
use crate::boxmath::{norm_to_pixel, pixel_to_norm, BoxError, ImageDims, NormBox};

const IMAGE_EXTENSIONS: &[&str] = &["jpg", "jpeg", "png", "bmp", "gif", "webp", "tif", "tiff"];

/// Name of the class listing that may sit next to the label files.
pub const CLASSES_FILE: &str = "classes.txt";

#[derive(Debug, Error)]
pub enum DarknetError {
    #[error("malformed label line: {0}")]
    Malformed(String),
    #[error("label value out of range: {0}")]
    OutOfRange(String),
    #[error("{file}:{line}: {source}")]
    Line {
        file: PathBuf,
        line: usize,
        #[source]
        source: Box<DarknetError>,
    },
    #[error("cannot read image dimensions of {path}: {reason}")]
    MissingDims { path: PathBuf, reason: String },
    #[error("more than one file with stem {stem:?} in {dir}")]
    DuplicateStem { stem: String, dir: PathBuf },
    #[error("label file {0} has no matching image")]
    OrphanLabel(PathBuf),
    #[error("cannot encode box for {image_id}: {source}")]
    Encode {
        image_id: String,
        #[source]
        source: BoxError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> DarknetError + '_ {
    move |source| DarknetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Parses one label line against the dimensions of its image.
pub fn parse_yolo_line(line: &str, dims: ImageDims) -> Result<GroundTruthBox, DarknetError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(DarknetError::Malformed(format!(
            "expected 5 fields, found {}",
            fields.len()
        )));
    }
    let class: i64 = fields[0]
        .parse()
        .map_err(|_| DarknetError::Malformed(format!("class {:?} is not an integer", fields[0])))?;
    if class < 0 || class > u32::MAX as i64 {
        return Err(DarknetError::OutOfRange(format!("class id {class}")));
    }
    let mut vals = [0.0f64; 4];
    for (v, raw) in vals.iter_mut().zip(&fields[1..]) {
        *v = raw
            .parse()
            .map_err(|_| DarknetError::Malformed(format!("{raw:?} is not a number")))?;
        if !v.is_finite() {
            return Err(DarknetError::Malformed(format!("{raw:?} is not finite")));
        }
    }
    let norm = NormBox::new(vals[0], vals[1], vals[2], vals[3])
        .map_err(|e| DarknetError::OutOfRange(e.to_string()))?;
    Ok(GroundTruthBox {
        class_id: class as u32,
        bbox: norm_to_pixel(&norm, dims),
        encoding: SourceEncoding::Normalized,
    })
}

/// Formats a box as a label line. Fails for boxes outside the image or with zero area.
pub fn encode_yolo_line(gt: &GroundTruthBox, dims: ImageDims) -> Result<String, BoxError> {
    let n = pixel_to_norm(&gt.bbox, dims)?;
    Ok(format!("{} {} {} {} {}", gt.class_id, n.cx, n.cy, n.w, n.h))
}

pub fn parse_label_text(
    text: &str,
    dims: ImageDims,
    file: &Path,
) -> Result<Vec<GroundTruthBox>, DarknetError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            parse_yolo_line(l, dims).map_err(|e| DarknetError::Line {
                file: file.to_path_buf(),
                line: i + 1,
                source: Box::new(e),
            })
        })
        .collect()
}

fn has_ext(path: &Path, exts: &[&str]) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| exts.iter().any(|x| x.eq_ignore_ascii_case(e)))
}

fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Collects files with the given extensions keyed by stem, rejecting repeats.
fn files_by_stem(dir: &Path, exts: &[&str]) -> Result<BTreeMap<String, PathBuf>, DarknetError> {
    let mut out = BTreeMap::new();
    if !dir.exists() {
        return Ok(out);
    }
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if !path.is_file() || !has_ext(&path, exts) {
            continue;
        }
        let stem = stem_of(&path);
        if out.insert(stem.clone(), path).is_some() {
            return Err(DarknetError::DuplicateStem {
                stem,
                dir: dir.to_path_buf(),
            });
        }
    }
    Ok(out)
}

pub fn read_image_dims(path: &Path) -> Result<ImageDims, DarknetError> {
    let missing = |reason: String| DarknetError::MissingDims {
        path: path.to_path_buf(),
        reason,
    };
    let size = imagesize::size(path).map_err(|e| missing(e.to_string()))?;
    let w = u32::try_from(size.width).map_err(|e| missing(e.to_string()))?;
    let h = u32::try_from(size.height).map_err(|e| missing(e.to_string()))?;
    ImageDims::new(w, h).map_err(|e| missing(e.to_string()))
}

fn load_record(
    stem: &str,
    image: &Path,
    label: Option<&PathBuf>,
) -> Result<ImageRecord, DarknetError> {
    let dims = read_image_dims(image)?;
    let boxes = match label {
        Some(label) => {
            let text = fs::read_to_string(label).map_err(io_err(label))?;
            parse_label_text(&text, dims, label)?
        }
        None => Vec::new(),
    };
    Ok(ImageRecord {
        image_id: stem.to_owned(),
        path: image.to_string_lossy().into_owned(),
        dims,
        boxes,
        pose_ref: None,
    })
}

/// Builds a manifest from an image directory and its darknet label directory.
///
/// Labels are matched to images by file stem. Images without a label file are
/// kept as negatives with no boxes. A `classes.txt` in the label directory is
/// skipped; any other label without an image is an error. The result is sorted
/// by image id.
pub fn load_yolo_dataset(
    image_dir: &Path,
    label_dir: &Path,
    vocabulary: ClassVocabulary,
) -> Result<DatasetManifest, DarknetError> {
    let images = files_by_stem(image_dir, IMAGE_EXTENSIONS)?;
    let mut labels = files_by_stem(label_dir, &["txt"])?;
    if let Some(p) = labels.get("classes") {
        if p.file_name().is_some_and(|n| n == CLASSES_FILE) && !images.contains_key("classes") {
            labels.remove("classes");
        }
    }
    if let Some((_, orphan)) = labels.iter().find(|(stem, _)| !images.contains_key(*stem)) {
        return Err(DarknetError::OrphanLabel(orphan.clone()));
    }

    let jobs: Vec<(&String, &PathBuf)> = images.iter().collect();
    #[cfg(feature = "parallel")]
    let iter = jobs.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = jobs.iter();
    let mut records = iter
        .map(|(stem, image)| load_record(stem, image, labels.get(*stem)))
        .collect::<Result<Vec<_>, _>>()?;
    records.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let split_name = image_dir
        .parent()
        .filter(|_| image_dir.file_name().is_some_and(|n| n == "images"))
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "default".to_owned());
    Ok(DatasetManifest {
        split_name,
        classes: vocabulary,
        images: records,
    })
}

/// Writes one label file per image plus `classes.txt` into `label_dir`.
pub fn write_yolo_labels(manifest: &DatasetManifest, label_dir: &Path) -> Result<(), DarknetError> {
    fs::create_dir_all(label_dir).map_err(io_err(label_dir))?;
    for rec in &manifest.images {
        let mut text = String::new();
        for gt in &rec.boxes {
            let line = encode_yolo_line(gt, rec.dims).map_err(|source| DarknetError::Encode {
                image_id: rec.image_id.clone(),
                source,
            })?;
            text.push_str(&line);
            text.push('\n');
        }
        let path = label_dir.join(format!("{}.txt", rec.image_id));
        fs::write(&path, text).map_err(io_err(&path))?;
    }
    let names: String = manifest
        .classes
        .entries()
        .iter()
        .map(|e| format!("{}\n", e.name))
        .collect();
    let path = label_dir.join(CLASSES_FILE);
    fs::write(&path, names).map_err(io_err(&path))
}
