//! Ground-truth manifests, the detection exchange format, and the parsers
//! that feed them.
//!
//! Supported sources:
//!
//! * darknet label directories (`class cx cy w h`, normalized),
//! * COCO-style documents (`bbox = [x, y, width, height]`, absolute pixels),
//! * the native manifest, a JSON document mirroring [`DatasetManifest`],
//! * line-delimited detection records, see [`exchange`].

pub mod coco;
pub mod darknet;
pub mod exchange;
pub mod native;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::boxmath::{Box2D, ImageDims, BOUNDS_SLACK};

pub use coco::{parse_coco, write_coco, CocoError};
pub use darknet::{encode_yolo_line, load_yolo_dataset, parse_yolo_line, DarknetError};
pub use exchange::{parse_detections, write_detections, ExchangeError};
pub use native::{parse_manifest, write_manifest};

pub type ClassId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub id: ClassId,
    pub name: String,
    /// Category id in the document this vocabulary was imported from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_id: Option<i64>,
}

/// Dense, ordered class list. Entry `i` always carries id `i`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassEntry>", into = "Vec<ClassEntry>")]
pub struct ClassVocabulary {
    entries: Vec<ClassEntry>,
}

impl TryFrom<Vec<ClassEntry>> for ClassVocabulary {
    type Error = VocabularyError;

    fn try_from(entries: Vec<ClassEntry>) -> Result<Self, Self::Error> {
        Self::from_entries(entries)
    }
}

impl From<ClassVocabulary> for Vec<ClassEntry> {
    fn from(v: ClassVocabulary) -> Self {
        v.entries
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VocabularyError {
    #[error("class ids must be dense: entry {index} has id {id}")]
    NotDense { index: usize, id: ClassId },
    #[error("class name at id {0} is empty")]
    EmptyName(ClassId),
    #[error("class name {0:?} appears more than once")]
    DuplicateName(String),
}

impl ClassVocabulary {
    pub fn from_names<I, S>(names: I) -> Result<Self, VocabularyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| ClassEntry {
                id: i as ClassId,
                name: name.into(),
                source_id: None,
            })
            .collect();
        Self::from_entries(entries)
    }

    pub fn from_entries(entries: Vec<ClassEntry>) -> Result<Self, VocabularyError> {
        let vocab = Self { entries };
        vocab.check()?;
        Ok(vocab)
    }

    pub fn check(&self) -> Result<(), VocabularyError> {
        let mut seen = BTreeSet::new();
        for (index, e) in self.entries.iter().enumerate() {
            if e.id as usize != index {
                return Err(VocabularyError::NotDense { index, id: e.id });
            }
            if e.name.trim().is_empty() {
                return Err(VocabularyError::EmptyName(e.id));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(VocabularyError::DuplicateName(e.name.clone()));
            }
        }
        Ok(())
    }

    /// Reads a `classes.txt` style listing: one name per line, blank lines ignored.
    pub fn parse_names(text: &str) -> Result<Self, VocabularyError> {
        Self::from_names(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_owned),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, id: ClassId) -> bool {
        (id as usize) < self.entries.len()
    }

    pub fn name(&self, id: ClassId) -> Option<&str> {
        self.entries.get(id as usize).map(|e| e.name.as_str())
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        self.entries.iter().map(|e| e.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceEncoding {
    Normalized,
    Pixel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub class_id: ClassId,
    pub bbox: Box2D,
    pub encoding: SourceEncoding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub path: String,
    pub dims: ImageDims,
    pub boxes: Vec<GroundTruthBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub split_name: String,
    pub classes: ClassVocabulary,
    pub images: Vec<ImageRecord>,
}

impl DatasetManifest {
    pub fn box_count(&self) -> usize {
        self.images.iter().map(|r| r.boxes.len()).sum()
    }

    pub fn image(&self, image_id: &str) -> Option<&ImageRecord> {
        self.images.iter().find(|r| r.image_id == image_id)
    }

    pub fn image_ids(&self) -> BTreeSet<&str> {
        self.images.iter().map(|r| r.image_id.as_str()).collect()
    }

    /// Sorts images by id so that manifests built from the same files compare equal.
    pub fn canonicalize(&mut self) {
        self.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    }

    /// Keeps only the images whose id is in `keep`, preserving order.
    pub fn subset(&self, keep: &BTreeSet<String>) -> Self {
        Self {
            split_name: self.split_name.clone(),
            classes: self.classes.clone(),
            images: self
                .images
                .iter()
                .filter(|r| keep.contains(&r.image_id))
                .cloned()
                .collect(),
        }
    }
}

/// One scored prediction in absolute pixel corner coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class_id: ClassId,
    pub bbox: Box2D,
    pub score: f64,
}

/// Detections grouped by image, in input order within each group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub producer: String,
    groups: BTreeMap<String, Vec<Detection>>,
}

impl DetectionSet {
    pub fn new(producer: impl Into<String>) -> Self {
        Self {
            producer: producer.into(),
            groups: BTreeMap::new(),
        }
    }

    /// Appends to the detection's image group. The caller guarantees the
    /// detection's own invariants; parsers enforce them.
    pub fn push(&mut self, det: Detection) {
        self.groups
            .entry(det.image_id.clone())
            .or_default()
            .push(det);
    }

    pub fn groups(&self) -> &BTreeMap<String, Vec<Detection>> {
        &self.groups
    }

    pub fn for_image(&self, image_id: &str) -> &[Detection] {
        self.groups.get(image_id).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Detection> {
        self.groups.values().flatten()
    }

    /// Copies every ground-truth box into a detection with score 1.0.
    pub fn from_ground_truth(manifest: &DatasetManifest, producer: impl Into<String>) -> Self {
        let mut set = Self::new(producer);
        for rec in &manifest.images {
            for gt in &rec.boxes {
                set.push(Detection {
                    image_id: rec.image_id.clone(),
                    class_id: gt.class_id,
                    bbox: gt.bbox,
                    score: 1.0,
                });
            }
        }
        set
    }

    pub fn subset(&self, keep: &BTreeSet<String>) -> Self {
        Self {
            producer: self.producer.clone(),
            groups: self
                .groups
                .iter()
                .filter(|(k, _)| keep.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    DuplicateImageId {
        image_id: String,
    },
    OutOfBounds {
        image_id: String,
        box_index: usize,
        bbox: Box2D,
    },
    Degenerate {
        image_id: String,
        box_index: usize,
        bbox: Box2D,
    },
    UnknownClass {
        image_id: String,
        box_index: usize,
        class_id: ClassId,
    },
    Vocabulary {
        message: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateImageId { image_id } => write!(f, "{image_id}: duplicate image id"),
            Self::OutOfBounds {
                image_id,
                box_index,
                bbox,
            } => write!(f, "{image_id}: box {box_index} {bbox} is outside the image"),
            Self::Degenerate {
                image_id,
                box_index,
                bbox,
            } => write!(f, "{image_id}: box {box_index} {bbox} has zero area"),
            Self::UnknownClass {
                image_id,
                box_index,
                class_id,
            } => write!(f, "{image_id}: box {box_index} has unknown class {class_id}"),
            Self::Vocabulary { message } => write!(f, "class vocabulary: {message}"),
        }
    }
}

/// Lists every problem in the manifest. An empty list means the manifest is clean.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut out = Vec::new();
    if let Err(e) = manifest.classes.check() {
        out.push(Violation::Vocabulary {
            message: e.to_string(),
        });
    }
    let mut seen = BTreeSet::new();
    for rec in &manifest.images {
        if !seen.insert(rec.image_id.as_str()) {
            out.push(Violation::DuplicateImageId {
                image_id: rec.image_id.clone(),
            });
        }
        for (box_index, gt) in rec.boxes.iter().enumerate() {
            if !manifest.classes.contains(gt.class_id) {
                out.push(Violation::UnknownClass {
                    image_id: rec.image_id.clone(),
                    box_index,
                    class_id: gt.class_id,
                });
            }
            if !gt.bbox.within(rec.dims, BOUNDS_SLACK) {
                out.push(Violation::OutOfBounds {
                    image_id: rec.image_id.clone(),
                    box_index,
                    bbox: gt.bbox,
                });
            }
            if gt.bbox.is_degenerate() {
                out.push(Violation::Degenerate {
                    image_id: rec.image_id.clone(),
                    box_index,
                    bbox: gt.bbox,
                });
            }
        }
    }
    out
}
