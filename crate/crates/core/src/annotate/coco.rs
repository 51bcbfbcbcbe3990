//! COCO-style documents: `images`, `annotations`, `categories`, with
//! `bbox = [x, y, width, height]` in absolute pixels.
//!
//! Category ids are remapped to dense ids `0..K` in document order; the
//! original id is kept as [`ClassEntry::source_id`] so that writing the
//! manifest back reproduces the source ids. Two optional extensions carry
//! manifest fields COCO has no slot for: `image_key` and `pose_ref` on images,
//! `info.split` on the document.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    ClassEntry, ClassVocabulary, DatasetManifest, GroundTruthBox, ImageRecord, SourceEncoding,
};
use crate::boxmath::{Box2D, ImageDims};

#[derive(Debug, Error)]
pub enum CocoError {
    #[error("malformed COCO document: {0}")]
    Malformed(String),
    #[error("annotation {annotation} refers to unknown {kind} id {id}")]
    DanglingReference {
        annotation: i64,
        kind: &'static str,
        id: i64,
    },
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CocoInfo {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoImage {
    id: i64,
    file_name: String,
    width: u32,
    height: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    image_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose_ref: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoAnnotation {
    id: i64,
    image_id: i64,
    category_id: i64,
    bbox: [f64; 4],
    #[serde(default)]
    area: Option<f64>,
    #[serde(default)]
    iscrowd: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoCategory {
    id: i64,
    name: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct CocoDocument {
    #[serde(default)]
    info: CocoInfo,
    images: Vec<CocoImage>,
    annotations: Vec<CocoAnnotation>,
    categories: Vec<CocoCategory>,
}

pub fn parse_coco(document: &str) -> Result<DatasetManifest, CocoError> {
    let doc: CocoDocument =
        serde_json::from_str(document).map_err(|e| CocoError::Malformed(e.to_string()))?;

    let mut class_of = BTreeMap::new();
    let mut entries = Vec::with_capacity(doc.categories.len());
    for (dense, cat) in doc.categories.iter().enumerate() {
        if class_of.insert(cat.id, dense as u32).is_some() {
            return Err(CocoError::Malformed(format!("duplicate category id {}", cat.id)));
        }
        entries.push(ClassEntry {
            id: dense as u32,
            name: cat.name.clone(),
            source_id: Some(cat.id),
        });
    }
    let classes =
        ClassVocabulary::from_entries(entries).map_err(|e| CocoError::Malformed(e.to_string()))?;

    let mut slot_of = BTreeMap::new();
    let mut images = Vec::with_capacity(doc.images.len());
    for img in &doc.images {
        if slot_of.insert(img.id, images.len()).is_some() {
            return Err(CocoError::Malformed(format!("duplicate image id {}", img.id)));
        }
        let dims = ImageDims::new(img.width, img.height)
            .map_err(|e| CocoError::Malformed(format!("image {}: {e}", img.id)))?;
        let image_id = img.image_key.clone().unwrap_or_else(|| {
            Path::new(&img.file_name)
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| img.id.to_string())
        });
        images.push(ImageRecord {
            image_id,
            path: img.file_name.clone(),
            dims,
            boxes: Vec::new(),
            pose_ref: img.pose_ref.clone(),
        });
    }

    for ann in &doc.annotations {
        let slot = *slot_of
            .get(&ann.image_id)
            .ok_or(CocoError::DanglingReference {
                annotation: ann.id,
                kind: "image",
                id: ann.image_id,
            })?;
        let class_id = *class_of
            .get(&ann.category_id)
            .ok_or(CocoError::DanglingReference {
                annotation: ann.id,
                kind: "category",
                id: ann.category_id,
            })?;
        let [x, y, w, h] = ann.bbox;
        if w < 0.0 || h < 0.0 {
            return Err(CocoError::Malformed(format!(
                "annotation {} has negative size",
                ann.id
            )));
        }
        let bbox = Box2D::from_xywh(x, y, w, h)
            .map_err(|e| CocoError::Malformed(format!("annotation {}: {e}", ann.id)))?;
        images[slot].boxes.push(GroundTruthBox {
            class_id,
            bbox,
            encoding: SourceEncoding::Pixel,
        });
    }

    Ok(DatasetManifest {
        split_name: doc.info.split.unwrap_or_else(|| "default".to_owned()),
        classes,
        images,
    })
}

pub fn write_coco(manifest: &DatasetManifest) -> String {
    let categories: Vec<CocoCategory> = manifest
        .classes
        .entries()
        .iter()
        .map(|e| CocoCategory {
            id: e.source_id.unwrap_or(e.id as i64),
            name: e.name.clone(),
        })
        .collect();
    let mut images = Vec::with_capacity(manifest.images.len());
    let mut annotations = Vec::new();
    for (i, rec) in manifest.images.iter().enumerate() {
        let image_id = i as i64 + 1;
        images.push(CocoImage {
            id: image_id,
            file_name: rec.path.clone(),
            width: rec.dims.width,
            height: rec.dims.height,
            image_key: Some(rec.image_id.clone()),
            pose_ref: rec.pose_ref.clone(),
        });
        for gt in &rec.boxes {
            let category_id = manifest
                .classes
                .entries()
                .get(gt.class_id as usize)
                .map_or(gt.class_id as i64, |e| e.source_id.unwrap_or(e.id as i64));
            annotations.push(CocoAnnotation {
                id: annotations.len() as i64 + 1,
                image_id,
                category_id,
                bbox: gt.bbox.to_xywh(),
                area: Some(gt.bbox.area()),
                iscrowd: 0,
            });
        }
    }
    let doc = CocoDocument {
        info: CocoInfo {
            split: Some(manifest.split_name.clone()),
        },
        images,
        annotations,
        categories,
    };
    serde_json::to_string_pretty(&doc).expect("COCO document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{
        "images": [{"id": 7, "file_name": "img/a.jpg", "width": 100, "height": 100}],
        "annotations": [{"id": 1, "image_id": 7, "category_id": 3, "bbox": [10, 20, 30, 40]}],
        "categories": [{"id": 3, "name": "spy"}, {"id": 1, "name": "vls"}]
    }"#;

    #[test]
    fn converts_xywh_to_corners_and_remaps_classes() {
        let m = parse_coco(ONE).unwrap();
        assert_eq!(m.images.len(), 1);
        assert_eq!(m.images[0].image_id, "a");
        let gt = &m.images[0].boxes[0];
        assert_eq!(gt.bbox, Box2D::new(10.0, 20.0, 40.0, 60.0).unwrap());
        assert_eq!(gt.class_id, 0);
        assert_eq!(m.classes.entries()[1].source_id, Some(1));
        assert_eq!(m.classes.name(1), Some("vls"));
    }

    #[test]
    fn empty_annotations_keep_images() {
        let doc = r#"{"images": [{"id": 1, "file_name": "a.png", "width": 5, "height": 5}],
                      "annotations": [], "categories": []}"#;
        let m = parse_coco(doc).unwrap();
        assert_eq!(m.images.len(), 1);
        assert_eq!(m.box_count(), 0);
    }

    #[test]
    fn dangling_references_are_rejected() {
        let doc = ONE.replace("\"image_id\": 7", "\"image_id\": 8");
        assert!(matches!(
            parse_coco(&doc),
            Err(CocoError::DanglingReference { kind: "image", id: 8, .. })
        ));
        let doc = ONE.replace("\"category_id\": 3", "\"category_id\": 9");
        assert!(matches!(
            parse_coco(&doc),
            Err(CocoError::DanglingReference { kind: "category", .. })
        ));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        assert!(matches!(parse_coco("{"), Err(CocoError::Malformed(_))));
        assert!(matches!(parse_coco(r#"{"images": []}"#), Err(CocoError::Malformed(_))));
        let neg = ONE.replace("[10, 20, 30, 40]", "[10, 20, -30, 40]");
        assert!(matches!(parse_coco(&neg), Err(CocoError::Malformed(_))));
        let dup = ONE.replace("{\"id\": 1, \"name\": \"vls\"}", "{\"id\": 3, \"name\": \"vls\"}");
        assert!(matches!(parse_coco(&dup), Err(CocoError::Malformed(_))));
    }

    #[test]
    fn writes_xywh() {
        let m = parse_coco(ONE).unwrap();
        let out = write_coco(&m);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["annotations"][0]["bbox"], serde_json::json!([10.0, 20.0, 30.0, 40.0]));
        assert_eq!(v["annotations"][0]["category_id"], 3);
        assert_eq!(parse_coco(&out).unwrap(), m);
    }

    #[test]
    fn empty_manifest_writes_empty_collections() {
        let m = DatasetManifest {
            split_name: "val".into(),
            classes: ClassVocabulary::default(),
            images: vec![],
        };
        let v: serde_json::Value = serde_json::from_str(&write_coco(&m)).unwrap();
        for key in ["images", "annotations", "categories"] {
            assert_eq!(v[key], serde_json::json!([]));
        }
    }
}
