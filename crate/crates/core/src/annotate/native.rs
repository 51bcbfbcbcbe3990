//! Native manifest document: the JSON form of [`DatasetManifest`].
//!
//! ```json
//! {
//!   "format": "detbench-manifest/1",
//!   "split_name": "val",
//!   "classes": [{"id": 0, "name": "spy_radar"}],
//!   "images": [{
//!     "image_id": "img_001", "path": "images/img_001.jpg",
//!     "dims": {"width": 640, "height": 640},
//!     "boxes": [{"class_id": 0, "bbox": [10.0, 20.0, 40.0, 60.0], "encoding": "pixel"}],
//!     "pose_ref": "pose_0003"
//!   }]
//! }
//! ```
//!
//! Coordinates are written with the shortest representation that round-trips
//! exactly, which is never fewer significant digits than the value carries.

use serde::{Deserialize, Serialize};

use super::DatasetManifest;

pub const MANIFEST_FORMAT: &str = "detbench-manifest/1";

#[derive(Serialize)]
struct Out<'a> {
    format: &'static str,
    #[serde(flatten)]
    manifest: &'a DatasetManifest,
}

#[derive(Deserialize)]
struct In {
    format: String,
    #[serde(flatten)]
    manifest: DatasetManifest,
}

pub fn write_manifest(manifest: &DatasetManifest) -> String {
    let mut s = serde_json::to_string_pretty(&Out {
        format: MANIFEST_FORMAT,
        manifest,
    })
    .expect("manifest serializes");
    s.push('\n');
    s
}

pub fn parse_manifest(text: &str) -> Result<DatasetManifest, serde_json::Error> {
    let doc: In = serde_json::from_str(text)?;
    if doc.format != MANIFEST_FORMAT {
        return Err(serde::de::Error::custom(format!(
            "unsupported manifest format {:?}, expected {MANIFEST_FORMAT:?}",
            doc.format
        )));
    }
    Ok(doc.manifest)
}
