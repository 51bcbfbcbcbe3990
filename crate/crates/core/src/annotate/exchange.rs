//! Detection exchange format: one JSON object per line,
//!
//! ```text
//! {"image_id": "img_001", "class_id": 0, "bbox": [x_min, y_min, x_max, y_max], "score": 0.91}
//! ```
//!
//! Boxes are absolute pixel corners of the original image. Blank lines are
//! skipped. An optional first line `{"producer": "..."}` records provenance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Detection, DetectionSet};
use crate::boxmath::Box2D;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExchangeError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: score {score} is outside [0, 1]")]
    ScoreOutOfRange { line: usize, score: f64 },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    producer: String,
}

#[derive(Serialize, Deserialize)]
struct Record {
    image_id: String,
    class_id: u32,
    bbox: [f64; 4],
    score: f64,
}

fn parse_record(text: &str, line: usize) -> Result<Detection, ExchangeError> {
    let malformed = |reason: String| ExchangeError::Malformed { line, reason };
    let rec: Record = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if rec.image_id.is_empty() {
        return Err(malformed("empty image_id".into()));
    }
    let bbox = Box2D::try_from(rec.bbox).map_err(|e| malformed(e.to_string()))?;
    if !(0.0..=1.0).contains(&rec.score) {
        return Err(ExchangeError::ScoreOutOfRange {
            line,
            score: rec.score,
        });
    }
    Ok(Detection {
        image_id: rec.image_id,
        class_id: rec.class_id,
        bbox,
        score: rec.score,
    })
}

pub fn parse_detections(stream: &str) -> Result<DetectionSet, ExchangeError> {
    let mut set = DetectionSet::new("");
    let mut seen_record = false;
    for (i, raw) in stream.lines().enumerate() {
        let text = raw.trim();
        if text.is_empty() {
            continue;
        }
        let line = i + 1;
        if !seen_record {
            if let Ok(h) = serde_json::from_str::<Header>(text) {
                set.producer = h.producer;
                seen_record = true;
                continue;
            }
        }
        seen_record = true;
        set.push(parse_record(text, line)?);
    }
    Ok(set)
}

/// Serializes a set in group order, producer header first when present.
pub fn write_detections(set: &DetectionSet) -> String {
    let mut out = String::new();
    if !set.producer.is_empty() {
        out.push_str(&serde_json::json!({ "producer": set.producer }).to_string());
        out.push('\n');
    }
    for d in set.iter() {
        let rec = Record {
            image_id: d.image_id.clone(),
            class_id: d.class_id,
            bbox: d.bbox.into(),
            score: d.score,
        };
        out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_by_image() {
        let s = r#"{"image_id":"a","class_id":0,"bbox":[0,0,5,5],"score":0.9}
{"image_id":"b","class_id":1,"bbox":[1,1,2,2],"score":0.5}

{"image_id":"a","class_id":0,"bbox":[2,2,6,6],"score":0.3}
"#;
        let set = parse_detections(s).unwrap();
        assert_eq!(set.groups().len(), 2);
        assert_eq!(set.len(), 3);
        assert_eq!(set.for_image("a")[1].score, 0.3);
    }

    #[test]
    fn empty_stream_is_empty_set() {
        assert!(parse_detections("").unwrap().is_empty());
        assert!(parse_detections("\n\r\n").unwrap().is_empty());
    }

    #[test]
    fn score_out_of_range() {
        let s = r#"{"image_id":"a","class_id":0,"bbox":[0,0,5,5],"score":1.3}"#;
        assert_eq!(
            parse_detections(s),
            Err(ExchangeError::ScoreOutOfRange { line: 1, score: 1.3 })
        );
        let s = r#"{"image_id":"a","class_id":0,"bbox":[0,0,5,5],"score":-0.01}"#;
        assert!(matches!(
            parse_detections(s),
            Err(ExchangeError::ScoreOutOfRange { .. })
        ));
    }

    #[test]
    fn malformed_records() {
        for bad in [
            r#"{"image_id":"a","class_id":0,"bbox":[0,0,5],"score":0.5}"#,
            r#"{"image_id":"a","class_id":-1,"bbox":[0,0,5,5],"score":0.5}"#,
            r#"{"image_id":"a","class_id":0,"bbox":[5,0,0,5],"score":0.5}"#,
            r#"{"image_id":"","class_id":0,"bbox":[0,0,5,5],"score":0.5}"#,
            r#"{"image_id":"a","class_id":0,"bbox":[0,0,5,5]}"#,
            r#"not json"#,
        ] {
            assert!(
                matches!(parse_detections(bad), Err(ExchangeError::Malformed { line: 1, .. })),
                "{bad}"
            );
        }
    }

    #[test]
    fn producer_header_round_trips() {
        let s = "{\"producer\":\"stub v1\"}\n{\"image_id\":\"a\",\"class_id\":0,\"bbox\":[0.0,0.0,5.0,5.0],\"score\":0.5}\n";
        let set = parse_detections(s).unwrap();
        assert_eq!(set.producer, "stub v1");
        assert_eq!(write_detections(&set), s);
    }

    #[test]
    fn header_only_allowed_first() {
        let s = "{\"image_id\":\"a\",\"class_id\":0,\"bbox\":[0,0,5,5],\"score\":0.5}\n{\"producer\":\"x\"}\n";
        assert!(matches!(
            parse_detections(s),
            Err(ExchangeError::Malformed { line: 2, .. })
        ));
    }
}
