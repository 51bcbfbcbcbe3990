//! Browser bindings for the demo page: live IoU of two boxes, a half-dome
//! collection plan for the sample destroyer scene, and precision/recall
//! curves of a synthetic detector.
//!
//! Each binding is a thin wrapper over a plain function returning JSON text, so
//! the same code is exercised by native tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

use detbench::annotate::{
    ClassVocabulary, DatasetManifest, Detection, DetectionSet, GroundTruthBox, ImageRecord, SourceEncoding,
};
use detbench::boxmath::{Box2D, ImageDims};
use detbench::collectplan::{generate_plan, PlanParams, SceneSpec, Stratum};
use detbench::metrics::{average_precision, evaluate, ApMode, EvalConfig};

#[derive(Debug, Serialize)]
pub struct IouView {
    pub iou: f64,
    pub intersection: Option<[f64; 4]>,
    pub union_area: f64,
}

fn to_box(v: &[f64]) -> Result<Box2D, String> {
    let c: [f64; 4] = v.try_into().map_err(|_| format!("expected 4 numbers, got {}", v.len()))?;
    Box2D::try_from(c).map_err(|e| e.to_string())
}

/// Corners are `[x_min, y_min, x_max, y_max]`.
pub fn iou_view(a: &[f64], b: &[f64]) -> Result<IouView, String> {
    let (a, b) = (to_box(a)?, to_box(b)?);
    let inter = a.intersection(&b);
    let inter_area = inter.map_or(0.0, |i| i.area());
    Ok(IouView {
        iou: detbench::boxmath::iou(&a, &b),
        intersection: inter.map(|i| [i.x_min, i.y_min, i.x_max, i.y_max]),
        union_area: a.area() + b.area() - inter_area,
    })
}

#[derive(Debug, Serialize)]
struct DomeBox {
    label: String,
    class: String,
    bbox: [f64; 4],
}

#[derive(Debug, Serialize)]
struct DomePose {
    id: String,
    azimuth: f64,
    elevation: f64,
    stratum: &'static str,
    position: [f64; 3],
    boxes: Vec<DomeBox>,
}

#[derive(Debug, Serialize)]
struct DomeView {
    vessel: String,
    width: u32,
    height: u32,
    focal_px: f64,
    oblique: usize,
    near_nadir: usize,
    poses: Vec<DomePose>,
}

/// Plan for the bundled scene. A negative seed means no jitter.
pub fn dome_json(poses: usize, min_elev: f64, nadir_cutoff: f64, seed: i64) -> Result<String, String> {
    let scene = SceneSpec::sample();
    let params = PlanParams {
        poses,
        min_elevation_deg: min_elev,
        nadir_cutoff_deg: nadir_cutoff,
        jitter_seed: u64::try_from(seed).ok(),
        ..PlanParams::default()
    };
    let plan = generate_plan(&scene, &params).map_err(|e| e.to_string())?;
    let sizes = plan.stratum_sizes();
    let view = DomeView {
        vessel: plan.vessel.clone(),
        width: plan.intrinsics.dims.width,
        height: plan.intrinsics.dims.height,
        focal_px: plan.intrinsics.focal_px,
        oblique: sizes[&Stratum::Oblique],
        near_nadir: sizes[&Stratum::NearNadir],
        poses: plan
            .poses
            .iter()
            .map(|p| DomePose {
                id: p.pose.pose_id.clone(),
                azimuth: p.pose.azimuth_deg,
                elevation: p.pose.elevation_deg,
                stratum: p.stratum.as_str(),
                position: p.camera.position,
                boxes: p
                    .boxes
                    .iter()
                    .map(|b| DomeBox {
                        label: scene.components[b.component].label.clone().unwrap_or_default(),
                        class: plan.classes[b.class_id as usize].clone(),
                        bbox: [b.bbox.x_min, b.bbox.y_min, b.bbox.x_max, b.bbox.y_max],
                    })
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct ClassCurve {
    name: String,
    ap_all_points: Option<f64>,
    ap_interp_101: Option<f64>,
    /// `[recall, precision]` pairs in descending confidence.
    points: Vec<[f64; 2]>,
    envelope: Vec<f64>,
    operating_point: [f64; 3],
    true_positives: usize,
    false_positives: usize,
    ground_truths: usize,
}

#[derive(Debug, Serialize)]
struct PrView {
    map: f64,
    detections: usize,
    classes: Vec<ClassCurve>,
}

/// Synthetic ground truth with a simulated detector: every object is found
/// with probability `recall_rate`, its box displaced by up to `jitter` of its
/// size, and `clutter` false alarms per image are added. Scores fall as the
/// displacement grows.
pub fn pr_demo_json(seed: u64, images: usize, jitter: f64, clutter: f64, recall_rate: f64, iou_threshold: f64) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = ImageDims { width: 640, height: 640 };
    let names = ["ship", "buoy"];
    let vocab = ClassVocabulary::from_names(names).map_err(|e| e.to_string())?;
    let mut records = Vec::new();
    let mut dets = DetectionSet::new("synthetic");
    for i in 0..images.max(1) {
        let id = format!("img_{i:03}");
        let mut boxes = Vec::new();
        for _ in 0..rng.gen_range(1..6) {
            let class_id = rng.gen_range(0..2u32);
            let (w, h) = (rng.gen_range(20.0..160.0), rng.gen_range(20.0..160.0));
            let (x, y) = (rng.gen_range(0.0..640.0 - w), rng.gen_range(0.0..640.0 - h));
            let gt = Box2D::new(x, y, x + w, y + h).map_err(|e| e.to_string())?;
            if rng.gen_bool(recall_rate.clamp(0.0, 1.0)) {
                let shift: f64 = rng.gen_range(0.0..=jitter.max(0.0));
                let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let b = gt.translated(shift * w * angle.cos(), shift * h * angle.sin());
                let score = ((1.0 - shift) * rng.gen_range(0.6..1.0)).clamp(0.01, 1.0);
                dets.push(Detection { image_id: id.clone(), class_id, bbox: b, score });
            }
            boxes.push(GroundTruthBox { class_id, bbox: gt, encoding: SourceEncoding::Pixel });
        }
        let false_alarms = clutter.max(0.0).floor() as usize + usize::from(rng.gen_bool(clutter.max(0.0).fract()));
        for _ in 0..false_alarms {
            let (x, y) = (rng.gen_range(0.0..560.0), rng.gen_range(0.0..560.0));
            let b = Box2D::new(x, y, x + 60.0, y + 60.0).map_err(|e| e.to_string())?;
            dets.push(Detection {
                image_id: id.clone(),
                class_id: rng.gen_range(0..2),
                bbox: b,
                score: rng.gen_range(0.01..0.7),
            });
        }
        records.push(ImageRecord { image_id: id, path: String::new(), dims, boxes, pose_ref: None });
    }
    let manifest = DatasetManifest { split_name: "synthetic".into(), classes: vocab, images: records };
    let cfg = EvalConfig::with_threshold(iou_threshold).map_err(|e| e.to_string())?;
    let report = evaluate(&manifest, &dets, &cfg).map_err(|e| e.to_string())?;
    let classes = report
        .classes
        .iter()
        .map(|c| ClassCurve {
            name: c.name.clone(),
            ap_all_points: c.ap,
            ap_interp_101: c.ap.map(|_| average_precision(&c.curve, ApMode::Interp101)),
            points: c.curve.points.iter().map(|p| [p.recall, p.precision]).collect(),
            envelope: c.curve.envelope(),
            operating_point: [c.operating_point.recall, c.operating_point.precision, c.operating_point.confidence],
            true_positives: c.true_positives,
            false_positives: c.false_positives,
            ground_truths: c.ground_truths,
        })
        .collect();
    let view = PrView { map: report.map, detections: report.counts.detections, classes };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn iou(a: &[f64], b: &[f64]) -> Result<String, JsValue> {
    let view = iou_view(a, b).map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&view).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn dome(poses: usize, min_elev: f64, nadir_cutoff: f64, seed: i32) -> Result<String, JsValue> {
    dome_json(poses, min_elev, nadir_cutoff, seed.into()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn pr_demo(seed: u32, images: usize, jitter: f64, clutter: f64, recall_rate: f64, iou_threshold: f64) -> Result<String, JsValue> {
    pr_demo_json(seed.into(), images, jitter, clutter, recall_rate, iou_threshold).map_err(|e| JsValue::from_str(&e))
}
