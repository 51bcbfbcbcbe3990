//! Detection matching, precision/recall curves, AP/mAP and stratified
//! evaluation at a configurable IoU threshold.

mod curve;
mod matching;

use std::collections::{BTreeMap, BTreeSet};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::annotate::{ClassId, DatasetManifest, Detection, DetectionSet, ImageRecord};
use crate::boxmath::Box2D;

pub use curve::{average_precision, operating_point, pr_curve, ApMode, OperatingPoint, PrCurve, PrPoint};
pub use matching::{match_image, DetVerdict, MatchOutcome, ScoredBox};

/// Name of the stratum that covers every image.
pub const ALL_STRATUM: &str = "all";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("IoU threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("the ground-truth manifest has no images")]
    EmptyManifest,
    #[error("image id {0:?} appears more than once in the manifest")]
    DuplicateImageId(String),
    #[error("detections reference image {0:?}, which is not in the manifest")]
    UnknownImageId(String),
    #[error("class id {class_id} on image {image_id:?} is not in the class vocabulary")]
    UnknownClassId { image_id: String, class_id: ClassId },
    #[error("stratum name {0:?} is reserved")]
    ReservedStratum(String),
    #[error("stratum {stratum:?} lists image {image_id:?}, which is not in the manifest")]
    UnknownStratumImage { stratum: String, image_id: String },
    #[error("image {image_id:?} is in both stratum {first:?} and stratum {second:?}")]
    OverlappingStrata {
        image_id: String,
        first: String,
        second: String,
    },
    #[error("{count} image(s) belong to no stratum, e.g. {example:?}")]
    UncoveredImages { count: usize, example: String },
}

impl EvalError {
    /// True for errors caused by the stratum definition rather than the inputs.
    pub fn is_stratum_violation(&self) -> bool {
        matches!(
            self,
            Self::ReservedStratum(_)
                | Self::UnknownStratumImage { .. }
                | Self::OverlappingStrata { .. }
                | Self::UncoveredImages { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingPointRule {
    #[default]
    MaxF1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
    pub operating_point_rule: OperatingPointRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_filter: Option<BTreeSet<ClassId>>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.5,
            ap_mode: ApMode::AllPoints,
            operating_point_rule: OperatingPointRule::MaxF1,
            class_filter: None,
        }
    }
}

impl EvalConfig {
    pub fn with_threshold(iou_threshold: f64) -> Result<Self, EvalError> {
        let cfg = Self {
            iou_threshold,
            ..Self::default()
        };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), EvalError> {
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return Err(EvalError::InvalidThreshold(self.iou_threshold));
        }
        Ok(())
    }

    fn includes(&self, class_id: ClassId) -> bool {
        self.class_filter
            .as_ref()
            .is_none_or(|f| f.contains(&class_id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub images: usize,
    pub ground_truths: usize,
    pub detections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: ClassId,
    pub name: String,
    pub ground_truths: usize,
    pub detections: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    /// `None` when the class has no ground truth in the evaluated images.
    #[serde(serialize_with = "crate::fixed::option::serialize")]
    pub ap: Option<f64>,
    pub operating_point: OperatingPoint,
    pub curve: PrCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tool: String,
    pub config: EvalConfig,
    pub counts: Counts,
    /// Mean AP over classes with at least one ground-truth box.
    #[serde(rename = "map", serialize_with = "crate::fixed::serialize")]
    pub map: f64,
    /// Operating point of the curve pooled over all evaluated classes.
    pub pooled: OperatingPoint,
    /// Set when no evaluated class has ground truth, so `map` is vacuous.
    pub empty: bool,
    pub classes: Vec<ClassReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedReport {
    pub strata: BTreeMap<String, EvalReport>,
}

impl StratifiedReport {
    pub fn all(&self) -> &EvalReport {
        &self.strata[ALL_STRATUM]
    }
}

pub fn tool_id() -> String {
    format!("detbench {}", env!("CARGO_PKG_VERSION"))
}

fn check_references(manifest: &DatasetManifest, dets: &DetectionSet) -> Result<(), EvalError> {
    let mut seen = BTreeSet::new();
    for rec in &manifest.images {
        if !seen.insert(rec.image_id.as_str()) {
            return Err(EvalError::DuplicateImageId(rec.image_id.clone()));
        }
        if let Some(gt) = rec.boxes.iter().find(|b| !manifest.classes.contains(b.class_id)) {
            return Err(EvalError::UnknownClassId {
                image_id: rec.image_id.clone(),
                class_id: gt.class_id,
            });
        }
    }
    for (image_id, group) in dets.groups() {
        if !seen.contains(image_id.as_str()) {
            return Err(EvalError::UnknownImageId(image_id.clone()));
        }
        if let Some(d) = group.iter().find(|d| !manifest.classes.contains(d.class_id)) {
            return Err(EvalError::UnknownClassId {
                image_id: image_id.clone(),
                class_id: d.class_id,
            });
        }
    }
    Ok(())
}

/// Matches every evaluated class on one image. Verdict indices refer to the
/// image's full detection list.
fn match_record(
    rec: &ImageRecord,
    dets: &[Detection],
    classes: &[ClassId],
    threshold: f64,
) -> Vec<MatchOutcome> {
    classes
        .iter()
        .map(|&class_id| {
            let gts: Vec<Box2D> = rec
                .boxes
                .iter()
                .filter(|b| b.class_id == class_id)
                .map(|b| b.bbox)
                .collect();
            let (index, scored): (Vec<usize>, Vec<ScoredBox>) = dets
                .iter()
                .enumerate()
                .filter(|(_, d)| d.class_id == class_id)
                .map(|(i, d)| {
                    (
                        i,
                        ScoredBox {
                            bbox: d.bbox,
                            score: d.score,
                        },
                    )
                })
                .unzip();
            let mut outcome = match_image(&rec.image_id, class_id, &gts, &scored, threshold);
            for v in &mut outcome.verdicts {
                v.det_index = index[v.det_index];
            }
            outcome
        })
        .collect()
}

fn build_report(
    manifest: &DatasetManifest,
    dets: &DetectionSet,
    cfg: &EvalConfig,
) -> EvalReport {
    let classes: Vec<ClassId> = manifest.classes.ids().filter(|&c| cfg.includes(c)).collect();

    #[cfg(feature = "parallel")]
    let iter = manifest.images.par_iter();
    #[cfg(not(feature = "parallel"))]
    let iter = manifest.images.iter();
    let per_image: Vec<Vec<MatchOutcome>> = iter
        .map(|rec| match_record(rec, dets.for_image(&rec.image_id), &classes, cfg.iou_threshold))
        .collect();

    let mut by_class: BTreeMap<ClassId, Vec<MatchOutcome>> = BTreeMap::new();
    for outcome in per_image.into_iter().flatten() {
        by_class.entry(outcome.class_id).or_default().push(outcome);
    }

    let mut class_reports = Vec::with_capacity(classes.len());
    let mut counts = Counts {
        images: manifest.images.len(),
        ..Counts::default()
    };
    for &class_id in &classes {
        let outcomes = by_class.get(&class_id).map_or(&[][..], Vec::as_slice);
        let gts: usize = outcomes.iter().map(|o| o.gt_count).sum();
        let tp: usize = outcomes.iter().map(MatchOutcome::true_positives).sum();
        let fp: usize = outcomes.iter().map(MatchOutcome::false_positives).sum();
        let curve = pr_curve(outcomes, gts);
        counts.ground_truths += gts;
        counts.detections += tp + fp;
        class_reports.push(ClassReport {
            class_id,
            name: manifest.classes.name(class_id).unwrap_or_default().to_owned(),
            ground_truths: gts,
            detections: tp + fp,
            true_positives: tp,
            false_positives: fp,
            ap: (gts > 0).then(|| average_precision(&curve, cfg.ap_mode)),
            operating_point: operating_point(&curve),
            curve,
        });
    }

    let aps: Vec<f64> = class_reports.iter().filter_map(|c| c.ap).collect();
    let map = if aps.is_empty() {
        0.0
    } else {
        aps.iter().sum::<f64>() / aps.len() as f64
    };
    let all_outcomes: Vec<MatchOutcome> = by_class.into_values().flatten().collect();
    let pooled = operating_point(&pr_curve(&all_outcomes, counts.ground_truths));

    EvalReport {
        tool: tool_id(),
        config: cfg.clone(),
        counts,
        map,
        pooled,
        empty: aps.is_empty(),
        classes: class_reports,
    }
}

/// Evaluates detections against a manifest.
pub fn evaluate(
    manifest: &DatasetManifest,
    dets: &DetectionSet,
    cfg: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    cfg.check()?;
    if manifest.images.is_empty() {
        return Err(EvalError::EmptyManifest);
    }
    check_references(manifest, dets)?;
    Ok(build_report(manifest, dets, cfg))
}

/// Evaluates every stratum separately plus the `all` stratum.
///
/// Strata must be disjoint and together cover every manifest image. A stratum
/// without ground truth gets a report with `empty` set and mAP 0.
pub fn stratified_evaluate(
    manifest: &DatasetManifest,
    dets: &DetectionSet,
    strata: &BTreeMap<String, BTreeSet<String>>,
    cfg: &EvalConfig,
) -> Result<StratifiedReport, EvalError> {
    let all = evaluate(manifest, dets, cfg)?;

    let ids = manifest.image_ids();
    let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
    for (name, members) in strata {
        if name == ALL_STRATUM {
            return Err(EvalError::ReservedStratum(name.clone()));
        }
        for image_id in members {
            if !ids.contains(image_id.as_str()) {
                return Err(EvalError::UnknownStratumImage {
                    stratum: name.clone(),
                    image_id: image_id.clone(),
                });
            }
            if let Some(first) = owner.insert(image_id, name) {
                return Err(EvalError::OverlappingStrata {
                    image_id: image_id.clone(),
                    first: first.to_owned(),
                    second: name.clone(),
                });
            }
        }
    }
    let uncovered: Vec<&str> = ids.iter().filter(|i| !owner.contains_key(*i)).copied().collect();
    if let Some(first) = uncovered.first() {
        return Err(EvalError::UncoveredImages {
            count: uncovered.len(),
            example: (*first).to_owned(),
        });
    }

    let mut reports = BTreeMap::new();
    for (name, members) in strata {
        let sub = manifest.subset(members);
        let sub_dets = dets.subset(members);
        reports.insert(name.clone(), build_report(&sub, &sub_dets, cfg));
    }
    reports.insert(ALL_STRATUM.to_owned(), all);
    Ok(StratifiedReport { strata: reports })
}
