use serde::{Deserialize, Serialize};

use crate::annotate::ClassId;
use crate::boxmath::{iou, Box2D};

/// A prediction reduced to what matching needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredBox {
    pub bbox: Box2D,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetVerdict {
    /// Position of the detection in the image's input list.
    pub det_index: usize,
    pub score: f64,
    /// Ground truth claimed by this detection; `None` marks a false positive.
    pub matched_gt: Option<usize>,
    /// IoU with the matched ground truth, 0 for false positives.
    pub iou: f64,
}

impl DetVerdict {
    pub fn is_tp(&self) -> bool {
        self.matched_gt.is_some()
    }
}

/// Matching result for one image and one class. Verdicts are in input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub image_id: String,
    pub class_id: ClassId,
    pub verdicts: Vec<DetVerdict>,
    pub gt_count: usize,
    pub false_negatives: usize,
}

impl MatchOutcome {
    pub fn true_positives(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_tp()).count()
    }

    pub fn false_positives(&self) -> usize {
        self.verdicts.len() - self.true_positives()
    }
}

/// Greedy confidence-ordered matching.
///
/// Detections are visited by descending score, equal scores in input order.
/// Each one claims the still-unmatched ground truth with the highest IoU, provided
/// that IoU is at least `threshold`; otherwise it is a false positive. IoU ties
/// go to the lower ground-truth index.
pub fn match_image(
    image_id: &str,
    class_id: ClassId,
    gts: &[Box2D],
    dets: &[ScoredBox],
    threshold: f64,
) -> MatchOutcome {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));

    let mut taken = vec![false; gts.len()];
    let mut verdicts: Vec<DetVerdict> = dets
        .iter()
        .enumerate()
        .map(|(det_index, d)| DetVerdict {
            det_index,
            score: d.score,
            matched_gt: None,
            iou: 0.0,
        })
        .collect();

    for &di in &order {
        let mut best: Option<(usize, f64)> = None;
        for (gi, gt) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let v = iou(&dets[di].bbox, gt);
            if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((gi, v));
            }
        }
        if let Some((gi, v)) = best {
            taken[gi] = true;
            verdicts[di].matched_gt = Some(gi);
            verdicts[di].iou = v;
        }
    }

    let tp = verdicts.iter().filter(|v| v.is_tp()).count();
    MatchOutcome {
        image_id: image_id.to_owned(),
        class_id,
        verdicts,
        gt_count: gts.len(),
        false_negatives: gts.len() - tp,
    }
}
