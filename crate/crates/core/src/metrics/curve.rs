use std::cmp::Ordering;

use serde::de::Deserializer;
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use super::matching::MatchOutcome;
use crate::fixed::Fixed4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub confidence: f64,
    pub precision: f64,
    pub recall: f64,
}

// Written as a compact `[confidence, precision, recall]` triple.
impl Serialize for PrPoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(3)?;
        t.serialize_element(&Fixed4(self.confidence))?;
        t.serialize_element(&Fixed4(self.precision))?;
        t.serialize_element(&Fixed4(self.recall))?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for PrPoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [confidence, precision, recall] = <[f64; 3]>::deserialize(d)?;
        Ok(Self {
            confidence,
            precision,
            recall,
        })
    }
}

/// Cumulative precision/recall, one point per detection in descending confidence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub total_gt: usize,
    pub points: Vec<PrPoint>,
}

impl PrCurve {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Monotone precision envelope: entry `i` is the best precision at any
    /// point from `i` onward.
    pub fn envelope(&self) -> Vec<f64> {
        let mut env: Vec<f64> = self.points.iter().map(|p| p.precision).collect();
        for i in (0..env.len().saturating_sub(1)).rev() {
            env[i] = env[i].max(env[i + 1]);
        }
        env
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApMode {
    /// Area under the precision envelope over every recall step.
    #[default]
    AllPoints,
    /// Mean of the envelope sampled at recall 0, 0.01, ..., 1.
    #[serde(rename = "interp_101")]
    Interp101,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatingPoint {
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub precision: f64,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub recall: f64,
    #[serde(serialize_with = "crate::fixed::serialize")]
    pub confidence: f64,
}

impl OperatingPoint {
    pub fn f1(&self) -> f64 {
        f1(self.precision, self.recall)
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// Pools the verdicts of one class across images into a PR curve.
///
/// Detections are ordered by score descending, then image id, then input
/// index, so the curve does not depend on the order of `outcomes`. A class
/// without ground truth has an empty curve.
pub fn pr_curve(outcomes: &[MatchOutcome], total_gt: usize) -> PrCurve {
    if total_gt == 0 {
        return PrCurve::default();
    }
    let mut pooled: Vec<(&str, usize, f64, bool)> = outcomes
        .iter()
        .flat_map(|o| {
            o.verdicts
                .iter()
                .map(move |v| (o.image_id.as_str(), v.det_index, v.score, v.is_tp()))
        })
        .collect();
    pooled.sort_by(|a, b| {
        b.2.total_cmp(&a.2)
            .then_with(|| a.0.cmp(b.0))
            .then_with(|| a.1.cmp(&b.1))
    });

    let mut tp = 0usize;
    let points = pooled
        .iter()
        .enumerate()
        .map(|(i, &(_, _, score, is_tp))| {
            tp += usize::from(is_tp);
            PrPoint {
                confidence: score,
                precision: tp as f64 / (i + 1) as f64,
                recall: tp as f64 / total_gt as f64,
            }
        })
        .collect();
    PrCurve { total_gt, points }
}

pub fn average_precision(curve: &PrCurve, mode: ApMode) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    let env = curve.envelope();
    let ap = match mode {
        ApMode::AllPoints => {
            let mut prev = 0.0;
            let mut area = 0.0;
            for (p, e) in curve.points.iter().zip(&env) {
                if p.recall > prev {
                    area += (p.recall - prev) * e;
                    prev = p.recall;
                }
            }
            area
        }
        ApMode::Interp101 => {
            let sum: f64 = (0..=100)
                .map(|k| {
                    let r = k as f64 / 100.0;
                    let i = curve.points.partition_point(|p| p.recall < r);
                    env.get(i).copied().unwrap_or(0.0)
                })
                .sum();
            sum / 101.0
        }
    };
    ap.clamp(0.0, 1.0)
}

/// The curve point with the highest F1; ties go to the higher confidence.
pub fn operating_point(curve: &PrCurve) -> OperatingPoint {
    let mut best: Option<(f64, &PrPoint)> = None;
    for p in &curve.points {
        let score = f1(p.precision, p.recall);
        let better = match best {
            None => true,
            Some((b, bp)) => match score.total_cmp(&b) {
                Ordering::Greater => true,
                Ordering::Equal => p.confidence > bp.confidence,
                Ordering::Less => false,
            },
        };
        if better {
            best = Some((score, p));
        }
    }
    best.map_or_else(OperatingPoint::default, |(_, p)| OperatingPoint {
        precision: p.precision,
        recall: p.recall,
        confidence: p.confidence,
    })
}
