//! Independent reference computations for tests. Nothing here calls into the
//! matching, curve or AP code under test.
#![allow(dead_code)]

use rand::Rng;

/// Box as plain corners, kept separate from the library type on purpose.
pub type Corners = [f64; 4];

/// IoU by counting unit cells of an integer grid after scaling by `scale`.
/// Exact for boxes whose scaled corners are integers.
pub fn raster_iou(a: Corners, b: Corners, scale: f64) -> f64 {
    let s = |v: f64| (v * scale).round() as i64;
    let (a, b) = ([s(a[0]), s(a[1]), s(a[2]), s(a[3])], [s(b[0]), s(b[1]), s(b[2]), s(b[3])]);
    let x0 = a[0].min(b[0]);
    let y0 = a[1].min(b[1]);
    let x1 = a[2].max(b[2]);
    let y1 = a[3].max(b[3]);
    let inside = |r: &[i64; 4], x: i64, y: i64| x >= r[0] && x < r[2] && y >= r[1] && y < r[3];
    let (mut inter, mut union) = (0u64, 0u64);
    for y in y0..y1 {
        for x in x0..x1 {
            let (ia, ib) = (inside(&a, x, y), inside(&b, x, y));
            inter += u64::from(ia && ib);
            union += u64::from(ia || ib);
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone)]
pub struct OracleDet {
    pub image: usize,
    pub class: u32,
    pub bbox: Corners,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct OracleGt {
    pub image: usize,
    pub class: u32,
    pub bbox: Corners,
}

/// A small random evaluation problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub images: usize,
    pub classes: u32,
    pub gts: Vec<OracleGt>,
    pub dets: Vec<OracleDet>,
}

pub fn image_name(i: usize) -> String {
    format!("img{i:02}")
}

fn plain_iou(a: &Corners, b: &Corners) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

fn random_box<R: Rng>(rng: &mut R, near: Option<&Corners>) -> Corners {
    match near {
        Some(g) => {
            let j = |r: &mut R| r.gen_range(-4i32..=4) as f64;
            let x0 = (g[0] + j(rng)).max(0.0);
            let y0 = (g[1] + j(rng)).max(0.0);
            let x1 = (g[2] + j(rng)).max(x0 + 1.0);
            let y1 = (g[3] + j(rng)).max(y0 + 1.0);
            [x0, y0, x1, y1]
        }
        None => {
            let x0 = rng.gen_range(0..40) as f64;
            let y0 = rng.gen_range(0..40) as f64;
            let w = rng.gen_range(2..20) as f64;
            let h = rng.gen_range(2..20) as f64;
            [x0, y0, x0 + w, y0 + h]
        }
    }
}

/// Random instance with at most `max_dets` detections, `max_gts` ground truths
/// and `max_classes` classes over up to four images. Scores are drawn from a
/// coarse grid so ties happen.
pub fn random_instance<R: Rng>(rng: &mut R, max_dets: usize, max_gts: usize, max_classes: u32) -> Instance {
    let images = rng.gen_range(1..=4);
    let classes = rng.gen_range(1..=max_classes);
    let n_gt = rng.gen_range(0..=max_gts);
    let gts: Vec<OracleGt> = (0..n_gt)
        .map(|_| OracleGt {
            image: rng.gen_range(0..images),
            class: rng.gen_range(0..classes),
            bbox: random_box(rng, None),
        })
        .collect();
    let n_det = rng.gen_range(0..=max_dets);
    let dets = (0..n_det)
        .map(|_| {
            let near = if !gts.is_empty() && rng.gen_bool(0.7) {
                Some(&gts[rng.gen_range(0..gts.len())])
            } else {
                None
            };
            let (image, class, bbox) = match near {
                Some(g) => {
                    let class = if rng.gen_bool(0.9) { g.class } else { rng.gen_range(0..classes) };
                    (g.image, class, random_box(rng, Some(&g.bbox)))
                }
                None => (
                    rng.gen_range(0..images),
                    rng.gen_range(0..classes),
                    random_box(rng, None),
                ),
            };
            OracleDet {
                image,
                class,
                bbox,
                score: rng.gen_range(0..=20) as f64 / 20.0,
            }
        })
        .collect();
    Instance {
        images,
        classes,
        gts,
        dets,
    }
}

/// Greedy re-simulation: returns, per detection in input order, whether it is
/// a true positive. Written against the textual rule, sharing no code with the
/// library matcher.
pub fn resimulate_tp(inst: &Instance, threshold: f64) -> Vec<bool> {
    let mut tp = vec![false; inst.dets.len()];
    for image in 0..inst.images {
        for class in 0..inst.classes {
            let gts: Vec<&Corners> = inst
                .gts
                .iter()
                .filter(|g| g.image == image && g.class == class)
                .map(|g| &g.bbox)
                .collect();
            let mut det_idx: Vec<usize> = (0..inst.dets.len())
                .filter(|&i| inst.dets[i].image == image && inst.dets[i].class == class)
                .collect();
            // Insertion sort: stable, descending score.
            for i in 1..det_idx.len() {
                let mut j = i;
                while j > 0 && inst.dets[det_idx[j - 1]].score < inst.dets[det_idx[j]].score {
                    det_idx.swap(j - 1, j);
                    j -= 1;
                }
            }
            let mut used = vec![false; gts.len()];
            for &d in &det_idx {
                let mut best = -1.0;
                let mut pick = None;
                for (g, gb) in gts.iter().enumerate() {
                    let v = plain_iou(&inst.dets[d].bbox, gb);
                    if !used[g] && v >= threshold && v > best {
                        best = v;
                        pick = Some(g);
                    }
                }
                if let Some(g) = pick {
                    used[g] = true;
                    tp[d] = true;
                }
            }
        }
    }
    tp
}

/// Per-prefix precision and recall for one class, recomputed from scratch at
/// every cut-off.
fn prefix_pr(inst: &Instance, tp: &[bool], class: u32, n_gt: usize) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..inst.dets.len())
        .filter(|&i| inst.dets[i].class == class)
        .collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&inst.dets[a], &inst.dets[b]);
        db.score
            .partial_cmp(&da.score)
            .unwrap()
            .then(image_name(da.image).cmp(&image_name(db.image)))
            .then(a.cmp(&b))
    });
    (1..=order.len())
        .map(|k| {
            let hits = order[..k].iter().filter(|&&i| tp[i]).count();
            (hits as f64 / k as f64, hits as f64 / n_gt as f64)
        })
        .collect()
}

fn envelope_at(pr: &[(f64, f64)], r: f64) -> f64 {
    pr.iter()
        .filter(|(_, rec)| *rec >= r)
        .map(|(p, _)| *p)
        .fold(0.0, f64::max)
}

/// Area under the precision envelope, integrated interval by interval with
/// the envelope evaluated at each interval midpoint.
pub fn brute_ap_all_points(pr: &[(f64, f64)]) -> f64 {
    let mut cuts: Vec<f64> = pr.iter().map(|(_, r)| *r).collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    cuts.windows(2)
        .map(|w| (w[1] - w[0]) * envelope_at(pr, (w[0] + w[1]) / 2.0))
        .sum()
}

pub fn brute_ap_interp101(pr: &[(f64, f64)]) -> f64 {
    (0..=100).map(|k| envelope_at(pr, k as f64 / 100.0)).sum::<f64>() / 101.0
}

/// Per-class APs (None for classes without ground truth) under both modes.
pub fn brute_class_aps(inst: &Instance, threshold: f64) -> Vec<Option<(f64, f64)>> {
    let tp = resimulate_tp(inst, threshold);
    (0..inst.classes)
        .map(|c| {
            let n_gt = inst.gts.iter().filter(|g| g.class == c).count();
            if n_gt == 0 {
                return None;
            }
            let pr = prefix_pr(inst, &tp, c, n_gt);
            Some((brute_ap_all_points(&pr), brute_ap_interp101(&pr)))
        })
        .collect()
}

/// Builds the library inputs for an instance: images `img00..`, 100x100 pixels,
/// classes `c0..`.
pub fn to_library(inst: &Instance) -> (detbench::annotate::DatasetManifest, detbench::annotate::DetectionSet) {
    use detbench::annotate::{
        ClassVocabulary, DatasetManifest, Detection, DetectionSet, GroundTruthBox, ImageRecord,
        SourceEncoding,
    };
    use detbench::boxmath::{Box2D, ImageDims};

    let b = |c: &Corners| Box2D::new(c[0], c[1], c[2], c[3]).unwrap();
    let images = (0..inst.images)
        .map(|i| ImageRecord {
            image_id: image_name(i),
            path: format!("{}.png", image_name(i)),
            dims: ImageDims::new(100, 100).unwrap(),
            boxes: inst
                .gts
                .iter()
                .filter(|g| g.image == i)
                .map(|g| GroundTruthBox {
                    class_id: g.class,
                    bbox: b(&g.bbox),
                    encoding: SourceEncoding::Pixel,
                })
                .collect(),
            pose_ref: None,
        })
        .collect();
    let manifest = DatasetManifest {
        split_name: "fuzz".into(),
        classes: ClassVocabulary::from_names((0..inst.classes).map(|c| format!("c{c}"))).unwrap(),
        images,
    };
    let mut dets = DetectionSet::new("fuzz");
    for d in &inst.dets {
        dets.push(Detection {
            image_id: image_name(d.image),
            class_id: d.class,
            bbox: b(&d.bbox),
            score: d.score,
        });
    }
    (manifest, dets)
}
