mod support;

use std::fs;

use detbench::annotate::darknet::{write_yolo_labels, CLASSES_FILE};
use detbench::annotate::{
    encode_yolo_line, load_yolo_dataset, parse_coco, parse_detections, parse_manifest,
    parse_yolo_line, validate_manifest, write_coco, write_detections, write_manifest,
    ClassVocabulary, DarknetError, DatasetManifest, Detection, DetectionSet, ExchangeError,
};
use detbench::boxmath::{pixel_to_norm, Box2D, ImageDims};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{write_png_stub, write_random_darknet};

fn vocab(k: u32) -> ClassVocabulary {
    ClassVocabulary::from_names((0..k).map(|c| format!("class_{c}"))).unwrap()
}

fn load(root: &std::path::Path, k: u32) -> Result<DatasetManifest, DarknetError> {
    load_yolo_dataset(&root.join("images"), &root.join("labels"), vocab(k))
}

fn assert_close(a: &DatasetManifest, b: &DatasetManifest, tol: f64) {
    assert_eq!(a.images.len(), b.images.len());
    assert_eq!(a.box_count(), b.box_count());
    for (x, y) in a.images.iter().zip(&b.images) {
        assert_eq!(x.image_id, y.image_id);
        assert_eq!(x.dims, y.dims);
        assert_eq!(x.boxes.len(), y.boxes.len());
        for (p, q) in x.boxes.iter().zip(&y.boxes) {
            assert_eq!(p.class_id, q.class_id);
            let (p, q) = (p.bbox, q.bbox);
            for (u, v) in [(p.x_min, q.x_min), (p.y_min, q.y_min), (p.x_max, q.x_max), (p.y_max, q.y_max)] {
                assert!((u - v).abs() <= tol, "{u} vs {v}");
            }
        }
    }
}

#[test]
fn two_images_with_three_and_zero_boxes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("train");
    fs::create_dir_all(root.join("images")).unwrap();
    fs::create_dir_all(root.join("labels")).unwrap();
    write_png_stub(&root.join("images/a.png"), 640, 480);
    write_png_stub(&root.join("images/b.png"), 100, 100);
    fs::write(
        root.join("labels/a.txt"),
        "0 0.5 0.5 0.2 0.2\n1 0.1 0.1 0.1 0.1\n\n0 0.95 0.9 0.2 0.2\n",
    )
    .unwrap();
    let m = load(&root, 2).unwrap();
    assert_eq!(m.split_name, "train");
    assert_eq!(m.images.len(), 2);
    assert_eq!(m.images[0].boxes.len(), 3);
    assert_eq!(m.images[0].dims, ImageDims::new(640, 480).unwrap());
    assert_eq!(m.images[0].boxes[0].bbox, Box2D::new(256.0, 192.0, 384.0, 288.0).unwrap());
    assert!(m.images[1].boxes.is_empty());
    // The last box reaches past the image corner and is reported, not clipped.
    let v = validate_manifest(&m);
    assert_eq!(v.len(), 1);
    assert!(v[0].to_string().contains("outside the image"));
}

#[test]
fn empty_directories_give_empty_manifest() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir_all(dir.path().join("images")).unwrap();
    fs::create_dir_all(dir.path().join("labels")).unwrap();
    let m = load(dir.path(), 1).unwrap();
    assert!(m.images.is_empty());
}

#[test]
fn duplicate_stems_and_orphans_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir_all(root.join("images")).unwrap();
    fs::create_dir_all(root.join("labels")).unwrap();
    write_png_stub(&root.join("images/a.png"), 10, 10);
    fs::write(root.join("labels/a.txt"), "").unwrap();
    fs::write(root.join("labels/a.TXT"), "").unwrap();
    assert!(matches!(load(root, 1), Err(DarknetError::DuplicateStem { .. })));

    fs::remove_file(root.join("labels/a.TXT")).unwrap();
    fs::write(root.join("labels/ghost.txt"), "0 0.5 0.5 0.1 0.1\n").unwrap();
    assert!(matches!(load(root, 1), Err(DarknetError::OrphanLabel(_))));
}

#[test]
fn malformed_line_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    fs::create_dir_all(root.join("images")).unwrap();
    fs::create_dir_all(root.join("labels")).unwrap();
    write_png_stub(&root.join("images/a.png"), 10, 10);
    fs::write(root.join("labels/a.txt"), "0 0.5 0.5 0.1 0.1\n0 0.5 0.5 0.1\n").unwrap();
    let err = load(root, 1).unwrap_err();
    assert!(matches!(err, DarknetError::Line { line: 2, .. }));
    assert!(err.to_string().contains("a.txt:2"));
}

#[test]
fn loading_is_independent_of_creation_order() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let files: Vec<(String, String)> = (0..20)
        .map(|i| (format!("img_{i:02}"), format!("{} 0.5 0.5 0.25 0.5\n", i % 3)))
        .collect();
    for (root, order) in [(a.path(), files.clone()), (b.path(), files.iter().rev().cloned().collect())] {
        fs::create_dir_all(root.join("images")).unwrap();
        fs::create_dir_all(root.join("labels")).unwrap();
        for (stem, text) in &order {
            write_png_stub(&root.join(format!("images/{stem}.png")), 64, 32);
            fs::write(root.join(format!("labels/{stem}.txt")), text).unwrap();
        }
    }
    let (ma, mb) = (load(a.path(), 3).unwrap(), load(b.path(), 3).unwrap());
    let ids = |m: &DatasetManifest| m.images.iter().map(|r| r.image_id.clone()).collect::<Vec<_>>();
    assert_eq!(ids(&ma), ids(&mb));
    assert_close(&ma, &mb, 0.0);
}

#[test]
fn fuzzed_corpus_survives_every_format() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let dir = tempfile::tempdir().unwrap();
    let expected = write_random_darknet(&mut rng, dir.path(), 50, 4);
    let from_darknet = load(dir.path(), 4).unwrap();
    assert!(validate_manifest(&from_darknet).is_empty());

    for (rec, (stem, dims, boxes)) in from_darknet.images.iter().zip(&expected) {
        assert_eq!(&rec.image_id, stem);
        assert_eq!((rec.dims.width, rec.dims.height), *dims);
        for (gt, (class, f)) in rec.boxes.iter().zip(boxes) {
            let n = pixel_to_norm(&gt.bbox, rec.dims).unwrap();
            assert_eq!(gt.class_id, *class);
            for (u, v) in [n.cx, n.cy, n.w, n.h].iter().zip(f) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    let native = parse_manifest(&write_manifest(&from_darknet)).unwrap();
    assert_close(&from_darknet, &native, 1e-6);
    let coco = parse_coco(&write_coco(&native)).unwrap();
    assert_close(&native, &coco, 1e-6);
    let back = parse_manifest(&write_manifest(&coco)).unwrap();
    assert_close(&from_darknet, &back, 1e-6);

    let out = tempfile::tempdir().unwrap();
    write_yolo_labels(&back, out.path()).unwrap();
    assert!(out.path().join(CLASSES_FILE).exists());
    let reparsed = load_yolo_dataset(&dir.path().join("images"), out.path(), vocab(4)).unwrap();
    assert_close(&from_darknet, &reparsed, 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn yolo_line_round_trip(
        class in 0u32..80,
        w in 0.001..=1.0f64,
        h in 0.001..=1.0f64,
        fx in 0.0..=1.0f64,
        fy in 0.0..=1.0f64,
        dw in 1u32..4000,
        dh in 1u32..4000,
    ) {
        let dims = ImageDims::new(dw, dh).unwrap();
        let (cx, cy) = (w / 2.0 + fx * (1.0 - w), h / 2.0 + fy * (1.0 - h));
        let line = format!("{class} {cx} {cy} {w} {h}");
        let gt = parse_yolo_line(&line, dims).unwrap();
        let again = parse_yolo_line(&encode_yolo_line(&gt, dims).unwrap(), dims).unwrap();
        let n = pixel_to_norm(&again.bbox, dims).unwrap();
        prop_assert_eq!(again.class_id, class);
        for (u, v) in [n.cx, n.cy, n.w, n.h].iter().zip([cx, cy, w, h]) {
            prop_assert!((u - v).abs() < 1e-6);
        }
    }

    #[test]
    fn exchange_parser_never_yields_invalid_detections(
        lines in prop::collection::vec(exchange_line(), 0..12)
    ) {
        let text = lines.join("\n");
        match parse_detections(&text) {
            Ok(set) => {
                for d in set.iter() {
                    prop_assert!((0.0..=1.0).contains(&d.score));
                    prop_assert!(d.bbox.is_valid());
                    prop_assert!(!d.image_id.is_empty());
                }
                let again = parse_detections(&write_detections(&set)).unwrap();
                prop_assert_eq!(again, set);
            }
            Err(ExchangeError::Malformed { line, .. } | ExchangeError::ScoreOutOfRange { line, .. }) => {
                prop_assert!(line >= 1 && line <= lines.len().max(1));
            }
        }
    }
}

fn number() -> impl Strategy<Value = String> {
    prop_oneof![
        (-50.0..700.0f64).prop_map(|v| v.to_string()),
        (0u32..700).prop_map(|v| v.to_string()),
        Just("NaN".to_owned()),
        Just("1e400".to_owned()),
        Just("\"3\"".to_owned()),
        Just("null".to_owned()),
    ]
}

fn exchange_line() -> impl Strategy<Value = String> {
    prop_oneof![
        4 => (
            prop_oneof![Just("img_a"), Just("img_b"), Just("")],
            prop_oneof![Just("0".to_owned()), Just("2".to_owned()), Just("-1".to_owned()), Just("1.5".to_owned())],
            prop::collection::vec(number(), 3..=5),
            prop_oneof![(-0.5..1.5f64).prop_map(|v| v.to_string()), Just("1".to_owned()), Just("NaN".to_owned())],
        )
            .prop_map(|(id, c, b, s)| format!(
                r#"{{"image_id": "{id}", "class_id": {c}, "bbox": [{}], "score": {s}}}"#,
                b.join(", ")
            )),
        1 => Just(String::new()),
        1 => Just(r#"{"producer": "stub"}"#.to_owned()),
        1 => "[ -~]{0,30}",
    ]
}

#[test]
fn exchange_round_trip_keeps_groups_and_order() {
    let mut set = DetectionSet::new("stub detector");
    for (i, id) in ["b", "a", "b", "a"].iter().enumerate() {
        set.push(Detection {
            image_id: (*id).to_owned(),
            class_id: i as u32,
            bbox: Box2D::new(1.0, 2.0, 3.5, 4.25).unwrap(),
            score: 0.125 * i as f64,
        });
    }
    let text = write_detections(&set);
    assert!(text.starts_with("{\"producer\":\"stub detector\"}\n"));
    let back = parse_detections(&text).unwrap();
    assert_eq!(back, set);
    assert_eq!(back.for_image("b")[1].class_id, 2);
}
