//! Test fixtures on disk: stub images and random darknet corpora.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use rand::Rng;

/// Writes the signature and header chunk of a PNG, which is all a dimension
/// probe reads.
pub fn write_png_stub(path: &Path, width: u32, height: u32) {
    let mut bytes = vec![0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
    bytes.extend_from_slice(&13u32.to_be_bytes());
    bytes.extend_from_slice(b"IHDR");
    bytes.extend_from_slice(&width.to_be_bytes());
    bytes.extend_from_slice(&height.to_be_bytes());
    bytes.extend_from_slice(&[8, 2, 0, 0, 0]);
    bytes.extend_from_slice(&[0, 0, 0, 0]);
    fs::write(path, bytes).unwrap();
}

/// Image id, pixel size and `(class, [cx, cy, w, h])` rows.
pub type ExpectedImage = (String, (u32, u32), Vec<(u32, [f64; 4])>);

/// Random darknet dataset under `root/images` and `root/labels`. Returns the
/// expected normalized fields per image id, in file order.
pub fn write_random_darknet<R: Rng>(
    rng: &mut R,
    root: &Path,
    images: usize,
    classes: u32,
) -> Vec<ExpectedImage> {
    let (img_dir, lbl_dir) = (root.join("images"), root.join("labels"));
    fs::create_dir_all(&img_dir).unwrap();
    fs::create_dir_all(&lbl_dir).unwrap();
    let names: String = (0..classes).map(|c| format!("class_{c}\n")).collect();
    fs::write(lbl_dir.join("classes.txt"), names).unwrap();
    (0..images)
        .map(|i| {
            let stem = format!("frame_{i:03}");
            let dims = (rng.gen_range(64..3000), rng.gen_range(64..3000));
            write_png_stub(&img_dir.join(format!("{stem}.png")), dims.0, dims.1);
            let n = rng.gen_range(0..6);
            let boxes: Vec<(u32, [f64; 4])> = (0..n)
                .map(|_| {
                    let w: f64 = rng.gen_range(0.01..0.5);
                    let h: f64 = rng.gen_range(0.01..0.5);
                    let cx = rng.gen_range(w / 2.0..=1.0 - w / 2.0);
                    let cy = rng.gen_range(h / 2.0..=1.0 - h / 2.0);
                    (rng.gen_range(0..classes), [cx, cy, w, h])
                })
                .collect();
            if !boxes.is_empty() || rng.gen_bool(0.5) {
                let text: String = boxes
                    .iter()
                    .map(|(c, f)| format!("{c} {:.8} {:.8} {:.8} {:.8}\n", f[0], f[1], f[2], f[3]))
                    .collect();
                fs::write(lbl_dir.join(format!("{stem}.txt")), text).unwrap();
            }
            let rounded = boxes
                .into_iter()
                .map(|(c, f)| (c, f.map(|v| format!("{v:.8}").parse().unwrap())))
                .collect();
            (stem, dims, rounded)
        })
        .collect()
}
