//! Report documents and their markdown, CSV and SVG renderings.
//!
//! A report file is JSON with a `kind` tag: `single` for one [`EvalReport`],
//! `stratified` for a [`StratifiedReport`]. Metric values are written with four
//! decimals.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::metrics::{EvalReport, StratifiedReport, ALL_STRATUM};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportDocument {
    Single(EvalReport),
    Stratified(StratifiedReport),
}

impl ReportDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `(stratum name, report)` pairs with `all` first, then the others by name.
    pub fn strata(&self) -> Vec<(&str, &EvalReport)> {
        match self {
            Self::Single(r) => vec![(ALL_STRATUM, r)],
            Self::Stratified(s) => {
                let mut out: Vec<(&str, &EvalReport)> = s
                    .strata
                    .iter()
                    .map(|(k, v)| (k.as_str(), v))
                    .collect();
                out.sort_by_key(|(k, _)| (*k != ALL_STRATUM, *k));
                out
            }
        }
    }

    pub fn primary(&self) -> &EvalReport {
        match self {
            Self::Single(r) => r,
            Self::Stratified(s) => s.all(),
        }
    }
}

fn f4(v: f64) -> String {
    format!("{:.4}", if v.abs() < 5e-5 { 0.0 } else { v })
}

pub fn render_markdown(doc: &ReportDocument) -> String {
    let mut out = String::new();
    let primary = doc.primary();
    let _ = writeln!(
        out,
        "# Detection evaluation\n\nIoU threshold {}, AP mode `{}`, {}.\n",
        f4(primary.config.iou_threshold),
        serde_json::to_value(primary.config.ap_mode)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default(),
        primary.tool
    );
    out.push_str("| stratum | images | ground truths | detections | mAP | precision | recall | confidence |\n");
    out.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
    for (name, r) in doc.strata() {
        let marker = if r.empty { " (no ground truth)" } else { "" };
        let _ = writeln!(
            out,
            "| {name}{marker} | {} | {} | {} | {} | {} | {} | {} |",
            r.counts.images,
            r.counts.ground_truths,
            r.counts.detections,
            f4(r.map),
            f4(r.pooled.precision),
            f4(r.pooled.recall),
            f4(r.pooled.confidence),
        );
    }
    out.push_str("\n## Per class\n\n");
    out.push_str("| stratum | class | ground truths | TP | FP | AP | precision | recall |\n");
    out.push_str("|---|---|---:|---:|---:|---:|---:|---:|\n");
    for (name, r) in doc.strata() {
        for c in &r.classes {
            let _ = writeln!(
                out,
                "| {name} | {} | {} | {} | {} | {} | {} | {} |",
                c.name,
                c.ground_truths,
                c.true_positives,
                c.false_positives,
                c.ap.map_or_else(|| "n/a".to_owned(), f4),
                f4(c.operating_point.precision),
                f4(c.operating_point.recall),
            );
        }
    }
    out
}

/// One row per class per stratum.
pub fn render_csv(doc: &ReportDocument) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "stratum",
        "class_id",
        "class_name",
        "ground_truths",
        "detections",
        "true_positives",
        "false_positives",
        "ap",
        "precision",
        "recall",
        "confidence",
    ])
    .expect("in-memory write");
    for (name, r) in doc.strata() {
        for c in &r.classes {
            w.write_record([
                name.to_owned(),
                c.class_id.to_string(),
                c.name.clone(),
                c.ground_truths.to_string(),
                c.detections.to_string(),
                c.true_positives.to_string(),
                c.false_positives.to_string(),
                c.ap.map(f4).unwrap_or_default(),
                f4(c.operating_point.precision),
                f4(c.operating_point.recall),
                f4(c.operating_point.confidence),
            ])
            .expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

const PALETTE: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Precision/recall curves of the `all` stratum on the unit square, one
/// polyline per class that has curve points.
pub fn render_svg(doc: &ReportDocument) -> String {
    const SIZE: f64 = 400.0;
    const MARGIN: f64 = 50.0;
    let x = |r: f64| MARGIN + r * SIZE;
    let y = |p: f64| MARGIN + (1.0 - p) * SIZE;
    let total = SIZE + 2.0 * MARGIN;
    let report = doc.primary();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total}" height="{total}" viewBox="0 0 {total} {total}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{total}" height="{total}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<g class="axes" stroke="black" fill="none"><rect x="{MARGIN}" y="{MARGIN}" width="{SIZE}" height="{SIZE}"/></g>"#
    );
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{t:.2}</text>"#,
            x(t),
            MARGIN + SIZE + 18.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{t:.2}</text>"#,
            MARGIN - 6.0,
            y(t) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">recall</text>"#,
        MARGIN + SIZE / 2.0,
        total - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">precision</text>"#,
        MARGIN + SIZE / 2.0,
        MARGIN + SIZE / 2.0
    );
    for (i, c) in report.classes.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            MARGIN + 8.0,
            MARGIN + SIZE - 10.0 - 14.0 * (report.classes.len() - 1 - i) as f64,
            escape_xml(&format!(
                "{} AP {}",
                c.name,
                c.ap.map_or_else(|| "n/a".to_owned(), f4)
            ))
        );
        if c.curve.points.is_empty() {
            continue;
        }
        let pts: Vec<String> = c
            .curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.recall), y(p.precision)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="pr" data-class="{}" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            escape_xml(&c.name),
            pts.join(" ")
        );
    }
    s.push_str("</svg>\n");
    s
}
