//! File plumbing shared by the subcommands.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use detbench::annotate::darknet::CLASSES_FILE;
use detbench::annotate::native::MANIFEST_FORMAT;
use detbench::annotate::{load_yolo_dataset, parse_coco, parse_manifest, ClassVocabulary, DatasetManifest};

/// Exit status of a failed command: 2 for unreadable or malformed input, 3 for
/// input that parses but breaks a rule.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub error: anyhow::Error,
}

pub const INPUT_ERROR: i32 = 2;
pub const VIOLATION: i32 = 3;

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self {
            code: INPUT_ERROR,
            error: e.into(),
        }
    }
}

pub fn violation(error: anyhow::Error) -> Failure {
    Failure {
        code: VIOLATION,
        error,
    }
}

pub fn verbose() -> bool {
    std::env::var("DETBENCH_VERBOSE").is_ok_and(|v| !v.is_empty() && v != "0")
}

/// Writes through a temporary file in the target directory, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())?;
    tmp.persist(path)
        .map_err(|e| anyhow!(e.error))
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Fails when two of the named paths are the same file.
pub fn ensure_distinct(paths: &[(&str, &Path)]) -> Result<()> {
    let norm = |p: &Path| -> PathBuf {
        fs::canonicalize(p).unwrap_or_else(|_| {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            fs::canonicalize(parent)
                .map(|d| d.join(p.file_name().unwrap_or_default()))
                .unwrap_or_else(|_| p.to_path_buf())
        })
    };
    for (i, (a, pa)) in paths.iter().enumerate() {
        for (b, pb) in &paths[i + 1..] {
            if norm(pa) == norm(pb) {
                bail!("--{a} and --{b} both refer to {}", pa.display());
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Darknet,
    Coco,
    Native,
}

/// Image and label directories of a darknet dataset: `root/images` and
/// `root/labels` when present, otherwise `root` holds both.
pub fn darknet_dirs(root: &Path) -> (PathBuf, PathBuf) {
    let images = root.join("images");
    if images.is_dir() {
        (images, root.join("labels"))
    } else {
        (root.to_path_buf(), root.to_path_buf())
    }
}

fn darknet_vocabulary(label_dir: &Path, classes: Option<&Path>) -> Result<ClassVocabulary> {
    let path = match classes {
        Some(p) => p.to_path_buf(),
        None => {
            let p = label_dir.join(CLASSES_FILE);
            if !p.exists() {
                bail!(
                    "no class list: pass --classes or put {CLASSES_FILE} in {}",
                    label_dir.display()
                );
            }
            p
        }
    };
    ClassVocabulary::parse_names(&read_text(&path)?).with_context(|| format!("parsing {}", path.display()))
}

pub fn load_dataset(format: Format, path: &Path, classes: Option<&Path>) -> Result<DatasetManifest> {
    let manifest = match format {
        Format::Darknet => {
            let (images, labels) = darknet_dirs(path);
            let vocab = darknet_vocabulary(&labels, classes)?;
            load_yolo_dataset(&images, &labels, vocab)?
        }
        Format::Coco => parse_coco(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?,
        Format::Native => {
            parse_manifest(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?
        }
    };
    if format != Format::Darknet {
        if let Some(p) = classes {
            let given = ClassVocabulary::parse_names(&read_text(p)?)?;
            let names = |v: &ClassVocabulary| v.entries().iter().map(|e| e.name.clone()).collect::<Vec<_>>();
            if names(&given) != names(&manifest.classes) {
                bail!("{} does not match the classes of {}", p.display(), path.display());
            }
        }
    }
    Ok(manifest)
}

/// Guesses the format of a ground-truth path: a directory is darknet, a JSON
/// document with the manifest tag is native, anything else is read as COCO.
pub fn sniff_format(path: &Path) -> Result<Format> {
    if path.is_dir() {
        return Ok(Format::Darknet);
    }
    let value: serde_json::Value =
        serde_json::from_str(&read_text(path)?).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("format").and_then(|v| v.as_str()) == Some(MANIFEST_FORMAT) {
        Ok(Format::Native)
    } else {
        Ok(Format::Coco)
    }
}
