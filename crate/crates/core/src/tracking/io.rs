use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageFormat, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use super::{BBox, Detection, Scenario};
use crate::error::{Error, Result};

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";
pub const META_FILE: &str = "scenario.json";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationRecord {
    frame: u32,
    x: u32,
    y: u32,
    w: u32,
    h: u32,
    id: Option<u32>,
}

/// Optional sidecar describing a scenario directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub num_targets: u32,
    pub num_frames: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<serde_json::Value>,
}

fn frame_file_name(id: u32) -> String {
    format!("frame_{id:06}.ppm")
}

fn parse_frame_file_name(name: &str) -> Option<u32> {
    name.strip_prefix("frame_")?.strip_suffix(".ppm")?.parse().ok()
}

/// Parses a JSON-lines annotation file. Blank lines are skipped; the
/// returned pairs carry 1-based line numbers.
pub fn read_annotations(path: &Path) -> Result<Vec<(usize, Detection)>> {
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| Error::MalformedAnnotation {
                path: path.to_path_buf(),
                line: idx + 1,
                reason: e.to_string(),
            })?;
        out.push((
            idx + 1,
            Detection {
                frame: rec.frame,
                bbox: BBox {
                    x: rec.x,
                    y: rec.y,
                    w: rec.w,
                    h: rec.h,
                },
                truth_id: rec.id,
            },
        ));
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, detections: &[Detection]) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut out = BufWriter::new(file);
    for d in detections {
        let rec = AnnotationRecord {
            frame: d.frame,
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            id: d.truth_id,
        };
        let line = serde_json::to_string(&rec).expect("annotation records always serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(ctx(), e))?;
    }
    out.flush().map_err(|e| Error::io(ctx(), e))
}

fn read_ppm(path: &Path) -> Result<RgbImage> {
    let unreadable = |reason: String| Error::UnreadableImage {
        path: path.to_path_buf(),
        reason,
    };
    let mut reader = ImageReader::open(path).map_err(|e| unreadable(e.to_string()))?;
    reader.set_format(ImageFormat::Pnm);
    let img = reader.decode().map_err(|e| unreadable(e.to_string()))?;
    Ok(img.to_rgb8())
}

fn write_ppm(path: &Path, img: &RgbImage) -> Result<()> {
    let ctx = || format!("writing {}", path.display());
    let file = File::create(path).map_err(|e| Error::io(ctx(), e))?;
    let mut out = BufWriter::new(file);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Pixmap(SampleEncoding::Binary))
        .write_image(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)
        .map_err(|e| Error::UnreadableImage {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
    out.flush().map_err(|e| Error::io(ctx(), e))
}

/// Loads `dir/frame_*.ppm`, `dir/annotations.jsonl` and, when present,
/// `dir/scenario.json`.
pub fn load_scenario(dir: &Path) -> Result<Scenario> {
    load_scenario_from(dir, &dir.join(ANNOTATIONS_FILE))
}

pub fn load_scenario_from(image_dir: &Path, annotation_path: &Path) -> Result<Scenario> {
    let records = read_annotations(annotation_path)?;

    let entries =
        fs::read_dir(image_dir).map_err(|e| Error::io(format!("listing {}", image_dir.display()), e))?;
    let mut frame_paths: BTreeMap<u32, PathBuf> = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("listing {}", image_dir.display()), e))?;
        if let Some(id) = entry.file_name().to_str().and_then(parse_frame_file_name) {
            frame_paths.insert(id, entry.path());
        }
    }
    for (line, d) in &records {
        if !frame_paths.contains_key(&d.frame) {
            return Err(Error::MalformedAnnotation {
                path: annotation_path.to_path_buf(),
                line: *line,
                reason: format!("frame {} has no image in {}", d.frame, image_dir.display()),
            });
        }
    }

    let meta_path = image_dir.join(META_FILE);
    let num_targets = if meta_path.exists() {
        let text = fs::read_to_string(&meta_path)
            .map_err(|e| Error::io(format!("reading {}", meta_path.display()), e))?;
        let meta: ScenarioMeta = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidParams(format!("{}: {e}", meta_path.display())))?;
        meta.num_targets
    } else {
        records.iter().filter_map(|(_, d)| d.truth_id).max().unwrap_or(0)
    };

    let mut frames = BTreeMap::new();
    for (id, path) in frame_paths {
        frames.insert(id, read_ppm(&path)?);
    }
    Scenario::new(frames, records.into_iter().map(|(_, d)| d).collect(), num_targets)
}

/// Writes frames, annotations and the metadata sidecar into `dir`.
pub fn write_scenario(dir: &Path, scenario: &Scenario, meta: &ScenarioMeta) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    for (id, img) in scenario.frames() {
        write_ppm(&dir.join(frame_file_name(*id)), img)?;
    }
    write_annotations(&dir.join(ANNOTATIONS_FILE), scenario.detections())?;
    let meta_path = dir.join(META_FILE);
    let text = serde_json::to_string_pretty(meta).expect("metadata always serializes");
    fs::write(&meta_path, text + "\n")
        .map_err(|e| Error::io(format!("writing {}", meta_path.display()), e))
}
