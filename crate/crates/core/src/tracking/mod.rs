//! Scenarios, the end-to-end pipeline and its evaluation.
//!
//! A scenario is a directory of `frame_<id:06>.ppm` images plus an
//! `annotations.jsonl` file with one detection per line:
//!
//! ```text
//! {"frame":0,"x":4,"y":4,"w":16,"h":32,"id":1}
//! ```
//!
//! `id` is the ground-truth target in `1..=C`, or `null`. An optional
//! `scenario.json` records `num_targets`; without it the largest `id` is
//! used.

mod experiment;
mod io;
mod metrics;
mod pipeline;

use std::collections::BTreeMap;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::descriptor::{PixelPatch, MIN_PATCH_SIDE};
use crate::error::{Error, Result};

pub use experiment::{
    recast_single_target, repeat_experiment, select_labeled_frames, sweep, ExperimentSummary,
    RunMetrics, Stat, MAX_REDRAWS,
};
pub use io::{
    load_scenario, load_scenario_from, read_annotations, write_annotations, write_scenario,
    ScenarioMeta, ANNOTATIONS_FILE, META_FILE,
};
pub use metrics::{evaluate, evaluate_labels, MetricsReport, TargetMetrics};
pub use pipeline::{run_pipeline, PipelineParams, Prediction, PreparedGraph, SolverInfo, TrackingResult};

/// Axis-aligned box in frame pixels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BBox,
    /// Ground-truth target in `1..=C`.
    pub truth_id: Option<u32>,
}

/// Frames, detections sorted by `(frame, bbox.x)`, and the target count.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    frames: BTreeMap<u32, RgbImage>,
    detections: Vec<Detection>,
    num_targets: u32,
}

impl Scenario {
    pub fn new(
        frames: BTreeMap<u32, RgbImage>,
        mut detections: Vec<Detection>,
        num_targets: u32,
    ) -> Result<Self> {
        if num_targets < 2 {
            return Err(Error::InvalidParams(format!(
                "a scenario needs at least 2 targets, got {num_targets}"
            )));
        }
        detections.sort_by_key(|d| (d.frame, d.bbox.x));
        for (index, d) in detections.iter().enumerate() {
            let frame = frames.get(&d.frame).ok_or(Error::BBoxOutOfFrame {
                index,
                frame: d.frame,
            })?;
            if (d.bbox.w as usize) < MIN_PATCH_SIDE || (d.bbox.h as usize) < MIN_PATCH_SIDE {
                return Err(Error::PatchTooSmall {
                    width: d.bbox.w as usize,
                    height: d.bbox.h as usize,
                });
            }
            let inside = d.bbox.x as u64 + d.bbox.w as u64 <= frame.width() as u64
                && d.bbox.y as u64 + d.bbox.h as u64 <= frame.height() as u64;
            if !inside {
                return Err(Error::BBoxOutOfFrame {
                    index,
                    frame: d.frame,
                });
            }
            if let Some(t) = d.truth_id {
                if t == 0 || t > num_targets {
                    return Err(Error::UnknownTarget {
                        target: t,
                        num_targets,
                    });
                }
            }
        }
        Ok(Self {
            frames,
            detections,
            num_targets,
        })
    }

    pub fn frames(&self) -> &BTreeMap<u32, RgbImage> {
        &self.frames
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn num_targets(&self) -> u32 {
        self.num_targets
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    /// Distinct frames that contain at least one detection, ascending.
    pub fn detection_frames(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.detections.iter().map(|d| d.frame).collect();
        ids.dedup();
        ids
    }

    /// Pixels of detection `index`, cropped from its frame.
    pub fn patch(&self, index: usize) -> PixelPatch {
        let d = &self.detections[index];
        let frame = &self.frames[&d.frame];
        let mut pixels = Vec::with_capacity((d.bbox.w * d.bbox.h) as usize);
        for y in d.bbox.y..d.bbox.y + d.bbox.h {
            for x in d.bbox.x..d.bbox.x + d.bbox.w {
                pixels.push(frame.get_pixel(x, y).0);
            }
        }
        PixelPatch::new(d.bbox.w as usize, d.bbox.h as usize, pixels)
            .expect("bbox size matches pixel count")
    }

    /// Same scenario with new ground truth and target count.
    pub(crate) fn with_truth(&self, truth: Vec<Option<u32>>, num_targets: u32) -> Result<Self> {
        let detections = self
            .detections
            .iter()
            .zip(truth)
            .map(|(d, truth_id)| Detection { truth_id, ..*d })
            .collect();
        Scenario::new(self.frames.clone(), detections, num_targets)
    }
}
