//! Deterministic synthetic scenarios with ground truth.
//!
//! Every frame shows the targets side by side, one slot each. Target `t`
//! (1-based) is a two-tone figure: the upper half ("torso") has hue
//! `(t − ½)·hue_separation`, saturation 0.75 and value 0.85; the lower
//! half ("legs") has the shared hue 0.6, saturation 0.5 and value 0.45.
//! The background is constant gray 128.
//!
//! Random draws come from one [`SplitMix64`] stream seeded with
//! `params.seed`, consumed in this exact order:
//!
//! ```text
//! for frame in 0..num_frames:
//!     brightness = uniform(1 − drift, 1 + drift)
//!     for target in 1..=C:
//!         if next_f64() < occlusion_rate: continue   # target absent
//!         dx = below(2·JITTER + 1) − JITTER
//!         dy = below(2·JITTER + 1) − JITTER
//!         for each patch pixel (row-major), for channel in R, G, B:
//!             noise = uniform(−pixel_noise, pixel_noise)
//!             value = clamp(color·brightness + noise, 0, 1)
//!             byte  = round(value · 255)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::tracking::{write_scenario, BBox, Detection, Scenario, ScenarioMeta};

/// Empty border around each target slot.
const MARGIN: u32 = 4;
/// Maximum positional jitter of a target inside its slot.
const JITTER: u32 = 2;

const TORSO_SATURATION: f64 = 0.75;
const TORSO_VALUE: f64 = 0.85;
const LEGS_HUE: f64 = 0.6;
const LEGS_SATURATION: f64 = 0.5;
const LEGS_VALUE: f64 = 0.45;
const BACKGROUND: u8 = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub num_targets: u32,
    pub num_frames: u32,
    pub patch_width: u32,
    pub patch_height: u32,
    pub hue_separation: f64,
    pub pixel_noise: f64,
    pub illumination_drift: f64,
    pub occlusion_rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            num_targets: 3,
            num_frames: 100,
            patch_width: 16,
            patch_height: 32,
            hue_separation: 1.0 / 3.0,
            pixel_noise: 0.08,
            illumination_drift: 0.1,
            occlusion_rate: 0.1,
            seed: 1,
        }
    }
}

impl SynthParams {
    /// Noise-free scenario with evenly spread hues.
    pub fn clean(num_targets: u32, num_frames: u32, seed: u64) -> Self {
        Self {
            num_targets,
            num_frames,
            hue_separation: 1.0 / num_targets.max(1) as f64,
            pixel_noise: 0.0,
            illumination_drift: 0.0,
            occlusion_rate: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.num_targets < 2 {
            return fail(format!("need at least 2 targets, got {}", self.num_targets));
        }
        if self.num_frames < 1 {
            return fail("need at least 1 frame".into());
        }
        if self.patch_width < 8 || self.patch_height < 8 {
            return fail(format!(
                "patch must be at least 8x8, got {}x{}",
                self.patch_width, self.patch_height
            ));
        }
        if !(self.hue_separation > 0.0 && self.hue_separation <= 1.0) {
            return fail(format!("hue_separation must be in (0, 1], got {}", self.hue_separation));
        }
        if self.num_targets as f64 * self.hue_separation > 1.0 + 1e-12 {
            return fail(format!(
                "{} targets with hue_separation {} do not fit in the hue circle",
                self.num_targets, self.hue_separation
            ));
        }
        for (name, v) in [
            ("pixel_noise", self.pixel_noise),
            ("illumination_drift", self.illumination_drift),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return fail(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.occlusion_rate) {
            return fail(format!("occlusion_rate must be in [0, 1), got {}", self.occlusion_rate));
        }
        Ok(())
    }

    fn slot_width(&self) -> u32 {
        self.patch_width + 2 * MARGIN
    }

    fn torso_hue(&self, target: u32) -> f64 {
        (target as f64 - 0.5) * self.hue_separation
    }
}

/// Hexcone HSV (all in `[0, 1]`) to RGB in `[0, 1]`.
fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor() as u32 % 6;
    let f = h6 - h6.floor();
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

/// Renders the scenario in memory. Same parameters, same bytes.
pub fn generate_scenario(params: &SynthParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = SplitMix64::new(params.seed);
    let (pw, ph) = (params.patch_width, params.patch_height);
    let frame_w = params.num_targets * params.slot_width();
    let frame_h = ph + 2 * MARGIN;
    let colors: Vec<([f64; 3], [f64; 3])> = (1..=params.num_targets)
        .map(|t| {
            (
                hsv_to_rgb(params.torso_hue(t), TORSO_SATURATION, TORSO_VALUE),
                hsv_to_rgb(LEGS_HUE, LEGS_SATURATION, LEGS_VALUE),
            )
        })
        .collect();

    let mut frames = BTreeMap::new();
    let mut detections = Vec::new();
    for frame_id in 0..params.num_frames {
        let mut img = RgbImage::from_pixel(frame_w, frame_h, Rgb([BACKGROUND; 3]));
        let drift = params.illumination_drift;
        let brightness = rng.uniform(1.0 - drift, 1.0 + drift);
        for t in 1..=params.num_targets {
            if rng.next_f64() < params.occlusion_rate {
                continue;
            }
            let dx = rng.below(2 * JITTER as usize + 1) as u32;
            let dy = rng.below(2 * JITTER as usize + 1) as u32;
            let x0 = (t - 1) * params.slot_width() + MARGIN + dx - JITTER;
            let y0 = MARGIN + dy - JITTER;
            let (torso, legs) = colors[(t - 1) as usize];
            for y in 0..ph {
                let color = if y < ph / 2 { torso } else { legs };
                for x in 0..pw {
                    let mut px = [0u8; 3];
                    for (out, c) in px.iter_mut().zip(color) {
                        let noise = rng.uniform(-params.pixel_noise, params.pixel_noise);
                        let v = (c * brightness + noise).clamp(0.0, 1.0);
                        *out = (v * 255.0).round() as u8;
                    }
                    img.put_pixel(x0 + x, y0 + y, Rgb(px));
                }
            }
            detections.push(Detection {
                frame: frame_id,
                bbox: BBox {
                    x: x0,
                    y: y0,
                    w: pw,
                    h: ph,
                },
                truth_id: Some(t),
            });
        }
        frames.insert(frame_id, img);
    }
    Scenario::new(frames, detections, params.num_targets)
}

/// Generates a scenario and writes it (frames, annotations, metadata with
/// the generator parameters) into `dir`.
pub fn generate_to_dir(params: &SynthParams, dir: &Path) -> Result<Scenario> {
    let scenario = generate_scenario(params)?;
    let meta = ScenarioMeta {
        num_targets: params.num_targets,
        num_frames: params.num_frames,
        generator: Some(serde_json::to_value(params).expect("params always serialize")),
    };
    write_scenario(dir, &scenario, &meta)?;
    Ok(scenario)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::rgb_to_hsv;

    #[test]
    fn hsv_round_trip_on_anchors() {
        for (h, rgb) in [(0.0, [1.0, 0.0, 0.0]), (1.0 / 3.0, [0.0, 1.0, 0.0]), (2.0 / 3.0, [0.0, 0.0, 1.0])] {
            let out = hsv_to_rgb(h, 1.0, 1.0);
            for k in 0..3 {
                assert!((out[k] - rgb[k]).abs() < 1e-12);
            }
        }
        let [r, g, b] = hsv_to_rgb(0.6, 0.5, 0.8);
        let (h2, s2, v2) = rgb_to_hsv(
            (r * 255.0).round() as u8,
            (g * 255.0).round() as u8,
            (b * 255.0).round() as u8,
        );
        assert!((h2 - 0.6).abs() < 0.01 && (s2 - 0.5).abs() < 0.01 && (v2 - 0.8).abs() < 0.01);
    }

    #[test]
    fn detection_count_without_occlusion() {
        let s = generate_scenario(&SynthParams::clean(3, 30, 7)).unwrap();
        assert_eq!(s.len(), 90);
        assert_eq!(s.frames().len(), 30);
    }

    #[test]
    fn occlusion_removes_detections() {
        let p = SynthParams {
            num_frames: 50,
            occlusion_rate: 0.5,
            ..SynthParams::default()
        };
        let s = generate_scenario(&p).unwrap();
        assert!(s.len() < 150 && s.len() > 30, "{}", s.len());
    }

    #[test]
    fn clean_patches_repeat_exactly() {
        let s = generate_scenario(&SynthParams::clean(3, 5, 2)).unwrap();
        for (i, d) in s.detections().iter().enumerate() {
            let first = s
                .detections()
                .iter()
                .position(|e| e.truth_id == d.truth_id)
                .unwrap();
            assert_eq!(s.patch(i), s.patch(first));
        }
    }

    #[test]
    fn deterministic() {
        let p = SynthParams {
            num_frames: 10,
            ..SynthParams::default()
        };
        assert_eq!(generate_scenario(&p).unwrap(), generate_scenario(&p).unwrap());
        let q = SynthParams { seed: 2, ..p.clone() };
        assert_ne!(generate_scenario(&p).unwrap(), generate_scenario(&q).unwrap());
    }

    #[test]
    fn invalid_params() {
        let bad = [
            SynthParams { num_targets: 1, ..SynthParams::default() },
            SynthParams { num_frames: 0, ..SynthParams::default() },
            SynthParams { patch_width: 6, ..SynthParams::default() },
            SynthParams { hue_separation: 0.5, ..SynthParams::default() },
            SynthParams { pixel_noise: 1.5, ..SynthParams::default() },
            SynthParams { occlusion_rate: 1.0, ..SynthParams::default() },
        ];
        for p in bad {
            assert!(matches!(generate_scenario(&p), Err(Error::InvalidParams(_))), "{p:?}");
        }
    }
}
