//! Settings shared by the JSON config file and the command-line flags.
//!
//! Keys in the file use the flag names with `_` for `-`. A flag given on
//! the command line replaces the file value.

use std::fs;
use std::path::{Path, PathBuf};

use gtgtrack::graph::Sigma;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// One labeled-frame count or a list of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameCounts {
    One(usize),
    Many(Vec<usize>),
}

impl FrameCounts {
    pub fn to_vec(&self) -> Vec<usize> {
        match self {
            FrameCounts::One(k) => vec![*k],
            FrameCounts::Many(ks) => ks.clone(),
        }
    }
}

/// Every key is optional; missing ones fall back to flags, then defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scenario: Option<PathBuf>,
    pub result: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub sigma: Option<Sigma>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub labeled_frames: Option<FrameCounts>,
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub target: Option<u32>,
    pub strict: Option<bool>,
    pub targets: Option<u32>,
    pub frames: Option<u32>,
    pub patch_width: Option<u32>,
    pub patch_height: Option<u32>,
    pub hue_separation: Option<f64>,
    pub pixel_noise: Option<f64>,
    pub illumination_drift: Option<f64>,
    pub occlusion_rate: Option<f64>,
    pub export_graph: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
    }
}

/// Flag value if given, else file value, else `default`.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

/// As [`pick`] for settings without a default.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T, CliError> {
    flag.or(file)
        .ok_or_else(|| CliError::config(format!("missing required setting `{name}`")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        assert_eq!(pick(Some(3), Some(5), 1), 3);
        assert_eq!(pick(None, Some(5), 1), 5);
        assert_eq!(pick(None, None, 1), 1);
    }

    #[test]
    fn parses_file_keys() {
        let c: FileConfig = serde_json::from_str(
            r#"{"sigma": "auto", "tol": 1e-8, "labeled_frames": [1, 3], "target": 2}"#,
        )
        .unwrap();
        assert_eq!(c.sigma, Some(Sigma::Auto));
        assert_eq!(c.labeled_frames.unwrap().to_vec(), vec![1, 3]);
        let c: FileConfig = serde_json::from_str(r#"{"sigma": 0.5, "labeled_frames": 4}"#).unwrap();
        assert_eq!(c.sigma, Some(Sigma::Fixed(0.5)));
        assert_eq!(c.labeled_frames.unwrap().to_vec(), vec![4]);
        assert!(serde_json::from_str::<FileConfig>(r#"{"sigmaa": 1}"#).is_err());
    }
}
