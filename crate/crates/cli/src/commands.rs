use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use gtgtrack::game::{write_trace_csv, GameConfig};
use gtgtrack::graph::{write_matrix_csv, Sigma};
use gtgtrack::synth::{generate_to_dir, SynthParams};
use gtgtrack::tracking::{
    evaluate, load_scenario, recast_single_target, select_labeled_frames, sweep as run_sweep,
    ExperimentSummary, MetricsReport, PipelineParams, PreparedGraph, Scenario, TrackingResult,
};
use serde::{Deserialize, Serialize};

use crate::config::{pick, require, FileConfig, FrameCounts};
use crate::{CliError, EvalArgs, SolverArgs, SweepArgs, SynthArgs, TrackArgs};

const DEFAULT_SEED: u64 = 1;
const DEFAULT_TRACK_FRAMES: usize = 5;
const DEFAULT_SWEEP_FRAMES: [usize; 4] = [1, 3, 5, 10];
const DEFAULT_RUNS: usize = 20;

pub fn synth(args: SynthArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let out = require(args.out, file.out, "out")?;
    let base = SynthParams::default();
    let num_targets = pick(args.targets, file.targets, base.num_targets);
    let params = SynthParams {
        num_targets,
        num_frames: pick(args.frames, file.frames, base.num_frames),
        patch_width: pick(args.patch_width, file.patch_width, base.patch_width),
        patch_height: pick(args.patch_height, file.patch_height, base.patch_height),
        hue_separation: pick(
            args.hue_separation,
            file.hue_separation,
            1.0 / num_targets.max(1) as f64,
        ),
        pixel_noise: pick(args.pixel_noise, file.pixel_noise, base.pixel_noise),
        illumination_drift: pick(args.illumination_drift, file.illumination_drift, base.illumination_drift),
        occlusion_rate: pick(args.occlusion_rate, file.occlusion_rate, base.occlusion_rate),
        seed: pick(args.seed, file.seed, DEFAULT_SEED),
    };
    params.validate()?;
    let scenario = generate_to_dir(&params, &out)?;
    eprintln!(
        "wrote {} frames, {} detections to {}",
        scenario.frames().len(),
        scenario.len(),
        out.display()
    );
    Ok(())
}

/// Settings common to `track` and `sweep` after merging flags and file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct SolverConfig {
    scenario: PathBuf,
    sigma: Sigma,
    tol: f64,
    max_iters: usize,
    seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    target: Option<u32>,
}

impl SolverConfig {
    fn merge(args: SolverArgs, file: &FileConfig) -> Result<Self, CliError> {
        let defaults = GameConfig::default();
        let config = Self {
            scenario: require(args.scenario, file.scenario.clone(), "scenario")?,
            sigma: pick(args.sigma, file.sigma, Sigma::Auto),
            tol: pick(args.tol, file.tol, defaults.tol),
            max_iters: pick(args.max_iters, file.max_iters, defaults.max_iters),
            seed: pick(args.seed, file.seed, DEFAULT_SEED),
            target: args.target.or(file.target),
        };
        config.params().game.validate()?;
        Ok(config)
    }

    fn params(&self) -> PipelineParams {
        PipelineParams {
            sigma: self.sigma,
            game: GameConfig {
                tol: self.tol,
                max_iters: self.max_iters,
            },
        }
    }

    fn load(&self) -> Result<Scenario, CliError> {
        load_for_target(&self.scenario, self.target)
    }
}

fn load_for_target(dir: &Path, target: Option<u32>) -> Result<Scenario, CliError> {
    let scenario = load_scenario(dir)?;
    Ok(match target {
        Some(t) => recast_single_target(&scenario, t)?,
        None => scenario,
    })
}

#[derive(Serialize, Deserialize)]
struct TrackConfig {
    #[serde(flatten)]
    solver: SolverConfig,
    labeled_frames: usize,
    strict: bool,
}

#[derive(Serialize)]
struct TrackOutput<'a> {
    config: &'a TrackConfig,
    #[serde(flatten)]
    result: &'a TrackingResult,
}

pub fn track(args: TrackArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.solver.config.as_deref())?;
    let file_k = match &file.labeled_frames {
        Some(FrameCounts::One(k)) => Some(*k),
        Some(FrameCounts::Many(ks)) if ks.len() == 1 => Some(ks[0]),
        Some(FrameCounts::Many(_)) => {
            return Err(CliError::config("track takes a single labeled_frames value"));
        }
        None => None,
    };
    let config = TrackConfig {
        labeled_frames: pick(args.labeled_frames, file_k, DEFAULT_TRACK_FRAMES),
        strict: args.strict || file.strict.unwrap_or(false),
        solver: SolverConfig::merge(args.solver, &file)?,
    };
    let out = args.out.or(file.out.clone());
    let export_graph = args.export_graph.or(file.export_graph.clone());
    let trace_path = args.trace.or(file.trace.clone());

    let scenario = config.solver.load()?;
    let assignment = select_labeled_frames(&scenario, config.labeled_frames, config.solver.seed)?;
    let params = config.solver.params();
    let graph = PreparedGraph::build(&scenario, params.sigma)?;
    if let Some(dir) = &export_graph {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}: {e}", dir.display())))?;
        write_matrix_csv(graph.distances.matrix(), &dir.join("distances.csv"))?;
        graph.affinity.write_csv(&dir.join("affinity.csv"))?;
        graph.normalized.write_csv(&dir.join("normalized.csv"))?;
    }
    let result = match &trace_path {
        Some(path) => {
            let (result, trace) = graph.solve_traced(&scenario, &assignment, &params.game)?;
            write_trace_csv(&trace, path)?;
            result
        }
        None => graph.solve(&scenario, &assignment, &params.game)?,
    };

    let output = TrackOutput {
        config: &config,
        result: &result,
    };
    write_json(out.as_deref(), &output)?;
    if config.strict && !result.solver.converged {
        return Err(CliError {
            code: CliError::NOT_CONVERGED,
            message: format!(
                "dynamics did not converge within {} iterations",
                result.solver.iterations
            ),
        });
    }
    Ok(())
}

#[derive(Deserialize)]
struct TrackEcho {
    #[serde(default)]
    target: Option<u32>,
}

#[derive(Deserialize)]
struct ResultFile {
    #[serde(default)]
    config: Option<TrackEcho>,
    #[serde(flatten)]
    result: TrackingResult,
}

#[derive(Serialize)]
struct EvalConfig {
    result: PathBuf,
    scenario: PathBuf,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<u32>,
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    config: EvalConfig,
    #[serde(flatten)]
    report: &'a MetricsReport,
}

pub fn eval(args: EvalArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.config.as_deref())?;
    let result_path = require(args.result, file.result.clone(), "result")?;
    let scenario_path = require(args.scenario, file.scenario.clone(), "scenario")?;
    let text = fs::read_to_string(&result_path)
        .map_err(|e| CliError::io(format!("reading {}: {e}", result_path.display())))?;
    let parsed: ResultFile = serde_json::from_str(&text)
        .map_err(|e| CliError::config(format!("{}: {e}", result_path.display())))?;
    let target = args
        .target
        .or(file.target)
        .or(parsed.config.and_then(|c| c.target));
    let scenario = load_for_target(&scenario_path, target)?;
    let report = evaluate(&parsed.result, &scenario)?;
    let output = EvalOutput {
        config: EvalConfig {
            result: result_path,
            scenario: scenario_path,
            target,
        },
        report: &report,
    };
    write_json(args.out.or(file.out).as_deref(), &output)
}

#[derive(Serialize)]
struct SweepConfig {
    #[serde(flatten)]
    solver: SolverConfig,
    labeled_frames: Vec<usize>,
    runs: usize,
}

#[derive(Serialize)]
struct SweepSidecar<'a> {
    config: &'a SweepConfig,
    summaries: &'a [ExperimentSummary],
}

#[derive(Serialize)]
struct SweepRow {
    k: usize,
    #[serde(rename = "mean_P")]
    mean_p: f64,
    #[serde(rename = "std_P")]
    std_p: f64,
    #[serde(rename = "mean_R")]
    mean_r: f64,
    #[serde(rename = "std_R")]
    std_r: f64,
    #[serde(rename = "mean_F")]
    mean_f: f64,
    #[serde(rename = "std_F")]
    std_f: f64,
}

/// Where the effective sweep config is written: `sweep.csv` → `sweep.config.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("config.json")
}

pub fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let file = FileConfig::load(args.solver.config.as_deref())?;
    let out = require(args.out, file.out.clone(), "out")?;
    let config = SweepConfig {
        labeled_frames: args
            .labeled_frames
            .or(file.labeled_frames.as_ref().map(FrameCounts::to_vec))
            .unwrap_or_else(|| DEFAULT_SWEEP_FRAMES.to_vec()),
        runs: pick(args.runs, file.runs, DEFAULT_RUNS),
        solver: SolverConfig::merge(args.solver, &file)?,
    };
    if config.labeled_frames.is_empty() {
        return Err(CliError::config("labeled_frames is empty"));
    }
    let scenario = config.solver.load()?;
    let summaries = run_sweep(
        &scenario,
        &config.labeled_frames,
        config.runs,
        config.solver.seed,
        &config.solver.params(),
    )?;

    let mut csv = csv::Writer::from_path(&out)
        .map_err(|e| CliError::io(format!("creating {}: {e}", out.display())))?;
    for s in &summaries {
        csv.serialize(SweepRow {
            k: s.labeled_frames,
            mean_p: s.precision.mean,
            std_p: s.precision.std,
            mean_r: s.recall.mean,
            std_r: s.recall.std,
            mean_f: s.f_measure.mean,
            std_f: s.f_measure.std,
        })
        .map_err(|e| CliError::io(format!("writing {}: {e}", out.display())))?;
    }
    csv.flush()
        .map_err(|e| CliError::io(format!("writing {}: {e}", out.display())))?;
    write_json(
        Some(&sidecar_path(&out)),
        &SweepSidecar {
            config: &config,
            summaries: &summaries,
        },
    )
}

/// Pretty JSON with a trailing newline, to `path` or standard output.
fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::config(format!("serializing output: {e}")))?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(format!("writing {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(format!("writing standard output: {e}"))),
    }
}
