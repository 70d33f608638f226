//! Random labeled-frame protocol: pick `k` frames, label every detection in
//! them, solve, score, and aggregate over repeated draws.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{PipelineParams, PreparedGraph};
use super::{evaluate, MetricsReport, Scenario};
use crate::error::{Error, Result};
use crate::game::LabelAssignment;
use crate::rng::SplitMix64;

/// Upper bound on extra draws when labeled frames miss a target.
pub const MAX_REDRAWS: usize = 1000;

/// Labels every detection in `k` frames drawn without replacement from the
/// frames that contain detections.
pub fn select_labeled_frames(scenario: &Scenario, k: usize, seed: u64) -> Result<LabelAssignment> {
    let frames = scenario.detection_frames();
    if k == 0 {
        return Err(Error::InvalidParams("at least one labeled frame is required".into()));
    }
    if k > frames.len() {
        return Err(Error::KTooLarge {
            requested: k,
            available: frames.len(),
        });
    }
    let mut chosen = SplitMix64::new(seed).sample(&frames, k);
    chosen.sort_unstable();

    let mut assignment = LabelAssignment::new(scenario.len(), scenario.num_targets() as usize)?;
    for (i, d) in scenario.detections().iter().enumerate() {
        if chosen.binary_search(&d.frame).is_ok() {
            let id = d.truth_id.ok_or(Error::MissingGroundTruth(i))?;
            assignment.set(i, id as usize - 1)?;
        }
    }
    assignment.check_classes()?;
    Ok(assignment)
}

/// Binary recast: `target` becomes identity 1, every other target 2.
pub fn recast_single_target(scenario: &Scenario, target: u32) -> Result<Scenario> {
    let present = scenario
        .detections()
        .iter()
        .any(|d| d.truth_id == Some(target));
    if target == 0 || target > scenario.num_targets() || !present {
        return Err(Error::UnknownTarget {
            target,
            num_targets: scenario.num_targets(),
        });
    }
    let truth = scenario
        .detections()
        .iter()
        .map(|d| d.truth_id.map(|t| if t == target { 1 } else { 2 }))
        .collect();
    scenario.with_truth(truth, 2)
}

/// Mean and sample standard deviation (`n − 1` denominator, 0 for one sample).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        if values.iter().all(|&v| v == values[0]) {
            return Self {
                mean: values[0],
                std: 0.0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub iterations: usize,
    pub converged: bool,
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub labeled_frames: usize,
    pub runs: usize,
    /// Draws discarded because some target had no labeled detection.
    pub redraws: usize,
    pub precision: Stat,
    pub recall: Stat,
    pub f_measure: Stat,
    pub per_run: Vec<RunMetrics>,
}

/// `runs` repetitions of the labeled-frame protocol with `k` frames.
///
/// Run `r` draws with seed `base_seed + r`. A draw that misses a target is
/// replaced by one from the spare seeds `base_seed + runs`,
/// `base_seed + runs + 1`, …, taken in run order.
pub fn repeat_experiment(
    scenario: &Scenario,
    k: usize,
    runs: usize,
    base_seed: u64,
    params: &PipelineParams,
) -> Result<ExperimentSummary> {
    params.game.validate()?;
    let graph = PreparedGraph::build(scenario, params.sigma)?;
    repeat_on_graph(&graph, scenario, k, runs, base_seed, params)
}

/// Repeats the protocol for every `k` in `ks`, sharing one graph.
pub fn sweep(
    scenario: &Scenario,
    ks: &[usize],
    runs: usize,
    base_seed: u64,
    params: &PipelineParams,
) -> Result<Vec<ExperimentSummary>> {
    params.game.validate()?;
    let graph = PreparedGraph::build(scenario, params.sigma)?;
    ks.iter()
        .map(|&k| repeat_on_graph(&graph, scenario, k, runs, base_seed, params))
        .collect()
}

fn repeat_on_graph(
    graph: &PreparedGraph,
    scenario: &Scenario,
    k: usize,
    runs: usize,
    base_seed: u64,
    params: &PipelineParams,
) -> Result<ExperimentSummary> {
    if runs == 0 {
        return Err(Error::InvalidParams("runs must be at least 1".into()));
    }
    // Draws are sequential so spare seeds are handed out deterministically.
    let mut spare = base_seed.wrapping_add(runs as u64);
    let mut redraws = 0;
    let mut draws = Vec::with_capacity(runs);
    for r in 0..runs {
        let mut seed = base_seed.wrapping_add(r as u64);
        loop {
            match select_labeled_frames(scenario, k, seed) {
                Ok(a) => {
                    draws.push((r, seed, a));
                    break;
                }
                Err(Error::MissingClass(c)) => {
                    redraws += 1;
                    if redraws > MAX_REDRAWS {
                        return Err(Error::MissingClass(c));
                    }
                    seed = spare;
                    spare = spare.wrapping_add(1);
                }
                Err(e) => return Err(e),
            }
        }
    }

    let per_run = draws
        .into_par_iter()
        .map(|(run, seed, assignment)| {
            let result = graph.solve(scenario, &assignment, &params.game)?;
            let report = evaluate(&result, scenario)?;
            Ok(RunMetrics {
                run,
                seed,
                iterations: result.solver.iterations,
                converged: result.solver.converged,
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let collect = |f: fn(&MetricsReport) -> f64| -> Vec<f64> { per_run.iter().map(|r| f(&r.report)).collect() };
    Ok(ExperimentSummary {
        labeled_frames: k,
        runs,
        redraws,
        precision: Stat::of(&collect(|m| m.mean_precision)),
        recall: Stat::of(&collect(|m| m.mean_recall)),
        f_measure: Stat::of(&collect(|m| m.mean_f_measure)),
        per_run,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_examples() {
        assert_eq!(Stat::of(&[0.7]), Stat { mean: 0.7, std: 0.0 });
        assert_eq!(Stat::of(&[0.4, 0.4, 0.4]).std, 0.0);
        let s = Stat::of(&[0.9, 1.0]);
        assert!((s.mean - 0.95).abs() < 1e-15);
        // sqrt(((0.05)² + (0.05)²) / 1)
        assert!((s.std - 0.005f64.sqrt()).abs() < 1e-15);
        assert!((s.std - 0.0707).abs() < 1e-4);
    }
}
