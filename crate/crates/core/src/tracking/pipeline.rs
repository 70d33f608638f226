use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BBox, Scenario};
use crate::descriptor::{describe_patch, CovarianceDescriptor};
use crate::error::{Error, Result};
use crate::game::{run_dynamics, run_dynamics_traced, GameConfig, LabelAssignment, TraceRow};
use crate::graph::{
    affinity_from_distances, normalize, pairwise_distances, AffinityMatrix, DistanceMatrix,
    NormalizedAffinity, Sigma,
};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub sigma: Sigma,
    pub game: GameConfig,
}

/// Descriptors and graph of a scenario. Independent of which detections
/// are labeled, so one graph serves every run of an experiment.
#[derive(Clone, Debug)]
pub struct PreparedGraph {
    pub descriptors: Vec<CovarianceDescriptor>,
    pub distances: DistanceMatrix,
    pub affinity: AffinityMatrix,
    pub normalized: NormalizedAffinity,
    num_targets: u32,
}

impl PreparedGraph {
    pub fn build(scenario: &Scenario, sigma: Sigma) -> Result<Self> {
        if scenario.len() < 2 {
            return Err(Error::InvalidParams(format!(
                "tracking needs at least 2 detections, got {}",
                scenario.len()
            )));
        }
        let descriptors = (0..scenario.len())
            .into_par_iter()
            .map(|i| describe_patch(&scenario.patch(i), i))
            .collect::<Result<Vec<_>>>()?;
        let distances = pairwise_distances(&descriptors)?;
        let affinity = affinity_from_distances(&distances, sigma)?;
        let normalized = normalize(&affinity);
        Ok(Self {
            descriptors,
            distances,
            affinity,
            normalized,
            num_targets: scenario.num_targets(),
        })
    }

    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn solve(
        &self,
        scenario: &Scenario,
        assignment: &LabelAssignment,
        game: &GameConfig,
    ) -> Result<TrackingResult> {
        self.check(scenario, assignment)?;
        let eq = run_dynamics(&self.normalized, assignment, game)?;
        Ok(self.package(scenario, assignment, eq))
    }

    pub fn solve_traced(
        &self,
        scenario: &Scenario,
        assignment: &LabelAssignment,
        game: &GameConfig,
    ) -> Result<(TrackingResult, Vec<TraceRow>)> {
        self.check(scenario, assignment)?;
        let (eq, trace) = run_dynamics_traced(&self.normalized, assignment, game)?;
        Ok((self.package(scenario, assignment, eq), trace))
    }

    fn check(&self, scenario: &Scenario, assignment: &LabelAssignment) -> Result<()> {
        if scenario.len() != self.len() || assignment.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: assignment.len().max(scenario.len()),
            });
        }
        if assignment.classes() != self.num_targets as usize {
            return Err(Error::DimensionMismatch {
                expected: self.num_targets as usize,
                actual: assignment.classes(),
            });
        }
        Ok(())
    }

    fn package(
        &self,
        scenario: &Scenario,
        assignment: &LabelAssignment,
        eq: crate::game::EquilibriumResult,
    ) -> TrackingResult {
        let detections = scenario
            .detections()
            .iter()
            .enumerate()
            .map(|(i, d)| Prediction {
                frame: d.frame,
                bbox: d.bbox,
                predicted_id: eq.labels[i] as u32 + 1,
                confidence: eq.confidence[i],
                labeled: assignment.label(i).is_some(),
            })
            .collect();
        TrackingResult {
            solver: SolverInfo {
                iterations: eq.iterations,
                converged: eq.converged,
                sigma: self.affinity.sigma(),
                isolated: self.normalized.isolated().to_vec(),
            },
            detections,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverInfo {
    pub iterations: usize,
    pub converged: bool,
    /// Kernel bandwidth actually used.
    pub sigma: f64,
    /// Detections with no graph neighbours.
    pub isolated: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub frame: u32,
    pub bbox: BBox,
    pub predicted_id: u32,
    pub confidence: f64,
    #[serde(default)]
    pub labeled: bool,
}

/// Per-detection identities in scenario order, plus solver metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingResult {
    pub solver: SolverInfo,
    pub detections: Vec<Prediction>,
}

impl TrackingResult {
    pub fn predicted_ids(&self) -> Vec<u32> {
        self.detections.iter().map(|p| p.predicted_id).collect()
    }
}

/// Descriptors → distances → affinity → normalization → dynamics → labels.
/// Detection order is player order.
pub fn run_pipeline(
    scenario: &Scenario,
    assignment: &LabelAssignment,
    params: &PipelineParams,
) -> Result<TrackingResult> {
    params.game.validate()?;
    PreparedGraph::build(scenario, params.sigma)?.solve(scenario, assignment, &params.game)
}
