//! The graph transduction game.
//!
//! Every detection is a player whose pure strategies are the `c` target
//! classes. Each edge of the normalized graph is a two-player game with
//! payoff matrix `ŵ_ij·I_c`, so a player's payoff for class `h` is
//! `u_i(e^h) = Σ_j ŵ_ij·x_jh` and its expected payoff is
//! `u_i(x) = Σ_h x_ih·u_i(e^h)`. Labeled players are pinned to their class;
//! unlabeled players start at the simplex barycenter and evolve under the
//! discrete replicator map `x_ih ← x_ih·u_i(e^h)/u_i(x)`.
//!
//! Classes are 0-based throughout this module.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NormalizedAffinity;

/// Row count above which payoff evaluation is spread over threads.
const PARALLEL_ROWS: usize = 128;

/// Known classes for a subset of players.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelAssignment {
    classes: usize,
    labels: Vec<Option<usize>>,
}

impl LabelAssignment {
    /// `n` unlabeled players over `classes` classes.
    pub fn new(n: usize, classes: usize) -> Result<Self> {
        Self::from_labels(classes, vec![None; n])
    }

    pub fn from_labels(classes: usize, labels: Vec<Option<usize>>) -> Result<Self> {
        if classes < 2 {
            return Err(Error::InvalidAssignment(format!(
                "need at least 2 classes, got {classes}"
            )));
        }
        if let Some(bad) = labels.iter().flatten().find(|&&k| k >= classes) {
            return Err(Error::InvalidAssignment(format!(
                "class index {bad} out of range for {classes} classes"
            )));
        }
        Ok(Self { classes, labels })
    }

    pub fn set(&mut self, player: usize, class: usize) -> Result<()> {
        if class >= self.classes || player >= self.labels.len() {
            return Err(Error::InvalidAssignment(format!(
                "cannot label player {player} with class {class}"
            )));
        }
        self.labels[player] = Some(class);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn label(&self, player: usize) -> Option<usize> {
        self.labels[player]
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn unlabeled(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i].is_none()).collect()
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    /// Every class must be carried by at least one labeled player.
    pub fn check_classes(&self) -> Result<()> {
        let mut seen = vec![false; self.classes];
        for &k in self.labels.iter().flatten() {
            seen[k] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(k) => Err(Error::MissingClass(k)),
            None => Ok(()),
        }
    }

    /// Reorders players: new player `k` is old player `perm[k]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            classes: self.classes,
            labels: perm.iter().map(|&p| self.labels[p]).collect(),
        }
    }
}

/// One mixed strategy per player, each a point of the `c`-simplex.
#[derive(Clone, Debug, PartialEq)]
pub struct StrategyProfile {
    classes: usize,
    x: Vec<f64>,
    pinned: Vec<bool>,
}

impl StrategyProfile {
    /// Builds a profile from explicit rows. Rows must be nonnegative and sum
    /// to 1 within 1e−9; `pinned` marks labeled players.
    pub fn from_rows(rows: &[Vec<f64>], pinned: Vec<bool>) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if classes < 2 || pinned.len() != rows.len() {
            return Err(Error::InvalidParams(
                "profile needs at least 2 classes and one pin flag per row".into(),
            ));
        }
        let mut x = Vec::with_capacity(rows.len() * classes);
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != classes || row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParams(format!("row {i} is not on the simplex")));
            }
            x.extend_from_slice(row);
        }
        Ok(Self { classes, x, pinned })
    }

    pub fn len(&self) -> usize {
        self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.classes..(i + 1) * self.classes]
    }

    #[inline]
    pub fn get(&self, i: usize, h: usize) -> f64 {
        self.x[i * self.classes + h]
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    /// Largest absolute entry of `self − other`.
    pub fn max_change(&self, other: &StrategyProfile) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for GameConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 10_000,
        }
    }
}

impl GameConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::InvalidParams(format!(
                "tol must be in (0, 1), got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParams("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumResult {
    pub profile: StrategyProfile,
    pub iterations: usize,
    pub converged: bool,
    pub labels: Vec<usize>,
    pub confidence: Vec<f64>,
}

/// Labeled players at their class vertex, everyone else at the barycenter.
///
/// Classes without a labeled player are allowed here; callers that need
/// full class coverage use [`LabelAssignment::check_classes`].
pub fn init_profile(assignment: &LabelAssignment) -> StrategyProfile {
    let c = assignment.classes();
    let mut x = vec![1.0 / c as f64; assignment.len() * c];
    let mut pinned = vec![false; assignment.len()];
    for (i, label) in assignment.labels().iter().enumerate() {
        if let Some(k) = *label {
            let row = &mut x[i * c..(i + 1) * c];
            row.fill(0.0);
            row[k] = 1.0;
            pinned[i] = true;
        }
    }
    StrategyProfile {
        classes: c,
        x,
        pinned,
    }
}

/// `u_i(e^h)` for every `h`, summed left to right over `j`.
fn pure_payoffs_into(w: &NormalizedAffinity, x: &StrategyProfile, i: usize, out: &mut [f64]) {
    out.fill(0.0);
    for (j, &wij) in w.row(i).iter().enumerate() {
        if wij == 0.0 {
            continue;
        }
        for (o, &xjh) in out.iter_mut().zip(x.row(j)) {
            *o += wij * xjh;
        }
    }
}

/// `u_i(e^h) = Σ_j ŵ_ij·x_jh`.
pub fn payoff_pure(w: &NormalizedAffinity, x: &StrategyProfile, i: usize, h: usize) -> f64 {
    let mut p = vec![0.0; x.classes()];
    pure_payoffs_into(w, x, i, &mut p);
    p[h]
}

/// `u_i(x) = Σ_h x_ih·u_i(e^h)`.
pub fn payoff_mixed(w: &NormalizedAffinity, x: &StrategyProfile, i: usize) -> f64 {
    let mut p = vec![0.0; x.classes()];
    pure_payoffs_into(w, x, i, &mut p);
    dot(x.row(i), &p)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// `F(x) = Σ_i Σ_j ŵ_ij·(x_i·x_j)`, the potential the dynamics climbs.
pub fn total_payoff(w: &NormalizedAffinity, x: &StrategyProfile) -> f64 {
    let mut p = vec![0.0; x.classes()];
    (0..x.len())
        .map(|i| {
            pure_payoffs_into(w, x, i, &mut p);
            dot(x.row(i), &p)
        })
        .sum()
}

fn update_row(w: &NormalizedAffinity, x: &StrategyProfile, i: usize, out: &mut [f64]) {
    let current = x.row(i);
    if x.is_pinned(i) {
        out.copy_from_slice(current);
        return;
    }
    pure_payoffs_into(w, x, i, out);
    let mixed = dot(current, out);
    if !(mixed > 0.0) {
        out.copy_from_slice(current);
        return;
    }
    for (o, &xi) in out.iter_mut().zip(current) {
        *o = xi * *o / mixed;
    }
    let sum: f64 = out.iter().sum();
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// One synchronous step of the discrete replicator dynamics.
pub fn replicator_step(w: &NormalizedAffinity, x: &StrategyProfile) -> StrategyProfile {
    assert_eq!(w.len(), x.len(), "graph and profile sizes differ");
    let c = x.classes();
    let mut next = vec![0.0; x.x.len()];
    if x.len() >= PARALLEL_ROWS {
        next.par_chunks_mut(c)
            .enumerate()
            .for_each(|(i, out)| update_row(w, x, i, out));
    } else {
        next.chunks_mut(c)
            .enumerate()
            .for_each(|(i, out)| update_row(w, x, i, out));
    }
    StrategyProfile {
        classes: c,
        x: next,
        pinned: x.pinned.clone(),
    }
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub total_payoff: f64,
    pub max_change: f64,
}

/// Iterates [`replicator_step`] from [`init_profile`] until the largest
/// strategy change drops below `config.tol`.
pub fn run_dynamics(
    w: &NormalizedAffinity,
    assignment: &LabelAssignment,
    config: &GameConfig,
) -> Result<EquilibriumResult> {
    run(w, assignment, config, None)
}

/// As [`run_dynamics`], also recording one [`TraceRow`] per iteration.
pub fn run_dynamics_traced(
    w: &NormalizedAffinity,
    assignment: &LabelAssignment,
    config: &GameConfig,
) -> Result<(EquilibriumResult, Vec<TraceRow>)> {
    let mut trace = Vec::new();
    let result = run(w, assignment, config, Some(&mut trace))?;
    Ok((result, trace))
}

fn run(
    w: &NormalizedAffinity,
    assignment: &LabelAssignment,
    config: &GameConfig,
    mut trace: Option<&mut Vec<TraceRow>>,
) -> Result<EquilibriumResult> {
    config.validate()?;
    if w.len() != assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: assignment.len(),
        });
    }
    let mut x = init_profile(assignment);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        let next = replicator_step(w, &x);
        let change = next.max_change(&x);
        x = next;
        iterations += 1;
        if let Some(t) = trace.as_deref_mut() {
            t.push(TraceRow {
                iteration: iterations,
                total_payoff: total_payoff(w, &x),
                max_change: change,
            });
        }
        if change < config.tol {
            converged = true;
            break;
        }
    }
    let (labels, confidence) = extract_labels(&x);
    Ok(EquilibriumResult {
        profile: x,
        iterations,
        converged,
        labels,
        confidence,
    })
}

pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_trace(trace, file)
}

pub fn write_trace<W: Write>(trace: &[TraceRow], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for row in trace {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|e| Error::io("writing trace", e))
}

/// Argmax class per player (lowest index on ties) and its probability.
pub fn extract_labels(x: &StrategyProfile) -> (Vec<usize>, Vec<f64>) {
    (0..x.len())
        .map(|i| {
            let row = x.row(i);
            let mut best = 0;
            for (h, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = h;
                }
            }
            (best, row[best])
        })
        .unzip()
}

/// ε-Nash check: no unlabeled player gains more than `eps` by switching to
/// a pure strategy.
pub fn verify_nash(w: &NormalizedAffinity, x: &StrategyProfile, eps: f64) -> bool {
    let mut p = vec![0.0; x.classes()];
    (0..x.len()).filter(|&i| !x.is_pinned(i)).all(|i| {
        pure_payoffs_into(w, x, i, &mut p);
        let mixed = dot(x.row(i), &p);
        let best = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best <= mixed + eps
    })
}

pub const ENUMERATION_MAX_UNLABELED: usize = 8;
pub const ENUMERATION_MAX_CLASSES: usize = 3;

/// All pure labelings of the unlabeled players (in increasing player
/// order) where each unlabeled player's class is a best response to the
/// others. Ties count as best responses.
pub fn enumerate_pure_nash(
    w: &NormalizedAffinity,
    assignment: &LabelAssignment,
) -> Result<Vec<Vec<usize>>> {
    if w.len() != assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            actual: assignment.len(),
        });
    }
    let free = assignment.unlabeled();
    let c = assignment.classes();
    if free.len() > ENUMERATION_MAX_UNLABELED || c > ENUMERATION_MAX_CLASSES {
        return Err(Error::InstanceTooLarge {
            unlabeled: free.len(),
            classes: c,
        });
    }

    let mut labels: Vec<usize> = assignment.labels().iter().map(|l| l.unwrap_or(0)).collect();
    let mut choice = vec![0usize; free.len()];
    let mut found = Vec::new();
    let mut payoff = vec![0.0; c];
    loop {
        for (&i, &k) in free.iter().zip(&choice) {
            labels[i] = k;
        }
        let stable = free.iter().all(|&i| {
            payoff.fill(0.0);
            for (j, &wij) in w.row(i).iter().enumerate() {
                payoff[labels[j]] += wij;
            }
            let best = payoff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            payoff[labels[i]] >= best - 1e-12 * (1.0 + best.abs())
        });
        if stable {
            found.push(choice.clone());
        }
        // odometer over c^u labelings
        let mut pos = 0;
        loop {
            if pos == choice.len() {
                return Ok(found);
            }
            choice[pos] += 1;
            if choice[pos] < c {
                break;
            }
            choice[pos] = 0;
            pos += 1;
        }
    }
}
