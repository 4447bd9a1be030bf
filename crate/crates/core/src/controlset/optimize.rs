//! Box-constrained descent on the weighted-intervention objectives.
//!
//! Each iteration takes a central-difference gradient of the data term,
//! steps, applies the proximal map of the norm penalty and clamps into
//! `[-1, 1]^N`. The penalty is handled in closed form because its gradient
//! `lambda * w / ||w||` is discontinuous at zero; a plain gradient step on it
//! bounces between the box corners once `step * lambda` exceeds the box.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gradient::estimate_gradient;
use super::objective::{ClassPairObjective, Objective, OptimizerConfig, SingleObjective};
use crate::error::{ProbeError, Result};
use crate::latent::{ConceptId, LatentVector, WeightVector};
use crate::models::{Classifier, Generator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    /// Concept for single-class runs; the source class `j` for class pairs.
    pub concept: ConceptId,
    /// Destination class `k` of a class-to-class run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<ConceptId>,
    pub w: WeightVector,
    pub initial_objective: f64,
    pub objective_history: Vec<f64>,
    /// Final `|delta S|` per direction (one entry for single-class runs).
    pub delta_s: Vec<f64>,
    pub config: OptimizerConfig,
}

impl OptimizationResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_history.last().unwrap_or(&self.initial_objective)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

fn initial_weights(n: usize, cfg: &OptimizerConfig, seed: u64) -> Result<Vec<f64>> {
    if cfg.init_scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let dist = Uniform::new_inclusive(-cfg.init_scale, cfg.init_scale)
        .map_err(|e| ProbeError::invalid(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| dist.sample(&mut rng)).collect())
}

struct Trajectory {
    w: Vec<f64>,
    /// Objective at the returned `w`.
    value: f64,
    initial: f64,
    history: Vec<f64>,
}

fn descend<O: Objective>(obj: &O, cfg: &OptimizerConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mut best: Option<Trajectory> = None;
    for r in 0..cfg.restarts as u64 {
        let t = descend_from(obj, cfg, cfg.seed.wrapping_add(r))?;
        if best.as_ref().is_none_or(|b| t.value < b.value) {
            best = Some(t);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

fn descend_from<O: Objective>(obj: &O, cfg: &OptimizerConfig, seed: u64) -> Result<Trajectory> {
    let (penalty, lambda) = obj.penalty();
    let mut w = initial_weights(obj.width(), cfg, seed)?;
    let initial = obj.value(&w)?;
    if !initial.is_finite() {
        return Err(ProbeError::numeric(Some(0), "initial objective is not finite"));
    }
    let mut best = (initial, w.clone());
    let mut history = Vec::with_capacity(cfg.iterations);

    for it in 0..cfg.iterations {
        let grad = estimate_gradient(|v| obj.data_term(v), &w, cfg.fd_step).map_err(|e| match e {
            ProbeError::Numeric { message, .. } => ProbeError::numeric(Some(it), message),
            other => other,
        })?;
        let mut next: Vec<f64> = w.iter().zip(&grad).map(|(x, g)| x - cfg.step_size * g).collect();
        penalty.prox(cfg.step_size * lambda, &mut next);
        next.iter_mut().for_each(|x| *x = x.clamp(-1.0, 1.0));
        w = next;

        let value = obj.value(&w)?;
        if !value.is_finite() {
            return Err(ProbeError::numeric(Some(it), "objective diverged"));
        }
        if value < best.0 {
            best = (value, w.clone());
        }
        history.push(value);
    }

    // fixed steps can overshoot; never hand back something worse than the start
    let mut value = *history.last().unwrap_or(&initial);
    if value > initial {
        (value, w) = best;
    }
    Ok(Trajectory {
        w,
        value,
        initial,
        history,
    })
}

fn finish<O: Objective>(
    obj: &O,
    t: Trajectory,
    concept: ConceptId,
    target: Option<ConceptId>,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult> {
    Ok(OptimizationResult {
        concept,
        target,
        delta_s: obj.delta_s(&t.w)?,
        w: WeightVector::new(t.w)?,
        initial_objective: t.initial,
        objective_history: t.history,
        config: cfg.clone(),
    })
}

/// Finds `w` maximizing the mean probability change of one concept.
pub fn optimize_weights<G, C>(
    gen: &G,
    clf: &C,
    bases: &[LatentVector],
    concept: ConceptId,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    let obj = SingleObjective::new(gen, clf, bases, concept, cfg)?;
    let t = descend(&obj, cfg)?;
    finish(&obj, t, concept, None, cfg)
}

/// Finds one `w` that moves class-`j` latents toward `k` with `+xi * w` and
/// class-`k` latents toward `j` with `-xi * w`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_class2class<G, C>(
    gen: &G,
    clf: &C,
    bases_j: &[LatentVector],
    bases_k: &[LatentVector],
    j: ConceptId,
    k: ConceptId,
    cfg: &OptimizerConfig,
) -> Result<OptimizationResult>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    let obj = ClassPairObjective::new(gen, clf, bases_j, bases_k, j, k, cfg)?;
    let t = descend(&obj, cfg)?;
    finish(&obj, t, j, Some(k), cfg)
}
