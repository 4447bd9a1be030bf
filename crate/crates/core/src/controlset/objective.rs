//! Weighted-intervention objectives.
//!
//! Both objectives split into a data term, which only the models can
//! evaluate, and a norm penalty on `w` that is known in closed form.

use serde::{Deserialize, Serialize};

use crate::error::{ProbeError, Result};
use crate::latent::{intervene_raw, ConceptId, LatentVector, Sign, WeightVector};
use crate::models::{check_latent, check_pair, score, Classifier, Generator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Penalty {
    /// `lambda * ||w||_2`
    #[default]
    L2,
    /// `lambda * ||w||_2^2`
    SquaredL2,
}

impl Penalty {
    pub fn value(self, lambda: f64, w: &[f64]) -> f64 {
        let sq: f64 = w.iter().map(|v| v * v).sum();
        match self {
            Penalty::L2 => lambda * sq.sqrt(),
            Penalty::SquaredL2 => lambda * sq,
        }
    }

    /// Proximal map of `tau * penalty`.
    pub(crate) fn prox(self, tau: f64, v: &mut [f64]) {
        let scale = match self {
            Penalty::L2 => {
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > tau {
                    1.0 - tau / norm
                } else {
                    0.0
                }
            }
            Penalty::SquaredL2 => 1.0 / (1.0 + 2.0 * tau),
        };
        v.iter_mut().for_each(|x| *x *= scale);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Intervention constant multiplying `w`.
    pub xi: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub step_size: f64,
    /// Central-difference probe width.
    pub fd_step: f64,
    pub seed: u64,
    /// `w` starts uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Number of base latents per objective evaluation.
    pub batch: usize,
    #[serde(default)]
    pub penalty: Penalty,
    /// Independent starts from seeds `seed, seed + 1, ..`; the run with the
    /// lowest final objective is kept.
    #[serde(default = "one")]
    pub restarts: usize,
}

fn one() -> usize {
    1
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            xi: 3.0,
            lambda: 0.01,
            iterations: 200,
            step_size: 0.05,
            fd_step: 1e-3,
            seed: 1,
            init_scale: 0.1,
            batch: 16,
            penalty: Penalty::L2,
            restarts: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.xi) {
            return Err(ProbeError::invalid("xi must be > 0"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(ProbeError::invalid("lambda must be >= 0"));
        }
        if self.iterations == 0 {
            return Err(ProbeError::invalid("iterations must be >= 1"));
        }
        if !positive(self.step_size) {
            return Err(ProbeError::invalid("step size must be > 0"));
        }
        if !positive(self.fd_step) {
            return Err(ProbeError::invalid("finite-difference step must be > 0"));
        }
        if !(self.init_scale.is_finite() && (0.0..=1.0).contains(&self.init_scale)) {
            return Err(ProbeError::invalid("init scale must lie in [0,1]"));
        }
        if self.batch == 0 {
            return Err(ProbeError::invalid("batch must be >= 1"));
        }
        if self.restarts == 0 {
            return Err(ProbeError::invalid("restarts must be >= 1"));
        }
        Ok(())
    }
}

/// What the optimizer needs from an objective.
pub trait Objective: Sync {
    fn width(&self) -> usize;

    /// Model-dependent part; the black box that gets differentiated numerically.
    fn data_term(&self, w: &[f64]) -> Result<f64>;

    /// `|delta S|` per intervention direction, averaged over bases.
    fn delta_s(&self, w: &[f64]) -> Result<Vec<f64>>;

    fn penalty(&self) -> (Penalty, f64);

    fn value(&self, w: &[f64]) -> Result<f64> {
        let (penalty, lambda) = self.penalty();
        Ok(self.data_term(w)? + penalty.value(lambda, w))
    }
}

fn check_weights(w: &[f64], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(ProbeError::Shape {
            what: "weight vector",
            expected: n,
            actual: w.len(),
        });
    }
    Ok(())
}

/// Mean over bases of `|Q_j(G(z + sign * xi * w)) - Q_j(G(z))|`.
#[allow(clippy::too_many_arguments)]
fn mean_abs_change<G, C>(
    gen: &G,
    clf: &C,
    bases: &[LatentVector],
    base_scores: &[f64],
    concept: ConceptId,
    w: &[f64],
    xi: f64,
    sign: Sign,
) -> Result<f64>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    let mut total = 0.0;
    for (z, s0) in bases.iter().zip(base_scores) {
        let moved = intervene_raw(z, w, xi, sign)?;
        total += (score(gen, clf, &moved)?.get(concept) - s0).abs();
    }
    Ok(total / bases.len() as f64)
}

fn base_scores<G, C>(gen: &G, clf: &C, bases: &[LatentVector], concept: ConceptId) -> Result<Vec<f64>>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    if bases.is_empty() {
        return Err(ProbeError::invalid("base batch is empty"));
    }
    bases
        .iter()
        .map(|z| {
            check_latent(gen, z)?;
            Ok(score(gen, clf, z)?.get(concept))
        })
        .collect()
}

fn checked_concept<C: Classifier + ?Sized>(clf: &C, concept: ConceptId) -> Result<ConceptId> {
    ConceptId::new(concept.index(), clf.num_classes())
}

/// `mean(1 - |delta S_j|) + penalty`, with base scores cached.
pub struct SingleObjective<'a, G: ?Sized, C: ?Sized> {
    gen: &'a G,
    clf: &'a C,
    bases: &'a [LatentVector],
    concept: ConceptId,
    base_scores: Vec<f64>,
    xi: f64,
    lambda: f64,
    penalty: Penalty,
}

impl<'a, G, C> SingleObjective<'a, G, C>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    pub fn new(
        gen: &'a G,
        clf: &'a C,
        bases: &'a [LatentVector],
        concept: ConceptId,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_pair(gen, clf)?;
        let concept = checked_concept(clf, concept)?;
        Ok(Self {
            gen,
            clf,
            bases,
            concept,
            base_scores: base_scores(gen, clf, bases, concept)?,
            xi: cfg.xi,
            lambda: cfg.lambda,
            penalty: cfg.penalty,
        })
    }
}

impl<G, C> Objective for SingleObjective<'_, G, C>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    fn width(&self) -> usize {
        self.gen.latent_width()
    }

    fn data_term(&self, w: &[f64]) -> Result<f64> {
        Ok(1.0 - self.delta_s(w)?[0])
    }

    fn delta_s(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_weights(w, self.width())?;
        let d = mean_abs_change(
            self.gen,
            self.clf,
            self.bases,
            &self.base_scores,
            self.concept,
            w,
            self.xi,
            Sign::Positive,
        )?;
        Ok(vec![d])
    }

    fn penalty(&self) -> (Penalty, f64) {
        (self.penalty, self.lambda)
    }
}

/// `2 - |delta S_{k->j}| - |delta S_{j->k}| + penalty`, where class-`k`
/// bases move by `-xi * w` and class-`j` bases by `+xi * w`.
pub struct ClassPairObjective<'a, G: ?Sized, C: ?Sized> {
    gen: &'a G,
    clf: &'a C,
    bases_j: &'a [LatentVector],
    bases_k: &'a [LatentVector],
    j: ConceptId,
    k: ConceptId,
    /// `Q_j` on the class-`k` bases.
    scores_kj: Vec<f64>,
    /// `Q_k` on the class-`j` bases.
    scores_jk: Vec<f64>,
    xi: f64,
    lambda: f64,
    penalty: Penalty,
}

impl<'a, G, C> ClassPairObjective<'a, G, C>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gen: &'a G,
        clf: &'a C,
        bases_j: &'a [LatentVector],
        bases_k: &'a [LatentVector],
        j: ConceptId,
        k: ConceptId,
        cfg: &OptimizerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if j == k {
            return Err(ProbeError::invalid(format!(
                "class-to-class needs two different classes, got {j} twice"
            )));
        }
        check_pair(gen, clf)?;
        let j = checked_concept(clf, j)?;
        let k = checked_concept(clf, k)?;
        Ok(Self {
            gen,
            clf,
            bases_j,
            bases_k,
            j,
            k,
            scores_kj: base_scores(gen, clf, bases_k, j)?,
            scores_jk: base_scores(gen, clf, bases_j, k)?,
            xi: cfg.xi,
            lambda: cfg.lambda,
            penalty: cfg.penalty,
        })
    }
}

impl<G, C> Objective for ClassPairObjective<'_, G, C>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    fn width(&self) -> usize {
        self.gen.latent_width()
    }

    fn data_term(&self, w: &[f64]) -> Result<f64> {
        let d = self.delta_s(w)?;
        Ok(2.0 - d[0] - d[1])
    }

    /// `[|delta S_{k->j}|, |delta S_{j->k}|]`
    fn delta_s(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_weights(w, self.width())?;
        let k_to_j = mean_abs_change(
            self.gen,
            self.clf,
            self.bases_k,
            &self.scores_kj,
            self.j,
            w,
            self.xi,
            Sign::Negative,
        )?;
        let j_to_k = mean_abs_change(
            self.gen,
            self.clf,
            self.bases_j,
            &self.scores_jk,
            self.k,
            w,
            self.xi,
            Sign::Positive,
        )?;
        Ok(vec![k_to_j, j_to_k])
    }

    fn penalty(&self) -> (Penalty, f64) {
        (self.penalty, self.lambda)
    }
}

pub fn objective_single<G, C>(
    gen: &G,
    clf: &C,
    bases: &[LatentVector],
    concept: ConceptId,
    w: &WeightVector,
    cfg: &OptimizerConfig,
) -> Result<f64>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    SingleObjective::new(gen, clf, bases, concept, cfg)?.value(w.weights())
}

#[allow(clippy::too_many_arguments)]
pub fn objective_class2class<G, C>(
    gen: &G,
    clf: &C,
    bases_j: &[LatentVector],
    bases_k: &[LatentVector],
    j: ConceptId,
    k: ConceptId,
    w: &WeightVector,
    cfg: &OptimizerConfig,
) -> Result<f64>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    ClassPairObjective::new(gen, clf, bases_j, bases_k, j, k, cfg)?.value(w.weights())
}
