//! Shared domain types: latent points, class probabilities, weight vectors,
//! controlling sets, plus latent sampling and elementary intervention
//! arithmetic.
//!
//! Everything here is an immutable value; the intervention helpers return
//! fresh vectors and never touch their inputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{ProbeError, Result};

/// A point in the generator's input space.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    values: Vec<f64>,
}

impl LatentVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(ProbeError::InvalidSize("latent vector must be non-empty".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProbeError::numeric(
                None,
                format!("latent entry {i} is not finite"),
            ));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Wraps an offset copy of `self`; offsets come from validated callers.
    pub(crate) fn offset_by(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(i, v)).collect();
        Self::new(values)
    }
}

#[derive(Serialize, Deserialize)]
struct LatentDoc {
    n: usize,
    values: Vec<f64>,
}

impl Serialize for LatentVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LatentDoc {
            n: self.values.len(),
            values: self.values.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LatentVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = LatentDoc::deserialize(d)?;
        if doc.n != doc.values.len() {
            return Err(serde::de::Error::custom(format!(
                "declared n={} but {} values",
                doc.n,
                doc.values.len()
            )));
        }
        LatentVector::new(doc.values).map_err(serde::de::Error::custom)
    }
}

/// Softmax output of a classifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbabilityVector {
    probs: Vec<f64>,
}

impl ProbabilityVector {
    pub const SUM_TOLERANCE: f64 = 1e-6;

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(ProbeError::InvalidSize("probability vector must be non-empty".into()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(ProbeError::numeric(None, "probability outside [0,1]"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(ProbeError::numeric(
                None,
                format!("probabilities sum to {sum}"),
            ));
        }
        Ok(Self { probs })
    }

    /// Numerically stable softmax over raw logits.
    pub fn softmax(logits: &[f64]) -> Result<Self> {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(ProbeError::numeric(None, "non-finite logits"));
        }
        let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        Self::new(exps.into_iter().map(|e| e / total).collect())
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, concept: ConceptId) -> f64 {
        self.probs[concept.index()]
    }

    /// Index of the largest probability; the lowest index wins ties.
    pub fn argmax(&self) -> ConceptId {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        ConceptId(best)
    }
}

/// A class label scored by the classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConceptId(usize);

impl ConceptId {
    pub fn new(index: usize, num_classes: usize) -> Result<Self> {
        if index >= num_classes {
            return Err(ProbeError::Index {
                index,
                len: num_classes,
            });
        }
        Ok(Self(index))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl std::fmt::Display for ConceptId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One bidirectional single-dimension sweep: offsets `k * delta` for
/// `k` in `-steps..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterventionGrid {
    pub dim: usize,
    pub delta: f64,
    pub steps: usize,
}

impl InterventionGrid {
    pub fn new(dim: usize, delta: f64, steps: usize) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(ProbeError::invalid(format!("step size {delta} must be finite and >= 0")));
        }
        if steps == 0 {
            return Err(ProbeError::invalid("steps per direction must be >= 1"));
        }
        Ok(Self { dim, delta, steps })
    }

    /// Latent offset at grid index `k`.
    pub fn offset(&self, k: i64) -> f64 {
        k as f64 * self.delta
    }

    pub fn rows(&self) -> usize {
        2 * self.steps + 1
    }
}

/// Per-dimension intervention coefficients, each in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    /// Builds a weight vector, clamping every entry into `[-1, 1]`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| w.is_nan()) {
            return Err(ProbeError::numeric(None, "NaN weight"));
        }
        Ok(Self {
            weights: weights.into_iter().map(|w| w.clamp(-1.0, 1.0)).collect(),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            weights: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn l2_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }
}

impl<'de> Deserialize<'de> for WeightVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let weights = Vec::<f64>::deserialize(d)?;
        if weights.iter().any(|w| !(-1.0..=1.0).contains(w)) {
            return Err(serde::de::Error::custom("weight outside [-1,1]"));
        }
        Ok(Self { weights })
    }
}

/// Direction of an intervention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(v: f64) -> Self {
        if v < 0.0 {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }
}

impl Serialize for Sign {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.as_f64() as i8)
    }
}

impl<'de> Deserialize<'de> for Sign {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match i8::deserialize(d)? {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(serde::de::Error::custom(format!("sign must be +1 or -1, got {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetEntry {
    pub dim: usize,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Sequential,
    Optimized,
}

/// Signed set of latent dimensions that control one concept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SetDoc", into = "SetDoc")]
pub struct ControllingSet {
    concept: ConceptId,
    entries: Vec<SetEntry>,
    provenance: Provenance,
    threshold: Option<f64>,
}

impl ControllingSet {
    pub fn new(
        concept: ConceptId,
        entries: Vec<SetEntry>,
        provenance: Provenance,
        latent_width: usize,
    ) -> Result<Self> {
        let mut seen = vec![false; latent_width];
        for e in &entries {
            if e.dim >= latent_width {
                return Err(ProbeError::Index {
                    index: e.dim,
                    len: latent_width,
                });
            }
            if std::mem::replace(&mut seen[e.dim], true) {
                return Err(ProbeError::invalid(format!("duplicate dim {} in set", e.dim)));
            }
        }
        Ok(Self {
            concept,
            entries,
            provenance,
            threshold: None,
        })
    }

    pub(crate) fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn concept(&self) -> ConceptId {
        self.concept
    }

    pub fn entries(&self) -> &[SetEntry] {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Absolute threshold used to build the set, when it came from one.
    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dims(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|e| e.dim)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Serialize, Deserialize)]
struct SetDoc {
    concept: usize,
    k: usize,
    entries: Vec<SetEntry>,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
}

impl From<ControllingSet> for SetDoc {
    fn from(s: ControllingSet) -> Self {
        SetDoc {
            concept: s.concept.0,
            k: s.entries.len(),
            entries: s.entries,
            provenance: s.provenance,
            threshold: s.threshold,
        }
    }
}

impl TryFrom<SetDoc> for ControllingSet {
    type Error = String;

    fn try_from(doc: SetDoc) -> std::result::Result<Self, String> {
        if doc.k != doc.entries.len() {
            return Err(format!("declared k={} but {} entries", doc.k, doc.entries.len()));
        }
        let mut dims: Vec<usize> = doc.entries.iter().map(|e| e.dim).collect();
        dims.sort_unstable();
        if dims.windows(2).any(|w| w[0] == w[1]) {
            return Err("duplicate dims in controlling set".into());
        }
        Ok(ControllingSet {
            concept: ConceptId(doc.concept),
            entries: doc.entries,
            provenance: doc.provenance,
            threshold: doc.threshold,
        })
    }
}

/// Draws `n` i.i.d. standard normal latent coordinates from a seeded stream.
pub fn sample_latent(n: usize, seed: u64) -> Result<LatentVector> {
    let mut batch = sample_latents(n, 1, seed)?;
    Ok(batch.remove(0))
}

/// Draws `count` latents in sequence from a single seeded stream.
pub fn sample_latents(n: usize, count: usize, seed: u64) -> Result<Vec<LatentVector>> {
    if n == 0 {
        return Err(ProbeError::InvalidSize("latent width must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let values = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            LatentVector::new(values)
        })
        .collect()
}

/// Copy of `z` with `z[dim] += offset`.
pub fn intervene(z: &LatentVector, dim: usize, offset: f64) -> Result<LatentVector> {
    if dim >= z.len() {
        return Err(ProbeError::Index {
            index: dim,
            len: z.len(),
        });
    }
    z.offset_by(|i, v| if i == dim { v + offset } else { v })
}

/// `z + sign * xi * w`, elementwise.
pub fn intervene_weighted(
    z: &LatentVector,
    w: &WeightVector,
    xi: f64,
    sign: Sign,
) -> Result<LatentVector> {
    intervene_raw(z, w.weights(), xi, sign)
}

/// Same as [`intervene_weighted`] for unclamped probe weights.
pub(crate) fn intervene_raw(
    z: &LatentVector,
    w: &[f64],
    xi: f64,
    sign: Sign,
) -> Result<LatentVector> {
    if w.len() != z.len() {
        return Err(ProbeError::Shape {
            what: "weight vector",
            expected: z.len(),
            actual: w.len(),
        });
    }
    let scale = sign.as_f64() * xi;
    z.offset_by(|i, v| v + scale * w[i])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lv(v: &[f64]) -> LatentVector {
        LatentVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sampling_is_seeded() {
        assert_eq!(sample_latent(3, 7).unwrap(), sample_latent(3, 7).unwrap());
        assert_ne!(sample_latent(3, 7).unwrap(), sample_latent(3, 8).unwrap());
        assert_eq!(sample_latent(100, 42).unwrap().len(), 100);
        assert!(matches!(sample_latent(0, 1), Err(ProbeError::InvalidSize(_))));
    }

    #[test]
    fn large_sample_moments() {
        let z = sample_latent(1_000_000, 1).unwrap();
        let n = z.len() as f64;
        let mean = z.values().iter().sum::<f64>() / n;
        let var = z.values().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn intervene_basic() {
        let z = lv(&[0.0, 0.0, 0.0]);
        assert_eq!(intervene(&z, 1, 0.5).unwrap().values(), &[0.0, 0.5, 0.0]);
        assert_eq!(intervene(&z, 2, 0.0).unwrap(), z);
        assert!(matches!(
            intervene(&z, 3, 1.0),
            Err(ProbeError::Index { index: 3, len: 3 })
        ));
    }

    #[test]
    fn intervene_weighted_arithmetic() {
        let z = lv(&[1.0, 1.0]);
        let w = WeightVector::new(vec![0.5, -1.0]).unwrap();
        let out = intervene_weighted(&z, &w, 2.0, Sign::Positive).unwrap();
        assert_eq!(out.values(), &[2.0, -1.0]);
        let zero = WeightVector::zeros(2);
        assert_eq!(intervene_weighted(&z, &zero, 9.0, Sign::Positive).unwrap(), z);
        let short = WeightVector::zeros(3);
        assert!(matches!(
            intervene_weighted(&z, &short, 1.0, Sign::Positive),
            Err(ProbeError::Shape { .. })
        ));
    }

    #[test]
    fn weights_are_clamped() {
        let w = WeightVector::new(vec![2.0, -3.0, 0.25]).unwrap();
        assert_eq!(w.weights(), &[1.0, -1.0, 0.25]);
        assert!(WeightVector::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let p = ProbabilityVector::softmax(&[0.0; 4]).unwrap();
        assert!(p.probs().iter().all(|&v| v == 0.25));
        assert!(ProbabilityVector::new(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn latent_json_round_trip_is_exact() {
        let z = sample_latent(50, 3).unwrap();
        let text = serde_json::to_string(&z).unwrap();
        assert!(text.starts_with("{\"n\":50,"));
        let back: LatentVector = serde_json::from_str(&text).unwrap();
        assert_eq!(back, z);
        assert!(serde_json::from_str::<LatentVector>(r#"{"n":2,"values":[1.0]}"#).is_err());
    }

    #[test]
    fn controlling_set_json() {
        let c = ConceptId::new(3, 10).unwrap();
        let set = ControllingSet::new(
            c,
            vec![
                SetEntry { dim: 4, sign: Sign::Positive },
                SetEntry { dim: 9, sign: Sign::Negative },
            ],
            Provenance::Optimized,
            10,
        )
        .unwrap();
        let text = serde_json::to_string(&set).unwrap();
        assert_eq!(
            text,
            r#"{"concept":3,"k":2,"entries":[{"dim":4,"sign":1},{"dim":9,"sign":-1}],"provenance":"optimized"}"#
        );
        assert_eq!(serde_json::from_str::<ControllingSet>(&text).unwrap(), set);
        let dup = vec![SetEntry { dim: 1, sign: Sign::Positive }; 2];
        assert!(ControllingSet::new(c, dup, Provenance::Sequential, 10).is_err());
    }

    fn latent_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, 1..32)
    }

    proptest! {
        #[test]
        fn intervene_composes(v in latent_strategy(), a in -5.0f64..5.0, b in -5.0f64..5.0, pick in 0usize..32) {
            let z = LatentVector::new(v).unwrap();
            let dim = pick % z.len();
            let twice = intervene(&intervene(&z, dim, a).unwrap(), dim, b).unwrap();
            let once = intervene(&z, dim, a + b).unwrap();
            for (x, y) in twice.values().iter().zip(once.values()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            // offset then its negation restores the base up to rounding
            let back = intervene(&intervene(&z, dim, a).unwrap(), dim, -a).unwrap();
            prop_assert!((back.values()[dim] - z.values()[dim]).abs() <= 1e-14 * (1.0 + a.abs()));
            prop_assert_eq!(intervene(&z, dim, a).unwrap(), intervene(&z, dim, a).unwrap());
        }

        #[test]
        fn weighted_pair_is_identity_for_dyadic_steps(
            v in prop::collection::vec(-64i32..64, 1..16),
            w in prop::collection::vec(-4i32..=4, 16),
            xi_num in 1i32..8,
        ) {
            // dyadic rationals keep every intermediate exactly representable
            let z = LatentVector::new(v.iter().map(|&x| x as f64 / 8.0).collect()).unwrap();
            let weights = WeightVector::new(w[..z.len()].iter().map(|&x| x as f64 / 4.0).collect()).unwrap();
            let xi = xi_num as f64 / 2.0;
            let fwd = intervene_weighted(&z, &weights, xi, Sign::Positive).unwrap();
            let back = intervene_weighted(&fwd, &weights, xi, Sign::Negative).unwrap();
            prop_assert_eq!(back, z);
        }
    }
}
