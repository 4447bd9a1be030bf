//! Analytic generator/classifier pair with known controlling dimensions.
//!
//! Class `l` gets the logit `sum(gain * z[dim])` over its control entries.
//! The generator renders each logit as a `cell x cell` block of intensity
//! `tanh(logit / logit_scale)`; the classifier reads one pixel per block,
//! inverts the squashing and applies softmax. The round trip recovers the
//! logits up to floating-point rounding while keeping the pair a genuine
//! black box to the analysis code.

use serde::{Deserialize, Serialize};

use super::{check_latent, Classifier, Generator, Image};
use crate::error::{ProbeError, Result};
use crate::latent::{
    ConceptId, ControllingSet, LatentVector, ProbabilityVector, Provenance, SetEntry, Sign,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Control {
    pub dim: usize,
    pub gain: f64,
}

fn default_scale() -> f64 {
    64.0
}

fn default_cell() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub l: usize,
    /// One list of `(dim, gain)` per concept.
    pub control_map: Vec<Vec<Control>>,
    #[serde(default = "default_scale")]
    pub logit_scale: f64,
    #[serde(default = "default_cell")]
    pub cell: usize,
}

impl SyntheticSpec {
    pub fn new(n: usize, control_map: Vec<Vec<Control>>) -> Self {
        Self {
            n,
            l: control_map.len(),
            control_map,
            logit_scale: default_scale(),
            cell: default_cell(),
        }
    }

    /// `classes` concepts with `per_class` distinct control dims each, drawn
    /// without replacement from `0..n` by a seeded shuffle. Gains are
    /// `+gain` for every entry.
    pub fn disjoint(n: usize, classes: usize, per_class: usize, gain: f64, seed: u64) -> Result<Self> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        if classes * per_class > n {
            return Err(ProbeError::Spec(format!(
                "{classes} x {per_class} control dims do not fit in {n}"
            )));
        }
        let mut dims: Vec<usize> = (0..n).collect();
        dims.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let control_map = dims
            .chunks(per_class)
            .take(classes)
            .map(|chunk| chunk.iter().map(|&dim| Control { dim, gain }).collect())
            .collect();
        Ok(Self::new(n, control_map))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(ProbeError::Spec(m));
        if self.n == 0 || self.l == 0 {
            return fail("n and l must be >= 1".into());
        }
        if self.control_map.len() != self.l {
            return fail(format!(
                "control_map has {} entries for {} concepts",
                self.control_map.len(),
                self.l
            ));
        }
        if !(self.logit_scale.is_finite() && self.logit_scale > 0.0) {
            return fail("logit_scale must be positive".into());
        }
        if self.cell == 0 {
            return fail("cell must be >= 1".into());
        }
        for (l, controls) in self.control_map.iter().enumerate() {
            if controls.is_empty() {
                return fail(format!("concept {l} has no control dims"));
            }
            for c in controls {
                if c.dim >= self.n {
                    return fail(format!("concept {l}: dim {} outside 0..{}", c.dim, self.n));
                }
                if !c.gain.is_finite() {
                    return fail(format!("concept {l}: non-finite gain"));
                }
            }
        }
        Ok(())
    }

    /// Concept logits in closed form.
    pub fn logits(&self, z: &[f64]) -> Vec<f64> {
        self.control_map
            .iter()
            .map(|controls| controls.iter().map(|c| c.gain * z[c.dim]).sum())
            .collect()
    }

    /// Per-concept sets of the nonzero-gain dims, signed by their gain.
    pub fn ground_truth_sets(&self) -> Result<Vec<ControllingSet>> {
        self.control_map
            .iter()
            .enumerate()
            .map(|(l, controls)| {
                // repeated dims merge into one net gain
                let mut net = std::collections::BTreeMap::new();
                for c in controls {
                    *net.entry(c.dim).or_insert(0.0) += c.gain;
                }
                let entries = net
                    .into_iter()
                    .filter(|&(_, g)| g != 0.0)
                    .map(|(dim, g)| SetEntry {
                        dim,
                        sign: Sign::of(g),
                    })
                    .collect();
                ControllingSet::new(ConceptId::new(l, self.l)?, entries, Provenance::Sequential, self.n)
            })
            .collect()
    }

    fn image_shape(&self) -> (usize, usize) {
        (self.cell, self.cell * self.l)
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    spec: SyntheticSpec,
}

#[derive(Debug, Clone)]
pub struct SyntheticClassifier {
    l: usize,
    cell: usize,
    logit_scale: f64,
}

pub fn make_synthetic_generator(
    spec: &SyntheticSpec,
) -> Result<(SyntheticGenerator, SyntheticClassifier)> {
    spec.validate()?;
    Ok((
        SyntheticGenerator { spec: spec.clone() },
        SyntheticClassifier {
            l: spec.l,
            cell: spec.cell,
            logit_scale: spec.logit_scale,
        },
    ))
}

impl SyntheticGenerator {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }
}

impl Generator for SyntheticGenerator {
    fn latent_width(&self) -> usize {
        self.spec.n
    }

    fn image_shape(&self) -> (usize, usize) {
        self.spec.image_shape()
    }

    fn generate(&self, z: &LatentVector) -> Result<Image> {
        check_latent(self, z)?;
        let (h, w) = self.spec.image_shape();
        let cell = self.spec.cell;
        let levels: Vec<f64> = self
            .spec
            .logits(z.values())
            .into_iter()
            .map(|v| (v / self.spec.logit_scale).tanh())
            .collect();
        let mut pixels = Vec::with_capacity(h * w);
        for _ in 0..h {
            for &level in &levels {
                pixels.extend(std::iter::repeat_n(level, cell));
            }
        }
        Image::new(h, w, pixels)
    }
}

impl SyntheticClassifier {
    /// Logits recovered from a rendered image.
    pub fn logits(&self, x: &Image) -> Result<Vec<f64>> {
        if x.pixels().len() != self.input_width() {
            return Err(ProbeError::Shape {
                what: "classifier input",
                expected: self.input_width(),
                actual: x.pixels().len(),
            });
        }
        (0..self.l)
            .map(|l| {
                let p = x.pixels()[l * self.cell];
                if p.abs() >= 1.0 {
                    return Err(ProbeError::numeric(
                        None,
                        format!("rendered level for concept {l} is saturated"),
                    ));
                }
                Ok(self.logit_scale * p.atanh())
            })
            .collect()
    }
}

impl Classifier for SyntheticClassifier {
    fn input_width(&self) -> usize {
        self.cell * self.cell * self.l
    }

    fn num_classes(&self) -> usize {
        self.l
    }

    fn classify(&self, x: &Image) -> Result<ProbabilityVector> {
        ProbabilityVector::softmax(&self.logits(x)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::score;

    fn two_class() -> SyntheticSpec {
        SyntheticSpec::new(
            4,
            vec![
                vec![Control { dim: 0, gain: 2.0 }],
                vec![Control { dim: 1, gain: 2.0 }],
            ],
        )
    }

    #[test]
    fn hand_evaluated_softmax() {
        let (g, c) = make_synthetic_generator(&two_class()).unwrap();
        let z = LatentVector::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = score(&g, &c, &z).unwrap();
        // e^2 / (e^2 + 1)
        let expect = 0.880_797_077_977_882_3;
        assert!((p.probs()[0] - expect).abs() < 1e-12, "{}", p.probs()[0]);
        let zero = LatentVector::zeros(4).unwrap();
        assert_eq!(score(&g, &c, &zero).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn ground_truth_sets_follow_gain_signs() {
        let mut spec = two_class();
        spec.control_map[1].push(Control { dim: 3, gain: -0.5 });
        let sets = spec.ground_truth_sets().unwrap();
        assert_eq!(sets[0].entries(), &[SetEntry { dim: 0, sign: Sign::Positive }]);
        assert_eq!(
            sets[1].entries(),
            &[
                SetEntry { dim: 1, sign: Sign::Positive },
                SetEntry { dim: 3, sign: Sign::Negative }
            ]
        );
    }

    #[test]
    fn spec_validation() {
        let mut spec = two_class();
        spec.control_map[1].clear();
        assert!(matches!(make_synthetic_generator(&spec), Err(ProbeError::Spec(_))));
        let mut spec = two_class();
        spec.control_map[0][0].dim = 4;
        assert!(make_synthetic_generator(&spec).is_err());
        assert!(SyntheticSpec::disjoint(10, 4, 3, 1.0, 0).is_err());
    }

    #[test]
    fn disjoint_spec_uses_distinct_dims() {
        let spec = SyntheticSpec::disjoint(100, 10, 5, 2.0, 9).unwrap();
        let mut dims: Vec<usize> = spec.control_map.iter().flatten().map(|c| c.dim).collect();
        assert_eq!(dims.len(), 50);
        dims.sort_unstable();
        dims.dedup();
        assert_eq!(dims.len(), 50);
        assert_eq!(spec, SyntheticSpec::disjoint(100, 10, 5, 2.0, 9).unwrap());
    }

    #[test]
    fn logit_partials_equal_gains() {
        let spec = SyntheticSpec::disjoint(12, 3, 2, 1.5, 4).unwrap();
        let (g, c) = make_synthetic_generator(&spec).unwrap();
        let base = crate::latent::sample_latent(12, 5).unwrap();
        let h = 1e-3;
        for d in 0..12 {
            let up = crate::latent::intervene(&base, d, h).unwrap();
            let down = crate::latent::intervene(&base, d, -h).unwrap();
            let lu = c.logits(&g.generate(&up).unwrap()).unwrap();
            let ld = c.logits(&g.generate(&down).unwrap()).unwrap();
            for l in 0..3 {
                let fd = (lu[l] - ld[l]) / (2.0 * h);
                let expect = spec.control_map[l]
                    .iter()
                    .filter(|ctl| ctl.dim == d)
                    .map(|ctl| ctl.gain)
                    .sum::<f64>();
                assert!((fd - expect).abs() < 1e-8, "dim {d} class {l}: {fd} vs {expect}");
            }
        }
    }

    #[test]
    fn spec_json_defaults() {
        let spec: SyntheticSpec = serde_json::from_str(
            r#"{"n":4,"l":2,"control_map":[[{"dim":0,"gain":2.0}],[{"dim":1,"gain":2.0}]]}"#,
        )
        .unwrap();
        assert_eq!(spec, two_class());
    }
}
