use serde::{Deserialize, Serialize};

use super::optimize::OptimizationResult;
use crate::apcr::{rank_dimensions, ApcrMatrix};
use crate::error::{ProbeError, Result};
use crate::latent::{ConceptId, ControllingSet, Provenance, SetEntry, Sign};

pub const DEFAULT_TOP_K: usize = 10;

/// How optimized weights are cut down to a controlling set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Keep dims with `|w_i| > t`.
    AbsThreshold(f64),
    /// Keep the `k` largest `|w_i|`, ties to the lower dim.
    TopK(usize),
}

pub fn threshold_controlling_set(
    result: &OptimizationResult,
    concept: ConceptId,
    mode: Selection,
) -> Result<ControllingSet> {
    let w = result.w.weights();
    let n = w.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    let keep: Vec<usize> = match mode {
        Selection::AbsThreshold(t) => {
            if !(t.is_finite() && t > 0.0) {
                return Err(ProbeError::invalid(format!("threshold {t} must be > 0")));
            }
            order.into_iter().filter(|&d| w[d].abs() > t).collect()
        }
        Selection::TopK(k) => {
            if k == 0 || k > n {
                return Err(ProbeError::invalid(format!("top-k needs 1 <= k <= {n}, got {k}")));
            }
            order.truncate(k);
            order
        }
    };
    let entries = keep
        .into_iter()
        .map(|dim| SetEntry {
            dim,
            sign: Sign::of(w[dim]),
        })
        .collect();
    let set = ControllingSet::new(concept, entries, Provenance::Optimized, n)?;
    Ok(match mode {
        Selection::AbsThreshold(t) => set.with_threshold(t),
        Selection::TopK(_) => set,
    })
}

/// Top-`k` dims by APCR. A dim is signed positive when pushing it up
/// leaves the concept more probable than pushing it down.
pub fn sequential_controlling_set(
    matrix: &ApcrMatrix,
    concept: ConceptId,
    k: usize,
) -> Result<ControllingSet> {
    let n = matrix.latent_width();
    if k == 0 || k > n {
        return Err(ProbeError::invalid(format!("top-k needs 1 <= k <= {n}, got {k}")));
    }
    let entries = rank_dimensions(matrix, concept)?
        .into_iter()
        .take(k)
        .map(|(dim, _)| SetEntry {
            dim,
            sign: Sign::of(matrix.direction(dim, concept)),
        })
        .collect();
    ControllingSet::new(concept, entries, Provenance::Sequential, n)
}

/// `|dims(a) & dims(b)| / k` for two sets of equal size `k`; signs ignored.
pub fn intersection_ratio(a: &ControllingSet, b: &ControllingSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(ProbeError::invalid(format!(
            "intersection ratio needs equal set sizes, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(ProbeError::invalid("intersection ratio of empty sets"));
    }
    let shared = a.dims().filter(|d| b.dims().any(|e| e == *d)).count();
    Ok(shared as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controlset::OptimizerConfig;
    use crate::latent::WeightVector;

    fn result_with(w: Vec<f64>) -> OptimizationResult {
        OptimizationResult {
            concept: ConceptId::new(0, 2).unwrap(),
            target: None,
            w: WeightVector::new(w).unwrap(),
            initial_objective: 1.0,
            objective_history: vec![0.5],
            delta_s: vec![0.5],
            config: OptimizerConfig::default(),
        }
    }

    fn set(dims: &[usize]) -> ControllingSet {
        let entries = dims
            .iter()
            .map(|&dim| SetEntry { dim, sign: Sign::Positive })
            .collect();
        ControllingSet::new(ConceptId::new(0, 1).unwrap(), entries, Provenance::Optimized, 100).unwrap()
    }

    #[test]
    fn absolute_threshold() {
        let r = result_with(vec![0.9, -0.8, 0.01, 0.0]);
        let c = r.concept;
        let s = threshold_controlling_set(&r, c, Selection::AbsThreshold(0.5)).unwrap();
        assert_eq!(
            s.entries(),
            &[
                SetEntry { dim: 0, sign: Sign::Positive },
                SetEntry { dim: 1, sign: Sign::Negative }
            ]
        );
        assert_eq!(s.provenance(), Provenance::Optimized);
        assert_eq!(s.threshold(), Some(0.5));
        assert!(threshold_controlling_set(&r, c, Selection::AbsThreshold(0.95)).unwrap().is_empty());
        assert!(threshold_controlling_set(&r, c, Selection::AbsThreshold(0.0)).is_err());
    }

    #[test]
    fn top_k_size_and_ties() {
        let r = result_with(vec![0.1, -0.3, 0.3, 0.05, 0.2, -0.9, 0.0]);
        let c = r.concept;
        let s = threshold_controlling_set(&r, c, Selection::TopK(5)).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.dims().collect::<Vec<_>>(), vec![5, 1, 2, 4, 0]);
        assert!(threshold_controlling_set(&r, c, Selection::TopK(8)).is_err());
        assert!(threshold_controlling_set(&r, c, Selection::TopK(0)).is_err());
    }

    #[test]
    fn ratio_cases() {
        let a = set(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 9]);
        assert_eq!(intersection_ratio(&a, &a).unwrap(), 1.0);
        let b = set(&[10, 11, 12, 13, 14, 15, 16, 17, 18, 19]);
        assert_eq!(intersection_ratio(&a, &b).unwrap(), 0.0);
        let nine = set(&[0, 1, 2, 3, 4, 5, 6, 7, 8, 42]);
        assert_eq!(intersection_ratio(&a, &nine).unwrap(), 0.9);
        assert_eq!(intersection_ratio(&nine, &a).unwrap(), 0.9);
        assert!(intersection_ratio(&a, &set(&[1, 2])).is_err());
    }
}
