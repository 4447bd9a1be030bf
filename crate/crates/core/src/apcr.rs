//! Sequential single-dimension intervention sweeps and the averaged
//! probability change ratio (APCR).
//!
//! For latent dimension `i` the base latent is moved to `z + k * delta * e_i`
//! for `k` in `-m..=m` and the classifier score `S^k` of each concept is
//! recorded. Two readings of the score change are offered:
//!
//! * [`ApcrVariant::Endpoint`]: `(|S^m - S^0| + |S^-m - S^0|) / (2m)`, the
//!   telescoped form of the per-direction sums of step differences.
//! * [`ApcrVariant::TotalVariation`]: `sum_k |S^(k+1) - S^k| / (2m)` over
//!   the whole grid, which also counts changes that cancel end to end.
//!
//! Endpoint never exceeds total variation (triangle inequality).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ProbeError, Result};
use crate::latent::{intervene, ConceptId, InterventionGrid, LatentVector, ProbabilityVector};
use crate::models::{check_latent, check_pair, score, Classifier, Generator};

pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_STEPS: usize = 10;
pub const DEFAULT_BASES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApcrVariant {
    #[default]
    Endpoint,
    TotalVariation,
}

/// Classifier scores along one sweep, rows in ascending `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrace {
    grid: InterventionGrid,
    rows: Vec<ProbabilityVector>,
}

impl SweepTrace {
    pub fn grid(&self) -> &InterventionGrid {
        &self.grid
    }

    pub fn rows(&self) -> &[ProbabilityVector] {
        &self.rows
    }

    /// Scores at grid index `k` in `-m..=m`.
    pub fn row(&self, k: i64) -> &ProbabilityVector {
        &self.rows[(k + self.grid.steps as i64) as usize]
    }

    pub fn num_classes(&self) -> usize {
        self.rows[0].len()
    }

    /// `S^k` for one concept, `k` ascending.
    pub fn series(&self, concept: ConceptId) -> Vec<f64> {
        self.rows.iter().map(|r| r.get(concept)).collect()
    }
}

pub fn sweep<G, C>(gen: &G, clf: &C, z: &LatentVector, grid: InterventionGrid) -> Result<SweepTrace>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    check_pair(gen, clf)?;
    check_latent(gen, z)?;
    if grid.dim >= z.len() {
        return Err(ProbeError::Index {
            index: grid.dim,
            len: z.len(),
        });
    }
    let m = grid.steps as i64;
    let rows = (-m..=m)
        .map(|k| score(gen, clf, &intervene(z, grid.dim, grid.offset(k))?))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTrace { grid, rows })
}

/// APCR of one concept along one sweep.
pub fn apcr_from_trace(trace: &SweepTrace, concept: ConceptId, variant: ApcrVariant) -> Result<f64> {
    if concept.index() >= trace.num_classes() {
        return Err(ProbeError::Index {
            index: concept.index(),
            len: trace.num_classes(),
        });
    }
    Ok(apcr_of_series(&trace.series(concept), variant))
}

/// APCR over a raw score series of odd length `2m + 1`.
pub fn apcr_of_series(s: &[f64], variant: ApcrVariant) -> f64 {
    debug_assert!(s.len() % 2 == 1 && s.len() >= 3);
    let m = s.len() / 2;
    let denom = (2 * m) as f64;
    match variant {
        ApcrVariant::Endpoint => ((s[2 * m] - s[m]).abs() + (s[0] - s[m]).abs()) / denom,
        ApcrVariant::TotalVariation => {
            s.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>() / denom
        }
    }
}

/// N x L table of APCR scores averaged over a set of base latents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct ApcrMatrix {
    n: usize,
    l: usize,
    values: Vec<f64>,
    direction: Vec<f64>,
    variant: ApcrVariant,
    base_count: usize,
    delta: f64,
    steps: usize,
}

impl ApcrMatrix {
    pub fn latent_width(&self) -> usize {
        self.n
    }

    pub fn num_classes(&self) -> usize {
        self.l
    }

    pub fn variant(&self) -> ApcrVariant {
        self.variant
    }

    pub fn base_count(&self) -> usize {
        self.base_count
    }

    pub fn get(&self, dim: usize, concept: ConceptId) -> f64 {
        self.values[dim * self.l + concept.index()]
    }

    /// Mean `S^m - S^-m`: positive when pushing the dim up raises the concept.
    pub fn direction(&self, dim: usize, concept: ConceptId) -> f64 {
        self.direction[dim * self.l + concept.index()]
    }

    /// Scores of every dim for one concept.
    pub fn column(&self, concept: ConceptId) -> Vec<f64> {
        (0..self.n).map(|d| self.get(d, concept)).collect()
    }

    pub(crate) fn check_concept(&self, concept: ConceptId) -> Result<()> {
        if concept.index() >= self.l {
            return Err(ProbeError::Index {
                index: concept.index(),
                len: self.l,
            });
        }
        Ok(())
    }

    /// `dim,class0,..` header then one row per dim, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("dim");
        for j in 0..self.l {
            out.push_str(&format!(",class{j}"));
        }
        out.push('\n');
        for d in 0..self.n {
            out.push_str(&d.to_string());
            for v in &self.values[d * self.l..(d + 1) * self.l] {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    variant: ApcrVariant,
    base_count: usize,
    delta: f64,
    steps: usize,
    n: usize,
    l: usize,
    values: Vec<Vec<f64>>,
    direction: Vec<Vec<f64>>,
}

impl From<ApcrMatrix> for MatrixDoc {
    fn from(m: ApcrMatrix) -> Self {
        let rows = |v: &[f64]| v.chunks(m.l).map(<[f64]>::to_vec).collect();
        MatrixDoc {
            variant: m.variant,
            base_count: m.base_count,
            delta: m.delta,
            steps: m.steps,
            n: m.n,
            l: m.l,
            values: rows(&m.values),
            direction: rows(&m.direction),
        }
    }
}

impl TryFrom<MatrixDoc> for ApcrMatrix {
    type Error = String;

    fn try_from(doc: MatrixDoc) -> std::result::Result<Self, String> {
        let flat = |rows: Vec<Vec<f64>>, what: &str| {
            if rows.len() != doc.n || rows.iter().any(|r| r.len() != doc.l) {
                return Err(format!("{what} is not {}x{}", doc.n, doc.l));
            }
            Ok(rows.into_iter().flatten().collect::<Vec<f64>>())
        };
        let values = flat(doc.values, "values")?;
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err("APCR values must be finite and >= 0".into());
        }
        Ok(ApcrMatrix {
            n: doc.n,
            l: doc.l,
            values,
            direction: flat(doc.direction, "direction")?,
            variant: doc.variant,
            base_count: doc.base_count,
            delta: doc.delta,
            steps: doc.steps,
        })
    }
}

/// Sweeps every latent dim around every base and averages the APCR scores.
///
/// Dims are processed in parallel; each base contributes in list order, so
/// the result does not depend on scheduling.
pub fn apcr_matrix<G, C>(
    gen: &G,
    clf: &C,
    bases: &[LatentVector],
    delta: f64,
    steps: usize,
    variant: ApcrVariant,
) -> Result<ApcrMatrix>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    if bases.is_empty() {
        return Err(ProbeError::invalid("at least one base latent is required"));
    }
    check_pair(gen, clf)?;
    for z in bases {
        check_latent(gen, z)?;
    }
    InterventionGrid::new(0, delta, steps)?;
    let n = gen.latent_width();
    let l = clf.num_classes();
    let count = bases.len() as f64;

    let per_dim = (0..n)
        .into_par_iter()
        .map(|dim| {
            let grid = InterventionGrid::new(dim, delta, steps)?;
            let mut scores = vec![0.0; l];
            let mut direction = vec![0.0; l];
            for z in bases {
                let trace = sweep(gen, clf, z, grid)?;
                for j in 0..l {
                    let s = trace.series(ConceptId::new(j, l)?);
                    scores[j] += apcr_of_series(&s, variant);
                    direction[j] += s[2 * steps] - s[0];
                }
            }
            scores.iter_mut().for_each(|v| *v /= count);
            direction.iter_mut().for_each(|v| *v /= count);
            Ok((scores, direction))
        })
        .collect::<Result<Vec<_>>>()?;

    let (values, direction): (Vec<_>, Vec<_>) = per_dim.into_iter().unzip();
    Ok(ApcrMatrix {
        n,
        l,
        values: values.into_iter().flatten().collect(),
        direction: direction.into_iter().flatten().collect(),
        variant,
        base_count: bases.len(),
        delta,
        steps,
    })
}

/// Dims ordered by descending score, ties by ascending dim.
pub fn rank_dimensions(matrix: &ApcrMatrix, concept: ConceptId) -> Result<Vec<(usize, f64)>> {
    matrix.check_concept(concept)?;
    let mut ranked: Vec<(usize, f64)> = matrix.column(concept).into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Equal-width histogram of one concept's scores over `[0, max]`.
pub fn apcr_histogram(matrix: &ApcrMatrix, concept: ConceptId, bins: usize) -> Result<Vec<HistogramBin>> {
    if bins == 0 {
        return Err(ProbeError::invalid("histogram needs at least one bin"));
    }
    matrix.check_concept(concept)?;
    let column = matrix.column(concept);
    let max = column.iter().copied().fold(0.0, f64::max);
    let width = max / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            lo: width * i as f64,
            hi: if i + 1 == bins { max } else { width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for v in column {
        let idx = if width > 0.0 {
            ((v / width) as usize).min(bins - 1)
        } else {
            0
        };
        out[idx].count += 1;
    }
    Ok(out)
}

pub fn histogram_csv(bins: &[HistogramBin]) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for b in bins {
        out.push_str(&format!("{:.16e},{:.16e},{}\n", b.lo, b.hi, b.count));
    }
    out
}
