//! Concept manipulation with discovered controlling sets, extreme impulse
//! probes, class-to-class translation, and PGM montages of the results.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ProbeError, Result};
use crate::latent::{
    intervene, intervene_weighted, ConceptId, ControllingSet, LatentVector, ProbabilityVector,
    Sign, WeightVector,
};
use crate::models::{check_latent, Classifier, Generator, Image};

pub const DEFAULT_IMPULSE: f64 = 10.0;
pub const GUTTER: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Intervention strength applied to every set dimension.
    pub s: f64,
    pub image: Image,
    pub probs: ProbabilityVector,
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameReport {
    pub s: f64,
    pub probs: Vec<f64>,
    pub argmax: usize,
}

impl From<&Frame> for FrameReport {
    fn from(f: &Frame) -> Self {
        FrameReport {
            s: f.s,
            probs: f.probs.probs().to_vec(),
            argmax: f.probs.argmax().index(),
        }
    }
}

pub fn frames_report(frames: &[Frame]) -> Vec<FrameReport> {
    frames.iter().map(FrameReport::from).collect()
}

/// Frames at `s = strength * t / steps` for `t = 0..=steps`, each generated
/// from `z + s * sum(sign_d * e_d)` over the set. Frame 0 is the base.
pub fn manipulate_with_set<G, C>(
    gen: &G,
    clf: &C,
    z: &LatentVector,
    set: &ControllingSet,
    strength: f64,
    steps: usize,
) -> Result<Vec<Frame>>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    if set.is_empty() {
        return Err(ProbeError::invalid("controlling set is empty"));
    }
    if steps == 0 {
        return Err(ProbeError::invalid("steps must be >= 1"));
    }
    if !strength.is_finite() {
        return Err(ProbeError::invalid("strength must be finite"));
    }
    check_latent(gen, z)?;
    if let Some(d) = set.dims().find(|&d| d >= z.len()) {
        return Err(ProbeError::Index { index: d, len: z.len() });
    }
    let mut direction = vec![0.0; z.len()];
    for e in set.entries() {
        direction[e.dim] = e.sign.as_f64();
    }
    (0..=steps)
        .into_par_iter()
        .map(|t| {
            let s = strength * t as f64 / steps as f64;
            let moved = z.offset_by(|i, v| v + s * direction[i])?;
            let image = gen.generate(&moved)?;
            let probs = clf.classify(&image)?;
            Ok(Frame { s, image, probs })
        })
        .collect()
}

/// Single-dimension impulse far outside the prior; returns the image and
/// the class it lands in.
pub fn extreme_impulse<G, C>(
    gen: &G,
    clf: &C,
    z: &LatentVector,
    dim: usize,
    magnitude: f64,
    sign: Sign,
) -> Result<(Image, ConceptId)>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    if !(magnitude.is_finite() && magnitude > 0.0) {
        return Err(ProbeError::invalid("impulse magnitude must be > 0"));
    }
    check_latent(gen, z)?;
    let moved = intervene(z, dim, sign.as_f64() * magnitude)?;
    let image = gen.generate(&moved)?;
    let class = clf.classify(&image)?.argmax();
    Ok((image, class))
}

/// Generates from `z + sign * xi * w`: `Positive` moves class `j` toward
/// `k`, `Negative` moves class `k` toward `j`.
pub fn translate<G, C>(
    gen: &G,
    clf: &C,
    z: &LatentVector,
    w: &WeightVector,
    xi: f64,
    direction: Sign,
) -> Result<(Image, ProbabilityVector)>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    check_latent(gen, z)?;
    let moved = intervene_weighted(z, w, xi, direction)?;
    let image = gen.generate(&moved)?;
    let probs = clf.classify(&image)?;
    Ok((image, probs))
}

/// Maps `[-1, 1]` to `0..=255` by `round((v + 1) * 127.5)`, halves rounding up.
pub fn quantize(v: f64) -> u8 {
    ((v + 1.0) * 127.5 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Binary PGM (P5) of a rectangular grid of equally sized images, rows
/// separated by a white gutter.
pub fn montage_bytes(grid: &[Vec<Image>]) -> Result<Vec<u8>> {
    let cols = grid.first().map(Vec::len).unwrap_or(0);
    if cols == 0 {
        return Err(ProbeError::invalid("montage grid is empty"));
    }
    if grid.iter().any(|row| row.len() != cols) {
        return Err(ProbeError::invalid("montage grid is not rectangular"));
    }
    let (th, tw) = (grid[0][0].height(), grid[0][0].width());
    if grid.iter().flatten().any(|im| (im.height(), im.width()) != (th, tw)) {
        return Err(ProbeError::invalid("montage tiles differ in size"));
    }
    let rows = grid.len();
    let width = cols * tw;
    let height = rows * th + GUTTER * (rows - 1);
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.reserve(width * height);
    for (r, row) in grid.iter().enumerate() {
        if r > 0 {
            out.extend(std::iter::repeat_n(255u8, GUTTER * width));
        }
        for y in 0..th {
            for im in row {
                out.extend((0..tw).map(|x| quantize(im.get(y, x))));
            }
        }
    }
    Ok(out)
}

pub fn render_montage(grid: &[Vec<Image>], path: impl AsRef<Path>) -> Result<()> {
    let bytes = montage_bytes(grid)?;
    std::fs::write(path, bytes)?;
    Ok(())
}
