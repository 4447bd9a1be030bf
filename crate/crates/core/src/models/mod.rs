//! Black-box generator and classifier abstractions.
//!
//! The analysis code only ever sees [`Generator`] and [`Classifier`]; both
//! the dense inference engine ([`NetworkModel`]) and the analytic testbed
//! ([`synthetic`]) implement them.

mod image;
pub mod lpwf;
mod network;
pub mod synthetic;

pub use image::Image;
pub use lpwf::{load_model, save_model};
pub use network::{Dense, Layer, NetworkModel, Role};
pub use synthetic::{
    make_synthetic_generator, Control, SyntheticClassifier, SyntheticGenerator, SyntheticSpec,
};

use crate::error::{ProbeError, Result};
use crate::latent::{ConceptId, LatentVector, ProbabilityVector};

pub trait Generator: Sync {
    fn latent_width(&self) -> usize;

    /// `(height, width)` of generated images.
    fn image_shape(&self) -> (usize, usize);

    fn generate(&self, z: &LatentVector) -> Result<Image>;
}

pub trait Classifier: Sync {
    fn input_width(&self) -> usize;

    fn num_classes(&self) -> usize;

    fn classify(&self, x: &Image) -> Result<ProbabilityVector>;
}

/// `Q(G(z))`.
pub fn score<G, C>(gen: &G, clf: &C, z: &LatentVector) -> Result<ProbabilityVector>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    clf.classify(&gen.generate(z)?)
}

/// Checks that a generator's images fit a classifier's input.
pub fn check_pair<G, C>(gen: &G, clf: &C) -> Result<()>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    let (h, w) = gen.image_shape();
    if h * w != clf.input_width() {
        return Err(ProbeError::Shape {
            what: "classifier input",
            expected: clf.input_width(),
            actual: h * w,
        });
    }
    Ok(())
}

pub(crate) fn check_latent<G: Generator + ?Sized>(gen: &G, z: &LatentVector) -> Result<()> {
    if z.len() != gen.latent_width() {
        return Err(ProbeError::Shape {
            what: "latent vector",
            expected: gen.latent_width(),
            actual: z.len(),
        });
    }
    Ok(())
}

/// Generator forward pass through a loaded network.
pub fn forward_generator(model: &NetworkModel, z: &LatentVector) -> Result<Image> {
    model.generate(z)
}

/// Classifier forward pass through a loaded network.
pub fn forward_classifier(model: &NetworkModel, x: &Image) -> Result<ProbabilityVector> {
    model.classify(x)
}

/// Rejection-samples `count` standard-normal latents whose generated image
/// the classifier assigns to `class`, from one seeded stream.
pub fn sample_class_latents<G, C>(
    gen: &G,
    clf: &C,
    class: ConceptId,
    count: usize,
    seed: u64,
    max_draws: usize,
) -> Result<Vec<LatentVector>>
where
    G: Generator + ?Sized,
    C: Classifier + ?Sized,
{
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    check_pair(gen, clf)?;
    let class = ConceptId::new(class.index(), clf.num_classes())?;
    let n = gen.latent_width();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::with_capacity(count);
    for _ in 0..max_draws {
        if found.len() == count {
            break;
        }
        let z = LatentVector::new((0..n).map(|_| StandardNormal.sample(&mut rng)).collect())?;
        if score(gen, clf, &z)?.argmax() == class {
            found.push(z);
        }
    }
    if found.len() < count {
        return Err(ProbeError::numeric(
            None,
            format!(
                "found only {} of {count} latents for class {class} in {max_draws} draws",
                found.len()
            ),
        ));
    }
    Ok(found)
}
