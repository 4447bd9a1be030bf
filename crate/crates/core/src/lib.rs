//! Latent-space correlation analysis for pretrained generators.
//!
//! Given a frozen generator `G` and a classifier `Q`, this crate measures how
//! strongly each latent dimension drives each class probability of `Q(G(z))`,
//! finds signed controlling sets of dimensions per class (by ranking
//! single-dimension sweeps or by optimizing a weighted intervention), and
//! uses those sets to steer generation between classes.
//!
//! * [`latent`]: shared value types, sampling and intervention arithmetic
//! * [`models`]: dense inference engine, LPWF weight files, analytic testbed
//! * [`apcr`]: sweeps and averaged probability change ratio scores
//! * [`controlset`]: weight optimization, set extraction, intersection ratio
//! * [`manipulate`]: steering, impulses, translation and montages
//! * [`cli`]: the `probe` command-line tool

pub mod apcr;
pub mod cli;
pub mod controlset;
pub mod error;
pub mod latent;
pub mod manipulate;
pub mod models;

pub use error::{ProbeError, Result};
