//! Optimization-based discovery of controlling latent dimensions, conversion
//! of weights and APCR rankings into controlling sets, and the intersection
//! ratio used to compare the two.

mod gradient;
mod objective;
mod optimize;
mod sets;

pub use gradient::estimate_gradient;
pub use objective::{
    objective_class2class, objective_single, ClassPairObjective, Objective, OptimizerConfig,
    Penalty, SingleObjective,
};
pub use optimize::{optimize_class2class, optimize_weights, OptimizationResult};
pub use sets::{
    intersection_ratio, sequential_controlling_set, threshold_controlling_set, Selection,
    DEFAULT_TOP_K,
};
