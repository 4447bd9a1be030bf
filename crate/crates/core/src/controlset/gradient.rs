use rayon::prelude::*;

use crate::error::{ProbeError, Result};

/// Central-difference gradient of a black-box scalar function.
///
/// Costs `2 * w.len()` evaluations; coordinates run in parallel and are
/// collected by index, so the result is independent of thread count.
pub fn estimate_gradient<F>(f: F, w: &[f64], fd_step: f64) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if !(fd_step.is_finite() && fd_step > 0.0) {
        return Err(ProbeError::invalid("finite-difference step must be > 0"));
    }
    (0..w.len())
        .into_par_iter()
        .map(|i| {
            let mut probe = w.to_vec();
            probe[i] = w[i] + fd_step;
            let up = f(&probe)?;
            probe[i] = w[i] - fd_step;
            let down = f(&probe)?;
            if !(up.is_finite() && down.is_finite()) {
                return Err(ProbeError::numeric(
                    None,
                    format!("objective not finite while probing coordinate {i}"),
                ));
            }
            Ok((up - down) / (2.0 * fd_step))
        })
        .collect()
}
