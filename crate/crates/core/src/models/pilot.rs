//! Prior-predictive pilot runs for the scaling matrix.

use rayon::prelude::*;

use crate::error::{AbcError, Result};
use crate::kernels::{ScalingMatrix, Summaries};
use crate::models::Model;
use crate::rng::RandomStream;
use crate::samplers::threshold::update_sigma_mad;

/// Simulates `n_pilot` datasets from the prior predictive and returns the
/// diagonal of squared MADs of their summaries. Draw `i` uses its own stream
/// derived from `seed`, so the result does not depend on thread scheduling.
/// Draws the model rejects with `pilot_keep` and rows with non-finite
/// summaries are dropped.
pub fn pilot_prior_predictive<M: Model + ?Sized>(model: &M, n_pilot: usize, seed: u64) -> Result<ScalingMatrix> {
    let set = pilot_summaries(model, n_pilot, seed)?;
    update_sigma_mad(&set)
}

/// The pilot summary matrix itself.
pub fn pilot_summaries<M: Model + ?Sized>(model: &M, n_pilot: usize, seed: u64) -> Result<Summaries> {
    if n_pilot < 2 {
        return Err(AbcError::Parameter("pilot needs at least 2 draws".into()));
    }
    let rows: Vec<Result<Option<Vec<f64>>>> = (0..n_pilot)
        .into_par_iter()
        .map(|i| {
            let mut rng = RandomStream::for_task(seed, &[0x9170, i as u64]);
            let theta = model.prior().sample(&mut rng);
            let x = model.simulate(&theta, &mut rng)?;
            if !model.pilot_keep(&x) {
                return Ok(None);
            }
            model.summarize(&x).map(Some)
        })
        .collect();
    let mut set = Summaries::with_capacity(model.n_summaries(), n_pilot);
    for r in rows {
        let Some(r) = r? else { continue };
        if r.iter().all(|v| v.is_finite()) {
            set.push(&r);
        }
    }
    if set.len() < 2 {
        return Err(AbcError::Degenerate("fewer than 2 finite pilot summaries".into()));
    }
    Ok(set)
}
