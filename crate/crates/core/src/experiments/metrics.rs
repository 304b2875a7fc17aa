//! Identification and forecasting scores.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynsys::{integrate_learnt, Integration, OdeSystem, SystemKind};
use crate::error::{Error, Result};
use crate::model::ModelMask;

/// True terms found minus wrong terms found.
pub fn n_diff(truth: &ModelMask, learnt: &ModelMask) -> i64 {
    let hits = truth.intersection_size(learnt) as i64;
    hits - (learnt.size() as i64 - hits)
}

fn term_set(eq: &[(crate::dictionary::TermExponents, f64)]) -> BTreeSet<&[u32]> {
    eq.iter().map(|(t, _)| t.exponents.as_slice()).collect()
}

/// Number of equations whose term set matches the truth exactly; weights are
/// not compared.
pub fn equations_correct(truth: &OdeSystem, learnt: &OdeSystem) -> usize {
    truth
        .equations
        .iter()
        .zip(&learnt.equations)
        .filter(|(a, b)| term_set(a) == term_set(b))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastOutcome {
    /// Mean absolute componentwise error over all solvable runs and time
    /// points; `None` when every run diverged.
    pub mae: Option<f64>,
    pub solvable: usize,
    pub unsolvable_count: usize,
}

/// Integrates both systems from every initial value and compares them.
/// Learnt runs that diverge are counted and left out of the error.
pub fn forecast_mae(
    truth: &OdeSystem,
    learnt: &OdeSystem,
    initial_values: &[Vec<f64>],
    dt: f64,
    horizon: f64,
) -> Result<ForecastOutcome> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    let mut solvable = 0;
    let mut unsolvable = 0;
    for x0 in initial_values {
        let reference = match integrate_learnt(truth, x0, dt, horizon)? {
            Integration::Solved(t) => t,
            Integration::Unsolvable { step } => return Err(Error::NonFiniteState { step }),
        };
        match integrate_learnt(learnt, x0, dt, horizon)? {
            Integration::Solved(t) => {
                solvable += 1;
                for (a, b) in t.states.iter().zip(&reference.states) {
                    for (u, v) in a.iter().zip(b) {
                        total += (u - v).abs();
                        count += 1;
                    }
                }
            }
            Integration::Unsolvable { .. } => unsolvable += 1,
        }
    }
    Ok(ForecastOutcome {
        mae: (count > 0).then(|| total / count as f64),
        solvable,
        unsolvable_count: unsolvable,
    })
}

/// States sampled uniformly in time from the true system's trajectory after
/// a burn-in period, so they lie close to the attractor.
pub fn sample_attractor<R: Rng>(
    system: SystemKind,
    count: usize,
    dt: f64,
    burn_in: f64,
    span: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    let truth = system.truth();
    let total = burn_in + span;
    let traj = match integrate_learnt(&truth, &system.initial_state(), dt, total)? {
        Integration::Solved(t) => t,
        Integration::Unsolvable { step } => return Err(Error::NonFiniteState { step }),
    };
    let first = (burn_in / dt).round() as usize;
    let last = traj.len() - 1;
    if first >= last {
        return Err(Error::InvalidParameter("sampling span is empty".into()));
    }
    Ok((0..count)
        .map(|_| traj.states[rng.random_range(first..=last)].clone())
        .collect())
}
