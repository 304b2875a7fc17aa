//! Random sparse polynomials over three features and noisy samples of them.

use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dictionary::{build_dictionary, Dictionary, TermExponents};
use crate::error::{Error, Result};
use crate::model::ModelMask;

pub const POLY_FEATURES: usize = 3;
pub const POLY_MAX_INDIVIDUAL: u32 = 2;
pub const POLY_MAX_COLLECTIVE: u32 = 4;
/// Two-sided 95% normal quantile; neighbouring feature distributions share
/// about 5% of their mass when their means are `2·z·σ` apart.
const OVERLAP_QUANTILE: f64 = 1.959964;

pub fn generator_dictionary() -> Dictionary {
    build_dictionary(POLY_FEATURES, POLY_MAX_INDIVIDUAL, POLY_MAX_COLLECTIVE)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialSpec {
    /// Mask over [`generator_dictionary`].
    pub mask: ModelMask,
    pub terms: Vec<TermExponents>,
    pub weights: Vec<f64>,
    pub feature_means: Vec<f64>,
    pub feature_stds: Vec<f64>,
}

impl PolynomialSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().zip(&self.weights).map(|(t, w)| w * t.eval(x)).sum()
    }

    /// Mask of the same terms over another dictionary of three features.
    pub fn mask_in(&self, dict: &Dictionary) -> Result<ModelMask> {
        let idx = self
            .terms
            .iter()
            .map(|t| {
                dict.index_of(t)
                    .ok_or_else(|| Error::InvalidParameter(format!("term {:?} not in dictionary", t.exponents)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModelMask::from_indices(dict.len(), &idx))
    }
}

/// Spread of each feature: distance to the nearest other mean over `2·z`.
fn overlap_stds(means: &[f64]) -> Vec<f64> {
    means
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let d = means
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, &o)| (o - m).abs())
                .fold(f64::INFINITY, f64::min);
            d / (2.0 * OVERLAP_QUANTILE)
        })
        .collect()
}

pub fn gen_random_polynomial(size: usize, seed: u64) -> Result<PolynomialSpec> {
    if !(2..=4).contains(&size) {
        return Err(Error::InvalidParameter(format!("polynomial size {size} not in 2..=4")));
    }
    let dict = generator_dictionary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, dict.len(), size).into_vec();
    idx.sort_unstable();
    let weights = idx
        .iter()
        .map(|_| {
            let magnitude = rng.random_range(1.0..=4.0);
            if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            }
        })
        .collect();
    let feature_means: Vec<f64> = (0..POLY_FEATURES).map(|_| rng.random_range(-20.0..=20.0)).collect();
    Ok(PolynomialSpec {
        mask: ModelMask::from_indices(dict.len(), &idx),
        terms: idx.iter().map(|&i| dict.terms[i].clone()).collect(),
        weights,
        feature_stds: overlap_stds(&feature_means),
        feature_means,
    })
}

/// Samples `n` feature rows and noisy responses.
pub fn gen_polynomial_data(spec: &PolynomialSpec, n: usize, sigma: f64, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if n < 1 {
        return Err(Error::InvalidParameter("need at least one sample".into()));
    }
    if !(sigma >= 0.0) {
        return Err(Error::InvalidParameter("noise level must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Normal<f64>> = spec
        .feature_means
        .iter()
        .zip(&spec.feature_stds)
        .map(|(&m, &s)| Normal::new(m, s).map_err(|e| Error::InvalidParameter(e.to_string())))
        .collect::<Result<_>>()?;
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| features.iter().map(|d| d.sample(&mut rng)).collect())
        .collect();
    let y = x
        .iter()
        .map(|row| {
            let e = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            spec.eval(row) + e
        })
        .collect();
    Ok((x, y))
}
