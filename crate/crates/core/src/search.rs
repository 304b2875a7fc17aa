//! Shared preprocessing for the evidence- and R²-driven searches.

use crate::error::Result;
use crate::model::{FitResult, ModelMask};
use crate::projection::{r_squared_from_rss, ProjectedDesign};
use crate::regression::{standardize, DesignMatrix, StandardizeOptions, Standardization};

/// A response and design prepared for model search: the response scaled,
/// the columns scaled to unit norm, and the result compressed by QR.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    proj: ProjectedDesign,
    transform: Standardization,
    n: usize,
}

impl SearchProblem {
    pub fn new(y: &[f64], k: &DesignMatrix) -> Result<Self> {
        let (ys, ks, transform) = standardize(y, k, StandardizeOptions::search())?;
        let proj = ProjectedDesign::new(&ks, &ys.values)?;
        Ok(Self {
            proj,
            transform,
            n: y.len(),
        })
    }

    pub fn projection(&self) -> &ProjectedDesign {
        &self.proj
    }

    pub fn transform(&self) -> &Standardization {
        &self.transform
    }

    pub fn p(&self) -> usize {
        self.proj.p()
    }

    pub fn is_zero_column(&self, j: usize) -> bool {
        self.transform.zero_columns.contains(&j)
    }

    /// OLS fit of the given terms, weights mapped to original units.
    /// Rank-deficient selections fall back to an empty weight vector with
    /// zero R².
    pub fn fit(&self, idx: &[usize]) -> FitResult {
        let p = self.p();
        let mask = ModelMask::from_indices(p, idx);
        let log_evidence = Some(self.proj.log_evidence(idx));
        match self.proj.subset_fit(idx) {
            Some(fit) => {
                let (weights, _) = self.transform.to_original(idx, &fit.weights);
                let m = idx.len();
                let sigma_hat_sq = if self.n > m {
                    fit.rss * self.transform.scale.powi(2) / (self.n - m) as f64
                } else {
                    0.0
                };
                FitResult {
                    mask,
                    weights,
                    r_squared: r_squared_from_rss(fit.rss, self.proj.yty()),
                    sigma_hat_sq,
                    log_evidence,
                }
            }
            None => FitResult {
                weights: vec![0.0; idx.len()],
                mask,
                r_squared: 0.0,
                sigma_hat_sq: 0.0,
                log_evidence,
            },
        }
    }
}
