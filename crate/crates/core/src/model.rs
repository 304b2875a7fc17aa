//! Candidate-model masks and fit summaries shared by every search method.

use serde::{Deserialize, Serialize};

/// Boolean selection of dictionary terms defining one candidate model.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelMask {
    selected: Vec<bool>,
}

impl ModelMask {
    pub fn empty(p: usize) -> Self {
        Self {
            selected: vec![false; p],
        }
    }

    pub fn full(p: usize) -> Self {
        Self {
            selected: vec![true; p],
        }
    }

    pub fn from_bools(selected: Vec<bool>) -> Self {
        Self { selected }
    }

    /// Builds a mask over `p` terms with the given indices set. Out-of-range
    /// indices panic.
    pub fn from_indices(p: usize, indices: &[usize]) -> Self {
        let mut selected = vec![false; p];
        for &i in indices {
            selected[i] = true;
        }
        Self { selected }
    }

    /// Dictionary size the mask is defined over.
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Number of selected terms.
    pub fn size(&self) -> usize {
        self.selected.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.selected.get(i).copied().unwrap_or(false)
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.selected[i] = on;
    }

    /// Selected indices in ascending order.
    pub fn indices(&self) -> Vec<usize> {
        self.selected
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.selected
    }

    pub fn intersection_size(&self, other: &ModelMask) -> usize {
        self.selected
            .iter()
            .zip(&other.selected)
            .filter(|(a, b)| **a && **b)
            .count()
    }
}

/// Outcome of fitting one selected model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub mask: ModelMask,
    /// OLS weights of the selected terms in original units, ordered by
    /// ascending dictionary index.
    pub weights: Vec<f64>,
    pub r_squared: f64,
    pub sigma_hat_sq: f64,
    pub log_evidence: Option<f64>,
}

impl FitResult {
    pub fn empty(p: usize) -> Self {
        Self {
            mask: ModelMask::empty(p),
            weights: Vec::new(),
            r_squared: 0.0,
            sigma_hat_sq: 0.0,
            log_evidence: None,
        }
    }

    /// Dense weight vector over the whole dictionary, zeros for unselected terms.
    pub fn dense_weights(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.mask.len()];
        for (i, w) in self.mask.indices().into_iter().zip(&self.weights) {
            out[i] = *w;
        }
        out
    }
}
