//! Exact log model evidence for linear regression under a gamma-normal
//! conjugate prior, with hyperparameters fixed empirically from the OLS fit
//! of each candidate model.
//!
//! For a candidate design `K` (N×m), response `y`, prior mean `μ`, diagonal
//! relative precision `Σ`, gamma shape `k` and scale `ϑ`:
//!
//! ```text
//! A = KᵀK + Σ,   b = Kᵀy + Σμ,   ξ = yᵀy + μᵀΣμ − bᵀA⁻¹b
//! ln p(y) = ½ ln(det Σ / det A) − (N/2) ln 2π − (N/2 + k) ln(ξ/2 + 1/ϑ)
//!           − k ln ϑ + ln Γ(N/2 + k) − ln Γ(k)
//! ```
//!
//! `ξ` is evaluated as `‖y − Kν‖² + (ν − μ)ᵀΣ(ν − μ)` with `ν = A⁻¹b`, which
//! is the same quantity written as a sum of non-negative terms, and the
//! determinant ratio through the eigenvalues of `Σ^{-1/2} KᵀK Σ^{-1/2}`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelMask;
use crate::regression::{ols_solve, DesignMatrix};

/// Gamma scale of the noise-precision prior.
pub const PRIOR_THETA: f64 = 0.5;
/// Gamma shape, from setting the mode `(k − 1)ϑ` to one.
pub const PRIOR_K: f64 = 1.0 / PRIOR_THETA + 1.0;

/// Residual sums of squares at or below this fraction of `yᵀy` count as exact fits.
const DEGENERATE_RSS: f64 = (64.0 * f64::EPSILON) * (64.0 * f64::EPSILON);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorHyperparams {
    pub mu: Vec<f64>,
    /// Diagonal of the weight precision with the noise precision split off.
    pub sigma_diag: Vec<f64>,
    pub k: f64,
    pub theta: f64,
}

impl PriorHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.sigma_diag.len() {
            return Err(Error::DimensionMismatch("prior mean and precision lengths differ".into()));
        }
        if self.sigma_diag.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter("prior precision must be finite and positive".into()));
        }
        if !(self.k > 0.0 && self.theta > 0.0) {
            return Err(Error::InvalidParameter("gamma shape and scale must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceResult {
    pub log_evidence_per_point: f64,
    pub log_evidence_total: f64,
    pub xi: f64,
    pub model_size: usize,
}

/// Empirical prior: `μ = ŵ`, `diag(Σ) = (1 − m/N) / (yᵀy − ŵᵀKᵀy)`, `ϑ = 1/2`, `k = 3`.
pub fn empirical_prior(k: &DesignMatrix, y: &[f64]) -> Result<PriorHyperparams> {
    let n = k.nrows();
    let m = k.ncols();
    if n <= m {
        return Err(Error::DegenerateDof { rows: n, params: m });
    }
    let sol = ols_solve(k, y)?;
    let yty: f64 = y.iter().map(|v| v * v).sum();
    prior_from_fit(n, sol.weights, sol.rss, yty)
}

pub(crate) fn prior_from_fit(n: usize, mu: Vec<f64>, rss: f64, yty: f64) -> Result<PriorHyperparams> {
    let m = mu.len();
    if n <= m {
        return Err(Error::DegenerateDof { rows: n, params: m });
    }
    if rss <= DEGENERATE_RSS * yty || rss <= 0.0 {
        return Err(Error::DegeneratePrior);
    }
    let s = (1.0 - m as f64 / n as f64) / rss;
    Ok(PriorHyperparams {
        sigma_diag: vec![s; m],
        mu,
        k: PRIOR_K,
        theta: PRIOR_THETA,
    })
}

/// Closed-form log evidence of `y` under the model spanned by the columns of `k`.
pub fn log_evidence(k: &DesignMatrix, y: &[f64], prior: &PriorHyperparams) -> Result<EvidenceResult> {
    let n = k.nrows();
    let m = k.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch("response length differs from design rows".into()));
    }
    if prior.mu.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} weights, design has {m} columns",
            prior.mu.len()
        )));
    }
    let km = k.as_matrix();
    let gram = km.transpose() * km;
    let kty = km.transpose() * DVector::from_column_slice(y);
    let yv = DVector::from_column_slice(y);
    evidence_from_gram(n, &gram, &kty, prior, |nu| {
        let r = &yv - km * nu;
        r.norm_squared()
    })
}

/// Evidence from the Gram quantities `KᵀK`, `Kᵀy`; `residual_sq(ν)` must
/// return `‖y − Kν‖²`.
pub(crate) fn evidence_from_gram(
    n: usize,
    gram: &DMatrix<f64>,
    kty: &DVector<f64>,
    prior: &PriorHyperparams,
    residual_sq: impl Fn(&DVector<f64>) -> f64,
) -> Result<EvidenceResult> {
    prior.validate()?;
    let m = gram.nrows();
    if n == 0 {
        return Err(Error::DegenerateDof { rows: 0, params: m });
    }
    let sigma = DVector::from_column_slice(&prior.sigma_diag);
    let mu = DVector::from_column_slice(&prior.mu);

    let (log_det_ratio, xi) = if m == 0 {
        (0.0, residual_sq(&DVector::zeros(0)))
    } else {
        let mut a = gram.clone();
        for i in 0..m {
            a[(i, i)] += sigma[i];
        }
        let b = kty + sigma.component_mul(&mu);
        let chol = a.cholesky().ok_or(Error::SingularDesign)?;
        let nu = chol.solve(&b);
        let diff = &nu - &mu;
        let xi = residual_sq(&nu) + diff.component_mul(&sigma).dot(&diff);

        // ln det A − ln det Σ = ln det(I + D G D), D = Σ^{-1/2}
        let d = sigma.map(|s| 1.0 / s.sqrt());
        let scaled = DMatrix::from_fn(m, m, |i, j| d[i] * gram[(i, j)] * d[j]);
        let eig = scaled.symmetric_eigenvalues();
        let log_det = eig.iter().map(|&l| l.max(0.0).ln_1p()).sum::<f64>();
        (-log_det, xi)
    };

    let inv_theta = 1.0 / prior.theta;
    let rate = xi / 2.0 + inv_theta;
    if !(rate > 0.0) {
        return Err(Error::NonPositiveXi(rate));
    }
    let ln_rate = inv_theta.ln() + (xi * prior.theta / 2.0).ln_1p();
    let nf = n as f64;
    let k = prior.k;
    let total = 0.5 * log_det_ratio - 0.5 * nf * (2.0 * std::f64::consts::PI).ln()
        - (0.5 * nf + k) * ln_rate
        - k * prior.theta.ln()
        + libm::lgamma(0.5 * nf + k)
        - libm::lgamma(k);
    Ok(EvidenceResult {
        log_evidence_per_point: total / nf,
        log_evidence_total: total,
        xi,
        model_size: m,
    })
}

/// Total log evidence of a masked model with the empirical prior. Rank
/// deficient and exact-fit candidates map to `−∞`.
pub fn evidence_of_mask(mask: &ModelMask, k: &DesignMatrix, y: &[f64]) -> f64 {
    let idx = mask.indices();
    let sub = k.select(&idx);
    let prior = if idx.is_empty() {
        PriorHyperparams {
            mu: Vec::new(),
            sigma_diag: Vec::new(),
            k: PRIOR_K,
            theta: PRIOR_THETA,
        }
    } else {
        match empirical_prior(&sub, y) {
            Ok(p) => p,
            Err(_) => return f64::NEG_INFINITY,
        }
    };
    log_evidence(&sub, y, &prior)
        .map(|e| e.log_evidence_total)
        .unwrap_or(f64::NEG_INFINITY)
}
