//! Comparison methods: sequentially thresholded least squares (STLSQ) and
//! forward orthogonal least squares (FROLS), both refit by OLS on the terms
//! they keep, plus a k-fold grid search for their hyperparameters.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FitResult, ModelMask};
use crate::regression::{ols_solve, DesignMatrix, PIVOT_TOLERANCE};
use crate::search::SearchProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StlsqParams {
    /// Weights with magnitude below this are dropped.
    pub threshold: f64,
    pub ridge: f64,
    pub max_iters: usize,
}

impl Default for StlsqParams {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            ridge: 1e-5,
            max_iters: 20,
        }
    }
}

impl StlsqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || !(self.ridge >= 0.0) || self.max_iters < 1 {
            return Err(Error::InvalidParameter(format!("invalid STLSQ parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrolsParams {
    pub max_terms: usize,
    /// Stop once the cumulative error reduction reaches `1 − err_tolerance`.
    pub err_tolerance: f64,
}

impl Default for FrolsParams {
    fn default() -> Self {
        Self {
            max_terms: 10,
            err_tolerance: 1e-6,
        }
    }
}

impl FrolsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.err_tolerance > 0.0 && self.err_tolerance < 1.0) {
            return Err(Error::InvalidParameter("err_tolerance must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Minimizes `‖K w − y‖² + α‖w‖²` through QR of the stacked system
/// `[K; √α I] w = [y; 0]`.
pub fn ridge_fit(k: &DesignMatrix, y: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter("ridge penalty must be non-negative".into()));
    }
    if alpha == 0.0 {
        return Ok(ols_solve(k, y)?.weights);
    }
    let n = k.nrows();
    let m = k.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch("response length differs from design rows".into()));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let root = alpha.sqrt();
    let stacked = DMatrix::from_fn(n + m, m, |i, j| {
        if i < n {
            k.get(i, j)
        } else if i - n == j {
            root
        } else {
            0.0
        }
    });
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from_slice(y);
    let qr = stacked.qr();
    qr.q_tr_mul(&mut rhs);
    let w = qr
        .r()
        .solve_upper_triangular(&rhs.rows(0, m).into_owned())
        .ok_or(Error::SingularDesign)?;
    Ok(w.iter().copied().collect())
}

/// OLS refit of the chosen terms, scored the same way as the subset
/// searches so that evidences are comparable across methods.
pub fn refit(y: &[f64], k: &DesignMatrix, idx: &[usize]) -> Result<FitResult> {
    let mask = ModelMask::from_indices(k.ncols(), idx);
    let idx = mask.indices();
    let problem = SearchProblem::new(y, k)?;
    if problem.projection().subset_fit(&idx).is_none() {
        return Err(Error::SingularDesign);
    }
    let mut fit = problem.fit(&idx);
    fit.log_evidence = fit.log_evidence.filter(|e| e.is_finite());
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StlsqOutput {
    pub fit: FitResult,
    /// Active set after each thresholding pass.
    pub active_history: Vec<Vec<usize>>,
    pub converged: bool,
    pub all_terms_eliminated: bool,
}

pub fn stlsq_fit(y: &[f64], k: &DesignMatrix, params: &StlsqParams) -> Result<FitResult> {
    stlsq_fit_traced(y, k, params).map(|o| o.fit)
}

pub fn stlsq_fit_traced(y: &[f64], k: &DesignMatrix, params: &StlsqParams) -> Result<StlsqOutput> {
    params.validate()?;
    let p = k.ncols();
    if p == 0 {
        return Err(Error::InvalidParameter("empty design".into()));
    }
    let mut active: Vec<usize> = (0..p).collect();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..params.max_iters {
        let w = ridge_fit(&k.select(&active), y, params.ridge)?;
        let kept: Vec<usize> = active
            .iter()
            .zip(&w)
            .filter_map(|(&j, wj)| (wj.abs() >= params.threshold).then_some(j))
            .collect();
        history.push(kept.clone());
        if kept.len() == active.len() {
            converged = true;
            break;
        }
        active = kept;
        if active.is_empty() {
            break;
        }
    }
    if active.is_empty() {
        return Ok(StlsqOutput {
            fit: FitResult::empty(p),
            active_history: history,
            converged: false,
            all_terms_eliminated: true,
        });
    }
    Ok(StlsqOutput {
        fit: refit(y, k, &active)?,
        active_history: history,
        converged,
        all_terms_eliminated: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrolsStep {
    pub term: usize,
    pub err: f64,
    pub cumulative_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrolsOutput {
    pub fit: FitResult,
    pub steps: Vec<FrolsStep>,
}

pub fn frols_fit(y: &[f64], k: &DesignMatrix, params: &FrolsParams) -> Result<FitResult> {
    frols_fit_traced(y, k, params).map(|o| o.fit)
}

/// Forward selection by error-reduction ratio, the share of `yᵀy` explained
/// by each candidate after orthogonalizing it against the chosen terms.
pub fn frols_fit_traced(y: &[f64], k: &DesignMatrix, params: &FrolsParams) -> Result<FrolsOutput> {
    params.validate()?;
    let n = k.nrows();
    let p = k.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch("response length differs from design rows".into()));
    }
    let yty: f64 = y.iter().map(|v| v * v).sum();
    if yty == 0.0 {
        return Ok(FrolsOutput {
            fit: FitResult::empty(p),
            steps: Vec::new(),
        });
    }
    let norms: Vec<f64> = (0..p)
        .map(|j| k.column(j).iter().map(|v| v * v).sum::<f64>())
        .collect();
    let mut residual_cols: Vec<Vec<f64>> = (0..p).map(|j| k.column(j).to_vec()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut steps = Vec::new();
    let mut cumulative = 0.0;
    let limit = params.max_terms.min(p).min(n);
    while chosen.len() < limit && cumulative < 1.0 - params.err_tolerance {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..p {
            if chosen.contains(&j) {
                continue;
            }
            let q = &residual_cols[j];
            let qq: f64 = q.iter().map(|v| v * v).sum();
            if qq <= PIVOT_TOLERANCE * PIVOT_TOLERANCE * norms[j] || norms[j] == 0.0 {
                continue;
            }
            let qy: f64 = q.iter().zip(y).map(|(a, b)| a * b).sum();
            let err = qy * qy / (qq * yty);
            if best.is_none_or(|(_, b)| err > b) {
                best = Some((j, err));
            }
        }
        let Some((j, err)) = best else { break };
        cumulative += err;
        chosen.push(j);
        steps.push(FrolsStep {
            term: j,
            err,
            cumulative_err: cumulative,
        });
        let q = residual_cols[j].clone();
        let qq: f64 = q.iter().map(|v| v * v).sum();
        for (i, col) in residual_cols.iter_mut().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let f = col.iter().zip(&q).map(|(a, b)| a * b).sum::<f64>() / qq;
            col.iter_mut().zip(&q).for_each(|(a, b)| *a -= f * b);
        }
    }
    let fit = if chosen.is_empty() {
        FitResult::empty(p)
    } else {
        refit(y, k, &chosen)?
    };
    Ok(FrolsOutput { fit, steps })
}

/// One grid point's cross-validation score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint<P> {
    pub params: P,
    pub mean_mse: f64,
    pub std_error: f64,
    pub model_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOutcome<P> {
    pub best: P,
    pub fit: FitResult,
    pub scores: Vec<GridPoint<P>>,
}

/// Picks hyperparameters by `folds`-fold cross-validation over contiguous
/// blocks of rows. Among grid points whose mean validation MSE lies within
/// one standard error of the best, the one giving the smallest model on the
/// full data wins; remaining ties go to the earlier grid point.
pub fn grid_search<P, F>(
    y: &[f64],
    k: &DesignMatrix,
    grid: &[P],
    folds: usize,
    fit: F,
) -> Result<GridSearchOutcome<P>>
where
    P: Clone + Send + Sync,
    F: Fn(&[f64], &DesignMatrix, &P) -> Result<FitResult> + Sync,
{
    let n = y.len();
    if grid.is_empty() {
        return Err(Error::InvalidParameter("empty hyperparameter grid".into()));
    }
    if folds < 2 || folds > n {
        return Err(Error::InvalidParameter(format!("{folds} folds for {n} rows")));
    }
    let bounds: Vec<(usize, usize)> = (0..folds).map(|f| (f * n / folds, (f + 1) * n / folds)).collect();

    let scored: Vec<Option<(GridPoint<P>, FitResult)>> = grid
        .par_iter()
        .map(|params| {
            let full = fit(y, k, params).ok()?;
            let mut errors = Vec::with_capacity(folds);
            for &(lo, hi) in &bounds {
                let train: Vec<usize> = (0..lo).chain(hi..n).collect();
                let test: Vec<usize> = (lo..hi).collect();
                let ktr = k.select_rows(&train);
                let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let mse = match fit(&ytr, &ktr, params) {
                    Ok(f) => {
                        let w = f.dense_weights();
                        let pred = k.select_rows(&test).matvec(&w);
                        test.iter().zip(&pred).map(|(&i, p)| (y[i] - p).powi(2)).sum::<f64>() / test.len() as f64
                    }
                    Err(_) => f64::INFINITY,
                };
                errors.push(mse);
            }
            let mean = errors.iter().sum::<f64>() / folds as f64;
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (folds - 1) as f64;
            let point = GridPoint {
                params: params.clone(),
                mean_mse: mean,
                std_error: (var / folds as f64).sqrt(),
                model_size: full.mask.size(),
            };
            Some((point, full))
        })
        .collect();

    let valid: Vec<(usize, &GridPoint<P>)> = scored
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().map(|(g, _)| (i, g)))
        .filter(|(_, g)| g.mean_mse.is_finite())
        .collect();
    let Some(&(best_i, best_g)) = valid
        .iter()
        .min_by(|a, b| a.1.mean_mse.total_cmp(&b.1.mean_mse).then(a.0.cmp(&b.0)))
    else {
        return Err(Error::InvalidParameter("no grid point produced a finite validation error".into()));
    };
    let cutoff = best_g.mean_mse + best_g.std_error;
    let chosen = valid
        .iter()
        .filter(|(_, g)| g.mean_mse <= cutoff)
        .min_by(|a, b| a.1.model_size.cmp(&b.1.model_size).then(a.0.cmp(&b.0)))
        .map_or(best_i, |(i, _)| *i);

    let mut scores = Vec::with_capacity(valid.len());
    let mut chosen_fit = None;
    for (i, s) in scored.into_iter().enumerate() {
        if let Some((g, f)) = s {
            if i == chosen {
                chosen_fit = Some(f);
            }
            scores.push(g);
        }
    }
    Ok(GridSearchOutcome {
        best: grid[chosen].clone(),
        fit: chosen_fit.expect("chosen point is valid"),
        scores,
    })
}

/// Threshold grid for STLSQ: `count` values spaced logarithmically in
/// `[lo, hi]`, all with the given ridge penalty.
pub fn stlsq_threshold_grid(lo: f64, hi: f64, count: usize, ridge: f64) -> Vec<StlsqParams> {
    let count = count.max(1);
    (0..count)
        .map(|i| {
            let t = if count == 1 { 0.0 } else { i as f64 / (count - 1) as f64 };
            StlsqParams {
                threshold: lo * (hi / lo).powf(t),
                ridge,
                max_iters: 20,
            }
        })
        .collect()
}
