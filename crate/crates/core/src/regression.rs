//! Dense least squares on candidate design submatrices: standardization,
//! OLS via Householder QR, the coefficient of determination and the
//! classical information criteria.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot threshold used to declare a QR factor rank deficient.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Basis functions evaluated on data, one column per dictionary term.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    data: DMatrix<f64>,
}

impl DesignMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self { data })
    }

    /// Row-major construction, mostly for tests and CSV input.
    pub fn from_row_slice(rows: usize, cols: usize, values: &[f64]) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(rows, cols, values))
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::DimensionMismatch("ragged columns".into()));
        }
        Self::new(DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.data.nrows();
        &self.data.as_slice()[j * n..(j + 1) * n]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Submatrix with the listed columns, in the listed order.
    pub fn select(&self, columns: &[usize]) -> DesignMatrix {
        Self {
            data: self.data.select_columns(columns),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        Self {
            data: self.data.select_rows(rows),
        }
    }

    pub fn matvec(&self, w: &[f64]) -> Vec<f64> {
        let n = self.nrows();
        let mut out = vec![0.0; n];
        for (j, wj) in w.iter().enumerate() {
            for (o, k) in out.iter_mut().zip(self.column(j)) {
                *o += k * wj;
            }
        }
        out
    }
}

/// Response vector after optional centering and scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseVector {
    pub values: Vec<f64>,
    /// Subtracted mean (0 when centering is off).
    pub center: f64,
    /// Divisor applied after centering (1 when scaling is off).
    pub scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardizeOptions {
    pub center_response: bool,
    pub scale_response: bool,
    pub scale_columns: bool,
}

impl Default for StandardizeOptions {
    fn default() -> Self {
        Self {
            center_response: true,
            scale_response: true,
            scale_columns: true,
        }
    }
}

impl StandardizeOptions {
    /// Transform used by the model searches: the response is scaled but not
    /// centered, columns are scaled to unit norm. Centering the response
    /// without centering the columns would force a constant term into every
    /// model whose terms have a nonzero mean.
    pub fn search() -> Self {
        Self {
            center_response: false,
            scale_response: true,
            scale_columns: true,
        }
    }
}

/// Record of a standardization, sufficient to map weights back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub center: f64,
    pub scale: f64,
    /// Divisor applied to each design column (1 for untouched columns).
    pub column_norms: Vec<f64>,
    /// Columns whose norm was zero and were left untouched.
    pub zero_columns: Vec<usize>,
}

impl Standardization {
    /// Maps standardized-space weights of the given columns to original units.
    /// The returned intercept must be added to predictions in original units.
    pub fn to_original(&self, columns: &[usize], weights: &[f64]) -> (Vec<f64>, f64) {
        let w = columns
            .iter()
            .zip(weights)
            .map(|(&j, &w)| self.scale * w / self.column_norms[j])
            .collect();
        (w, self.center)
    }
}

/// Centers (and optionally scales) `y` and optionally scales each column of
/// `k` to unit Euclidean norm.
///
/// With centering the response divisor is its sample standard deviation;
/// without centering it is `sqrt(yᵀy / (N-1))`, so in both cases the
/// standardized response has `yᵀy = N - 1`.
pub fn standardize(
    y: &[f64],
    k: &DesignMatrix,
    opts: StandardizeOptions,
) -> Result<(ResponseVector, DesignMatrix, Standardization)> {
    let n = y.len();
    if n < 2 {
        return Err(Error::DegenerateDof { rows: n, params: 1 });
    }
    if k.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {n} rows, design has {}",
            k.nrows()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let center = if opts.center_response {
        y.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    let mut values: Vec<f64> = y.iter().map(|v| v - center).collect();
    let scale = if opts.scale_response {
        let ss: f64 = values.iter().map(|v| v * v).sum();
        let spread = y.iter().fold(0.0_f64, |acc, v| acc.max((v - y[0]).abs()));
        if ss == 0.0 || (opts.center_response && spread == 0.0) {
            return Err(Error::ConstantResponse);
        }
        (ss / (n - 1) as f64).sqrt()
    } else {
        1.0
    };
    values.iter_mut().for_each(|v| *v /= scale);

    let mut data = k.as_matrix().clone();
    let mut column_norms = vec![1.0; k.ncols()];
    let mut zero_columns = Vec::new();
    if opts.scale_columns {
        for j in 0..k.ncols() {
            let norm = k.column(j).iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                column_norms[j] = norm;
                data.column_mut(j).iter_mut().for_each(|v| *v /= norm);
            } else {
                zero_columns.push(j);
            }
        }
    }
    Ok((
        ResponseVector {
            values,
            center,
            scale,
        },
        DesignMatrix { data },
        Standardization {
            center,
            scale,
            column_norms,
            zero_columns,
        },
    ))
}

/// OLS solution together with its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsSolution {
    pub weights: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual sum of squares, taken from the orthogonal complement of the
    /// QR factor rather than from `y - Kw`.
    pub rss: f64,
    /// Squared norm of the projection of `y` onto the column span.
    pub explained: f64,
}

/// Solves `min ‖K w − y‖²` by Householder QR.
pub fn ols_solve(k: &DesignMatrix, y: &[f64]) -> Result<OlsSolution> {
    let n = k.nrows();
    let m = k.ncols();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has {} rows, design has {n}",
            y.len()
        )));
    }
    let yty: f64 = y.iter().map(|v| v * v).sum();
    if m == 0 {
        return Ok(OlsSolution {
            weights: Vec::new(),
            residuals: y.to_vec(),
            rss: yty,
            explained: 0.0,
        });
    }
    if n < m {
        return Err(Error::SingularDesign);
    }
    let qr = k.as_matrix().clone().qr();
    let r = qr.r();
    let max_diag = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..m).any(|i| r[(i, i)].abs() <= PIVOT_TOLERANCE * max_diag) {
        return Err(Error::SingularDesign);
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let head = qty.rows(0, m).into_owned();
    let explained = head.norm_squared();
    let rss = qty.rows(m, n - m).norm_squared();
    let w = r.solve_upper_triangular(&head).ok_or(Error::SingularDesign)?;
    let weights: Vec<f64> = w.iter().copied().collect();
    let fitted = k.matvec(&weights);
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(OlsSolution {
        weights,
        residuals,
        rss,
        explained,
    })
}

/// OLS weight estimates for the given design columns.
pub fn ols_fit(k: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    ols_solve(k, y).map(|s| s.weights)
}

/// Coefficient of determination in its simplified form for a zero-mean
/// response, `yᵀ K (KᵀK)⁻¹ Kᵀ y / yᵀy`, clamped to `[0, 1]`.
pub fn r_squared(k: &DesignMatrix, y: &[f64]) -> Result<f64> {
    let sol = ols_solve(k, y)?;
    let yty: f64 = y.iter().map(|v| v * v).sum();
    if yty == 0.0 {
        return Ok(0.0);
    }
    Ok((sol.explained / yty).clamp(0.0, 1.0))
}

/// `σ̂² = (y − ŷ)ᵀ(y − ŷ) / (N − m)`.
pub fn residual_variance(k: &DesignMatrix, y: &[f64], weights: &[f64]) -> Result<f64> {
    let n = k.nrows();
    let m = weights.len();
    if n <= m {
        return Err(Error::DegenerateDof { rows: n, params: m });
    }
    let fitted = k.matvec(weights);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(rss / (n - m) as f64)
}

/// `1 − (N−1)/(N−m−1) · (1 − R²)`.
pub fn adjusted_r_squared(r2: f64, n: usize, m: usize) -> Result<f64> {
    if n <= m + 1 {
        return Err(Error::DegenerateDof { rows: n, params: m + 1 });
    }
    Ok(1.0 - (n as f64 - 1.0) / (n as f64 - m as f64 - 1.0) * (1.0 - r2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCriteria {
    pub adjusted_r_squared: f64,
    /// Gaussian log-likelihood at `(ŵ, σ̂)`.
    pub log_likelihood: f64,
    /// `2ℓ − 2m`; larger is better.
    pub aic: f64,
    /// `ℓ − 2m ln N`; larger is better.
    pub bic: f64,
}

/// Adjusted R², AIC and BIC for a fitted candidate. AIC and BIC keep the
/// "larger is better" sign convention with penalties `2m` and `2m ln N`.
pub fn classical_criteria(k: &DesignMatrix, y: &[f64], weights: &[f64]) -> Result<ClassicalCriteria> {
    let n = k.nrows();
    let m = weights.len();
    if n <= m + 1 {
        return Err(Error::DegenerateDof { rows: n, params: m + 1 });
    }
    let sigma_sq = residual_variance(k, y, weights)?;
    let fitted = k.matvec(weights);
    let rss: f64 = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let yty: f64 = y.iter().map(|v| v * v).sum();
    let r2 = if yty > 0.0 { (1.0 - rss / yty).clamp(0.0, 1.0) } else { 0.0 };
    let nf = n as f64;
    let log_likelihood = if sigma_sq > 0.0 {
        -0.5 * nf * (2.0 * std::f64::consts::PI * sigma_sq).ln() - rss / (2.0 * sigma_sq)
    } else {
        f64::INFINITY
    };
    Ok(ClassicalCriteria {
        adjusted_r_squared: adjusted_r_squared(r2, n, m)?,
        log_likelihood,
        aic: 2.0 * log_likelihood - 2.0 * m as f64,
        bic: log_likelihood - 2.0 * m as f64 * nf.ln(),
    })
}
