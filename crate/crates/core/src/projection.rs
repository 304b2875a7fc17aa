//! A Householder-compressed copy of a design matrix that makes subset least
//! squares cheap.
//!
//! With `K = QR` and `c = Qᵀy`, every column subset `S` satisfies
//! `‖y − K_S w‖² = ‖y‖² − ‖c‖² + ‖c − R_S w‖²`, so subset fits only touch the
//! `min(N, p) × m` block `R_S` instead of the `N × m` columns of `K`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::evidence::{evidence_from_gram, prior_from_fit, PriorHyperparams, PRIOR_K, PRIOR_THETA};
use crate::regression::{DesignMatrix, PIVOT_TOLERANCE};

#[derive(Debug, Clone)]
pub struct ProjectedDesign {
    n: usize,
    p: usize,
    rows: usize,
    /// Column-major `rows × p` upper-trapezoidal factor.
    r: Vec<f64>,
    c: Vec<f64>,
    rss_full: f64,
    yty: f64,
}

/// Least-squares solution of one column subset.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetFit {
    pub weights: Vec<f64>,
    pub rss: f64,
}

/// Reusable buffers for subset factorizations.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl ProjectedDesign {
    pub fn new(k: &DesignMatrix, y: &[f64]) -> Result<Self> {
        let n = k.nrows();
        let p = k.ncols();
        if y.len() != n {
            return Err(Error::DimensionMismatch("response length differs from design rows".into()));
        }
        let rows = n.min(p);
        let yty: f64 = y.iter().map(|v| v * v).sum();
        let qr = k.as_matrix().clone().qr();
        let rmat = qr.r();
        let mut qty = DVector::from_column_slice(y);
        qr.q_tr_mul(&mut qty);
        let c: Vec<f64> = qty.rows(0, rows).iter().copied().collect();
        let rss_full = if n > rows {
            qty.rows(rows, n - rows).norm_squared()
        } else {
            0.0
        };
        let mut r = vec![0.0; rows * p];
        for j in 0..p {
            for i in 0..rows.min(j + 1) {
                r[j * rows + i] = rmat[(i, j)];
            }
        }
        Ok(Self {
            n,
            p,
            rows,
            r,
            c,
            rss_full,
            yty,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn yty(&self) -> f64 {
        self.yty
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.r[j * self.rows..(j + 1) * self.rows]
    }

    /// Residual sum of squares of the subset, or `None` when the subset is
    /// rank deficient or has more columns than rows.
    pub fn subset_rss(&self, idx: &[usize], ws: &mut Workspace) -> Option<f64> {
        let m = idx.len();
        if m == 0 {
            return Some(self.yty);
        }
        self.factor(idx, ws)?;
        let tail: f64 = ws.b[m..].iter().map(|v| v * v).sum();
        Some(self.rss_full + tail)
    }

    /// Weights and residual sum of squares of the subset.
    pub fn subset_fit(&self, idx: &[usize]) -> Option<SubsetFit> {
        let m = idx.len();
        if m == 0 {
            return Some(SubsetFit {
                weights: Vec::new(),
                rss: self.yty,
            });
        }
        let mut ws = Workspace::default();
        self.factor(idx, &mut ws)?;
        let rows = self.rows;
        let mut w = vec![0.0; m];
        for i in (0..m).rev() {
            let mut acc = ws.b[i];
            for j in i + 1..m {
                acc -= ws.a[j * rows + i] * w[j];
            }
            w[i] = acc / ws.a[i * rows + i];
        }
        let tail: f64 = ws.b[m..].iter().map(|v| v * v).sum();
        Some(SubsetFit {
            weights: w,
            rss: self.rss_full + tail,
        })
    }

    /// R² of the subset, `1 − RSS / yᵀy` clamped to `[0, 1]`.
    pub fn subset_r_squared(&self, idx: &[usize]) -> Option<f64> {
        let mut ws = Workspace::default();
        let rss = self.subset_rss(idx, &mut ws)?;
        Some(r_squared_from_rss(rss, self.yty))
    }

    /// In-place Householder QR of `R_S` applied to `c`. Leaves the
    /// triangular factor in `ws.a` and `Hc` in `ws.b`.
    fn factor(&self, idx: &[usize], ws: &mut Workspace) -> Option<()> {
        let m = idx.len();
        let rows = self.rows;
        if m > rows {
            return None;
        }
        ws.a.clear();
        for &j in idx {
            ws.a.extend_from_slice(self.col(j));
        }
        ws.b.clear();
        ws.b.extend_from_slice(&self.c);
        let a = &mut ws.a;
        let b = &mut ws.b;
        let mut max_diag = 0.0_f64;
        for j in 0..m {
            let base = j * rows;
            let norm = a[base + j..base + rows].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return None;
            }
            let x0 = a[base + j];
            let alpha = if x0 >= 0.0 { -norm } else { norm };
            // v = x − αe₁, stored in place; H = I − 2vvᵀ/(vᵀv)
            a[base + j] = x0 - alpha;
            let vtv: f64 = a[base + j..base + rows].iter().map(|v| v * v).sum();
            if vtv > 0.0 {
                for k in j + 1..m {
                    let kb = k * rows;
                    let dot: f64 = (j..rows).map(|i| a[base + i] * a[kb + i]).sum();
                    let f = 2.0 * dot / vtv;
                    for i in j..rows {
                        a[kb + i] -= f * a[base + i];
                    }
                }
                let dot: f64 = (j..rows).map(|i| a[base + i] * b[i]).sum();
                let f = 2.0 * dot / vtv;
                for i in j..rows {
                    b[i] -= f * a[base + i];
                }
            }
            a[base + j] = alpha;
            max_diag = max_diag.max(alpha.abs());
        }
        for j in 0..m {
            if a[j * rows + j].abs() <= PIVOT_TOLERANCE * max_diag {
                return None;
            }
        }
        Some(())
    }

    /// `KᵀK` and `Kᵀy` restricted to the subset.
    pub fn subset_gram(&self, idx: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let m = idx.len();
        let gram = DMatrix::from_fn(m, m, |a, b| {
            self.col(idx[a]).iter().zip(self.col(idx[b])).map(|(x, y)| x * y).sum()
        });
        let kty = DVector::from_fn(m, |a, _| {
            self.col(idx[a]).iter().zip(&self.c).map(|(x, y)| x * y).sum()
        });
        (gram, kty)
    }

    /// `‖y − K_S ν‖²`.
    pub fn residual_sq(&self, idx: &[usize], nu: &[f64]) -> f64 {
        let mut r = self.c.clone();
        for (&j, &w) in idx.iter().zip(nu) {
            for (ri, kij) in r.iter_mut().zip(self.col(j)) {
                *ri -= kij * w;
            }
        }
        self.rss_full + r.iter().map(|v| v * v).sum::<f64>()
    }

    /// Total log evidence of the subset under its empirical prior; `−∞` for
    /// rank-deficient or exact-fit subsets.
    pub fn log_evidence(&self, idx: &[usize]) -> f64 {
        self.try_log_evidence(idx).unwrap_or(f64::NEG_INFINITY)
    }

    fn try_log_evidence(&self, idx: &[usize]) -> Result<f64> {
        let prior = if idx.is_empty() {
            PriorHyperparams {
                mu: Vec::new(),
                sigma_diag: Vec::new(),
                k: PRIOR_K,
                theta: PRIOR_THETA,
            }
        } else {
            let fit = self.subset_fit(idx).ok_or(Error::SingularDesign)?;
            prior_from_fit(self.n, fit.weights, fit.rss, self.yty)?
        };
        let (gram, kty) = self.subset_gram(idx);
        let e = evidence_from_gram(self.n, &gram, &kty, &prior, |nu| {
            self.residual_sq(idx, nu.as_slice())
        })?;
        Ok(e.log_evidence_total)
    }
}

pub fn r_squared_from_rss(rss: f64, yty: f64) -> f64 {
    if yty <= 0.0 {
        return 0.0;
    }
    (1.0 - rss / yty).clamp(0.0, 1.0)
}
