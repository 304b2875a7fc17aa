//! Polynomial basis-function dictionaries and their evaluation on data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regression::DesignMatrix;

/// Powers of each feature in one monomial term.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermExponents {
    pub exponents: Vec<u32>,
}

impl TermExponents {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    pub fn constant(l: usize) -> Self {
        Self {
            exponents: vec![0; l],
        }
    }

    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }
}

/// Ordered list of unique monomials over `l` features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dictionary {
    pub terms: Vec<TermExponents>,
    pub features: usize,
    pub max_individual: u32,
    pub max_collective: u32,
}

impl Dictionary {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &TermExponents) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

/// All exponent tuples with each entry in `[0, max_individual]` and entry sum
/// at most `max_collective`, in lexicographic order of the tuples. The
/// constant term comes first.
pub fn build_dictionary(features: usize, max_individual: u32, max_collective: u32) -> Dictionary {
    let mut terms = Vec::new();
    let mut current = vec![0u32; features];
    fill(&mut current, 0, max_individual, max_collective, &mut terms);
    Dictionary {
        terms,
        features,
        max_individual,
        max_collective,
    }
}

fn fill(current: &mut Vec<u32>, pos: usize, m1: u32, budget: u32, out: &mut Vec<TermExponents>) {
    if pos == current.len() {
        out.push(TermExponents::new(current.clone()));
        return;
    }
    for e in 0..=m1.min(budget) {
        current[pos] = e;
        fill(current, pos + 1, m1, budget - e, out);
    }
    current[pos] = 0;
}

/// Evaluates every dictionary term on the rows of `x` (row-major, `l`
/// columns). Feature powers up to the individual limit are computed once.
pub fn evaluate_dictionary(x: &[Vec<f64>], dict: &Dictionary) -> Result<DesignMatrix> {
    let l = dict.features;
    if x.iter().any(|row| row.len() != l) {
        return Err(Error::DimensionMismatch(format!(
            "data rows must have {l} features"
        )));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput);
    }
    let n = x.len();
    let max_pow = dict.max_individual as usize;
    // powers[j][e][i] = x[i][j]^e
    let powers: Vec<Vec<Vec<f64>>> = (0..l)
        .map(|j| {
            let mut table = vec![vec![1.0; n]];
            for e in 1..=max_pow {
                let prev = &table[e - 1];
                let next: Vec<f64> = prev.iter().zip(x).map(|(p, row)| p * row[j]).collect();
                table.push(next);
            }
            table
        })
        .collect();
    let columns: Vec<Vec<f64>> = dict
        .terms
        .iter()
        .map(|term| {
            let mut col = vec![1.0; n];
            for (j, &e) in term.exponents.iter().enumerate() {
                if e > 0 {
                    for (c, p) in col.iter_mut().zip(&powers[j][e as usize]) {
                        *c *= p;
                    }
                }
            }
            col
        })
        .collect();
    DesignMatrix::from_columns(&columns)
}

/// Human-readable monomial such as `x^2·z`; the constant term prints as `1`.
pub fn term_to_string(term: &TermExponents, names: &[&str]) -> String {
    let factors: Vec<String> = term
        .exponents
        .iter()
        .zip(names)
        .filter(|(&e, _)| e > 0)
        .map(|(&e, name)| {
            if e == 1 {
                (*name).to_string()
            } else {
                format!("{name}^{e}")
            }
        })
        .collect();
    if factors.is_empty() {
        "1".to_string()
    } else {
        factors.join("·")
    }
}

/// Default feature labels `x1, x2, …`.
pub fn default_names(l: usize) -> Vec<String> {
    (1..=l).map(|i| format!("x{i}")).collect()
}
