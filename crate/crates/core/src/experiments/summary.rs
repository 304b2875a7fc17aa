//! Box-plot statistics for result tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::bench::BenchResults;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    /// Most extreme observations within 1.5 IQR of the box.
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub min: f64,
    pub max: f64,
    pub outliers: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Statistics of the finite values; `None` when there are none.
pub fn boxplot(values: &[f64]) -> Option<BoxplotStats> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = v.iter().copied().filter(|x| *x >= fence_lo && *x <= fence_hi).collect();
    Some(BoxplotStats {
        count: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        median: quantile(&v, 0.5),
        q1,
        q3,
        whisker_low: inside.first().copied().unwrap_or(q1),
        whisker_high: inside.last().copied().unwrap_or(q3),
        min: v[0],
        max: v[v.len() - 1],
        outliers: v.len() - inside.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub scenarios_executed: usize,
    pub failed_cells: usize,
    /// method → metric → statistics across scenarios.
    pub methods: BTreeMap<String, BTreeMap<String, BoxplotStats>>,
    /// method → total diverged forecasts.
    pub unsolvable_total: BTreeMap<String, u64>,
}

pub fn summarize(results: &BenchResults) -> BenchSummary {
    let mut values: BTreeMap<String, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    let mut unsolvable: BTreeMap<String, u64> = BTreeMap::new();
    let mut failed = 0;
    for cell in &results.cells {
        let method = cell.method.to_string();
        if cell.error.is_some() {
            failed += 1;
        }
        let per_metric = values.entry(method.clone()).or_default();
        for (metric, v) in &cell.metrics {
            per_metric.entry(metric.clone()).or_default().push(*v);
            if metric == "unsolvable_count" && v.is_finite() {
                *unsolvable.entry(method.clone()).or_default() += *v as u64;
            }
        }
    }
    let methods = values
        .into_iter()
        .map(|(method, metrics)| {
            let stats = metrics
                .into_iter()
                .filter_map(|(metric, v)| boxplot(&v).map(|s| (metric, s)))
                .collect();
            (method, stats)
        })
        .collect();
    BenchSummary {
        scenarios_executed: results.scenarios_executed,
        failed_cells: failed,
        methods,
        unsolvable_total: unsolvable,
    }
}
