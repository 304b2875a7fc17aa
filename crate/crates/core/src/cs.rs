//! Comprehensive search: exhaustive R² ranking of every candidate model of
//! a given size, term rating across the top models, pruning and the
//! consistent-selection stopping rule, followed by evidence re-ranking of the
//! retained top models.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FitResult, ModelMask};
use crate::projection::{r_squared_from_rss, ProjectedDesign, Workspace};
use crate::regression::DesignMatrix;
use crate::search::SearchProblem;

/// Subsets scored per parallel work item.
const CHUNK: u64 = 2048;

/// Top models of one size, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedModels {
    pub model_size: usize,
    pub masks: Vec<ModelMask>,
    /// R² of each mask, non-increasing.
    pub scores: Vec<f64>,
    pub rss: Vec<f64>,
    /// Subsets enumerated, including rank-deficient ones.
    pub evaluated: u64,
    pub invalid: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsParams {
    pub m_max: usize,
    /// Number of top models used for term rating.
    pub s: usize,
    /// Number of top models per size kept for evidence re-ranking.
    pub t: usize,
    pub c_min: f64,
}

impl CsParams {
    /// `s = p/2`, `t = 25`, `c_min = 0.75`, `m_max = 8`.
    pub fn for_dictionary_size(p: usize) -> Self {
        Self {
            m_max: 8,
            s: (p / 2).max(1),
            t: 25,
            c_min: 0.75,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s < 1 || self.t < 1 {
            return Err(Error::InvalidParameter("s and t must be at least 1".into()));
        }
        if !(self.c_min > 0.0 && self.c_min <= 1.0) {
            return Err(Error::InvalidParameter("c_min must lie in (0, 1]".into()));
        }
        if self.m_max < 2 {
            return Err(Error::InvalidParameter("m_max must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The thresholded term set repeated for two successive sizes.
    Converged,
    /// `m_max` reached without a repeated term set.
    NoConvergence,
    /// Fewer active terms than the next model size.
    ActiveSetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub model_size: usize,
    pub active_terms: usize,
    pub models_evaluated: u64,
    pub invalid_models: u64,
    pub wall_time_secs: f64,
    pub ratings: Vec<f64>,
    pub pruned: Vec<usize>,
    pub selected: Vec<usize>,
    /// Best log evidence among the retained models of this size.
    pub best_log_evidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsDiagnostics {
    pub iterations: Vec<IterationRecord>,
    pub stop_reason: StopReason,
    pub evidence_pool_size: usize,
    /// First size whose best retained evidence fell below the previous size's,
    /// i.e. where an evidence-decrease stopping rule would have halted.
    pub evidence_decrease_at: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsOutput {
    /// Consistently selected terms (CS-R²).
    pub model_star: FitResult,
    /// Evidence maximizer over the retained pool (CS-p(M)).
    pub model_one: FitResult,
    pub all_top_models: Vec<RankedModels>,
    pub diagnostics: CsDiagnostics,
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(u64::MAX as u128) as u64
}

/// Lexicographic `rank`-th `k`-combination of `0..n`.
fn unrank(n: usize, k: usize, mut rank: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for slot in 0..k {
        let mut v = start;
        loop {
            let count = binomial(n - v - 1, k - slot - 1);
            if rank < count {
                break;
            }
            rank -= count;
            v += 1;
        }
        out.push(v);
        start = v + 1;
    }
    out
}

/// Advances to the next lexicographic combination; `false` when exhausted.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    rss: f64,
    idx: Vec<usize>,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rss.total_cmp(&other.rss).then_with(|| self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Bounded max-heap keeping the `keep` smallest entries.
#[derive(Debug, Default)]
struct TopK {
    keep: usize,
    heap: BinaryHeap<Entry>,
    evaluated: u64,
    invalid: u64,
}

impl TopK {
    fn new(keep: usize) -> Self {
        Self {
            keep,
            heap: BinaryHeap::with_capacity(keep + 1),
            evaluated: 0,
            invalid: 0,
        }
    }

    fn accepts(&self, rss: f64, idx: &[usize]) -> bool {
        if self.heap.len() < self.keep {
            return true;
        }
        let worst = self.heap.peek().expect("non-empty");
        match rss.total_cmp(&worst.rss) {
            Ordering::Less => true,
            Ordering::Equal => idx < worst.idx.as_slice(),
            Ordering::Greater => false,
        }
    }

    fn push(&mut self, e: Entry) {
        self.heap.push(e);
        if self.heap.len() > self.keep {
            self.heap.pop();
        }
    }

    fn merge(mut self, other: TopK) -> TopK {
        self.evaluated += other.evaluated;
        self.invalid += other.invalid;
        for e in other.heap {
            if self.accepts(e.rss, &e.idx) {
                self.push(e);
            }
        }
        self
    }
}

/// Scores every size-`m` subset of the `active` columns by R² and keeps the
/// best `keep`. Ties in R² go to the lexicographically smaller index tuple;
/// rank-deficient subsets are skipped. The result does not depend on how the
/// enumeration is split across threads.
pub fn top_rsq(proj: &ProjectedDesign, active: &[usize], m: usize, keep: usize) -> Result<RankedModels> {
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    if m == 0 || m > active.len() {
        return Err(Error::InvalidParameter(format!(
            "model size {m} outside 1..={}",
            active.len()
        )));
    }
    let keep = keep.max(1);
    let na = active.len();
    let total = binomial(na, m);
    let chunks = total.div_ceil(CHUNK);

    let best = (0..chunks)
        .into_par_iter()
        .fold(
            || (TopK::new(keep), Workspace::default()),
            |(mut top, mut ws), chunk| {
                let start = chunk * CHUNK;
                let len = CHUNK.min(total - start);
                let mut pos = unrank(na, m, start);
                let mut idx: Vec<usize> = pos.iter().map(|&i| active[i]).collect();
                for step in 0..len {
                    if step > 0 {
                        next_combination(&mut pos, na);
                        for (dst, &src) in idx.iter_mut().zip(&pos) {
                            *dst = active[src];
                        }
                    }
                    top.evaluated += 1;
                    match proj.subset_rss(&idx, &mut ws) {
                        Some(rss) if rss.is_finite() => {
                            if top.accepts(rss, &idx) {
                                top.push(Entry { rss, idx: idx.clone() });
                            }
                        }
                        _ => top.invalid += 1,
                    }
                }
                (top, ws)
            },
        )
        .map(|(top, _)| top)
        .reduce(|| TopK::new(keep), TopK::merge);

    let evaluated = best.evaluated;
    let invalid = best.invalid;
    let entries = best.heap.into_sorted_vec();
    let p = proj.p();
    let yty = proj.yty();
    Ok(RankedModels {
        model_size: m,
        scores: entries.iter().map(|e| r_squared_from_rss(e.rss, yty)).collect(),
        rss: entries.iter().map(|e| e.rss).collect(),
        masks: entries.iter().map(|e| ModelMask::from_indices(p, &e.idx)).collect(),
        evaluated,
        invalid,
    })
}

/// R²-weighted selection counts over the first `s` ranked models, divided by
/// their maximum. An all-zero rating stays zero.
pub fn rate_features(ranked: &RankedModels, s: usize, p: usize) -> Vec<f64> {
    let mut rating = vec![0.0; p];
    for (mask, score) in ranked.masks.iter().zip(&ranked.scores).take(s) {
        for i in mask.indices() {
            rating[i] += score;
        }
    }
    let max = rating.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        rating.iter_mut().for_each(|r| *r /= max);
    }
    rating
}

fn thresholded(rating: &[f64], c_min: f64) -> Vec<usize> {
    rating
        .iter()
        .enumerate()
        .filter_map(|(i, &r)| (r >= c_min).then_some(i))
        .collect()
}

/// Runs the comprehensive search on raw data `(y, K)`.
pub fn cs_search(y: &[f64], k: &DesignMatrix, params: &CsParams) -> Result<CsOutput> {
    let problem = SearchProblem::new(y, k)?;
    cs_search_problem(&problem, params)
}

pub fn cs_search_problem(problem: &SearchProblem, params: &CsParams) -> Result<CsOutput> {
    params.validate()?;
    let proj = problem.projection();
    let p = proj.p();
    if p < 2 {
        return Err(Error::InvalidParameter("comprehensive search needs at least 2 terms".into()));
    }
    let keep = params.s.max(params.t);
    let mut active: Vec<usize> = (0..p).filter(|j| !problem.is_zero_column(*j)).collect();
    if active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut all_top = Vec::new();
    let mut prev_rating: Option<Vec<f64>> = None;
    let mut star: Option<Vec<usize>> = None;
    let mut stop_reason = StopReason::NoConvergence;

    for m in 1..=params.m_max {
        if m > active.len() {
            stop_reason = StopReason::ActiveSetExhausted;
            break;
        }
        let started = Instant::now();
        let ranked = top_rsq(proj, &active, m, keep)?;
        let rating = rate_features(&ranked, params.s, p);
        let active_terms = active.len();

        let mut pruned = Vec::new();
        let mut selected = thresholded(&rating, params.c_min);
        let mut converged = false;
        if let Some(prev) = &prev_rating {
            let previous = thresholded(prev, params.c_min);
            converged = selected == previous && !selected.is_empty();
            // Pruning only shapes later iterations.
            if !converged && m < params.m_max {
                pruned = active
                    .iter()
                    .copied()
                    .filter(|&i| rating[i] + prev[i] == 0.0)
                    .collect();
                active.retain(|i| !pruned.contains(i));
            }
        }
        iterations.push(IterationRecord {
            model_size: m,
            active_terms,
            models_evaluated: ranked.evaluated,
            invalid_models: ranked.invalid,
            wall_time_secs: started.elapsed().as_secs_f64(),
            ratings: rating.clone(),
            pruned,
            selected: std::mem::take(&mut selected),
            best_log_evidence: f64::NEG_INFINITY,
        });
        all_top.push(ranked);
        prev_rating = Some(rating);
        if converged {
            star = Some(iterations.last().expect("pushed").selected.clone());
            stop_reason = StopReason::Converged;
            break;
        }
    }
    let star = star.unwrap_or_else(|| {
        iterations
            .last()
            .map(|it| it.selected.clone())
            .unwrap_or_default()
    });

    // Evidence re-ranking over the deduplicated top-t pool of every size run.
    let mut seen = HashSet::new();
    let mut pool: Vec<(usize, Vec<usize>)> = Vec::new();
    for (size_pos, ranked) in all_top.iter().enumerate() {
        for mask in ranked.masks.iter().take(params.t) {
            let idx = mask.indices();
            if seen.insert(idx.clone()) {
                pool.push((size_pos, idx));
            }
        }
    }
    let evidences: Vec<f64> = pool.par_iter().map(|(_, idx)| proj.log_evidence(idx)).collect();
    for ((size_pos, _), &ev) in pool.iter().zip(&evidences) {
        let rec = &mut iterations[*size_pos];
        if ev > rec.best_log_evidence {
            rec.best_log_evidence = ev;
        }
    }
    let evidence_decrease_at = iterations
        .windows(2)
        .find(|w| w[1].best_log_evidence < w[0].best_log_evidence)
        .map(|w| w[1].model_size);

    let mut best: Option<usize> = None;
    for (i, &ev) in evidences.iter().enumerate() {
        if ev.is_finite() && best.is_none_or(|b| ev > evidences[b]) {
            best = Some(i);
        }
    }
    let one_idx = best.map(|b| pool[b].1.clone()).unwrap_or_default();

    Ok(CsOutput {
        model_star: problem.fit(&star),
        model_one: problem.fit(&one_idx),
        all_top_models: all_top,
        diagnostics: CsDiagnostics {
            iterations,
            stop_reason,
            evidence_pool_size: pool.len(),
            evidence_decrease_at,
        },
    })
}
