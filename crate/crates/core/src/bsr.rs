//! Bi-directional stepwise regression scored by the exact log evidence.
//!
//! Starting from the empty model, terms are added one at a time while the
//! best addition raises the evidence; once no addition helps, terms are
//! removed while the best removal raises it. The two phases alternate until
//! neither improves the evidence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::FitResult;
use crate::regression::DesignMatrix;
use crate::search::SearchProblem;

/// Minimum log-evidence gain for a step to count as an improvement.
pub const MIN_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepAction {
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsrStep {
    pub action: StepAction,
    pub term: usize,
    pub log_evidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsrOutput {
    pub fit: FitResult,
    /// Accepted steps in order; the evidence column is non-decreasing.
    pub trace: Vec<BsrStep>,
    pub initial_log_evidence: f64,
    /// Set when the step cap (4·p) was hit before convergence.
    pub step_cap_reached: bool,
}

pub fn bsr_fit(y: &[f64], k: &DesignMatrix) -> Result<FitResult> {
    bsr_fit_traced(y, k).map(|o| o.fit)
}

pub fn bsr_fit_traced(y: &[f64], k: &DesignMatrix) -> Result<BsrOutput> {
    let problem = SearchProblem::new(y, k)?;
    Ok(bsr_problem(&problem))
}

/// Best candidate by evidence; ties go to the smallest term index.
fn best_candidate(scored: &[(usize, f64)]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &(j, ev) in scored {
        if best.is_none_or(|(_, b)| ev > b) {
            best = Some((j, ev));
        }
    }
    best
}

pub fn bsr_problem(problem: &SearchProblem) -> BsrOutput {
    let proj = problem.projection();
    let p = problem.p();
    let candidates: Vec<usize> = (0..p).filter(|&j| !problem.is_zero_column(j)).collect();
    let mut selected: Vec<usize> = Vec::new();
    let mut current = proj.log_evidence(&selected);
    let initial = current;
    let mut trace = Vec::new();
    let cap = 4 * p.max(1);
    let mut step_cap_reached = false;

    'outer: loop {
        let mut improved_any = false;
        for action in [StepAction::Add, StepAction::Remove] {
            loop {
                if trace.len() >= cap {
                    step_cap_reached = true;
                    break 'outer;
                }
                let scored: Vec<(usize, f64)> = match action {
                    StepAction::Add => candidates
                        .par_iter()
                        .filter(|j| !selected.contains(j))
                        .map(|&j| {
                            let mut idx = selected.clone();
                            idx.push(j);
                            idx.sort_unstable();
                            (j, proj.log_evidence(&idx))
                        })
                        .collect(),
                    StepAction::Remove => selected
                        .par_iter()
                        .map(|&j| {
                            let idx: Vec<usize> = selected.iter().copied().filter(|&i| i != j).collect();
                            (j, proj.log_evidence(&idx))
                        })
                        .collect(),
                };
                let mut scored = scored;
                scored.sort_by_key(|&(j, _)| j);
                match best_candidate(&scored) {
                    Some((j, ev)) if ev > current + MIN_GAIN => {
                        match action {
                            StepAction::Add => {
                                selected.push(j);
                                selected.sort_unstable();
                            }
                            StepAction::Remove => selected.retain(|&i| i != j),
                        }
                        current = ev;
                        trace.push(BsrStep {
                            action,
                            term: j,
                            log_evidence: ev,
                        });
                        improved_any = true;
                    }
                    _ => break,
                }
            }
        }
        if !improved_any {
            break;
        }
        if trace.len() >= cap {
            step_cap_reached = true;
            break;
        }
        // Another forward phase only helps if the backward phase changed the set.
        if !matches!(trace.last(), Some(BsrStep { action: StepAction::Remove, .. })) {
            break;
        }
    }

    BsrOutput {
        fit: problem.fit(&selected),
        trace,
        initial_log_evidence: initial,
        step_cap_reached,
    }
}
