//! Benchmark plumbing: random polynomial problems, scoring, method dispatch
//! and the scenario sweep.

pub mod bench;
pub mod metrics;
pub mod polynomial;
pub mod summary;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::baselines::{frols_fit_traced, grid_search, stlsq_fit, stlsq_fit_traced, FrolsParams, StlsqParams};
use crate::bsr::bsr_problem;
use crate::cs::{cs_search_problem, CsParams};
use crate::dictionary::{evaluate_dictionary, Dictionary};
use crate::dynsys::{finite_difference, OdeSystem, Trajectory};
use crate::error::{Error, Result};
use crate::model::FitResult;
use crate::regression::DesignMatrix;
use crate::search::SearchProblem;

pub use metrics::{equations_correct, forecast_mae, n_diff, ForecastOutcome};
pub use polynomial::{gen_polynomial_data, gen_random_polynomial, PolynomialSpec};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    /// Consistently selected terms of the comprehensive search.
    CsR2,
    /// Evidence maximizer over the comprehensive search's top models.
    CsEvidence,
    Bsr,
    Stlsq,
    /// STLSQ with the threshold picked by cross-validation.
    StlsqCv,
    Frols,
    /// A named, pre-specified model; only meaningful in benchmarks.
    Fixed(String),
}

impl Method {
    pub const FITTABLE: [Method; 6] = [
        Method::CsR2,
        Method::CsEvidence,
        Method::Bsr,
        Method::Stlsq,
        Method::StlsqCv,
        Method::Frols,
    ];
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::CsR2 => f.write_str("cs-r2"),
            Method::CsEvidence => f.write_str("cs-pm"),
            Method::Bsr => f.write_str("bsr"),
            Method::Stlsq => f.write_str("stlsq"),
            Method::StlsqCv => f.write_str("stlsq-cv"),
            Method::Frols => f.write_str("frols"),
            Method::Fixed(name) => write!(f, "fixed:{name}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "cs-r2" => Method::CsR2,
            "cs-pm" => Method::CsEvidence,
            "bsr" => Method::Bsr,
            "stlsq" => Method::Stlsq,
            "stlsq-cv" => Method::StlsqCv,
            "frols" => Method::Frols,
            _ => match s.strip_prefix("fixed:") {
                Some(name) if !name.is_empty() => Method::Fixed(name.to_string()),
                _ => return Err(Error::InvalidParameter(format!("unknown method '{s}'"))),
            },
        })
    }
}

impl TryFrom<String> for Method {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

/// Partial override of the size-dependent search defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsOverrides {
    pub m_max: Option<usize>,
    pub s: Option<usize>,
    pub t: Option<usize>,
    pub c_min: Option<f64>,
}

impl CsOverrides {
    pub fn resolve(&self, p: usize) -> CsParams {
        let d = CsParams::for_dictionary_size(p);
        CsParams {
            m_max: self.m_max.unwrap_or(d.m_max),
            s: self.s.unwrap_or(d.s),
            t: self.t.unwrap_or(d.t),
            c_min: self.c_min.unwrap_or(d.c_min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StlsqGrid {
    pub thresholds: Vec<f64>,
    pub ridge: f64,
    pub folds: usize,
}

impl Default for StlsqGrid {
    fn default() -> Self {
        Self {
            thresholds: vec![0.05, 0.1, 0.2, 0.5, 1.0],
            ridge: 1e-5,
            folds: 5,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub cs: CsOverrides,
    pub stlsq: StlsqParams,
    pub stlsq_grid: StlsqGrid,
    pub frols: FrolsParams,
}

/// A fitted target with method-specific diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodOutput {
    pub fit: FitResult,
    pub diagnostics: Value,
}

fn json_or_null<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Fits one response with one method.
pub fn fit_target(method: &Method, y: &[f64], k: &DesignMatrix, settings: &MethodSettings) -> Result<MethodOutput> {
    match method {
        Method::CsR2 | Method::CsEvidence => {
            let problem = SearchProblem::new(y, k)?;
            let params = settings.cs.resolve(k.ncols());
            let out = cs_search_problem(&problem, &params)?;
            let fit = if *method == Method::CsR2 {
                out.model_star.clone()
            } else {
                out.model_one.clone()
            };
            Ok(MethodOutput {
                fit,
                diagnostics: json!({ "params": params, "search": out.diagnostics }),
            })
        }
        Method::Bsr => {
            let problem = SearchProblem::new(y, k)?;
            let out = bsr_problem(&problem);
            Ok(MethodOutput {
                diagnostics: json!({
                    "initial_log_evidence": out.initial_log_evidence,
                    "trace": out.trace,
                    "step_cap_reached": out.step_cap_reached,
                }),
                fit: out.fit,
            })
        }
        Method::Stlsq => {
            let out = stlsq_fit_traced(y, k, &settings.stlsq)?;
            Ok(MethodOutput {
                diagnostics: json!({
                    "params": settings.stlsq,
                    "active_history": out.active_history,
                    "converged": out.converged,
                    "all_terms_eliminated": out.all_terms_eliminated,
                }),
                fit: out.fit,
            })
        }
        Method::StlsqCv => {
            let g = &settings.stlsq_grid;
            let grid: Vec<StlsqParams> = g
                .thresholds
                .iter()
                .map(|&threshold| StlsqParams {
                    threshold,
                    ridge: g.ridge,
                    max_iters: settings.stlsq.max_iters,
                })
                .collect();
            let out = grid_search(y, k, &grid, g.folds, |y, k, p| stlsq_fit(y, k, p))?;
            Ok(MethodOutput {
                diagnostics: json!({ "chosen": out.best, "scores": json_or_null(&out.scores) }),
                fit: out.fit,
            })
        }
        Method::Frols => {
            let out = frols_fit_traced(y, k, &settings.frols)?;
            Ok(MethodOutput {
                diagnostics: json!({ "params": settings.frols, "steps": out.steps }),
                fit: out.fit,
            })
        }
        Method::Fixed(name) => Err(Error::InvalidParameter(format!(
            "fixed model '{name}' cannot be fitted to data"
        ))),
    }
}

/// Learns one equation per state dimension from forward differences of the
/// trajectory.
pub fn fit_dynamics(
    method: &Method,
    traj: &Trajectory,
    dict: &Dictionary,
    settings: &MethodSettings,
) -> Result<(OdeSystem, Vec<MethodOutput>)> {
    if dict.features != traj.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dictionary has {} features, trajectory has {} states",
            dict.features,
            traj.dim()
        )));
    }
    let data = finite_difference(traj)?;
    let k = evaluate_dictionary(&data.states, dict)?;
    let outputs = data
        .targets
        .iter()
        .map(|y| fit_target(method, y, &k, settings))
        .collect::<Result<Vec<_>>>()?;
    let fits: Vec<FitResult> = outputs.iter().map(|o| o.fit.clone()).collect();
    Ok((OdeSystem::from_fits(dict, &fits), outputs))
}
