//! Scenario sweeps: generate data, fit every method, score the result.
//!
//! Every random draw comes from a sub-stream of the master seed named after
//! the scenario, so results do not depend on execution order or thread
//! count.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{equations_correct, forecast_mae, n_diff, sample_attractor};
use super::polynomial::{gen_polynomial_data, gen_random_polynomial};
use super::{fit_dynamics, fit_target, Method, MethodSettings};
use crate::dictionary::{build_dictionary, evaluate_dictionary, Dictionary};
use crate::dynsys::{OdeSystem, ScenarioConfig, SystemKind, Trajectory};
use crate::error::{Error, Result};
use crate::model::ModelMask;
use crate::rng::{derive_seed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictionaryConfig {
    pub features: usize,
    pub max_individual: u32,
    pub max_collective: u32,
}

impl Default for DictionaryConfig {
    fn default() -> Self {
        Self {
            features: 3,
            max_individual: 4,
            max_collective: 6,
        }
    }
}

impl DictionaryConfig {
    pub fn build(&self) -> Result<Dictionary> {
        if self.features == 0 || self.max_individual == 0 || self.max_collective == 0 {
            return Err(Error::InvalidParameter("dictionary parameters must be positive".into()));
        }
        Ok(build_dictionary(self.features, self.max_individual, self.max_collective))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSpec {
    Dynamics {
        id: String,
        system: SystemKind,
        n: usize,
        dt: f64,
        sigma: f64,
    },
    Polynomial {
        id: String,
        size: usize,
        n: usize,
        sigma: f64,
    },
}

impl ScenarioSpec {
    pub fn id(&self) -> &str {
        match self {
            ScenarioSpec::Dynamics { id, .. } | ScenarioSpec::Polynomial { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Number of initial values sampled from each system's attractor.
    pub initial_values: usize,
    /// Explicit initial values, used instead of sampling when present.
    pub explicit_initial_values: Option<Vec<Vec<f64>>>,
    pub dt: f64,
    /// Forecast length in time units; per-system default when absent.
    pub horizon: Option<f64>,
    pub burn_in: f64,
    pub span: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            initial_values: 10,
            explicit_initial_values: None,
            dt: 0.01,
            horizon: None,
            burn_in: 5.0,
            span: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub master_seed: u64,
    #[serde(default)]
    pub dictionary: DictionaryConfig,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
    /// Systems whose default scenario grid is appended to `scenarios`.
    #[serde(default)]
    pub default_grids: Vec<SystemKind>,
    pub methods: Vec<Method>,
    #[serde(default)]
    pub settings: MethodSettings,
    #[serde(default)]
    pub forecast: ForecastConfig,
    /// Pre-specified models used by `fixed:<name>` methods.
    #[serde(default)]
    pub fixed_models: BTreeMap<String, OdeSystem>,
}

impl BenchConfig {
    pub fn all_scenarios(&self) -> Vec<ScenarioSpec> {
        let mut out = self.scenarios.clone();
        for &system in &self.default_grids {
            out.extend(default_grid(system));
        }
        out
    }
}

/// The default sweep for a system: every grid combination whose simulated
/// time meets the system's minimum.
pub fn default_grid(system: SystemKind) -> Vec<ScenarioSpec> {
    let (ns, dts, sigmas): (&[usize], &[f64], &[f64]) = match system {
        SystemKind::Lorenz => (
            &[200, 1000, 5000, 10000],
            &[0.001, 0.002, 0.01, 0.1],
            &[0.001, 0.01, 0.05, 0.1],
        ),
        SystemKind::RabinovichFabrikant => (
            &[1000, 2000, 4000, 8000, 16000],
            &[0.001, 0.002, 0.005, 0.01, 0.05, 0.1],
            &[0.0001, 0.01],
        ),
    };
    let mut out = Vec::new();
    for &n in ns {
        for &dt in dts {
            for &sigma in sigmas {
                let cfg = ScenarioConfig {
                    system,
                    n,
                    dt,
                    sigma,
                    seed: 0,
                };
                if cfg.validate().is_ok() {
                    out.push(ScenarioSpec::Dynamics {
                        id: format!("{}-n{n}-dt{dt}-s{sigma}", system.name()),
                        system,
                        n,
                        dt,
                        sigma,
                    });
                }
            }
        }
    }
    out
}

/// Metrics of one (scenario, method) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scenario_id: String,
    pub method: Method,
    pub metrics: Vec<(String, f64)>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResults {
    /// One cell per scenario and method, in configuration order.
    pub cells: Vec<CellResult>,
    /// Scenarios whose data could be generated.
    pub scenarios_executed: usize,
}

enum ScenarioData {
    Dynamics {
        system: SystemKind,
        traj: Trajectory,
    },
    Polynomial {
        truth: ModelMask,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    },
}

fn generate(spec: &ScenarioSpec, master: u64, dict: &Dictionary) -> Result<ScenarioData> {
    match spec {
        ScenarioSpec::Dynamics {
            id,
            system,
            n,
            dt,
            sigma,
        } => {
            let cfg = ScenarioConfig {
                system: *system,
                n: *n,
                dt: *dt,
                sigma: *sigma,
                seed: derive_seed(master, &["scenario", id, "noise"]),
            };
            Ok(ScenarioData::Dynamics {
                system: *system,
                traj: cfg.simulate()?,
            })
        }
        ScenarioSpec::Polynomial { id, size, n, sigma } => {
            let poly = gen_random_polynomial(*size, derive_seed(master, &["scenario", id, "polynomial"]))?;
            let (x, y) = gen_polynomial_data(&poly, *n, *sigma, derive_seed(master, &["scenario", id, "data"]))?;
            Ok(ScenarioData::Polynomial {
                truth: poly.mask_in(dict)?,
                x,
                y,
            })
        }
    }
}

struct Forecaster<'a> {
    config: &'a ForecastConfig,
    initial_values: BTreeMap<SystemKind, Vec<Vec<f64>>>,
}

impl Forecaster<'_> {
    fn score(&self, system: SystemKind, learnt: &OdeSystem) -> Result<Vec<(String, f64)>> {
        let truth = system.truth();
        let horizon = self.config.horizon.unwrap_or_else(|| system.default_horizon());
        let x0 = &self.initial_values[&system];
        let outcome = forecast_mae(&truth, learnt, x0, self.config.dt, horizon)?;
        let size: usize = learnt.equations.iter().map(Vec::len).sum();
        let mae = outcome.mae.unwrap_or(f64::NAN);
        Ok(vec![
            ("equations_correct".into(), equations_correct(&truth, learnt) as f64),
            ("mae".into(), mae),
            ("model_size".into(), size as f64),
            ("model_size_weighted_mae".into(), mae * size as f64),
            ("unsolvable_count".into(), outcome.unsolvable_count as f64),
        ])
    }
}

fn run_cell(
    data: &ScenarioData,
    method: &Method,
    config: &BenchConfig,
    dict: &Dictionary,
    forecaster: &Forecaster<'_>,
) -> Result<Vec<(String, f64)>> {
    match data {
        ScenarioData::Dynamics { system, traj } => {
            let learnt = match method {
                Method::Fixed(name) => config
                    .fixed_models
                    .get(name)
                    .cloned()
                    .ok_or_else(|| Error::InvalidParameter(format!("no fixed model named '{name}'")))?,
                _ => fit_dynamics(method, traj, dict, &config.settings)?.0,
            };
            if learnt.dim() != traj.dim() {
                return Err(Error::DimensionMismatch("learnt model dimension differs from the data".into()));
            }
            forecaster.score(*system, &learnt)
        }
        ScenarioData::Polynomial { truth, x, y } => {
            let k = evaluate_dictionary(x, dict)?;
            let fit = fit_target(method, y, &k, &config.settings)?.fit;
            let nd = n_diff(truth, &fit.mask);
            Ok(vec![
                ("exact_recovery".into(), f64::from(u8::from(fit.mask == *truth))),
                ("model_size".into(), fit.mask.size() as f64),
                ("n_diff".into(), nd as f64),
            ])
        }
    }
}

/// Runs every method on every scenario. Failures are recorded per cell and
/// never abort the sweep.
pub fn run_scenario_grid(config: &BenchConfig) -> Result<BenchResults> {
    let dict = config.dictionary.build()?;
    let scenarios = config.all_scenarios();
    let mut systems: Vec<SystemKind> = scenarios
        .iter()
        .filter_map(|s| match s {
            ScenarioSpec::Dynamics { system, .. } => Some(*system),
            ScenarioSpec::Polynomial { .. } => None,
        })
        .collect();
    systems.sort_by_key(|s| s.name());
    systems.dedup();
    let fc = &config.forecast;
    let mut initial_values = BTreeMap::new();
    for system in systems {
        let x0 = match &fc.explicit_initial_values {
            Some(v) => v.clone(),
            None => {
                let mut rng = substream(config.master_seed, &["initial_values", system.name()]);
                sample_attractor(system, fc.initial_values, fc.dt, fc.burn_in, fc.span, &mut rng)?
            }
        };
        initial_values.insert(system, x0);
    }
    let forecaster = Forecaster {
        config: fc,
        initial_values,
    };

    let per_scenario: Vec<(bool, Vec<CellResult>)> = scenarios
        .par_iter()
        .map(|spec| {
            let id = spec.id().to_string();
            let data = generate(spec, config.master_seed, &dict);
            let cells = config
                .methods
                .iter()
                .map(|method| {
                    let outcome = data
                        .as_ref()
                        .map_err(Clone::clone)
                        .and_then(|d| run_cell(d, method, config, &dict, &forecaster));
                    match outcome {
                        Ok(mut metrics) => {
                            metrics.push(("failed".into(), 0.0));
                            CellResult {
                                scenario_id: id.clone(),
                                method: method.clone(),
                                metrics,
                                error: None,
                            }
                        }
                        Err(e) => CellResult {
                            scenario_id: id.clone(),
                            method: method.clone(),
                            metrics: vec![("failed".into(), 1.0)],
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            (data.is_ok(), cells)
        })
        .collect();

    Ok(BenchResults {
        scenarios_executed: per_scenario.iter().filter(|(ok, _)| *ok).count(),
        cells: per_scenario.into_iter().flat_map(|(_, c)| c).collect(),
    })
}

/// `scenario_id,method,metric,value` with shortest round-trip floats.
pub fn write_results_csv<W: Write>(results: &BenchResults, mut w: W) -> io::Result<()> {
    writeln!(w, "scenario_id,method,metric,value")?;
    for cell in &results.cells {
        for (metric, value) in &cell.metrics {
            writeln!(w, "{},{},{},{}", cell.scenario_id, cell.method, metric, value)?;
        }
    }
    Ok(())
}
