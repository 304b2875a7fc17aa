//! Reference dynamical systems, fixed-step RK4 integration, finite-difference
//! regression targets and measurement noise.

use std::io::{self, BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, TermExponents};
use crate::error::{Error, Result};
use crate::model::{FitResult, ModelMask};

/// Any state component beyond this magnitude counts as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

pub const LORENZ_SIGMA: f64 = 10.0;
pub const LORENZ_RHO: f64 = 28.0;
pub const LORENZ_BETA: f64 = 8.0 / 3.0;
pub const LORENZ_X0: [f64; 3] = [-8.0, 8.0, 27.0];

pub const RF_ALPHA: f64 = 0.14;
pub const RF_GAMMA: f64 = 0.1;
pub const RF_X0: [f64; 3] = [-1.5, 0.0, 1.0];

pub fn lorenz_rhs(s: &[f64]) -> [f64; 3] {
    let (x, y, z) = (s[0], s[1], s[2]);
    [
        LORENZ_SIGMA * (y - x),
        x * (LORENZ_RHO - z) - y,
        x * y - LORENZ_BETA * z,
    ]
}

pub fn rf_rhs(s: &[f64], alpha: f64, gamma: f64) -> [f64; 3] {
    let (x, y, z) = (s[0], s[1], s[2]);
    [
        y * (z - 1.0 + x * x) + gamma * x,
        x * (3.0 * z + 1.0 - x * x) + gamma * y,
        -2.0 * z * (alpha + x * y),
    ]
}

/// Polynomial vector field: one list of `(monomial, weight)` pairs per
/// state dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdeSystem {
    pub equations: Vec<Vec<(TermExponents, f64)>>,
}

fn mono(e: [u32; 3]) -> TermExponents {
    TermExponents::new(e.to_vec())
}

impl OdeSystem {
    pub fn dim(&self) -> usize {
        self.equations.len()
    }

    pub fn lorenz() -> Self {
        Self {
            equations: vec![
                vec![(mono([1, 0, 0]), -LORENZ_SIGMA), (mono([0, 1, 0]), LORENZ_SIGMA)],
                vec![
                    (mono([1, 0, 0]), LORENZ_RHO),
                    (mono([0, 1, 0]), -1.0),
                    (mono([1, 0, 1]), -1.0),
                ],
                vec![(mono([1, 1, 0]), 1.0), (mono([0, 0, 1]), -LORENZ_BETA)],
            ],
        }
    }

    pub fn rabinovich_fabrikant(alpha: f64, gamma: f64) -> Self {
        Self {
            equations: vec![
                vec![
                    (mono([1, 0, 0]), gamma),
                    (mono([0, 1, 0]), -1.0),
                    (mono([0, 1, 1]), 1.0),
                    (mono([2, 1, 0]), 1.0),
                ],
                vec![
                    (mono([1, 0, 0]), 1.0),
                    (mono([0, 1, 0]), gamma),
                    (mono([1, 0, 1]), 3.0),
                    (mono([3, 0, 0]), -1.0),
                ],
                vec![(mono([0, 0, 1]), -2.0 * alpha), (mono([1, 1, 1]), -2.0)],
            ],
        }
    }

    /// System assembled from one fit per dimension over `dict`.
    pub fn from_fits(dict: &Dictionary, fits: &[FitResult]) -> Self {
        Self {
            equations: fits
                .iter()
                .map(|f| {
                    f.mask
                        .indices()
                        .into_iter()
                        .zip(&f.weights)
                        .map(|(i, &w)| (dict.terms[i].clone(), w))
                        .collect()
                })
                .collect(),
        }
    }

    /// Term masks per dimension over `dict`; fails if a term is missing.
    pub fn masks(&self, dict: &Dictionary) -> Result<Vec<ModelMask>> {
        self.equations
            .iter()
            .map(|eq| {
                let idx = eq
                    .iter()
                    .map(|(t, _)| {
                        dict.index_of(t).ok_or_else(|| {
                            Error::InvalidParameter(format!("term {:?} not in dictionary", t.exponents))
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ModelMask::from_indices(dict.len(), &idx))
            })
            .collect()
    }

    pub fn eval_into(&self, state: &[f64], out: &mut [f64]) {
        for (o, eq) in out.iter_mut().zip(&self.equations) {
            *o = eq.iter().map(|(t, w)| w * t.eval(state)).sum();
        }
    }

    pub fn eval(&self, state: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(state, &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// One row per time point.
    pub states: Vec<Vec<f64>>,
    pub dt: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Writes `t,x1,…,xd` with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=self.dim()).map(|i| format!("x{i}")))
            .collect();
        writeln!(w, "{}", header.join(","))?;
        for (t, row) in self.times.iter().zip(&self.states) {
            write!(w, "{t}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Reads the format written by [`Trajectory::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |m: &str| Error::InvalidParameter(format!("trajectory CSV: {m}"));
        let header = lines.next().ok_or_else(|| bad("empty file"))?.map_err(|e| bad(&e.to_string()))?;
        let cols: Vec<&str> = header.trim().split(',').collect();
        if cols.first() != Some(&"t") || cols.len() < 2 {
            return Err(bad("header must start with t"));
        }
        let mut times = Vec::new();
        let mut states = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let vals = line
                .trim()
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| bad(&e.to_string()))?;
            if vals.len() != cols.len() {
                return Err(bad("ragged row"));
            }
            times.push(vals[0]);
            states.push(vals[1..].to_vec());
        }
        if times.len() < 2 {
            return Err(bad("need at least two rows"));
        }
        let dt = times[1] - times[0];
        Ok(Self { times, states, dt })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Lorenz,
    #[serde(rename = "rf")]
    RabinovichFabrikant,
}

impl SystemKind {
    pub fn truth(self) -> OdeSystem {
        match self {
            SystemKind::Lorenz => OdeSystem::lorenz(),
            SystemKind::RabinovichFabrikant => OdeSystem::rabinovich_fabrikant(RF_ALPHA, RF_GAMMA),
        }
    }

    pub fn initial_state(self) -> [f64; 3] {
        match self {
            SystemKind::Lorenz => LORENZ_X0,
            SystemKind::RabinovichFabrikant => RF_X0,
        }
    }

    pub fn rhs(self, s: &[f64]) -> [f64; 3] {
        match self {
            SystemKind::Lorenz => lorenz_rhs(s),
            SystemKind::RabinovichFabrikant => rf_rhs(s, RF_ALPHA, RF_GAMMA),
        }
    }

    /// Shortest simulated time accepted for a scenario, and whether the
    /// bound itself is allowed.
    fn min_duration(self) -> (f64, bool) {
        match self {
            SystemKind::Lorenz => (2.0, false),
            SystemKind::RabinovichFabrikant => (5.0, true),
        }
    }

    pub fn default_horizon(self) -> f64 {
        match self {
            SystemKind::Lorenz => 1.0,
            SystemKind::RabinovichFabrikant => 5.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemKind::Lorenz => "lorenz",
            SystemKind::RabinovichFabrikant => "rf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub system: SystemKind,
    pub n: usize,
    pub dt: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn duration(&self) -> f64 {
        self.n as f64 * self.dt
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter("a scenario needs at least 2 points".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter("noise level must be non-negative".into()));
        }
        let (min, inclusive) = self.system.min_duration();
        let t = self.duration();
        let ok = if inclusive { t >= min - 1e-12 } else { t > min };
        if !ok {
            let op = if inclusive { ">=" } else { ">" };
            return Err(Error::InvalidParameter(format!(
                "{} scenario lasts T = {t}, needs T {op} {min}",
                self.system.name()
            )));
        }
        Ok(())
    }

    /// Clean RK4 solution from the system's standard initial condition.
    pub fn simulate_clean(&self) -> Result<Trajectory> {
        self.validate()?;
        let system = self.system;
        integrate_rk4(|s, out| out.copy_from_slice(&system.rhs(s)), &system.initial_state(), self.dt, self.n)
    }

    /// Simulated trajectory with measurement noise drawn from `seed`.
    pub fn simulate(&self) -> Result<Trajectory> {
        Ok(add_noise(&self.simulate_clean()?, self.sigma, self.seed))
    }
}

fn guard(state: &[f64]) -> bool {
    state.iter().all(|v| v.is_finite() && v.abs() <= DIVERGENCE_BOUND)
}

/// Classical fixed-step fourth-order Runge–Kutta; `n` states including `x0`.
pub fn integrate_rk4<F>(rhs: F, x0: &[f64], dt: f64, n: usize) -> Result<Trajectory>
where
    F: Fn(&[f64], &mut [f64]),
{
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 states".into()));
    }
    if !guard(x0) {
        return Err(Error::NonFiniteState { step: 0 });
    }
    let d = x0.len();
    let mut states = Vec::with_capacity(n);
    states.push(x0.to_vec());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut x = x0.to_vec();
    for step in 1..n {
        rhs(&x, &mut k1);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k1[i];
        }
        rhs(&tmp, &mut k2);
        for i in 0..d {
            tmp[i] = x[i] + 0.5 * dt * k2[i];
        }
        rhs(&tmp, &mut k3);
        for i in 0..d {
            tmp[i] = x[i] + dt * k3[i];
        }
        rhs(&tmp, &mut k4);
        for i in 0..d {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if !guard(&x) {
            return Err(Error::NonFiniteState { step });
        }
        states.push(x.clone());
    }
    Ok(Trajectory {
        times: (0..n).map(|i| i as f64 * dt).collect(),
        states,
        dt,
    })
}

/// Outcome of integrating a learnt model.
#[derive(Debug, Clone, PartialEq)]
pub enum Integration {
    Solved(Trajectory),
    /// The divergence guard tripped at this step.
    Unsolvable { step: usize },
}

impl Integration {
    pub fn is_solvable(&self) -> bool {
        matches!(self, Integration::Solved(_))
    }
}

/// Integrates `system` over `horizon` time units (rounded to whole steps).
pub fn integrate_learnt(system: &OdeSystem, x0: &[f64], dt: f64, horizon: f64) -> Result<Integration> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let steps = ((horizon / dt).round() as usize).max(1) + 1;
    match integrate_rk4(|s, out| system.eval_into(s, out), x0, dt, steps) {
        Ok(t) => Ok(Integration::Solved(t)),
        Err(Error::NonFiniteState { step }) => Ok(Integration::Unsolvable { step }),
        Err(e) => Err(e),
    }
}

/// Regression data from a trajectory: forward-difference derivative
/// estimates per dimension, paired with the left-endpoint states.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceData {
    /// `targets[j][i] = (x[i+1][j] − x[i][j]) / dt`.
    pub targets: Vec<Vec<f64>>,
    pub states: Vec<Vec<f64>>,
}

pub fn finite_difference(traj: &Trajectory) -> Result<DifferenceData> {
    if traj.len() < 2 {
        return Err(Error::InvalidParameter("need at least 2 states".into()));
    }
    let d = traj.dim();
    let targets = (0..d)
        .map(|j| {
            traj.states
                .windows(2)
                .map(|w| (w[1][j] - w[0][j]) / traj.dt)
                .collect()
        })
        .collect();
    Ok(DifferenceData {
        targets,
        states: traj.states[..traj.len() - 1].to_vec(),
    })
}

/// Adds i.i.d. `N(0, σ²)` noise to every state entry.
pub fn add_noise(traj: &Trajectory, sigma: f64, seed: u64) -> Trajectory {
    let mut out = traj.clone();
    if sigma == 0.0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    for row in &mut out.states {
        for v in row.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    out
}
