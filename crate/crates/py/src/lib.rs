use std::path::PathBuf;

use pinch_isac_core::agents::checkpoint::load_agent;
use pinch_isac_core::agents::{ActMode, Agent as _, Algorithm, AnyAgent, Transition};
use pinch_isac_core::env::{PinchingEnv, StepOutcome, SystemConfig};
use pinch_isac_core::harness::{self, ExperimentConfig, OracleOptions, Scenario};
use pinch_isac_core::physics::{self, AntennaLayout, Position3D};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

/// Parsed experiment configuration (system, agent and campaign tables).
#[pyclass(name = "Config", module = "pinch_isac", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = ""))]
    fn new(toml: &str) -> PyResult<Self> {
        ExperimentConfig::parse(toml).map(|inner| Self { inner }).map_err(value_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        ExperimentConfig::load(&path).map(|inner| Self { inner }).map_err(value_err)
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn observation_dim(&self) -> usize {
        self.inner.system.observation_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.system.action_dim()
    }

    #[getter]
    fn num_antennas(&self) -> usize {
        self.inner.system.num_antennas
    }

    #[getter]
    fn num_users(&self) -> usize {
        self.inner.system.num_users
    }

    #[getter]
    fn num_targets(&self) -> usize {
        self.inner.system.num_targets
    }

    #[getter]
    fn max_user_power_w(&self) -> f64 {
        self.inner.system.max_user_power_w
    }

    #[getter]
    fn energy_budget_j(&self) -> f64 {
        self.inner.system.energy_budget_j
    }

    #[getter]
    fn min_spacing_m(&self) -> f64 {
        self.inner.system.waveguide.min_spacing_m
    }

    #[getter]
    fn wavelength_m(&self) -> f64 {
        self.inner.system.carrier.wavelength_m
    }

    fn __repr__(&self) -> String {
        format!("Config(hash='{}')", &self.inner.hash()[..12])
    }
}

fn system(config: Option<&PyConfig>) -> SystemConfig {
    config.map(|c| c.inner.system.clone()).unwrap_or_default()
}

fn ground((x, y): (f64, f64)) -> Position3D {
    Position3D::ground(x, y)
}

/// Complex channel gain from antennas at `antenna_xs` to a ground point.
#[pyfunction]
#[pyo3(signature = (point, antenna_xs, config = None))]
fn effective_gain(point: (f64, f64), antenna_xs: Vec<f64>, config: Option<&PyConfig>) -> PyResult<(f64, f64)> {
    let c = system(config);
    let g = physics::effective_gain(&ground(point), &AntennaLayout::new(antenna_xs), &c.waveguide, &c.carrier)
        .map_err(value_err)?;
    Ok((g.re, g.im))
}

/// Achievable rate of one user in bit/s/Hz.
#[pyfunction]
#[pyo3(signature = (user, antenna_xs, power_w, config = None))]
fn user_rate(user: (f64, f64), antenna_xs: Vec<f64>, power_w: f64, config: Option<&PyConfig>) -> PyResult<f64> {
    let c = system(config);
    physics::user_rate(
        &ground(user),
        &AntennaLayout::new(antenna_xs),
        power_w,
        c.num_users,
        &c.waveguide,
        &c.carrier,
    )
    .map_err(value_err)
}

/// Linear sensing SNR at a target while `served_user` is served.
#[pyfunction]
#[pyo3(signature = (target, served_user, antenna_xs, power_w, config = None))]
fn sensing_snr(
    target: (f64, f64),
    served_user: (f64, f64),
    antenna_xs: Vec<f64>,
    power_w: f64,
    config: Option<&PyConfig>,
) -> PyResult<f64> {
    let c = system(config);
    physics::sensing_snr(
        &ground(target),
        &ground(served_user),
        &AntennaLayout::new(antenna_xs),
        power_w,
        &c.waveguide,
        &c.carrier,
    )
    .map_err(value_err)
}

#[pyclass(name = "StepResult", module = "pinch_isac", get_all, skip_from_py_object)]
struct PyStepResult {
    observation: Vec<f64>,
    reward: f64,
    done: bool,
    terminal: bool,
    served_user: usize,
    per_user_rates: Vec<f64>,
    sum_rate: f64,
    max_rate: f64,
    per_target_snr: Vec<f64>,
    sensing_term: f64,
    applied_powers_w: Vec<f64>,
    energy_drawn_j: f64,
    antenna_xs: Vec<f64>,
}

impl PyStepResult {
    fn new(out: StepOutcome, observation: Vec<f64>) -> Self {
        Self {
            observation,
            reward: out.reward,
            done: out.done,
            terminal: out.terminal,
            served_user: out.served_user_index,
            per_user_rates: out.per_user_rates,
            sum_rate: out.sum_rate,
            max_rate: out.max_rate,
            per_target_snr: out.per_target_snr_linear,
            sensing_term: out.sensing_term,
            applied_powers_w: out.applied_powers_w,
            energy_drawn_j: out.energy_drawn_j,
            antenna_xs: out.next_state.antenna_layout.xs,
        }
    }
}

/// Slot-level environment. Actions are raw vectors in `[-1, 1]`.
#[pyclass(name = "Env", module = "pinch_isac", skip_from_py_object)]
struct PyEnv {
    inner: PinchingEnv,
}

#[pymethods]
impl PyEnv {
    #[new]
    #[pyo3(signature = (config = None, seed = 0))]
    fn new(config: Option<&PyConfig>, seed: u64) -> PyResult<Self> {
        PinchingEnv::new(system(config), seed).map(|inner| Self { inner }).map_err(value_err)
    }

    fn reset(&mut self, seed: u64) -> PyResult<Vec<f64>> {
        self.inner.reset(seed).map_err(value_err)?;
        Ok(self.inner.observation())
    }

    fn observation(&self) -> Vec<f64> {
        self.inner.observation()
    }

    fn step(&mut self, action: Vec<f64>) -> PyResult<PyStepResult> {
        let out = self.inner.step_raw(&action).map_err(value_err)?;
        Ok(PyStepResult::new(out, self.inner.observation()))
    }

    fn is_done(&self) -> bool {
        self.inner.is_done()
    }

    #[getter]
    fn antenna_xs(&self) -> Vec<f64> {
        self.inner.state().antenna_layout.xs.clone()
    }

    #[getter]
    fn user_positions(&self) -> Vec<(f64, f64)> {
        self.inner.state().user_positions.iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn target_positions(&self) -> Vec<(f64, f64)> {
        self.inner.state().target_positions.iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn remaining_energy_j(&self) -> f64 {
        self.inner.state().remaining_energy_j
    }

    #[getter]
    fn observation_dim(&self) -> usize {
        self.inner.config().observation_dim()
    }

    #[getter]
    fn action_dim(&self) -> usize {
        self.inner.config().action_dim()
    }
}

/// One learner: "merl", "td3", "ddpg" or "random".
#[pyclass(name = "Agent", module = "pinch_isac", skip_from_py_object)]
struct PyAgent {
    inner: AnyAgent,
}

#[pymethods]
impl PyAgent {
    #[new]
    #[pyo3(signature = (algorithm, config = None, seed = 0, obs_dim = None, action_dim = None))]
    fn new(
        algorithm: &str,
        config: Option<&PyConfig>,
        seed: u64,
        obs_dim: Option<usize>,
        action_dim: Option<usize>,
    ) -> PyResult<Self> {
        let algorithm: Algorithm = algorithm.parse().map_err(value_err)?;
        let default;
        let config = match config {
            Some(c) => &c.inner,
            None => {
                default = ExperimentConfig::parse("").map_err(value_err)?;
                &default
            }
        };
        let obs = obs_dim.unwrap_or(config.system.observation_dim());
        let act = action_dim.unwrap_or(config.system.action_dim());
        Ok(Self {
            inner: AnyAgent::new(algorithm, obs, act, config.agent(), seed),
        })
    }

    #[staticmethod]
    fn load(checkpoint: PathBuf) -> PyResult<Self> {
        let (inner, _) = load_agent(&checkpoint).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[pyo3(signature = (obs, explore = false))]
    fn act(&mut self, obs: Vec<f64>, explore: bool) -> PyResult<Vec<f64>> {
        let mode = if explore { ActMode::Explore } else { ActMode::Exploit };
        self.inner.act(&obs, mode).map_err(value_err)
    }

    /// Stores one transition and runs an update round once warm-up is over.
    /// Returns whether an update happened.
    fn train_step(
        &mut self,
        obs: Vec<f64>,
        action: Vec<f64>,
        reward: f64,
        next_obs: Vec<f64>,
        terminal: bool,
    ) -> PyResult<bool> {
        let d = self
            .inner
            .train_step(Transition {
                obs,
                action,
                reward,
                next_obs,
                terminal,
            })
            .map_err(value_err)?;
        Ok(d.updated)
    }

    #[getter]
    fn algorithm(&self) -> &'static str {
        self.inner.algorithm().name()
    }
}

/// Runs every (algorithm, learning rate, seed) tuple of the config and
/// returns the run directories.
#[pyfunction]
fn run_campaign(config: &PyConfig, out_dir: PathBuf) -> PyResult<Vec<PathBuf>> {
    let records = harness::run_campaign(&config.inner, &out_dir).map_err(runtime_err)?;
    Ok(records.into_iter().map(|r| r.dir).collect())
}

/// Text comparison report over the runs stored under `out_dir`.
#[pyfunction]
#[pyo3(signature = (out_dir, final_window_fraction = 0.1))]
fn report(out_dir: PathBuf, final_window_fraction: f64) -> PyResult<String> {
    let records = harness::load_runs(&out_dir).map_err(runtime_err)?;
    harness::compare_report(&records, final_window_fraction)
        .map(|r| r.to_text())
        .map_err(runtime_err)
}

/// Exhaustive search over antenna grid positions and a common power level.
/// Returns `(antenna_xs, power_w, sum_rate)`.
#[pyfunction]
#[pyo3(signature = (users, targets, served_user = 0, resolution_m = 1.0, power_levels = 5, enforce_snr = false, config = None))]
fn oracle(
    users: Vec<(f64, f64)>,
    targets: Vec<(f64, f64)>,
    served_user: usize,
    resolution_m: f64,
    power_levels: usize,
    enforce_snr: bool,
    config: Option<&PyConfig>,
) -> PyResult<(Vec<f64>, f64, f64)> {
    let mut c = system(config);
    c.num_users = users.len();
    c.num_targets = targets.len();
    let scenario = Scenario {
        users: users.into_iter().map(ground).collect(),
        targets: targets.into_iter().map(ground).collect(),
        served_user,
    };
    let r = harness::grid_search_oracle(
        &scenario,
        &c,
        &OracleOptions {
            resolution_m,
            power_levels,
            enforce_snr,
        },
    )
    .map_err(runtime_err)?;
    Ok((r.layout, r.power_w, r.sum_rate))
}

#[pymodule]
fn pinch_isac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyConfig>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyStepResult>()?;
    m.add_class::<PyAgent>()?;
    m.add_function(wrap_pyfunction!(effective_gain, m)?)?;
    m.add_function(wrap_pyfunction!(user_rate, m)?)?;
    m.add_function(wrap_pyfunction!(sensing_snr, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(report, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    Ok(())
}
