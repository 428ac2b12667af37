use std::collections::HashMap;
use std::path::Path;

use atomcurrent::darkstate::{dark_census, degenerate_manifolds, export_dark_state};
use atomcurrent::measure::asym_channel;
use atomcurrent::model::{self, build_hamiltonian, total_current, DEGENERACY_TOL};
use atomcurrent::sse::{simulate_trajectory, trajectory_rng};
use atomcurrent::{build_basis, Boundary, ModelParams, Probe, SseConfig, StateVector};
use atomcurrent_cli::presets::resolve;
use atomcurrent_cli::runner::run_scenario as run;
use atomcurrent_cli::CliError;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: CliError) -> PyErr {
    match e {
        CliError::Config(m) => PyValueError::new_err(m),
        CliError::Numerical(m) => PyArithmeticError::new_err(m),
        CliError::Io(m) => PyOSError::new_err(m),
    }
}

fn core_err(e: atomcurrent::Error) -> PyErr {
    py_err(e.into())
}

fn params(sites: usize, particles: usize, theta: f64, interaction: f64, hopping: f64, open: bool) -> ModelParams {
    ModelParams {
        sites,
        particles,
        hopping,
        theta,
        interaction,
        boundary: if open { Boundary::Open } else { Boundary::Ring },
    }
}

pub fn spectrum_values(p: &ModelParams) -> Result<Vec<f64>, atomcurrent::Error> {
    let basis = build_basis(p.sites, p.particles)?;
    let h = build_hamiltonian(&basis, p)?;
    Ok(degenerate_manifolds(&h, DEGENERACY_TOL)?
        .iter()
        .flat_map(|m| std::iter::repeat(m.energy).take(m.len()))
        .collect())
}

#[pyfunction]
fn version() -> &'static str {
    atomcurrent::VERSION
}

/// Sorted eigenvalues of H, degenerate levels repeated.
#[pyfunction]
#[pyo3(signature = (sites, particles, theta, interaction=0.0, hopping=1.0, open=false))]
fn spectrum(sites: usize, particles: usize, theta: f64, interaction: f64, hopping: f64, open: bool) -> PyResult<Vec<f64>> {
    spectrum_values(&params(sites, particles, theta, interaction, hopping, open)).map_err(core_err)
}

#[pyfunction]
fn degeneracy_points(sites: usize) -> PyResult<Vec<f64>> {
    Ok(model::degeneracy_points(sites).map_err(core_err)?.iter().map(|d| d.theta).collect())
}

/// Dark states of one link as a JSON string.
#[pyfunction]
#[pyo3(signature = (sites, particles, theta, link=1))]
fn dark_states(sites: usize, particles: usize, theta: f64, link: usize) -> PyResult<String> {
    let basis = build_basis(sites, particles).map_err(core_err)?;
    let states = dark_census(sites, particles, theta, link)
        .map_err(core_err)?
        .iter()
        .map(|s| export_dark_state(&basis, s))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core_err)?;
    Ok(serde_json::to_string(&states).expect("json"))
}

#[pyfunction]
#[pyo3(signature = (theta, phi12, phi23, hopping=1.0, particles=3.0))]
fn tls_potential(theta: f64, phi12: f64, phi23: f64, hopping: f64, particles: f64) -> f64 {
    model::tls_potential(theta, phi12, phi23, hopping, particles)
}

/// One trajectory under global asymmetric monitoring from a Haar-random
/// state. Keys: `t`, `dq`, `J_tot`, `norm_drift`.
#[pyfunction]
#[pyo3(signature = (sites, particles, theta, gamma, dt, t_final, seed, stream=0, interaction=0.0, stride=1))]
#[allow(clippy::too_many_arguments)]
fn trajectory(
    sites: usize,
    particles: usize,
    theta: f64,
    gamma: f64,
    dt: f64,
    t_final: f64,
    seed: u64,
    stream: u64,
    interaction: f64,
    stride: usize,
) -> PyResult<HashMap<String, Vec<f64>>> {
    let p = params(sites, particles, theta, interaction, 1.0, false);
    let basis = build_basis(sites, particles).map_err(core_err)?;
    let h = build_hamiltonian(&basis, &p).map_err(core_err)?;
    let links: Vec<usize> = (1..=sites).collect();
    let ch = asym_channel(&basis, &p, &links, 0.0, gamma).map_err(core_err)?;
    let probes = [Probe::expectation("J_tot", total_current(&basis, &p).map_err(core_err)?)];
    let psi0 = StateVector::haar_random(basis.dim(), &mut trajectory_rng(!seed, stream));
    let cfg = SseConfig::new(dt, t_final, seed).with_stride(stride);
    let r = simulate_trajectory(&h, &[ch], &psi0, &cfg, &probes, stream).map_err(core_err)?;
    Ok(HashMap::from([
        ("t".to_string(), r.times.clone()),
        ("dq".to_string(), r.dq.iter().map(|v| v[0]).collect()),
        ("J_tot".to_string(), r.observables.iter().map(|v| v[0]).collect()),
        ("norm_drift".to_string(), r.norm_drift),
    ]))
}

/// Runs a scenario file or preset into `out` and returns the manifest path.
#[pyfunction]
#[pyo3(signature = (scenario, out, seed=None, dt_override=None))]
fn run_scenario(scenario: &str, out: &str, seed: Option<u64>, dt_override: Option<f64>) -> PyResult<String> {
    let mut s = resolve(scenario).map_err(py_err)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(dt) = dt_override {
        s.override_dt(dt);
    }
    let report = run(&s, Path::new(out)).map_err(py_err)?;
    Ok(report.dir.join("manifest.json").display().to_string())
}

#[pymodule]
fn pyatomcurrent(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(version, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(degeneracy_points, m)?)?;
    m.add_function(wrap_pyfunction!(dark_states, m)?)?;
    m.add_function(wrap_pyfunction!(tls_potential, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
