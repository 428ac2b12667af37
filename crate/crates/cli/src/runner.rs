//! Executes scenario cases and writes their tables.

use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use atomcurrent::darkstate::{build_dark_state, dark_census, degenerate_manifolds};
use atomcurrent::fock::number_operator;
use atomcurrent::master::{evolve_master, evolve_sme};
use atomcurrent::measure::{asym_channel, spontaneous_channels, sym_channel, SpontaneousRates};
use atomcurrent::model::{
    build_hamiltonian, build_tls, degeneracy_points, local_current, sigma_x, tls_potential, total_current, DEGENERACY_TOL,
    TLS_QUAD_PHASE,
};
use atomcurrent::sse::{simulate_ensemble, trajectory_rng, InitialState};
use atomcurrent::{
    build_basis, Boundary, CqedParams, DensityMatrix, FockBasis, MeasurementChannel, ModelParams, OperatorMatrix, Probe,
    SseConfig, StateVector, TlsParams, TrajectoryRecord,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{parse_initial, Case, CaseKind, ChannelSpec, Initial, ModelSpec, Scenario, Scheme};
use crate::output::{
    io_err, schema_versions, write_json, Table, CUT_SCHEMA, DARK_POINTS_SCHEMA, LANDSCAPE_SCHEMA, MANIFEST_SCHEMA,
    MASTER_SCHEMA, RHO_SCHEMA, SME_SCHEMA, SPECTRUM_SCHEMA, SUMMARY_SCHEMA, TRAJECTORY_SCHEMA,
};
use crate::CliError;

/// Files and diagnostics of one finished case.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub kind: CaseKind,
    pub seed: u64,
    pub files: Vec<String>,
    pub diagnostics: Value,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub config_hash: String,
    pub cases: Vec<CaseReport>,
}

/// Seed used by case `index`.
pub fn case_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Runs every case into `<out>/<scenario name>/`. On a numerical abort a
/// `diagnostics.json` is left in that directory before the error returns.
pub fn run_scenario(s: &Scenario, out: &Path) -> Result<RunReport, CliError> {
    s.validate()?;
    let dir = out.join(&s.name);
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    let hash = s.config_hash();
    let mut reports = Vec::new();
    for (i, case) in s.cases.iter().enumerate() {
        let seed = case_seed(s.seed, i);
        let case_dir = dir.join(&case.name);
        fs::create_dir_all(&case_dir).map_err(|e| io_err(&case_dir, e))?;
        log::info!("case {} ({})", case.name, case.kind.name());
        match run_case(case, seed, &case_dir) {
            Ok(r) => reports.push(r),
            Err(e) => {
                if let CliError::Numerical(msg) = &e {
                    let diag = json!({
                        "scenario": s.name,
                        "case": case.name,
                        "kind": case.kind.name(),
                        "seed": seed,
                        "config_hash": hash,
                        "error": msg,
                    });
                    write_json(&dir.join("diagnostics.json"), &diag)?;
                }
                return Err(e);
            }
        }
    }
    let manifest = json!({
        "schema": MANIFEST_SCHEMA,
        "scenario": s.name,
        "figure": s.figure,
        "description": s.description,
        "config_hash": hash,
        "seed": s.seed,
        "versions": {
            "atomcurrent": atomcurrent::VERSION,
            "atomcurrent-cli": env!("CARGO_PKG_VERSION"),
            "schemas": schema_versions(),
        },
        "cases": reports.iter().map(|r| json!({
            "name": r.name,
            "kind": r.kind.name(),
            "seed": r.seed,
            "files": r.files,
            "diagnostics": r.diagnostics,
        })).collect::<Vec<_>>(),
    });
    let scenario_path = dir.join("scenario.toml");
    fs::write(&scenario_path, s.to_toml()).map_err(|e| io_err(&scenario_path, e))?;
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunReport {
        dir,
        config_hash: hash,
        cases: reports,
    })
}

fn run_case(case: &Case, seed: u64, dir: &Path) -> Result<CaseReport, CliError> {
    let (files, diagnostics) = match case.kind {
        CaseKind::Sse => run_sse(case, seed, dir)?,
        CaseKind::Tls => run_tls(case, seed, dir)?,
        CaseKind::Master => run_master(case, seed, dir)?,
        CaseKind::Sme => run_sme(case, seed, dir)?,
        CaseKind::Spectrum => run_spectrum(case, dir)?,
        CaseKind::Landscape => run_landscape(case, dir)?,
    };
    Ok(CaseReport {
        name: case.name.clone(),
        kind: case.kind,
        seed,
        files: files.iter().map(|f| format!("{}/{f}", case.name)).collect(),
        diagnostics,
    })
}

struct System {
    basis: FockBasis,
    hamiltonian: OperatorMatrix,
    channels: Vec<MeasurementChannel>,
    probes: Vec<Probe>,
}

pub fn model_params(m: &ModelSpec) -> ModelParams {
    let theta = m.theta.value();
    match m.boundary {
        Boundary::Ring => ModelParams::ring(m.sites, m.particles, m.hopping, theta, m.interaction),
        Boundary::Open => ModelParams::open(m.sites, m.particles, m.hopping, theta, m.interaction),
    }
}

fn build_channels(basis: &FockBasis, p: &ModelParams, specs: &[ChannelSpec]) -> Result<Vec<MeasurementChannel>, CliError> {
    let mut out = Vec::new();
    for c in specs {
        let links = c.links.resolve(p.sites, p.boundary).map_err(CliError::Config)?;
        match c.scheme {
            Scheme::Asym => {
                let phi_g = c.phi_g.map(|a| a.value()).unwrap_or(0.0);
                out.push(asym_channel(basis, p, &links, phi_g, c.gamma.unwrap_or(0.0))?);
            }
            Scheme::Sym => {
                let phases = c.phases.map(|[a, b, d]| (a.value(), b.value(), d.value()));
                out.push(sym_channel(basis, p, &links, phases, c.gamma.unwrap_or(0.0))?);
            }
            Scheme::Spontaneous => {
                let rates = SpontaneousRates {
                    decay: c.decay,
                    dephasing: c.dephasing,
                };
                out.extend(spontaneous_channels(basis, p, &CqedParams::default(), &links, rates)?);
            }
        }
    }
    Ok(out)
}

fn build_probe(name: &str, basis: &FockBasis, p: &ModelParams) -> Result<Probe, CliError> {
    let (var, base) = match name.strip_prefix("var_") {
        Some(b) => (true, b),
        None => (false, name),
    };
    let op = |probe_op: OperatorMatrix| {
        if var {
            Probe::variance(name, probe_op)
        } else {
            Probe::expectation(name, probe_op)
        }
    };
    if base == "J_tot" {
        return Ok(op(total_current(basis, p)?));
    }
    if let Some(j) = base.strip_prefix("J_") {
        let j: usize = j.parse().map_err(|_| CliError::Config(format!("bad probe `{name}`")))?;
        return Ok(op(local_current(basis, p, j)?));
    }
    if name == "purity" {
        return Ok(Probe::purity());
    }
    if let Some(s) = name.strip_prefix("n_") {
        let s: usize = s.parse().map_err(|_| CliError::Config(format!("bad probe `{name}`")))?;
        return Ok(Probe::expectation(name, number_operator(basis, s)?));
    }
    if let Some(j) = name.strip_prefix("dark_") {
        let j: usize = j.parse().map_err(|_| CliError::Config(format!("bad probe `{name}`")))?;
        let census = dark_census(p.sites, p.particles, p.theta, j)?;
        let spec = census.first().ok_or_else(|| {
            CliError::Config(format!("probe `{name}`: no dark state of link {j} at theta = {}", p.theta))
        })?;
        return Ok(Probe::overlap(name, build_dark_state(basis, spec)?));
    }
    Err(CliError::Config(format!("unknown probe `{name}`")))
}

fn system(case: &Case) -> Result<System, CliError> {
    let m = case.model.as_ref().expect("validated");
    let params = model_params(m);
    let basis = build_basis(m.sites, m.particles)?;
    let hamiltonian = build_hamiltonian(&basis, &params)?;
    let channels = build_channels(&basis, &params, &case.channels)?;
    let probes = case
        .probes
        .iter()
        .map(|n| build_probe(n, &basis, &params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(System {
        basis,
        hamiltonian,
        channels,
        probes,
    })
}

fn sse_config(case: &Case, seed: u64) -> SseConfig {
    let i = case.integrator.as_ref().expect("validated");
    SseConfig::new(i.dt, i.t_final, seed).with_stride(i.record_stride)
}

fn initial(case: &Case) -> Initial {
    parse_initial(&case.initial).expect("validated")
}

fn fock_state(basis: &FockBasis, occ: &[u32]) -> Result<StateVector, CliError> {
    let idx = basis
        .index_of(occ)
        .ok_or_else(|| CliError::Config(format!("occupations {occ:?} are not in the basis")))?;
    Ok(StateVector::basis_state(basis.dim(), idx))
}

/// Trajectory table: `t`, `dq_k`, `x_k`, probes, drift column.
fn record_table(schema: &str, rec: &TrajectoryRecord, drift_name: &str, drift: &[f64]) -> Table {
    let k = rec.channel_labels.len();
    let mut header = vec!["t".to_string()];
    header.extend((0..k).map(|c| format!("dq_{c}")));
    header.extend((0..k).map(|c| format!("x_{c}")));
    header.extend(rec.probe_names.iter().cloned());
    header.push(drift_name.into());
    let mut t = Table::new(schema, header)
        .meta("seed", rec.seed)
        .meta("stream", rec.stream)
        .meta("dt", rec.dt)
        .meta("channels", k);
    for (c, (label, gamma)) in rec.channel_labels.iter().zip(&rec.channel_gammas).enumerate() {
        t = t.meta(format!("channel{c}.label"), label).meta(format!("channel{c}.gamma"), gamma);
    }
    for i in 0..rec.len() {
        let mut row = vec![rec.times[i]];
        row.extend(&rec.dq[i]);
        row.extend(&rec.quadratures[i]);
        row.extend(&rec.observables[i]);
        row.push(drift[i]);
        t.rows.push(row);
    }
    t
}

fn with_gains(mut t: Table, channels: &[MeasurementChannel]) -> Table {
    for (c, ch) in channels.iter().filter(|c| c.monitored).enumerate() {
        t = t.meta(format!("channel{c}.gain"), ch.current_gain);
    }
    t
}

/// Per-time ensemble mean and variance of every probe.
fn summary(records: &[&TrajectoryRecord], drift: &[f64]) -> Value {
    let first = records[0];
    let n = records.len() as f64;
    let mut probes = serde_json::Map::new();
    for (p, name) in first.probe_names.iter().enumerate() {
        let mut mean = Vec::with_capacity(first.len());
        let mut var = Vec::with_capacity(first.len());
        for i in 0..first.len() {
            let m = records.iter().map(|r| r.observables[i][p]).sum::<f64>() / n;
            let v = records.iter().map(|r| (r.observables[i][p] - m).powi(2)).sum::<f64>() / n;
            mean.push(m);
            var.push(v);
        }
        probes.insert(name.clone(), json!({ "mean": mean, "variance": var }));
    }
    json!({
        "schema": SUMMARY_SCHEMA,
        "trajectories": records.len(),
        "times": first.times,
        "probes": probes,
        "diagnostics": { "max_drift": drift.iter().fold(0.0f64, |a, b| a.max(*b)) },
    })
}

fn write_records(
    dir: &Path,
    schema: &str,
    prefix: &str,
    records: &[(&TrajectoryRecord, Vec<f64>)],
    drift_name: &str,
    channels: &[MeasurementChannel],
) -> Result<(Vec<String>, Value), CliError> {
    let mut files = Vec::new();
    let mut max_drift = Vec::new();
    for (i, (rec, drift)) in records.iter().enumerate() {
        let name = format!("{prefix}_{i:03}.csv");
        with_gains(record_table(schema, rec, drift_name, drift), channels).write(&dir.join(&name))?;
        files.push(name);
        max_drift.push(drift.iter().fold(0.0f64, |a, b| a.max(*b)));
    }
    let recs: Vec<&TrajectoryRecord> = records.iter().map(|(r, _)| *r).collect();
    let sum = summary(&recs, &max_drift);
    write_json(&dir.join("summary.json"), &sum)?;
    files.push("summary.json".into());
    Ok((files, sum["diagnostics"].clone()))
}

fn run_sse(case: &Case, seed: u64, dir: &Path) -> Result<(Vec<String>, Value), CliError> {
    let sys = system(case)?;
    let init = match initial(case) {
        Initial::Haar => InitialState::Haar,
        Initial::Fock(occ) => InitialState::Fixed(fock_state(&sys.basis, &occ)?),
        other => return Err(CliError::Config(format!("initial state {other:?} is not valid for sse"))),
    };
    let cfg = sse_config(case, seed);
    let records = simulate_ensemble(&sys.hamiltonian, &sys.channels, &init, &cfg, &sys.probes, case.ensemble)?;
    let pairs: Vec<_> = records.iter().map(|r| (r, r.norm_drift.clone())).collect();
    write_records(dir, TRAJECTORY_SCHEMA, "traj", &pairs, "norm_drift", &sys.channels)
}

fn run_tls(case: &Case, seed: u64, dir: &Path) -> Result<(Vec<String>, Value), CliError> {
    let spec = case.tls.as_ref().expect("validated");
    let ops = build_tls(&TlsParams {
        h: spec.h,
        omega: spec.omega,
    })?;
    let channel = MeasurementChannel::new(ops.jump.clone(), spec.gamma, TLS_QUAD_PHASE, true, "tls")?;
    let names: Vec<String> = if case.probes.is_empty() {
        vec!["sigma_z".into()]
    } else {
        case.probes.clone()
    };
    let probes: Vec<Probe> = names
        .iter()
        .map(|n| match n.as_str() {
            "sigma_x" => Probe::expectation(n, sigma_x()),
            _ => Probe::expectation(n, ops.observable.clone()),
        })
        .collect();
    let init = match initial(case) {
        Initial::Haar => InitialState::Haar,
        Initial::Down => InitialState::Fixed(StateVector::basis_state(2, 1)),
        _ => InitialState::Fixed(StateVector::basis_state(2, 0)),
    };
    let cfg = sse_config(case, seed);
    let channels = [channel];
    let records = simulate_ensemble(&ops.hamiltonian, &channels, &init, &cfg, &probes, case.ensemble)?;
    let pairs: Vec<_> = records.iter().map(|r| (r, r.norm_drift.clone())).collect();
    write_records(dir, TRAJECTORY_SCHEMA, "traj", &pairs, "norm_drift", &channels)
}

fn initial_density(case: &Case, basis: &FockBasis, seed: u64, stream: u64) -> Result<DensityMatrix, CliError> {
    Ok(match initial(case) {
        Initial::Mixed => DensityMatrix::maximally_mixed(basis.dim()),
        Initial::Fock(occ) => DensityMatrix::from_pure(&fock_state(basis, &occ)?),
        _ => DensityMatrix::from_pure(&StateVector::haar_random(basis.dim(), &mut trajectory_rng(!seed, stream))),
    })
}

fn run_master(case: &Case, seed: u64, dir: &Path) -> Result<(Vec<String>, Value), CliError> {
    let sys = system(case)?;
    let i = case.integrator.as_ref().expect("validated");
    let rho0 = initial_density(case, &sys.basis, seed, 0)?;
    let series = evolve_master(&rho0, &sys.hamiltonian, &sys.channels, i.dt, i.t_final, i.record_stride)?;
    let probes: Vec<&Probe> = sys.probes.iter().filter(|p| p.name != "purity").collect();
    let mut header = vec!["t".to_string(), "purity".to_string()];
    header.extend(probes.iter().map(|p| p.name.clone()));
    let mut t = Table::new(MASTER_SCHEMA, header).meta("dt", i.dt).meta("seed", seed);
    for (time, rho) in series.times.iter().zip(&series.states) {
        let mut row = vec![*time, rho.purity()];
        row.extend(probes.iter().map(|p| rho.evaluate(p)));
        t.rows.push(row);
    }
    t.write(&dir.join("master.csv"))?;
    let mut files = vec!["master.csv".to_string()];
    for (k, &want) in case.snapshot_times.iter().enumerate() {
        let idx = series
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - want).abs().total_cmp(&(b.1 - want).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let rho = series.states[idx].matrix();
        let mut snap = Table::new(RHO_SCHEMA, vec!["row".into(), "col".into(), "re".into(), "im".into()])
            .meta("t", series.times[idx])
            .meta("dim", rho.nrows());
        for r in 0..rho.nrows() {
            for c in 0..rho.ncols() {
                let z = rho[(r, c)];
                snap.rows.push(vec![r as f64, c as f64, z.re, z.im]);
            }
        }
        let name = format!("rho_{k:03}.csv");
        snap.write(&dir.join(&name))?;
        files.push(name);
    }
    let diag = json!({
        "max_trace_error": series.max_trace_error,
        "max_symmetrization": series.max_symmetrization,
        "final_purity": series.last().purity(),
    });
    Ok((files, diag))
}

fn run_sme(case: &Case, seed: u64, dir: &Path) -> Result<(Vec<String>, Value), CliError> {
    let sys = system(case)?;
    let cfg = sse_config(case, seed);
    let records = (0..case.ensemble as u64)
        .into_par_iter()
        .map(|k| {
            let rho0 = initial_density(case, &sys.basis, seed, k)?;
            Ok(evolve_sme(&rho0, &sys.hamiltonian, &sys.channels, &cfg, &sys.probes, k)?)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let pairs: Vec<_> = records.iter().map(|r| (&r.record, r.trace_drift.clone())).collect();
    write_records(dir, SME_SCHEMA, "sme", &pairs, "trace_drift", &sys.channels)
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

/// Many-body spectrum against flux: rows `(theta, eigenvalue_index, energy)`.
pub fn spectrum_table(m: &ModelSpec, thetas: &[f64]) -> Result<Table, CliError> {
    let basis = build_basis(m.sites, m.particles)?;
    let mut t = Table::new(
        SPECTRUM_SCHEMA,
        vec!["theta".into(), "eigenvalue_index".into(), "energy".into()],
    )
    .meta("sites", m.sites)
    .meta("particles", m.particles)
    .meta("interaction", m.interaction)
    .meta("hopping", m.hopping);
    for &theta in thetas {
        let mut spec = m.clone();
        spec.theta = theta.into();
        let h = build_hamiltonian(&basis, &model_params(&spec))?;
        let mut idx = 0;
        for manifold in degenerate_manifolds(&h, DEGENERACY_TOL)? {
            for _ in 0..manifold.len() {
                t.rows.push(vec![theta, idx as f64, manifold.energy]);
                idx += 1;
            }
        }
    }
    Ok(t)
}

/// Dark states at every degeneracy point in `[lo, hi]`: rows
/// `(theta, link, k, energy)`.
pub fn dark_points_table(m: &ModelSpec, lo: f64, hi: f64) -> Result<Table, CliError> {
    let mut t = Table::new(
        DARK_POINTS_SCHEMA,
        vec!["theta".into(), "link".into(), "k".into(), "energy".into()],
    )
    .meta("sites", m.sites)
    .meta("particles", m.particles);
    let mut thetas: Vec<f64> = degeneracy_points(m.sites)?.iter().map(|d| d.theta).collect();
    let extra: Vec<f64> = thetas.iter().map(|t| t + TAU).collect();
    thetas.extend(extra);
    for theta in thetas.into_iter().filter(|t| *t >= lo - 1e-12 && *t <= hi + 1e-12) {
        for link in 1..=m.sites {
            for spec in dark_census(m.sites, m.particles, theta, link)? {
                t.rows.push(vec![theta, link as f64, spec.k as f64, spec.energy * m.hopping]);
            }
        }
    }
    Ok(t)
}

fn run_spectrum(case: &Case, dir: &Path) -> Result<(Vec<String>, Value), CliError> {
    let m = case.model.as_ref().expect("validated");
    let s = case.scan.as_ref().expect("validated");
    let (lo, hi) = (s.theta_min.value(), s.theta_max.value());
    spectrum_table(m, &linspace(lo, hi, s.points))?.write(&dir.join("spectrum.csv"))?;
    let mut files = vec!["spectrum.csv".to_string()];
    if m.boundary == Boundary::Ring && m.interaction == 0.0 {
        dark_points_table(m, lo, hi)?.write(&dir.join("dark_points.csv"))?;
        files.push("dark_points.csv".into());
    }
    Ok((files, json!({ "points": s.points })))
}

fn run_landscape(case: &Case, dir: &Path) -> Result<(Vec<String>, Value), CliError> {
    let l = case.landscape.as_ref().expect("validated");
    let theta = l.theta.value();
    let mut grid = Table::new(
        LANDSCAPE_SCHEMA,
        vec!["phi12".into(), "phi23".into(), "potential".into()],
    )
    .meta("theta", theta)
    .meta("particles", l.particles)
    .meta("hopping", l.hopping);
    let step = TAU / l.grid as f64;
    for a in 0..l.grid {
        for b in 0..l.grid {
            let (x, y) = (a as f64 * step, b as f64 * step);
            grid.rows.push(vec![x, y, tls_potential(theta, x, y, l.hopping, l.particles)]);
        }
    }
    let lowest = grid.rows.iter().map(|r| r[2]).fold(f64::INFINITY, f64::min);
    let minima: Vec<Value> = grid
        .rows
        .iter()
        .filter(|r| r[2] <= lowest + 1e-9 * lowest.abs().max(1.0))
        .map(|r| json!({ "phi12": r[0], "phi23": r[1] }))
        .collect();
    grid.write(&dir.join("landscape.csv"))?;
    let mut files = vec!["landscape.csv".to_string()];
    if !l.cuts.is_empty() {
        let mut cut = Table::new(CUT_SCHEMA, vec!["theta".into(), "x".into(), "potential".into()])
            .meta("direction", "phi12=phi23")
            .meta("particles", l.particles)
            .meta("hopping", l.hopping);
        for c in &l.cuts {
            for x in linspace(0.0, TAU, l.cut_points) {
                cut.rows.push(vec![c.value(), x, tls_potential(c.value(), x, x, l.hopping, l.particles)]);
            }
        }
        cut.write(&dir.join("cut.csv"))?;
        files.push("cut.csv".into());
    }
    Ok((files, json!({ "grid_minimum": lowest, "minima": minima })))
}
