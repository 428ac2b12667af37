//! Diffusive stochastic Schrödinger equation for homodyne detection.
//!
//! Each step evaluates the quadratures on the normalized state, draws the
//! record increments `dq = sqrt(gamma) <x> dt + dW`, applies the linear
//! Euler-Maruyama map and renormalizes.

use num_complex::Complex64 as C64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::MeasurementChannel;
use crate::operator::OperatorMatrix;
use crate::state::StateVector;

/// Hard ceiling on `dt * max(gamma)`.
pub const MAX_RATE_STEP: f64 = 0.01;
/// Above this `dt * max(gamma)` a warning is logged.
pub const WARN_RATE_STEP: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SseConfig {
    pub dt: f64,
    pub t_final: f64,
    pub seed: u64,
    /// Steps between renormalizations.
    pub renorm_every: usize,
    /// Steps between recorded rows.
    pub record_stride: usize,
    /// Times at which full states are kept.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

impl SseConfig {
    pub fn new(dt: f64, t_final: f64, seed: u64) -> Self {
        SseConfig {
            dt,
            t_final,
            seed,
            renorm_every: 1,
            record_stride: 1,
            snapshot_times: Vec::new(),
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    pub fn validate(&self, channels: &[MeasurementChannel]) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", format!("{} must be > 0", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::param("t_final", format!("{} must be >= 0", self.t_final)));
        }
        if self.renorm_every == 0 {
            return Err(Error::param("renorm_every", "must be >= 1"));
        }
        if self.record_stride == 0 {
            return Err(Error::param("record_stride", "must be >= 1"));
        }
        let gmax = channels.iter().map(|c| c.gamma).fold(0.0, f64::max);
        let r = self.dt * gmax;
        if r > MAX_RATE_STEP {
            return Err(Error::param(
                "dt",
                format!("dt * max(gamma) = {r} exceeds {MAX_RATE_STEP}"),
            ));
        }
        if r > WARN_RATE_STEP {
            log::warn!("dt * max(gamma) = {r} is above {WARN_RATE_STEP}");
        }
        Ok(())
    }
}

/// RNG for trajectory `index` of an ensemble seeded with `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone)]
pub enum ProbeKind {
    Expectation(OperatorMatrix),
    Variance(OperatorMatrix),
    /// `|<ref|psi>|^2`, or `<ref|rho|ref>` for density matrices.
    Overlap(StateVector),
    Purity,
}

#[derive(Debug, Clone)]
pub struct Probe {
    pub name: String,
    pub kind: ProbeKind,
}

impl Probe {
    pub fn expectation(name: impl Into<String>, op: OperatorMatrix) -> Self {
        Probe {
            name: name.into(),
            kind: ProbeKind::Expectation(op),
        }
    }

    pub fn variance(name: impl Into<String>, op: OperatorMatrix) -> Self {
        Probe {
            name: name.into(),
            kind: ProbeKind::Variance(op),
        }
    }

    pub fn overlap(name: impl Into<String>, reference: StateVector) -> Self {
        Probe {
            name: name.into(),
            kind: ProbeKind::Overlap(reference),
        }
    }

    pub fn purity() -> Self {
        Probe {
            name: "purity".into(),
            kind: ProbeKind::Purity,
        }
    }

    pub fn evaluate(&self, psi: &StateVector) -> f64 {
        match &self.kind {
            ProbeKind::Expectation(op) => psi.expectation(op).re,
            ProbeKind::Variance(op) => psi.variance(op),
            ProbeKind::Overlap(r) => r.fidelity(psi),
            ProbeKind::Purity => 1.0,
        }
    }

    pub(crate) fn dim(&self) -> Option<usize> {
        match &self.kind {
            ProbeKind::Expectation(op) | ProbeKind::Variance(op) => Some(op.dim()),
            ProbeKind::Overlap(r) => Some(r.dim()),
            ProbeKind::Purity => None,
        }
    }
}

/// Decimated output of one conditional evolution.
///
/// Row `i` holds the observables at `times[i]` and the record increments
/// accumulated over `(times[i-1], times[i]]`; row 0 has zero increments.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub channel_labels: Vec<String>,
    pub channel_gammas: Vec<f64>,
    pub dq: Vec<Vec<f64>>,
    /// Conditional quadrature `<x_m>_c` per monitored channel.
    pub quadratures: Vec<Vec<f64>>,
    pub probe_names: Vec<String>,
    pub observables: Vec<Vec<f64>>,
    /// Largest `| ||psi|| - 1 |` before renormalization within each row.
    pub norm_drift: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    #[serde(skip)]
    pub snapshots: Vec<(f64, StateVector)>,
    #[serde(skip)]
    pub final_state: Option<StateVector>,
}

impl TrajectoryRecord {
    pub(crate) fn empty(channels: &[&MeasurementChannel], probes: &[Probe], seed: u64, stream: u64, dt: f64) -> Self {
        TrajectoryRecord {
            times: Vec::new(),
            channel_labels: channels.iter().map(|c| c.label.clone()).collect(),
            channel_gammas: channels.iter().map(|c| c.gamma).collect(),
            dq: Vec::new(),
            quadratures: Vec::new(),
            probe_names: probes.iter().map(|p| p.name.clone()).collect(),
            observables: Vec::new(),
            norm_drift: Vec::new(),
            seed,
            stream,
            dt,
            snapshots: Vec::new(),
            final_state: None,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    /// Spacing of recorded rows.
    pub fn row_dt(&self) -> f64 {
        if self.times.len() < 2 {
            self.dt
        } else {
            self.times[1] - self.times[0]
        }
    }

    pub fn probe_index(&self, name: &str) -> Option<usize> {
        self.probe_names.iter().position(|n| n == name)
    }

    /// Column of probe `name`.
    pub fn probe_series(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.probe_index(name)?;
        Some(self.observables.iter().map(|row| row[k]).collect())
    }

    pub fn dq_series(&self, channel: usize) -> Vec<f64> {
        self.dq.iter().map(|row| row[channel]).collect()
    }

    pub fn quadrature_series(&self, channel: usize) -> Vec<f64> {
        self.quadratures.iter().map(|row| row[channel]).collect()
    }
}

/// Precomputed operators for repeated steps with a fixed generator.
#[derive(Debug, Clone)]
pub struct SseStepper {
    /// `-i H - sum_m (gamma_m / 2) c_m^dagger c_m`.
    drift: OperatorMatrix,
    /// `sqrt(gamma_m) e^{i phi_m} c_m`.
    kicks: Vec<OperatorMatrix>,
    quads: Vec<OperatorMatrix>,
    sqrt_gammas: Vec<f64>,
    scratch: Vec<C64>,
}

impl SseStepper {
    /// Unmonitored channels are ignored.
    pub fn new(h: &OperatorMatrix, channels: &[MeasurementChannel]) -> Result<Self> {
        h.require_hermitian()?;
        let dim = h.dim();
        let mut drift = h.scale(C64::new(0.0, -1.0));
        let mut kicks = Vec::new();
        let mut quads = Vec::new();
        let mut sqrt_gammas = Vec::new();
        for ch in channels.iter().filter(|c| c.monitored) {
            ch.jump.check_dim(dim)?;
            let ctc = &ch.jump.adjoint() * &ch.jump;
            drift = &drift - &ctc.scale_re(ch.gamma / 2.0);
            kicks.push(ch.rotated_jump().scale_re(ch.gamma.sqrt()));
            quads.push(ch.quadrature());
            sqrt_gammas.push(ch.gamma.sqrt());
        }
        Ok(SseStepper {
            drift,
            kicks,
            quads,
            sqrt_gammas,
            scratch: vec![C64::new(0.0, 0.0); dim],
        })
    }

    pub fn channels(&self) -> usize {
        self.kicks.len()
    }

    /// Quadrature expectations on `psi`, assumed normalized.
    pub fn quadratures(&self, psi: &StateVector) -> Vec<f64> {
        self.quads.iter().map(|x| psi.expectation(x).re).collect()
    }

    /// One step with prescribed Wiener increments. Returns `dq` per channel
    /// and the pre-normalization norm. `psi` is renormalized iff `renorm`.
    pub fn step_with_increments(
        &mut self,
        psi: &mut StateVector,
        dt: f64,
        dw: &[f64],
        renorm: bool,
    ) -> (Vec<f64>, f64) {
        let norm0 = psi.norm();
        let dq: Vec<f64> = self
            .quads
            .iter()
            .zip(&self.sqrt_gammas)
            .zip(dw)
            .map(|((x, sg), w)| sg * psi.expectation(x).re / (norm0 * norm0) * dt + w)
            .collect();
        let amps = psi.amplitudes();
        self.scratch.copy_from_slice(amps);
        self.drift.apply_add(C64::new(dt, 0.0), amps, &mut self.scratch);
        for (k, q) in self.kicks.iter().zip(&dq) {
            k.apply_add(C64::new(*q, 0.0), amps, &mut self.scratch);
        }
        psi.amplitudes_mut().copy_from_slice(&self.scratch);
        let n = psi.norm();
        if renorm && n > 0.0 {
            psi.scale(1.0 / n);
        }
        (dq, n / norm0)
    }

    /// One step drawing `dW ~ N(0, dt)` per channel from `rng`.
    pub fn step<R: Rng + ?Sized>(&mut self, psi: &mut StateVector, dt: f64, rng: &mut R) -> (Vec<f64>, f64) {
        let sd = dt.sqrt();
        let dw: Vec<f64> = (0..self.kicks.len())
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        self.step_with_increments(psi, dt, &dw, true)
    }
}

/// Single normalized step. Returns the updated state and `dq` per monitored
/// channel.
pub fn step<R: Rng + ?Sized>(
    state: &StateVector,
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    dt: f64,
    rng: &mut R,
) -> Result<(StateVector, Vec<f64>)> {
    let mut stepper = SseStepper::new(h, channels)?;
    let mut psi = state.clone();
    let (dq, _) = stepper.step(&mut psi, dt, rng);
    if !psi.is_finite() {
        return Err(Error::NumericalAbort {
            time: dt,
            reason: "non-finite amplitudes".into(),
        });
    }
    Ok((psi, dq))
}

pub(crate) fn snapshot_steps(cfg: &SseConfig) -> Vec<(usize, f64)> {
    cfg.snapshot_times
        .iter()
        .map(|&t| (((t / cfg.dt).round() as usize).min(cfg.steps()), t))
        .collect()
}

fn check_probes(probes: &[Probe], dim: usize) -> Result<()> {
    for p in probes {
        if let Some(d) = p.dim() {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: d });
            }
        }
    }
    Ok(())
}

/// One trajectory on RNG stream `stream` of `cfg.seed`.
pub fn simulate_trajectory(
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    psi0: &StateVector,
    cfg: &SseConfig,
    probes: &[Probe],
    stream: u64,
) -> Result<TrajectoryRecord> {
    let mut rng = trajectory_rng(cfg.seed, stream);
    run_trajectory(h, channels, psi0, cfg, probes, stream, &mut rng)
}

fn run_trajectory<R: Rng + ?Sized>(
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    psi0: &StateVector,
    cfg: &SseConfig,
    probes: &[Probe],
    stream: u64,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    cfg.validate(channels)?;
    let dim = h.dim();
    if psi0.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: psi0.dim(),
        });
    }
    check_probes(probes, dim)?;
    let mut stepper = SseStepper::new(h, channels)?;
    let monitored: Vec<&MeasurementChannel> = channels.iter().filter(|c| c.monitored).collect();
    let mut rec = TrajectoryRecord::empty(&monitored, probes, cfg.seed, stream, cfg.dt);
    let snaps = snapshot_steps(cfg);

    let mut psi = StateVector::normalized(psi0.amplitudes().to_vec())?;
    let m = stepper.channels();
    let push_row = |rec: &mut TrajectoryRecord, t: f64, psi: &StateVector, dq: Vec<f64>, drift: f64, stepper: &SseStepper| {
        rec.times.push(t);
        rec.dq.push(dq);
        rec.quadratures.push(stepper.quadratures(psi));
        rec.observables.push(probes.iter().map(|p| p.evaluate(psi)).collect());
        rec.norm_drift.push(drift);
    };
    push_row(&mut rec, 0.0, &psi, vec![0.0; m], 0.0, &stepper);
    for &(s, t) in &snaps {
        if s == 0 {
            rec.snapshots.push((t, psi.clone()));
        }
    }

    let steps = cfg.steps();
    let sd = cfg.dt.sqrt();
    let mut acc = vec![0.0; m];
    let mut drift_max: f64 = 0.0;
    let mut dw = vec![0.0; m];
    for n in 1..=steps {
        for w in dw.iter_mut() {
            *w = sd * rng.sample::<f64, _>(StandardNormal);
        }
        let renorm = n % cfg.renorm_every == 0 || n == steps;
        let (dq, ratio) = stepper.step_with_increments(&mut psi, cfg.dt, &dw, renorm);
        drift_max = drift_max.max((ratio - 1.0).abs());
        for (a, q) in acc.iter_mut().zip(&dq) {
            *a += q;
        }
        let t = n as f64 * cfg.dt;
        if !psi.is_finite() || psi.norm() == 0.0 {
            return Err(Error::NumericalAbort {
                time: t,
                reason: "state amplitudes became non-finite".into(),
            });
        }
        if n % cfg.record_stride == 0 || n == steps {
            let view = if renorm {
                psi.clone()
            } else {
                StateVector::normalized(psi.amplitudes().to_vec())?
            };
            push_row(&mut rec, t, &view, std::mem::replace(&mut acc, vec![0.0; m]), drift_max, &stepper);
            drift_max = 0.0;
        }
        for &(s, ts) in &snaps {
            if s == n {
                rec.snapshots.push((ts, StateVector::normalized(psi.amplitudes().to_vec())?));
            }
        }
    }
    rec.final_state = Some(psi);
    Ok(rec)
}

/// How each ensemble member is initialized.
#[derive(Debug, Clone)]
pub enum InitialState {
    Fixed(StateVector),
    /// Haar-random, drawn from the member's own RNG stream before any noise.
    Haar,
}

/// `count` trajectories on streams `0..count`, run in parallel. The result is
/// independent of scheduling.
pub fn simulate_ensemble(
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    init: &InitialState,
    cfg: &SseConfig,
    probes: &[Probe],
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = trajectory_rng(cfg.seed, i);
            let psi0 = match init {
                InitialState::Fixed(s) => s.clone(),
                InitialState::Haar => StateVector::haar_random(h.dim(), &mut rng),
            };
            run_trajectory(h, channels, &psi0, cfg, probes, i, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sigma_x, sigma_z};

    fn qubit_channel(gamma: f64) -> MeasurementChannel {
        MeasurementChannel::new(sigma_z(), gamma, 0.0, true, "z").unwrap()
    }

    #[test]
    fn rabi_without_measurement() {
        let omega = 1.3;
        let h = sigma_x().scale_re(omega);
        let cfg = SseConfig::new(1e-4, 2.0, 1).with_stride(100);
        let psi0 = StateVector::basis_state(2, 0);
        let rec = simulate_trajectory(&h, &[], &psi0, &cfg, &[Probe::expectation("z", sigma_z())], 0).unwrap();
        for (t, row) in rec.times.iter().zip(&rec.observables) {
            assert!((row[0] - (2.0 * omega * t).cos()).abs() < 1e-3, "t={t}");
        }
        assert!(rec.dq[0].is_empty());
    }

    #[test]
    fn zero_rate_channel_is_pure_noise() {
        let h = OperatorMatrix::zeros(2);
        let cfg = SseConfig::new(1e-3, 1.0, 3);
        let psi0 = StateVector::normalized(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let rec = simulate_trajectory(&h, &[qubit_channel(0.0)], &psi0, &cfg, &[], 0).unwrap();
        let fin = rec.final_state.unwrap();
        assert!((fin.fidelity(&psi0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qubit_collapse_follows_born_rule() {
        let gamma = 1.0;
        let h = OperatorMatrix::zeros(2);
        let cfg = SseConfig::new(1e-3, 10.0 / gamma, 11).with_stride(1000);
        let psi0 = StateVector::normalized(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]).unwrap();
        let recs = simulate_ensemble(
            &h,
            &[qubit_channel(gamma)],
            &InitialState::Fixed(psi0),
            &cfg,
            &[Probe::expectation("z", sigma_z())],
            400,
        )
        .unwrap();
        let mut up = 0;
        for r in &recs {
            let z = *r.observables.last().unwrap().first().unwrap();
            assert!(z.abs() > 0.999, "not collapsed: {z}");
            if z > 0.0 {
                up += 1;
            }
        }
        let frac = up as f64 / 400.0;
        assert!((frac - 0.5).abs() <= 0.05, "fraction {frac}");
    }

    #[test]
    fn seeds_are_deterministic() {
        let h = sigma_x();
        let ch = [qubit_channel(0.5)];
        let cfg = SseConfig::new(1e-3, 1.0, 42).with_stride(10);
        let psi0 = StateVector::basis_state(2, 0);
        let a = simulate_trajectory(&h, &ch, &psi0, &cfg, &[], 5).unwrap();
        let b = simulate_trajectory(&h, &ch, &psi0, &cfg, &[], 5).unwrap();
        let c = simulate_trajectory(&h, &ch, &psi0, &cfg, &[], 6).unwrap();
        assert_eq!(a.dq, b.dq);
        assert_ne!(a.dq, c.dq);
    }

    #[test]
    fn ensemble_matches_individual_runs() {
        let h = sigma_x();
        let ch = [qubit_channel(0.5)];
        let cfg = SseConfig::new(1e-3, 0.5, 9).with_stride(50);
        let psi0 = StateVector::basis_state(2, 0);
        let ens = simulate_ensemble(&h, &ch, &InitialState::Fixed(psi0.clone()), &cfg, &[], 4).unwrap();
        for (i, r) in ens.iter().enumerate() {
            let solo = simulate_trajectory(&h, &ch, &psi0, &cfg, &[], i as u64).unwrap();
            assert_eq!(r.dq, solo.dq);
        }
    }

    #[test]
    fn norm_is_restored_every_step() {
        let h = sigma_x();
        let ch = [qubit_channel(1.0)];
        let mut st = SseStepper::new(&h, &ch).unwrap();
        let mut rng = trajectory_rng(1, 0);
        let mut psi = StateVector::basis_state(2, 0);
        for _ in 0..1000 {
            st.step(&mut psi, 1e-3, &mut rng);
            assert!((psi.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_large_steps_and_bad_dims() {
        let h = sigma_x();
        let cfg = SseConfig::new(0.1, 1.0, 0);
        let psi0 = StateVector::basis_state(2, 0);
        assert!(simulate_trajectory(&h, &[qubit_channel(1.0)], &psi0, &cfg, &[], 0).is_err());
        let cfg = SseConfig::new(1e-3, 1.0, 0);
        let psi3 = StateVector::basis_state(3, 0);
        assert!(matches!(
            simulate_trajectory(&h, &[], &psi3, &cfg, &[], 0),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad_probe = [Probe::expectation("x", OperatorMatrix::identity(3))];
        assert!(simulate_trajectory(&h, &[], &psi0, &cfg, &bad_probe, 0).is_err());
    }

    #[test]
    fn snapshots_land_on_requested_times() {
        let h = sigma_x();
        let cfg = SseConfig::new(1e-3, 1.0, 0).with_snapshots(vec![0.0, 0.5, 1.0]);
        let rec = simulate_trajectory(&h, &[], &StateVector::basis_state(2, 0), &cfg, &[], 0).unwrap();
        let times: Vec<f64> = rec.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.5, 1.0]);
    }
}
