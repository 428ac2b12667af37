//! Unconditional Lindblad evolution and the stochastic master equation with
//! unmonitored channels.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::MeasurementChannel;
use crate::operator::OperatorMatrix;
use crate::sse::{snapshot_steps, trajectory_rng, Probe, ProbeKind, SseConfig, TrajectoryRecord};
use crate::state::StateVector;

pub const TRACE_TOL: f64 = 1e-8;
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Most negative eigenvalue tolerated before an abort.
pub const POSITIVITY_ABORT: f64 = -1e-6;
/// Steps between invariant checks.
pub const CHECK_EVERY: usize = 100;

type Dense = DMatrix<C64>;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    m: Dense,
}

impl DensityMatrix {
    /// Wraps a matrix without validation.
    pub fn from_matrix(m: Dense) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "density matrix must be square");
        DensityMatrix { m }
    }

    pub fn from_pure(psi: &StateVector) -> Self {
        let v = nalgebra::DVector::from_column_slice(psi.amplitudes());
        let n = v.norm_squared();
        DensityMatrix {
            m: (&v * v.adjoint()).unscale(n),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix {
            m: Dense::identity(dim, dim).unscale(dim as f64),
        }
    }

    /// Equal mixture of the given states.
    pub fn mixture(states: &[StateVector]) -> Self {
        assert!(!states.is_empty(), "mixture of no states");
        let dim = states[0].dim();
        let mut m = Dense::zeros(dim, dim);
        for s in states {
            m += DensityMatrix::from_pure(s).m;
        }
        DensityMatrix {
            m: m.unscale(states.len() as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &Dense {
        &self.m
    }

    pub fn into_matrix(self) -> Dense {
        self.m
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    /// `Tr rho^2`.
    pub fn purity(&self) -> f64 {
        self.m.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `Tr(O rho)`, real part.
    pub fn expectation(&self, op: &OperatorMatrix) -> f64 {
        op.entries().map(|(i, j, v)| v * self.m[(j, i)]).sum::<C64>().re
    }

    /// `<psi| rho |psi>`.
    pub fn overlap(&self, psi: &StateVector) -> f64 {
        let a = psi.amplitudes();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += a[i].conj() * self.m[(i, j)] * a[j];
            }
        }
        acc.re
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let d = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in i..d {
                worst = worst.max((self.m[(i, j)] - self.m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.m + self.m.adjoint()).scale(0.5);
        let mut e: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// `(1/2) || rho - sigma ||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> f64 {
        let d = DensityMatrix {
            m: &self.m - &other.m,
        };
        0.5 * d.eigenvalues().iter().map(|e| e.abs()).sum::<f64>()
    }

    /// Replaces `rho` by `(rho + rho^dagger) / 2` and returns the correction norm.
    pub fn symmetrize(&mut self) -> f64 {
        let sym = (&self.m + self.m.adjoint()).scale(0.5);
        let corr = (&sym - &self.m).norm();
        self.m = sym;
        corr
    }

    pub fn normalize_trace(&mut self) {
        let t = self.m.trace().re;
        self.m.unscale_mut(t);
    }

    pub fn validate(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > 1e-10 || tr.im.abs() > 1e-10 {
            return Err(Error::param("rho", format!("trace {tr} is not 1")));
        }
        let h = self.hermiticity_defect();
        if !(h <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian { defect: h });
        }
        let e = self.min_eigenvalue();
        if e < -1e-8 {
            return Err(Error::param("rho", format!("negative eigenvalue {e}")));
        }
        Ok(())
    }

    /// Value of `probe` in this state.
    pub fn evaluate(&self, probe: &Probe) -> f64 {
        match &probe.kind {
            ProbeKind::Expectation(op) => self.expectation(op),
            ProbeKind::Variance(op) => {
                let sq = op * op;
                let m = self.expectation(op);
                (self.expectation(&sq) - m * m).max(0.0)
            }
            ProbeKind::Overlap(r) => self.overlap(r),
            ProbeKind::Purity => self.purity(),
        }
    }
}

/// The Lindblad generator as dense operators:
/// `L rho = -i (H_eff rho - rho H_eff^dagger) + sum_k L_k rho L_k^dagger`.
#[derive(Debug, Clone)]
pub struct Lindbladian {
    h_eff: Dense,
    jumps: Vec<Dense>,
}

impl Lindbladian {
    pub fn new(h: &OperatorMatrix, channels: &[MeasurementChannel]) -> Result<Self> {
        h.require_hermitian()?;
        let dim = h.dim();
        let mut h_eff = h.to_dense();
        let mut jumps = Vec::new();
        for ch in channels {
            ch.jump.check_dim(dim)?;
            if ch.gamma == 0.0 {
                continue;
            }
            let c = ch.jump.to_dense();
            h_eff -= (c.adjoint() * &c).scale(0.5 * ch.gamma) * C64::new(0.0, 1.0);
            jumps.push(c.scale(ch.gamma.sqrt()));
        }
        Ok(Lindbladian { h_eff, jumps })
    }

    pub fn dim(&self) -> usize {
        self.h_eff.nrows()
    }

    pub fn apply(&self, rho: &Dense) -> Dense {
        let i = C64::new(0.0, 1.0);
        let a = &self.h_eff * rho;
        let mut out = (a - rho * self.h_eff.adjoint()) * (-i);
        for l in &self.jumps {
            out += l * rho * l.adjoint();
        }
        out
    }
}

/// `d rho / dt` summed over every channel, monitored or not.
pub fn lindblad_rhs(rho: &DensityMatrix, h: &OperatorMatrix, channels: &[MeasurementChannel]) -> Result<Dense> {
    let l = Lindbladian::new(h, channels)?;
    if rho.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho.dim(),
        });
    }
    Ok(l.apply(&rho.m))
}

#[derive(Debug, Clone)]
pub struct MasterSeries {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Largest symmetrization correction seen.
    pub max_symmetrization: f64,
    /// Largest `|Tr rho - 1|` seen at a check.
    pub max_trace_error: f64,
}

impl MasterSeries {
    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("series has at least the initial state")
    }

    pub fn purities(&self) -> Vec<f64> {
        self.states.iter().map(DensityMatrix::purity).collect()
    }
}

fn check_invariants(rho: &DensityMatrix, t: f64) -> Result<f64> {
    let tr = rho.trace();
    let terr = (tr.re - 1.0).abs().max(tr.im.abs());
    if !(terr <= TRACE_TOL * 100.0) {
        return Err(Error::NumericalAbort {
            time: t,
            reason: format!("trace drifted to {tr}"),
        });
    }
    let h = rho.hermiticity_defect();
    if !(h <= HERMITIAN_TOL) {
        return Err(Error::NumericalAbort {
            time: t,
            reason: format!("hermiticity defect {h:e}"),
        });
    }
    let e = rho.min_eigenvalue();
    if !(e >= POSITIVITY_ABORT) {
        return Err(Error::NumericalAbort {
            time: t,
            reason: format!("eigenvalue {e:e} below {POSITIVITY_ABORT:e}"),
        });
    }
    Ok(terr)
}

/// Classical RK4 with fixed `dt`. Every `record_stride` steps (and at the
/// end) the state is stored.
pub fn evolve_master(
    rho0: &DensityMatrix,
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    dt: f64,
    t_final: f64,
    record_stride: usize,
) -> Result<MasterSeries> {
    if !(dt > 0.0) || !(t_final >= 0.0) || record_stride == 0 {
        return Err(Error::param("dt", "need dt > 0, t_final >= 0 and a positive stride"));
    }
    let l = Lindbladian::new(h, channels)?;
    if rho0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            found: rho0.dim(),
        });
    }
    rho0.validate()?;
    let steps = (t_final / dt).round() as usize;
    let mut rho = rho0.clone();
    let mut series = MasterSeries {
        times: vec![0.0],
        states: vec![rho.clone()],
        max_symmetrization: 0.0,
        max_trace_error: 0.0,
    };
    for n in 1..=steps {
        let m = &rho.m;
        let k1 = l.apply(m);
        let k2 = l.apply(&(m + &k1 * C64::new(dt / 2.0, 0.0)));
        let k3 = l.apply(&(m + &k2 * C64::new(dt / 2.0, 0.0)));
        let k4 = l.apply(&(m + &k3 * C64::new(dt, 0.0)));
        rho.m = m + (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0);
        let corr = rho.symmetrize();
        series.max_symmetrization = series.max_symmetrization.max(corr);
        let t = n as f64 * dt;
        if n % CHECK_EVERY == 0 || n == steps {
            let terr = check_invariants(&rho, t)?;
            series.max_trace_error = series.max_trace_error.max(terr);
            log::trace!("t = {t}: symmetrization correction {corr:e}, trace error {terr:e}");
        }
        if n % record_stride == 0 || n == steps {
            series.times.push(t);
            series.states.push(rho.clone());
        }
    }
    Ok(series)
}

/// Conditional density-matrix record.
#[derive(Debug, Clone)]
pub struct SmeRecord {
    pub record: TrajectoryRecord,
    /// `Tr rho` before each renormalization, deviation from one, maximum per row.
    pub trace_drift: Vec<f64>,
    pub final_state: DensityMatrix,
    pub snapshots: Vec<(f64, DensityMatrix)>,
}

struct SmeStepper {
    /// `I + (-i H - 1/2 sum_all gamma c^dagger c) dt` is built per step from this drift.
    drift: Dense,
    kicks: Vec<Dense>,
    quads: Vec<OperatorMatrix>,
    sqrt_gammas: Vec<f64>,
    /// `sqrt(gamma_s) c_s` for unmonitored channels.
    unmonitored: Vec<Dense>,
}

impl SmeStepper {
    fn new(h: &OperatorMatrix, channels: &[MeasurementChannel]) -> Result<Self> {
        h.require_hermitian()?;
        let dim = h.dim();
        let i = C64::new(0.0, 1.0);
        let mut drift = h.to_dense() * (-i);
        let mut kicks = Vec::new();
        let mut quads = Vec::new();
        let mut sqrt_gammas = Vec::new();
        let mut unmonitored = Vec::new();
        for ch in channels {
            ch.jump.check_dim(dim)?;
            let c = ch.jump.to_dense();
            drift -= (c.adjoint() * &c).scale(0.5 * ch.gamma);
            if ch.monitored {
                kicks.push(ch.rotated_jump().to_dense().scale(ch.gamma.sqrt()));
                quads.push(ch.quadrature());
                sqrt_gammas.push(ch.gamma.sqrt());
            } else if ch.gamma > 0.0 {
                unmonitored.push(c.scale(ch.gamma.sqrt()));
            }
        }
        Ok(SmeStepper {
            drift,
            kicks,
            quads,
            sqrt_gammas,
            unmonitored,
        })
    }

    /// Kraus-form Euler step
    /// `rho' = M rho M^dagger + sum_s dt L_s rho L_s^dagger`, trace-normalized,
    /// with `M = I + drift dt + sum_m kick_m dq_m`. Returns `dq` and the
    /// pre-normalization trace.
    fn step(&self, rho: &mut DensityMatrix, dt: f64, dw: &[f64]) -> (Vec<f64>, f64) {
        let dq: Vec<f64> = self
            .quads
            .iter()
            .zip(&self.sqrt_gammas)
            .zip(dw)
            .map(|((x, sg), w)| sg * rho.expectation(x) * dt + w)
            .collect();
        let dim = rho.dim();
        let mut m = Dense::identity(dim, dim) + self.drift.scale(dt);
        for (k, q) in self.kicks.iter().zip(&dq) {
            m += k.scale(*q);
        }
        let mut next = &m * &rho.m * m.adjoint();
        for l in &self.unmonitored {
            next += (l * &rho.m * l.adjoint()).scale(dt);
        }
        rho.m = next;
        rho.symmetrize();
        let tr = rho.trace().re;
        rho.normalize_trace();
        (dq, tr)
    }
}

/// One SME trajectory on RNG stream `stream` of `cfg.seed`. Monitored
/// channels draw Wiener increments in the same order as the SSE, so a pure
/// initial state with no unmonitored channels reproduces the SSE trajectory
/// driven by the same stream.
pub fn evolve_sme(
    rho0: &DensityMatrix,
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    cfg: &SseConfig,
    probes: &[Probe],
    stream: u64,
) -> Result<SmeRecord> {
    let mut rng = trajectory_rng(cfg.seed, stream);
    run_sme(rho0, h, channels, cfg, probes, stream, &mut rng)
}

fn run_sme<R: Rng + ?Sized>(
    rho0: &DensityMatrix,
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    cfg: &SseConfig,
    probes: &[Probe],
    stream: u64,
    rng: &mut R,
) -> Result<SmeRecord> {
    cfg.validate(channels)?;
    if rho0.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            found: rho0.dim(),
        });
    }
    rho0.validate()?;
    let stepper = SmeStepper::new(h, channels)?;
    let monitored: Vec<&MeasurementChannel> = channels.iter().filter(|c| c.monitored).collect();
    let mut rec = TrajectoryRecord::empty(&monitored, probes, cfg.seed, stream, cfg.dt);
    let mut trace_drift = Vec::new();
    let mut snapshots = Vec::new();
    let snaps = snapshot_steps(cfg);
    let m = monitored.len();
    let mut rho = rho0.clone();

    let push_row = |rec: &mut TrajectoryRecord, t: f64, rho: &DensityMatrix, dq: Vec<f64>| {
        rec.times.push(t);
        rec.dq.push(dq);
        rec.quadratures.push(stepper.quads.iter().map(|x| rho.expectation(x)).collect());
        rec.observables.push(probes.iter().map(|p| rho.evaluate(p)).collect());
        rec.norm_drift.push(0.0);
    };
    push_row(&mut rec, 0.0, &rho, vec![0.0; m]);
    trace_drift.push(0.0);
    for &(s, t) in &snaps {
        if s == 0 {
            snapshots.push((t, rho.clone()));
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
        let (dq, tr) = stepper.step(&mut rho, cfg.dt, &dw);
        drift_max = drift_max.max((tr - 1.0).abs());
        for (a, q) in acc.iter_mut().zip(&dq) {
            *a += q;
        }
        let t = n as f64 * cfg.dt;
        if !tr.is_finite() || tr <= 0.0 {
            return Err(Error::NumericalAbort {
                time: t,
                reason: format!("conditional trace became {tr}"),
            });
        }
        if n % CHECK_EVERY == 0 || n == steps {
            check_invariants(&rho, t)?;
        }
        if n % cfg.record_stride == 0 || n == steps {
            push_row(&mut rec, t, &rho, std::mem::replace(&mut acc, vec![0.0; m]));
            rec.norm_drift.pop();
            rec.norm_drift.push(drift_max);
            trace_drift.push(drift_max);
            drift_max = 0.0;
        }
        for &(s, ts) in &snaps {
            if s == n {
                snapshots.push((ts, rho.clone()));
            }
        }
    }
    Ok(SmeRecord {
        record: rec,
        trace_drift,
        final_state: rho,
        snapshots,
    })
}

/// `count` SME trajectories on streams `0..count`, run in parallel.
pub fn sme_ensemble(
    rho0: &DensityMatrix,
    h: &OperatorMatrix,
    channels: &[MeasurementChannel],
    cfg: &SseConfig,
    probes: &[Probe],
    count: usize,
) -> Result<Vec<SmeRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| evolve_sme(rho0, h, channels, cfg, probes, i))
        .collect()
}

/// Average of pure-state projectors.
pub fn ensemble_average(states: &[StateVector]) -> DensityMatrix {
    DensityMatrix::mixture(states)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sigma_x, sigma_z};
    use crate::sse::simulate_trajectory;

    fn sigma_minus() -> OperatorMatrix {
        OperatorMatrix::from_triplets(2, [(0, 1, C64::new(1.0, 0.0))])
    }

    #[test]
    fn purity_values() {
        let psi = StateVector::basis_state(10, 3);
        assert!((DensityMatrix::from_pure(&psi).purity() - 1.0).abs() < 1e-15);
        assert!((DensityMatrix::maximally_mixed(10).purity() - 0.1).abs() < 1e-15);
        let mix = DensityMatrix::mixture(&[StateVector::basis_state(10, 0), StateVector::basis_state(10, 7)]);
        assert!((mix.purity() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn analytic_decay() {
        // |0> is ground, |1> excited; sigma_- = |0><1|
        let gamma = 1.0;
        let ch = MeasurementChannel::new(sigma_minus(), gamma, 0.0, false, "decay").unwrap();
        let rho0 = DensityMatrix::from_pure(&StateVector::basis_state(2, 1));
        let s = evolve_master(&rho0, &OperatorMatrix::zeros(2), &[ch], 1e-3 / gamma, 1.0 / gamma, 1000).unwrap();
        let p1 = s.last().matrix()[(1, 1)].re;
        assert!((p1 - (-1.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn rhs_is_traceless() {
        let h = &sigma_x() + &sigma_z().scale_re(0.3);
        let ch = [
            MeasurementChannel::new(sigma_minus(), 0.7, 0.0, true, "a").unwrap(),
            MeasurementChannel::new(sigma_z(), 0.2, 0.0, false, "b").unwrap(),
        ];
        let mut rng = trajectory_rng(5, 0);
        for _ in 0..5 {
            let rho = DensityMatrix::mixture(&[
                StateVector::haar_random(2, &mut rng),
                StateVector::haar_random(2, &mut rng),
            ]);
            let d = lindblad_rhs(&rho, &h, &ch).unwrap();
            assert!(d.trace().norm() < 1e-14);
        }
    }

    #[test]
    fn trace_survives_long_runs() {
        let h = &sigma_x() + &sigma_z().scale_re(0.3);
        let ch = [MeasurementChannel::new(sigma_minus(), 0.5, 0.0, false, "a").unwrap()];
        let rho0 = DensityMatrix::from_pure(&StateVector::basis_state(2, 0));
        let s = evolve_master(&rho0, &h, &ch, 1e-3, 100.0, 100_000).unwrap();
        assert!((s.last().trace().re - 1.0).abs() < TRACE_TOL);
        assert!(s.max_trace_error < TRACE_TOL);
    }

    #[test]
    fn unstable_step_aborts() {
        let h = sigma_x();
        let ch = [MeasurementChannel::new(sigma_z(), 50.0, 0.0, false, "z").unwrap()];
        let rho0 = DensityMatrix::from_pure(&StateVector::basis_state(2, 0));
        let err = evolve_master(&rho0, &h, &ch, 0.5, 200.0, 10).unwrap_err();
        assert!(matches!(err, Error::NumericalAbort { .. }), "{err}");
    }

    #[test]
    fn pure_sme_is_the_sse() {
        let h = sigma_x().scale_re(0.8);
        let ch = [MeasurementChannel::new(sigma_z(), 1.0, 0.0, true, "z").unwrap()];
        let psi0 = StateVector::normalized(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let cfg = SseConfig::new(1e-3, 3.0, 17).with_stride(100);
        let probes = [Probe::expectation("z", sigma_z()), Probe::purity()];
        let sse = simulate_trajectory(&h, &ch, &psi0, &cfg, &probes[..1], 0).unwrap();
        let sme = evolve_sme(&DensityMatrix::from_pure(&psi0), &h, &ch, &cfg, &probes, 0).unwrap();
        for (a, b) in sse.observables.iter().zip(&sme.record.observables) {
            assert!((a[0] - b[0]).abs() < 1e-8);
            assert!(b[1] > 1.0 - 1e-6);
        }
        for (a, b) in sse.dq.iter().zip(&sme.record.dq) {
            assert!((a[0] - b[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn sme_stays_physical_with_unmonitored_loss() {
        let h = sigma_x();
        let ch = [
            MeasurementChannel::new(sigma_z(), 1.0, 0.0, true, "z").unwrap(),
            MeasurementChannel::new(sigma_minus(), 0.5, 0.0, false, "loss").unwrap(),
        ];
        let cfg = SseConfig::new(1e-3, 5.0, 2).with_stride(500);
        let rho0 = DensityMatrix::from_pure(&StateVector::basis_state(2, 1));
        let r = evolve_sme(&rho0, &h, &ch, &cfg, &[Probe::purity()], 0).unwrap();
        r.final_state.validate().unwrap();
        assert!(r.record.observables.iter().all(|row| row[0] <= 1.0 + 1e-12));
        assert!(r.record.observables.last().unwrap()[0] < 1.0 - 1e-3);
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::from_pure(&StateVector::basis_state(2, 0));
        let b = DensityMatrix::from_pure(&StateVector::basis_state(2, 1));
        assert!((a.trace_distance(&b) - 1.0).abs() < 1e-14);
        assert!(a.trace_distance(&a) < 1e-14);
    }
}
