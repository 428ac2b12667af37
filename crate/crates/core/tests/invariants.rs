use std::f64::consts::PI;

use atomcurrent::darkstate::{build_dark_state, dark_census};
use atomcurrent::fock::{build_basis, hop_operator, number_operator};
use atomcurrent::master::{evolve_master, lindblad_rhs, DensityMatrix};
use atomcurrent::measure::{asym_channel, sym_channel};
use atomcurrent::model::{
    build_hamiltonian, degeneracy_points, interaction_hamiltonian, kinetic_hamiltonian, links_current,
    momentum_spectrum, total_current, ModelParams,
};
use atomcurrent::oracle::{dense_eig, group_levels};
use atomcurrent::signal::integrate_window;
use atomcurrent::sse::{simulate_trajectory, trajectory_rng, Probe, SseConfig, SseStepper};
use atomcurrent::{OperatorMatrix, StateVector};
use proptest::prelude::*;

fn sector() -> impl Strategy<Value = (usize, usize)> {
    (2usize..=5, 1usize..=4)
}

fn params(l: usize, n: usize, hop: f64, theta: f64, u: f64) -> ModelParams {
    if l < 3 {
        ModelParams::open(l, n, hop, theta, u)
    } else {
        ModelParams::ring(l, n, hop, theta, u)
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hop_adjoint_is_reverse_hop((l, n) in sector(), j in 1usize..=5, k in 1usize..=5) {
        prop_assume!(j <= l && k <= l && j != k);
        let b = build_basis(l, n).unwrap();
        let d = &hop_operator(&b, j, k).unwrap().adjoint() - &hop_operator(&b, k, j).unwrap();
        prop_assert!(d.max_abs() <= 1e-14);
    }

    #[test]
    fn hop_number_commutator((l, n) in sector(), j in 1usize..=5, k in 1usize..=5) {
        prop_assume!(j <= l && k <= l && j != k);
        let b = build_basis(l, n).unwrap();
        let hop = hop_operator(&b, j, k).unwrap();
        let comm = hop.commutator(&number_operator(&b, j).unwrap());
        prop_assert!((&comm + &hop).max_abs() <= 1e-12);
    }

    #[test]
    fn operators_conserve_particle_number((l, n) in sector(), theta in -PI..PI, u in 0.0f64..3.0) {
        let b = build_basis(l, n).unwrap();
        let total: OperatorMatrix = (1..=l).map(|s| number_operator(&b, s).unwrap()).sum();
        let expect = OperatorMatrix::identity(b.dim()).scale_re(n as f64);
        prop_assert!((&total - &expect).max_abs() <= 1e-14);
        let p = params(l, n, 1.0, theta, u);
        prop_assert!(build_hamiltonian(&b, &p).unwrap().commutator(&total).max_abs() <= 1e-12);
    }

    #[test]
    fn hamiltonian_is_hermitian((l, n) in sector(), theta in -PI..PI, u in 0.0f64..5.0, hop in 0.1f64..2.0) {
        let b = build_basis(l, n).unwrap();
        let h = build_hamiltonian(&b, &params(l, n, hop, theta, u)).unwrap();
        prop_assert!(h.hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn total_current_commutes_with_kinetic(l in 3usize..=5, n in 1usize..=3, theta in -PI..PI) {
        let b = build_basis(l, n).unwrap();
        let p = ModelParams::ring(l, n, 1.0, theta, 0.0);
        let hj = kinetic_hamiltonian(&b, &p).unwrap();
        prop_assert!(total_current(&b, &p).unwrap().commutator(&hj).max_abs() <= 1e-12);
    }

    #[test]
    fn interaction_does_not_commute_with_kinetic(l in 3usize..=5, n in 2usize..=3, theta in -PI..PI, u in 0.1f64..3.0) {
        let b = build_basis(l, n).unwrap();
        let p = ModelParams::ring(l, n, 1.0, theta, u);
        let c = interaction_hamiltonian(&b, &p).unwrap().commutator(&kinetic_hamiltonian(&b, &p).unwrap());
        prop_assert!(c.frobenius_norm() > 1e-3);
    }

    #[test]
    fn momentum_spectrum_matches_single_particle(l in 3usize..=6, theta in -PI..PI) {
        let b = build_basis(l, 1).unwrap();
        let p = ModelParams::ring(l, 1, 1.0, theta, 0.0);
        let (vals, _) = dense_eig(&build_hamiltonian(&b, &p).unwrap()).unwrap();
        let mut e = momentum_spectrum(&p).unwrap().energies;
        e.sort_by(f64::total_cmp);
        for (a, x) in vals.iter().zip(&e) {
            prop_assert!((a - x).abs() <= 1e-10);
        }
    }

    #[test]
    fn quadratures_track_the_link_current(l in 3usize..=4, n in 1usize..=3, theta in -PI..PI, phi_g in -PI..PI, link in 1usize..=4) {
        prop_assume!(link <= l);
        let b = build_basis(l, n).unwrap();
        let p = ModelParams::ring(l, n, 1.0, theta, 0.0);
        let cur = links_current(&b, &p, &[link]).unwrap();
        let a = asym_channel(&b, &p, &[link], phi_g, 1.0).unwrap();
        let s = sym_channel(&b, &p, &[link], None, 1.0).unwrap();
        prop_assert_eq!(a.current_gain, 1.0);
        prop_assert_eq!(s.current_gain, -2.0);
        prop_assert!((&a.quadrature() - &cur).max_abs() <= 1e-12);
        prop_assert!((&s.quadrature() - &cur.scale_re(s.current_gain)).max_abs() <= 1e-12);
        prop_assert!((&a.jump - &s.jump).frobenius_norm() > 1e-3);
    }

    #[test]
    fn sse_renormalizes_and_is_deterministic(seed in any::<u64>(), stream in 0u64..64) {
        let b = build_basis(3, 2).unwrap();
        let p = ModelParams::ring(3, 2, 1.0, 0.7, 0.4);
        let h = build_hamiltonian(&b, &p).unwrap();
        let ch = [asym_channel(&b, &p, &[1], 0.0, 1.0).unwrap()];
        let psi = StateVector::haar_random(b.dim(), &mut trajectory_rng(seed, 1000 + stream));
        let cfg = SseConfig::new(1e-3, 0.2, seed);
        let r1 = simulate_trajectory(&h, &ch, &psi, &cfg, &[], stream).unwrap();
        let r2 = simulate_trajectory(&h, &ch, &psi, &cfg, &[], stream).unwrap();
        prop_assert_eq!(&r1.dq, &r2.dq);
        prop_assert!((r1.final_state.unwrap().norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_integral_is_linear(a in -3.0f64..3.0, bcoef in -3.0f64..3.0, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = trajectory_rng(seed, 0);
        let n = 400;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + bcoef * v).collect();
        let f = |v: &[f64]| integrate_window(&record(v, 0.01), 0, 0.5, 2.0).unwrap();
        prop_assert!((f(&mix) - (a * f(&x) + bcoef * f(&y))).abs() < 1e-10);
    }
}

fn record(dq: &[f64], dt: f64) -> atomcurrent::TrajectoryRecord {
    let b = build_basis(2, 1).unwrap();
    let ch = [atomcurrent::MeasurementChannel::new(OperatorMatrix::zeros(b.dim()), 0.0, 0.0, true, "x").unwrap()];
    let cfg = SseConfig::new(dt, dt * dq.len() as f64, 0);
    let mut rec = simulate_trajectory(&OperatorMatrix::zeros(b.dim()), &ch, &StateVector::basis_state(2, 0), &cfg, &[], 0)
        .unwrap();
    for (row, v) in rec.dq.iter_mut().skip(1).zip(dq) {
        row[0] = *v;
    }
    rec
}

#[test]
fn degenerate_set_has_n_plus_one_states() {
    for n in 1..=4 {
        let b = build_basis(3, n).unwrap();
        for pt in degeneracy_points(3).unwrap() {
            assert_eq!(pt.pairs.len(), 1);
            let p = ModelParams::ring(3, n, 1.0, pt.theta, 0.0);
            let (vals, _) = dense_eig(&kinetic_hamiltonian(&b, &p).unwrap()).unwrap();
            let largest = group_levels(&vals, 1e-8).iter().map(|g| g.len()).max().unwrap();
            assert_eq!(largest, n + 1, "N={n} theta={}", pt.theta);
        }
    }
}

fn qnd_setup() -> (OperatorMatrix, Vec<atomcurrent::MeasurementChannel>, OperatorMatrix) {
    let b = build_basis(3, 3).unwrap();
    let p = ModelParams::ring(3, 3, 1.0, PI / 3.0, 0.0);
    let h = build_hamiltonian(&b, &p).unwrap();
    let ch = vec![asym_channel(&b, &p, &p.links(), 0.0, 1.0).unwrap()];
    (h, ch, total_current(&b, &p).unwrap())
}

/// Largest `Var_c(J_tot)` after it first drops below `1e-6`, or `None`
/// when it never does.
fn excursion_after_collapse(stream: u64) -> Option<f64> {
    let (h, ch, jt) = qnd_setup();
    let psi = StateVector::haar_random(h.dim(), &mut trajectory_rng(17, 500 + stream));
    let cfg = SseConfig::new(1e-3, 40.0, 3).with_stride(10);
    let rec = simulate_trajectory(&h, &ch, &psi, &cfg, &[Probe::variance("v", jt)], stream).unwrap();
    let v = rec.probe_series("v").unwrap();
    let first = v.iter().position(|x| *x < 1e-6)?;
    Some(v[first..].iter().copied().fold(0.0, f64::max))
}

#[test]
#[ignore = "pathwise form is false: level weights are martingales, so a 1e-6 variance reaches 1e-5 with probability up to 0.1"]
fn qnd_freeze_pathwise() {
    for stream in 0..40 {
        assert!(excursion_after_collapse(stream).unwrap() <= 1e-5, "stream {stream}");
    }
}

#[test]
fn qnd_freeze_within_doob_bound() {
    let m = 40;
    let mut excursions = 0;
    for stream in 0..m {
        let mx = excursion_after_collapse(stream).expect("collapse by t = 40/gamma");
        if mx > 1e-5 {
            excursions += 1;
        }
    }
    // P(sup > 1e-5 | start 1e-6) <= 0.1; binomial mean + 3 sigma
    let bound = 0.1 * m as f64 + 3.0 * (m as f64 * 0.1 * 0.9).sqrt();
    assert!((excursions as f64) <= bound, "{excursions} excursions");
}

#[test]
fn qnd_eigenstate_is_frozen() {
    let (h, ch, jt) = qnd_setup();
    let b = build_basis(3, 3).unwrap();
    let psi = atomcurrent::model::momentum_fock_state(&b, &[(0, 2), (1, 1)]).unwrap();
    let cfg = SseConfig::new(1e-3, 20.0, 9).with_stride(100);
    let rec = simulate_trajectory(&h, &ch, &psi, &cfg, &[Probe::variance("v", jt)], 0).unwrap();
    assert!(rec.probe_series("v").unwrap().iter().all(|x| *x < 1e-12));
}

#[test]
fn sse_strong_order_on_short_ladder() {
    let b = build_basis(3, 3).unwrap();
    let p = ModelParams::ring(3, 3, 1.0, PI / 3.0, 0.0);
    let h = build_hamiltonian(&b, &p).unwrap();
    let ch = [asym_channel(&b, &p, &p.links(), 0.0, 1.0).unwrap()];
    let psi0 = StateVector::haar_random(b.dim(), &mut trajectory_rng(4, 0));
    let fine: f64 = 2.5e-4 / 8.0;
    let steps = (1.0 / fine) as usize;
    let factors = [8usize, 16, 32];
    let mut err2 = [0.0; 3];
    let paths = 100;
    for path in 0..paths {
        use rand::Rng;
        let mut rng = trajectory_rng(5, path);
        let dw: Vec<f64> = (0..steps)
            .map(|_| fine.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal))
            .collect();
        let mut st = SseStepper::new(&h, &ch).unwrap();
        let mut reference = psi0.clone();
        for w in &dw {
            st.step_with_increments(&mut reference, fine, &[*w], true);
        }
        for (k, &f) in factors.iter().enumerate() {
            let mut psi = psi0.clone();
            for c in dw.chunks(f) {
                st.step_with_increments(&mut psi, fine * f as f64, &[c.iter().sum()], true);
            }
            err2[k] += 1.0 - psi.fidelity(&reference);
        }
    }
    let e: Vec<f64> = err2.iter().map(|v| (v / paths as f64).sqrt()).collect();
    let slope = ((e[2] / e[0]).ln()) / 4f64.ln();
    assert!((slope - 0.5).abs() < 0.15, "errors {e:?} slope {slope}");
}

#[test]
fn dark_states_are_stationary_eigenstates() {
    let mut cases: Vec<(usize, usize, f64)> = Vec::new();
    for n in 1..=4 {
        for pt in degeneracy_points(3).unwrap() {
            cases.push((3, n, pt.theta));
        }
        cases.push((4, n, PI / 4.0));
        cases.push((4, n, PI / 2.0));
    }
    let mut seen = 0;
    for (l, n, theta) in cases {
        let b = build_basis(l, n).unwrap();
        let p = ModelParams::ring(l, n, 1.0, theta, 0.0);
        let h = build_hamiltonian(&b, &p).unwrap();
        for link in 1..=l {
            let ch = [asym_channel(&b, &p, &[link], 0.3, 1.0).unwrap()];
            for spec in dark_census(l, n, theta, link).unwrap() {
                let psi = build_dark_state(&b, &spec).unwrap();
                let e = psi.expectation(&h).re;
                let hv = h.mul_vec(psi.amplitudes());
                let res: f64 = hv
                    .iter()
                    .zip(psi.amplitudes())
                    .map(|(x, y)| (x - y * e).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                assert!(res < 1e-10);
                assert!((e - spec.energy).abs() < 1e-10);
                let rhs = lindblad_rhs(&DensityMatrix::from_pure(&psi), &h, &ch).unwrap();
                assert!(rhs.iter().all(|z| z.norm() < 1e-10), "L={l} N={n} link={link}");
                seen += 1;
            }
        }
    }
    assert!(seen > 40);
}

fn no_dark_purities(k: u64) -> (Vec<f64>, Vec<f64>) {
    let b = build_basis(3, 3).unwrap();
    let p = ModelParams::ring(3, 3, 1.0, PI / 2.0, 0.0);
    let h = build_hamiltonian(&b, &p).unwrap();
    let ch = [asym_channel(&b, &p, &[1], 0.0, 1.0).unwrap()];
    let psi = StateVector::haar_random(b.dim(), &mut trajectory_rng(41, k));
    let series = evolve_master(&DensityMatrix::from_pure(&psi), &h, &ch, 1e-3, 40.0, 100).unwrap();
    assert!(series.max_trace_error < 1e-8);
    (series.times.clone(), series.purities())
}

#[test]
#[ignore = "false here: the theta = pi/2 asymptote 0.235 is approached from below after t = 5/gamma"]
fn purity_monotone_without_dark_state() {
    for k in 0..3 {
        let (times, pur) = no_dark_purities(k);
        let start = times.iter().position(|t| *t > 5.0).unwrap();
        for w in pur[start..].windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }
}

#[test]
fn purity_relaxes_to_fixed_point_without_dark_state() {
    let b = build_basis(3, 3).unwrap();
    let p = ModelParams::ring(3, 3, 1.0, PI / 2.0, 0.0);
    let h = build_hamiltonian(&b, &p).unwrap();
    let ch = [asym_channel(&b, &p, &[1], 0.0, 1.0).unwrap()];
    let target = atomcurrent::oracle::purity(&atomcurrent::oracle::me_fixed_point(&h, &ch).unwrap());
    for k in 0..3 {
        let (_, pur) = no_dark_purities(k);
        assert!((pur.last().unwrap() - target).abs() < 1e-3);
    }
}
