use std::f64::consts::PI;

use atomcurrent::darkstate::{build_dark_state, dark_census};
use atomcurrent::fock::build_basis;
use atomcurrent::master::{evolve_master, sme_ensemble, DensityMatrix};
use atomcurrent::measure::{asym_channel, spontaneous_channels, CqedParams, SpontaneousRates};
use atomcurrent::model::{build_hamiltonian, degeneracy_points, kinetic_hamiltonian, ModelParams};
use atomcurrent::oracle::{born_weights, dense_eig, group_levels, jacobi_eigh, kernel_on_subspace, me_fixed_point, purity};
use atomcurrent::sse::{trajectory_rng, SseConfig};
use atomcurrent::StateVector;
use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::Rng;

const ORACLE_SRC: &str = include_str!("../src/oracle.rs");

#[test]
fn oracle_does_not_reach_into_checked_modules() {
    for forbidden in ["crate::darkstate", "crate::master", "crate::sse", "symmetric_eigen", ".svd("] {
        let hit = ORACLE_SRC
            .lines()
            .filter(|l| !l.trim_start().starts_with("//"))
            .any(|l| l.contains(forbidden));
        assert!(!hit, "oracle.rs mentions {forbidden}");
    }
}

fn random_hermitian(n: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = trajectory_rng(seed, 0);
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()).unscale(2.0)
}

#[test]
fn jacobi_spectrum_matches_nalgebra() {
    for (n, seed) in [(1, 1), (2, 2), (7, 3), (20, 4), (35, 5)] {
        let a = random_hermitian(n, seed);
        let (vals, vecs) = jacobi_eigh(&a).unwrap();
        let mut reference: Vec<f64> = a.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (x, y) in vals.iter().zip(&reference) {
            assert!((x - y).abs() < 1e-10, "n={n}: {x} vs {y}");
        }
        let recon = &vecs * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, vals.iter().map(|v| C64::new(*v, 0.0)))) * vecs.adjoint();
        assert!((recon - &a).norm() < 1e-10);
    }
}

fn kernel_count(l: usize, n: usize, theta: f64, link: usize) -> usize {
    let basis = build_basis(l, n).unwrap();
    let p = ModelParams::ring(l, n, 1.0, theta, 0.0);
    let h = kinetic_hamiltonian(&basis, &p).unwrap();
    let jump = asym_channel(&basis, &p, &[link], 0.0, 1.0).unwrap();
    let cd = jump.jump.to_dense();
    let (vals, vecs) = dense_eig(&h).unwrap();
    group_levels(&vals, 1e-8)
        .iter()
        .map(|g| {
            let sub = DMatrix::from_fn(vecs.nrows(), g.len(), |r, k| vecs[(r, g[k])]);
            kernel_on_subspace(&cd, &sub).unwrap().ncols()
        })
        .sum()
}

#[test]
fn kernel_dimension_equals_census() {
    for (l, n) in [(3, 1), (3, 2), (3, 4), (4, 1), (4, 2), (4, 3), (5, 2)] {
        for point in degeneracy_points(l).unwrap() {
            for link in 1..=l {
                let census = dark_census(l, n, point.theta, link).unwrap();
                let kernel = kernel_count(l, n, point.theta, link);
                assert_eq!(census.len(), kernel, "L={l} N={n} theta={:.4} link={link}", point.theta);
            }
        }
    }
}

#[test]
fn no_dark_states_off_degeneracy() {
    for theta in [0.1, PI / 2.0 + 0.2, 1.0] {
        assert!(dark_census(3, 3, theta, 1).unwrap().is_empty());
        assert_eq!(kernel_count(3, 3, theta, 1), 0);
    }
}

#[test]
fn born_weights_match_projectors() {
    let basis = build_basis(3, 2).unwrap();
    let p = ModelParams::ring(3, 2, 1.0, 0.4, 0.0);
    let h = build_hamiltonian(&basis, &p).unwrap();
    let psi = StateVector::haar_random(basis.dim(), &mut trajectory_rng(11, 0));
    let weights = born_weights(&h, &psi, 1e-8).unwrap();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    assert!((total - 1.0).abs() < 1e-12);
    let mean: f64 = weights.iter().map(|(e, w)| e * w).sum();
    let direct = DensityMatrix::from_pure(&psi).expectation(&h);
    assert!((mean - direct).abs() < 1e-10);
}

#[test]
fn dark_fixed_point_is_the_census_state() {
    let theta = PI / 3.0;
    let basis = build_basis(3, 3).unwrap();
    let p = ModelParams::ring(3, 3, 1.0, theta, 0.0);
    let h = build_hamiltonian(&basis, &p).unwrap();
    let ch = asym_channel(&basis, &p, &[1], 0.0, 1.0).unwrap();
    let census = dark_census(3, 3, theta, 1).unwrap();
    assert_eq!(census.len(), 1);
    let dark = build_dark_state(&basis, &census[0]).unwrap();
    let rho = me_fixed_point(&h, &[ch]).unwrap();
    assert!(purity(&rho) > 1.0 - 1e-8, "purity {}", purity(&rho));
    let fid = DensityMatrix::from_matrix(rho).overlap(&dark);
    assert!(fid > 1.0 - 1e-8, "fidelity {fid}");
}

#[test]
fn sme_average_reproduces_master_equation() {
    let theta = PI;
    let basis = build_basis(3, 3).unwrap();
    let p = ModelParams::ring(3, 3, 1.0, theta, 0.0);
    let h = build_hamiltonian(&basis, &p).unwrap();
    let mut channels = vec![asym_channel(&basis, &p, &p.links(), 0.0, 1.0).unwrap()];
    let rates = SpontaneousRates {
        decay: Some(0.05),
        dephasing: Some(0.05),
    };
    channels.extend(spontaneous_channels(&basis, &p, &CqedParams::default(), &p.links(), rates).unwrap());
    let psi0 = StateVector::haar_random(basis.dim(), &mut trajectory_rng(5, 0));
    let rho0 = DensityMatrix::from_pure(&psi0);
    let t_final = 2.0;
    let count = 300;
    let cfg = SseConfig::new(1e-3, t_final, 77).with_stride(100);
    let records = sme_ensemble(&rho0, &h, &channels, &cfg, &[], count).unwrap();
    let d = basis.dim();
    let mut avg = DMatrix::<C64>::zeros(d, d);
    for r in &records {
        avg += r.final_state.matrix();
    }
    let avg = DensityMatrix::from_matrix(avg.unscale(count as f64));
    let me = evolve_master(&rho0, &h, &channels, 1e-3, t_final, 100).unwrap();
    let dist = avg.trace_distance(me.last());
    assert!(dist < 3.0 / (count as f64).sqrt(), "trace distance {dist}");
}

#[test]
fn identity_is_fixed_by_hermitian_channel() {
    let basis = build_basis(3, 2).unwrap();
    let p = ModelParams::ring(3, 2, 1.0, PI / 2.0, 0.0);
    let h = build_hamiltonian(&basis, &p).unwrap();
    let ch = atomcurrent::measure::sym_channel(&basis, &p, &[1], None, 1.0).unwrap();
    let rho = me_fixed_point(&h, &[ch]).unwrap();
    let d = basis.dim() as f64;
    assert!((purity(&rho) - 1.0 / d).abs() < 1e-8);
}
