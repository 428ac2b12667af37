//! Bose-Hubbard rings with a Peierls phase, their current operators, the
//! momentum-mode picture and the double-well two-level reduction.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{hop_operator, FockBasis};
use crate::operator::OperatorMatrix;
use crate::state::{creation_product, StateVector};

/// Relative tolerance (in units of `J`) for calling two levels degenerate.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Ring,
    Open,
}

impl Boundary {
    fn name(self) -> &'static str {
        match self {
            Boundary::Ring => "ring",
            Boundary::Open => "open",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sites: usize,
    pub particles: usize,
    /// Hopping amplitude `J`.
    pub hopping: f64,
    /// Peierls phase in `[0, 2pi)`.
    pub theta: f64,
    /// On-site interaction `U`.
    pub interaction: f64,
    pub boundary: Boundary,
}

/// Wraps an angle into `[0, 2pi)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

impl ModelParams {
    pub fn ring(sites: usize, particles: usize, hopping: f64, theta: f64, interaction: f64) -> Self {
        ModelParams {
            sites,
            particles,
            hopping,
            theta: wrap_angle(theta),
            interaction,
            boundary: Boundary::Ring,
        }
    }

    pub fn open(sites: usize, particles: usize, hopping: f64, theta: f64, interaction: f64) -> Self {
        ModelParams {
            boundary: Boundary::Open,
            ..Self::ring(sites, particles, hopping, theta, interaction)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::param("sites", "need at least one site"));
        }
        if !(self.hopping >= 0.0) || !self.hopping.is_finite() {
            return Err(Error::param("hopping", format!("J = {} must be finite and >= 0", self.hopping)));
        }
        if !(self.interaction >= 0.0) || !self.interaction.is_finite() {
            return Err(Error::param(
                "interaction",
                format!("U = {} must be finite and >= 0", self.interaction),
            ));
        }
        if !(0.0..TAU).contains(&self.theta) {
            return Err(Error::param("theta", format!("{} not in [0, 2pi)", self.theta)));
        }
        if self.boundary == Boundary::Ring && self.sites < 3 {
            return Err(Error::param("boundary", "a ring needs at least 3 sites"));
        }
        Ok(())
    }

    /// 1-based link labels; link `j` joins sites `j` and `j + 1` (mod `L` on a ring).
    pub fn links(&self) -> Vec<usize> {
        match self.boundary {
            Boundary::Ring => (1..=self.sites).collect(),
            Boundary::Open => (1..self.sites).collect(),
        }
    }

    /// Right-hand site of link `j`.
    pub fn link_target(&self, j: usize) -> Result<usize> {
        let valid = match self.boundary {
            Boundary::Ring => (1..=self.sites).contains(&j),
            Boundary::Open => (1..self.sites).contains(&j),
        };
        if !valid {
            return Err(Error::InvalidLink {
                from: j,
                to: j % self.sites.max(1) + 1,
                sites: self.sites,
                boundary: self.boundary.name(),
            });
        }
        Ok(j % self.sites + 1)
    }

    fn check_basis(&self, basis: &FockBasis) -> Result<()> {
        self.validate()?;
        if basis.sites() != self.sites {
            return Err(Error::DimensionMismatch {
                expected: self.sites,
                found: basis.sites(),
            });
        }
        if basis.particles() != self.particles {
            return Err(Error::DimensionMismatch {
                expected: self.particles,
                found: basis.particles(),
            });
        }
        Ok(())
    }
}

/// `H_J = -J sum_j (e^{i theta} a_j^dagger a_{j+1} + h.c.)`.
pub fn kinetic_hamiltonian(basis: &FockBasis, p: &ModelParams) -> Result<OperatorMatrix> {
    p.check_basis(basis)?;
    let phase = C64::from_polar(1.0, p.theta);
    let mut terms = Vec::new();
    for j in p.links() {
        let k = p.link_target(j)?;
        let forward = hop_operator(basis, j, k)?;
        let term = forward.scale(-p.hopping * phase);
        terms.push(&term + &term.adjoint());
    }
    Ok(terms
        .into_iter()
        .fold(OperatorMatrix::zeros(basis.dim()), |acc, t| &acc + &t))
}

/// `H_U = U sum_j n_j (n_j - 1)`.
pub fn interaction_hamiltonian(basis: &FockBasis, p: &ModelParams) -> Result<OperatorMatrix> {
    p.check_basis(basis)?;
    let diag: Vec<f64> = basis
        .states()
        .iter()
        .map(|s| {
            p.interaction
                * s.iter()
                    .map(|&n| n as f64 * (n as f64 - 1.0))
                    .sum::<f64>()
        })
        .collect();
    Ok(OperatorMatrix::diagonal(&diag))
}

pub fn build_hamiltonian(basis: &FockBasis, p: &ModelParams) -> Result<OperatorMatrix> {
    Ok(&kinetic_hamiltonian(basis, p)? + &interaction_hamiltonian(basis, p)?)
}

/// `J_{j,j+1} = -J (i e^{i theta} a_j^dagger a_{j+1} - i e^{-i theta} a_{j+1}^dagger a_j)`.
pub fn local_current(basis: &FockBasis, p: &ModelParams, j: usize) -> Result<OperatorMatrix> {
    p.check_basis(basis)?;
    let k = p.link_target(j)?;
    let forward = hop_operator(basis, j, k)?;
    let coeff = C64::new(0.0, 1.0) * C64::from_polar(1.0, p.theta) * (-p.hopping);
    let term = forward.scale(coeff);
    Ok(&term + &term.adjoint())
}

/// Sum of currents over the given links.
pub fn links_current(basis: &FockBasis, p: &ModelParams, links: &[usize]) -> Result<OperatorMatrix> {
    links
        .iter()
        .try_fold(OperatorMatrix::zeros(basis.dim()), |acc, &j| {
            Ok(&acc + &local_current(basis, p, j)?)
        })
}

pub fn total_current(basis: &FockBasis, p: &ModelParams) -> Result<OperatorMatrix> {
    links_current(basis, p, &p.links())
}

/// Momentum labels `0, +-1, ..` (plus `L/2` for even `L`), ascending.
pub fn momentum_labels(sites: usize) -> Vec<i64> {
    let l = sites as i64;
    let lo = -((l - 1) / 2);
    let hi = l / 2;
    (lo..=hi).collect()
}

/// Single-particle energy `-2J cos(theta - 2 pi alpha / L)`.
pub fn mode_energy(hopping: f64, theta: f64, sites: usize, alpha: i64) -> f64 {
    -2.0 * hopping * (theta - TAU * alpha as f64 / sites as f64).cos()
}

/// Site amplitudes of `A_alpha^dagger = L^{-1/2} sum_k e^{-2 pi i alpha k / L} a_k^dagger`.
pub fn momentum_mode(sites: usize, alpha: i64) -> Vec<C64> {
    let norm = 1.0 / (sites as f64).sqrt();
    (1..=sites)
        .map(|k| C64::from_polar(norm, -TAU * (alpha * k as i64) as f64 / sites as f64))
        .collect()
}

/// `prod_alpha (A_alpha^dagger)^{n_alpha} / sqrt(n_alpha!) |0>`, a joint
/// eigenstate of `H_J` and the total current on a ring.
pub fn momentum_fock_state(basis: &FockBasis, occupations: &[(i64, usize)]) -> Result<StateVector> {
    let modes: Vec<(Vec<C64>, usize)> = occupations
        .iter()
        .map(|&(alpha, n)| (momentum_mode(basis.sites(), alpha), n))
        .collect();
    let factors: Vec<(&[C64], usize)> = modes.iter().map(|(m, n)| (m.as_slice(), *n)).collect();
    StateVector::normalized(creation_product(basis, &factors)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumSpectrum {
    pub alphas: Vec<i64>,
    pub energies: Vec<f64>,
    /// Labels grouped by energy, ordered by increasing energy.
    pub degenerate_groups: Vec<Vec<i64>>,
}

impl MomentumSpectrum {
    pub fn energy(&self, alpha: i64) -> Option<f64> {
        self.alphas
            .iter()
            .position(|&a| a == alpha)
            .map(|i| self.energies[i])
    }

    /// Groups with more than one mode.
    pub fn degenerate_pairs(&self) -> impl Iterator<Item = &Vec<i64>> {
        self.degenerate_groups.iter().filter(|g| g.len() > 1)
    }
}

pub fn momentum_spectrum(p: &ModelParams) -> Result<MomentumSpectrum> {
    if p.boundary != Boundary::Ring {
        return Err(Error::param("boundary", "momentum modes need a ring"));
    }
    p.validate()?;
    let alphas = momentum_labels(p.sites);
    let energies: Vec<f64> = alphas
        .iter()
        .map(|&a| mode_energy(p.hopping, p.theta, p.sites, a))
        .collect();
    let tol = DEGENERACY_TOL * p.hopping.max(f64::MIN_POSITIVE);

    let mut order: Vec<usize> = (0..alphas.len()).collect();
    order.sort_by(|&a, &b| energies[a].total_cmp(&energies[b]));
    let mut groups: Vec<Vec<i64>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for i in order {
        if energies[i] - last <= tol && !groups.is_empty() {
            groups.last_mut().unwrap().push(alphas[i]);
        } else {
            groups.push(vec![alphas[i]]);
        }
        last = energies[i];
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    Ok(MomentumSpectrum {
        alphas,
        energies,
        degenerate_groups: groups,
    })
}

/// A flux value `theta = pi * numerator / L` at which mode pairs cross.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegeneracyPoint {
    pub theta: f64,
    pub numerator: i64,
    pub pairs: Vec<(i64, i64)>,
}

/// All `theta` in `[0, 2pi)` where two distinct momentum modes of an
/// `L`-site ring have equal single-particle energy.
pub fn degeneracy_points(sites: usize) -> Result<Vec<DegeneracyPoint>> {
    if sites < 3 {
        return Err(Error::param("sites", "degeneracy points need a ring of at least 3 sites"));
    }
    let l = sites as i64;
    let labels = momentum_labels(sites);
    let mut by_numerator: std::collections::BTreeMap<i64, Vec<(i64, i64)>> = Default::default();
    for (i, &a) in labels.iter().enumerate() {
        for &b in &labels[i + 1..] {
            // cos(theta - q_a) = cos(theta - q_b)  <=>  2 theta = q_a + q_b (mod 2 pi)
            let s = a + b;
            for r in [s, s + l] {
                by_numerator.entry(r.rem_euclid(2 * l)).or_default().push((a, b));
            }
        }
    }
    Ok(by_numerator
        .into_iter()
        .map(|(numerator, pairs)| DegeneracyPoint {
            theta: PI * numerator as f64 / l as f64,
            numerator,
            pairs,
        })
        .collect())
}

/// Phase-representation potential of `H_J` for three sites:
/// `-(2 J N / 3) [cos(phi12 + theta) + cos(phi23 + theta) + cos(phi31 + theta)]`
/// with `phi31 = -(phi12 + phi23)`.
pub fn tls_potential(theta: f64, phi12: f64, phi23: f64, hopping: f64, particles: f64) -> f64 {
    let phi31 = -(phi12 + phi23);
    -2.0 * hopping * particles / 3.0
        * ((phi12 + theta).cos() + (phi23 + theta).cos() + (phi31 + theta).cos())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsParams {
    /// Well offset `h`.
    pub h: f64,
    /// Tunnelling rate `omega`.
    pub omega: f64,
}

impl TlsParams {
    pub fn validate(&self) -> Result<()> {
        if !self.h.is_finite() || !self.omega.is_finite() {
            return Err(Error::param("tls", "h and omega must be finite"));
        }
        Ok(())
    }

    /// Rabi angular frequency `2 sqrt(h^2 + omega^2)`.
    pub fn rabi_frequency(&self) -> f64 {
        2.0 * self.h.hypot(self.omega)
    }
}

/// Homodyne phase for which the two-level jump quadrature is exactly
/// `sqrt(3) sigma_z`, with no identity component.
pub const TLS_QUAD_PHASE: f64 = -PI / 2.0;

#[derive(Debug, Clone)]
pub struct TlsOperators {
    pub hamiltonian: OperatorMatrix,
    /// `1/2 + i sqrt(3)/2 sigma_z`.
    pub jump: OperatorMatrix,
    /// `sigma_z`; the global current is `sqrt(3) J N sigma_z`.
    pub observable: OperatorMatrix,
}

pub fn sigma_x() -> OperatorMatrix {
    OperatorMatrix::from_triplets(2, [(0, 1, C64::new(1.0, 0.0)), (1, 0, C64::new(1.0, 0.0))])
}

pub fn sigma_z() -> OperatorMatrix {
    OperatorMatrix::diagonal(&[1.0, -1.0])
}

pub fn build_tls(p: &TlsParams) -> Result<TlsOperators> {
    p.validate()?;
    let hamiltonian = &sigma_z().scale_re(p.h) + &sigma_x().scale_re(p.omega);
    let s3 = 3f64.sqrt() / 2.0;
    let jump = OperatorMatrix::from_triplets(
        2,
        [(0, 0, C64::new(0.5, s3)), (1, 1, C64::new(0.5, -s3))],
    );
    Ok(TlsOperators {
        hamiltonian,
        jump,
        observable: sigma_z(),
    })
}
