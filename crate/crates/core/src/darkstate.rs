//! Degenerate manifolds of the kinetic Hamiltonian and the dark states of a
//! single-link asymmetric measurement.
//!
//! A state is dark for link `(j, j+1)` when `a_{j+1}` annihilates it. Within a
//! degenerate momentum pair `(alpha1, alpha2)` exactly one combination
//! vanishes on site `j+1`, so each way of distributing the `N` particles over
//! the available pairs gives one dark eigenstate.

use std::f64::consts::TAU;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{build_basis, hop_operator, FockBasis};
use crate::model::{mode_energy, momentum_mode, momentum_spectrum, wrap_angle, ModelParams, DEGENERACY_TOL};
use crate::operator::OperatorMatrix;
use crate::state::{creation_product, StateVector};

/// Largest annihilation residual accepted for a constructed dark state.
pub const DARK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Manifold {
    pub energy: f64,
    pub vectors: Vec<StateVector>,
}

impl Manifold {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// Eigenvalues of `h` grouped within `tol`, each with an orthonormal basis,
/// ordered by energy.
pub fn degenerate_manifolds(h: &OperatorMatrix, tol: f64) -> Result<Vec<Manifold>> {
    h.require_hermitian()?;
    let eig = h.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..h.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut out: Vec<Manifold> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for i in order {
        let e = eig.eigenvalues[i];
        let v = StateVector::from_amplitudes(eig.eigenvectors.column(i).iter().copied().collect());
        if e - last <= tol && !out.is_empty() {
            let m = out.last_mut().unwrap();
            let n = m.vectors.len() as f64;
            m.energy = (m.energy * n + e) / (n + 1.0);
            m.vectors.push(v);
        } else {
            out.push(Manifold {
                energy: e,
                vectors: vec![v],
            });
        }
        last = e;
    }
    Ok(out)
}

/// One degenerate pair raised to `power` in the product form
/// `sum_x c_x (A_{alpha1}^dagger)^x (A_{alpha2}^dagger)^{power - x}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkFactor {
    pub alpha1: i64,
    pub alpha2: i64,
    pub power: usize,
    /// `c_x` for `x = 0..=power`, with `c_0 = 1`.
    pub coefficients: Vec<C64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarkStateSpec {
    pub sites: usize,
    pub particles: usize,
    pub theta: f64,
    /// Measured link `j`, joining sites `j` and `j + 1`.
    pub link: usize,
    /// Position in the census at this `(theta, link)`.
    pub k: usize,
    /// Kinetic energy in units of `J`.
    pub energy: f64,
    pub factors: Vec<DarkFactor>,
}

impl DarkStateSpec {
    /// The pair labels when the state uses a single degenerate pair.
    pub fn alphas(&self) -> Option<(i64, i64)> {
        match self.factors.as_slice() {
            [f] => Some((f.alpha1, f.alpha2)),
            _ => None,
        }
    }
}

fn empty_site(sites: usize, link: usize) -> Result<usize> {
    if link == 0 || link > sites {
        return Err(Error::InvalidLink {
            from: link,
            to: link % sites.max(1) + 1,
            sites,
            boundary: "ring",
        });
    }
    Ok(link % sites + 1)
}

/// `c_x / c_0 = (-1)^x C(n, x) e^{2 pi i x (alpha1 - alpha2) s / L}` with
/// `s = j + 1` the site left empty.
pub fn dark_coefficients(
    sites: usize,
    theta: f64,
    alpha1: i64,
    alpha2: i64,
    link: usize,
    power: usize,
) -> Result<Vec<C64>> {
    let s = empty_site(sites, link)?;
    let theta = wrap_angle(theta);
    let gap = mode_energy(1.0, theta, sites, alpha1) - mode_energy(1.0, theta, sites, alpha2);
    let same = (alpha1 - alpha2).rem_euclid(sites as i64) == 0;
    if gap.abs() > DEGENERACY_TOL || same {
        return Err(Error::NotDegenerate { alpha1, alpha2, theta });
    }
    let phase = TAU * ((alpha1 - alpha2) * s as i64) as f64 / sites as f64;
    let mut out = Vec::with_capacity(power + 1);
    let mut binom = 1.0;
    for x in 0..=power {
        let sign = if x % 2 == 0 { 1.0 } else { -1.0 };
        out.push(C64::from_polar(sign * binom, phase * x as f64));
        binom = binom * (power - x) as f64 / (x + 1) as f64;
    }
    Ok(out)
}

/// Assembles the state from the coefficient expansion of every factor and
/// certifies `||a_j^dagger a_{j+1} psi|| < 1e-10`.
pub fn build_dark_state(basis: &FockBasis, spec: &DarkStateSpec) -> Result<StateVector> {
    if basis.sites() != spec.sites || basis.particles() != spec.particles {
        return Err(Error::DimensionMismatch {
            expected: spec.sites,
            found: basis.sites(),
        });
    }
    let modes: Vec<(Vec<C64>, Vec<C64>)> = spec
        .factors
        .iter()
        .map(|f| (momentum_mode(spec.sites, f.alpha1), momentum_mode(spec.sites, f.alpha2)))
        .collect();

    let mut total = vec![C64::new(0.0, 0.0); basis.dim()];
    let mut xs = vec![0usize; spec.factors.len()];
    loop {
        let weight: C64 = spec
            .factors
            .iter()
            .zip(&xs)
            .map(|(f, &x)| f.coefficients[x])
            .product();
        if weight != C64::new(0.0, 0.0) {
            let mut parts: Vec<(&[C64], usize)> = Vec::new();
            for ((f, &x), (m1, m2)) in spec.factors.iter().zip(&xs).zip(&modes) {
                parts.push((m1.as_slice(), x));
                parts.push((m2.as_slice(), f.power - x));
            }
            let term = creation_product(basis, &parts)?;
            for (t, v) in total.iter_mut().zip(term) {
                *t += weight * v;
            }
        }
        // odometer over x_f in 0..=power_f
        let mut f = 0;
        loop {
            if f == xs.len() {
                let psi = StateVector::normalized(total)?;
                let s = empty_site(spec.sites, spec.link)?;
                let residual = psi.residual_norm(&hop_operator(basis, spec.link, s)?);
                if residual > DARK_TOL {
                    return Err(Error::DarkResidual { residual });
                }
                return Ok(psi);
            }
            if xs[f] < spec.factors[f].power {
                xs[f] += 1;
                break;
            }
            xs[f] = 0;
            f += 1;
        }
    }
}

/// Every dark state of link `link` at flux `theta`, one per distribution of
/// the particles over the degenerate pairs. Empty away from degeneracies.
pub fn dark_census(sites: usize, particles: usize, theta: f64, link: usize) -> Result<Vec<DarkStateSpec>> {
    let p = ModelParams::ring(sites, particles, 1.0, theta, 0.0);
    p.validate()?;
    empty_site(sites, link)?;
    let spectrum = momentum_spectrum(&p)?;
    let pairs: Vec<(i64, i64, f64)> = spectrum
        .degenerate_groups
        .iter()
        .filter(|g| g.len() == 2)
        .map(|g| (g[0], g[1], spectrum.energy(g[0]).unwrap()))
        .collect();
    if pairs.is_empty() {
        return Ok(Vec::new());
    }
    // occupations of the pairs, ordered like a Fock basis: (N,0,..) first
    let splits = build_basis(pairs.len(), particles)?;
    let mut out = Vec::new();
    for (k, occ) in splits.states().iter().enumerate() {
        let mut factors = Vec::new();
        let mut energy = 0.0;
        for (&(a1, a2, e), &n) in pairs.iter().zip(occ) {
            if n == 0 {
                continue;
            }
            energy += e * n as f64;
            factors.push(DarkFactor {
                alpha1: a1,
                alpha2: a2,
                power: n as usize,
                coefficients: dark_coefficients(sites, p.theta, a1, a2, link, n as usize)?,
            });
        }
        out.push(DarkStateSpec {
            sites,
            particles,
            theta: p.theta,
            link,
            k,
            energy,
            factors,
        });
    }
    Ok(out)
}

/// Serializable dark state with its Fock amplitudes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DarkStateExport {
    pub spec: DarkStateSpec,
    pub occupations: Vec<Vec<u32>>,
    /// `[re, im]` per basis state.
    pub amplitudes: Vec<[f64; 2]>,
}

pub fn export_dark_state(basis: &FockBasis, spec: &DarkStateSpec) -> Result<DarkStateExport> {
    let psi = build_dark_state(basis, spec)?;
    Ok(DarkStateExport {
        spec: spec.clone(),
        occupations: basis.states().to_vec(),
        amplitudes: psi.amplitudes().iter().map(|z| [z.re, z.im]).collect(),
    })
}
