//! Number-conserving bosonic Fock space and second-quantized building blocks.
//!
//! Site labels in the public API are 1-based; occupation vectors and matrix
//! indices are 0-based.

use std::collections::HashMap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
pub use crate::operator::OperatorMatrix;

pub const DEFAULT_DIM_CAP: usize = 100_000;

/// Enumerated `N`-boson basis on `L` sites, ordered lexicographically
/// descending in the occupation vector: `|N,0,..>` comes first, `|..,0,N>`
/// last.
#[derive(Debug, Clone)]
pub struct FockBasis {
    sites: usize,
    particles: usize,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

/// `C(n, k)` in `u128`, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

pub fn build_basis(sites: usize, particles: usize) -> Result<FockBasis> {
    build_basis_with_cap(sites, particles, DEFAULT_DIM_CAP)
}

pub fn build_basis_with_cap(sites: usize, particles: usize, cap: usize) -> Result<FockBasis> {
    if sites == 0 {
        return Err(Error::param("sites", "need at least one site"));
    }
    let dim = binomial((particles + sites - 1) as u64, particles as u64).unwrap_or(u128::MAX);
    if dim > cap as u128 {
        return Err(Error::DimensionTooLarge { dim, cap });
    }

    let mut states = Vec::with_capacity(dim as usize);
    let mut current = vec![0u32; sites];
    fill(&mut current, 0, particles as u32, &mut states);
    debug_assert_eq!(states.len() as u128, dim);

    let index = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();
    Ok(FockBasis {
        sites,
        particles,
        states,
        index,
    })
}

fn fill(current: &mut Vec<u32>, site: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if site + 1 == current.len() {
        current[site] = remaining;
        out.push(current.clone());
        return;
    }
    for n in (0..=remaining).rev() {
        current[site] = n;
        fill(current, site + 1, remaining - n, out);
    }
}

impl FockBasis {
    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn state(&self, i: usize) -> &[u32] {
        &self.states[i]
    }

    pub fn index_of(&self, occupations: &[u32]) -> Option<usize> {
        self.index.get(occupations).copied()
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<usize> {
        if site == 0 || site > self.sites {
            return Err(Error::SiteOutOfRange {
                site,
                sites: self.sites,
            });
        }
        Ok(site - 1)
    }
}

/// `a_j^dagger a_k` for 1-based sites `j`, `k`.
pub fn hop_operator(basis: &FockBasis, j: usize, k: usize) -> Result<OperatorMatrix> {
    let (j0, k0) = (basis.check_site(j)?, basis.check_site(k)?);
    if j0 == k0 {
        return number_operator(basis, j);
    }
    let mut triplets = Vec::new();
    let mut target = vec![0u32; basis.sites];
    for (col, state) in basis.states.iter().enumerate() {
        let nk = state[k0];
        if nk == 0 {
            continue;
        }
        let nj = state[j0];
        target.copy_from_slice(state);
        target[k0] -= 1;
        target[j0] += 1;
        let row = basis.index[&target];
        let amp = ((nj as f64 + 1.0) * nk as f64).sqrt();
        triplets.push((row, col, C64::new(amp, 0.0)));
    }
    Ok(OperatorMatrix::from_triplets(basis.dim(), triplets))
}

/// `n_j` for a 1-based site.
pub fn number_operator(basis: &FockBasis, j: usize) -> Result<OperatorMatrix> {
    let j0 = basis.check_site(j)?;
    let diag: Vec<f64> = basis.states.iter().map(|s| s[j0] as f64).collect();
    Ok(OperatorMatrix::diagonal(&diag))
}
