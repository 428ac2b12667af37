//! Pure states on a Fock basis.

use std::collections::HashMap;

use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockBasis;
use crate::operator::OperatorMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    amplitudes: Vec<C64>,
}

impl StateVector {
    /// Wraps raw amplitudes without normalizing.
    pub fn from_amplitudes(amplitudes: Vec<C64>) -> Self {
        StateVector { amplitudes }
    }

    /// Normalizes; fails on the zero vector.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let mut s = StateVector { amplitudes };
        let n = s.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::param("amplitudes", "state has zero or non-finite norm"));
        }
        s.scale(1.0 / n);
        Ok(s)
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![C64::new(0.0, 0.0); dim];
        amplitudes[index] = C64::new(1.0, 0.0);
        StateVector { amplitudes }
    }

    /// Haar-distributed random pure state.
    pub fn haar_random<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        loop {
            let amplitudes: Vec<C64> = (0..dim)
                .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            if let Ok(s) = Self::normalized(amplitudes) {
                return s;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.amplitudes {
            *a *= s;
        }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2` for normalized states.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// `<O>` assuming the state is normalized.
    pub fn expectation(&self, op: &OperatorMatrix) -> C64 {
        op.sandwich(&self.amplitudes)
    }

    /// `<O^2> - <O>^2` for a Hermitian `O`.
    pub fn variance(&self, op: &OperatorMatrix) -> f64 {
        let v = op.mul_vec(&self.amplitudes);
        let second: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        let first = self.expectation(op).re;
        (second - first * first).max(0.0)
    }

    /// `|| O psi ||`.
    pub fn residual_norm(&self, op: &OperatorMatrix) -> f64 {
        op.mul_vec(&self.amplitudes)
            .iter()
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }
}

/// Expands `prod_m (sum_k u_{m,k} a_k^dagger)^{n_m} |0>` on `basis`.
///
/// Each mode vector `u_m` has one amplitude per site (site 1 first). The
/// total power must equal the basis particle number. The result is not
/// normalized.
pub fn creation_product(basis: &FockBasis, factors: &[(&[C64], usize)]) -> Result<Vec<C64>> {
    let total: usize = factors.iter().map(|(_, n)| n).sum();
    if total != basis.particles() {
        return Err(Error::DimensionMismatch {
            expected: basis.particles(),
            found: total,
        });
    }
    let sites = basis.sites();
    let mut current: HashMap<Vec<u32>, C64> = HashMap::new();
    current.insert(vec![0; sites], C64::new(1.0, 0.0));
    for (mode, power) in factors {
        if mode.len() != sites {
            return Err(Error::DimensionMismatch {
                expected: sites,
                found: mode.len(),
            });
        }
        for _ in 0..*power {
            let mut next: HashMap<Vec<u32>, C64> = HashMap::with_capacity(current.len() * sites);
            for (occ, amp) in &current {
                for (k, u) in mode.iter().enumerate() {
                    if *u == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut raised = occ.clone();
                    raised[k] += 1;
                    let factor = (raised[k] as f64).sqrt();
                    *next.entry(raised).or_insert(C64::new(0.0, 0.0)) += amp * u * factor;
                }
            }
            current = next;
        }
    }
    let mut out = vec![C64::new(0.0, 0.0); basis.dim()];
    for (occ, amp) in current {
        let i = basis
            .index_of(&occ)
            .expect("creation product leaves the particle-number sector");
        out[i] = amp;
    }
    Ok(out)
}
