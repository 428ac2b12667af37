//! Complex operators on a fixed-particle-number Fock space.
//!
//! Every operator built by this crate is sparse in the occupation basis, so
//! storage is compressed sparse rows. Dense algorithms (diagonalization, the
//! master equation) convert once with [`OperatorMatrix::to_dense`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Hermiticity threshold for the metadata flag.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    hermitian: bool,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl OperatorMatrix {
    /// Assemble from `(row, col, value)` triplets. Duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); dim];
        for (i, j, v) in triplets {
            assert!(i < dim && j < dim, "triplet ({i}, {j}) outside dim {dim}");
            *rows[i].entry(j).or_insert(C64::new(0.0, 0.0)) += v;
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, v) in row {
                if v != C64::new(0.0, 0.0) {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        let mut op = OperatorMatrix {
            dim,
            hermitian: false,
            row_ptr,
            cols,
            vals,
        };
        op.hermitian = op.hermiticity_defect() < HERMITIAN_TOL;
        op
    }

    pub fn zeros(dim: usize) -> Self {
        Self::from_triplets(dim, std::iter::empty())
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_triplets(
            values.len(),
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, i, C64::new(v, 0.0))),
        )
    }

    /// Drops entries with modulus at or below `tol`.
    pub fn from_dense(m: &DMatrix<C64>, tol: f64) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        let dim = m.nrows();
        let triplets = (0..dim)
            .flat_map(|i| (0..dim).map(move |j| (i, j)))
            .filter_map(|(i, j)| {
                let v = m[(i, j)];
                (v.norm() > tol).then_some((i, j, v))
            });
        Self::from_triplets(dim, triplets)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let row = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[row.clone()].binary_search(&j) {
            Ok(k) => self.vals[row.start + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Iterates over stored `(row, col, value)` entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    /// `out = A x`.
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(out.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o = acc;
        }
    }

    /// `out += alpha * A x`.
    pub fn apply_add(&self, alpha: C64, x: &[C64], out: &mut [C64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            *o += alpha * acc;
        }
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.dim];
        self.apply(x, &mut out);
        out
    }

    /// `<x| A |x>` without normalization.
    pub fn sandwich(&self, x: &[C64]) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (i, xi) in x.iter().enumerate() {
            let mut row = C64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += xi.conj() * row;
        }
        acc
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(i, j, v)| (j, i, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::from_triplets(self.dim, self.entries().map(|(i, j, v)| (i, j, v * s)))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// `A B - B A`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.vals.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |A - A^dagger|` entrywise.
    pub fn hermiticity_defect(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i).conj()).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, j, v) in self.entries() {
            m[(i, j)] = v;
        }
        m
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim,
            });
        }
        Ok(())
    }

    /// Fails unless the Hermitian flag is set.
    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            Ok(())
        } else {
            Err(Error::NotHermitian {
                defect: self.hermiticity_defect(),
            })
        }
    }
}

impl fmt::Debug for OperatorMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorMatrix")
            .field("dim", &self.dim)
            .field("nnz", &self.nnz())
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in operator sum");
        OperatorMatrix::from_triplets(self.dim, self.entries().chain(rhs.entries()))
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in operator difference");
        OperatorMatrix::from_triplets(
            self.dim,
            self.entries()
                .chain(rhs.entries().map(|(i, j, v)| (i, j, -v))),
        )
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn neg(self) -> OperatorMatrix {
        self.scale_re(-1.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in operator product");
        let mut triplets = Vec::new();
        for i in 0..self.dim {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let mid = self.cols[k];
                let a = self.vals[k];
                for l in rhs.row_ptr[mid]..rhs.row_ptr[mid + 1] {
                    triplets.push((i, rhs.cols[l], a * rhs.vals[l]));
                }
            }
        }
        OperatorMatrix::from_triplets(self.dim, triplets)
    }
}

impl Mul<C64> for &OperatorMatrix {
    type Output = OperatorMatrix;

    fn mul(self, rhs: C64) -> OperatorMatrix {
        self.scale(rhs)
    }
}

impl std::iter::Sum for OperatorMatrix {
    /// Panics on an empty iterator; there is no dimension to fall back on.
    fn sum<I: Iterator<Item = OperatorMatrix>>(mut iter: I) -> Self {
        let first = iter.next().expect("sum of an empty operator list");
        iter.fold(first, |acc, op| &acc + &op)
    }
}
