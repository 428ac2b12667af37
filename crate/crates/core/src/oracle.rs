//! Brute-force references for tests.
//!
//! Nothing here calls the eigen-decomposition, master-equation or dark-state
//! code it is used to check: eigenproblems use a cyclic Jacobi sweep, kernels
//! a one-sided Jacobi SVD, and fixed points an explicit superoperator with its
//! own matrix exponential. Intended for dimensions up to a few hundred.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::measure::MeasurementChannel;
use crate::operator::OperatorMatrix;
use crate::state::StateVector;

type Dense = DMatrix<C64>;

/// Singular values below this count as zero.
pub const KERNEL_TOL: f64 = 1e-10;
/// Residual `||L rho||` accepted as stationary.
pub const FIXED_POINT_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
/// Eigenvalues ascend; eigenvectors are the matching columns.
pub fn jacobi_eigh(a: &Dense) -> Result<(Vec<f64>, Dense)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut defect: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    if defect > 1e-10 * scale {
        return Err(Error::NotHermitian { defect });
    }

    let mut m = a.clone();
    let mut v = Dense::identity(n, n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off < 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                let r = apq.norm();
                if r < 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let (app, aqq) = (m[(p, p)].re, m[(q, q)].re);
                let tau = (aqq - app) / (2.0 * r);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // G = diag(1, conj(phase)) * [[c, s], [-s, c]] on (p, q)
                let g_pp = C64::new(c, 0.0);
                let g_pq = C64::new(s, 0.0);
                let g_qp = phase.conj() * (-s);
                let g_qq = phase.conj() * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[(k, p)], m[(k, q)]);
                    m[(k, p)] = mkp * g_pp + mkq * g_qp;
                    m[(k, q)] = mkp * g_pq + mkq * g_qq;
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = vkp * g_pp + vkq * g_qp;
                    v[(k, q)] = vkp * g_pq + vkq * g_qq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[(p, k)], m[(q, k)]);
                    m[(p, k)] = g_pp.conj() * mpk + g_qp.conj() * mqk;
                    m[(q, k)] = g_pq.conj() * mpk + g_qq.conj() * mqk;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = Dense::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((values, vectors))
}

/// [`jacobi_eigh`] on an operator, with the residual `||H v - lambda v||`
/// checked below `1e-10` for every pair.
pub fn dense_eig(h: &OperatorMatrix) -> Result<(Vec<f64>, Dense)> {
    let a = h.to_dense();
    let (vals, vecs) = jacobi_eigh(&a)?;
    for (k, &lam) in vals.iter().enumerate() {
        let col = vecs.column(k);
        let r = (&a * col - col * C64::new(lam, 0.0)).norm();
        if r > 1e-10 {
            return Err(Error::NoConvergence {
                residual: r,
                iterations: 100,
            });
        }
    }
    Ok((vals, vecs))
}

/// Indices of ascending `values` grouped where consecutive gaps are `<= tol`.
pub fn group_levels(values: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - values[*g.last().unwrap()] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

/// Probability of each eigenvalue of Hermitian `op` in state `psi`.
pub fn born_weights(op: &OperatorMatrix, psi: &StateVector, tol: f64) -> Result<Vec<(f64, f64)>> {
    let (vals, vecs) = dense_eig(op)?;
    let x = DVector::from_column_slice(psi.amplitudes());
    let norm = x.norm_squared();
    Ok(group_levels(&vals, tol)
        .into_iter()
        .map(|g| {
            let mean = g.iter().map(|&i| vals[i]).sum::<f64>() / g.len() as f64;
            let w: f64 = g.iter().map(|&i| vecs.column(i).dotc(&x).norm_sqr()).sum();
            (mean, w / norm)
        })
        .collect())
}

/// One-sided Jacobi: rotates column pairs of `b` until mutually orthogonal,
/// applying the same rotations to `w`.
fn hestenes(b: &mut Dense, w: &mut Dense) {
    let m = b.ncols();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..m {
            for j in i + 1..m {
                let alpha = b.column(i).norm_squared();
                let beta = b.column(j).norm_squared();
                let gamma = b.column(i).dotc(&b.column(j));
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g < 1e-300 {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for mat in [&mut *b, &mut *w] {
                    for k in 0..mat.nrows() {
                        let bi = mat[(k, i)];
                        let bj = mat[(k, j)] * phase.conj();
                        mat[(k, i)] = bi * c - bj * s;
                        mat[(k, j)] = bi * s + bj * c;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
}

/// Kernel of `op` restricted to the span of the orthonormal columns of
/// `subspace`, via a one-sided Jacobi SVD of `op * subspace`. The result has
/// one column per zero singular value, expressed in the full space.
pub fn kernel_on_subspace(op: &Dense, subspace: &Dense) -> Result<Dense> {
    if op.ncols() != subspace.nrows() {
        return Err(Error::DimensionMismatch {
            expected: op.ncols(),
            found: subspace.nrows(),
        });
    }
    let m = subspace.ncols();
    let mut b = op * subspace;
    let mut w = Dense::identity(m, m);
    hestenes(&mut b, &mut w);
    let keep: Vec<usize> = (0..m).filter(|&k| b.column(k).norm() < KERNEL_TOL).collect();
    let coeffs = Dense::from_fn(m, keep.len(), |r, c| w[(r, keep[c])]);
    Ok(subspace * coeffs)
}

/// Singular values of `a`, unsorted.
pub fn singular_values(a: &Dense) -> Vec<f64> {
    let mut b = a.clone();
    let mut w = Dense::identity(a.ncols(), a.ncols());
    hestenes(&mut b, &mut w);
    (0..b.ncols()).map(|k| b.column(k).norm()).collect()
}

/// Column-stacked superoperator of the Lindblad generator:
/// `vec(A X B) = (B^T kron A) vec(X)`.
pub fn superoperator(h: &OperatorMatrix, channels: &[MeasurementChannel]) -> Dense {
    let d = h.dim();
    let hd = h.to_dense();
    let id = Dense::identity(d, d);
    let i = C64::new(0.0, 1.0);
    let mut l = (kron(&id, &hd) - kron(&hd.transpose(), &id)) * (-i);
    for ch in channels {
        if ch.gamma == 0.0 {
            continue;
        }
        let c = ch.jump.to_dense();
        let ctc = c.adjoint() * &c;
        let g = C64::new(ch.gamma, 0.0);
        l += (kron(&c.conjugate(), &c) - kron(&id, &ctc).scale(0.5) - kron(&ctc.transpose(), &id).scale(0.5)) * g;
    }
    l
}

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    Dense::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

/// `exp(a)` by scaling and squaring of a degree-20 Taylor polynomial.
pub fn expm(a: &Dense) -> Dense {
    let n = a.nrows();
    let norm: f64 = (0..n)
        .map(|i| (0..n).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.5 {
        s += 1;
    }
    let x = a.unscale(2f64.powi(s));
    let mut term = Dense::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=20 {
        term = (&term * &x).unscale(k as f64);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

fn unvec(v: &DVector<C64>, d: usize) -> Dense {
    Dense::from_fn(d, d, |r, c| v[c * d + r])
}

fn tidy(rho: Dense) -> Dense {
    let h = (&rho + rho.adjoint()).scale(0.5);
    let tr = h.trace().re;
    h.unscale(tr)
}

/// Stationary state of the Lindblad generator reached from `I/d`.
///
/// Propagates with `exp(L tau)` and squares the propagator until
/// `||L rho|| < 1e-8`; if squaring stalls (undamped coherences) falls back to
/// a Cesàro average along the orbit. Errors if neither converges.
pub fn me_fixed_point(h: &OperatorMatrix, channels: &[MeasurementChannel]) -> Result<Dense> {
    let d = h.dim();
    if d * d > 400 * 400 {
        return Err(Error::DimensionTooLarge {
            dim: (d * d) as u128,
            cap: 400 * 400,
        });
    }
    let l = superoperator(h, channels);
    let rho0 = DVector::from_fn(d * d, |k, _| if k % (d + 1) == 0 { C64::new(1.0 / d as f64, 0.0) } else { ZERO });
    let lnorm = l.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-12);
    let mut prop = expm(&l.unscale(lnorm));
    let residual = |v: &DVector<C64>| {
        let rho = tidy(unvec(v, d));
        let flat = DVector::from_column_slice(rho.as_slice());
        ((&l * &flat).norm(), rho)
    };
    let mut best = (f64::INFINITY, Dense::zeros(d, d));
    for _ in 0..64 {
        let v = &prop * &rho0;
        let (r, rho) = residual(&v);
        if r < best.0 {
            best = (r, rho);
        }
        if r < FIXED_POINT_TOL {
            return Ok(best.1);
        }
        prop = &prop * &prop;
        let scale = prop.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !scale.is_finite() {
            break;
        }
    }

    // Cesàro average of the orbit under a moderate step.
    let step = expm(&l.unscale(lnorm).scale(10.0));
    let mut v = rho0.clone();
    let mut acc = DVector::<C64>::zeros(d * d);
    let mut iterations = 0;
    for k in 1..=200_000 {
        v = &step * &v;
        acc += &v;
        iterations = k;
        if k % 1000 == 0 {
            let (r, rho) = residual(&acc.unscale(k as f64));
            if r < best.0 {
                best = (r, rho);
            }
            if r < FIXED_POINT_TOL {
                return Ok(best.1);
            }
        }
    }
    Err(Error::NoConvergence {
        residual: best.0,
        iterations,
    })
}

/// `Tr rho^2` computed entrywise.
pub fn purity(rho: &Dense) -> f64 {
    rho.iter().map(|z| z.norm_sqr()).sum()
}
