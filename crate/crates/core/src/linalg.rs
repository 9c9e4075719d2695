//! Krylov solvers in a weighted inner product `<a, b> = sum_k w_k a_k b_k`:
//! preconditioned MINRES, preconditioned CG and Lanczos with full
//! reorthogonalization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::{tree_sum, Real};

/// Weighted Euclidean space.
#[derive(Clone, Copy, Debug)]
pub struct Space<'a, T> {
    pub weights: &'a [T],
}

impl<'a, T: Real> Space<'a, T> {
    pub fn new(weights: &'a [T]) -> Self {
        Self { weights }
    }

    pub fn dot(&self, a: &[T], b: &[T]) -> T {
        let prod: Vec<T> = a
            .iter()
            .zip(b)
            .zip(self.weights)
            .map(|((&x, &y), &w)| w * x * y)
            .collect();
        tree_sum(&prod)
    }

    pub fn norm(&self, a: &[T]) -> T {
        self.dot(a, a).max(T::zero()).sqrt()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// `y += a x`.
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` recomputed at exit.
    pub relative_residual: T,
    pub converged: bool,
}

/// Preconditioned MINRES for `(A - shift) x = b` with `A` self-adjoint and the
/// preconditioner positive definite in the weighted product.
pub fn minres<T: Real>(
    space: Space<'_, T>,
    mut apply: impl FnMut(&[T], &mut [T]),
    mut precond: impl FnMut(&[T], &mut [T]),
    b: &[T],
    shift: T,
    rtol: T,
    max_iter: usize,
) -> Result<SolveOutcome<T>> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let bnorm = space.norm(b);
    if bnorm == T::zero() {
        return Ok(SolveOutcome {
            x,
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        });
    }
    let mut r1 = b.to_vec();
    let mut y = vec![T::zero(); n];
    precond(&r1, &mut y);
    let beta1 = space.dot(&r1, &y);
    if !(beta1 > T::zero()) {
        return Err(Error::Breakdown("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1.sqrt();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (T::zero(), beta1);
    let (mut dbar, mut epsln, mut phibar) = (T::zero(), T::zero(), beta1);
    let (mut cs, mut sn) = (-T::one(), T::zero());
    let mut w = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut av = vec![T::zero(); n];
    let mut iterations = 0;
    let tiny = T::epsilon();
    while iterations < max_iter {
        iterations += 1;
        let s = T::one() / beta;
        for (vi, &yi) in v.iter_mut().zip(&y) {
            *vi = s * yi;
        }
        apply(&v, &mut av);
        for (yi, (&a, &vi)) in y.iter_mut().zip(av.iter().zip(&v)) {
            *yi = a - shift * vi;
        }
        if iterations >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = space.dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond(&r2, &mut y);
        oldb = beta;
        let bb = space.dot(&r2, &y);
        if bb < T::zero() {
            return Err(Error::Breakdown("preconditioner is not positive definite".into()));
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = (gbar * gbar + beta * beta).sqrt().max(tiny);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;
        let denom = T::one() / gamma;
        // w_new = (v - oldeps w1 - delta w2) / gamma with w1 = previous w2, w2 = previous w.
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
        }
        axpy(phi, &w, &mut x);
        if phibar <= rtol * beta1 || beta <= tiny * beta1 {
            break;
        }
    }
    let rel = residual(space, &mut apply, &x, b, shift) / bnorm;
    Ok(SolveOutcome {
        x,
        iterations,
        converged: rel <= rtol * T::lit(10.0),
        relative_residual: rel,
    })
}

fn residual<T: Real>(
    space: Space<'_, T>,
    apply: &mut impl FnMut(&[T], &mut [T]),
    x: &[T],
    b: &[T],
    shift: T,
) -> T {
    let mut ax = vec![T::zero(); x.len()];
    apply(x, &mut ax);
    let r: Vec<T> = (0..x.len()).map(|i| b[i] - ax[i] + shift * x[i]).collect();
    space.norm(&r)
}

/// Preconditioned conjugate gradients for `(A - shift) x = b`, positive definite.
pub fn pcg<T: Real>(
    space: Space<'_, T>,
    mut apply: impl FnMut(&[T], &mut [T]),
    mut precond: impl FnMut(&[T], &mut [T]),
    b: &[T],
    shift: T,
    rtol: T,
    max_iter: usize,
) -> Result<SolveOutcome<T>> {
    let n = b.len();
    let mut x = vec![T::zero(); n];
    let bnorm = space.norm(b);
    if bnorm == T::zero() {
        return Ok(SolveOutcome {
            x,
            iterations: 0,
            relative_residual: T::zero(),
            converged: true,
        });
    }
    let mut r = b.to_vec();
    let mut z = vec![T::zero(); n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = space.dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        apply(&p, &mut ap);
        axpy(-shift, &p, &mut ap);
        let pap = space.dot(&p, &ap);
        if !(pap > T::zero()) {
            return Err(Error::Breakdown(format!("operator not positive definite (p.Ap = {pap:?})")));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        if space.norm(&r) <= rtol * bnorm {
            break;
        }
        precond(&r, &mut z);
        let rz_new = space.dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, &zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let rel = residual(space, &mut apply, &x, b, shift) / bnorm;
    Ok(SolveOutcome {
        x,
        iterations,
        converged: rel <= rtol * T::lit(10.0),
        relative_residual: rel,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extreme {
    Smallest,
    Largest,
}

#[derive(Clone, Debug)]
pub struct RitzPairs<T> {
    /// Ritz values ordered from the requested end inwards.
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<T>>,
    /// Residual bounds `|beta_m s_{m,i}|` from the tridiagonal problem.
    pub estimates: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Lanczos with full reorthogonalization for `k` extreme eigenpairs of a
/// self-adjoint operator. Stops when every wanted Ritz residual estimate is
/// below `tol` times the largest Ritz value magnitude.
pub fn lanczos<T: Real>(
    space: Space<'_, T>,
    mut apply: impl FnMut(&[T], &mut [T]),
    k: usize,
    which: Extreme,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<RitzPairs<T>> {
    let n = space.len();
    let max_iter = max_iter.min(n);
    if k == 0 || k > max_iter {
        return Err(Error::InvalidArgument(format!("cannot extract {k} eigenpairs")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<T> = (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
    let nq = space.norm(&q);
    q.iter_mut().for_each(|c| *c /= nq);
    let mut basis: Vec<Vec<T>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![T::zero(); n];
    let mut result = None;
    for m in 1..=max_iter {
        apply(&basis[m - 1], &mut w);
        let a = space.dot(&w, &basis[m - 1]);
        alpha.push(a.to_f64_lossy());
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for b in &basis {
                let c = space.dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let bnext = space.norm(&w);
        let (values, vecs) = tridiagonal_eigen(&alpha, &beta);
        let order: Vec<usize> = match which {
            Extreme::Smallest => (0..m).collect(),
            Extreme::Largest => (0..m).rev().collect(),
        };
        let scale = values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())).max(f64::MIN_POSITIVE);
        let bf = bnext.to_f64_lossy();
        let wanted = k.min(m);
        let estimates: Vec<f64> = order[..wanted].iter().map(|&i| (bf * vecs[(m - 1, i)]).abs()).collect();
        let done = m >= k && estimates.iter().all(|&e| e <= tol * scale);
        let invariant = bf <= 1e-14 * scale;
        if done || invariant || m == max_iter {
            let mut vectors = Vec::with_capacity(wanted);
            for &i in &order[..wanted] {
                let mut v = vec![T::zero(); n];
                for (j, b) in basis.iter().enumerate() {
                    axpy(T::lit(vecs[(j, i)]), b, &mut v);
                }
                vectors.push(v);
            }
            result = Some(RitzPairs {
                values: order[..wanted].iter().map(|&i| values[i]).collect(),
                vectors,
                estimates,
                iterations: m,
                converged: done || (invariant && m >= k),
            });
            break;
        }
        beta.push(bf);
        let inv = T::one() / bnext;
        basis.push(w.iter().map(|&c| c * inv).collect());
    }
    result.ok_or_else(|| Error::Breakdown("Lanczos produced no Ritz pairs".into()))
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `a`
/// and off-diagonal `b`, eigenvalues ascending.
fn tridiagonal_eigen(a: &[f64], b: &[f64]) -> (Vec<f64>, nalgebra::DMatrix<f64>) {
    let m = a.len();
    let mut t = nalgebra::DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = a[i];
        if i + 1 < m {
            t[(i, i + 1)] = b[i];
            t[(i + 1, i)] = b[i];
        }
    }
    let eig = t.symmetric_eigen();
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = nalgebra::DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, idx[c])]);
    (values, vecs)
}
