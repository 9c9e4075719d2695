use std::sync::Arc;

use crate::domain::{Grid, ScalarField, VectorField};
use crate::energy::EnergyParams;
use crate::scalar::{tree_sum, zero_mat, Real, SmallMat};

/// A `(1,1)`-tensor per cell.
#[derive(Clone, Debug)]
pub struct TensorField<T> {
    grid: Arc<Grid>,
    pub data: Vec<SmallMat<T>>,
    omega: Vec<T>,
}

impl<T: Real> TensorField<T> {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Operator norm per cell (largest singular value of the leading block).
    pub fn operator_norms(&self) -> Vec<f64> {
        let n = self.grid.dim();
        self.data
            .iter()
            .map(|m| {
                let a = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j].to_f64_lossy());
                a.singular_values().max()
            })
            .collect()
    }
}

/// Centred Jacobian `J[i][j] = d_j X_i`.
pub fn jacobian<T: Real>(x: &VectorField<T>) -> Vec<SmallMat<T>> {
    let g = x.grid();
    let n = g.dim();
    let inv: Vec<T> = g.spacing().iter().map(|&h| T::lit(0.5 / h)).collect();
    (0..g.len())
        .map(|k| {
            let mut m = zero_mat();
            for j in 0..n {
                let p = x.at(g.neighbor(k, j, true));
                let q = x.at(g.neighbor(k, j, false));
                for i in 0..n {
                    m[i][j] = (p[i] - q[i]) * inv[j];
                }
            }
            m
        })
        .collect()
}

/// `T = e I - eps grad u (x) D(F^2 / 2)(grad u)`, stencil-averaged like the energy.
pub fn stress_tensor<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> TensorField<T> {
    let n = p.domain().dim();
    let eps = p.eps();
    let kappa = p.domain().metric().kappa();
    let m2 = p.modulation_sq();
    let spec = p.integrand();
    let half = T::lit(0.5);
    let scale = T::one() / T::from_count(1 << n);
    let data = (0..u.len())
        .map(|j| {
            let mut fsq = T::zero();
            let mut outer = zero_mat::<T>();
            p.for_each_stencil(&u.data, j, |v| {
                let e = spec.f0_square(v);
                fsq += e.value;
                for a in 0..n {
                    for b in 0..n {
                        outer[a][b] += v[a] * half * e.grad[b];
                    }
                }
            });
            let c = kappa[j] * m2[j] * scale;
            let e = half * eps * c * fsq + p.potential().w(u.data[j]) / eps;
            let mut t = zero_mat();
            for a in 0..n {
                for b in 0..n {
                    t[a][b] = -eps * c * outer[a][b];
                }
                t[a][a] += e;
            }
            t
        })
        .collect();
    TensorField {
        grid: u.grid().clone(),
        data,
        omega: p.domain().metric().omega().to_vec(),
    }
}

/// `int <T, DX>` with the centred Jacobian of `X`.
pub fn divergence_test<T: Real>(t: &TensorField<T>, x: &VectorField<T>) -> f64 {
    let n = t.grid.dim();
    let j = jacobian(x);
    let terms: Vec<T> = (0..t.data.len())
        .map(|k| {
            let mut s = T::zero();
            for a in 0..n {
                for b in 0..n {
                    s += t.data[k][a][b] * j[k][a][b];
                }
            }
            t.omega[k] * s
        })
        .collect();
    tree_sum(&terms).to_f64_lossy()
}
