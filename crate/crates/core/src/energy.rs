//! Discrete anisotropic Allen-Cahn energy with exact gradients and
//! matrix-free Hessian-vector products.
//!
//! The gradient term averages `G(x_j, D^s u_j)` over the `2^n` one-sided
//! difference stencils `s`, where `D^s_a u_j = s_a (u_{j + s_a e_a} - u_j) / h_a`.
//! Averaging couples every cell to its neighbours, so the discrete Hessian has
//! no checkerboard null modes.

use crate::domain::{Domain, ScalarField};
use crate::error::{Error, Result};
use crate::integrand::{mollify, IntegrandSpec, MollifiedIntegrand, SquareEval, DEFAULT_QUAD_ORDER};
use crate::potential::PotentialSpec;
use crate::scalar::{tree_sum, zero_mat, zero_vec, Real, SmallMat, SmallVec};

/// Everything needed to evaluate `E_{eps,delta}` on a fixed grid.
#[derive(Clone, Debug)]
pub struct EnergyParams<T: Real> {
    eps: T,
    delta: f64,
    quad_order: usize,
    potential: PotentialSpec,
    integrand: IntegrandSpec,
    mollified: Option<MollifiedIntegrand>,
    domain: Domain<T>,
    /// Squared modulation per cell.
    m2: Vec<T>,
    /// `omega_j (eps / 2) kappa_j m_j^2 / 2^n` per cell.
    flux: Vec<T>,
    inv_h: [T; 3],
    /// `A` for the quadratic families (identity for the isotropic one).
    quadratic: Option<SmallMat<T>>,
}

impl<T: Real> EnergyParams<T> {
    pub fn new(
        domain: Domain<T>,
        potential: PotentialSpec,
        integrand: IntegrandSpec,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        Self::with_quad_order(domain, potential, integrand, eps, delta, DEFAULT_QUAD_ORDER)
    }

    pub fn with_quad_order(
        domain: Domain<T>,
        potential: PotentialSpec,
        integrand: IntegrandSpec,
        eps: f64,
        delta: f64,
        quad_order: usize,
    ) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(Error::InvalidArgument(format!("delta must lie in [0, 1), got {delta}")));
        }
        if integrand.dim != domain.dim() {
            return Err(Error::InvalidArgument(format!(
                "integrand dimension {} does not match grid dimension {}",
                integrand.dim,
                domain.dim()
            )));
        }
        integrand.validate()?;
        let mollified = if delta > 0.0 {
            Some(mollify(&integrand, delta, quad_order)?)
        } else {
            None
        };
        let grid = domain.grid().clone();
        let n = grid.dim();
        let m2 = (0..grid.len())
            .map(|k| {
                let x = grid.position(k);
                let xt: Vec<T> = x[..n].iter().map(|&c| T::lit(c)).collect();
                let m = integrand.modulation_at(&xt);
                m * m
            })
            .collect();
        let mut inv_h = [T::one(); 3];
        for a in 0..n {
            inv_h[a] = T::lit(1.0 / grid.spacing()[a]);
        }
        let quadratic = match &integrand.family {
            crate::integrand::IntegrandFamily::Isotropic => {
                let mut a = zero_mat();
                for (i, row) in a.iter_mut().enumerate().take(n) {
                    row[i] = T::one();
                }
                Some(a)
            }
            crate::integrand::IntegrandFamily::Quadratic(m) => {
                let mut a = zero_mat();
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] = T::lit(m[i * n + j]);
                    }
                }
                Some(a)
            }
            _ => None,
        };
        let mut p = Self {
            eps: T::lit(eps),
            delta,
            quad_order,
            potential,
            integrand,
            mollified,
            domain,
            m2,
            flux: Vec::new(),
            inv_h,
            quadratic,
        };
        p.refresh_flux();
        Ok(p)
    }

    fn refresh_flux(&mut self) {
        let n = self.domain.dim();
        let scale = self.eps / T::lit(2.0) / T::from_count(1 << n);
        let omega = self.domain.metric().omega();
        let kappa = self.domain.metric().kappa();
        self.flux = (0..omega.len())
            .map(|k| omega[k] * scale * kappa[k] * self.m2[k])
            .collect();
    }

    /// Same problem at another `eps`.
    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1], got {eps}")));
        }
        let mut p = self.clone();
        p.eps = T::lit(eps);
        p.refresh_flux();
        Ok(p)
    }

    /// Same problem with another mollification parameter.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::with_quad_order(
            self.domain.clone(),
            self.potential.clone(),
            self.integrand.clone(),
            self.eps.to_f64_lossy(),
            delta,
            self.quad_order,
        )
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn integrand(&self) -> &IntegrandSpec {
        &self.integrand
    }

    pub fn mollified(&self) -> Option<&MollifiedIntegrand> {
        self.mollified.as_ref()
    }

    pub fn domain(&self) -> &Domain<T> {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.m2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m2.is_empty()
    }

    /// Squared modulation `m(x_k)^2`.
    pub fn modulation_sq(&self) -> &[T] {
        &self.m2
    }

    /// Autonomous part of `G` (mollified when `delta > 0`, raw `F0^2` otherwise).
    #[inline]
    pub fn g0(&self, v: &[T]) -> SquareEval<T> {
        if let Some(a) = &self.quadratic {
            let n = self.domain.dim();
            let two = T::lit(2.0);
            let mut grad = zero_vec();
            let mut hess = zero_mat();
            let mut value = T::zero();
            for i in 0..n {
                let mut av = T::zero();
                for j in 0..n {
                    av += a[i][j] * v[j];
                    hess[i][j] = two * a[i][j];
                }
                grad[i] = two * av;
                value += v[i] * av;
            }
            return SquareEval {
                value,
                grad,
                hess: Some(hess),
            };
        }
        match &self.mollified {
            Some(m) => m.g0(v),
            None => self.integrand.f0_square(v),
        }
    }

    /// One-sided differences of `u` at `j`: forward and backward along each axis.
    #[inline]
    fn diffs(&self, u: &[T], j: usize) -> ([T; 3], [T; 3]) {
        let g = self.domain.grid();
        let mut fwd = [T::zero(); 3];
        let mut bwd = [T::zero(); 3];
        for a in 0..g.dim() {
            fwd[a] = (u[g.neighbor(j, a, true)] - u[j]) * self.inv_h[a];
            bwd[a] = (u[j] - u[g.neighbor(j, a, false)]) * self.inv_h[a];
        }
        (fwd, bwd)
    }

    #[inline]
    fn stencil(n: usize, s: usize, fwd: &[T; 3], bwd: &[T; 3]) -> SmallVec<T> {
        let mut v = zero_vec();
        for a in 0..n {
            v[a] = if (s >> a) & 1 == 0 { fwd[a] } else { bwd[a] };
        }
        v
    }

    /// Calls `f` on each of the `2^n` one-sided difference vectors at cell `j`.
    pub(crate) fn for_each_stencil(&self, u: &[T], j: usize, mut f: impl FnMut(&SmallVec<T>)) {
        let n = self.domain.dim();
        let (fwd, bwd) = self.diffs(u, j);
        for s in 0..(1usize << n) {
            f(&Self::stencil(n, s, &fwd, &bwd));
        }
    }

    /// Per-cell energy contributions `omega_j e_j`.
    fn cell_energies(&self, u: &[T]) -> Vec<T> {
        let n = self.domain.dim();
        let omega = self.domain.metric().omega();
        let inv_eps = T::one() / self.eps;
        (0..u.len())
            .map(|j| {
                let (fwd, bwd) = self.diffs(u, j);
                let mut gsum = T::zero();
                for s in 0..(1usize << n) {
                    gsum += self.g0(&Self::stencil(n, s, &fwd, &bwd)).value;
                }
                self.flux[j] * gsum + omega[j] * self.potential.w(u[j]) * inv_eps
            })
            .collect()
    }

    pub fn energy_slice(&self, u: &[T]) -> T {
        tree_sum(&self.cell_energies(u))
    }

    /// Writes the per-volume gradient into `g` and returns the energy.
    pub fn grad_slice(&self, u: &[T], g: &mut [T]) -> T {
        let grid = self.domain.grid();
        let n = grid.dim();
        let omega = self.domain.metric().omega();
        let inv_eps = T::one() / self.eps;
        let mut cells = Vec::with_capacity(u.len());
        for (j, gj) in g.iter_mut().enumerate() {
            let (w, dw, _) = self.potential.eval(u[j]);
            *gj = omega[j] * dw * inv_eps;
            cells.push(omega[j] * w * inv_eps);
        }
        for j in 0..u.len() {
            let (fwd, bwd) = self.diffs(u, j);
            let mut gsum = T::zero();
            for s in 0..(1usize << n) {
                let e = self.g0(&Self::stencil(n, s, &fwd, &bwd));
                gsum += e.value;
                for a in 0..n {
                    let p = self.flux[j] * e.grad[a] * self.inv_h[a];
                    if (s >> a) & 1 == 0 {
                        g[grid.neighbor(j, a, true)] += p;
                        g[j] -= p;
                    } else {
                        g[grid.neighbor(j, a, false)] -= p;
                        g[j] += p;
                    }
                }
            }
            cells[j] += self.flux[j] * gsum;
        }
        for (gj, &w) in g.iter_mut().zip(omega) {
            *gj /= w;
        }
        tree_sum(&cells)
    }

    /// Second derivative at `u` as a reusable operator.
    pub fn hessian_at(&self, u: &[T]) -> Result<HessianOp<'_, T>> {
        if self.delta == 0.0 {
            return Err(Error::HessianRequiresDelta);
        }
        let n = self.domain.dim();
        let inv_eps = T::one() / self.eps;
        let omega = self.domain.metric().omega();
        let potential_diag = (0..u.len())
            .map(|j| omega[j] * self.potential.d2w(u[j]) * inv_eps)
            .collect();
        let packed = n * (n + 1) / 2;
        let blocks = if self.quadratic.is_some() {
            Vec::new()
        } else {
            let mut out = Vec::with_capacity(u.len() * (1 << n) * packed);
            for j in 0..u.len() {
                let (fwd, bwd) = self.diffs(u, j);
                for s in 0..(1usize << n) {
                    let h = self.g0(&Self::stencil(n, s, &fwd, &bwd)).hess.unwrap_or_else(zero_mat);
                    for a in 0..n {
                        for b in a..n {
                            out.push(h[a][b]);
                        }
                    }
                }
            }
            out
        };
        Ok(HessianOp {
            params: self,
            potential_diag,
            blocks,
        })
    }

    pub fn energy(&self, u: &ScalarField<T>) -> T {
        self.energy_slice(&u.data)
    }

    pub fn energy_density(&self, u: &ScalarField<T>) -> ScalarField<T> {
        let omega = self.domain.metric().omega();
        let e = self.cell_energies(&u.data);
        ScalarField::from_raw(
            u.grid(),
            e.iter().zip(omega).map(|(&c, &w)| c / w).collect(),
        )
    }

    /// Gradient part `(eps / 2) G(x, D u)` of the density, stencil-averaged.
    pub fn gradient_density(&self, u: &ScalarField<T>) -> ScalarField<T> {
        let n = self.domain.dim();
        let omega = self.domain.metric().omega();
        let data = (0..u.len())
            .map(|j| {
                let (fwd, bwd) = self.diffs(&u.data, j);
                let mut gsum = T::zero();
                for s in 0..(1usize << n) {
                    gsum += self.g0(&Self::stencil(n, s, &fwd, &bwd)).value;
                }
                self.flux[j] * gsum / omega[j]
            })
            .collect();
        ScalarField::from_raw(u.grid(), data)
    }

    pub fn grad_energy(&self, u: &ScalarField<T>) -> ScalarField<T> {
        let mut g = vec![T::zero(); u.len()];
        self.grad_slice(&u.data, &mut g);
        ScalarField::from_raw(u.grid(), g)
    }

    pub fn hess_apply(&self, u: &ScalarField<T>, v: &ScalarField<T>) -> Result<ScalarField<T>> {
        let h = self.hessian_at(&u.data)?;
        let mut out = vec![T::zero(); u.len()];
        h.apply(&v.data, &mut out);
        Ok(ScalarField::from_raw(u.grid(), out))
    }
}

/// Matrix-free second derivative of the discrete energy at a fixed field.
pub struct HessianOp<'a, T: Real> {
    params: &'a EnergyParams<T>,
    potential_diag: Vec<T>,
    /// Packed upper triangles of `D^2 G` per cell and stencil (empty for quadratic families).
    blocks: Vec<T>,
}

impl<T: Real> HessianOp<'_, T> {
    pub fn len(&self) -> usize {
        self.potential_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential_diag.is_empty()
    }

    pub fn params(&self) -> &EnergyParams<T> {
        self.params
    }

    /// `out = H v` as a per-volume field.
    pub fn apply(&self, v: &[T], out: &mut [T]) {
        let p = self.params;
        let grid = p.domain.grid();
        let n = grid.dim();
        let omega = p.domain.metric().omega();
        let packed = n * (n + 1) / 2;
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.potential_diag[j] * v[j];
        }
        let mut h = zero_mat();
        if let Some(a) = &p.quadratic {
            for i in 0..n {
                for k in 0..n {
                    h[i][k] = T::lit(2.0) * a[i][k];
                }
            }
        }
        for j in 0..v.len() {
            let (fwd, bwd) = p.diffs(v, j);
            for s in 0..(1usize << n) {
                let dv = EnergyParams::stencil(n, s, &fwd, &bwd);
                if p.quadratic.is_none() {
                    let base = (j * (1 << n) + s) * packed;
                    let mut idx = base;
                    for a in 0..n {
                        for b in a..n {
                            h[a][b] = self.blocks[idx];
                            h[b][a] = self.blocks[idx];
                            idx += 1;
                        }
                    }
                }
                for a in 0..n {
                    let mut hv = T::zero();
                    for b in 0..n {
                        hv += h[a][b] * dv[b];
                    }
                    let q = p.flux[j] * hv * p.inv_h[a];
                    if (s >> a) & 1 == 0 {
                        out[grid.neighbor(j, a, true)] += q;
                        out[j] -= q;
                    } else {
                        out[grid.neighbor(j, a, false)] -= q;
                        out[j] += q;
                    }
                }
            }
        }
        for (o, &w) in out.iter_mut().zip(omega) {
            *o /= w;
        }
    }
}

pub fn energy<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> T {
    p.energy(u)
}

pub fn energy_density<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> ScalarField<T> {
    p.energy_density(u)
}

pub fn grad_energy<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> ScalarField<T> {
    p.grad_energy(u)
}

pub fn hess_apply<T: Real>(
    u: &ScalarField<T>,
    v: &ScalarField<T>,
    p: &EnergyParams<T>,
) -> Result<ScalarField<T>> {
    p.hess_apply(u, v)
}
