//! Geometric diagnostics of phase fields: discrepancy, diffuse varifolds,
//! stress-energy tensor, stability ratios, slice energies and level sets.
//!
//! Pointwise quantities use the unmollified `F` and the same one-sided
//! stencils as the energy, so `|grad u|^2` and `F(x, grad u)^2` below are
//! stencil averages and the energy density is `eps F^2 / 2 + W / eps` exactly.

mod interface;
mod slices;
mod stability;
mod stress;
mod varifold;

pub use interface::{extract_interface, Facet, Interface};
pub use slices::{slice_quantization, Cutoff, SliceOptions, SliceRecord, SliceReport};
pub use stability::{stability_diagnostic, StabilityReport};
pub use stress::{divergence_test, jacobian, stress_tensor, TensorField};
pub use varifold::{
    build_varifold, density_ratios, first_variation_aniso, first_variation_iso, trig_fields, varifold_mass,
    GridMeasure, TestField, WeightedNormals,
};

use serde::{Deserialize, Serialize};

use crate::domain::{ScalarField, VectorField};
use crate::energy::EnergyParams;
use crate::scalar::{norm, zero_mat, Real, SmallMat};

/// Gradient floor `1e-8 / eps` below which normals, `C_F` and curvature are set to zero.
pub fn gradient_floor(eps: f64) -> f64 {
    1e-8 / eps
}

/// Per-cell quantities shared by the diagnostics.
pub(crate) struct CellData<T> {
    /// Stencil average of `kappa m^2 F0(D^s u)^2`.
    pub fsq: Vec<T>,
    /// Stencil average of `kappa |D^s u|^2`.
    pub gsq: Vec<T>,
    pub w: Vec<T>,
    /// Centred gradient.
    pub grad: VectorField<T>,
}

impl<T: Real> CellData<T> {
    pub fn new(u: &ScalarField<T>, p: &EnergyParams<T>) -> Self {
        let n = p.domain().dim();
        let kappa = p.domain().metric().kappa();
        let m2 = p.modulation_sq();
        let scale = T::one() / T::from_count(1 << n);
        let spec = p.integrand();
        let mut fsq = Vec::with_capacity(u.len());
        let mut gsq = Vec::with_capacity(u.len());
        for j in 0..u.len() {
            let (mut f, mut g) = (T::zero(), T::zero());
            p.for_each_stencil(&u.data, j, |v| {
                f += spec.f0_square(v).value;
                g += v[..n].iter().fold(T::zero(), |a, &c| a + c * c);
            });
            fsq.push(kappa[j] * m2[j] * f * scale);
            gsq.push(kappa[j] * g * scale);
        }
        Self {
            fsq,
            gsq,
            w: u.data.iter().map(|&s| p.potential().w(s)).collect(),
            grad: p.domain().grad(u),
        }
    }

    /// `eps F^2 / 2 + W / eps` per cell.
    pub fn density(&self, eps: T) -> Vec<T> {
        let half = T::lit(0.5);
        self.fsq.iter().zip(&self.w).map(|(&f, &w)| half * eps * f + w / eps).collect()
    }

    /// Centred gradient and its unit normal where `|grad u| > floor`.
    pub fn normal(&self, k: usize, floor: T) -> Option<crate::scalar::SmallVec<T>> {
        let g = self.grad.at(k);
        let r = norm(g);
        if r > floor {
            let mut v = [T::zero(); 3];
            for (a, &c) in g.iter().enumerate() {
                v[a] = c / r;
            }
            Some(v)
        } else {
            None
        }
    }
}

/// Energy density with the unmollified integrand.
pub fn raw_energy_density<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> ScalarField<T> {
    let c = CellData::new(u, p);
    ScalarField::from_raw(u.grid(), c.density(p.eps()))
}

/// Energy with the unmollified integrand.
pub fn raw_energy<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> f64 {
    p.domain().integrate(&raw_energy_density(u, p)).to_f64_lossy()
}

#[derive(Clone, Debug)]
pub struct ModicaReport<T> {
    /// `eps F(grad u)^2 / 2 - W(u) / eps`.
    pub discrepancy: ScalarField<T>,
    pub max: f64,
    pub positive_mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModicaSummary {
    pub max: f64,
    pub positive_mass: f64,
}

impl<T> ModicaReport<T> {
    pub fn summary(&self) -> ModicaSummary {
        ModicaSummary {
            max: self.max,
            positive_mass: self.positive_mass,
        }
    }
}

pub fn modica_check<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> ModicaReport<T> {
    let c = CellData::new(u, p);
    let eps = p.eps();
    let half = T::lit(0.5);
    let xi: Vec<T> = c.fsq.iter().zip(&c.w).map(|(&f, &w)| half * eps * f - w / eps).collect();
    let max = xi.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x.to_f64_lossy()));
    let pos: Vec<T> = xi.iter().map(|&x| x.max(T::zero())).collect();
    let positive_mass = p.domain().integrate_slice(&pos).to_f64_lossy();
    ModicaReport {
        discrepancy: ScalarField::from_raw(u.grid(), xi),
        max,
        positive_mass,
    }
}

/// `lambda_eps = min(eps F^2 / e, 1)` (zero where `e = 0`) and
/// `C_F(nu) = I - nu (x) DF(nu) / F(nu)` (zero where the gradient vanishes).
#[derive(Clone, Debug)]
pub struct CfSplit<T> {
    pub lambda: ScalarField<T>,
    pub cf: Vec<SmallMat<T>>,
}

pub fn cf_split<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> CfSplit<T> {
    let c = CellData::new(u, p);
    let eps = p.eps();
    let e = c.density(eps);
    let lambda = c
        .fsq
        .iter()
        .zip(&e)
        .map(|(&f, &e)| if e > T::zero() { (eps * f / e).min(T::one()) } else { T::zero() })
        .collect();
    let floor = T::lit(gradient_floor(eps.to_f64_lossy()));
    let grid = u.grid();
    let cf = (0..u.len())
        .map(|k| match c.normal(k, floor) {
            Some(nu) => {
                let x = grid.position(k);
                let xt: Vec<T> = x[..grid.dim()].iter().map(|&v| T::lit(v)).collect();
                cf_matrix(p, &xt, &nu)
            }
            None => zero_mat(),
        })
        .collect();
    CfSplit {
        lambda: ScalarField::from_raw(grid, lambda),
        cf,
    }
}

fn cf_matrix<T: Real>(p: &EnergyParams<T>, x: &[T], nu: &[T; 3]) -> SmallMat<T> {
    let n = p.domain().dim();
    let (f, df) = p.integrand().f_and_df(x, &nu[..]);
    let mut m = zero_mat();
    for i in 0..n {
        for j in 0..n {
            m[i][j] = if i == j { T::one() } else { T::zero() } - nu[i] * df[j] / f;
        }
    }
    m
}

/// `<DF(nu0), C_F(nu) nu0>` for unit vectors; nonnegative for convex even `F`.
pub fn cf_contraction(spec: &crate::integrand::IntegrandSpec, nu: &[f64], nu0: &[f64]) -> f64 {
    let n = spec.dim;
    let origin = [0.0; 3];
    let (f, df) = spec.f_and_df(&origin[..n], nu);
    let (_, df0) = spec.f_and_df(&origin[..n], nu0);
    let along: f64 = (0..n).map(|a| df[a] * nu0[a]).sum();
    (0..n).map(|i| df0[i] * (nu0[i] - nu[i] * along / f)).sum()
}

/// `int eps |P grad u|^2` with `P` the projection orthogonal to `dir`, and
/// the same quantity without projection.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TangentialEnergy {
    pub tangential: f64,
    pub total: f64,
}

impl TangentialEnergy {
    pub fn fraction(&self) -> f64 {
        if self.total > 0.0 {
            self.tangential / self.total
        } else {
            0.0
        }
    }
}

pub fn tangential_energy<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>, dir: &[f64]) -> TangentialEnergy {
    let n = p.domain().dim();
    let d = unit(&dir[..n]);
    let g = p.domain().grad(u);
    let eps = p.eps();
    let kappa = p.domain().metric().kappa();
    let mut tan = Vec::with_capacity(u.len());
    let mut tot = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let v = g.at(k);
        let sq: T = v.iter().fold(T::zero(), |a, &c| a + c * c);
        let along: T = (0..n).fold(T::zero(), |a, i| a + v[i] * T::lit(d[i]));
        tan.push(eps * kappa[k] * (sq - along * along).max(T::zero()));
        tot.push(eps * kappa[k] * sq);
    }
    TangentialEnergy {
        tangential: p.domain().integrate_slice(&tan).to_f64_lossy(),
        total: p.domain().integrate_slice(&tot).to_f64_lossy(),
    }
}

pub(crate) fn unit(v: &[f64]) -> [f64; 3] {
    let r = v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut out = [0.0; 3];
    for (o, c) in out.iter_mut().zip(v) {
        *o = c / r;
    }
    out
}
