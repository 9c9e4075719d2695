use std::sync::Arc;

use crate::domain::{interpolate, Grid, ScalarField, VectorField};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::integrand::IntegrandSpec;
use crate::scalar::{tree_sum, Real, SmallMat};

use super::stress::jacobian;
use super::{gradient_floor, CellData};

/// Diffuse varifold of a phase field: per-cell mass density
/// `sqrt(2 W(u)) |grad u|` and the unit normal of the level set through the cell.
#[derive(Clone, Debug)]
pub struct GridMeasure<T> {
    grid: Arc<Grid>,
    pub weight: Vec<T>,
    /// `None` on `{grad u = 0}`.
    pub normal: Vec<Option<[T; 3]>>,
    omega: Vec<T>,
}

impl<T: Real> GridMeasure<T> {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn mass(&self) -> f64 {
        let terms: Vec<T> = self.weight.iter().zip(&self.omega).map(|(&w, &o)| w * o).collect();
        tree_sum(&terms).to_f64_lossy()
    }

    /// Mass of the periodic ball `B_r(center)`.
    pub fn ball_mass(&self, center: &[f64], r: f64) -> Result<f64> {
        let limit = 0.5 * self.grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
        if r > limit {
            return Err(Error::RadiusTooLarge { r, limit });
        }
        let terms: Vec<T> = (0..self.grid.len())
            .map(|k| {
                if self.grid.periodic_distance(&self.grid.position(k), center) < r {
                    self.weight[k] * self.omega[k]
                } else {
                    T::zero()
                }
            })
            .collect();
        Ok(tree_sum(&terms).to_f64_lossy())
    }
}

pub fn build_varifold<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> GridMeasure<T> {
    let c = CellData::new(u, p);
    let floor = T::lit(gradient_floor(p.eps().to_f64_lossy()));
    let two = T::lit(2.0);
    let mut weight = Vec::with_capacity(u.len());
    let mut normal = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        let g = c.gsq[k].sqrt();
        if g > T::epsilon() {
            weight.push((two * c.w[k]).max(T::zero()).sqrt() * g);
        } else {
            weight.push(T::zero());
        }
        normal.push(c.normal(k, floor));
    }
    GridMeasure {
        grid: u.grid().clone(),
        weight,
        normal,
        omega: p.domain().metric().omega().to_vec(),
    }
}

/// Total mass, or the mass of `B_r(center)` when a region is given.
pub fn varifold_mass<T: Real>(v: &GridMeasure<T>, region: Option<(&[f64], f64)>) -> Result<f64> {
    match region {
        None => Ok(v.mass()),
        Some((c, r)) => v.ball_mass(c, r),
    }
}

/// Volume of the unit ball in dimension `k`.
fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        2 => std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI / 3.0,
    }
}

/// `||V||(B_r(x)) / (omega_{n-1} r^{n-1})`: equals the multiplicity times the
/// interface weight for a flat interface through `x`.
pub fn density_ratios<T: Real>(v: &GridMeasure<T>, x: &[f64], radii: &[f64]) -> Result<Vec<f64>> {
    let n = v.grid.dim();
    radii
        .iter()
        .map(|&r| Ok(v.ball_mass(x, r)? / (unit_ball_volume(n - 1) * r.powi(n as i32 - 1))))
        .collect()
}

/// Weighted oriented samples `(x, weight, normal)` of a codimension-one measure.
pub trait WeightedNormals {
    fn samples(&self) -> Vec<([f64; 3], f64, Option<[f64; 3]>)>;
    fn grid(&self) -> &Arc<Grid>;
}

impl<T: Real> WeightedNormals for GridMeasure<T> {
    fn samples(&self) -> Vec<([f64; 3], f64, Option<[f64; 3]>)> {
        (0..self.grid.len())
            .map(|k| {
                let nu = self.normal[k].map(|v| v.map(|c| c.to_f64_lossy()));
                (
                    self.grid.position(k),
                    (self.weight[k] * self.omega[k]).to_f64_lossy(),
                    nu,
                )
            })
            .collect()
    }

    fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }
}

/// `DX` at arbitrary points by interpolating the centred Jacobian.
struct JacobianSampler {
    comps: Vec<ScalarField<f64>>,
    dim: usize,
}

impl JacobianSampler {
    fn new<T: Real>(x: &VectorField<T>) -> Self {
        let grid = x.grid();
        let n = grid.dim();
        let j = jacobian(x);
        let comps = (0..n * n)
            .map(|c| ScalarField::from_raw(grid, j.iter().map(|m| m[c / n][c % n].to_f64_lossy()).collect()))
            .collect();
        Self { comps, dim: n }
    }

    fn at(&self, x: &[f64; 3], exact: Option<usize>) -> SmallMat<f64> {
        let n = self.dim;
        let mut m = [[0.0; 3]; 3];
        for c in 0..n * n {
            m[c / n][c % n] = match exact {
                Some(k) => self.comps[c].data[k],
                None => interpolate(&self.comps[c], &x[..]),
            };
        }
        m
    }
}

fn cell_of(grid: &Grid, x: &[f64; 3]) -> Option<usize> {
    let n = grid.dim();
    let mut idx = [0usize; 3];
    for a in 0..n {
        let s = x[a] / grid.spacing()[a];
        if (s - s.round()).abs() > 1e-9 {
            return None;
        }
        idx[a] = (s.round() as i64).rem_euclid(grid.cells()[a] as i64) as usize;
    }
    Some(grid.index(idx))
}

/// Isotropic first variation `int div_P X dV`, `P = nu^perp`.
pub fn first_variation_iso<T: Real>(v: &impl WeightedNormals, x: &VectorField<T>) -> f64 {
    let n = v.grid().dim();
    let jac = JacobianSampler::new(x);
    let terms: Vec<f64> = v
        .samples()
        .iter()
        .map(|(pos, w, nu)| {
            let Some(nu) = nu else { return 0.0 };
            let d = jac.at(pos, cell_of(v.grid(), pos));
            let mut div = 0.0;
            let mut nn = 0.0;
            for i in 0..n {
                div += d[i][i];
                for j in 0..n {
                    nn += nu[i] * d[i][j] * nu[j];
                }
            }
            w * (div - nn)
        })
        .collect();
    tree_sum(&terms)
}

/// Anisotropic first variation
/// `int [F(x, nu) div X - <D_v F(x, nu), DX^T nu> + <D_x F(x, nu), X>] dV`.
pub fn first_variation_aniso<T: Real>(v: &impl WeightedNormals, spec: &IntegrandSpec, x: &VectorField<T>) -> f64 {
    let n = v.grid().dim();
    let jac = JacobianSampler::new(x);
    let xs: Vec<ScalarField<f64>> = (0..n)
        .map(|a| {
            ScalarField::from_raw(
                x.grid(),
                (0..x.grid().len()).map(|k| x.at(k)[a].to_f64_lossy()).collect(),
            )
        })
        .collect();
    let terms: Vec<f64> = v
        .samples()
        .iter()
        .map(|(pos, w, nu)| {
            let Some(nu) = nu else { return 0.0 };
            let exact = cell_of(v.grid(), pos);
            let d = jac.at(pos, exact);
            let (f, df) = spec.f_and_df(&pos[..n], &nu[..n]);
            let mut div = 0.0;
            let mut mixed = 0.0;
            for i in 0..n {
                div += d[i][i];
                for j in 0..n {
                    mixed += df[j] * d[i][j] * nu[i];
                }
            }
            let mut spatial = 0.0;
            if let Some(m) = &spec.modulation {
                let grad_m = m.gradient(&pos[..n]);
                let f0 = spec.f0(&nu[..n]);
                for a in 0..n {
                    let xa = match exact {
                        Some(k) => xs[a].data[k],
                        None => interpolate(&xs[a], &pos[..]),
                    };
                    spatial += grad_m[a] * f0 * xa;
                }
            }
            w * (f * div - mixed + spatial)
        })
        .collect();
    tree_sum(&terms)
}

/// Trigonometric test field with its norms.
#[derive(Clone, Debug)]
pub struct TestField<T> {
    pub field: VectorField<T>,
    pub label: String,
    pub sup_norm: f64,
    /// `sup |X| + sup |DX|`.
    pub c1_norm: f64,
}

/// Twelve single-mode fields `e_a cos(2 pi k.x)`, `e_a sin(2 pi k.x)` over
/// three wavevectors (in 3D the unit wavevectors of the first two axes and
/// their sum, paired with every axis where needed to reach twelve).
pub fn trig_fields<T: Real>(grid: &Arc<Grid>) -> Vec<TestField<T>> {
    let n = grid.dim();
    let waves: Vec<[f64; 3]> = match n {
        1 => vec![[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [3.0, 0.0, 0.0], [4.0, 0.0, 0.0], [5.0, 0.0, 0.0], [6.0, 0.0, 0.0]],
        2 => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 1.0, 0.0]],
        _ => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
    };
    let mut out = Vec::new();
    for k in &waves {
        let kk: Vec<f64> = (0..n).map(|a| k[a] / grid.lengths()[a]).collect();
        let knorm = kk.iter().map(|c| c * c).sum::<f64>().sqrt();
        for axis in 0..n {
            for (phase, name) in [(0.0, "cos"), (-std::f64::consts::FRAC_PI_2, "sin")] {
                let kc = kk.clone();
                let field = VectorField::from_fn(grid, move |x| {
                    let arg: f64 = (0..n).map(|a| kc[a] * x[a]).sum::<f64>() * std::f64::consts::TAU;
                    let mut v = [0.0; 3];
                    v[axis] = (arg + phase).cos();
                    v
                })
                .expect("finite trigonometric field");
                out.push(TestField {
                    field,
                    label: format!("e{} {name}(2pi {:?}.x)", axis + 1, &k[..n]),
                    sup_norm: 1.0,
                    c1_norm: 1.0 + std::f64::consts::TAU * knorm,
                });
            }
        }
    }
    out.truncate(12);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use crate::potential::PotentialSpec;

    #[test]
    fn constant_field_has_zero_measure() {
        let g = Grid::unit(2, 16).unwrap().shared();
        let p = EnergyParams::new(Domain::flat(g.clone()), PotentialSpec::quartic(), IntegrandSpec::isotropic(2), 0.1, 0.0)
            .unwrap();
        let v = build_varifold(&ScalarField::constant(&g, 0.2), &p);
        assert_eq!(v.mass(), 0.0);
        assert!(v.normal.iter().all(|n| n.is_none()));
    }

    #[test]
    fn twelve_fields_in_two_dimensions() {
        let g = Grid::unit(2, 16).unwrap().shared();
        let f = trig_fields::<f64>(&g);
        assert_eq!(f.len(), 12);
        let g3 = Grid::unit(3, 8).unwrap().shared();
        assert_eq!(trig_fields::<f64>(&g3).len(), 12);
    }
}
