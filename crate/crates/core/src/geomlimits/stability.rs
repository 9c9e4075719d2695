use serde::{Deserialize, Serialize};

use crate::domain::ScalarField;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::scalar::{zero_mat, Real, SmallMat};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct StabilityReport {
    /// `int phi^2 |II_u|^2 eps F_delta(grad u)^2`.
    pub lhs: f64,
    /// `int e_{eps,delta}(u)`.
    pub rhs: f64,
    pub ratio: f64,
}

/// Centred second differences.
fn hessian<T: Real>(u: &ScalarField<T>, k: usize) -> SmallMat<T> {
    let g = u.grid();
    let n = g.dim();
    let d = &u.data;
    let mut h = zero_mat();
    for a in 0..n {
        let ha = T::lit(g.spacing()[a]);
        let p = g.neighbor(k, a, true);
        let m = g.neighbor(k, a, false);
        h[a][a] = (d[p] - T::lit(2.0) * d[k] + d[m]) / (ha * ha);
        for b in (a + 1)..n {
            let hb = T::lit(g.spacing()[b]);
            let pp = g.neighbor(p, b, true);
            let pm = g.neighbor(p, b, false);
            let mp = g.neighbor(m, b, true);
            let mm = g.neighbor(m, b, false);
            let v = (d[pp] - d[pm] - d[mp] + d[mm]) / (T::lit(4.0) * ha * hb);
            h[a][b] = v;
            h[b][a] = v;
        }
    }
    h
}

/// `|II_u|^2 = |P H P|^2 / |grad u|^2` with `P` the projection onto the level set.
pub(crate) fn second_fundamental_form_sq<T: Real>(h: &SmallMat<T>, grad: &[T], floor: T) -> T {
    let n = grad.len();
    let r2: T = grad.iter().fold(T::zero(), |a, &c| a + c * c);
    let r = r2.sqrt();
    if r <= floor {
        return T::zero();
    }
    let mut proj = zero_mat::<T>();
    for i in 0..n {
        for j in 0..n {
            proj[i][j] = if i == j { T::one() } else { T::zero() } - grad[i] * grad[j] / r2;
        }
    }
    let mut s = T::zero();
    for i in 0..n {
        for j in 0..n {
            let mut v = T::zero();
            for a in 0..n {
                for b in 0..n {
                    v += proj[i][a] * h[a][b] * proj[b][j];
                }
            }
            s += v * v;
        }
    }
    s / r2
}

pub fn stability_diagnostic<T: Real>(
    u: &ScalarField<T>,
    p: &EnergyParams<T>,
    phi: &ScalarField<T>,
    tau: f64,
) -> Result<StabilityReport> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("gradient floor must be positive, got {tau}")));
    }
    let grad = p.domain().grad(u);
    let two = T::lit(2.0);
    let g = p.gradient_density(u);
    let floor = T::lit(tau);
    let lhs: Vec<T> = (0..u.len())
        .map(|k| {
            let h = hessian(u, k);
            let ii = second_fundamental_form_sq(&h, grad.at(k), floor);
            phi.data[k] * phi.data[k] * ii * two * g.data[k]
        })
        .collect();
    let lhs = p.domain().integrate_slice(&lhs).to_f64_lossy();
    let rhs = p.energy(u).to_f64_lossy();
    Ok(StabilityReport {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Grid};
    use crate::integrand::IntegrandSpec;
    use crate::potential::PotentialSpec;

    #[test]
    fn circle_curvature_from_quadratic() {
        // u = |x|^2 / 2 has H = I and level sets of curvature 1 / r.
        let h = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
        let x: [f64; 2] = [0.3, -0.4];
        let ii = second_fundamental_form_sq(&h, &x, 1e-12);
        assert!((ii - 1.0 / 0.25).abs() < 1e-12);
    }

    #[test]
    fn flat_stripe_has_no_curvature() {
        let g = Grid::unit(2, 32).unwrap().shared();
        let p = EnergyParams::new(Domain::flat(g.clone()), PotentialSpec::quartic(), IntegrandSpec::isotropic(2), 0.05, 0.05)
            .unwrap();
        let u = ScalarField::from_fn(&g, |x| (std::f64::consts::TAU * x[1]).sin()).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        let r = stability_diagnostic(&u, &p, &one, 1e-6).unwrap();
        assert!(r.lhs <= 1e-20 * r.rhs.max(1.0));
        assert!(stability_diagnostic(&u, &p, &one, 0.0).is_err());
    }
}
