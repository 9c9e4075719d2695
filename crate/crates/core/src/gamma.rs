//! Gamma-convergence experiments: the transform `H(u) = int_0^u sqrt(2W)`,
//! anisotropic perimeters of simple shapes, recovery fields built from the
//! truncated heteroclinic, and sweeps of `E_eps` against `c_W` times the perimeter.

use serde::{Deserialize, Serialize};

use crate::domain::{Grid, ScalarField};
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::integrand::IntegrandSpec;
use crate::potential::{heteroclinic, PotentialSpec};
use crate::quadrature::gauss_legendre;
use crate::scalar::Real;

/// Shape `S` on the flat torus; the recovery field is `+1` outside `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ShapeSpec {
    /// `S` is the union of the slabs `[o_0, o_1], [o_2, o_3], ...` across `axis`.
    Stripe { axis: usize, offsets: Vec<f64> },
    /// Disc (2D) or ball (3D).
    Ball { center: Vec<f64>, radius: f64 },
    /// Axis-aligned ellipse with semi-axes `axes` (2D).
    Ellipse { center: Vec<f64>, axes: [f64; 2] },
}

/// Nearest boundary point of a shape.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    /// Signed distance, positive outside `S`.
    pub distance: f64,
    pub point: [f64; 3],
    /// Unit outward normal at `point`.
    pub normal: [f64; 3],
}

impl ShapeSpec {
    pub fn stripe(axis: usize, offsets: &[f64]) -> Self {
        Self::Stripe {
            axis,
            offsets: offsets.to_vec(),
        }
    }

    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        Self::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let n = grid.dim();
        let l = grid.lengths();
        let min_l = l.iter().cloned().fold(f64::INFINITY, f64::min);
        match self {
            Self::Stripe { axis, offsets } => {
                if *axis >= n {
                    return Err(Error::InvalidArgument(format!("stripe axis {axis} out of range")));
                }
                if offsets.is_empty() || offsets.len() % 2 != 0 {
                    return Err(Error::InvalidArgument("a stripe needs an even, nonzero number of offsets".into()));
                }
                let mut o = offsets.clone();
                o.sort_by(f64::total_cmp);
                if o[0] < 0.0 || o[o.len() - 1] >= l[*axis] || o.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidArgument("stripe offsets must be distinct and inside one period".into()));
                }
            }
            Self::Ball { center, radius } => {
                if center.len() != n || !(*radius > 0.0) || 2.0 * radius >= min_l {
                    return Err(Error::InvalidArgument("ball must have a positive radius below half a period".into()));
                }
            }
            Self::Ellipse { center, axes } => {
                if n != 2 || center.len() != 2 {
                    return Err(Error::InvalidArgument("ellipses are two-dimensional".into()));
                }
                if !(axes[0] > 0.0 && axes[1] > 0.0) || 2.0 * axes[0].max(axes[1]) >= min_l {
                    return Err(Error::InvalidArgument("ellipse must fit inside one period".into()));
                }
            }
        }
        Ok(())
    }

    /// Largest `r` such that the normal band of half-width `r` is embedded.
    pub fn reach(&self, grid: &Grid) -> f64 {
        let min_l = grid.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
        match self {
            Self::Stripe { axis, offsets } => {
                let l = grid.lengths()[*axis];
                let mut o = offsets.clone();
                o.sort_by(f64::total_cmp);
                let mut gap = l - o[o.len() - 1] + o[0];
                for w in o.windows(2) {
                    gap = gap.min(w[1] - w[0]);
                }
                0.5 * gap
            }
            Self::Ball { radius, .. } => radius.min(0.5 * min_l - radius),
            Self::Ellipse { axes, .. } => {
                let (a, b) = (axes[0].max(axes[1]), axes[0].min(axes[1]));
                (b * b / a).min(0.5 * min_l - a)
            }
        }
    }

    pub fn project(&self, grid: &Grid, x: &[f64]) -> Projection {
        let n = grid.dim();
        match self {
            Self::Stripe { axis, offsets } => {
                let l = grid.lengths()[*axis];
                let t = x[*axis].rem_euclid(l);
                let mut best = (f64::INFINITY, 0.0);
                let mut below = 0;
                for &o in offsets {
                    let mut d = t - o;
                    d -= l * (d / l).round();
                    if d.abs() < best.0.abs() {
                        best = (d, o);
                    }
                    if o <= t {
                        below += 1;
                    }
                }
                let inside = below % 2 == 1;
                let mut point = [0.0; 3];
                point[..n].copy_from_slice(&x[..n]);
                point[*axis] = best.1;
                let mut normal = [0.0; 3];
                // Outward normal points away from the slab.
                normal[*axis] = if (best.0 > 0.0) != inside { 1.0 } else { -1.0 };
                Projection {
                    distance: if inside { -best.0.abs() } else { best.0.abs() },
                    point,
                    normal,
                }
            }
            Self::Ball { center, radius } => {
                let v = grid.periodic_delta(x, center);
                let r = v[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
                let mut normal = [0.0; 3];
                if r > 0.0 {
                    for a in 0..n {
                        normal[a] = v[a] / r;
                    }
                } else {
                    normal[0] = 1.0;
                }
                let mut point = [0.0; 3];
                for a in 0..n {
                    point[a] = center[a] + radius * normal[a];
                }
                Projection {
                    distance: r - radius,
                    point,
                    normal,
                }
            }
            Self::Ellipse { center, axes } => {
                let v = grid.periodic_delta(x, center);
                let (px, py) = nearest_on_ellipse(axes[0], axes[1], v[0], v[1]);
                let d = ((v[0] - px).powi(2) + (v[1] - py).powi(2)).sqrt();
                let inside = (v[0] / axes[0]).powi(2) + (v[1] / axes[1]).powi(2) < 1.0;
                let (nx, ny) = (px / (axes[0] * axes[0]), py / (axes[1] * axes[1]));
                let r = (nx * nx + ny * ny).sqrt();
                Projection {
                    distance: if inside { -d } else { d },
                    point: [center[0] + px, center[1] + py, 0.0],
                    normal: [nx / r, ny / r, 0.0],
                }
            }
        }
    }

    /// Boundary parametrisation for perimeter quadrature: `(point, unit normal,
    /// area element)` at parameters in `[0, 1]^{n-1}` scaled by `lengths`.
    fn boundary_integral(&self, grid: &Grid, f: &dyn Fn(&[f64; 3], &[f64; 3]) -> f64) -> Result<f64> {
        let n = grid.dim();
        let l = grid.lengths();
        const TOL: f64 = 1e-12;
        let de = |g: &dyn Fn(f64) -> f64, a: f64, b: f64| -> Result<f64> {
            let out = quadrature::double_exponential::integrate(g, a, b, TOL);
            if !out.integral.is_finite() || out.error_estimate > 1e-8 * out.integral.abs().max(1.0) {
                return Err(Error::Quadrature(format!(
                    "boundary integral error estimate {:e}",
                    out.error_estimate
                )));
            }
            Ok(out.integral)
        };
        let tau = std::f64::consts::TAU;
        match self {
            Self::Stripe { axis, offsets } => {
                let others: Vec<usize> = (0..n).filter(|a| a != axis).collect();
                let mut total = 0.0;
                for &o in offsets {
                    let mut nu = [0.0; 3];
                    nu[*axis] = 1.0;
                    let at = |s: &[f64]| {
                        let mut x = [0.0; 3];
                        x[*axis] = o;
                        for (k, &a) in others.iter().enumerate() {
                            x[a] = s[k];
                        }
                        f(&x, &nu)
                    };
                    total += match others.len() {
                        0 => at(&[]),
                        1 => de(&|s| at(&[s]), 0.0, l[others[0]])?,
                        _ => de(
                            &|s| {
                                quadrature::double_exponential::integrate(|t| at(&[s, t]), 0.0, l[others[1]], TOL)
                                    .integral
                            },
                            0.0,
                            l[others[0]],
                        )?,
                    };
                }
                Ok(total)
            }
            Self::Ball { center, radius } => {
                let r = *radius;
                if n == 2 {
                    de(
                        &|t| {
                            let nu = [t.cos(), t.sin(), 0.0];
                            let x = [center[0] + r * nu[0], center[1] + r * nu[1], 0.0];
                            r * f(&x, &nu)
                        },
                        0.0,
                        tau,
                    )
                } else {
                    de(
                        &|th| {
                            quadrature::double_exponential::integrate(
                                |ph| {
                                    let nu = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
                                    let x = [center[0] + r * nu[0], center[1] + r * nu[1], center[2] + r * nu[2]];
                                    r * r * th.sin() * f(&x, &nu)
                                },
                                0.0,
                                tau,
                                TOL,
                            )
                            .integral
                        },
                        0.0,
                        std::f64::consts::PI,
                    )
                }
            }
            Self::Ellipse { center, axes } => {
                let (a, b) = (axes[0], axes[1]);
                de(
                    &|t| {
                        let (c, s) = (t.cos(), t.sin());
                        let speed = (a * a * s * s + b * b * c * c).sqrt();
                        let nu = [b * c / speed, a * s / speed, 0.0];
                        let x = [center[0] + a * c, center[1] + b * s, 0.0];
                        speed * f(&x, &nu)
                    },
                    0.0,
                    tau,
                )
            }
        }
    }
}

/// Closest point of the ellipse `(x/a)^2 + (y/b)^2 = 1` to `(x, y)`, by
/// bisection on the Lagrange multiplier in the first quadrant.
fn nearest_on_ellipse(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    let swap = a < b;
    let (e0, e1, y0, y1) = if swap { (b, a, y.abs(), x.abs()) } else { (a, b, x.abs(), y.abs()) };
    let (mut x0, mut x1);
    if y1 > 0.0 {
        if y0 > 0.0 {
            let z0 = y0 / e0;
            let z1 = y1 / e1;
            let g = z0 * z0 + z1 * z1 - 1.0;
            if g != 0.0 {
                let r0 = (e0 / e1) * (e0 / e1);
                let n0 = r0 * z0;
                let mut s0 = z1 - 1.0;
                let mut s1 = if g < 0.0 { 0.0 } else { (n0 * n0 + z1 * z1).sqrt() - 1.0 };
                let mut s = 0.0;
                for _ in 0..2000 {
                    s = 0.5 * (s0 + s1);
                    if s == s0 || s == s1 {
                        break;
                    }
                    let r_0 = n0 / (s + r0);
                    let r_1 = z1 / (s + 1.0);
                    let gs = r_0 * r_0 + r_1 * r_1 - 1.0;
                    if gs > 0.0 {
                        s0 = s;
                    } else if gs < 0.0 {
                        s1 = s;
                    } else {
                        break;
                    }
                }
                x0 = r0 * y0 / (s + r0);
                x1 = y1 / (s + 1.0);
            } else {
                x0 = y0;
                x1 = y1;
            }
        } else {
            x0 = 0.0;
            x1 = e1;
        }
    } else {
        let numer = e0 * y0;
        let denom = e0 * e0 - e1 * e1;
        if numer < denom {
            let q = numer / denom;
            x0 = e0 * q;
            x1 = e1 * (1.0 - q * q).max(0.0).sqrt();
        } else {
            x0 = e0;
            x1 = 0.0;
        }
    }
    let (sx, sy) = (x.signum(), y.signum());
    if swap {
        std::mem::swap(&mut x0, &mut x1);
    }
    (x0.copysign(sx), x1.copysign(sy))
}

/// `int_{boundary S} F(x, nu_x) dH^{n-1}`.
pub fn aniso_perimeter(shape: &ShapeSpec, spec: &IntegrandSpec, grid: &Grid) -> Result<f64> {
    shape.validate(grid)?;
    let n = grid.dim();
    shape.boundary_integral(grid, &|x, nu| spec.f_and_df(&x[..n], &nu[..n]).0)
}

/// Largest `F(p, nu_p)` over dense samples of the boundary.
fn max_boundary_f(shape: &ShapeSpec, spec: &IntegrandSpec, grid: &Grid) -> f64 {
    let n = grid.dim();
    let m = 2048;
    let mut best: f64 = 0.0;
    let mut probe = |x: &[f64; 3], nu: &[f64; 3]| best = best.max(spec.f_and_df(&x[..n], &nu[..n]).0);
    match shape {
        ShapeSpec::Stripe { axis, offsets } => {
            let mut nu = [0.0; 3];
            nu[*axis] = 1.0;
            let others: Vec<usize> = (0..n).filter(|a| a != axis).collect();
            let side: usize = if n == 3 { 64 } else { m };
            for &o in offsets {
                for i in 0..side.pow(others.len() as u32) {
                    let mut x = [0.0; 3];
                    x[*axis] = o;
                    let mut r = i;
                    for &a in &others {
                        x[a] = (r % side) as f64 / side as f64 * grid.lengths()[a];
                        r /= side;
                    }
                    probe(&x, &nu);
                }
            }
        }
        ShapeSpec::Ball { center, radius } => {
            for i in 0..m {
                let t = std::f64::consts::TAU * i as f64 / m as f64;
                for j in 0..(if n == 3 { 64 } else { 1 }) {
                    let nu = if n == 3 {
                        let th = std::f64::consts::PI * (j as f64 + 0.5) / 64.0;
                        [th.sin() * t.cos(), th.sin() * t.sin(), th.cos()]
                    } else {
                        [t.cos(), t.sin(), 0.0]
                    };
                    let mut x = [0.0; 3];
                    for a in 0..n {
                        x[a] = center[a] + radius * nu[a];
                    }
                    probe(&x, &nu);
                }
            }
        }
        ShapeSpec::Ellipse { center, axes } => {
            for i in 0..m {
                let t = std::f64::consts::TAU * i as f64 / m as f64;
                let (c, s) = (t.cos(), t.sin());
                let speed = (axes[0] * axes[0] * s * s + axes[1] * axes[1] * c * c).sqrt();
                probe(
                    &[center[0] + axes[0] * c, center[1] + axes[1] * s, 0.0],
                    &[axes[1] * c / speed, axes[0] * s / speed, 0.0],
                );
            }
        }
    }
    best
}

/// Tabulated `H(t) = int_0^t sqrt(2 W)` on `[-2, 2]` with Hermite
/// interpolation limited to stay monotone; direct quadrature outside.
#[derive(Clone, Debug)]
pub struct HTransform {
    potential: PotentialSpec,
    lo: f64,
    step: f64,
    values: Vec<f64>,
    slopes: Vec<f64>,
}

pub const H_TABLE_POINTS: usize = 10_000;

impl HTransform {
    pub fn new(potential: &PotentialSpec) -> Result<Self> {
        let (lo, hi) = (-2.0, 2.0);
        let m = H_TABLE_POINTS;
        let step = (hi - lo) / m as f64;
        let rule = gauss_legendre(8, 0.0, 1.0);
        let mut values = Vec::with_capacity(m + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..m {
            let a = lo + step * i as f64;
            let piece: f64 = rule.iter().map(|&(x, w)| w * potential.sqrt_2w(a + step * x)).sum::<f64>() * step;
            acc += piece;
            values.push(acc);
        }
        // Shift so that H(0) = 0; zero is a table node.
        let zero = values[m / 2];
        for v in values.iter_mut() {
            *v -= zero;
        }
        let slopes = (0..=m).map(|i| potential.sqrt_2w(lo + step * i as f64)).collect();
        Ok(Self {
            potential: potential.clone(),
            lo,
            step,
            values,
            slopes,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let m = self.values.len() - 1;
        let s = (t - self.lo) / self.step;
        if !(s >= 0.0 && s <= m as f64) {
            let (edge, v) = if s < 0.0 { (self.lo, self.values[0]) } else { (self.lo + self.step * m as f64, self.values[m]) };
            return v + self.potential.integrate_sqrt_2w(edge, t).unwrap_or(f64::NAN);
        }
        let k = (s.floor() as usize).min(m - 1);
        let x = s - k as f64;
        let (p0, p1) = (self.values[k], self.values[k + 1]);
        let delta = p1 - p0;
        let (mut m0, mut m1) = (self.slopes[k] * self.step, self.slopes[k + 1] * self.step);
        if delta > 0.0 {
            // Fritsch-Carlson: keep (m0, m1) / delta inside the disc of radius 3.
            let (a, b) = (m0 / delta, m1 / delta);
            let r = (a * a + b * b).sqrt();
            if r > 3.0 {
                m0 *= 3.0 / r;
                m1 *= 3.0 / r;
            }
        } else {
            m0 = 0.0;
            m1 = 0.0;
        }
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * p0 + (x3 - 2.0 * x2 + x) * m0 + (-2.0 * x3 + 3.0 * x2) * p1 + (x3 - x2) * m1
    }
}

pub fn h_transform<T: Real>(u: &ScalarField<T>, spec: &PotentialSpec) -> Result<ScalarField<T>> {
    let h = HTransform::new(spec)?;
    Ok(ScalarField::from_raw(
        u.grid(),
        u.data.iter().map(|&v| T::lit(h.eval(v.to_f64_lossy()))).collect(),
    ))
}

/// Discrete `int F(x, grad w)`: stencil average of `F(x, D^s w)`.
pub fn bv_mass_aniso<T: Real>(w: &ScalarField<T>, p: &EnergyParams<T>) -> f64 {
    let n = p.domain().dim();
    let kappa = p.domain().metric().kappa();
    let m2 = p.modulation_sq();
    let scale = T::one() / T::from_count(1 << n);
    let spec = p.integrand();
    let cells: Vec<T> = (0..w.len())
        .map(|j| {
            let mut s = T::zero();
            p.for_each_stencil(&w.data, j, |v| s += spec.f0(v));
            (kappa[j] * m2[j]).sqrt() * s * scale
        })
        .collect();
    p.domain().integrate_slice(&cells).to_f64_lossy()
}

/// Chain-rule form `int sqrt(2 W(u)) F(x, grad u)` of `bv_mass_aniso(H(u))`,
/// bounded by the unmollified energy cell by cell.
pub fn chain_rule_mass<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> f64 {
    let n = p.domain().dim();
    let kappa = p.domain().metric().kappa();
    let m2 = p.modulation_sq();
    let scale = T::one() / T::from_count(1 << n);
    let spec = p.integrand();
    let cells: Vec<T> = (0..u.len())
        .map(|j| {
            let mut s = T::zero();
            p.for_each_stencil(&u.data, j, |v| s += spec.f0(v));
            p.potential().sqrt_2w(u.data[j]) * (kappa[j] * m2[j]).sqrt() * s * scale
        })
        .collect();
    p.domain().integrate_slice(&cells).to_f64_lossy()
}

/// `U_gamma(d(x) / (eps F(p(x), nu_p)))` with `d` the signed distance to the boundary.
pub fn recovery_field<T: Real>(shape: &ShapeSpec, p: &EnergyParams<T>, gamma: f64) -> Result<ScalarField<T>> {
    let grid = p.domain().grid();
    shape.validate(grid)?;
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    let eps = p.eps().to_f64_lossy();
    let spec = p.integrand();
    let band = 2.0 * gamma * eps * max_boundary_f(shape, spec, grid);
    let reach = shape.reach(grid);
    if band >= reach {
        return Err(Error::BandExceedsReach { band, reach });
    }
    let n = grid.dim();
    let profile = heteroclinic(p.potential(), 40.0, 8001)?;
    let data = (0..grid.len())
        .map(|k| {
            let x = grid.position(k);
            let pr = shape.project(grid, &x);
            let f = spec.f_and_df(&pr.point[..n], &pr.normal[..n]).0;
            T::lit(profile.truncated(gamma, pr.distance / (eps * f)))
        })
        .collect();
    Ok(ScalarField::from_raw(grid, data))
}

/// How `gamma` follows `eps` in a sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum GammaRule {
    /// `gamma = factor * log(1 / eps)`.
    Log { factor: f64 },
    Fixed(f64),
}

impl Default for GammaRule {
    fn default() -> Self {
        Self::Log { factor: 2.0 }
    }
}

impl GammaRule {
    pub fn gamma(&self, eps: f64) -> f64 {
        match *self {
            Self::Log { factor } => factor * (1.0 / eps).ln(),
            Self::Fixed(g) => g,
        }
    }
}

/// Fraction of the reach the transition band may occupy when `gamma` is capped.
pub const BAND_FILL: f64 = 0.9;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GammaRow {
    pub eps: f64,
    pub gamma: f64,
    pub energy: f64,
    /// `c_W` times the anisotropic perimeter.
    pub target: f64,
    /// `|E - target| / target`.
    pub gap: f64,
    pub chain_rule_mass: f64,
    pub bv_mass: f64,
}

/// Recovery energies along `eps_list` (strictly decreasing). `template` fixes
/// grid, potential and integrand; energies use the unmollified integrand.
/// `gamma` is capped so the band fills at most [`BAND_FILL`] of the reach.
pub fn gamma_sweep<T: Real>(
    shape: &ShapeSpec,
    template: &EnergyParams<T>,
    eps_list: &[f64],
    rule: GammaRule,
) -> Result<Vec<GammaRow>> {
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidArgument("eps list must be strictly decreasing".into()));
    }
    let grid = template.domain().grid();
    let cw = template.potential().cw()?;
    let target = cw * aniso_perimeter(shape, template.integrand(), grid)?;
    let fmax = max_boundary_f(shape, template.integrand(), grid);
    let reach = shape.reach(grid);
    let h = HTransform::new(template.potential())?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let p = template.with_eps(eps)?.with_delta(0.0)?;
        let gamma = rule.gamma(eps).min(BAND_FILL * reach / (2.0 * eps * fmax));
        let u = recovery_field(shape, &p, gamma)?;
        let energy = crate::geomlimits::raw_energy(&u, &p);
        let w = ScalarField::from_raw(u.grid(), u.data.iter().map(|&v| T::lit(h.eval(v.to_f64_lossy()))).collect());
        rows.push(GammaRow {
            eps,
            gamma,
            energy,
            target,
            gap: (energy - target).abs() / target,
            chain_rule_mass: chain_rule_mass(&u, &p),
            bv_mass: bv_mass_aniso(&w, &p),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;

    #[test]
    fn h_at_the_wells() {
        let h = HTransform::new(&PotentialSpec::quartic()).unwrap();
        assert_eq!(h.eval(0.0), 0.0);
        assert!((h.eval(1.0) - 2f64.sqrt() / 3.0).abs() < 1e-12);
        assert!((h.eval(-1.0) + 2f64.sqrt() / 3.0).abs() < 1e-12);
        // H(t) = (t - t^3 / 3) / sqrt(2) on [-1, 1].
        for t in [-0.9, -0.31, 0.123, 0.77] {
            let exact = (t - t * t * t / 3.0) / 2f64.sqrt();
            assert!((h.eval(t) - exact).abs() < 1e-12);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..4001 {
            let v = h.eval(-2.2 + 4.4 * i as f64 / 4000.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn perimeters_of_simple_shapes() {
        let g = Grid::unit(2, 16).unwrap();
        let iso = IntegrandSpec::isotropic(2);
        let c = ShapeSpec::circle([0.5, 0.5], 0.25);
        assert!((aniso_perimeter(&c, &iso, &g).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
        let d = IntegrandSpec::diagonal(&[4.0, 1.0]).unwrap();
        let s = ShapeSpec::stripe(1, &[0.25, 0.75]);
        assert!((aniso_perimeter(&s, &d, &g).unwrap() - 2.0).abs() < 1e-12);
        let e = ShapeSpec::Ellipse {
            center: vec![0.5, 0.5],
            axes: [0.25, 0.25],
        };
        assert!((aniso_perimeter(&e, &iso, &g).unwrap() - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn ellipse_projection_is_orthogonal() {
        let g = Grid::unit(2, 16).unwrap();
        let s = ShapeSpec::Ellipse {
            center: vec![0.5, 0.5],
            axes: [0.3, 0.15],
        };
        for x in [[0.9, 0.6], [0.5, 0.52], [0.2, 0.1], [0.61, 0.44]] {
            let pr = s.project(&g, &x);
            let d = [x[0] - pr.point[0], x[1] - pr.point[1]];
            let cross = d[0] * pr.normal[1] - d[1] * pr.normal[0];
            assert!(cross.abs() < 1e-10, "{x:?} {cross}");
            assert!((d[0].hypot(d[1]) - pr.distance.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn band_must_fit() {
        let g = Grid::unit(2, 32).unwrap().shared();
        let p = EnergyParams::<f64>::new(Domain::flat(g), PotentialSpec::quartic(), IntegrandSpec::isotropic(2), 0.1, 0.0)
            .unwrap();
        let s = ShapeSpec::circle([0.5, 0.5], 0.2);
        assert!(matches!(recovery_field(&s, &p, 2.0), Err(Error::BandExceedsReach { .. })));
        assert!(recovery_field(&s, &p, 0.5).is_ok());
    }
}
