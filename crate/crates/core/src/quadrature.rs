//! Tensorized rules on the unit sphere and unit ball.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(order: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(order.max(1)).expect("order >= 1"));
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}

/// Directions on `S^{dim-1}` with weights summing to the sphere's measure.
///
/// 1D: `{-1, +1}`; 2D: `2 * order` equispaced angles (periodic trapezoid);
/// 3D: Gauss-Legendre in the polar cosine times `2 * order` azimuths.
pub fn sphere_rule(dim: usize, order: usize) -> Vec<([f64; 3], f64)> {
    match dim {
        1 => vec![([1.0, 0.0, 0.0], 1.0), ([-1.0, 0.0, 0.0], 1.0)],
        2 => {
            let m = 2 * order;
            let dt = std::f64::consts::TAU / m as f64;
            (0..m)
                .map(|j| {
                    let th = dt * j as f64;
                    ([th.cos(), th.sin(), 0.0], dt)
                })
                .collect()
        }
        3 => {
            let m = 2 * order;
            let dphi = std::f64::consts::TAU / m as f64;
            let mut out = Vec::with_capacity(order * m);
            for (c, wc) in gauss_legendre(order, -1.0, 1.0) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for j in 0..m {
                    let phi = dphi * j as f64;
                    out.push(([s * phi.cos(), s * phi.sin(), c], wc * dphi));
                }
            }
            out
        }
        _ => panic!("dimension {dim} unsupported"),
    }
}

/// Directions within angle `alpha` of the unit vector `axis`, weighted by the
/// sphere measure. Used when the integrand is supported in a cone.
pub fn cone_rule(dim: usize, order: usize, axis: [f64; 3], alpha: f64) -> Vec<([f64; 3], f64)> {
    match dim {
        1 => vec![(axis, 1.0)],
        2 => {
            let th = axis[1].atan2(axis[0]);
            gauss_legendre(2 * order, th - alpha, th + alpha)
                .into_iter()
                .map(|(t, w)| ([t.cos(), t.sin(), 0.0], w))
                .collect()
        }
        3 => {
            let k = (0..3)
                .min_by(|&i, &j| axis[i].abs().partial_cmp(&axis[j].abs()).unwrap())
                .unwrap();
            let mut e = [0.0; 3];
            e[k] = 1.0;
            let cross = |p: [f64; 3], q: [f64; 3]| {
                [
                    p[1] * q[2] - p[2] * q[1],
                    p[2] * q[0] - p[0] * q[2],
                    p[0] * q[1] - p[1] * q[0],
                ]
            };
            let a = cross(axis, e);
            let na = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            let a = [a[0] / na, a[1] / na, a[2] / na];
            let b = cross(axis, a);
            let m = 2 * order;
            let dphi = std::f64::consts::TAU / m as f64;
            let mut out = Vec::with_capacity(order * m);
            for (c, wc) in gauss_legendre(order, alpha.cos(), 1.0) {
                let s = (1.0 - c * c).max(0.0).sqrt();
                for j in 0..m {
                    let phi = dphi * j as f64;
                    let (p, q) = (s * phi.cos(), s * phi.sin());
                    let d = [
                        p * a[0] + q * b[0] + c * axis[0],
                        p * a[1] + q * b[1] + c * axis[1],
                        p * a[2] + q * b[2] + c * axis[2],
                    ];
                    out.push((d, wc * dphi));
                }
            }
            out
        }
        _ => panic!("dimension {dim} unsupported"),
    }
}

/// Unnormalised bump `exp(-1 / (1 - r^2))` on the unit ball.
#[inline]
pub fn bump(r2: f64) -> f64 {
    if r2 >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r2)).exp()
    }
}

/// Radial nodes per unit of quadrature order. The bump is flat to all orders
/// at the rim, which slows Gauss-Legendre convergence.
pub const RADIAL_FACTOR: usize = 4;

/// Points of the unit ball with weights `eta(w) dw`, normalised to unit mass.
pub fn mollifier_rule(dim: usize, order: usize) -> Vec<([f64; 3], f64)> {
    let radial = gauss_legendre(RADIAL_FACTOR * order, 0.0, 1.0);
    let dirs = sphere_rule(dim, order);
    let mut out = Vec::with_capacity(radial.len() * dirs.len());
    for &(r, wr) in &radial {
        let radial_weight = wr * r.powi(dim as i32 - 1) * bump(r * r);
        for &(d, wd) in &dirs {
            out.push(([r * d[0], r * d[1], r * d[2]], radial_weight * wd));
        }
    }
    let mass: f64 = out.iter().map(|p| p.1).sum();
    for p in &mut out {
        p.1 /= mass;
    }
    out
}

/// High-accuracy mass of the unnormalised bump on the unit ball in `dim` dimensions.
pub fn bump_mass(dim: usize) -> f64 {
    let sphere = match dim {
        1 => 2.0,
        2 => std::f64::consts::TAU,
        3 => 4.0 * std::f64::consts::PI,
        _ => panic!("dimension {dim} unsupported"),
    };
    let radial = quadrature::double_exponential::integrate(
        |r| r.powi(dim as i32 - 1) * bump(r * r),
        0.0,
        1.0,
        1e-15,
    );
    sphere * radial.integral
}
