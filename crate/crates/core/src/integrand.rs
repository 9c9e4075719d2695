//! Anisotropic integrands `F(x, v)`, their audit, and the mollified
//! integrand `G_delta = (F^2 * eta_delta)(v) - (F^2 * eta_delta)(0)`.
//!
//! Every integrand is `F(x, v) = m(x) F0(v)` with `m` a smooth positive
//! periodic modulation and `F0` one of the autonomous families below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;
use crate::scalar::{dot, norm, zero_mat, zero_vec, Real, SmallMat, SmallVec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrandFamily {
    /// `F0(v) = |v|`
    Isotropic,
    /// `F0(v) = sqrt(v . A v)` with `A` symmetric positive definite (row-major, dim x dim).
    Quadratic(Vec<f64>),
    /// `F0(v) = (|v|^4 + beta sum_i v_i^4)^(1/4)`, `beta >= 0`.
    QuarticMixture { beta: f64 },
}

/// `m(x) = 1 + amplitude * sin(2 pi k . x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Modulation {
    pub amplitude: f64,
    pub wavevector: Vec<f64>,
}

impl Modulation {
    #[inline]
    pub fn value<T: Real>(&self, x: &[T]) -> T {
        let phase = self
            .wavevector
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (&k, &xi)| acc + T::lit(k) * xi);
        T::one() + T::lit(self.amplitude) * (T::TAU() * phase).sin()
    }

    /// Gradient of `m` at `x`.
    pub fn gradient<T: Real>(&self, x: &[T]) -> SmallVec<T> {
        let phase = self
            .wavevector
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (&k, &xi)| acc + T::lit(k) * xi);
        let c = T::lit(self.amplitude) * T::TAU() * (T::TAU() * phase).cos();
        let mut g = zero_vec();
        for (a, &k) in self.wavevector.iter().enumerate().take(3) {
            g[a] = c * T::lit(k);
        }
        g
    }
}

/// `F^2` (or `G_delta`) with its gradient and, when defined, its Hessian in `v`.
#[derive(Clone, Copy, Debug)]
pub struct SquareEval<T> {
    pub value: T,
    pub grad: SmallVec<T>,
    pub hess: Option<SmallMat<T>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrandSpec {
    pub family: IntegrandFamily,
    pub dim: usize,
    pub modulation: Option<Modulation>,
}

impl IntegrandSpec {
    pub fn isotropic(dim: usize) -> Self {
        Self {
            family: IntegrandFamily::Isotropic,
            dim,
            modulation: None,
        }
    }

    pub fn quadratic(dim: usize, matrix: Vec<f64>) -> Result<Self> {
        let spec = Self {
            family: IntegrandFamily::Quadratic(matrix),
            dim,
            modulation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            m[i * n + i] = d;
        }
        Self::quadratic(n, m)
    }

    pub fn quartic_mixture(dim: usize, beta: f64) -> Result<Self> {
        let spec = Self {
            family: IntegrandFamily::QuarticMixture { beta },
            dim,
            modulation: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_modulation(mut self, amplitude: f64, wavevector: Vec<f64>) -> Result<Self> {
        self.modulation = Some(Modulation {
            amplitude,
            wavevector,
        });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidArgument(format!("dimension {} not in 1..=3", self.dim)));
        }
        match &self.family {
            IntegrandFamily::Isotropic => {}
            IntegrandFamily::Quadratic(a) => {
                let n = self.dim;
                if a.len() != n * n {
                    return Err(Error::InvalidArgument(format!(
                        "matrix needs {} entries, got {}",
                        n * n,
                        a.len()
                    )));
                }
                for i in 0..n {
                    for j in 0..n {
                        if (a[i * n + j] - a[j * n + i]).abs() > 1e-14 * (1.0 + a[i * n + j].abs()) {
                            return Err(Error::InvalidArgument("matrix is not symmetric".into()));
                        }
                    }
                }
                let m = nalgebra::DMatrix::from_row_slice(n, n, a);
                let min_eig = m.symmetric_eigenvalues().min();
                if !(min_eig > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "matrix is not positive definite (min eigenvalue {min_eig})"
                    )));
                }
            }
            IntegrandFamily::QuarticMixture { beta } => {
                if !(*beta >= 0.0) {
                    return Err(Error::InvalidArgument(format!("beta must be >= 0, got {beta}")));
                }
            }
        }
        if let Some(m) = &self.modulation {
            if !(m.amplitude.abs() < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "modulation amplitude must be in (-1, 1), got {}",
                    m.amplitude
                )));
            }
            if m.wavevector.len() != self.dim {
                return Err(Error::InvalidArgument("modulation wavevector has wrong length".into()));
            }
        }
        Ok(())
    }

    pub fn is_quadratic(&self) -> bool {
        !matches!(self.family, IntegrandFamily::QuarticMixture { .. })
    }

    pub fn is_autonomous(&self) -> bool {
        self.modulation.as_ref().is_none_or(|m| m.amplitude == 0.0)
    }

    #[inline]
    pub fn modulation_at<T: Real>(&self, x: &[T]) -> T {
        match &self.modulation {
            None => T::one(),
            Some(m) => m.value(x),
        }
    }

    /// Autonomous `F0^2` with derivatives; the Hessian is `None` only at the
    /// origin of a non-quadratic family.
    #[inline]
    pub fn f0_square<T: Real>(&self, v: &[T]) -> SquareEval<T> {
        let n = self.dim;
        let two = T::lit(2.0);
        match &self.family {
            IntegrandFamily::Isotropic => {
                let mut grad = zero_vec();
                let mut hess = zero_mat();
                for a in 0..n {
                    grad[a] = two * v[a];
                    hess[a][a] = two;
                }
                SquareEval {
                    value: dot(&v[..n], &v[..n]),
                    grad,
                    hess: Some(hess),
                }
            }
            IntegrandFamily::Quadratic(a) => {
                let mut grad = zero_vec();
                let mut hess = zero_mat();
                let mut value = T::zero();
                for i in 0..n {
                    let mut av = T::zero();
                    for j in 0..n {
                        let aij = T::lit(a[i * n + j]);
                        av += aij * v[j];
                        hess[i][j] = two * aij;
                    }
                    grad[i] = two * av;
                    value += v[i] * av;
                }
                SquareEval {
                    value,
                    grad,
                    hess: Some(hess),
                }
            }
            IntegrandFamily::QuarticMixture { beta } => {
                let beta = T::lit(*beta);
                let q = dot(&v[..n], &v[..n]);
                if q == T::zero() {
                    return SquareEval {
                        value: T::zero(),
                        grad: zero_vec(),
                        hess: None,
                    };
                }
                let mut s = q * q;
                let mut ds = zero_vec();
                let four = T::lit(4.0);
                for a in 0..n {
                    let v2 = v[a] * v[a];
                    s += beta * v2 * v2;
                    ds[a] = four * q * v[a] + four * beta * v2 * v[a];
                }
                let root = s.sqrt();
                let mut grad = zero_vec();
                for a in 0..n {
                    grad[a] = ds[a] / (two * root);
                }
                let mut hess = zero_mat();
                let eight = T::lit(8.0);
                let twelve = T::lit(12.0);
                let s32 = T::lit(4.0) * s * root;
                for i in 0..n {
                    for j in 0..n {
                        let mut d2s = eight * v[i] * v[j];
                        if i == j {
                            d2s += four * q + twelve * beta * v[i] * v[i];
                        }
                        hess[i][j] = d2s / (two * root) - ds[i] * ds[j] / s32;
                    }
                }
                SquareEval {
                    value: root,
                    grad,
                    hess: Some(hess),
                }
            }
        }
    }

    /// `F0(v)`.
    #[inline]
    pub fn f0<T: Real>(&self, v: &[T]) -> T {
        self.f0_square(v).value.max(T::zero()).sqrt()
    }

    /// `F(x, v)` with `D(F^2)` and, where defined, `D^2(F^2)`.
    pub fn f_eval<T: Real>(&self, x: &[T], v: &[T]) -> Result<(T, SquareEval<T>)> {
        if v[..self.dim].iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("integrand argument"));
        }
        let m = self.modulation_at(x);
        let mut e = self.f0_square(v);
        let m2 = m * m;
        e.value *= m2;
        for a in 0..self.dim {
            e.grad[a] *= m2;
        }
        if let Some(h) = e.hess.as_mut() {
            for row in h.iter_mut() {
                for c in row.iter_mut() {
                    *c *= m2;
                }
            }
        }
        Ok((e.value.max(T::zero()).sqrt(), e))
    }

    /// `F(x, v)` and its gradient `DF(x, v)` for `v != 0`.
    pub fn f_and_df<T: Real>(&self, x: &[T], v: &[T]) -> (T, SmallVec<T>) {
        let m = self.modulation_at(x);
        let e = self.f0_square(v);
        let f0 = e.value.max(T::zero()).sqrt();
        let mut df = zero_vec();
        if f0 > T::zero() {
            for a in 0..self.dim {
                df[a] = m * e.grad[a] / (T::lit(2.0) * f0);
            }
        }
        (m * f0, df)
    }

    /// `D^2 F0(v)` for `v != 0`, from `D^2(F0^2) = 2 DF0 (x) DF0 + 2 F0 D^2 F0`.
    pub fn f0_hessian<T: Real>(&self, v: &[T]) -> Option<SmallMat<T>> {
        let e = self.f0_square(v);
        let f0 = e.value.max(T::zero()).sqrt();
        if f0 <= T::zero() {
            return None;
        }
        let h2 = e.hess?;
        let two = T::lit(2.0);
        let mut out = zero_mat();
        for i in 0..self.dim {
            for j in 0..self.dim {
                let dfi = e.grad[i] / (two * f0);
                let dfj = e.grad[j] / (two * f0);
                out[i][j] = (h2[i][j] - two * dfi * dfj) / (two * f0);
            }
        }
        Some(out)
    }
}

/// Checked `F`, `DF^2` and (optionally) `D^2 F^2`.
pub fn f_eval<T: Real>(
    spec: &IntegrandSpec,
    x: &[T],
    v: &[T],
    want_hessian: bool,
) -> Result<(T, SquareEval<T>)> {
    let out = spec.f_eval(x, v)?;
    if want_hessian && out.1.hess.is_none() {
        return Err(Error::HessianAtOrigin);
    }
    Ok(out)
}

/// Smooth integrand `G_delta` built by convolution with the radial bump.
#[derive(Clone, Debug)]
pub struct MollifiedIntegrand {
    spec: IntegrandSpec,
    delta: f64,
    quad_order: usize,
    /// Points of the unit ball with normalised `eta` weights.
    rule: Vec<([f64; 3], f64)>,
    /// `(F0^2 * eta_1)(0)`.
    origin_offset: f64,
    /// Directions and radial nodes for the kink-centred rule.
    dirs: Vec<([f64; 3], f64)>,
    radial: Vec<(f64, f64)>,
    bump_mass: f64,
    /// `(F0^2 * eta_1)(0)` as computed by the kink-centred rule.
    kink_offset: f64,
}

/// Minimum accepted quadrature order per axis.
pub const MIN_QUAD_ORDER: usize = 4;
/// Default quadrature order per axis.
pub const DEFAULT_QUAD_ORDER: usize = 12;

pub fn mollify(spec: &IntegrandSpec, delta: f64, quad_order: usize) -> Result<MollifiedIntegrand> {
    spec.validate()?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if quad_order < MIN_QUAD_ORDER {
        return Err(Error::InvalidArgument(format!(
            "quadrature order {quad_order} below the minimum {MIN_QUAD_ORDER}"
        )));
    }
    let rule = quadrature::mollifier_rule(spec.dim, quad_order);
    let origin_offset = rule
        .iter()
        .map(|(w, a)| a * spec.f0_square(&w[..]).value)
        .sum();
    let radial = quadrature::gauss_legendre(quadrature::RADIAL_FACTOR * quad_order, 0.0, 1.0);
    let dirs = quadrature::sphere_rule(spec.dim, 2 * quad_order);
    let mut m = MollifiedIntegrand {
        spec: spec.clone(),
        delta,
        quad_order,
        rule,
        origin_offset,
        dirs,
        radial,
        bump_mass: quadrature::bump_mass(spec.dim),
        kink_offset: 0.0,
    };
    m.kink_offset = m.kink_moments(&[0.0; 3]).0;
    Ok(m)
}

impl MollifiedIntegrand {
    pub fn spec(&self) -> &IntegrandSpec {
        &self.spec
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// Autonomous `G_delta` (without modulation). Quadratic families are exact
    /// under mollification and use the closed form.
    #[inline]
    pub fn g0<T: Real>(&self, v: &[T]) -> SquareEval<T> {
        if self.spec.is_quadratic() {
            return self.spec.f0_square(v);
        }
        self.g0_quadrature(v)
    }

    /// Autonomous `G_delta` by quadrature, for any family.
    pub fn g0_quadrature<T: Real>(&self, v: &[T]) -> SquareEval<T> {
        let n = self.spec.dim;
        let d = T::lit(self.delta);
        let r = norm(&v[..n]);
        if r <= T::lit(2.0) * d {
            // G_delta(v) = delta^2 G_1(v / delta)
            let mut y = zero_vec();
            for a in 0..n {
                y[a] = v[a] / d;
            }
            let g1 = self.g1_kink_centred(&y);
            let mut out = g1;
            out.value = g1.value * d * d;
            for a in 0..n {
                out.grad[a] = g1.grad[a] * d;
            }
            return out;
        }
        let mut value = T::zero();
        let mut grad: SmallVec<T> = zero_vec();
        let mut hess: SmallMat<T> = zero_mat();
        let mut z = zero_vec();
        for (w, weight) in &self.rule {
            for a in 0..n {
                z[a] = v[a] - d * T::lit(w[a]);
            }
            let e = self.spec.f0_square(&z);
            let wt = T::lit(*weight);
            value += wt * e.value;
            let h = e.hess.unwrap_or_else(zero_mat);
            for i in 0..n {
                grad[i] += wt * e.grad[i];
                for j in 0..n {
                    hess[i][j] += wt * h[i][j];
                }
            }
        }
        SquareEval {
            value: value - d * d * T::lit(self.origin_offset),
            grad,
            hess: Some(hess),
        }
    }

    /// `G_1(y) = int F0^2(z) eta(y - z) dz - offset` in polar coordinates centred
    /// at the kink `z = 0`, where `F0^2` is smooth along rays.
    fn g1_kink_centred<T: Real>(&self, y: &[T]) -> SquareEval<T> {
        let n = self.spec.dim;
        let mut yf = [0.0; 3];
        for a in 0..n {
            yf[a] = y[a].to_f64_lossy();
        }
        let (value, grad, hess) = self.kink_moments(&yf);
        let mut g = zero_vec();
        let mut h = zero_mat();
        for i in 0..n {
            g[i] = T::lit(grad[i]);
            for j in 0..n {
                h[i][j] = T::lit(hess[i][j]);
            }
        }
        SquareEval {
            value: T::lit(value - self.kink_offset),
            grad: g,
            hess: Some(h),
        }
    }

    fn kink_moments(&self, y: &[f64; 3]) -> (f64, [f64; 3], [[f64; 3]; 3]) {
        let n = self.spec.dim;
        let y2: f64 = y.iter().map(|c| c * c).sum();
        let cone;
        let dirs = if y2 > 1.0 {
            // The kink lies outside the support: integrate over the cone of rays that meet it.
            let r = y2.sqrt();
            let axis = [y[0] / r, y[1] / r, y[2] / r];
            // The ray integral vanishes to all orders at the cone edge, like the bump at its rim.
            cone = quadrature::cone_rule(n, quadrature::RADIAL_FACTOR * self.quad_order, axis, (1.0 / r).asin());
            &cone
        } else {
            &self.dirs
        };
        let mut value = 0.0;
        let mut grad = [0.0; 3];
        let mut hess = [[0.0; 3]; 3];
        for (e, wd) in dirs {
            let ye: f64 = (0..n).map(|a| y[a] * e[a]).sum();
            let disc = ye * ye - y2 + 1.0;
            if disc <= 0.0 {
                continue;
            }
            let sq = disc.sqrt();
            let (r0, r1) = ((ye - sq).max(0.0), ye + sq);
            if r1 <= r0 {
                continue;
            }
            // Along the ray, F0^2 = rho^2 F0^2(e), DF0^2 = rho DF0^2(e), D^2 F0^2 = D^2 F0^2(e).
            let fe = self.spec.f0_square(&e[..]);
            let he = fe.hess.unwrap_or([[0.0; 3]; 3]);
            let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for &(x, wx) in &self.radial {
                let rho = r0 + (r1 - r0) * x;
                let mut dist2 = 0.0;
                for a in 0..n {
                    let c = y[a] - rho * e[a];
                    dist2 += c * c;
                }
                let base = wx * (r1 - r0) * quadrature::bump(dist2) * rho.powi(n as i32 - 1);
                m0 += base;
                m1 += base * rho;
                m2 += base * rho * rho;
            }
            let scale = wd / self.bump_mass;
            value += scale * m2 * fe.value;
            for i in 0..n {
                grad[i] += scale * m1 * fe.grad[i];
                for j in 0..n {
                    hess[i][j] += scale * m0 * he[i][j];
                }
            }
        }
        (value, grad, hess)
    }

    /// `G_delta(x, v)` with derivatives in `v`.
    pub fn g_eval<T: Real>(&self, x: &[T], v: &[T]) -> Result<SquareEval<T>> {
        if v[..self.spec.dim].iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("mollified integrand argument"));
        }
        let m = self.spec.modulation_at(x);
        Ok(scale_eval(self.g0(v), m * m, self.spec.dim))
    }
}

#[inline]
pub(crate) fn scale_eval<T: Real>(mut e: SquareEval<T>, s: T, n: usize) -> SquareEval<T> {
    e.value *= s;
    for a in 0..n {
        e.grad[a] *= s;
    }
    if let Some(h) = e.hess.as_mut() {
        for row in h.iter_mut().take(n) {
            for c in row.iter_mut().take(n) {
                *c *= s;
            }
        }
    }
    e
}

/// Sampled ellipticity constants and structural residuals of an integrand.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntegrandAudit {
    /// `lambda` in `lambda |v| <= F <= |v| / lambda` and in the directional convexity bound.
    pub lambda: f64,
    /// Half the smallest eigenvalue of `D^2(F^2)`, capped at 1.
    pub lambda_prime: f64,
    pub evenness_residual: f64,
    pub homogeneity_residual: f64,
    pub samples: usize,
    pub seed: u64,
    pub violations: Vec<String>,
}

impl IntegrandAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn ensure(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::AuditFailed {
                clause: v.clone(),
                location: "see audit report".into(),
            }),
        }
    }
}

fn unit_directions(dim: usize, dense: usize) -> Vec<[f64; 3]> {
    match dim {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => (0..dense)
            .map(|i| {
                let t = std::f64::consts::PI * i as f64 / dense as f64;
                [t.cos(), t.sin(), 0.0]
            })
            .collect(),
        _ => {
            // Fibonacci points on the upper hemisphere (F is even).
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..dense)
                .map(|i| {
                    let z = 1.0 - (i as f64 + 0.5) / dense as f64;
                    let r = (1.0 - z * z).sqrt();
                    let th = golden * i as f64;
                    [r * th.cos(), r * th.sin(), z]
                })
                .collect()
        }
    }
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> [f64; 3] {
    loop {
        let mut v = [0.0; 3];
        for c in v.iter_mut().take(dim) {
            *c = rng.gen_range(-1.0..1.0);
        }
        let r = norm(&v[..dim]);
        if r > 1e-3 && r <= 1.0 {
            for c in v.iter_mut() {
                *c /= r;
            }
            return v;
        }
    }
}

/// Smallest eigenvalue of the leading `n x n` block.
fn min_eigenvalue(h: &SmallMat<f64>, n: usize) -> f64 {
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (h[i][j] + h[j][i]));
    m.symmetric_eigenvalues().min()
}

/// Minimum of `D^2 F0(v)[w, w]` over unit `w` orthogonal to the unit vector `v`.
fn tangential_curvature(spec: &IntegrandSpec, v: &[f64; 3]) -> f64 {
    let n = spec.dim;
    if n == 1 {
        return f64::INFINITY;
    }
    let h = spec.f0_hessian(&v[..]).expect("v != 0");
    // Project onto the orthogonal complement and take the smallest eigenvalue there.
    let p = nalgebra::DMatrix::from_fn(n, n, |i, j| (if i == j { 1.0 } else { 0.0 }) - v[i] * v[j]);
    let hm = nalgebra::DMatrix::from_fn(n, n, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let ph = &p * hm * &p;
    // The projected matrix has v in its kernel; discard that eigenvalue.
    let eig = ph.symmetric_eigen();
    let mut vals: Vec<(f64, f64)> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| {
            let col = eig.eigenvectors.column(k);
            let overlap: f64 = (0..n).map(|i| col[i] * v[i]).sum::<f64>().abs();
            (overlap, l)
        })
        .collect();
    vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    vals[..n - 1].iter().map(|p| p.1).fold(f64::INFINITY, f64::min)
}

/// Randomised (seeded) audit supplemented by a dense scan of the unit sphere.
pub fn audit_integrand(spec: &IntegrandSpec, samples: usize, seed: u64) -> IntegrandAudit {
    let n = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = Vec::new();
    if let Err(e) = spec.validate() {
        violations.push(e.to_string());
    }

    let mut dirs = unit_directions(n, 3600);
    for _ in 0..samples {
        dirs.push(random_unit(&mut rng, n));
    }
    // Refine 2D extrema by golden-section search in the angle.
    let (mut f_min, mut f_max) = (f64::INFINITY, 0.0_f64);
    let mut cvx_min = f64::INFINITY;
    let mut sq_min = f64::INFINITY;
    for v in &dirs {
        let f = spec.f0(&v[..]);
        f_min = f_min.min(f);
        f_max = f_max.max(f);
        cvx_min = cvx_min.min(tangential_curvature(spec, v));
        let h = spec.f0_square(&v[..]).hess.expect("v != 0");
        sq_min = sq_min.min(0.5 * min_eigenvalue(&h, n));
    }
    if n == 2 {
        let angle = |t: f64| [t.cos(), t.sin(), 0.0];
        let refine = |g: &dyn Fn(f64) -> f64| -> f64 {
            let m = 3600;
            let (mut best, mut arg) = (f64::INFINITY, 0.0);
            for i in 0..m {
                let t = std::f64::consts::PI * i as f64 / m as f64;
                let val = g(t);
                if val < best {
                    best = val;
                    arg = t;
                }
            }
            let step = std::f64::consts::PI / m as f64;
            let (mut a, mut b) = (arg - step, arg + step);
            let phi = 0.5 * (5f64.sqrt() - 1.0);
            for _ in 0..80 {
                let c = b - phi * (b - a);
                let d = a + phi * (b - a);
                if g(c) < g(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            best.min(g(0.5 * (a + b)))
        };
        f_min = f_min.min(refine(&|t| spec.f0(&angle(t)[..])));
        f_max = f_max.max(-refine(&|t| -spec.f0(&angle(t)[..])));
        cvx_min = cvx_min.min(refine(&|t| tangential_curvature(spec, &angle(t))));
        sq_min = sq_min.min(refine(&|t| {
            0.5 * min_eigenvalue(&spec.f0_square(&angle(t)[..]).hess.unwrap(), 2)
        }));
    }

    let (m_lo, m_hi) = match &spec.modulation {
        None => (1.0, 1.0),
        Some(m) => (1.0 - m.amplitude.abs(), 1.0 + m.amplitude.abs()),
    };
    let bound_lambda = (f_min * m_lo).min(1.0 / (f_max * m_hi));
    let lambda = bound_lambda.min(cvx_min * m_lo).min(1.0);
    let lambda_prime = (sq_min * m_lo * m_lo).min(1.0);

    // Random structural residuals at random points of the unit torus.
    let mut evenness_residual: f64 = 0.0;
    let mut homogeneity_residual: f64 = 0.0;
    for _ in 0..samples {
        let mut x = [0.0; 3];
        for c in x.iter_mut().take(n) {
            *c = rng.gen_range(0.0..1.0);
        }
        let mut v = random_unit(&mut rng, n);
        let scale: f64 = rng.gen_range(0.1..10.0);
        for c in v.iter_mut() {
            *c *= scale;
        }
        let tau: f64 = rng.gen_range(0.0..5.0);
        let f = spec.f_eval(&x[..n], &v[..]).map(|p| p.0).unwrap_or(f64::NAN);
        let neg = [-v[0], -v[1], -v[2]];
        let fneg = spec.f_eval(&x[..n], &neg[..]).map(|p| p.0).unwrap_or(f64::NAN);
        let tv = [tau * v[0], tau * v[1], tau * v[2]];
        let ft = spec.f_eval(&x[..n], &tv[..]).map(|p| p.0).unwrap_or(f64::NAN);
        let vn = norm(&v[..n]);
        evenness_residual = evenness_residual.max((f - fneg).abs() / vn);
        let h = (ft - tau * f).abs() / ((1.0 + tau) * vn);
        homogeneity_residual = homogeneity_residual.max(h);
        if !(f > 0.0) {
            violations.push(format!("F(x, v) > 0 for v != 0: witness x = {x:?}, v = {v:?}"));
        }
    }
    if !(lambda > 0.0) {
        violations.push(format!("uniform convexity/bound: lambda estimate {lambda:e} <= 0"));
    }
    if !(lambda_prime > 0.0) {
        violations.push(format!("convexity of F^2: lambda' estimate {lambda_prime:e} <= 0"));
    }
    if evenness_residual > 1e-12 {
        violations.push(format!("evenness F(x, -v) = F(x, v): residual {evenness_residual:e}"));
    }
    if homogeneity_residual > 1e-12 {
        violations.push(format!("1-homogeneity: residual {homogeneity_residual:e}"));
    }
    IntegrandAudit {
        lambda,
        lambda_prime,
        evenness_residual,
        homogeneity_residual,
        samples,
        seed,
        violations,
    }
}
