//! Double-well potentials, their structural audit, the transition cost `c_W`
//! and the one-dimensional heteroclinic profile.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Abscissa where every built-in well is glued to its quadratic-growth tail.
pub const GLUE_POINT: f64 = 1.5;

/// Closed-form switch threshold for the heteroclinic integrator.
const TAIL_SWITCH: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PotentialFamily {
    /// `(1 - s^2)^2 / 4`
    Quartic,
    /// `1 + cos(pi s)`
    Cosine,
    /// Polynomial `sum_k c_k s^k` on `[-1.5, 1.5]`.
    Custom(Vec<f64>),
}

/// A double-well potential with wells at `+-1`.
///
/// On `|s| <= 1.5` the family formula is used as is. Outside, the well is
/// continued by its second-order Taylor polynomial at `+-1.5` plus the term
/// `t^3 / (1 + t)` (`t = |s| - 1.5`), which is C^2 at the junction and grows
/// quadratically even when the family has zero curvature at the glue point.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    family: PotentialFamily,
    cw: OnceLock<f64>,
}

impl PartialEq for PotentialSpec {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
    }
}

impl PotentialSpec {
    pub fn new(family: PotentialFamily) -> Self {
        Self {
            family,
            cw: OnceLock::new(),
        }
    }

    pub fn quartic() -> Self {
        Self::new(PotentialFamily::Quartic)
    }

    pub fn cosine() -> Self {
        Self::new(PotentialFamily::Cosine)
    }

    pub fn custom(coefficients: Vec<f64>) -> Self {
        Self::new(PotentialFamily::Custom(coefficients))
    }

    pub fn family(&self) -> &PotentialFamily {
        &self.family
    }

    /// `(W, W', W'')` of the family formula, without the tail continuation.
    fn core<T: Real>(&self, s: T) -> (T, T, T) {
        match &self.family {
            PotentialFamily::Quartic => {
                let a = T::one() - s * s;
                let quarter = T::lit(0.25);
                (quarter * a * a, s * s * s - s, T::lit(3.0) * s * s - T::one())
            }
            PotentialFamily::Cosine => {
                let pi = T::PI();
                let (sn, cs) = (pi * s).sin_cos();
                (T::one() + cs, -pi * sn, -pi * pi * cs)
            }
            PotentialFamily::Custom(c) => {
                // Horner for the value and its first two derivatives.
                let (mut w, mut dw, mut d2w) = (T::zero(), T::zero(), T::zero());
                for &ck in c.iter().rev() {
                    d2w = d2w * s + dw + dw;
                    dw = dw * s + w;
                    w = w * s + T::lit(ck);
                }
                (w, dw, d2w)
            }
        }
    }

    /// `(W, W', W'')` at `s`.
    #[inline]
    pub fn eval<T: Real>(&self, s: T) -> (T, T, T) {
        let glue = T::lit(GLUE_POINT);
        if s.abs() <= glue {
            return self.core(s);
        }
        let sigma = s.signum();
        let s0 = sigma * glue;
        let (w0, dw0, d2w0) = self.core(s0);
        let d = s - s0;
        let t = s.abs() - glue;
        let one = T::one();
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        let opt = one + t;
        let grow = t * t * t / opt;
        let dgrow = sigma * (two * t * t * t + three * t * t) / (opt * opt);
        let d2grow = (two * t * t * t + six * t * t + six * t) / (opt * opt * opt);
        (
            w0 + dw0 * d + d2w0 * d * d / two + grow,
            dw0 + d2w0 * d + dgrow,
            d2w0 + d2grow,
        )
    }

    #[inline]
    pub fn w<T: Real>(&self, s: T) -> T {
        self.eval(s).0
    }

    #[inline]
    pub fn dw<T: Real>(&self, s: T) -> T {
        self.eval(s).1
    }

    #[inline]
    pub fn d2w<T: Real>(&self, s: T) -> T {
        self.eval(s).2
    }

    /// `sqrt(2 W(s))`, clamped at zero against rounding.
    #[inline]
    pub fn sqrt_2w<T: Real>(&self, s: T) -> T {
        (T::lit(2.0) * self.w(s)).max(T::zero()).sqrt()
    }

    /// Largest value of `W` on `[-1, 1]` (sampled).
    pub fn w_max(&self) -> f64 {
        (0..=4000)
            .map(|i| self.w(-1.0 + i as f64 / 2000.0))
            .fold(0.0, f64::max)
    }

    /// The transition cost `c_W`, computed once and cached.
    pub fn cw(&self) -> Result<f64> {
        if let Some(v) = self.cw.get() {
            return Ok(*v);
        }
        let v = self.integrate_sqrt_2w(-1.0, 1.0)?;
        Ok(*self.cw.get_or_init(|| v))
    }

    /// `int_a^b sqrt(2W)` by double-exponential quadrature, absolute error <= 1e-10.
    pub fn integrate_sqrt_2w(&self, a: f64, b: f64) -> Result<f64> {
        let out = quadrature::double_exponential::integrate(|s| self.sqrt_2w(s), a, b, 1e-13);
        if !out.integral.is_finite() || out.error_estimate > 1e-10 {
            return Err(Error::Quadrature(format!(
                "int sqrt(2W) on [{a}, {b}]: estimate {} with error {:e}",
                out.integral, out.error_estimate
            )));
        }
        Ok(out.integral)
    }

    /// Exponential rate of approach of the heteroclinic to `+1` (resp. `-1`).
    pub fn tail_rates(&self) -> (f64, f64) {
        (
            self.d2w(-1.0_f64).max(0.0).sqrt(),
            self.d2w(1.0_f64).max(0.0).sqrt(),
        )
    }
}

/// Checked evaluation of `(W, W', W'')`.
pub fn eval_potential<T: Real>(spec: &PotentialSpec, s: T) -> Result<(T, T, T)> {
    if !s.is_finite() {
        return Err(Error::NonFinite("potential argument"));
    }
    Ok(spec.eval(s))
}

pub fn compute_cw(spec: &PotentialSpec) -> Result<f64> {
    spec.cw()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub clause: String,
    pub location: String,
}

/// Sampled check of the structural hypotheses on `W`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PotentialAudit {
    /// Estimated `c` with `(sqrt W)'' <= -c` on the interior mesh.
    pub sqrt_concavity: f64,
    /// `min W(s)/s^2` on `|s| in [2, 10]`.
    pub growth_lower: f64,
    /// `max W(s)/s^2` on `|s| in [2, 10]`.
    pub growth_upper: f64,
    /// `max |W'(s)| / |s|` on `|s| > 1`.
    pub slope_bound: f64,
    pub curvature_at_wells: (f64, f64),
    pub min_interior_w: f64,
    pub violations: Vec<AuditViolation>,
}

impl PotentialAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn ensure(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::AuditFailed {
                clause: v.clause.clone(),
                location: v.location.clone(),
            }),
        }
    }
}

pub fn audit_potential(spec: &PotentialSpec) -> PotentialAudit {
    const EXCLUDE: f64 = 1e-3;
    const MESH: usize = 20_000;
    let mut violations = Vec::new();
    let mut flag = |clause: &str, location: String| {
        violations.push(AuditViolation {
            clause: clause.to_string(),
            location,
        })
    };

    for s in [-1.0_f64, 1.0] {
        let w = spec.w(s);
        if w.abs() > 1e-12 {
            flag("W(+-1) = 0", format!("s = {s}, W = {w:e}"));
        }
    }
    let curv = (spec.d2w(-1.0_f64), spec.d2w(1.0_f64));
    if !(curv.0 > 0.0) {
        flag("W''(+-1) > 0", format!("s = -1, W'' = {:e}", curv.0));
    }
    if !(curv.1 > 0.0) {
        flag("W''(+-1) > 0", format!("s = 1, W'' = {:e}", curv.1));
    }

    // Interior of (-1, 1): positivity and strict concavity of sqrt(W).
    let mut worst_concavity = f64::NEG_INFINITY;
    let mut min_interior_w = f64::INFINITY;
    let span = 2.0 - 2.0 * EXCLUDE;
    for i in 0..=MESH {
        let s = -1.0 + EXCLUDE + span * i as f64 / MESH as f64;
        let (w, dw, d2w) = spec.eval(s);
        min_interior_w = min_interior_w.min(w);
        if !(w > 0.0) {
            flag("W > 0 off the wells", format!("s = {s}, W = {w:e}"));
            continue;
        }
        let sq = w.sqrt();
        let second = d2w / (2.0 * sq) - dw * dw / (4.0 * w * sq);
        worst_concavity = worst_concavity.max(second);
    }
    let sqrt_concavity = -worst_concavity;
    if !(sqrt_concavity > 0.0) {
        flag(
            "(sqrt W)'' <= -c < 0 on (-1, 1)",
            format!("max (sqrt W)'' = {worst_concavity:e}"),
        );
    }

    // Outside [-1, 1]: monotone walls with at most linear slope, quadratic growth.
    let mut slope_bound: f64 = 0.0;
    let mut growth_lower = f64::INFINITY;
    let mut growth_upper: f64 = 0.0;
    for i in 0..=MESH {
        let a = 1.0 + EXCLUDE + 9.0 * i as f64 / MESH as f64;
        for s in [-a, a] {
            let (w, dw, _) = spec.eval(s);
            if !(w > 0.0) {
                flag("W > 0 off the wells", format!("s = {s}, W = {w:e}"));
            }
            if s < 0.0 && !(dw < 0.0) {
                flag("W' < 0 on (-inf, -1)", format!("s = {s}, W' = {dw:e}"));
            }
            if s > 0.0 && !(dw > 0.0) {
                flag("W' > 0 on (1, inf)", format!("s = {s}, W' = {dw:e}"));
            }
            slope_bound = slope_bound.max(dw.abs() / a);
            if a >= 2.0 {
                growth_lower = growth_lower.min(w / (a * a));
                growth_upper = growth_upper.max(w / (a * a));
            }
        }
    }
    if !(growth_lower > 0.0) {
        flag(
            "c s^2 <= W(s) <= C s^2 for |s| >= 2",
            format!("min W/s^2 = {growth_lower:e}"),
        );
    }

    PotentialAudit {
        sqrt_concavity,
        growth_lower,
        growth_upper,
        slope_bound,
        curvature_at_wells: curv,
        min_interior_w,
        violations,
    }
}

/// Sampled one-dimensional profile with cubic Hermite interpolation and
/// exponential tails outside the sampled window.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Profile1D {
    pub t: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
    /// Tail rates `sqrt(W''(-1))`, `sqrt(W''(1))`.
    pub rates: (f64, f64),
}

impl Profile1D {
    pub fn t_max(&self) -> f64 {
        *self.t.last().expect("non-empty profile")
    }

    /// Value of the profile at an arbitrary abscissa.
    pub fn eval<T: Real>(&self, t: T) -> T {
        T::lit(self.eval_f64(t.to_f64_lossy()))
    }

    pub fn eval_f64(&self, t: f64) -> f64 {
        let n = self.t.len();
        let (t0, t1) = (self.t[0], self.t[n - 1]);
        if t >= t1 {
            let gap = 1.0 - self.u[n - 1];
            return 1.0 - gap * (-self.rates.1 * (t - t1)).exp();
        }
        if t <= t0 {
            let gap = 1.0 + self.u[0];
            return -1.0 + gap * (-self.rates.0 * (t0 - t)).exp();
        }
        let h = (t1 - t0) / (n - 1) as f64;
        let k = (((t - t0) / h).floor() as usize).min(n - 2);
        let x = (t - self.t[k]) / h;
        let (p0, p1) = (self.u[k], self.u[k + 1]);
        let (m0, m1) = (self.du[k] * h, self.du[k + 1] * h);
        let x2 = x * x;
        let x3 = x2 * x;
        (2.0 * x3 - 3.0 * x2 + 1.0) * p0
            + (x3 - 2.0 * x2 + x) * m0
            + (-2.0 * x3 + 3.0 * x2) * p1
            + (x3 - x2) * m1
    }

    /// The five-branch truncation `U_gamma`: equal to `U` on `[-gamma, gamma]`,
    /// reparametrised onto `(gamma, 2 gamma)` and constant `+-1` beyond.
    pub fn truncated(&self, gamma: f64, t: f64) -> f64 {
        if t <= -2.0 * gamma {
            -1.0
        } else if t <= -gamma {
            self.eval_f64(gamma * t / (2.0 * gamma + t))
        } else if t <= gamma {
            self.eval_f64(t)
        } else if t < 2.0 * gamma {
            self.eval_f64(gamma * t / (2.0 * gamma - t))
        } else {
            1.0
        }
    }
}

/// Checked form of [`Profile1D::truncated`].
pub fn truncated_profile(profile: &Profile1D, gamma: f64, t: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
    }
    if !t.is_finite() {
        return Err(Error::NonFinite("truncated profile abscissa"));
    }
    Ok(profile.truncated(gamma, t))
}

/// Solves `U' = sqrt(2 W(U))`, `U(0) = 0` on `n` equispaced samples of
/// `[-t_max, t_max]` with an adaptive Dormand-Prince 5(4) integrator.
pub fn heteroclinic(spec: &PotentialSpec, t_max: f64, n: usize) -> Result<Profile1D> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let rates = spec.tail_rates();
    let t: Vec<f64> = (0..n)
        .map(|i| -t_max + 2.0 * t_max * i as f64 / (n - 1) as f64)
        .collect();
    let mut u = vec![0.0; n];

    // Forward branch towards +1 over the non-negative samples, backward towards -1.
    let forward: Vec<usize> = (0..n).filter(|&i| t[i] >= 0.0).collect();
    let backward: Vec<usize> = (0..n).rev().filter(|&i| t[i] < 0.0).collect();
    for (indices, sign, rate) in [(forward, 1.0, rates.1), (backward, -1.0, rates.0)] {
        let mut y = 0.0;
        let mut s = 0.0;
        let mut tail: Option<(f64, f64)> = None;
        let mut step = 1e-3;
        for i in indices {
            let target = (t[i]).abs();
            if let Some((s0, g0)) = tail {
                u[i] = sign * (1.0 - g0 * (-rate * (target - s0)).exp());
                continue;
            }
            let rhs = |y: f64| sign * spec.sqrt_2w(y);
            let reached = integrate_to(&rhs, &mut y, &mut s, target, &mut step, |y| {
                1.0 - y.abs() < TAIL_SWITCH
            })?;
            if !reached {
                tail = Some((s, 1.0 - y.abs()));
                u[i] = sign * (1.0 - (1.0 - y.abs()) * (-rate * (target - s)).exp());
            } else {
                u[i] = y;
            }
        }
    }
    let du = u.iter().map(|&y| spec.sqrt_2w(y)).collect();
    Ok(Profile1D { t, u, du, rates })
}

/// Adaptive DP5(4) from `s` to `target`. Returns `Ok(false)` if `stop(y)` fired first.
fn integrate_to(
    f: &impl Fn(f64) -> f64,
    y: &mut f64,
    s: &mut f64,
    target: f64,
    step: &mut f64,
    stop: impl Fn(f64) -> bool,
) -> Result<bool> {
    const RTOL: f64 = 1e-13;
    const ATOL: f64 = 1e-15;
    const MAX_STEPS: usize = 1_000_000;
    let mut steps = 0;
    while *s < target {
        if stop(*y) {
            return Ok(false);
        }
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::StepControl {
                t: *s,
                reason: "step budget exhausted".into(),
            });
        }
        let h = step.min(target - *s);
        let (y5, err) = dp45_step(f, *y, h);
        let scale = ATOL + RTOL * y.abs().max(y5.abs());
        let ratio = err / scale;
        if ratio <= 1.0 {
            *y = y5;
            *s += h;
            let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).min(5.0) };
            if h == *step {
                *step *= grow;
            }
        } else {
            *step = h * (0.9 * ratio.powf(-0.2)).max(0.1);
            if *step < 1e-14 {
                return Err(Error::StepControl {
                    t: *s,
                    reason: format!("step underflow (error ratio {ratio:e})"),
                });
            }
        }
    }
    Ok(true)
}

fn dp45_step(f: &impl Fn(f64) -> f64, y: f64, h: f64) -> (f64, f64) {
    let k1 = f(y);
    let k2 = f(y + h * (k1 / 5.0));
    let k3 = f(y + h * (3.0 / 40.0 * k1 + 9.0 / 40.0 * k2));
    let k4 = f(y + h * (44.0 / 45.0 * k1 - 56.0 / 15.0 * k2 + 32.0 / 9.0 * k3));
    let k5 = f(y + h
        * (19372.0 / 6561.0 * k1 - 25360.0 / 2187.0 * k2 + 64448.0 / 6561.0 * k3
            - 212.0 / 729.0 * k4));
    let k6 = f(y + h
        * (9017.0 / 3168.0 * k1 - 355.0 / 33.0 * k2 + 46732.0 / 5247.0 * k3 + 49.0 / 176.0 * k4
            - 5103.0 / 18656.0 * k5));
    let y5 = y + h
        * (35.0 / 384.0 * k1 + 500.0 / 1113.0 * k3 + 125.0 / 192.0 * k4 - 2187.0 / 6784.0 * k5
            + 11.0 / 84.0 * k6);
    let k7 = f(y5);
    let y4 = y + h
        * (5179.0 / 57600.0 * k1 + 7571.0 / 16695.0 * k3 + 393.0 / 640.0 * k4
            - 92097.0 / 339200.0 * k5
            + 187.0 / 2100.0 * k6
            + 1.0 / 40.0 * k7);
    (y5, (y5 - y4).abs())
}
