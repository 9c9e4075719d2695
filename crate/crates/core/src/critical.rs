//! Critical points of the discrete energy: residuals, descent, Newton
//! refinement and Hessian spectra.

use serde::{Deserialize, Serialize};

use crate::domain::ScalarField;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::linalg::{lanczos, minres, pcg, Extreme, Space};
use crate::precond::FftPreconditioner;
use crate::scalar::Real;

/// Eigenvalues below `-MORSE_THRESHOLD / eps` count towards the Morse index.
pub const MORSE_THRESHOLD: f64 = 1e-6;
/// Relative residual `||Hv - lambda v|| / ||H||` required of a reported eigenpair.
pub const EIGEN_CERTIFICATE: f64 = 1e-6;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CriticalReport {
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub energy: f64,
    pub eigenvalues: Vec<f64>,
    pub eigen_residuals: Vec<f64>,
    pub hessian_norm_estimate: f64,
    pub morse_index: Option<usize>,
    /// `max |u| - 1`.
    pub overshoot: f64,
    pub iterations: usize,
    /// Residual sup-norm after each Newton iteration.
    pub history: Vec<f64>,
    pub converged: bool,
}

/// Euler-Lagrange residual: the per-volume energy gradient.
pub fn el_residual<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> ScalarField<T> {
    p.grad_energy(u)
}

fn sup<T: Real>(v: &[T]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.to_f64_lossy().abs()))
}

pub fn overshoot<T: Real>(u: &[T]) -> f64 {
    sup(u) - 1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowOptions {
    pub dt: f64,
    pub steps: usize,
    pub tol: f64,
    /// Descend along `-P^{-1} grad E` with the Fourier preconditioner.
    pub preconditioned: bool,
    pub max_backtracks: usize,
}

impl FlowOptions {
    /// Plain gradient flow starting at the explicit stability scale `eps h^2 / 4`.
    pub fn explicit<T: Real>(p: &EnergyParams<T>, steps: usize, tol: f64) -> Self {
        let h = p.domain().grid().spacing().iter().cloned().fold(f64::INFINITY, f64::min);
        Self {
            dt: p.eps().to_f64_lossy() * h * h / 4.0,
            steps,
            tol,
            preconditioned: false,
            max_backtracks: 40,
        }
    }

    /// Preconditioned flow, for which a unit step is Newton's step at the wells.
    pub fn preconditioned(steps: usize, tol: f64) -> Self {
        Self {
            dt: 1.0,
            steps,
            tol,
            preconditioned: true,
            max_backtracks: 40,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowStep {
    pub step: usize,
    pub energy: f64,
    pub residual_sup: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrace {
    pub steps: Vec<FlowStep>,
    pub converged: bool,
}

/// Descent with Armijo backtracking on the discrete energy; every accepted
/// step lowers the energy.
pub fn gradient_flow<T: Real>(
    u0: &ScalarField<T>,
    p: &EnergyParams<T>,
    opts: &FlowOptions,
) -> Result<(ScalarField<T>, FlowTrace)> {
    let n = u0.len();
    let space = Space::new(p.domain().metric().omega());
    let pc = opts.preconditioned.then(|| FftPreconditioner::new(p, T::zero()));
    let mut u = u0.data.clone();
    let mut g = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut trial = vec![T::zero(); n];
    let mut e = p.grad_slice(&u, &mut g);
    let mut dt = opts.dt;
    let mut trace = FlowTrace {
        steps: vec![FlowStep {
            step: 0,
            energy: e.to_f64_lossy(),
            residual_sup: sup(&g),
            dt,
        }],
        converged: false,
    };
    for step in 1..=opts.steps {
        if sup(&g) < opts.tol {
            trace.converged = true;
            break;
        }
        match &pc {
            Some(pc) => pc.apply(&g, &mut d),
            None => d.copy_from_slice(&g),
        }
        let slope = space.dot(&g, &d);
        let mut accepted = false;
        for _ in 0..opts.max_backtracks {
            let a = T::lit(dt);
            for i in 0..n {
                trial[i] = u[i] - a * d[i];
            }
            let et = p.energy_slice(&trial);
            if et <= e - T::lit(1e-4) * a * slope && et.is_finite() {
                accepted = true;
                break;
            }
            dt *= 0.5;
        }
        if !accepted {
            // Stationary to rounding: the energy can no longer resolve a decrease.
            if sup(&g) < opts.tol.max(1e-6) {
                trace.converged = true;
                break;
            }
            return Err(Error::LineSearch {
                backtracks: opts.max_backtracks,
            });
        }
        std::mem::swap(&mut u, &mut trial);
        e = p.grad_slice(&u, &mut g);
        trace.steps.push(FlowStep {
            step,
            energy: e.to_f64_lossy(),
            residual_sup: sup(&g),
            dt,
        });
        dt *= 1.5;
    }
    if sup(&g) < opts.tol {
        trace.converged = true;
    }
    Ok((ScalarField::from_raw(u0.grid(), u), trace))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Number of eigenvalues to certify at the end (0 skips the spectrum).
    pub spectrum_k: usize,
    pub seed: u64,
    pub max_inner: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 50,
            spectrum_k: 0,
            seed: 0,
            max_inner: 2000,
        }
    }
}

/// Damped Newton on the residual norm with preconditioned MINRES inner solves,
/// falling back to a positive shift of the Hessian when the damped step stalls.
pub fn newton_refine<T: Real>(
    u0: &ScalarField<T>,
    p: &EnergyParams<T>,
    opts: &NewtonOptions,
) -> Result<(ScalarField<T>, CriticalReport)> {
    if p.delta() == 0.0 {
        return Err(Error::HessianRequiresDelta);
    }
    let n = u0.len();
    let space = Space::new(p.domain().metric().omega());
    let pc = FftPreconditioner::new(p, T::zero());
    let mut u = u0.data.clone();
    let mut g = vec![T::zero(); n];
    let mut e = p.grad_slice(&u, &mut g);
    let mut history = vec![sup(&g)];
    let mut trial = vec![T::zero(); n];
    let mut gt = vec![T::zero(); n];
    let mut iterations = 0;
    let floor = T::epsilon().to_f64_lossy() * 100.0;
    let solve = |u: &[T], g: &[T], shift: T| -> Result<Vec<T>> {
        let h = p.hessian_at(u)?;
        let rhs: Vec<T> = g.iter().map(|&x| -x).collect();
        let gnorm = space.norm(g).to_f64_lossy();
        let rtol = T::lit((0.1 * gnorm).clamp(floor.max(1e-13), 1e-3));
        let sol = minres(
            space,
            |x, o| h.apply(x, o),
            |r, z| pc.apply(r, z),
            &rhs,
            -shift,
            rtol,
            opts.max_inner,
        )?;
        Ok(sol.x)
    };
    let sufficient = |new: T, old: T, alpha: T| new < (T::one() - T::lit(1e-4) * alpha) * old;
    while sup(&g) >= opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let gnorm = space.norm(&g);
        let s = solve(&u, &g, T::zero())?;
        for i in 0..n {
            trial[i] = u[i] + s[i];
        }
        let mut et = p.grad_slice(&trial, &mut gt);
        let mut stepped = et.is_finite() && sufficient(space.norm(&gt), gnorm, T::one());
        if !stepped && et.is_finite() {
            // Near a flat direction a full step overshoots the curved valley and
            // raises the residual in stiff modes; the next full step removes it.
            let s2 = solve(&trial, &gt, T::zero())?;
            let mut second = trial.clone();
            for i in 0..n {
                second[i] += s2[i];
            }
            let mut g2 = vec![T::zero(); n];
            let e2 = p.grad_slice(&second, &mut g2);
            if e2.is_finite() && sufficient(space.norm(&g2), gnorm, T::one()) {
                history.push(sup(&gt));
                trial = second;
                gt = g2;
                et = e2;
                stepped = true;
                iterations += 1;
            }
        }
        if !stepped {
            let mut shift = T::zero();
            'attempts: for attempt in 0..8 {
                let s = if attempt == 0 { s.clone() } else { solve(&u, &g, shift)? };
                let mut alpha = if attempt == 0 { T::lit(0.5) } else { T::one() };
                for _ in 0..12 {
                    for i in 0..n {
                        trial[i] = u[i] + alpha * s[i];
                    }
                    et = p.grad_slice(&trial, &mut gt);
                    if et.is_finite() && sufficient(space.norm(&gt), gnorm, alpha) {
                        stepped = true;
                        break 'attempts;
                    }
                    alpha *= T::lit(0.5);
                }
                // Regularize: the scale of the potential term is the natural unit.
                shift = if shift == T::zero() {
                    T::one() / p.eps()
                } else {
                    shift * T::lit(4.0)
                };
            }
        }
        if !stepped {
            let r = sup(&g);
            history.push(r);
            if r < opts.tol.max(floor * 1e3) {
                break;
            }
            return Err(Error::NonConvergence {
                what: "Newton line search",
                iterations,
                residual: r,
            });
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut g, &mut gt);
        e = et;
        history.push(sup(&g));
    }
    let residual_sup = sup(&g);
    if residual_sup >= opts.tol {
        return Err(Error::NonConvergence {
            what: "Newton refinement",
            iterations,
            residual: residual_sup,
        });
    }
    let field = ScalarField::from_raw(u0.grid(), u);
    let mut report = CriticalReport {
        residual_sup,
        residual_l2: space.norm(&g).to_f64_lossy(),
        energy: e.to_f64_lossy(),
        overshoot: overshoot(&field.data),
        iterations,
        history,
        converged: true,
        ..Default::default()
    };
    if opts.spectrum_k > 0 {
        let s = spectrum(&field, p, opts.spectrum_k, opts.seed)?;
        report.attach(&s);
    }
    Ok((field, report))
}

impl CriticalReport {
    pub fn attach(&mut self, s: &Spectrum) {
        self.eigenvalues = s.values.clone();
        self.eigen_residuals = s.residuals.clone();
        self.hessian_norm_estimate = s.norm_estimate;
        self.morse_index = s.certified.then_some(s.morse_index);
    }

    /// Report for a field without refinement.
    pub fn evaluate<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>) -> Self {
        let mut g = vec![T::zero(); u.len()];
        let e = p.grad_slice(&u.data, &mut g);
        let space = Space::new(p.domain().metric().omega());
        Self {
            residual_sup: sup(&g),
            residual_l2: space.norm(&g).to_f64_lossy(),
            energy: e.to_f64_lossy(),
            overshoot: overshoot(&u.data),
            converged: false,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Spectrum {
    /// Smallest eigenvalues, ascending.
    pub values: Vec<f64>,
    /// `||H v - lambda v||` for unit `v` in the weighted norm.
    pub residuals: Vec<f64>,
    pub norm_estimate: f64,
    /// Count of values below `-MORSE_THRESHOLD / eps`.
    pub morse_index: usize,
    /// All residuals satisfy the certificate.
    pub certified: bool,
    pub lanczos_iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumMethod {
    /// Lanczos on `(H - sigma)^{-1}` with `sigma` below the spectrum.
    ShiftInvert,
    /// Lanczos on `H` itself.
    Plain,
}

/// The `k` smallest eigenvalues of the discrete Hessian at `u`.
pub fn spectrum<T: Real>(u: &ScalarField<T>, p: &EnergyParams<T>, k: usize, seed: u64) -> Result<Spectrum> {
    spectrum_with(u, p, k, seed, SpectrumMethod::ShiftInvert)
}

pub fn spectrum_with<T: Real>(
    u: &ScalarField<T>,
    p: &EnergyParams<T>,
    k: usize,
    seed: u64,
    method: SpectrumMethod,
) -> Result<Spectrum> {
    if !(1..=10).contains(&k) {
        return Err(Error::InvalidArgument(format!("k = {k} must lie in 1..=10")));
    }
    let h = p.hessian_at(&u.data)?;
    let omega = p.domain().metric().omega();
    let space = Space::new(omega);
    let n = u.len();

    let top = lanczos(space, |x, o| h.apply(x, o), 1, Extreme::Largest, 1e-3, 60, seed ^ 0x9e37)?;
    let norm_estimate = top.values[0].abs() * 1.05;

    let eps = p.eps().to_f64_lossy();
    // The gradient part is positive semidefinite, so the potential term bounds H below.
    let lower = u
        .data
        .iter()
        .map(|&s| p.potential().d2w(s).to_f64_lossy())
        .fold(f64::INFINITY, f64::min)
        / eps;
    let sigma = lower - (0.05 * lower.abs()).max(1.0);

    let mut tol: f64 = 1e-8;
    let mut last = None;
    for _round in 0..4 {
        let pairs = match method {
            SpectrumMethod::ShiftInvert => {
                let pc = FftPreconditioner::new(p, T::lit(-sigma));
                let mut failure = None;
                let inner_tol = T::lit((tol * 1e-2).max(T::epsilon().to_f64_lossy() * 100.0));
                let pairs = lanczos(
                    space,
                    |x, o| {
                        match pcg(space, |y, z| h.apply(y, z), |r, z| pc.apply(r, z), x, T::lit(sigma), inner_tol, 5000) {
                            Ok(sol) => o.copy_from_slice(&sol.x),
                            Err(e) => {
                                failure.get_or_insert(e);
                                o.iter_mut().for_each(|c| *c = T::zero());
                            }
                        }
                    },
                    k,
                    Extreme::Largest,
                    tol,
                    400.min(n),
                    seed,
                )?;
                if let Some(e) = failure {
                    return Err(e);
                }
                pairs
            }
            SpectrumMethod::Plain => lanczos(
                space,
                |x, o| h.apply(x, o),
                k,
                Extreme::Smallest,
                tol,
                3000.min(n),
                seed,
            )?,
        };
        let mut found: Vec<(f64, f64)> = pairs
            .vectors
            .iter()
            .map(|v| {
                let mut hv = vec![T::zero(); n];
                h.apply(v, &mut hv);
                let vv = space.dot(v, v);
                let lam = space.dot(&hv, v) / vv;
                let r: Vec<T> = (0..n).map(|i| hv[i] - lam * v[i]).collect();
                (lam.to_f64_lossy(), (space.norm(&r) / vv.sqrt()).to_f64_lossy())
            })
            .collect();
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let certified = found.len() == k
            && found.iter().all(|&(_, r)| r <= EIGEN_CERTIFICATE * norm_estimate);
        let morse_index = found.iter().filter(|&&(l, _)| l < -MORSE_THRESHOLD / eps).count();
        let s = Spectrum {
            values: found.iter().map(|x| x.0).collect(),
            residuals: found.iter().map(|x| x.1).collect(),
            norm_estimate,
            morse_index,
            certified,
            lanczos_iterations: pairs.iterations,
        };
        if certified {
            return Ok(s);
        }
        last = Some(s);
        tol *= 1e-2;
    }
    let s = last.expect("at least one round");
    Err(Error::NonConvergence {
        what: "Lanczos eigenpairs",
        iterations: s.lanczos_iterations,
        residual: s.residuals.iter().cloned().fold(0.0, f64::max),
    })
}
