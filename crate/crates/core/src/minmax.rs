//! Mountain-pass paths between the constants `-1` and `+1`: construction,
//! string relaxation with a climbing node, and saddle extraction.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::critical::{newton_refine, CriticalReport, NewtonOptions};
use crate::domain::ScalarField;
use crate::energy::EnergyParams;
use crate::error::{Error, Result};
use crate::linalg::Space;
use crate::potential::{heteroclinic, Profile1D};
use crate::precond::FftPreconditioner;
use crate::scalar::Real;

/// Discretised path `u_0 = -1, ..., u_{K-1} = +1` with node energies.
#[derive(Clone, Debug)]
pub struct PathOfFields<T: Real> {
    pub nodes: Vec<ScalarField<T>>,
    pub energies: Vec<f64>,
}

impl<T: Real> PathOfFields<T> {
    /// Path through the given interior nodes; the endpoints are added as exact constants.
    pub fn from_interior(p: &EnergyParams<T>, interior: Vec<ScalarField<T>>) -> Result<Self> {
        let grid = p.domain().grid();
        let mut nodes = Vec::with_capacity(interior.len() + 2);
        nodes.push(ScalarField::constant(grid, -T::one()));
        for u in interior {
            if u.grid() != grid {
                return Err(Error::InvalidArgument("path node lives on another grid".into()));
            }
            nodes.push(u);
        }
        nodes.push(ScalarField::constant(grid, T::one()));
        if nodes.len() < 3 {
            return Err(Error::InvalidArgument("a path needs at least 3 nodes".into()));
        }
        let energies = nodes.iter().map(|u| p.energy(u).to_f64_lossy()).collect();
        Ok(Self { nodes, energies })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &e) in self.energies.iter().enumerate() {
            if e > self.energies[best] {
                best = i;
            }
        }
        best
    }

    fn endpoints_pinned(&self) -> bool {
        let first = self.nodes[0].data.iter().all(|&v| v == -T::one());
        let last = self.nodes[self.len() - 1].data.iter().all(|&v| v == T::one());
        first && last
    }
}

/// Largest node energy.
pub fn minmax_value<T: Real>(path: &PathOfFields<T>) -> f64 {
    path.energies[path.argmax()]
}

/// Path of constants `-1 + 2 i / (K - 1)`; its maximum is `max W * vol / eps`
/// when `K` is odd.
pub fn constant_path<T: Real>(p: &EnergyParams<T>, k: usize) -> Result<PathOfFields<T>> {
    if k < 3 {
        return Err(Error::InvalidArgument("a path needs at least 3 nodes".into()));
    }
    let grid = p.domain().grid();
    let interior = (1..k - 1)
        .map(|i| ScalarField::constant(grid, T::lit(-1.0 + 2.0 * i as f64 / (k - 1) as f64)))
        .collect();
    PathOfFields::from_interior(p, interior)
}

/// Options of the sweep construction.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepOptions {
    pub nodes: usize,
    /// Axis whose coordinate the band grows along (the interface normal).
    pub axis: usize,
    /// Truncation parameter of the profile.
    pub gamma: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            nodes: 33,
            axis: 1,
            gamma: 4.0,
        }
    }
}

/// Band of the `+1` phase that nucleates, widens across the torus along `axis`
/// and closes up. Node `i` carries `u = U_gamma(d / (eps F(nu)))` with `d` the
/// signed distance to the band's two fronts and width
/// `w_i = -4 gamma eps F + i (L + 8 gamma eps F) / (K - 1)`, so the end nodes are
/// exactly constant.
pub fn init_sweep_path<T: Real>(p: &EnergyParams<T>, opts: &SweepOptions) -> Result<PathOfFields<T>> {
    let grid = p.domain().grid().clone();
    let n = grid.dim();
    if opts.nodes < 8 {
        return Err(Error::InvalidArgument(format!("sweep needs K >= 8 nodes, got {}", opts.nodes)));
    }
    if opts.axis >= n {
        return Err(Error::InvalidArgument(format!("axis {} out of range", opts.axis)));
    }
    if !(opts.gamma > 0.0) {
        return Err(Error::InvalidArgument("gamma must be positive".into()));
    }
    let eps = p.eps().to_f64_lossy();
    let mut nu = [0.0; 3];
    nu[opts.axis] = 1.0;
    let f_nu = p.integrand().f0(&nu[..]);
    let length = grid.lengths()[opts.axis];
    if length < 4.0 * eps * f_nu {
        return Err(Error::InvalidArgument(format!(
            "period {length} is narrower than the minimal band width 4 eps F(nu) = {}",
            4.0 * eps * f_nu
        )));
    }
    let profile = standard_profile(p)?;
    let scale = eps * f_nu;
    let reach = 2.0 * opts.gamma * scale;
    let k = opts.nodes;
    let center = 0.5 * length;
    let interior = (1..k - 1)
        .map(|i| {
            let w = -2.0 * reach + i as f64 * (length + 4.0 * reach) / (k - 1) as f64;
            let data = (0..grid.len())
                .map(|c| {
                    let x = grid.position(c)[opts.axis];
                    let mut off = (x - center).abs();
                    off = off.min(length - off);
                    let d = 0.5 * w - off;
                    T::lit(profile.truncated(opts.gamma, d / scale))
                })
                .collect();
            ScalarField::from_raw(&grid, data)
        })
        .collect();
    PathOfFields::from_interior(p, interior)
}

/// Heteroclinic profile of the potential on a window wide enough for truncation.
pub(crate) fn standard_profile<T: Real>(p: &EnergyParams<T>) -> Result<Profile1D> {
    heteroclinic(p.potential(), 40.0, 8001)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelaxOptions {
    pub rounds: usize,
    /// Stop when the climbing node's transverse residual (sup norm) is below this.
    pub tol: f64,
    pub climb: bool,
    pub seed: u64,
    /// Fingerprint of the configuration that produced the run, stored in checkpoints.
    pub config_hash: String,
}

impl Default for RelaxOptions {
    fn default() -> Self {
        Self {
            rounds: 400,
            tol: 1e-6,
            climb: true,
            seed: 0,
            config_hash: String::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundLog {
    pub round: usize,
    pub max_energy: f64,
    pub argmax: usize,
    pub residual: f64,
}

/// Resumable relaxation state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelaxState {
    pub round: usize,
    pub nodes: Vec<Vec<f64>>,
    /// Per-node descent step.
    pub dt: Vec<f64>,
    pub climb_dt: f64,
    pub log: Vec<RoundLog>,
    pub config_hash: String,
    pub seed: u64,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
}

impl RelaxState {
    pub fn new<T: Real>(path: &PathOfFields<T>, opts: &RelaxOptions) -> Self {
        let grid = path.nodes[0].grid();
        Self {
            round: 0,
            nodes: path
                .nodes
                .iter()
                .map(|u| u.data.iter().map(|v| v.to_f64_lossy()).collect())
                .collect(),
            dt: vec![1.0; path.len()],
            climb_dt: 0.25,
            log: Vec::new(),
            config_hash: opts.config_hash.clone(),
            seed: opts.seed,
            cells: grid.cells().to_vec(),
            lengths: grid.lengths().to_vec(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, serde_json::to_vec(self)?)?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&std::fs::read(path)?)?)
    }

    /// Rejects a checkpoint written for another grid, seed or configuration.
    pub fn check_compatible<T: Real>(&self, p: &EnergyParams<T>, opts: &RelaxOptions) -> Result<()> {
        let grid = p.domain().grid();
        if self.cells != grid.cells() || self.lengths != grid.lengths() {
            return Err(Error::Checkpoint(format!(
                "grid {:?} x {:?} differs from the run's {:?} x {:?}",
                self.cells,
                self.lengths,
                grid.cells(),
                grid.lengths()
            )));
        }
        if self.seed != opts.seed {
            return Err(Error::Checkpoint(format!("seed {} differs from the run's {}", self.seed, opts.seed)));
        }
        if self.config_hash != opts.config_hash {
            return Err(Error::Checkpoint("configuration fingerprint differs".into()));
        }
        if self.nodes.iter().any(|u| u.len() != grid.len()) {
            return Err(Error::Checkpoint("node length does not match grid".into()));
        }
        Ok(())
    }

    pub fn path<T: Real>(&self, p: &EnergyParams<T>) -> PathOfFields<T> {
        let grid = p.domain().grid();
        let nodes: Vec<ScalarField<T>> = self
            .nodes
            .iter()
            .map(|u| ScalarField::from_raw(grid, u.iter().map(|&v| T::lit(v)).collect()))
            .collect();
        let energies = nodes.iter().map(|u| p.energy(u).to_f64_lossy()).collect();
        PathOfFields { nodes, energies }
    }
}

#[derive(Clone, Debug)]
pub struct RelaxOutcome<T: Real> {
    pub path: PathOfFields<T>,
    pub value: f64,
    pub argmax: usize,
    pub converged: bool,
    pub state: RelaxState,
}

/// Relaxes `path` from scratch; see [`relax_resume`].
pub fn relax_path<T: Real>(
    path: &PathOfFields<T>,
    p: &EnergyParams<T>,
    opts: &RelaxOptions,
) -> Result<RelaxOutcome<T>> {
    relax_resume(RelaxState::new(path, opts), p, opts, |_| Ok(()))
}

/// String relaxation. Each round (i) takes one preconditioned Armijo descent
/// step on every interior node except the climbing one, (ii) redistributes
/// the nodes at equal weighted-L2 arclength on either side of the climbing
/// node, and (iii) moves the climbing node up the path tangent and down
/// transversally. `after_round` sees the state after every round, e.g. to
/// write checkpoints.
pub fn relax_resume<T: Real>(
    mut state: RelaxState,
    p: &EnergyParams<T>,
    opts: &RelaxOptions,
    mut after_round: impl FnMut(&RelaxState) -> Result<()>,
) -> Result<RelaxOutcome<T>> {
    state.check_compatible(p, opts)?;
    let mut path = state.path(p);
    if !path.endpoints_pinned() {
        return Err(Error::InvalidArgument("path endpoints must be the constants -1 and +1".into()));
    }
    let k = path.len();
    let n = p.len();
    let omega = p.domain().metric().omega();
    let space = Space::new(omega);
    let pc = FftPreconditioner::new(p, T::zero());
    let mut g = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut trial = vec![T::zero(); n];
    let mut converged = state.log.last().is_some_and(|l| l.residual < opts.tol);

    while !converged && state.round < opts.rounds {
        state.round += 1;
        let climber = if opts.climb { path.argmax() } else { usize::MAX };

        for i in 1..k - 1 {
            if i == climber {
                continue;
            }
            let u = &mut path.nodes[i].data;
            let e = p.grad_slice(u, &mut g);
            pc.apply(&g, &mut d);
            let slope = space.dot(&g, &d);
            if !(slope > T::zero()) {
                continue;
            }
            let mut dt = state.dt[i];
            let mut accepted = None;
            for _ in 0..30 {
                let a = T::lit(dt);
                for c in 0..n {
                    trial[c] = u[c] - a * d[c];
                }
                let et = p.energy_slice(&trial);
                if et <= e - T::lit(1e-4) * a * slope {
                    accepted = Some(et);
                    break;
                }
                dt *= 0.5;
            }
            if let Some(et) = accepted {
                u.copy_from_slice(&trial);
                path.energies[i] = et.to_f64_lossy();
                state.dt[i] = (dt * 1.2).min(1.0);
            } else {
                state.dt[i] = dt;
            }
        }

        if opts.climb && climber > 0 && climber < k - 1 {
            reparametrize(&mut path, p, 0, climber);
            reparametrize(&mut path, p, climber, k - 1);
        } else {
            reparametrize(&mut path, p, 0, k - 1);
        }

        let m = path.argmax();
        let mut residual = f64::NAN;
        if m > 0 && m < k - 1 {
            let tau = tangent(&path, m, &pc, &space);
            let u = path.nodes[m].data.clone();
            p.grad_slice(&u, &mut g);
            let before = transverse_sup(&g, &tau, &space, &pc);
            if opts.climb {
                pc.apply(&g, &mut d);
                let gt = space.dot(&g, &tau);
                let step = T::lit(state.climb_dt);
                let two = T::lit(2.0);
                for c in 0..n {
                    trial[c] = u[c] - step * (d[c] - two * gt * tau[c]);
                }
                p.grad_slice(&trial, &mut g);
                let after = transverse_sup(&g, &tau, &space, &pc);
                if after <= before {
                    path.nodes[m].data.copy_from_slice(&trial);
                    path.energies[m] = p.energy_slice(&trial).to_f64_lossy();
                    state.climb_dt = (state.climb_dt * 1.1).min(1.0);
                    residual = after;
                } else {
                    state.climb_dt *= 0.5;
                    residual = before;
                }
            } else {
                residual = before;
            }
        }
        let mval = minmax_value(&path);
        state.log.push(RoundLog {
            round: state.round,
            max_energy: mval,
            argmax: path.argmax(),
            residual,
        });
        state.nodes = path
            .nodes
            .iter()
            .map(|u| u.data.iter().map(|v| v.to_f64_lossy()).collect())
            .collect();
        converged = residual < opts.tol;
        after_round(&state)?;
    }
    let argmax = path.argmax();
    Ok(RelaxOutcome {
        value: minmax_value(&path),
        argmax,
        converged,
        path,
        state,
    })
}

/// Unit tangent at node `m` in the preconditioner norm, from the neighbouring nodes.
fn tangent<T: Real>(path: &PathOfFields<T>, m: usize, pc: &FftPreconditioner<T>, space: &Space<'_, T>) -> Vec<T> {
    let a = &path.nodes[m - 1].data;
    let b = &path.nodes[m + 1].data;
    let t: Vec<T> = a.iter().zip(b).map(|(&x, &y)| y - x).collect();
    let mut pt = vec![T::zero(); t.len()];
    pc.apply_forward(&t, &mut pt);
    let nrm = space.dot(&t, &pt).max(T::min_positive_value()).sqrt();
    t.into_iter().map(|x| x / nrm).collect()
}

/// Sup norm of the gradient with its component along `tau` removed
/// (`tau` unit in the preconditioner norm).
fn transverse_sup<T: Real>(g: &[T], tau: &[T], space: &Space<'_, T>, pc: &FftPreconditioner<T>) -> f64 {
    let mut ptau = vec![T::zero(); tau.len()];
    pc.apply_forward(tau, &mut ptau);
    let c = space.dot(g, tau);
    g.iter()
        .zip(&ptau)
        .fold(0.0_f64, |m, (&x, &y)| m.max((x - c * y).to_f64_lossy().abs()))
}

/// Moves nodes `lo+1 .. hi-1` to equal weighted-L2 arclength between the fixed nodes `lo` and `hi`.
fn reparametrize<T: Real>(path: &mut PathOfFields<T>, p: &EnergyParams<T>, lo: usize, hi: usize) {
    if hi <= lo + 1 {
        return;
    }
    let space = Space::new(p.domain().metric().omega());
    let mut arc = vec![0.0; hi - lo + 1];
    for i in lo..hi {
        let diff: Vec<T> = path.nodes[i + 1]
            .data
            .iter()
            .zip(&path.nodes[i].data)
            .map(|(&a, &b)| a - b)
            .collect();
        arc[i - lo + 1] = arc[i - lo] + space.norm(&diff).to_f64_lossy();
    }
    let total = arc[hi - lo];
    if !(total > 0.0) {
        return;
    }
    let old: Vec<Vec<T>> = path.nodes[lo..=hi].iter().map(|u| u.data.clone()).collect();
    let mut seg = 0;
    for j in 1..hi - lo {
        let target = total * j as f64 / (hi - lo) as f64;
        while seg + 1 < hi - lo && arc[seg + 1] < target {
            seg += 1;
        }
        let span = arc[seg + 1] - arc[seg];
        let t = if span > 0.0 { (target - arc[seg]) / span } else { 0.0 };
        let t = T::lit(t.clamp(0.0, 1.0));
        let node = &mut path.nodes[lo + j].data;
        for c in 0..node.len() {
            node[c] = old[seg][c] + t * (old[seg + 1][c] - old[seg][c]);
        }
        path.energies[lo + j] = p.energy_slice(node).to_f64_lossy();
    }
}

/// Newton-refines the highest node and certifies its Morse index.
pub fn extract_saddle<T: Real>(
    path: &PathOfFields<T>,
    p: &EnergyParams<T>,
    opts: &NewtonOptions,
) -> Result<(ScalarField<T>, CriticalReport)> {
    let m = path.argmax();
    newton_refine(&path.nodes[m], p, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Domain, Grid};
    use crate::integrand::IntegrandSpec;
    use crate::potential::PotentialSpec;
    use approx::assert_relative_eq;

    fn params(cells: usize, eps: f64) -> EnergyParams<f64> {
        let g = Grid::unit(2, cells).unwrap().shared();
        EnergyParams::new(
            Domain::flat(g),
            PotentialSpec::quartic(),
            IntegrandSpec::diagonal(&[4.0, 1.0]).unwrap(),
            eps,
            0.1,
        )
        .unwrap()
    }

    #[test]
    fn trivial_and_constant_paths() {
        let p = params(16, 0.1);
        let path = constant_path(&p, 3).unwrap();
        assert_relative_eq!(minmax_value(&path), 0.25 / 0.1, max_relative = 1e-14);
        assert_eq!(path.energies[0], 0.0);
        assert_eq!(path.energies[2], 0.0);
    }

    #[test]
    fn sweep_path_is_admissible_and_symmetric() {
        let p = params(64, 1.0 / 32.0);
        let path = init_sweep_path(&p, &SweepOptions::default()).unwrap();
        assert_eq!(path.len(), 33);
        assert_eq!(path.energies[0], 0.0);
        assert_eq!(path.energies[32], 0.0);
        for i in 0..33 {
            assert_relative_eq!(path.energies[i], path.energies[32 - i], max_relative = 1e-10);
        }
        let cw = p.potential().cw().unwrap();
        let top = minmax_value(&path);
        assert!((top - 2.0 * cw).abs() < 0.15 * 2.0 * cw, "{top}");
        assert!(top < minmax_value(&constant_path(&p, 33).unwrap()));
        assert!(init_sweep_path(&p, &SweepOptions { nodes: 5, ..Default::default() }).is_err());
    }

    #[test]
    fn relaxation_pins_endpoints_and_lowers_the_max() {
        let p = params(32, 1.0 / 8.0);
        let path = init_sweep_path(&p, &SweepOptions { nodes: 9, ..Default::default() }).unwrap();
        let start = minmax_value(&path);
        let opts = RelaxOptions {
            rounds: 30,
            ..Default::default()
        };
        let out = relax_path(&path, &p, &opts).unwrap();
        assert!(out.path.endpoints_pinned());
        assert!(out.value <= start * (1.0 + 1e-9));
        for w in out.state.log.windows(2) {
            assert!(w[1].max_energy <= w[0].max_energy * (1.0 + 1e-6));
        }
    }
}
