//! Mountain-pass search with delta continuation and per-stage checkpoints.

use std::path::{Path, PathBuf};

use anisocahn::critical::{spectrum, CriticalReport, NewtonOptions, Spectrum};
use anisocahn::minmax::{extract_saddle, init_sweep_path, relax_resume, PathOfFields, RelaxOptions, RelaxState, SweepOptions};
use anisocahn::{EnergyParams, Error, Result, ScalarField};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug)]
pub struct MountainPassOptions {
    pub sweep: SweepOptions,
    pub relax: RelaxOptions,
    /// Mollification parameters, one relaxation stage each.
    pub deltas: Vec<f64>,
    pub newton: NewtonOptions,
    /// Eigenvalues certified at the saddle.
    pub spectrum_k: usize,
}

impl MountainPassOptions {
    pub fn new(deltas: &[f64]) -> Self {
        Self {
            sweep: SweepOptions::default(),
            relax: RelaxOptions::default(),
            deltas: deltas.to_vec(),
            newton: NewtonOptions::default(),
            spectrum_k: 2,
        }
    }
}

/// Where and how often to checkpoint, and whether to stop early.
#[derive(Clone, Debug, Default)]
pub struct Checkpointing {
    pub dir: Option<PathBuf>,
    pub every: usize,
    pub resume: bool,
    /// Stop once this many rounds (summed over stages) have run.
    pub stop_after: Option<usize>,
}

pub fn checkpoint_path(dir: &Path, stage: usize) -> PathBuf {
    dir.join(format!("checkpoint-stage{stage}.json"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub delta: f64,
    pub value: f64,
    pub argmax: usize,
    pub rounds: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundRow {
    pub stage: usize,
    pub delta: f64,
    pub round: usize,
    pub max_energy: f64,
    pub argmax: usize,
    pub residual: f64,
}

pub struct Saddle {
    pub u: ScalarField<f64>,
    pub report: CriticalReport,
    pub spectrum: Spectrum,
    pub params: EnergyParams<f64>,
}

pub struct MountainPass {
    pub stages: Vec<StageSummary>,
    pub rounds: Vec<RoundRow>,
    pub path: PathOfFields<f64>,
    /// `None` when stopped early.
    pub saddle: Option<Saddle>,
    pub checkpoints: Vec<PathBuf>,
}

/// Sweep path at the first delta, then one relaxation per delta, each
/// starting from the previous stage's path, then Newton on the highest node.
pub fn mountain_pass(p: &EnergyParams<f64>, opts: &MountainPassOptions, ck: &Checkpointing) -> Result<MountainPass> {
    if opts.deltas.is_empty() {
        return Err(Error::InvalidArgument("need at least one delta".into()));
    }
    let first = p.with_delta(opts.deltas[0])?;
    let mut path = init_sweep_path(&first, &opts.sweep)?;
    let mut stages = Vec::new();
    let mut rounds = Vec::new();
    let mut checkpoints = Vec::new();
    let mut done = 0usize;
    let mut params = first;
    for (i, &delta) in opts.deltas.iter().enumerate() {
        params = p.with_delta(delta)?;
        let file = ck.dir.as_ref().map(|d| checkpoint_path(d, i));
        let state = match &file {
            Some(f) if ck.resume && f.exists() => RelaxState::load(f)?,
            _ if ck.resume && i == 0 => {
                return Err(Error::Checkpoint("resume requested but no checkpoint was found".into()));
            }
            _ => RelaxState::new(&path, &opts.relax),
        };
        let mut run_opts = opts.relax.clone();
        let limit = ck.stop_after.map(|s| s.saturating_sub(done));
        if let Some(l) = limit {
            run_opts.rounds = run_opts.rounds.min(l);
        }
        let every = ck.every.max(1);
        let out = relax_resume(state, &params, &run_opts, |s| match &file {
            Some(f) if s.round % every == 0 => s.save(f),
            _ => Ok(()),
        })?;
        if let Some(f) = &file {
            out.state.save(f)?;
            checkpoints.push(f.clone());
        }
        done += out.state.round;
        rounds.extend(out.state.log.iter().map(|l| RoundRow {
            stage: i,
            delta,
            round: l.round,
            max_energy: l.max_energy,
            argmax: l.argmax,
            residual: l.residual,
        }));
        stages.push(StageSummary {
            stage: i,
            delta,
            value: out.value,
            argmax: out.argmax,
            rounds: out.state.round,
            converged: out.converged,
        });
        path = out.path;
        let finished = out.converged || out.state.round >= opts.relax.rounds;
        if !finished {
            return Ok(MountainPass {
                stages,
                rounds,
                path,
                saddle: None,
                checkpoints,
            });
        }
    }
    let (u, report) = extract_saddle(&path, &params, &opts.newton)?;
    let spectrum = spectrum(&u, &params, opts.spectrum_k, opts.newton.seed)?;
    Ok(MountainPass {
        stages,
        rounds,
        path,
        saddle: Some(Saddle {
            u,
            report,
            spectrum,
            params,
        }),
        checkpoints,
    })
}
