//! One function per subcommand. Each writes its reports into the run's
//! output directory and returns whether its certificate passed.

use std::path::PathBuf;

use anisocahn::critical::{el_residual, gradient_flow, newton_refine, spectrum, FlowOptions, NewtonOptions};
use anisocahn::gamma::{gamma_sweep, ShapeSpec};
use anisocahn::geomlimits::{
    build_varifold, density_ratios, divergence_test, extract_interface, first_variation_aniso, gradient_floor, modica_check,
    raw_energy, slice_quantization, stability_diagnostic, stress_tensor, tangential_energy, trig_fields, SliceOptions,
};
use anisocahn::integrand::audit_integrand;
use anisocahn::minmax::{RelaxOptions, SweepOptions};
use anisocahn::potential::{audit_potential, heteroclinic};
use anisocahn::{EnergyParams, Error, Result, ScalarField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::pipeline::{mountain_pass, Checkpointing, MountainPassOptions};
use crate::snapshot::read_snapshot;
use crate::{Check, Outcome, Run};

/// Extra command-line options of `mountain-pass`.
#[derive(Clone, Debug, Default)]
pub struct MountainPassFlags {
    pub resume: bool,
    pub stop_after: Option<usize>,
}

fn finish_with(run: Run, checks: &[Check]) -> Result<Outcome> {
    run.finish(Outcome::from_checks(checks))
}

#[derive(Serialize)]
struct ProfileRow {
    t: f64,
    u: f64,
    du: f64,
}

pub fn heteroclinic_cmd(mut run: Run) -> Result<Outcome> {
    let spec = run.cfg.potential();
    let t_max: f64 = run.cfg.get("heteroclinic.t_max")?;
    let samples: usize = run.cfg.get("heteroclinic.samples")?;
    let prof = run.stage("shoot", |_| heteroclinic(&spec, t_max, samples))?;
    let cw = spec.cw()?;
    let equipartition = prof
        .u
        .iter()
        .zip(&prof.du)
        .map(|(&u, &du)| (du - spec.sqrt_2w(u)).abs())
        .fold(0.0, f64::max);
    let mut checks = vec![Check::at_most("equipartition", equipartition, 1e-6)];
    let tanh_error = matches!(spec.family(), anisocahn::potential::PotentialFamily::Quartic).then(|| {
        prof.t
            .iter()
            .zip(&prof.u)
            .filter(|(t, _)| t.abs() <= 8.0)
            .map(|(t, u)| (u - (t / 2f64.sqrt()).tanh()).abs())
            .fold(0.0, f64::max)
    });
    if let Some(e) = tanh_error {
        checks.push(Check::at_most("tanh_sup_error", e, 1e-6));
    }
    let rows: Vec<ProfileRow> = (0..prof.t.len())
        .map(|i| ProfileRow {
            t: prof.t[i],
            u: prof.u[i],
            du: prof.du[i],
        })
        .collect();
    run.write_csv("heteroclinic.csv", &rows)?;
    run.write_json(
        "report.json",
        &serde_json::json!({
            "cw": cw,
            "t_max": t_max,
            "samples": samples,
            "tail_rates": prof.rates,
            "equipartition_residual": equipartition,
            "tanh_sup_error": tanh_error,
            "checks": checks,
        }),
    )?;
    finish_with(run, &checks)
}

pub fn audit_cmd(mut run: Run) -> Result<Outcome> {
    let dim = run.cfg.grid()?.dim();
    let potential = audit_potential(&run.cfg.potential());
    let spec = run.cfg.integrand(dim)?;
    let samples: usize = run.cfg.get("audit.samples")?;
    let integrand = audit_integrand(&spec, samples, run.cfg.seed());
    let checks = vec![
        Check::at_most("potential_violations", potential.violations.len() as f64, 0.0),
        Check::at_most("integrand_violations", integrand.violations.len() as f64, 0.0),
    ];
    run.write_json(
        "report.json",
        &serde_json::json!({
            "potential": potential,
            "integrand": integrand,
            "lambda_est": integrand.lambda,
            "lambda_prime_est": integrand.lambda_prime,
            "checks": checks,
        }),
    )?;
    finish_with(run, &checks)
}

/// Stripe pair across `axis` built from the heteroclinic profile.
fn stripe_init(p: &EnergyParams<f64>, axis: usize) -> Result<ScalarField<f64>> {
    let g = p.domain().grid().clone();
    if axis >= g.dim() {
        return Err(Error::InvalidArgument(format!("axis {axis} out of range")));
    }
    let prof = heteroclinic(p.potential(), 40.0, 8001)?;
    let mut nu = vec![0.0; g.dim()];
    nu[axis] = 1.0;
    let width = p.eps() * p.integrand().f0(&nu);
    let l = g.lengths()[axis];
    ScalarField::from_fn(&g, |x| {
        let s = x[axis];
        let d = (s - 0.25 * l).abs().min((s - 0.75 * l).abs());
        let inside = s > 0.25 * l && s < 0.75 * l;
        prof.eval_f64(if inside { d } else { -d } / width)
    })
}

fn load_input(run: &Run, key: &str, p: &EnergyParams<f64>) -> Result<(ScalarField<f64>, EnergyParams<f64>)> {
    let path: PathBuf = run
        .cfg
        .path(key)
        .ok_or_else(|| Error::Config(vec![format!("{key}: an input snapshot is required")]))?;
    let (h, u) = read_snapshot(&path)?;
    let g = p.domain().grid();
    if h.cells != g.cells() || h.lengths != g.lengths() {
        return Err(Error::Snapshot(format!(
            "snapshot grid {:?} x {:?} does not match the configured {:?} x {:?}",
            h.cells,
            h.lengths,
            g.cells(),
            g.lengths()
        )));
    }
    // Re-home the field on the configured grid so both share one allocation.
    let u = ScalarField::from_vec(g, u.data)?;
    let p = p.with_eps(h.eps)?.with_delta(h.delta)?;
    Ok((u, p))
}

pub fn minimize_cmd(mut run: Run) -> Result<Outcome> {
    let p = run.cfg.params()?;
    let u0 = match run.cfg.str("minimize.init") {
        "stripe" => stripe_init(&p, run.cfg.get("mountain_pass.axis")?)?,
        "snapshot" => load_input(&run, "minimize.input", &p)?.0,
        _ => {
            let amp: f64 = run.cfg.get("minimize.amplitude")?;
            let mut rng = ChaCha8Rng::seed_from_u64(run.cfg.seed());
            let g = p.domain().grid().clone();
            ScalarField::from_vec(&g, (0..g.len()).map(|_| amp * rng.gen_range(-1.0..1.0)).collect())?
        }
    };
    let steps: usize = run.cfg.get("minimize.steps")?;
    let flow_tol: f64 = run.cfg.get("minimize.tol")?;
    let (u, trace) = run.stage("flow", |_| gradient_flow(&u0, &p, &FlowOptions::preconditioned(steps, flow_tol)))?;
    run.write_csv("flow.csv", &trace.steps)?;
    let newton = NewtonOptions {
        tol: run.cfg.get("newton.tol")?,
        max_iter: run.cfg.get("newton.max_iter")?,
        seed: run.cfg.seed(),
        ..Default::default()
    };
    let (u, report, tol) = if p.delta() > 0.0 {
        let (u, r) = run.stage("newton", |_| newton_refine(&u, &p, &newton))?;
        (u, r, newton.tol)
    } else {
        let r = anisocahn::critical::CriticalReport::evaluate(&u, &p);
        (u, r, flow_tol)
    };
    let checks = vec![Check::at_most("residual_sup", report.residual_sup, tol)];
    run.snapshot("u", &u, p.eps(), p.delta())?;
    run.write_json(
        "report.json",
        &serde_json::json!({
            "flow_steps": trace.steps.len(),
            "flow_converged": trace.converged,
            "critical": report,
            "checks": checks,
        }),
    )?;
    finish_with(run, &checks)
}

pub fn mountain_pass_options(run: &Run) -> Result<MountainPassOptions> {
    let c = &run.cfg;
    Ok(MountainPassOptions {
        sweep: SweepOptions {
            nodes: c.get("mountain_pass.nodes")?,
            axis: c.get("mountain_pass.axis")?,
            gamma: c.get("mountain_pass.gamma")?,
        },
        relax: RelaxOptions {
            rounds: c.get("mountain_pass.rounds")?,
            tol: c.get("mountain_pass.tol")?,
            climb: c.get("mountain_pass.climb")?,
            seed: c.seed(),
            config_hash: run.config_hash().to_string(),
        },
        deltas: c.list("mountain_pass.deltas"),
        newton: NewtonOptions {
            tol: c.get("newton.tol")?,
            max_iter: c.get("newton.max_iter")?,
            seed: c.seed(),
            ..Default::default()
        },
        spectrum_k: 2,
    })
}

/// `c_W` times the smallest `F0` over the coordinate directions.
pub fn window_scale(p: &EnergyParams<f64>) -> Result<f64> {
    let n = p.domain().dim();
    let fmin = (0..n)
        .map(|a| {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            p.integrand().f0(&e)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(p.potential().cw()? * fmin)
}

pub fn mountain_pass_cmd(mut run: Run, flags: &MountainPassFlags) -> Result<Outcome> {
    let p = run.cfg.params()?;
    let opts = mountain_pass_options(&run)?;
    let ck = Checkpointing {
        dir: Some(run.out.clone()),
        every: run.cfg.get("checkpoint.every")?,
        resume: flags.resume,
        stop_after: flags.stop_after,
    };
    let mp = run.stage("mountain_pass", |_| mountain_pass(&p, &opts, &ck))?;
    for c in &mp.checkpoints {
        run.record(c);
    }
    run.write_csv("rounds.csv", &mp.rounds)?;
    let Some(s) = &mp.saddle else {
        run.write_json("stages.json", &mp.stages)?;
        return run.finish(Outcome::Interrupted);
    };
    let eps = p.eps();
    let value = mp.stages.last().map(|s| s.value).unwrap_or(f64::NAN);
    let scale = window_scale(&p)?;
    let spread = (s.u.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - s.u.data.iter().cloned().fold(f64::INFINITY, f64::min))
        / 2.0;
    let lambda2 = s.spectrum.values.get(1).copied().unwrap_or(f64::NAN);
    let checks = vec![
        Check::at_most("residual_sup", s.report.residual_sup, opts.newton.tol),
        Check::at_least("nonconstant_half_range", spread, 0.5),
        Check::at_most("overshoot", s.report.overshoot, 1e-6),
        Check::at_least("lambda2_times_eps", lambda2 * eps, -1e-6),
        Check::at_least("value_over_window_low", value / scale, 0.5),
        Check::at_most("value_over_window_high", value / scale, 2.5),
        Check::at_most("saddle_energy_gap", (value - s.report.energy).abs() / value, 1e-3),
    ];
    run.snapshot("saddle", &s.u, eps, s.params.delta())?;
    let energies: Vec<serde_json::Value> = mp
        .path
        .energies
        .iter()
        .enumerate()
        .map(|(i, e)| serde_json::json!({"node": i, "energy": e}))
        .collect();
    run.write_json(
        "report.json",
        &serde_json::json!({
            "stages": mp.stages,
            "minmax_value": value,
            "window_scale": scale,
            "path_energies": energies,
            "saddle": s.report,
            "spectrum": s.spectrum,
            "checks": checks,
        }),
    )?;
    finish_with(run, &checks)
}

#[derive(Serialize)]
struct FieldTest {
    label: String,
    value: f64,
    c1_norm: f64,
    normalized: f64,
}

pub fn diagnose_cmd(mut run: Run) -> Result<Outcome> {
    let base = run.cfg.params()?;
    let (u, p) = load_input(&run, "diagnose.input", &base)?;
    let eps = p.eps();
    let cw = p.potential().cw()?;
    let g = p.domain().grid().clone();
    let n = g.dim();
    let energy = p.energy(&u);
    let raw = raw_energy(&u, &p);
    let residual = el_residual(&u, &p).max_abs();
    let modica = modica_check(&u, &p);
    let v = build_varifold(&u, &p);
    let lambda_prime = audit_integrand(p.integrand(), 1000, run.cfg.seed()).lambda_prime
        * p.integrand().modulation.as_ref().map_or(1.0, |m| (1.0 - m.amplitude.abs()).powi(2));
    let mass = v.mass();

    let mut radii: Vec<f64> = run.cfg.list("diagnose.radii");
    if radii.is_empty() {
        radii = vec![4.0 * eps, 0.125, 0.25];
    }
    let half = 0.5 * g.lengths().iter().cloned().fold(f64::INFINITY, f64::min);
    radii.retain(|&r| r <= half);
    let peak = (0..g.len()).max_by(|&a, &b| v.weight[a].total_cmp(&v.weight[b])).unwrap_or(0);
    let centre = g.position(peak);
    let ratios: Vec<f64> = density_ratios(&v, &centre[..n], &radii)?.iter().map(|r| r / cw).collect();

    let t = stress_tensor(&u, &p);
    let fields = trig_fields::<f64>(&g);
    let stress: Vec<FieldTest> = fields
        .iter()
        .map(|x| {
            let value = divergence_test(&t, &x.field);
            FieldTest {
                label: x.label.clone(),
                value,
                c1_norm: x.c1_norm,
                normalized: value.abs() / (x.c1_norm * raw),
            }
        })
        .collect();
    let first_variation: Vec<FieldTest> = fields
        .iter()
        .map(|x| {
            let value = first_variation_aniso(&v, p.integrand(), &x.field);
            FieldTest {
                label: x.label.clone(),
                value,
                c1_norm: x.c1_norm,
                normalized: value.abs() / (x.c1_norm * mass.max(f64::MIN_POSITIVE)),
            }
        })
        .collect();

    let phi = ScalarField::constant(&g, 1.0);
    let stability = if p.delta() > 0.0 {
        Some(stability_diagnostic(&u, &p, &phi, gradient_floor(eps))?)
    } else {
        None
    };
    let axis: usize = run.cfg.get("diagnose.axis")?;
    let mut dir = vec![0.0; n];
    if axis >= n {
        return Err(Error::Config(vec![format!("diagnose.axis: {axis} out of range")]));
    }
    dir[axis] = 1.0;
    let tangential = tangential_energy(&u, &p, &dir);
    let slice_opts = SliceOptions {
        tangential_threshold: run.cfg.get("diagnose.tangential_threshold")?,
        ..SliceOptions::along_axis(axis, n, run.cfg.get("diagnose.lines")?)
    };
    let slices = slice_quantization(&u, &p, &slice_opts)?;
    let interface = match extract_interface(&u, 0.0) {
        Ok(i) => Some(serde_json::json!({"measure": i.measure(), "closed": i.closed, "facets": i.facets.len()})),
        Err(Error::EmptyLevelSet) => None,
        Err(e) => return Err(e),
    };

    #[derive(Serialize)]
    struct SliceRow {
        base: String,
        q: f64,
        ratio: f64,
        nearest: i64,
        residual: f64,
        tangential_fraction: f64,
        certified: bool,
    }
    let rows: Vec<SliceRow> = slices
        .records
        .iter()
        .map(|r| SliceRow {
            base: r.base.iter().map(|b| format!("{b}")).collect::<Vec<_>>().join(" "),
            q: r.q,
            ratio: r.ratio,
            nearest: r.nearest,
            residual: r.residual,
            tangential_fraction: r.tangential_fraction,
            certified: r.certified,
        })
        .collect();
    run.write_csv("slices.csv", &rows)?;

    let checks = vec![
        Check::at_most("mass_over_energy_bound", mass * lambda_prime / raw.max(f64::MIN_POSITIVE), 1.0),
        Check::at_least("slice_certified_fraction", slices.certified_fraction, 0.8),
        Check::at_least("slice_quantized_fraction", slices.quantized_fraction, 0.9),
    ];
    run.write_json(
        "diagnose.json",
        &serde_json::json!({
            "eps": eps,
            "delta": p.delta(),
            "energy": energy,
            "raw_energy": raw,
            "residual_sup": residual,
            "modica": modica.summary(),
            "varifold": {
                "mass": mass,
                "lambda_prime": lambda_prime,
                "mass_bound": raw / lambda_prime,
                "density_centre": &centre[..n],
                "radii": radii,
                "density_ratios_over_cw": ratios,
            },
            "stress_divergence": stress,
            "first_variation": first_variation,
            "stability": stability,
            "tangential": {"axis": axis, "tangential": tangential.tangential, "total": tangential.total, "fraction": tangential.fraction()},
            "slices": {
                "certified_fraction": slices.certified_fraction,
                "quantized_fraction": slices.quantized_fraction,
                "modal": slices.modal,
                "histogram": slices.histogram,
            },
            "interface": interface,
            "checks": checks,
        }),
    )?;
    finish_with(run, &checks)
}

pub fn gamma_sweep_cmd(mut run: Run) -> Result<Outcome> {
    let p = run.cfg.params()?;
    let shape = run.cfg.shape();
    let eps: Vec<f64> = run.cfg.list("gamma.eps");
    let rule = run.cfg.gamma_rule()?;
    let rows = run.stage("sweep", |_| gamma_sweep(&shape, &p, &eps, rule))?;
    run.write_csv("gamma.csv", &rows)?;
    let last = rows.last().map(|r| r.gap).unwrap_or(f64::NAN);
    let tol = if matches!(shape, ShapeSpec::Stripe { .. }) { 0.01 } else { 0.05 };
    let growth = rows.windows(2).map(|w| w[1].gap / w[0].gap).fold(0.0, f64::max);
    let liminf = rows.iter().map(|r| r.bv_mass - r.energy).fold(f64::NEG_INFINITY, f64::max);
    let chain = rows.iter().map(|r| r.chain_rule_mass - r.energy).fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::at_most("final_gap", last, tol),
        Check::at_most("max_gap_growth", growth, 1.2),
        Check::at_most("bv_mass_minus_energy", liminf, 0.0),
        Check::at_most("chain_rule_mass_minus_energy", chain, 0.0),
    ];
    run.write_json("report.json", &serde_json::json!({"rows": rows, "checks": checks}))?;
    finish_with(run, &checks)
}

pub fn spectrum_cmd(mut run: Run) -> Result<Outcome> {
    let base = run.cfg.params()?;
    let (u, p) = load_input(&run, "spectrum.input", &base)?;
    let k: usize = run.cfg.get("spectrum.k")?;
    let seed = run.cfg.seed();
    let s = run.stage("lanczos", |_| spectrum(&u, &p, k, seed))?;
    let checks = vec![Check::at_least("certified", if s.certified { 1.0 } else { 0.0 }, 1.0)];
    run.write_json("spectrum.json", &serde_json::json!({"spectrum": s, "checks": checks}))?;
    finish_with(run, &checks)
}
