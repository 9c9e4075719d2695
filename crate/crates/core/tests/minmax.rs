mod common;

use anisocahn::minmax::{constant_path, init_sweep_path, minmax_value, relax_path, relax_resume, RelaxOptions, RelaxState, SweepOptions};
use anisocahn::potential::compute_cw;
use anisocahn::{Error, PotentialSpec};
use common::{diag41, grid, params, rel};

#[test]
fn sweep_path_stays_near_two_transitions() {
    let cw = compute_cw(&PotentialSpec::quartic()).unwrap();
    let g = grid(2, 128);
    for eps in [1.0 / 32.0, 1.0 / 64.0] {
        let p = params(&g, diag41(), eps, 0.1);
        let path = init_sweep_path(&p, &SweepOptions::default()).unwrap();
        assert_eq!(path.len(), 33);
        assert_eq!(path.energies[0], 0.0);
        assert_eq!(path.energies[32], 0.0);
        let max = minmax_value(&path);
        assert!(rel(max, 2.0 * cw) < 0.15, "eps {eps}: {max}");
        let worst = minmax_value(&constant_path(&p, 33).unwrap());
        assert!((worst - PotentialSpec::quartic().w_max() / eps).abs() < 1e-9 / eps);
        assert!(worst > max);
    }
}

#[test]
fn sweep_rejects_bad_options() {
    let g = grid(2, 16);
    let p = params(&g, diag41(), 0.3, 0.1);
    assert!(init_sweep_path(&p, &SweepOptions { nodes: 5, ..Default::default() }).is_err());
    assert!(init_sweep_path(&p, &SweepOptions { axis: 2, ..Default::default() }).is_err());
    // 4 eps F(e_1) = 2.4 exceeds the unit period.
    assert!(init_sweep_path(&p, &SweepOptions { axis: 0, ..Default::default() }).is_err());
}

#[test]
fn trivial_path_peaks_at_zero() {
    let g = grid(2, 16);
    let p = params(&g, diag41(), 0.1, 0.1);
    let path = constant_path(&p, 3).unwrap();
    assert!((minmax_value(&path) - 0.25 / 0.1).abs() < 1e-12);
}

#[test]
fn relaxation_is_monotone_and_pinned() {
    let g = grid(2, 32);
    let p = params(&g, diag41(), 1.0 / 8.0, 0.1);
    let path = init_sweep_path(&p, &SweepOptions { nodes: 9, ..Default::default() }).unwrap();
    let out = relax_path(&path, &p, &RelaxOptions { rounds: 40, ..Default::default() }).unwrap();
    assert!(out.value <= minmax_value(&path) * (1.0 + 1e-9));
    assert!(out.path.nodes[0].data.iter().all(|&v| v == -1.0));
    assert!(out.path.nodes[8].data.iter().all(|&v| v == 1.0));
    for w in out.state.log.windows(2) {
        assert!(w[1].max_energy <= w[0].max_energy * (1.0 + 1e-6));
    }
}

#[test]
fn resume_reproduces_the_trajectory_bit_for_bit() {
    let g = grid(2, 32);
    let p = params(&g, diag41(), 1.0 / 8.0, 0.1);
    let path = init_sweep_path(&p, &SweepOptions { nodes: 9, ..Default::default() }).unwrap();
    let opts = RelaxOptions {
        rounds: 30,
        tol: 0.0,
        seed: 5,
        config_hash: "abc".into(),
        ..Default::default()
    };
    let full = relax_path(&path, &p, &opts).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("state.json");
    let first = relax_path(&path, &p, &RelaxOptions { rounds: 12, ..opts.clone() }).unwrap();
    first.state.save(&file).unwrap();
    let state = RelaxState::load(&file).unwrap();
    let resumed = relax_resume(state, &p, &opts, |_| Ok(())).unwrap();
    assert_eq!(full.value.to_bits(), resumed.value.to_bits());
    assert_eq!(full.state.log, resumed.state.log);
    for (a, b) in full.path.nodes.iter().zip(&resumed.path.nodes) {
        assert!(a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    let other_seed = RelaxOptions { seed: 6, ..opts.clone() };
    let err = relax_resume(RelaxState::load(&file).unwrap(), &p, &other_seed, |_| Ok(())).unwrap_err();
    assert!(matches!(&err, Error::Checkpoint(m) if m.contains("seed")), "{err}");
    let g2 = grid(2, 64);
    let p2 = params(&g2, diag41(), 1.0 / 8.0, 0.1);
    let err = relax_resume(RelaxState::load(&file).unwrap(), &p2, &opts, |_| Ok(())).unwrap_err();
    assert!(matches!(&err, Error::Checkpoint(m) if m.contains("grid")), "{err}");
}

