//! Phase sweep determinism, replay and the boundary estimator.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use blocksparse::experiments::{
    boundary_from_rates, render_csv, render_pgm, run_phase_sweep, run_trial, trial_seed, PhaseCell, PhaseConfig,
    SceneTemplate,
};
use blocksparse::dictionary::dct_2d_matrix;
use blocksparse::par::Execution;
use blocksparse::solver::DemixProblem;

fn small() -> PhaseConfig {
    PhaseConfig {
        scene: SceneTemplate { side: 8, frames: 2, ..SceneTemplate::default() },
        s_values: vec![1, 6],
        alpha_values: vec![4.0, 32.0],
        trials_per_cell: 8,
        base_seed: 42,
        ..PhaseConfig::default()
    }
}

#[test]
fn two_by_two_sweep_matches_golden_files() {
    let grid = run_phase_sweep(&small(), Execution::Parallel).unwrap();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let produced = [("small_phase.csv", render_csv(&grid).into_bytes()), ("small_phase.pgm", render_pgm(&grid))];
    for (name, bytes) in produced {
        let path = dir.join(name);
        if std::env::var_os("BLOCKSPARSE_BLESS").is_some() {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &bytes).unwrap();
        }
        assert_eq!(bytes, fs::read(&path).unwrap(), "{name}");
    }
}

#[test]
fn scheduling_does_not_change_the_grid() {
    let mut cfg = small();
    cfg.trials_per_cell = 1;
    let a = run_phase_sweep(&cfg, Execution::Sequential).unwrap();
    for exec in [Execution::Parallel, Execution::Workers(3), Execution::Sequential] {
        assert_eq!(run_phase_sweep(&cfg, exec).unwrap(), a);
    }
}

#[test]
fn cells_replay_from_their_seeds() {
    let cfg = small();
    let grid = run_phase_sweep(&cfg, Execution::Parallel).unwrap();
    let problem = DemixProblem::new(cfg.scene.geometry()).unwrap();
    let dct = dct_2d_matrix(cfg.scene.side);
    for (i, j) in [(0, 1), (1, 0)] {
        let outcomes: Vec<_> =
            (0..cfg.trials_per_cell).map(|t| run_trial(&cfg, &problem, &dct, i, j, t).unwrap()).collect();
        assert_eq!(&PhaseCell::from_outcomes(&outcomes), grid.cell(i, j));
        assert_eq!(outcomes[3].seed, trial_seed(42, i, j, 3));
    }
    assert!(grid.cells.iter().all(|c| c.successes <= c.trials));
}

#[test]
fn trial_seeds_do_not_collide() {
    let mut seen = HashSet::with_capacity(1_000_000);
    let mut collisions = 0;
    for s in 0..100 {
        for a in 0..100 {
            for t in 0..100 {
                collisions += usize::from(!seen.insert(trial_seed(12345, s, a, t)));
            }
        }
    }
    assert!(collisions <= 1, "{collisions} collisions");
}

#[test]
fn synthetic_step_grid_has_unit_slope() {
    let s_values: Vec<usize> = vec![1, 2, 4, 8, 16, 32];
    let alphas: Vec<f64> = (0..8).map(|k| f64::powi(2.0, k)).collect();
    let step = |succeeds: fn(f64, f64) -> bool| -> Vec<f64> {
        s_values
            .iter()
            .flat_map(|&s| alphas.iter().map(move |&a| if succeeds(a, s as f64) { 1.0 } else { 0.0 }))
            .collect()
    };

    // rate = 1{α ≥ s}: the boundary is the first succeeding α, which is s.
    let b = boundary_from_rates(&s_values, &alphas, &step(|a, s| a >= s));
    assert_eq!(b.points[0].alpha_half, None, "s = 1 column never fails");
    for p in &b.points[1..] {
        assert_eq!(p.alpha_half, Some(p.s as f64));
    }
    assert!((b.slope.unwrap() - 1.0).abs() < 0.01);

    // rate = 1{α > s}: first success is the next octave, 2s; same slope.
    let b = boundary_from_rates(&s_values, &alphas, &step(|a, s| a > s));
    for p in &b.points {
        assert_eq!(p.alpha_half, Some(2.0 * p.s as f64));
    }
    assert!((b.slope.unwrap() - 1.0).abs() < 0.01);
}
