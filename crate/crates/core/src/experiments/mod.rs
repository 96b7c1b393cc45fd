//! Monte-Carlo phase-transition sweeps over (group sparsity, signal strength).
//!
//! Every trial draws its scene from [`trial_seed`], so a cell can be replayed
//! on its own and the tallies do not depend on how trials are scheduled.

mod render;

use serde::{Deserialize, Serialize};

use crate::dictionary::dct_2d_matrix;
use crate::error::{Error, Result};
use crate::model::{generate_demix_scene, SceneConfig, SupportMode};
use crate::par::{map_indexed, Execution};
use crate::rng::{splitmix64_finalize, GOLDEN_GAMMA, MIX_A, MIX_B};
use crate::solver::{extract_group_support, DemixGeometry, DemixProblem, SolverOptions};

pub use render::{load_manifest, render, render_csv, render_pgm, save_manifest, Manifest};

/// Seed of trial `t` in cell `(s, a)`:
/// `finalize(base ^ (s·0x9E3779B97F4A7C15 + a·0xBF58476D1CE4E5B9 + t·0x94D049BB133111EB))`
/// with wrapping arithmetic.
pub fn trial_seed(base_seed: u64, s_index: usize, alpha_index: usize, trial_index: usize) -> u64 {
    let mix = (s_index as u64)
        .wrapping_mul(GOLDEN_GAMMA)
        .wrapping_add((alpha_index as u64).wrapping_mul(MIX_A))
        .wrapping_add((trial_index as u64).wrapping_mul(MIX_B));
    splitmix64_finalize(base_seed ^ mix)
}

/// Fixed part of every scene in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTemplate {
    pub side: usize,
    pub frames: usize,
    pub tile_size: usize,
    pub sigma: f64,
    /// `Pooled` draws all `s` groups from the whole partition;
    /// `PerComponent` puts `⌈s/2⌉` in the smooth and `⌊s/2⌋` in the anomaly part.
    pub support_mode: SupportMode,
}

impl Default for SceneTemplate {
    fn default() -> Self {
        Self {
            side: 16,
            frames: 4,
            tile_size: 4,
            sigma: 1.0,
            support_mode: SupportMode::Pooled,
        }
    }
}

impl SceneTemplate {
    pub fn scene(&self, s: usize, alpha: f64, seed: u64) -> SceneConfig {
        let (s1, s2) = match self.support_mode {
            SupportMode::Pooled => (s, 0),
            SupportMode::PerComponent => (s - s / 2, s / 2),
        };
        SceneConfig {
            side: self.side,
            frames: self.frames,
            tile_size: self.tile_size,
            s1,
            s2,
            alpha,
            sigma: self.sigma,
            seed,
            support_mode: self.support_mode,
        }
    }

    pub fn geometry(&self) -> DemixGeometry {
        DemixGeometry {
            side: self.side,
            frames: self.frames,
            tile_size: self.tile_size,
        }
    }
}

/// Regularization used for each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LambdaMode {
    /// `λ_g = 4σ(1+ε)√d_g` with `ε = √(2 ln(2NT)/T)`, on the raw data.
    Theorem1,
    /// `λ₁ = (5/α)√T`, `λ₂ = (5/α)√(TD)` applied to `y/α`, i.e. on the scale
    /// where the group magnitudes are 1 and the noise level is `σ/α`.
    Experiment,
    /// Fixed weights on the raw data.
    Explicit { lambda1: f64, lambda2: f64 },
}

/// Weights for one strength value, recorded in the run manifest.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Data divided by `alpha` before solving.
    pub normalized: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub scene: SceneTemplate,
    pub s_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
    pub trials_per_cell: usize,
    pub lambda_mode: LambdaMode,
    pub epsilon_p: f64,
    pub base_seed: u64,
    pub solver: SolverOptions,
}

impl Default for PhaseConfig {
    /// The desk grid: 16×16 pixels, 4 frames, 2×2 tiles, α on a √2-spaced
    /// grid from 0.5 to 64.
    fn default() -> Self {
        Self {
            scene: SceneTemplate::default(),
            s_values: vec![1, 2, 4, 8, 16, 32],
            alpha_values: desk_alpha_grid(),
            trials_per_cell: 50,
            lambda_mode: LambdaMode::Experiment,
            epsilon_p: 1e-6,
            base_seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

impl PhaseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.s_values.is_empty() || self.alpha_values.is_empty() {
            return bad("phase.s_values and phase.alpha_values must be nonempty".into());
        }
        if !self.s_values.windows(2).all(|w| w[0] < w[1]) {
            return bad("phase.s_values must be strictly ascending".into());
        }
        if !self.alpha_values.windows(2).all(|w| w[0] < w[1]) {
            return bad("phase.alpha_values must be strictly ascending".into());
        }
        if !self.alpha_values.iter().all(|a| *a > 0.0 && a.is_finite()) {
            return bad("phase.alpha_values must be positive and finite".into());
        }
        if self.trials_per_cell == 0 {
            return bad("phase.trials_per_cell must be >= 1".into());
        }
        if !(self.epsilon_p > 0.0) {
            return bad("phase.epsilon_p must be positive".into());
        }
        if let LambdaMode::Explicit { lambda1, lambda2 } = self.lambda_mode {
            if !(lambda1 > 0.0 && lambda2 > 0.0 && lambda1.is_finite() && lambda2.is_finite()) {
                return bad("lambda.lambda1 and lambda.lambda2 must be positive".into());
            }
        }
        self.solver.validate()?;
        let s_max = *self.s_values.last().unwrap_or(&0);
        self.scene.scene(s_max, self.alpha_values[0], 0).validate()
    }

    pub fn lambda_row(&self, alpha: f64) -> LambdaRow {
        let t = self.scene.frames as f64;
        let d = self.scene.tile_size as f64;
        match self.lambda_mode {
            LambdaMode::Theorem1 => {
                let nt = (self.scene.side * self.scene.side) as f64 * t;
                let eps = (2.0 * (2.0 * nt).ln() / t).sqrt();
                let base = 4.0 * self.scene.sigma * (1.0 + eps);
                LambdaRow { alpha, lambda1: base * t.sqrt(), lambda2: base * (t * d).sqrt(), normalized: false }
            }
            LambdaMode::Experiment => LambdaRow {
                alpha,
                lambda1: 5.0 / alpha * t.sqrt(),
                lambda2: 5.0 / alpha * (t * d).sqrt(),
                normalized: true,
            },
            LambdaMode::Explicit { lambda1, lambda2 } => LambdaRow { alpha, lambda1, lambda2, normalized: false },
        }
    }
}

/// `0.5·√2^k` for `k = 0..=14`; even powers are exact.
pub fn desk_alpha_grid() -> Vec<f64> {
    (0..15)
        .map(|k| {
            let octave = 0.5 * f64::powi(2.0, k / 2);
            if k % 2 == 1 {
                octave * std::f64::consts::SQRT_2
            } else {
                octave
            }
        })
        .collect()
}

/// Outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub success: bool,
    pub converged: bool,
    pub precision: f64,
    pub recall: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseCell {
    pub trials: usize,
    pub successes: usize,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_solve_iterations: f64,
}

impl PhaseCell {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    /// Tally in trial order.
    pub fn from_outcomes(outcomes: &[TrialOutcome]) -> Self {
        let n = outcomes.len().max(1) as f64;
        let (mut p, mut r, mut it) = (0.0, 0.0, 0.0);
        for o in outcomes {
            p += o.precision;
            r += o.recall;
            it += o.iterations as f64;
        }
        Self {
            trials: outcomes.len(),
            successes: outcomes.iter().filter(|o| o.success).count(),
            mean_precision: p / n,
            mean_recall: r / n,
            mean_solve_iterations: it / n,
        }
    }
}

/// Boundary estimate for one sparsity level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub s: usize,
    /// `None` when every rate in the column is the same.
    pub alpha_half: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub points: Vec<BoundaryPoint>,
    /// Least-squares slope of `ln α_half` against `ln s`; needs two points.
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub config: PhaseConfig,
    /// Row-major in `s`: cell `(i, j)` is at `i·|alpha_values| + j`.
    pub cells: Vec<PhaseCell>,
    pub nonconverged: usize,
    pub lambdas: Vec<LambdaRow>,
    pub boundary: Boundary,
}

impl PhaseGrid {
    pub fn cell(&self, s_index: usize, alpha_index: usize) -> &PhaseCell {
        &self.cells[s_index * self.config.alpha_values.len() + alpha_index]
    }

    pub fn rates(&self) -> Vec<f64> {
        self.cells.iter().map(PhaseCell::rate).collect()
    }

    /// Rates for one `s` column, ascending in α.
    pub fn column(&self, s_index: usize) -> Vec<f64> {
        let m = self.config.alpha_values.len();
        self.cells[s_index * m..(s_index + 1) * m].iter().map(PhaseCell::rate).collect()
    }
}

/// Runs one trial. Non-convergence (or a solver error) counts as failure.
pub fn run_trial(
    config: &PhaseConfig,
    problem: &DemixProblem,
    dct: &crate::linalg::Matrix,
    s_index: usize,
    alpha_index: usize,
    trial_index: usize,
) -> Result<TrialOutcome> {
    let alpha = config.alpha_values[alpha_index];
    let seed = trial_seed(config.base_seed, s_index, alpha_index, trial_index);
    let scene = generate_demix_scene(&config.scene.scene(config.s_values[s_index], alpha, seed), dct)?;
    let row = config.lambda_row(alpha);
    let scale = if row.normalized { alpha } else { 1.0 };
    let y: Vec<f64> = scene.observations.iter().map(|v| v / scale).collect();
    let failed = TrialOutcome { seed, success: false, converged: false, precision: 0.0, recall: 0.0, iterations: 0 };
    let Ok(sol) = problem.solve(&y, row.lambda1, row.lambda2, &config.solver) else {
        return Ok(failed);
    };
    let estimate: Vec<f64> = sol.result.estimate.coefficients().iter().map(|b| b * scale).collect();
    let rec = extract_group_support(&estimate, &scene.truth, config.epsilon_p)?;
    Ok(TrialOutcome {
        seed,
        success: rec.exact_match && sol.result.converged,
        converged: sol.result.converged,
        precision: rec.precision,
        recall: rec.recall,
        iterations: sol.result.iterations,
    })
}

/// Runs every trial of the grid, scheduled per `exec`, and tallies per cell
/// in trial order.
pub fn run_phase_sweep(config: &PhaseConfig, exec: Execution) -> Result<PhaseGrid> {
    config.validate()?;
    let problem = DemixProblem::new(config.scene.geometry())?;
    let dct = dct_2d_matrix(config.scene.side);
    let (m, k) = (config.alpha_values.len(), config.trials_per_cell);
    let cells_total = config.s_values.len() * m;
    let outcomes = map_indexed(cells_total * k, exec, |idx| {
        let (cell, t) = (idx / k, idx % k);
        run_trial(config, &problem, &dct, cell / m, cell % m, t)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let cells: Vec<PhaseCell> = outcomes.chunks(k).map(PhaseCell::from_outcomes).collect();
    let nonconverged = outcomes.iter().filter(|o| !o.converged).count();
    let lambdas = config.alpha_values.iter().map(|&a| config.lambda_row(a)).collect();
    let mut grid = PhaseGrid {
        config: config.clone(),
        cells,
        nonconverged,
        lambdas,
        boundary: Boundary { points: Vec::new(), slope: None },
    };
    grid.boundary = extract_boundary(&grid);
    Ok(grid)
}

pub fn extract_boundary(grid: &PhaseGrid) -> Boundary {
    boundary_from_rates(&grid.config.s_values, &grid.config.alpha_values, &grid.rates())
}

/// Per column, the α whose rate is nearest 0.5.
///
/// Ties prefer α values adjacent to a crossing of 0.5 (so a clean 0→1 step
/// resolves to its edge instead of the first grid point), then the
/// succeeding side of the crossing, then the smaller α. `rates` is row-major in `s`.
pub fn boundary_from_rates(s_values: &[usize], alpha_values: &[f64], rates: &[f64]) -> Boundary {
    let m = alpha_values.len();
    let points: Vec<BoundaryPoint> = s_values
        .iter()
        .zip(rates.chunks(m))
        .map(|(&s, col)| BoundaryPoint { s, alpha_half: column_half(alpha_values, col) })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.s > 0)
        .filter_map(|p| p.alpha_half.map(|a| ((p.s as f64).ln(), a.ln())))
        .unzip();
    Boundary { slope: least_squares_slope(&xs, &ys), points }
}

fn column_half(alpha_values: &[f64], col: &[f64]) -> Option<f64> {
    if col.iter().all(|&r| r == col[0]) {
        return None;
    }
    let side = |r: f64| (r - 0.5).signum();
    let at_crossing = |i: usize| {
        col[i] == 0.5
            || (i > 0 && side(col[i - 1]) != side(col[i]))
            || (i + 1 < col.len() && side(col[i + 1]) != side(col[i]))
    };
    let best = (0..col.len()).min_by(|&a, &b| {
        let (da, db) = ((col[a] - 0.5).abs(), (col[b] - 0.5).abs());
        da.total_cmp(&db)
            .then(at_crossing(b).cmp(&at_crossing(a)))
            .then((col[b] >= 0.5).cmp(&(col[a] >= 0.5)))
            .then(a.cmp(&b))
    })?;
    Some(alpha_values[best])
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seed_reference_values() {
        assert_eq!(trial_seed(0, 0, 0, 0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(trial_seed(0, 1, 0, 0), splitmix64_finalize(GOLDEN_GAMMA));
        assert_ne!(trial_seed(7, 1, 2, 3), trial_seed(7, 1, 3, 2));
    }

    #[test]
    fn tie_rule_takes_first_success_at_the_step() {
        let b = boundary_from_rates(&[1], &[1.0, 2.0, 3.0, 4.0], &[0.0, 0.0, 1.0, 1.0]);
        assert_eq!(b.points[0].alpha_half, Some(3.0));
        assert_eq!(b.slope, None);
    }

    #[test]
    fn nearest_half_wins_over_crossing() {
        let b = boundary_from_rates(&[1], &[1.0, 2.0, 3.0], &[0.45, 0.0, 1.0]);
        assert_eq!(b.points[0].alpha_half, Some(1.0));
    }

    #[test]
    fn flat_column_is_absent() {
        let b = boundary_from_rates(&[1, 2, 4], &[1.0, 2.0], &[1.0, 1.0, 0.0, 1.0, 0.0, 0.4]);
        assert_eq!(b.points[0].alpha_half, None);
        assert_eq!(b.points[1].alpha_half, Some(2.0));
        assert!(b.slope.is_some());
    }

    #[test]
    fn default_config_matches_desk_grid() {
        let c = PhaseConfig::default();
        c.validate().unwrap();
        assert_eq!(c.alpha_values.first(), Some(&0.5));
        assert_eq!(c.alpha_values.last(), Some(&64.0));
        assert_eq!(c.alpha_values.len(), 15);
        let row = c.lambda_row(2.0);
        assert_eq!((row.lambda1, row.lambda2), (5.0, 10.0));
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let mut c = PhaseConfig::default();
        c.s_values = vec![2, 1];
        assert!(c.validate().is_err());
        let mut c = PhaseConfig::default();
        c.trials_per_cell = 0;
        assert!(c.validate().is_err());
        let mut c = PhaseConfig::default();
        c.s_values = vec![1000];
        assert!(c.validate().is_err());
    }
}
