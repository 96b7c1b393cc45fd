use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use blocksparse::certify::{
    check_corollary1, check_events, check_theorem1, construct_pdw, CertifyOptions, ConditionConstants,
    Corollary1Input,
};
use blocksparse::dictionary::{
    coherence_report, demix_dictionary, intra_block_coherence, CoherenceOptions, GroupPartition,
};
use blocksparse::experiments::{self, LambdaMode, PhaseConfig, SceneTemplate};
use blocksparse::dictionary::io::load_bdx;
use blocksparse::model::io::{load_six, load_wfd, save_six};
use blocksparse::model::{build_demix_scene, generate_demix_scene, SceneConfig, SupportMode, SyntheticInstance};
use blocksparse::par::Execution;
use blocksparse::solver::{solve_demix, solve_group_lasso, DemixGeometry, LambdaSchedule, SolverOptions};

use crate::config::Config;
use crate::error::CliError;

fn output_dir(cfg: &Config) -> Result<PathBuf, CliError> {
    let dir = PathBuf::from(cfg.str_or("io.output_dir", ".")?);
    fs::create_dir_all(&dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    write(path, text)
}

fn require_input(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Io(format!("missing input file {}", path.display())))
    }
}

fn geometry(cfg: &Config) -> Result<(usize, usize, usize), CliError> {
    Ok((cfg.usize_or("scene.side", 16)?, cfg.usize_or("scene.T", 4)?, cfg.usize_or("scene.D", 4)?))
}

fn scene(cfg: &Config) -> Result<SceneConfig, CliError> {
    let (side, frames, tile_size) = geometry(cfg)?;
    let scene = SceneConfig {
        side,
        frames,
        tile_size,
        s1: cfg.usize_or("scene.s1", 2)?,
        s2: cfg.usize_or("scene.s2", 1)?,
        alpha: cfg.f64_or("scene.alpha", 20.0)?,
        sigma: cfg.f64_or("scene.sigma", 1.0)?,
        seed: cfg.u64_or("seed", 0)?,
        support_mode: SupportMode::PerComponent,
    };
    scene.validate()?;
    Ok(scene)
}

fn solver_options(cfg: &Config) -> Result<SolverOptions, CliError> {
    let d = SolverOptions::default();
    let opts = SolverOptions {
        max_iterations: cfg.usize_or("solver.max_iterations", d.max_iterations)?,
        kkt_tolerance: cfg.f64_or("solver.kkt_tolerance", d.kkt_tolerance)?,
        objective_rel_tolerance: cfg.f64_or("solver.objective_rel_tolerance", d.objective_rel_tolerance)?,
        ..d
    };
    opts.validate()?;
    Ok(opts)
}

fn lambda_mode(cfg: &Config) -> Result<LambdaMode, CliError> {
    match cfg.str_or("lambda.mode", "experiment")?.as_str() {
        "experiment" => Ok(LambdaMode::Experiment),
        "theorem1" => Ok(LambdaMode::Theorem1),
        "explicit" => {
            let lambda1 = cfg
                .f64_opt("lambda.lambda1")?
                .ok_or_else(|| CliError::Validation("`lambda.lambda1` is required in explicit mode".into()))?;
            let lambda2 = cfg.f64_opt("lambda.lambda2")?.unwrap_or(lambda1);
            if !(lambda1 > 0.0 && lambda2 > 0.0) {
                return Err(CliError::Validation("invalid value for `lambda.lambda1`/`lambda.lambda2`: must be positive".into()));
            }
            Ok(LambdaMode::Explicit { lambda1, lambda2 })
        }
        other => Err(CliError::Validation(format!(
            "invalid value for `lambda.mode`: `{other}` (expected experiment, theorem1 or explicit)"
        ))),
    }
}

/// Per-group weights on the raw data scale.
///
/// `smooth_groups` is the number of leading groups that take `lambda1` in
/// explicit mode (all of them for a generic instance). The experiment
/// schedule `(5/α)√d_g` is defined on data divided by α; on the raw scale it
/// is `5√d_g`, which gives the same support and an estimate scaled by α.
fn weights(
    cfg: &Config,
    partition: &GroupPartition,
    smooth_groups: usize,
    theorem_epsilon: f64,
) -> Result<LambdaSchedule, CliError> {
    let schedule = match lambda_mode(cfg)? {
        LambdaMode::Experiment => {
            let alpha = cfg.f64_or("scene.alpha", 20.0)?;
            let s = LambdaSchedule::experiment(partition, alpha)?;
            LambdaSchedule::explicit(s.per_group().iter().map(|l| l * alpha).collect())?
        }
        LambdaMode::Theorem1 => {
            LambdaSchedule::theorem1(partition, cfg.f64_or("scene.sigma", 1.0)?, theorem_epsilon)?
        }
        LambdaMode::Explicit { lambda1, lambda2 } => LambdaSchedule::explicit(
            (0..partition.num_groups()).map(|g| if g < smooth_groups { lambda1 } else { lambda2 }).collect(),
        )?,
    };
    Ok(schedule)
}

/// `√(2 ln(2NT)/T)` for demixing scenes.
fn demix_epsilon(side: usize, frames: usize) -> f64 {
    let nt = (side * side * frames) as f64;
    (2.0 * (2.0 * nt).ln() / frames as f64).sqrt()
}

/// `√((1+μ_I) ln(pG)/d_min)` for generic instances.
fn generic_epsilon(inst: &SyntheticInstance) -> Result<f64, CliError> {
    let (mu_i, _) = intra_block_coherence(&inst.dictionary)?;
    let part = inst.dictionary.partition();
    let pg = (part.p() * part.num_groups()) as f64;
    Ok(((1.0 + mu_i) * pg.ln() / part.d_min() as f64).sqrt())
}

/// Instance from `--input` or a fresh scene, plus the number of smooth
/// groups and the ε for theorem-mode weights.
fn instance(cfg: &Config, input: Option<&Path>) -> Result<(SyntheticInstance, usize, f64, Option<SceneConfig>), CliError> {
    match input {
        Some(path) => {
            require_input(path)?;
            let inst = load_six(path)?;
            let eps = generic_epsilon(&inst)?;
            let g = inst.dictionary.partition().num_groups();
            Ok((inst, g, eps, None))
        }
        None => {
            let sc = scene(cfg)?;
            let inst = build_demix_scene(&sc)?;
            Ok((inst, sc.smooth_groups(), demix_epsilon(sc.side, sc.frames), Some(sc)))
        }
    }
}

pub fn gen(cfg: &Config) -> Result<(), CliError> {
    let sc = scene(cfg)?;
    let dir = output_dir(cfg)?;
    let inst = build_demix_scene(&sc)?;
    let path = dir.join("instance.six");
    save_six(&path, &inst).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

pub fn coherence(cfg: &Config, input: Option<&Path>) -> Result<(), CliError> {
    let dict = match input {
        Some(path) => {
            require_input(path)?;
            load_bdx(path)?
        }
        None => {
            let (side, frames, tile) = geometry(cfg)?;
            demix_dictionary(side, frames, tile)?
        }
    };
    let dir = output_dir(cfg)?;
    let opts = CoherenceOptions { execution: Execution::Sequential, ..Default::default() };
    let report = coherence_report(&dict, &opts)?;
    write_json(&dir.join("coherence.json"), &serde_json::to_value(&report).expect("serializable"))
}

pub fn solve(cfg: &Config, input: Option<&Path>) -> Result<(), CliError> {
    let (inst, smooth, eps, _) = instance(cfg, input)?;
    let opts = solver_options(cfg)?;
    let dir = output_dir(cfg)?;
    let part = inst.dictionary.partition();
    let schedule = weights(cfg, part, smooth, eps)?;
    let result = solve_group_lasso(&inst.dictionary, &inst.observations, part, schedule.per_group(), &opts)?;
    write_json(
        &dir.join("solve.json"),
        &json!({ "lambda": schedule, "result": result.summary() }),
    )?;
    result.save_estimate(dir.join("estimate.bin"))?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!("solver stopped after {} iterations", result.iterations)))
    }
}

pub fn demix(cfg: &Config, input: Option<&Path>) -> Result<(), CliError> {
    let opts = solver_options(cfg)?;
    let (y, geom) = match input {
        Some(path) => {
            require_input(path)?;
            let field = load_wfd(path)?;
            let side = field.square_side()?;
            let (_, _, tile) = geometry(cfg)?;
            (field.data, DemixGeometry { side, frames: field.frames, tile_size: tile })
        }
        None => {
            let sc = scene(cfg)?;
            let dct = blocksparse::dictionary::dct_2d_matrix(sc.side);
            let y = generate_demix_scene(&sc, &dct)?.observations;
            (y, DemixGeometry { side: sc.side, frames: sc.frames, tile_size: sc.tile_size })
        }
    };
    let dir = output_dir(cfg)?;
    let part = blocksparse::model::demix_partition(geom.side, geom.frames, geom.tile_size)?;
    let schedule = weights(cfg, &part, geom.pixels(), demix_epsilon(geom.side, geom.frames))?;
    let (lambda1, lambda2) = (schedule.per_group()[0], schedule.per_group()[part.num_groups() - 1]);
    let sol = solve_demix(&y, geom, lambda1, lambda2, &opts)?;
    let result = &sol.result;
    let (smooth, anomaly): (Vec<usize>, Vec<usize>) = result.estimate.support().iter().partition(|&&g| g < geom.pixels());
    write_json(
        &dir.join("demix.json"),
        &json!({
            "geometry": geom,
            "lambda1": lambda1,
            "lambda2": lambda2,
            "smooth_support": smooth,
            "anomaly_tiles": anomaly.iter().map(|g| g - geom.pixels()).collect::<Vec<_>>(),
            "result": result.summary(),
        }),
    )?;
    result.save_estimate(dir.join("estimate.bin"))?;
    if result.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!("demixing stopped after {} sweeps", result.iterations)))
    }
}

pub fn certify(cfg: &Config, input: Option<&Path>) -> Result<(), CliError> {
    let (inst, smooth, eps, sc) = instance(cfg, input)?;
    let solver = solver_options(cfg)?;
    let dir = output_dir(cfg)?;
    let constants = ConditionConstants {
        c0: cfg.f64_or("certify.c0", 0.067)?,
        c1: cfg.f64_or("certify.c1", 0.001)?,
        epsilon_override: cfg.f64_opt("certify.epsilon_override")?,
    };
    let part = inst.dictionary.partition();
    let schedule = weights(cfg, part, smooth, eps)?;
    let options = CertifyOptions {
        solver: SolverOptions {
            kkt_tolerance: solver.kkt_tolerance.min(CertifyOptions::default().solver.kkt_tolerance),
            ..solver
        },
        ..CertifyOptions::default()
    };
    let certificate = construct_pdw(&inst, schedule.per_group(), &options)?;
    let events = check_events(&inst, schedule.per_group(), Some(&certificate), options.c4)?;
    let support = inst.truth.support().to_vec();
    let norms: Vec<f64> = support.iter().map(|&g| inst.truth.group_norm(g)).collect();
    let theorem = check_theorem1(&inst.dictionary, &support, &norms, inst.sigma, &constants)?;
    let corollary = match &sc {
        Some(sc) => {
            let mut input = Corollary1Input::new(sc.pixels(), sc.frames, sc.tile_size, sc.s1, sc.s2, sc.sigma);
            input.c1 = constants.c1;
            input.epsilon_override = constants.epsilon_override;
            for (&g, &n) in support.iter().zip(&norms) {
                if g < sc.smooth_groups() {
                    input.smooth_norms.push(n);
                } else {
                    input.anomaly_norms.push(n);
                }
            }
            Some(check_corollary1(&input)?)
        }
        None => None,
    };
    write_json(
        &dir.join("certify.json"),
        &json!({
            "lambda": schedule,
            "certificate": certificate,
            "events": events,
            "theorem1": theorem,
            "corollary1": corollary,
        }),
    )?;
    if certificate.restricted.converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(format!(
            "restricted solve stopped after {} iterations",
            certificate.restricted.iterations
        )))
    }
}

pub fn phase(cfg: &Config) -> Result<(), CliError> {
    let (side, frames, tile_size) = geometry(cfg)?;
    let defaults = PhaseConfig::default();
    let config = PhaseConfig {
        scene: SceneTemplate {
            side,
            frames,
            tile_size,
            sigma: cfg.f64_or("scene.sigma", 1.0)?,
            support_mode: SupportMode::Pooled,
        },
        s_values: cfg.usize_list("phase.s_values")?.unwrap_or(defaults.s_values),
        alpha_values: cfg.f64_list("phase.alpha_values")?.unwrap_or(defaults.alpha_values),
        trials_per_cell: cfg.usize_or("phase.trials_per_cell", defaults.trials_per_cell)?,
        lambda_mode: lambda_mode(cfg)?,
        epsilon_p: cfg.f64_or("phase.epsilon_p", defaults.epsilon_p)?,
        base_seed: cfg.u64_or("seed", 0)?,
        solver: solver_options(cfg)?,
    };
    let exec = match cfg.usize_opt("workers")? {
        Some(0) => return Err(CliError::Validation("invalid value for `workers`: must be >= 1".into())),
        Some(1) => Execution::Sequential,
        Some(n) => Execution::Workers(n),
        None => Execution::Parallel,
    };
    let dir = output_dir(cfg)?;
    let grid = experiments::run_phase_sweep(&config, exec)?;
    write(&dir.join("phase.csv"), experiments::render_csv(&grid))?;
    write(&dir.join("phase.pgm"), experiments::render_pgm(&grid))?;
    experiments::save_manifest(dir.join("manifest.json"), &grid)?;
    if grid.nonconverged > 0 {
        eprintln!("note: {} trials did not converge (counted as failures)", grid.nonconverged);
    }
    Ok(())
}

pub fn render(cfg: &Config, manifest: Option<&Path>) -> Result<(), CliError> {
    let dir = output_dir(cfg)?;
    let path = manifest.map(Path::to_path_buf).unwrap_or_else(|| dir.join("manifest.json"));
    require_input(&path)?;
    let grid = experiments::load_manifest(&path)?;
    write(&dir.join("phase.csv"), experiments::render_csv(&grid))?;
    write(&dir.join("phase.pgm"), experiments::render_pgm(&grid))
}
