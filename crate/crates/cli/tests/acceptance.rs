//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use blocksparse::certify::{check_corollary1, construct_pdw, CertifyOptions, Corollary1Input};
use blocksparse::dictionary::{coherence_report, demix_dictionary, CoherenceOptions, GroupPartition};
use blocksparse::experiments::{run_phase_sweep, PhaseConfig};
use blocksparse::linalg::Matrix;
use blocksparse::model::{build_demix_scene, SceneConfig, SupportMode};
use blocksparse::par::Execution;
use blocksparse::rng::SplitMix64;
use blocksparse::solver::{
    block_soft_threshold, extract_group_support, kkt_check, objective, solve_demix, solve_group_lasso,
    DemixGeometry, SolverOptions,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn random_unit_matrix(rng: &mut SplitMix64, n: usize, p: usize) -> Matrix {
    let mut m = Matrix::from_fn(n, p, |_, _| rng.gaussian());
    for j in 0..p {
        let c = norm(&m.column(j));
        for i in 0..n {
            m.set(i, j, m.get(i, j) / c);
        }
    }
    m
}

fn tight(kkt: f64, max_iterations: usize) -> SolverOptions {
    SolverOptions { kkt_tolerance: kkt, max_iterations, ..SolverOptions::default() }
}

// 1. Prox vs projected gradient on the epigraph form
//    min ½‖x − v‖² + λr  s.t. ‖x‖ ≤ r.
fn prox_objective(x: &[f64], v: &[f64], lambda: f64) -> f64 {
    0.5 * x.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + lambda * norm(x)
}

fn project_cone(x: &mut [f64], r: &mut f64) {
    let nx = norm(x);
    if nx <= *r {
        return;
    }
    if nx <= -*r {
        x.iter_mut().for_each(|e| *e = 0.0);
        *r = 0.0;
        return;
    }
    let a = 0.5 * (nx + *r);
    x.iter_mut().for_each(|e| *e *= a / nx);
    *r = a;
}

fn pgd_minimum(v: &[f64], lambda: f64, rng: &mut SplitMix64) -> f64 {
    (0..20)
        .map(|_| {
            let mut x: Vec<f64> = (0..v.len()).map(|_| 3.0 * rng.gaussian()).collect();
            let mut r = norm(&x) + rng.gaussian().abs();
            for _ in 0..4000 {
                let prev = x.clone();
                for (xi, vi) in x.iter_mut().zip(v) {
                    *xi -= 0.5 * (*xi - vi);
                }
                r -= 0.5 * lambda;
                project_cone(&mut x, &mut r);
                if prev.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-16) {
                    break;
                }
            }
            prox_objective(&x, v, lambda)
        })
        .fold(f64::INFINITY, f64::min)
}

fn criterion1() -> Outcome {
    let mut rng = SplitMix64::new(101);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let d = 1 + rng.below(8) as usize;
        let v: Vec<f64> = (0..d).map(|_| uniform(&mut rng, 0.2, 3.0) * rng.gaussian()).collect();
        let lambda = uniform(&mut rng, 0.0, 2.0 * norm(&v));
        let ours = prox_objective(&block_soft_threshold(&v, lambda), &v, lambda);
        worst = worst.max(ours - pgd_minimum(&v, lambda, &mut rng));
    }
    outcome(worst <= 1e-8, format!("max(F_prox − F_pgd) = {worst:.3e} over 1000 cases"))
}

// 2. KKT certification on random group-Lasso problems.
fn criterion2() -> Outcome {
    let part = GroupPartition::contiguous(&[4; 32]).unwrap();
    let mut worst = 0.0f64;
    let mut unconverged = 0;
    for seed in 0..200u64 {
        let mut rng = SplitMix64::new(2000 + seed);
        let x = random_unit_matrix(&mut rng, 64, 128);
        let mut beta = vec![0.0; 128];
        for g in 0..4 {
            let grp = rng.below(32) as usize;
            for &j in part.group(grp) {
                beta[j] = (2.0 + g as f64) * rng.gaussian();
            }
        }
        let y: Vec<f64> = x.matvec(&beta).iter().map(|v| v + 0.5 * rng.gaussian()).collect();
        let corr = x.tr_matvec(&y);
        let top = (0..32).map(|g| norm(&part.group(g).iter().map(|&j| corr[j]).collect::<Vec<_>>())).fold(0.0, f64::max);
        let lambdas = vec![uniform(&mut rng, 0.05, 0.5) * top; 32];
        let res = solve_group_lasso(&x, &y, &part, &lambdas, &tight(1e-6, 20_000)).unwrap();
        if !res.converged {
            unconverged += 1;
        }
        let rep = kkt_check(&x, &y, res.estimate.coefficients(), &part, &lambdas).unwrap();
        worst = worst.max(rep.residual);
    }
    outcome(
        unconverged == 0 && worst <= 1e-6,
        format!("200 instances, unconverged = {unconverged}, max KKT residual = {worst:.3e}"),
    )
}

// 3. X = I: solution equals the blockwise prox.
fn criterion3() -> Outcome {
    let mut rng = SplitMix64::new(303);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let p = 1 + rng.below(40) as usize;
        let mut cols: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            cols.swap(i, rng.below(i as u64 + 1) as usize);
        }
        let mut groups = Vec::new();
        let mut rest = &cols[..];
        while !rest.is_empty() {
            let k = 1 + rng.below(rest.len().min(6) as u64) as usize;
            groups.push(rest[..k].to_vec());
            rest = &rest[k..];
        }
        let part = GroupPartition::from_groups(groups, p).unwrap();
        let y: Vec<f64> = (0..p).map(|_| 2.0 * rng.gaussian()).collect();
        let lambdas: Vec<f64> = (0..part.num_groups()).map(|_| uniform(&mut rng, 0.01, 4.0)).collect();
        let res = solve_group_lasso(&Matrix::identity(p), &y, &part, &lambdas, &tight(1e-13, 1000)).unwrap();
        let est = res.estimate.coefficients();
        for g in 0..part.num_groups() {
            let v: Vec<f64> = part.group(g).iter().map(|&j| y[j]).collect();
            let scale = (1.0 - lambdas[g] / norm(&v)).max(0.0);
            for (&j, vi) in part.group(g).iter().zip(&v) {
                worst = worst.max((est[j] - scale * vi).abs());
            }
        }
    }
    outcome(worst <= 1e-10, format!("max |β̂ − prox(y)| = {worst:.3e} over 100 cases"))
}

// 4. Alternating demixing vs proximal gradient on the stacked dictionary.
fn criterion4() -> Outcome {
    let (side, frames, tile) = (8, 2, 4);
    let dict = demix_dictionary(side, frames, tile).unwrap();
    let geom = DemixGeometry { side, frames, tile_size: tile };
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let cfg = SceneConfig {
            side,
            frames,
            tile_size: tile,
            s1: 3,
            s2: 2,
            alpha: 6.0 + seed as f64,
            sigma: 1.0,
            seed,
            support_mode: SupportMode::PerComponent,
        };
        let inst = build_demix_scene(&cfg).unwrap();
        let (l1, l2) = (2.0, 4.0);
        let lambdas: Vec<f64> = (0..dict.num_groups()).map(|g| if g < side * side { l1 } else { l2 }).collect();
        let opts = SolverOptions { objective_rel_tolerance: 1e-14, ..tight(1e-9, 200_000) };
        let a = solve_demix(&inst.observations, geom, l1, l2, &opts).unwrap();
        let b = solve_group_lasso(&dict, &inst.observations, dict.partition(), &lambdas, &opts).unwrap();
        let fa = objective(&dict, &inst.observations, a.result.estimate.coefficients(), dict.partition(), &lambdas).unwrap();
        worst = worst.max((fa - b.final_objective).abs());
    }
    outcome(worst <= 1e-6, format!("max |F_demix − F_fista| = {worst:.3e} over 20 seeds"))
}

// 5. Coherence of the DCT⊕Dirac dictionaries.
fn criterion5() -> Outcome {
    let mut ok = true;
    let mut lines = Vec::new();
    for side in [4, 8, 16] {
        for frames in [1, 2] {
            let x = demix_dictionary(side, frames, 4).unwrap();
            let r = coherence_report(&x, &CoherenceOptions::default()).unwrap();
            let n = (side * side) as f64;
            let mu_b = r.mu_b.unwrap();
            let bound = (16.0 / n).sqrt();
            let sq = r.spectral_norm * r.spectral_norm;
            ok &= r.mu_i == 0.0 && mu_b <= bound && (sq - 2.0).abs() <= 1e-9;
            lines.push(format!("side={side} T={frames}: μ_I={} μ_B={mu_b:.4}≤{bound:.4} ‖X‖²−2={:.1e}", r.mu_i, sq - 2.0));
        }
    }
    outcome(ok, lines.join("; "))
}

// 6. Certified instances are recovered exactly by the full solver.
fn criterion6() -> Outcome {
    let (side, frames, tile) = (8, 2, 4);
    let geom = DemixGeometry { side, frames, tile_size: tile };
    let (l1, l2) = (5.0 * (frames as f64).sqrt(), 5.0 * ((frames * tile) as f64).sqrt());
    let options = CertifyOptions::default();
    let (mut certified, mut recovered, mut attempts) = (0, 0, 0u64);
    let (mut premises, mut bound_ok) = (0, 0);
    while certified < 250 && attempts < 5000 {
        let mut rng = SplitMix64::new(6_000_000 + attempts);
        let s2 = rng.below(3) as usize;
        let cfg = SceneConfig {
            side,
            frames,
            tile_size: tile,
            // Nonempty support only.
            s1: rng.below(4) as usize + usize::from(s2 == 0),
            s2,
            alpha: uniform(&mut rng, 8.0, 60.0),
            sigma: 1.0,
            seed: rng.next_u64(),
            support_mode: SupportMode::PerComponent,
        };
        attempts += 1;
        let inst = build_demix_scene(&cfg).unwrap();
        let n = side * side;
        let lambdas: Vec<f64> =
            (0..inst.dictionary.num_groups()).map(|g| if g < n { l1 } else { l2 }).collect();
        let Ok(cert) = construct_pdw(&inst, &lambdas, &options) else { continue };
        for p in &cert.perturbations {
            if p.premise {
                premises += 1;
                bound_ok += usize::from(p.bound_holds());
            }
        }
        if !(cert.strictly_feasible && cert.support_rank_ok && cert.restricted_blocks_nonvanishing()) {
            continue;
        }
        certified += 1;
        let sol = solve_demix(&inst.observations, geom, l1, l2, &tight(1e-10, 100_000)).unwrap();
        let rec = extract_group_support(sol.result.estimate.coefficients(), &inst.truth, 1e-6).unwrap();
        if sol.result.converged && rec.exact_match {
            recovered += 1;
        }
    }
    outcome(
        certified >= 200 && recovered == certified && bound_ok == premises,
        format!(
            "{recovered}/{certified} certified instances recovered ({attempts} drawn); \
             perturbation bound held on {bound_ok}/{premises} groups meeting its premise"
        ),
    )
}

// 7. Scaled phase transition.
fn criterion7() -> Outcome {
    let start = Instant::now();
    let config = PhaseConfig::default();
    let grid = run_phase_sweep(&config, Execution::Parallel).unwrap();
    let elapsed = start.elapsed();
    let s_idx = |s: usize| config.s_values.iter().position(|&v| v == s).unwrap();
    let a_idx = |a: f64| config.alpha_values.iter().position(|&v| v == a).unwrap();
    let high = grid.cell(s_idx(1), a_idx(64.0)).rate();
    let low = grid.cell(s_idx(32), a_idx(0.5)).rate();
    let monotone = (0..config.s_values.len()).all(|i| {
        let col = grid.column(i);
        let drops: Vec<f64> = col.windows(2).map(|w| w[0] - w[1]).filter(|d| *d > 0.0).collect();
        drops.len() <= 1 && drops.iter().all(|d| *d <= 0.1)
    });
    let slope = grid.boundary.slope;
    let slope_ok = slope.is_some_and(|m| m > 0.3 && m < 1.3);
    let checks = [
        ("rate(1,64)≥0.95", high >= 0.95),
        ("rate(32,0.5)≤0.05", low <= 0.05),
        ("monotone", monotone),
        ("slope∈(0.3,1.3)", slope_ok),
        ("runtime<15min", elapsed < Duration::from_secs(900)),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    let boundary: Vec<String> = grid
        .boundary
        .points
        .iter()
        .map(|p| format!("{}:{}", p.s, p.alpha_half.map_or("-".into(), |a| format!("{a:.2}"))))
        .collect();
    outcome(
        failed.is_empty(),
        format!(
            "rate(1,64)={high:.2} rate(32,0.5)={low:.2} monotone={monotone} slope={} boundary=[{}] \
             nonconverged={} time={:.1}s{}",
            slope.map_or("none".into(), |m| format!("{m:.3}")),
            boundary.join(" "),
            grid.nonconverged,
            elapsed.as_secs_f64(),
            if failed.is_empty() { String::new() } else { format!(" — failed: {}", failed.join(", ")) }
        ),
    )
}

// 8. Condition-checker arithmetic at N = 10⁴, T = 8, D = 4.
fn criterion8() -> Outcome {
    let rep = check_corollary1(&Corollary1Input::new(10_000, 8, 4, 0, 0, 1.0)).unwrap();
    let c1 = rep.conditions.iter().find(|c| c.name.starts_with("1:")).unwrap();
    // 2·ln(160000)/0.001 · √(4³·8)
    let hand = 2.0 * (2.0f64 * 10_000.0 * 8.0).ln() / 0.001 * (64.0f64 * 8.0).sqrt();
    let rel = (c1.rhs - hand).abs() / hand;
    let ratio = rep.lambdas[1] / rep.lambdas[0];
    let ok = rel <= 0.01 && c1.lhs == 100.0 && !c1.satisfied && (ratio - 2.0).abs() <= 4.0 * f64::EPSILON;
    outcome(
        ok,
        format!("cond1 lhs={} rhs={:.5e} (hand {hand:.5e}, rel {rel:.1e}), λ₂/λ₁={ratio}", c1.lhs, c1.rhs),
    )
}

// 9. Phase subcommand is byte-identical across runs and worker counts.
fn criterion9() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for (i, workers) in [1, 4, 1, 4].into_iter().enumerate() {
        let dir = tmp.path().join(format!("run{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_blocksparse"))
            .args(["phase", "-o", dir.to_str().unwrap(), "--set", "seed=2024"])
            .args(["--set", &format!("workers={workers}")])
            .status()
            .unwrap();
        if !status.success() {
            return outcome(false, format!("phase exited with {status}"));
        }
        outputs.push((fs::read(dir.join("phase.csv")).unwrap(), fs::read(dir.join("phase.pgm")).unwrap()));
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(same, "desk grid, seed 2024, workers 1/4/1/4")
}

// 10. Singleton groups vs coordinate-descent Lasso.
fn coordinate_descent(x: &Matrix, y: &[f64], lambda: f64) -> Vec<f64> {
    let p = x.cols();
    let cols: Vec<Vec<f64>> = (0..p).map(|j| x.column(j)).collect();
    let mut beta = vec![0.0; p];
    let mut r = y.to_vec();
    for _ in 0..200_000 {
        let mut change = 0.0f64;
        for j in 0..p {
            let z = beta[j] + cols[j].iter().zip(&r).map(|(a, b)| a * b).sum::<f64>();
            let new = z.signum() * (z.abs() - lambda).max(0.0);
            let d = new - beta[j];
            if d != 0.0 {
                for (ri, cij) in r.iter_mut().zip(&cols[j]) {
                    *ri -= d * cij;
                }
                beta[j] = new;
                change = change.max(d.abs());
            }
        }
        if change < 1e-15 {
            break;
        }
    }
    beta
}

fn criterion10() -> Outcome {
    let part = GroupPartition::singletons(64).unwrap();
    let mut worst = 0.0f64;
    for seed in 0..50u64 {
        let mut rng = SplitMix64::new(10_000 + seed);
        let x = random_unit_matrix(&mut rng, 32, 64);
        let mut beta = vec![0.0; 64];
        for _ in 0..5 {
            beta[rng.below(64) as usize] = 3.0 * rng.gaussian();
        }
        let y: Vec<f64> = x.matvec(&beta).iter().map(|v| v + 0.3 * rng.gaussian()).collect();
        let lmax = x.tr_matvec(&y).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let lambda = uniform(&mut rng, 0.1, 0.5) * lmax;
        let oracle = coordinate_descent(&x, &y, lambda);
        let res = solve_group_lasso(&x, &y, &part, &vec![lambda; 64], &tight(1e-12, 500_000)).unwrap();
        let diff = res.estimate.coefficients().iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        worst = worst.max(diff);
    }
    outcome(worst <= 1e-8, format!("max |β̂ − β_cd| = {worst:.3e} over 50 instances"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("prox oracle", criterion1),
        ("KKT certification", criterion2),
        ("orthonormal closed form", criterion3),
        ("cross-solver equivalence", criterion4),
        ("coherence bounds", criterion5),
        ("PDW soundness", criterion6),
        ("scaled phase transition", criterion7),
        ("condition-checker arithmetic", criterion8),
        ("determinism", criterion9),
        ("Lasso reduction", criterion10),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failures += usize::from(!o.pass);
        println!(
            "criterion {:>2} {:<30} {} [{:.1}s] {}",
            i + 1,
            name,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
