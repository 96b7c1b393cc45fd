use super::{check_shapes, kkt_residuals, penalty, shrink_in_place, SolverOptions, SolverResult, StepRule};
use crate::dictionary::GroupPartition;
use crate::error::{Error, Result};
use crate::linalg::{dot, LinearOperator};
use crate::model::GroupSparseSignal;

fn half_rss(ax: &[f64], y: &[f64]) -> f64 {
    0.5 * ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

fn prox_step(
    point: &[f64],
    grad: &[f64],
    step: f64,
    partition: &GroupPartition,
    lambdas: &[f64],
    out: &mut [f64],
    block: &mut Vec<f64>,
) {
    for (cols, &lam) in partition.groups().iter().zip(lambdas) {
        block.clear();
        block.extend(cols.iter().map(|&j| point[j] - step * grad[j]));
        shrink_in_place(block, step * lam);
        for (&j, &v) in cols.iter().zip(block.iter()) {
            out[j] = v;
        }
    }
}

/// Accelerated proximal gradient (FISTA) with optional gradient-based
/// restart. Stops as soon as the KKT residual, checked every
/// `kkt_interval` iterations, drops to `kkt_tolerance`.
pub fn solve_group_lasso<A: LinearOperator + ?Sized>(
    x: &A,
    y: &[f64],
    partition: &GroupPartition,
    lambdas: &[f64],
    options: &SolverOptions,
) -> Result<SolverResult> {
    options.validate()?;
    let p = x.ncols();
    check_shapes(x, y, &vec![0.0; p], partition, lambdas)?;
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {l}")));
    }
    let n = x.nrows();

    let mut lipschitz = match options.step_rule {
        StepRule::Fixed => x.spectral_norm_sq()?,
        StepRule::Backtracking { .. } => 1.0,
    };
    if !(lipschitz > 0.0) {
        // X = 0: the gradient vanishes and any step works.
        lipschitz = 1.0;
    }

    let mut beta = vec![0.0; p];
    let mut ax = vec![0.0; n];
    let mut mom = vec![0.0; p];
    let mut a_mom = vec![0.0; n];
    let mut next = vec![0.0; p];
    let mut a_next = vec![0.0; n];
    let mut resid = vec![0.0; n];
    let mut grad = vec![0.0; p];
    let mut block = Vec::new();
    let mut t = 1.0f64;

    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut kkt = f64::INFINITY;
    let mut converged = false;

    for k in 1..=options.max_iterations {
        iterations = k;
        resid.iter_mut().zip(a_mom.iter().zip(y)).for_each(|(r, (a, b))| *r = a - b);
        x.apply_transpose(&resid, &mut grad);
        let f_mom = half_rss(&a_mom, y);

        loop {
            let step = 1.0 / lipschitz;
            prox_step(&mom, &grad, step, partition, lambdas, &mut next, &mut block);
            x.apply(&next, &mut a_next);
            let StepRule::Backtracking { eta } = options.step_rule else { break };
            let diff: Vec<f64> = next.iter().zip(&mom).map(|(a, b)| a - b).collect();
            let bound = f_mom + dot(&grad, &diff) + 0.5 * lipschitz * dot(&diff, &diff);
            if half_rss(&a_next, y) <= bound + 1e-12 * bound.abs().max(1.0) {
                break;
            }
            lipschitz /= eta;
        }

        trace.push(half_rss(&a_next, y) + penalty(&next, partition, lambdas));

        let restart = options.restart
            && mom
                .iter()
                .zip(&next)
                .zip(&beta)
                .map(|((m, z), b)| (m - z) * (z - b))
                .sum::<f64>()
                > 0.0;
        if restart {
            t = 1.0;
            mom.copy_from_slice(&next);
            a_mom.copy_from_slice(&a_next);
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let c = (t - 1.0) / t_next;
            for j in 0..p {
                mom[j] = next[j] + c * (next[j] - beta[j]);
            }
            for i in 0..n {
                a_mom[i] = a_next[i] + c * (a_next[i] - ax[i]);
            }
            t = t_next;
        }
        std::mem::swap(&mut beta, &mut next);
        std::mem::swap(&mut ax, &mut a_next);

        if k == 1 || k % options.kkt_interval.max(1) == 0 || k == options.max_iterations {
            resid.iter_mut().zip(ax.iter().zip(y)).for_each(|(r, (a, b))| *r = a - b);
            x.apply_transpose(&resid, &mut grad);
            kkt = kkt_residuals(&grad, &beta, partition, lambdas).0;
            if kkt <= options.kkt_tolerance {
                converged = true;
                break;
            }
        }
    }

    let final_objective = half_rss(&ax, y) + penalty(&beta, partition, lambdas);
    Ok(SolverResult {
        estimate: GroupSparseSignal::new(beta, partition.clone())?,
        iterations,
        final_objective,
        kkt_residual: kkt,
        converged,
        objective_trace: trace,
    })
}
