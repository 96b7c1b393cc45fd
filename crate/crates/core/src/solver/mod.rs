//! Group Lasso solvers and optimality checks.
//!
//! The estimator minimizes `½‖y − Xβ‖² + Σ_g λ_g ‖β_g‖₂`. Two solvers are
//! provided:
//!
//! * [`solve_group_lasso`]: FISTA with gradient restart for any
//!   [`LinearOperator`].
//! * [`solve_demix`]: exact alternating minimization for the DCT/Dirac
//!   demixing problem, where both half-steps have closed forms.
//!
//! Optimality is verified through the block KKT system: a nonzero group must
//! satisfy `X_gᵀ(y − Xβ) = λ_g β_g/‖β_g‖`, a zero group `‖X_gᵀ(y − Xβ)‖ ≤ λ_g`.

mod demix;
mod fista;
mod support;

pub use demix::{solve_demix, DemixGeometry, DemixProblem, DemixSolution};
pub use fista::solve_group_lasso;
pub use support::{extract_group_support, SupportRecovery};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::write_f64_array;
use crate::dictionary::GroupPartition;
use crate::error::{Error, Result};
use crate::linalg::{norm2_at, LinearOperator, Matrix};
use crate::model::GroupSparseSignal;

/// Groups whose norm falls below this are treated as exactly zero.
pub const ZERO_GROUP_NORM: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Step `1/‖X‖²`.
    Fixed,
    /// Start from step 1 and shrink by `eta` until the quadratic upper bound holds.
    Backtracking { eta: f64 },
}

/// Which block the alternating demixer updates first within a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    #[default]
    SmoothFirst,
    AnomalyFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    pub objective_rel_tolerance: f64,
    pub step_rule: StepRule,
    pub restart: bool,
    /// KKT residual is evaluated every this many FISTA iterations.
    pub kkt_interval: usize,
    pub sweep_order: SweepOrder,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 5000,
            kkt_tolerance: 1e-6,
            objective_rel_tolerance: 1e-10,
            step_rule: StepRule::Fixed,
            restart: true,
            kkt_interval: 10,
            sweep_order: SweepOrder::SmoothFirst,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("solver.max_iterations must be >= 1".into()));
        }
        if !(self.kkt_tolerance > 0.0) {
            return Err(Error::InvalidParameter("solver.kkt_tolerance must be positive".into()));
        }
        if !(self.objective_rel_tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "solver.objective_rel_tolerance must be positive".into(),
            ));
        }
        if let StepRule::Backtracking { eta } = self.step_rule {
            if !(eta > 0.0 && eta < 1.0) {
                return Err(Error::InvalidParameter(format!("backtracking eta must be in (0, 1), got {eta}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub estimate: GroupSparseSignal,
    pub iterations: usize,
    pub final_objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub objective_trace: Vec<f64>,
}

/// The JSON view of a [`SolverResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub final_objective: f64,
    pub kkt_residual: f64,
    pub converged: bool,
    pub support: Vec<usize>,
}

impl SolverResult {
    pub fn summary(&self) -> SolverSummary {
        SolverSummary {
            iterations: self.iterations,
            final_objective: self.final_objective,
            kkt_residual: self.kkt_residual,
            converged: self.converged,
            support: self.estimate.support().to_vec(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.summary())?)
    }

    /// Writes the estimate as a length-prefixed little-endian f64 array.
    pub fn save_estimate(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write_f64_array(&mut w, self.estimate.coefficients())?;
        w.flush()?;
        Ok(())
    }
}

/// Where a set of regularization weights came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LambdaProvenance {
    Explicit,
    /// `λ_g = 4σ(1+ε)√d_g`.
    Theorem1 { sigma: f64, epsilon: f64 },
    /// `λ_g = (5/α)√d_g`.
    Experiment { alpha: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSchedule {
    per_group: Vec<f64>,
    provenance: LambdaProvenance,
}

impl LambdaSchedule {
    pub fn explicit(per_group: Vec<f64>) -> Result<Self> {
        Self::checked(per_group, LambdaProvenance::Explicit)
    }

    /// One weight for every group.
    pub fn uniform(partition: &GroupPartition, lambda: f64) -> Result<Self> {
        Self::explicit(vec![lambda; partition.num_groups()])
    }

    pub fn theorem1(partition: &GroupPartition, sigma: f64, epsilon: f64) -> Result<Self> {
        let scale = 4.0 * sigma * (1.0 + epsilon);
        Self::checked(
            partition.sizes().iter().map(|&d| scale * (d as f64).sqrt()).collect(),
            LambdaProvenance::Theorem1 { sigma, epsilon },
        )
    }

    /// `(5/α)√d_g`; for the demixing partition this is `λ₁ = (5/α)√T` on
    /// temporal groups and `λ₂ = (5/α)√(DT)` on tiles.
    pub fn experiment(partition: &GroupPartition, alpha: f64) -> Result<Self> {
        Self::checked(
            partition.sizes().iter().map(|&d| 5.0 / alpha * (d as f64).sqrt()).collect(),
            LambdaProvenance::Experiment { alpha },
        )
    }

    fn checked(per_group: Vec<f64>, provenance: LambdaProvenance) -> Result<Self> {
        if per_group.is_empty() {
            return Err(Error::InvalidParameter("lambda schedule is empty".into()));
        }
        if let Some((g, l)) = per_group.iter().enumerate().find(|(_, l)| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidParameter(format!("lambda for group {g} must be positive, got {l}")));
        }
        Ok(Self { per_group, provenance })
    }

    pub fn per_group(&self) -> &[f64] {
        &self.per_group
    }

    pub fn provenance(&self) -> LambdaProvenance {
        self.provenance
    }

    pub fn min(&self) -> f64 {
        self.per_group.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.per_group.iter().copied().fold(0.0, f64::max)
    }
}

/// Proximal map of `λ‖·‖₂`: `0` if `‖v‖ ≤ λ`, else `v(1 − λ/‖v‖)`.
pub fn block_soft_threshold(v: &[f64], lambda: f64) -> Vec<f64> {
    let mut out = v.to_vec();
    shrink_in_place(&mut out, lambda);
    out
}

pub(crate) fn shrink_in_place(v: &mut [f64], lambda: f64) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= lambda {
        v.iter_mut().for_each(|x| *x = 0.0);
        0.0
    } else {
        let scale = 1.0 - lambda / norm;
        v.iter_mut().for_each(|x| *x *= scale);
        norm - lambda
    }
}

/// `Σ_g λ_g ‖β_g‖₂`
pub fn penalty(beta: &[f64], partition: &GroupPartition, lambdas: &[f64]) -> f64 {
    partition
        .groups()
        .iter()
        .zip(lambdas)
        .map(|(g, l)| l * norm2_at(beta, g))
        .sum()
}

fn check_shapes<A: LinearOperator + ?Sized>(
    x: &A,
    y: &[f64],
    beta: &[f64],
    partition: &GroupPartition,
    lambdas: &[f64],
) -> Result<()> {
    let checks = [
        ("observation length", x.nrows(), y.len()),
        ("coefficient length", x.ncols(), beta.len()),
        ("partition size", x.ncols(), partition.p()),
        ("lambda count", partition.num_groups(), lambdas.len()),
    ];
    for (what, expected, got) in checks {
        if expected != got {
            return Err(Error::DimensionMismatch { what, expected, got });
        }
    }
    Ok(())
}

/// `½‖y − Xβ‖² + Σ_g λ_g ‖β_g‖₂`
pub fn objective<A: LinearOperator + ?Sized>(
    x: &A,
    y: &[f64],
    beta: &[f64],
    partition: &GroupPartition,
    lambdas: &[f64],
) -> Result<f64> {
    check_shapes(x, y, beta, partition, lambdas)?;
    let mut xb = vec![0.0; y.len()];
    x.apply(beta, &mut xb);
    let rss: f64 = xb.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(0.5 * rss + penalty(beta, partition, lambdas))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max_g` of the per-group residuals.
    pub residual: f64,
    pub worst_group: usize,
    /// `‖X_gᵀ(y − Xβ)‖/λ_g` for every group (zero or not).
    pub dual_slack: Vec<f64>,
    /// Whether the columns on the nonzero coordinates are linearly
    /// independent, which makes the solution unique.
    pub support_full_rank: bool,
}

/// Per-group KKT residuals given `grad = Xᵀ(Xβ − y)`.
pub(crate) fn kkt_residuals(
    grad: &[f64],
    beta: &[f64],
    partition: &GroupPartition,
    lambdas: &[f64],
) -> (f64, usize, Vec<f64>) {
    let mut worst = (0.0f64, 0usize);
    let mut slack = Vec::with_capacity(partition.num_groups());
    for (g, (cols, &lam)) in partition.groups().iter().zip(lambdas).enumerate() {
        let gnorm = norm2_at(grad, cols);
        slack.push(gnorm / lam);
        let bnorm = norm2_at(beta, cols);
        let r = if bnorm < ZERO_GROUP_NORM {
            (gnorm / lam - 1.0).max(0.0)
        } else {
            cols.iter()
                .map(|&j| {
                    let e = grad[j] + lam * beta[j] / bnorm;
                    e * e
                })
                .sum::<f64>()
                .sqrt()
        };
        if r > worst.0 {
            worst = (r, g);
        }
    }
    (worst.0, worst.1, slack)
}

/// Evaluates the block KKT system at `beta`.
pub fn kkt_check(
    x: &Matrix,
    y: &[f64],
    beta: &[f64],
    partition: &GroupPartition,
    lambdas: &[f64],
) -> Result<KktReport> {
    check_shapes(x, y, beta, partition, lambdas)?;
    let mut r = x.matvec(beta);
    r.iter_mut().zip(y).for_each(|(a, b)| *a -= b);
    let grad = x.tr_matvec(&r);
    let (residual, worst_group, dual_slack) = kkt_residuals(&grad, beta, partition, lambdas);
    let active: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] != 0.0).collect();
    Ok(KktReport {
        residual,
        worst_group,
        dual_slack,
        support_full_rank: full_column_rank(&x.select_columns(&active)),
    })
}

/// Numerical full column rank via singular values.
pub fn full_column_rank(m: &Matrix) -> bool {
    if m.cols() == 0 {
        return true;
    }
    if m.cols() > m.rows() {
        return false;
    }
    let s = m.singular_values();
    let tol = s[0] * f64::EPSILON * m.rows().max(m.cols()) as f64;
    s.len() == m.cols() && s[s.len() - 1] > tol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prox_examples() {
        assert_eq!(block_soft_threshold(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
        assert_eq!(block_soft_threshold(&[0.9, 0.0], 1.0), vec![0.0, 0.0]);
        let v = block_soft_threshold(&[3.0, 4.0], 2.5);
        assert!((v[0] - 1.5).abs() < 1e-15 && (v[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn prox_minimizes_on_a_grid() {
        // Brute-force the 2-D prox objective on a fine grid around the answer.
        let (v, lam) = ([3.0, 4.0], 2.5);
        let f = |x: [f64; 2]| {
            0.5 * ((x[0] - v[0]).powi(2) + (x[1] - v[1]).powi(2)) + lam * (x[0] * x[0] + x[1] * x[1]).sqrt()
        };
        let mut best = ([0.0, 0.0], f64::INFINITY);
        for i in 0..=400 {
            for j in 0..=400 {
                let x = [i as f64 * 0.01, j as f64 * 0.01];
                if f(x) < best.1 {
                    best = (x, f(x));
                }
            }
        }
        assert!((best.0[0] - 1.5).abs() <= 0.01 && (best.0[1] - 2.0).abs() <= 0.01);
        assert!(f([1.5, 2.0]) <= best.1 + 1e-12);
    }

    #[test]
    fn objective_at_zero_and_noiseless() {
        let x = Matrix::identity(4);
        let part = GroupPartition::contiguous(&[2, 2]).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        let zero = objective(&x, &y, &[0.0; 4], &part, &[1.0, 1.0]).unwrap();
        assert!((zero - 15.0).abs() < 1e-15);
        let tiny = [1e-30, 1e-30];
        let v = objective(&x, &y, &y, &part, &tiny).unwrap();
        let expected = 1e-30 * (5.0f64.sqrt() + 5.0);
        assert!((v - expected).abs() <= 1e-12 * expected);
        assert!(objective(&x, &y[..3], &y, &part, &tiny).is_err());
    }

    #[test]
    fn kkt_zero_is_optimal_for_large_lambda() {
        let x = Matrix::identity(4);
        let part = GroupPartition::contiguous(&[2, 2]).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        let rep = kkt_check(&x, &y, &[0.0; 4], &part, &[5.0f64.sqrt(), 5.0]).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert!((rep.dual_slack[0] - 1.0).abs() < 1e-15);
        assert!(rep.support_full_rank);
    }

    #[test]
    fn kkt_closed_form_under_identity() {
        let x = Matrix::identity(4);
        let part = GroupPartition::contiguous(&[2, 2]).unwrap();
        let y = [1.0, 2.0, 3.0, 4.0];
        let lam = [1.0, 2.0];
        let mut beta = block_soft_threshold(&y[..2], lam[0]);
        beta.extend(block_soft_threshold(&y[2..], lam[1]));
        let rep = kkt_check(&x, &y, &beta, &part, &lam).unwrap();
        assert!(rep.residual <= 1e-12);
    }

    #[test]
    fn rank_detection() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0], vec![0.0, 0.0]]).unwrap();
        assert!(!full_column_rank(&m));
        assert!(full_column_rank(&Matrix::identity(3)));
        assert!(!full_column_rank(&Matrix::zeros(2, 3)));
    }

    #[test]
    fn schedules() {
        let part = GroupPartition::contiguous(&[4, 1]).unwrap();
        let t = LambdaSchedule::theorem1(&part, 1.0, 0.5).unwrap();
        assert_eq!(t.per_group(), &[12.0, 6.0]);
        let e = LambdaSchedule::experiment(&part, 5.0).unwrap();
        assert_eq!(e.per_group(), &[2.0, 1.0]);
        assert!(LambdaSchedule::explicit(vec![1.0, 0.0]).is_err());
        assert!(LambdaSchedule::theorem1(&part, 0.0, 0.5).is_err());
        assert_eq!((t.min(), t.max()), (6.0, 12.0));
    }
}
