//! Primal-dual witness certificates and sufficient-condition checks.
//!
//! The witness solves the group Lasso restricted to the true support, fills
//! in the off-support dual blocks `ž_g = X_gᵀ(y − X_S β̌)/λ_g`, and declares
//! the instance certified when every such block has norm below one. The
//! events E1–E5 break that dual bound into separately checkable pieces.

mod conditions;

pub use conditions::{
    check_corollary1, check_theorem1, ConditionConstants, ConditionRecord, ConditionReport, Constants,
    Corollary1Input, Relation,
};

use serde::{Deserialize, Serialize};

use crate::dictionary::{block_b1_norm, GroupPartition};
use crate::error::{Error, Result};
use crate::linalg::{gram_deviation, norm2, solve_linear, Matrix};
use crate::model::SyntheticInstance;
use crate::solver::{full_column_rank, solve_group_lasso, SolverOptions, ZERO_GROUP_NORM};

/// `1/(8√(2(1 + 4 ln 2)))`, the largest admissible `c₄`.
pub fn c4_default() -> f64 {
    1.0 / (8.0 * (2.0 * (1.0 + 4.0 * std::f64::consts::LN_2)).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub solver: SolverOptions,
    /// Off-support dual norms must stay below `1 − dual_margin` to count as
    /// strictly feasible; absorbs the restricted solver's residual.
    pub dual_margin: f64,
    pub c4: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions {
                kkt_tolerance: 1e-10,
                max_iterations: 50_000,
                ..SolverOptions::default()
            },
            dual_margin: 1e-8,
            c4: c4_default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedSolution {
    /// True support groups, ascending.
    pub groups: Vec<usize>,
    /// Columns of `X_S`, group by group.
    pub columns: Vec<usize>,
    /// `β̌` on `columns`.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

fn support_matrix(inst: &SyntheticInstance) -> (Vec<usize>, Vec<usize>, Matrix) {
    let groups = inst.truth.support().to_vec();
    let columns = inst.dictionary.partition().columns_of(&groups);
    let xs = inst.dictionary.matrix().select_columns(&columns);
    (groups, columns, xs)
}

fn check_lambdas(inst: &SyntheticInstance, lambdas: &[f64]) -> Result<()> {
    let g = inst.dictionary.num_groups();
    if lambdas.len() != g {
        return Err(Error::DimensionMismatch {
            what: "lambda count",
            expected: g,
            got: lambdas.len(),
        });
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {l}")));
    }
    Ok(())
}

fn require_full_rank(xs: &Matrix) -> Result<()> {
    if !full_column_rank(xs) {
        let sigma_min = if xs.cols() > xs.rows() {
            0.0
        } else {
            xs.singular_values().last().copied().unwrap_or(0.0)
        };
        return Err(Error::RankDeficient { sigma_min });
    }
    Ok(())
}

/// Group Lasso over the columns of the true support only.
pub fn solve_restricted(
    inst: &SyntheticInstance,
    lambdas: &[f64],
    options: &SolverOptions,
) -> Result<RestrictedSolution> {
    check_lambdas(inst, lambdas)?;
    let (groups, columns, xs) = support_matrix(inst);
    if groups.is_empty() {
        return Ok(RestrictedSolution {
            groups,
            columns,
            coefficients: Vec::new(),
            iterations: 0,
            kkt_residual: 0.0,
            converged: true,
        });
    }
    require_full_rank(&xs)?;
    let part = inst.dictionary.partition();
    let sizes: Vec<usize> = groups.iter().map(|&g| part.size(g)).collect();
    let restricted = GroupPartition::contiguous(&sizes)?;
    let lam: Vec<f64> = groups.iter().map(|&g| lambdas[g]).collect();
    let res = solve_group_lasso(&xs, &inst.observations, &restricted, &lam, options)?;
    Ok(RestrictedSolution {
        groups,
        columns,
        coefficients: res.estimate.coefficients().to_vec(),
        iterations: res.iterations,
        kkt_residual: res.kkt_residual,
        converged: res.converged,
    })
}

/// Per-group perturbation diagnostics on the true support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub group: usize,
    pub truth_norm: f64,
    pub restricted_norm: f64,
    /// `‖h_g‖ = ‖β̌_g − β*_g‖`
    pub h_norm: f64,
    /// `‖u_g‖ = ‖ž_g − β*_g/‖β*_g‖‖`
    pub u_norm: f64,
    /// `‖h_g‖ ≤ ½‖β*_g‖`
    pub premise: bool,
    /// `4‖h_g‖/‖β*_g‖`
    pub u_bound: f64,
}

impl Perturbation {
    /// The direction-perturbation bound, vacuously true without its premise.
    pub fn bound_holds(&self) -> bool {
        !self.premise || self.u_norm <= self.u_bound
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PDWCertificate {
    pub restricted: RestrictedSolution,
    /// Full-length dual vector `ž`.
    pub dual: Vec<f64>,
    /// `‖ž_g‖` for every group.
    pub dual_norms: Vec<f64>,
    /// Groups outside the support, ascending.
    pub off_support: Vec<usize>,
    pub max_off_support_norm: f64,
    pub dual_margin: f64,
    pub strictly_feasible: bool,
    pub support_rank_ok: bool,
    /// `u_g` stacked over the support columns.
    pub u: Vec<f64>,
    pub perturbations: Vec<Perturbation>,
}

impl PDWCertificate {
    /// `‖β̌_g − β*_g‖` for the support groups.
    pub fn per_group_errors(&self) -> Vec<f64> {
        self.perturbations.iter().map(|p| p.h_norm).collect()
    }

    /// Every restricted block is nonzero.
    pub fn restricted_blocks_nonvanishing(&self) -> bool {
        self.perturbations.iter().all(|p| p.restricted_norm >= ZERO_GROUP_NORM)
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            support: &'a [usize],
            max_off_support_norm: f64,
            strictly_feasible: bool,
            support_rank_ok: bool,
            restricted_kkt_residual: f64,
            restricted_converged: bool,
            perturbations: &'a [Perturbation],
        }
        Ok(serde_json::to_string_pretty(&Summary {
            support: &self.restricted.groups,
            max_off_support_norm: self.max_off_support_norm,
            strictly_feasible: self.strictly_feasible,
            support_rank_ok: self.support_rank_ok,
            restricted_kkt_residual: self.restricted.kkt_residual,
            restricted_converged: self.restricted.converged,
            perturbations: &self.perturbations,
        })?)
    }
}

/// Builds the primal-dual witness for the instance's true support.
pub fn construct_pdw(inst: &SyntheticInstance, lambdas: &[f64], options: &CertifyOptions) -> Result<PDWCertificate> {
    let restricted = solve_restricted(inst, lambdas, &options.solver)?;
    let part = inst.dictionary.partition();
    let x = inst.dictionary.matrix();
    let beta_star = inst.truth.coefficients();

    // r = X_S(β*_S − β̌_S) + w
    let diff: Vec<f64> = restricted
        .columns
        .iter()
        .zip(&restricted.coefficients)
        .map(|(&j, b)| beta_star[j] - b)
        .collect();
    let xs = x.select_columns(&restricted.columns);
    let mut r = xs.matvec(&diff);
    r.iter_mut().zip(&inst.noise).for_each(|(a, w)| *a += w);
    let corr = x.tr_matvec(&r);

    let mut check = vec![0.0; part.p()];
    for (&j, &b) in restricted.columns.iter().zip(&restricted.coefficients) {
        check[j] = b;
    }

    let mut dual = vec![0.0; part.p()];
    let mut dual_norms = vec![0.0; part.num_groups()];
    for g in 0..part.num_groups() {
        let cols = part.group(g);
        let bnorm = crate::linalg::norm2_at(&check, cols);
        let on_support = restricted.groups.binary_search(&g).is_ok();
        for &j in cols {
            dual[j] = if on_support && bnorm >= ZERO_GROUP_NORM {
                check[j] / bnorm
            } else {
                corr[j] / lambdas[g]
            };
        }
        dual_norms[g] = crate::linalg::norm2_at(&dual, cols);
    }

    let off_support: Vec<usize> = (0..part.num_groups())
        .filter(|g| restricted.groups.binary_search(g).is_err())
        .collect();
    let max_off_support_norm = off_support.iter().map(|&g| dual_norms[g]).fold(0.0, f64::max);

    let mut u = Vec::with_capacity(restricted.columns.len());
    let mut perturbations = Vec::with_capacity(restricted.groups.len());
    for &g in &restricted.groups {
        let cols = part.group(g);
        let truth_norm = inst.truth.group_norm(g);
        let h: Vec<f64> = cols.iter().map(|&j| check[j] - beta_star[j]).collect();
        let ug: Vec<f64> = cols.iter().map(|&j| dual[j] - beta_star[j] / truth_norm).collect();
        let h_norm = norm2(&h);
        perturbations.push(Perturbation {
            group: g,
            truth_norm,
            restricted_norm: crate::linalg::norm2_at(&check, cols),
            h_norm,
            u_norm: norm2(&ug),
            premise: h_norm <= 0.5 * truth_norm,
            u_bound: 4.0 * h_norm / truth_norm,
        });
        u.extend(ug);
    }

    Ok(PDWCertificate {
        restricted,
        dual,
        dual_norms,
        off_support,
        max_off_support_norm,
        dual_margin: options.dual_margin,
        strictly_feasible: max_off_support_norm < 1.0 - options.dual_margin,
        support_rank_ok: true,
        u,
        perturbations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`
    pub margin: f64,
    pub holds: bool,
    /// Off-support group attaining the maximum (E3–E5).
    pub worst_group: Option<usize>,
}

impl EventRecord {
    fn new(name: &str, lhs: f64, rhs: f64, worst_group: Option<usize>) -> Self {
        Self {
            name: name.into(),
            lhs,
            rhs,
            margin: rhs - lhs,
            holds: lhs <= rhs,
            worst_group,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub e1: EventRecord,
    pub e2: EventRecord,
    pub e3: EventRecord,
    /// Needs the certificate's `u_S`.
    pub e4: Option<EventRecord>,
    pub e5: EventRecord,
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

impl EventReport {
    pub fn e4(&self) -> Result<&EventRecord> {
        self.e4.as_ref().ok_or(Error::MissingCertificate)
    }

    /// All available events hold (E4 counts as failed when missing).
    pub fn all_hold(&self) -> bool {
        self.e1.holds && self.e2.holds && self.e3.holds && self.e5.holds && self.e4.as_ref().is_some_and(|e| e.holds)
    }
}

/// `max_{g∉G*} ‖X_gᵀ a‖/λ_g` with the attaining group.
fn worst_ratio(x: &Matrix, a: &[f64], part: &GroupPartition, off: &[usize], lambdas: &[f64]) -> (f64, Option<usize>) {
    let corr = x.tr_matvec(a);
    off.iter()
        .map(|&g| (crate::linalg::norm2_at(&corr, part.group(g)) / lambdas[g], Some(g)))
        .fold((0.0, None), |best, cur| if cur.0 > best.0 || best.1.is_none() { cur } else { best })
}

/// Evaluates E1–E5 on the instance. E4 is computed only when a certificate
/// is supplied.
pub fn check_events(
    inst: &SyntheticInstance,
    lambdas: &[f64],
    certificate: Option<&PDWCertificate>,
    c4: f64,
) -> Result<EventReport> {
    check_lambdas(inst, lambdas)?;
    let (groups, columns, xs) = support_matrix(inst);
    let x = inst.dictionary.matrix();
    let part = inst.dictionary.partition();
    let p = part.p();
    let lambda_min = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = lambdas.iter().copied().fold(0.0, f64::max);
    let gamma = lambda_min / lambda_max * c4 / (part.d_max() as f64 * (p as f64).ln()).sqrt();

    let off: Vec<usize> = (0..part.num_groups()).filter(|g| groups.binary_search(g).is_err()).collect();
    let off_cols = part.columns_of(&off);
    let off_sizes: Vec<usize> = off.iter().map(|&g| part.size(g)).collect();

    let e1 = EventRecord::new("E1", gram_deviation(&xs)?, 0.5, None);
    let b1 = if groups.is_empty() || off.is_empty() {
        0.0
    } else {
        let cross = xs.tr_matmul(&x.select_columns(&off_cols))?;
        block_b1_norm(&cross, &GroupPartition::contiguous(&off_sizes)?)?
    };
    let e2 = EventRecord::new("E2", b1, gamma, None);

    if !groups.is_empty() {
        require_full_rank(&xs)?;
    }
    let gram = xs.tr_matmul(&xs)?;
    // a = X_S (X_SᵀX_S)⁻¹ v for a vector v on the support columns.
    let lift = |v: &[f64]| -> Result<Vec<f64>> {
        let coef = solve_linear(&gram, v)?;
        Ok(if coef.is_empty() { vec![0.0; x.rows()] } else { xs.matvec(&coef) })
    };
    let lam_cols: Vec<f64> = groups
        .iter()
        .flat_map(|&g| std::iter::repeat(lambdas[g]).take(part.size(g)))
        .collect();

    let beta_star = inst.truth.coefficients();
    let directions: Vec<f64> = groups
        .iter()
        .flat_map(|&g| {
            let n = inst.truth.group_norm(g);
            part.group(g).iter().map(move |&j| beta_star[j] / n)
        })
        .collect();
    let weighted: Vec<f64> = directions.iter().zip(&lam_cols).map(|(d, l)| d * l).collect();
    let (v3, w3) = worst_ratio(x, &lift(&weighted)?, part, &off, lambdas);
    let e3 = EventRecord::new("E3", v3, 0.25, w3);

    let e4 = match certificate {
        Some(cert) => {
            if cert.restricted.columns != columns {
                return Err(Error::InvalidParameter("certificate support does not match instance".into()));
            }
            let weighted: Vec<f64> = cert.u.iter().zip(&lam_cols).map(|(u, l)| u * l).collect();
            let (v4, w4) = worst_ratio(x, &lift(&weighted)?, part, &off, lambdas);
            Some(EventRecord::new("E4", v4, 0.25, w4))
        }
        None => None,
    };

    // Π⊥w = w − X_S (X_SᵀX_S)⁻¹ X_Sᵀ w
    let proj = lift(&xs.tr_matvec(&inst.noise))?;
    let perp: Vec<f64> = inst.noise.iter().zip(&proj).map(|(w, q)| w - q).collect();
    let (v5, w5) = worst_ratio(x, &perp, part, &off, lambdas);
    let e5 = EventRecord::new("E5", v5, 0.25, w5);

    Ok(EventReport {
        e1,
        e2,
        e3,
        e4,
        e5,
        gamma,
        lambda_min,
        lambda_max,
    })
}
