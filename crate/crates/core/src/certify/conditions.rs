//! Explicit sufficient conditions for exact group-support recovery, for a
//! general block dictionary and for the DCT/Dirac demixing setup.

use serde::{Deserialize, Serialize};

use super::c4_default;
use crate::dictionary::{coherence_report, BlockDictionary, CoherenceOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub name: String,
    pub lhs: f64,
    pub relation: Relation,
    pub rhs: f64,
    /// Positive when satisfied with room to spare.
    pub margin: f64,
    pub satisfied: bool,
    pub formula: String,
}

impl ConditionRecord {
    fn new(name: impl Into<String>, lhs: f64, relation: Relation, rhs: f64, formula: &str) -> Self {
        let margin = match relation {
            Relation::AtMost => rhs - lhs,
            Relation::AtLeast => lhs - rhs,
        };
        Self {
            name: name.into(),
            lhs,
            relation,
            rhs,
            margin,
            satisfied: margin >= 0.0,
            formula: formula.into(),
        }
    }

    /// Accept a margin down to `-tol·|rhs|`; for identities that hold exactly
    /// in real arithmetic but may miss by an ulp in floating point.
    fn within(mut self, tol: f64) -> Self {
        self.satisfied = self.margin >= -tol * self.rhs.abs();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c2_prime: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub epsilon: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<ConditionRecord>,
    pub constants: Constants,
    /// Prescribed weights: per group for the general theorem, `[λ₁, λ₂]`
    /// for the demixing corollary.
    pub lambdas: Vec<f64>,
    /// Guaranteed `‖β̂_g − β*_g‖` radius per support group.
    pub error_radii: Vec<f64>,
    pub overall: bool,
}

impl ConditionReport {
    fn new(conditions: Vec<ConditionRecord>, constants: Constants, lambdas: Vec<f64>, error_radii: Vec<f64>) -> Self {
        let overall = conditions.iter().all(|c| c.satisfied);
        Self {
            conditions,
            constants,
            lambdas,
            error_radii,
            overall,
        }
    }

    pub fn get(&self, name: &str) -> Option<&ConditionRecord> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// User-tunable constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionConstants {
    pub c0: f64,
    pub c1: f64,
    /// Replaces `ε` when larger than its lower bound.
    pub epsilon_override: Option<f64>,
}

impl Default for ConditionConstants {
    fn default() -> Self {
        Self {
            c0: 0.067,
            c1: 0.001,
            epsilon_override: None,
        }
    }
}

impl ConditionConstants {
    /// `c₂ = [√(9 + ½(¼ − 3c₀ − 48c₁)) − 3]²`, requiring `48c₁ + 3c₀ ≤ ¼`.
    pub fn c2(&self) -> Result<f64> {
        let slack = 0.25 - 3.0 * self.c0 - 48.0 * self.c1;
        if !(self.c0 > 0.0 && self.c1 > 0.0 && slack >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "constants must satisfy c0, c1 > 0 and 48·c1 + 3·c0 <= 1/4 (c0 = {}, c1 = {})",
                self.c0, self.c1
            )));
        }
        Ok(((9.0 + 0.5 * slack).sqrt() - 3.0).powi(2))
    }

    fn epsilon(&self, lower: f64) -> f64 {
        self.epsilon_override.map_or(lower, |e| e.max(lower))
    }
}

fn split_c4(c4: f64) -> (f64, f64) {
    // 4√2·c₅ + c₆ = c₄/2, split evenly.
    (c4 / (16.0 * std::f64::consts::SQRT_2), c4 / 4.0)
}

/// Checks the general sufficient conditions for `x` with the given support
/// and true group norms (one per support group).
pub fn check_theorem1(
    x: &BlockDictionary,
    support: &[usize],
    truth_norms: &[f64],
    sigma: f64,
    constants: &ConditionConstants,
) -> Result<ConditionReport> {
    if truth_norms.len() != support.len() {
        return Err(Error::DimensionMismatch {
            what: "truth norms per support group",
            expected: support.len(),
            got: truth_norms.len(),
        });
    }
    let part = x.partition();
    if let Some(&g) = support.iter().find(|&&g| g >= part.num_groups()) {
        return Err(Error::InvalidParameter(format!("support group {g} out of range")));
    }
    let c2 = constants.c2()?;
    let c2p = c2.min(1e-4);
    let report = coherence_report(x, &CoherenceOptions::default())?;
    let mu_b = report.mu_b.unwrap_or(0.0);
    let mu_i = report.mu_i;
    let p = part.p() as f64;
    let g_count = part.num_groups() as f64;
    let ln_p = p.ln();
    let (dmin, dmax) = (part.d_min() as f64, part.d_max() as f64);
    let s = support.len() as f64;
    let d_star: f64 = support.iter().map(|&g| part.size(g) as f64).sum();

    let epsilon = constants.epsilon(((1.0 + mu_i) * (p * g_count).ln() / dmin).sqrt());
    let c4 = c4_default();
    let (c5, c6) = split_c4(c4);
    let gamma = (dmin / dmax).sqrt() * c4 / (dmax * ln_p).sqrt();

    let mut conditions = vec![
        ConditionRecord::new("1a: mu_I", mu_i, Relation::AtMost, constants.c0, "mu_I <= c0"),
        ConditionRecord::new(
            "1b: mu_B",
            mu_b,
            Relation::AtMost,
            (dmin / (dmax * dmax)).sqrt() * constants.c1 / ln_p,
            "mu_B <= sqrt(d_min/d_max^2) c1/ln p",
        ),
    ];
    let spectral_sq = report.spectral_norm * report.spectral_norm;
    let sparsity_a = c2 * g_count / (spectral_sq * ln_p);
    let sparsity_b = if mu_b > 0.0 {
        dmin / (dmax * dmax) * c2p / (mu_b * mu_b * ln_p)
    } else {
        f64::MAX
    };
    conditions.push(ConditionRecord::new(
        "2: sparsity",
        s,
        Relation::AtMost,
        sparsity_a.min(sparsity_b),
        "s <= min{c2 G/(||X||^2 ln p), (d_min/d_max^2) c2' mu_B^-2/ln p}",
    ));

    let boost = (s / (dmax * ln_p)).sqrt().max(1.0);
    let thresholds: Vec<f64> = support
        .iter()
        .map(|&g| 10.0 * sigma * (1.0 + epsilon) * (d_star.sqrt() + (part.size(g) as f64).sqrt()) * boost)
        .collect();
    // Report the support group closest to (or furthest below) its threshold.
    let formula3 = "||beta*_g|| >= 10 sigma (1+eps)(sqrt(d*_G)+sqrt(d_g)) max{1, sqrt(s/(d_max ln p))}";
    let worst = truth_norms
        .iter()
        .zip(&thresholds)
        .enumerate()
        .min_by(|a, b| (a.1 .0 / a.1 .1).total_cmp(&(b.1 .0 / b.1 .1)));
    conditions.push(match worst {
        Some((i, (&lhs, &rhs))) => {
            ConditionRecord::new(format!("3: strength (group {})", support[i]), lhs, Relation::AtLeast, rhs, formula3)
        }
        None => ConditionRecord::new("3: strength (empty support)", 0.0, Relation::AtLeast, 0.0, formula3),
    });

    let lambdas: Vec<f64> = part
        .sizes()
        .iter()
        .map(|&d| 4.0 * sigma * (1.0 + epsilon) * (d as f64).sqrt())
        .collect();
    let lam_ratio = lambdas.iter().copied().fold(0.0, f64::max) / lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    conditions.push(ConditionRecord::new(
        "4: lambda_max/lambda_min",
        lam_ratio,
        Relation::AtMost,
        (dmax / dmin).sqrt(),
        "lambda_g = 4 sigma (1+eps) sqrt(d_g)",
    ));
    let error_radii = support
        .iter()
        .map(|&g| 5.0 * sigma * (1.0 + epsilon) * ((part.size(g) as f64).sqrt() + d_star.sqrt()))
        .collect();

    Ok(ConditionReport::new(
        conditions,
        Constants {
            c0: constants.c0,
            c1: constants.c1,
            c2,
            c2_prime: c2p,
            c4,
            c5,
            c6,
            epsilon,
            gamma,
        },
        lambdas,
        error_radii,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corollary1Input {
    /// Pixels per frame.
    pub n: usize,
    pub frames: usize,
    pub tile_size: usize,
    pub s1: usize,
    pub s2: usize,
    pub sigma: f64,
    /// Norms of the nonzero smooth groups.
    pub smooth_norms: Vec<f64>,
    /// Norms of the nonzero anomaly groups.
    pub anomaly_norms: Vec<f64>,
    pub c1: f64,
    pub c2: f64,
    pub epsilon_override: Option<f64>,
}

impl Corollary1Input {
    pub fn new(n: usize, frames: usize, tile_size: usize, s1: usize, s2: usize, sigma: f64) -> Self {
        Self {
            n,
            frames,
            tile_size,
            s1,
            s2,
            sigma,
            smooth_norms: Vec::new(),
            anomaly_norms: Vec::new(),
            c1: 0.001,
            c2: 1e-4,
            epsilon_override: None,
        }
    }
}

/// The five demixing conditions, evaluated literally.
pub fn check_corollary1(input: &Corollary1Input) -> Result<ConditionReport> {
    let Corollary1Input { n, frames, tile_size, s1, s2, sigma, c1, c2, .. } = *input;
    if n == 0 || frames == 0 || tile_size == 0 {
        return Err(Error::InvalidParameter("N, T and D must be positive".into()));
    }
    let (nf, t, d) = (n as f64, frames as f64, tile_size as f64);
    let s = (s1 + s2) as f64;
    let ln_p = (2.0 * nf * t).ln();
    let epsilon = {
        let lower = (2.0 * ln_p / t).sqrt();
        input.epsilon_override.map_or(lower, |e| e.max(lower))
    };

    let mut conditions = vec![
        ConditionRecord::new(
            "1: dimension",
            nf.sqrt(),
            Relation::AtLeast,
            2.0 * ln_p / c1 * (d.powi(3) * t).sqrt(),
            "sqrt(N) >= (2 ln(2NT)/c1) sqrt(D^3 T)",
        ),
        ConditionRecord::new(
            "2: sparsity",
            s,
            Relation::AtMost,
            c2 * nf / (t * d.powi(3) * ln_p),
            "s <= c2 N/(T D^3 ln(2NT))",
        ),
    ];

    let boost = (s / (t * d * ln_p)).sqrt().max(1.0);
    let spread = (s1 as f64 + s2 as f64 * d).sqrt();
    let thr_smooth = 10.0 * sigma * t.sqrt() * (1.0 + spread) * (1.0 + epsilon) * boost;
    let thr_anomaly = 10.0 * sigma * t.sqrt() * (d.sqrt() + spread) * (1.0 + epsilon) * boost;
    for (name, norms, thr, formula) in [
        (
            "3: smooth strength",
            &input.smooth_norms,
            thr_smooth,
            "||B1_g|| >= 10 sigma sqrt(T)(1+sqrt(s1+s2 D))(1+eps) max{1, sqrt(s/(T D ln(2NT)))}",
        ),
        (
            "4: anomaly strength",
            &input.anomaly_norms,
            thr_anomaly,
            "||B2_g|| >= 10 sigma sqrt(T)(sqrt(D)+sqrt(s1+s2 D))(1+eps) max{1, sqrt(s/(T D ln(2NT)))}",
        ),
    ] {
        // An empty component holds vacuously.
        let lhs = norms.iter().copied().fold(f64::INFINITY, f64::min);
        let lhs = if lhs.is_finite() { lhs } else { thr };
        conditions.push(ConditionRecord::new(name, lhs, Relation::AtLeast, thr, formula));
    }

    let lambda1 = 4.0 * sigma * (1.0 + epsilon) * t.sqrt();
    let lambda2 = 4.0 * sigma * (1.0 + epsilon) * (d * t).sqrt();
    conditions.push(ConditionRecord::new(
        "5: lambda2/lambda1",
        lambda2 / lambda1,
        Relation::AtMost,
        d.sqrt(),
        "lambda1 = 4 sigma (1+eps) sqrt(T), lambda2 = 4 sigma (1+eps) sqrt(D T)",
    )
    .within(1e-12));

    let c4 = c4_default();
    let (c5, c6) = split_c4(c4);
    let gamma = (1.0 / d).sqrt() * c4 / (d * t * ln_p).sqrt();
    let d_star = t * (s1 as f64 + s2 as f64 * d);
    let mut error_radii = vec![5.0 * sigma * (1.0 + epsilon) * (t.sqrt() + d_star.sqrt()); input.smooth_norms.len()];
    error_radii.extend(vec![
        5.0 * sigma * (1.0 + epsilon) * ((d * t).sqrt() + d_star.sqrt());
        input.anomaly_norms.len()
    ]);
    Ok(ConditionReport::new(
        conditions,
        Constants {
            c0: 0.0,
            c1,
            c2,
            c2_prime: c2.min(1e-4),
            c4,
            c5,
            c6,
            epsilon,
            gamma,
        },
        vec![lambda1, lambda2],
        error_radii,
    ))
}
