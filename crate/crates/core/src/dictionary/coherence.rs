use serde::{Deserialize, Serialize};

use super::{BlockDictionary, GroupPartition};
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_spectral_norm, Matrix};
use crate::par::{map_indexed, Execution};

#[derive(Debug, Clone, Copy)]
pub struct CoherenceOptions {
    /// Largest group count for which the O(G²) pairwise scan runs by default.
    pub exhaustive_limit: usize,
    /// Run the pairwise scan even above `exhaustive_limit`.
    pub allow_large: bool,
    pub execution: Execution,
}

impl Default for CoherenceOptions {
    fn default() -> Self {
        Self {
            exhaustive_limit: 4096,
            allow_large: false,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// `None` when the dictionary has a single group.
    pub mu_b: Option<f64>,
    pub mu_i: f64,
    pub spectral_norm: f64,
    pub worst_pair: Option<(usize, usize)>,
    pub per_block_gram_deviation: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorNorms {
    pub spectral: f64,
    pub block_b1: Option<f64>,
}

fn cross_norm(cols: &Matrix, a: &[usize], b: &[usize]) -> f64 {
    if a.len() == 1 && b.len() == 1 {
        return dot(cols.row(a[0]), cols.row(b[0])).abs();
    }
    let cross = Matrix::from_fn(a.len(), b.len(), |i, j| dot(cols.row(a[i]), cols.row(b[j])));
    cross.small_spectral_norm()
}

/// `μ_B = max_{g≠g'} ‖X_gᵀ X_g'‖_{2→2}` by exhaustive pairwise SVDs, with the
/// lexicographically first pair attaining it.
pub fn inter_block_coherence(
    x: &BlockDictionary,
    opts: &CoherenceOptions,
) -> Result<(f64, (usize, usize))> {
    let part = x.partition();
    let g_count = part.num_groups();
    if g_count < 2 {
        return Err(Error::TooFewGroups(g_count));
    }
    if g_count > opts.exhaustive_limit && !opts.allow_large {
        return Err(Error::ExhaustiveLimit {
            groups: g_count,
            limit: opts.exhaustive_limit,
        });
    }
    // Rows of the transpose are the dictionary columns, contiguous in memory.
    let cols = x.matrix().transpose();
    let per_group = map_indexed(g_count - 1, opts.execution, |g| {
        let mut best = (-1.0f64, g + 1);
        for h in g + 1..g_count {
            let v = cross_norm(&cols, part.group(g), part.group(h));
            if v > best.0 {
                best = (v, h);
            }
        }
        best
    });
    let mut best = (-1.0f64, (0usize, 1usize));
    for (g, (v, h)) in per_group.into_iter().enumerate() {
        if v > best.0 {
            best = (v, (g, h));
        }
    }
    Ok((best.0.max(0.0), best.1))
}

/// `μ_I = max_g ‖X_gᵀX_g − I‖_{2→2}` plus every per-block deviation.
///
/// Columns are unit norm by construction, so the Gram diagonal is taken as
/// exactly one; only the off-diagonal inner products enter. This keeps
/// orthonormal blocks at exactly zero instead of at the round-off in `‖x_j‖²`.
pub fn intra_block_coherence(x: &BlockDictionary) -> Result<(f64, Vec<f64>)> {
    let devs = (0..x.num_groups())
        .map(|g| {
            let b = x.block(g);
            let mut gram = b.tr_matmul(&b)?;
            for i in 0..gram.rows() {
                gram.set(i, i, 0.0);
            }
            Ok(symmetric_spectral_norm(&gram))
        })
        .collect::<Result<Vec<_>>>()?;
    let mu_i = devs.iter().fold(0.0f64, |m, &v| m.max(v));
    Ok((mu_i, devs))
}

/// `‖M‖_{B,1}`: the largest spectral norm over the column blocks of `m`.
pub fn block_b1_norm(m: &Matrix, partition: &GroupPartition) -> Result<f64> {
    if partition.p() != m.cols() {
        return Err(Error::DimensionMismatch {
            what: "partition size vs column count",
            expected: m.cols(),
            got: partition.p(),
        });
    }
    Ok((0..partition.num_groups())
        .map(|g| m.select_columns(partition.group(g)).small_spectral_norm())
        .fold(0.0f64, f64::max))
}

/// `‖X‖_{2→2}`, and `‖M‖_{B,1}` when a partitioned matrix is supplied.
pub fn operator_norms(
    x: &BlockDictionary,
    block_matrix: Option<(&Matrix, &GroupPartition)>,
) -> Result<OperatorNorms> {
    let spectral = x.matrix().spectral_norm()?;
    let block_b1 = block_matrix
        .map(|(m, part)| block_b1_norm(m, part))
        .transpose()?;
    Ok(OperatorNorms { spectral, block_b1 })
}

pub fn coherence_report(x: &BlockDictionary, opts: &CoherenceOptions) -> Result<CoherenceReport> {
    let (mu_b, worst_pair) = match inter_block_coherence(x, opts) {
        Ok((v, pair)) => (Some(v), Some(pair)),
        Err(Error::TooFewGroups(_)) => (None, None),
        Err(e) => return Err(e),
    };
    let (mu_i, per_block_gram_deviation) = intra_block_coherence(x)?;
    let spectral_norm = x.matrix().spectral_norm()?;
    Ok(CoherenceReport {
        mu_b,
        mu_i,
        spectral_norm,
        worst_pair,
        per_block_gram_deviation,
    })
}
