//! Random group-sparse signals, noisy measurements and the DCT/Dirac
//! demixing scene.
//!
//! Signals follow the usual random block model: a support of `s` groups
//! drawn uniformly without replacement, each active block an independent
//! Gaussian direction scaled to a prescribed magnitude. Every draw comes from
//! a [`SplitMix64`] stream derived from a single 64-bit seed.

pub mod io;
mod scene;

pub use scene::{build_demix_scene, demix_partition, generate_demix_scene, DemixScene, SceneConfig, SupportMode};

use serde::{Deserialize, Serialize};

use crate::dictionary::{BlockDictionary, GroupPartition};
use crate::error::{Error, Result};
use crate::linalg::norm2_at;
use crate::rng::SplitMix64;

/// Coefficient vector together with its partition and group-level support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSparseSignal {
    coefficients: Vec<f64>,
    partition: GroupPartition,
    support: Vec<usize>,
}

impl GroupSparseSignal {
    pub fn new(coefficients: Vec<f64>, partition: GroupPartition) -> Result<Self> {
        if coefficients.len() != partition.p() {
            return Err(Error::DimensionMismatch {
                what: "coefficient length",
                expected: partition.p(),
                got: coefficients.len(),
            });
        }
        let support = (0..partition.num_groups())
            .filter(|&g| partition.group(g).iter().any(|&j| coefficients[j] != 0.0))
            .collect();
        Ok(Self {
            coefficients,
            partition,
            support,
        })
    }

    pub fn zeros(partition: GroupPartition) -> Self {
        Self {
            coefficients: vec![0.0; partition.p()],
            partition,
            support: Vec::new(),
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    /// Sorted indices of the nonzero groups.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn group_norm(&self, g: usize) -> f64 {
        norm2_at(&self.coefficients, self.partition.group(g))
    }

    pub fn group_norms(&self) -> Vec<f64> {
        (0..self.partition.num_groups()).map(|g| self.group_norm(g)).collect()
    }

    /// Column indices covered by the support groups, in support order.
    pub fn support_columns(&self) -> Vec<usize> {
        self.partition.columns_of(&self.support)
    }

    /// Total number of coefficients in the support groups.
    pub fn support_dim(&self) -> usize {
        self.support.iter().map(|&g| self.partition.size(g)).sum()
    }
}

/// A fully known trial: `y = Xβ* + w`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub dictionary: BlockDictionary,
    pub truth: GroupSparseSignal,
    pub noise: Vec<f64>,
    pub observations: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticInstance {
    /// Recomputes `Xβ* + w` with the dense kernel; must equal the stored
    /// observations exactly.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut y = self.dictionary.apply_dense(self.truth.coefficients());
        y.iter_mut().zip(&self.noise).for_each(|(a, w)| *a += w);
        y
    }
}

/// Uniform size-`s` subset of `0..groups` by a seeded partial Fisher–Yates
/// shuffle, returned sorted.
pub fn sample_support(groups: usize, s: usize, seed: u64) -> Result<Vec<usize>> {
    if s > groups {
        return Err(Error::InvalidSupportSize { s, groups });
    }
    let mut rng = SplitMix64::new(seed);
    let mut idx: Vec<usize> = (0..groups).collect();
    for i in 0..s {
        let j = i + rng.below((groups - i) as u64) as usize;
        idx.swap(i, j);
    }
    let mut support = idx[..s].to_vec();
    support.sort_unstable();
    Ok(support)
}

/// Fills each support group with an independent standard Gaussian direction
/// scaled to the requested magnitude; all other groups are exactly zero.
pub fn sample_signal(
    partition: &GroupPartition,
    support: &[usize],
    magnitudes: &[f64],
    seed: u64,
) -> Result<GroupSparseSignal> {
    if magnitudes.len() != support.len() {
        return Err(Error::DimensionMismatch {
            what: "magnitudes per support group",
            expected: support.len(),
            got: magnitudes.len(),
        });
    }
    let mut seen = vec![false; partition.num_groups()];
    for &g in support {
        if g >= partition.num_groups() || std::mem::replace(&mut seen[g], true) {
            return Err(Error::InvalidParameter(format!("invalid or repeated support group {g}")));
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut beta = vec![0.0; partition.p()];
    for (&g, &m) in support.iter().zip(magnitudes) {
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::InvalidMagnitude { group: g, value: m });
        }
        let cols = partition.group(g);
        let dir = loop {
            let v = rng.gaussian_vec(cols.len(), 1.0);
            let n = crate::linalg::norm2(&v);
            if n > 0.0 {
                break v.into_iter().map(|x| x / n).collect::<Vec<_>>();
            }
        };
        for (&j, u) in cols.iter().zip(dir) {
            beta[j] = m * u;
        }
    }
    GroupSparseSignal::new(beta, partition.clone())
}

/// i.i.d. `N(0, σ²)` noise of length `n` from the given seed.
pub fn sample_noise(n: usize, sigma: f64, seed: u64) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; n];
    }
    SplitMix64::new(seed).gaussian_vec(n, sigma)
}

/// `y = Xβ* + w` with `w ~ N(0, σ² I)` drawn from `seed`.
pub fn synthesize(
    dictionary: &BlockDictionary,
    truth: &GroupSparseSignal,
    sigma: f64,
    seed: u64,
) -> Result<SyntheticInstance> {
    if truth.partition() != dictionary.partition() {
        return Err(Error::InvalidParameter(
            "signal partition does not match dictionary partition".into(),
        ));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {sigma}")));
    }
    let noise = sample_noise(dictionary.n(), sigma, seed);
    let mut observations = dictionary.apply_dense(truth.coefficients());
    observations.iter_mut().zip(&noise).for_each(|(y, w)| *y += w);
    Ok(SyntheticInstance {
        dictionary: dictionary.clone(),
        truth: truth.clone(),
        noise,
        observations,
        sigma,
        seed,
    })
}
