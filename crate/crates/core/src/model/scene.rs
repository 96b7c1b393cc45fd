use serde::{Deserialize, Serialize};

use super::{sample_noise, sample_signal, sample_support, synthesize, GroupSparseSignal, SyntheticInstance};
use crate::dictionary::{demix_dictionary, tile_groups, GroupPartition};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{derive_seed, purpose};

/// How the nonzero groups of a demixing scene are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportMode {
    /// `s1` smooth groups and `s2` anomaly groups, drawn separately.
    #[default]
    PerComponent,
    /// `s1 + s2` groups drawn uniformly from all `G = N + N/D` groups.
    Pooled,
}

/// Parameters of a DCT/Dirac demixing scene on a `side × side` image over
/// `frames` frames with `tile_size`-pixel anomaly tiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub side: usize,
    pub frames: usize,
    pub tile_size: usize,
    pub s1: usize,
    pub s2: usize,
    pub alpha: f64,
    pub sigma: f64,
    pub seed: u64,
    #[serde(default)]
    pub support_mode: SupportMode,
}

impl SceneConfig {
    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn smooth_groups(&self) -> usize {
        self.pixels()
    }

    pub fn anomaly_groups(&self) -> usize {
        self.pixels() / self.tile_size
    }

    pub fn total_groups(&self) -> usize {
        self.smooth_groups() + self.anomaly_groups()
    }

    /// Measurement length `n = N·T`.
    pub fn n(&self) -> usize {
        self.pixels() * self.frames
    }

    pub fn validate(&self) -> Result<()> {
        if self.side == 0 || self.frames == 0 {
            return Err(Error::InvalidParameter("side and T must be positive".into()));
        }
        // Tile geometry (square D, d | side) is checked by tile_groups.
        tile_groups(self.side, self.tile_size)?;
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        match self.support_mode {
            SupportMode::PerComponent => {
                if self.s1 > self.smooth_groups() {
                    return Err(Error::InvalidSupportSize { s: self.s1, groups: self.smooth_groups() });
                }
                if self.s2 > self.anomaly_groups() {
                    return Err(Error::InvalidSupportSize { s: self.s2, groups: self.anomaly_groups() });
                }
            }
            SupportMode::Pooled => {
                let s = self.s1 + self.s2;
                if s > self.total_groups() {
                    return Err(Error::InvalidSupportSize { s, groups: self.total_groups() });
                }
            }
        }
        Ok(())
    }

    /// Partition of `[β₁; β₂]`: `N` temporal groups, then `N/D`
    /// spatiotemporal tiles. Identical to the partition of
    /// [`demix_dictionary`].
    pub fn partition(&self) -> Result<GroupPartition> {
        demix_partition(self.side, self.frames, self.tile_size)
    }

    fn support(&self) -> Result<Vec<usize>> {
        match self.support_mode {
            SupportMode::PerComponent => {
                let mut s = sample_support(self.smooth_groups(), self.s1, derive_seed(self.seed, purpose::SUPPORT))?;
                let a = sample_support(
                    self.anomaly_groups(),
                    self.s2,
                    derive_seed(self.seed, purpose::SUPPORT_ANOMALY),
                )?;
                s.extend(a.into_iter().map(|g| g + self.smooth_groups()));
                Ok(s)
            }
            SupportMode::Pooled => sample_support(
                self.total_groups(),
                self.s1 + self.s2,
                derive_seed(self.seed, purpose::SUPPORT),
            ),
        }
    }

    fn truth(&self) -> Result<GroupSparseSignal> {
        self.validate()?;
        let partition = self.partition()?;
        let support = self.support()?;
        let magnitudes = vec![self.alpha; support.len()];
        sample_signal(&partition, &support, &magnitudes, derive_seed(self.seed, purpose::SIGNAL))
    }
}

pub fn demix_partition(side: usize, frames: usize, tile_size: usize) -> Result<GroupPartition> {
    let n = side * side;
    let nt = n * frames;
    let mut groups: Vec<Vec<usize>> = (0..n).map(|k| (0..frames).map(|t| t * n + k).collect()).collect();
    for tile in tile_groups(side, tile_size)? {
        let mut g: Vec<usize> = (0..frames)
            .flat_map(|t| tile.iter().map(move |&pix| nt + t * n + pix))
            .collect();
        g.sort_unstable();
        groups.push(g);
    }
    GroupPartition::from_groups(groups, 2 * nt)
}

/// A demixing trial without the materialized `NT × 2NT` dictionary.
///
/// Vectors use the stacked layout: entry `t·N + k` of the smooth part is atom
/// `k` in frame `t`, and the anomaly part follows at offset `N·T`.
#[derive(Debug, Clone, PartialEq)]
pub struct DemixScene {
    pub config: SceneConfig,
    pub truth: GroupSparseSignal,
    pub noise: Vec<f64>,
    pub observations: Vec<f64>,
}

/// Same draws as [`build_demix_scene`], with `y` formed through the
/// structured product. `dct` must be `dct_2d_matrix(config.side)`.
pub fn generate_demix_scene(config: &SceneConfig, dct: &Matrix) -> Result<DemixScene> {
    let truth = config.truth()?;
    let n = config.pixels();
    if dct.rows() != n || dct.cols() != n {
        return Err(Error::DimensionMismatch {
            what: "DCT matrix size",
            expected: n,
            got: dct.rows(),
        });
    }
    let nt = config.n();
    let beta = truth.coefficients();
    let noise = sample_noise(nt, config.sigma, derive_seed(config.seed, purpose::NOISE));
    let mut observations = vec![0.0; nt];
    for t in 0..config.frames {
        let b1 = &beta[t * n..(t + 1) * n];
        for r in 0..n {
            let mut acc = 0.0;
            for (a, b) in dct.row(r).iter().zip(b1) {
                acc += a * b;
            }
            acc += beta[nt + t * n + r];
            observations[t * n + r] = acc + noise[t * n + r];
        }
    }
    Ok(DemixScene {
        config: config.clone(),
        truth,
        noise,
        observations,
    })
}

/// Materialized demixing scene: `X = [I_T⊗DCT | I_T⊗I_N]` with the sampled
/// truth and noise.
pub fn build_demix_scene(config: &SceneConfig) -> Result<SyntheticInstance> {
    let truth = config.truth()?;
    let dictionary = demix_dictionary(config.side, config.frames, config.tile_size)?;
    synthesize(&dictionary, &truth, config.sigma, derive_seed(config.seed, purpose::NOISE)).map(|mut inst| {
        inst.seed = config.seed;
        inst
    })
}
