//! Alternating minimization for `Y = DCT·B₁ + B₂ + W`.
//!
//! With `B₂` fixed the smooth subproblem has an orthonormal design, so its
//! minimizer is the block soft threshold of `DCTᵀ(Y − B₂)` row by row; with
//! `B₁` fixed the anomaly subproblem is the block soft threshold of
//! `Y − DCT·B₁` tile by tile. The 2-D DCT is applied separably.

use serde::{Deserialize, Serialize};

use super::{kkt_residuals, shrink_in_place, SolverOptions, SolverResult, SweepOrder};
use crate::dictionary::{dct_1d, tile_groups, GroupPartition};
use crate::error::{Error, Result};
use crate::model::demix_partition;
use crate::model::GroupSparseSignal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemixGeometry {
    pub side: usize,
    pub frames: usize,
    pub tile_size: usize,
}

impl DemixGeometry {
    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    pub fn n(&self) -> usize {
        self.pixels() * self.frames
    }
}

/// Precomputed transforms and groupings for repeated demixing solves on one
/// geometry.
#[derive(Debug, Clone)]
pub struct DemixProblem {
    geometry: DemixGeometry,
    dct: Vec<f64>,
    tiles: Vec<Vec<usize>>,
    partition: GroupPartition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemixSolution {
    /// Estimate of the stacked vector `[vec(B₁); vec(B₂)]` under the
    /// demixing partition.
    pub result: SolverResult,
    pixels_times_frames: usize,
}

impl DemixSolution {
    /// DCT coefficients, entry `t·N + k`.
    pub fn smooth(&self) -> &[f64] {
        &self.result.estimate.coefficients()[..self.pixels_times_frames]
    }

    /// Anomaly image, entry `t·N + pixel`.
    pub fn anomaly(&self) -> &[f64] {
        &self.result.estimate.coefficients()[self.pixels_times_frames..]
    }
}

impl DemixProblem {
    pub fn new(geometry: DemixGeometry) -> Result<Self> {
        if geometry.side == 0 || geometry.frames == 0 {
            return Err(Error::InvalidParameter("side and T must be positive".into()));
        }
        let tiles = tile_groups(geometry.side, geometry.tile_size)?;
        let partition = demix_partition(geometry.side, geometry.frames, geometry.tile_size)?;
        Ok(Self {
            geometry,
            dct: dct_1d(geometry.side).as_slice().to_vec(),
            tiles,
            partition,
        })
    }

    pub fn geometry(&self) -> DemixGeometry {
        self.geometry
    }

    /// Partition of the stacked coefficient vector.
    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    /// Per-group weights of the stacked problem.
    pub fn lambdas(&self, lambda1: f64, lambda2: f64) -> Vec<f64> {
        let n = self.geometry.pixels();
        (0..self.partition.num_groups())
            .map(|g| if g < n { lambda1 } else { lambda2 })
            .collect()
    }

    /// `K = C R Cᵀ` on one frame.
    fn forward(&self, img: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let s = self.geometry.side;
        let c = &self.dct;
        tmp.iter_mut().for_each(|v| *v = 0.0);
        for k1 in 0..s {
            for r in 0..s {
                let a = c[k1 * s + r];
                let src = &img[r * s..(r + 1) * s];
                for (t, v) in tmp[k1 * s..(k1 + 1) * s].iter_mut().zip(src) {
                    *t += a * v;
                }
            }
        }
        for k1 in 0..s {
            let row = &tmp[k1 * s..(k1 + 1) * s];
            for k2 in 0..s {
                out[k1 * s + k2] = row.iter().zip(&c[k2 * s..(k2 + 1) * s]).map(|(a, b)| a * b).sum();
            }
        }
    }

    /// `R = Cᵀ K C` on one frame.
    fn inverse(&self, coef: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let s = self.geometry.side;
        let c = &self.dct;
        tmp.iter_mut().for_each(|v| *v = 0.0);
        for k1 in 0..s {
            let src = &coef[k1 * s..(k1 + 1) * s];
            for r in 0..s {
                let a = c[k1 * s + r];
                for (t, v) in tmp[r * s..(r + 1) * s].iter_mut().zip(src) {
                    *t += a * v;
                }
            }
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for r in 0..s {
            for k2 in 0..s {
                let a = tmp[r * s + k2];
                for (o, v) in out[r * s..(r + 1) * s].iter_mut().zip(&c[k2 * s..(k2 + 1) * s]) {
                    *o += a * v;
                }
            }
        }
    }

    fn forward_all(&self, img: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let n = self.geometry.pixels();
        for (src, dst) in img.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            self.forward(src, dst, tmp);
        }
    }

    fn inverse_all(&self, coef: &[f64], out: &mut [f64], tmp: &mut [f64]) {
        let n = self.geometry.pixels();
        for (src, dst) in coef.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            self.inverse(src, dst, tmp);
        }
    }

    fn smooth_penalty(&self, b1: &[f64], lambda1: f64) -> f64 {
        let n = self.geometry.pixels();
        (0..n)
            .map(|k| b1.iter().skip(k).step_by(n).map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            * lambda1
    }

    fn anomaly_penalty(&self, b2: &[f64], lambda2: f64) -> f64 {
        let n = self.geometry.pixels();
        self.tiles
            .iter()
            .map(|tile| {
                (0..self.geometry.frames)
                    .flat_map(|t| tile.iter().map(move |&pix| b2[t * n + pix]))
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .sum::<f64>()
            * lambda2
    }

    /// Smooth half-step; returns the objective afterwards.
    fn update_smooth(&self, y: &[f64], b1: &mut [f64], b2: &[f64], lambdas: (f64, f64), scratch: &mut Scratch) -> f64 {
        let n = self.geometry.pixels();
        let frames = self.geometry.frames;
        for ((r, a), b) in scratch.img.iter_mut().zip(y).zip(b2) {
            *r = a - b;
        }
        self.forward_all(&scratch.img, &mut scratch.coef, &mut scratch.tmp);
        let mut row = vec![0.0; frames];
        for k in 0..n {
            for t in 0..frames {
                row[t] = scratch.coef[t * n + k];
            }
            shrink_in_place(&mut row, lambdas.0);
            for t in 0..frames {
                b1[t * n + k] = row[t];
            }
        }
        // Parseval: ‖Y − B₂ − DCT·B₁‖ = ‖DCTᵀ(Y − B₂) − B₁‖.
        let rss: f64 = scratch.coef.iter().zip(b1.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * rss + self.smooth_penalty(b1, lambdas.0) + self.anomaly_penalty(b2, lambdas.1)
    }

    /// Anomaly half-step; returns the objective afterwards.
    fn update_anomaly(&self, y: &[f64], b1: &[f64], b2: &mut [f64], lambdas: (f64, f64), scratch: &mut Scratch) -> f64 {
        let n = self.geometry.pixels();
        let frames = self.geometry.frames;
        self.inverse_all(b1, &mut scratch.img, &mut scratch.tmp);
        for (r, a) in scratch.img.iter_mut().zip(y) {
            *r = a - *r;
        }
        let mut block = Vec::with_capacity(frames * self.geometry.tile_size);
        for tile in &self.tiles {
            block.clear();
            for t in 0..frames {
                block.extend(tile.iter().map(|&pix| scratch.img[t * n + pix]));
            }
            shrink_in_place(&mut block, lambdas.1);
            let mut it = block.iter();
            for t in 0..frames {
                for &pix in tile {
                    b2[t * n + pix] = *it.next().expect("block length");
                }
            }
        }
        let rss: f64 = scratch.img.iter().zip(b2.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * rss + self.smooth_penalty(b1, lambdas.0) + self.anomaly_penalty(b2, lambdas.1)
    }

    /// KKT residual of the stacked problem at `[b1; b2]`.
    fn stacked_kkt(&self, y: &[f64], beta: &[f64], lambdas: &[f64], scratch: &mut Scratch) -> f64 {
        let nt = self.geometry.n();
        let (b1, b2) = beta.split_at(nt);
        self.inverse_all(b1, &mut scratch.img, &mut scratch.tmp);
        // img ← Xβ − y
        for ((r, a), b) in scratch.img.iter_mut().zip(b2).zip(y) {
            *r += a - b;
        }
        let mut grad = vec![0.0; 2 * nt];
        let (g1, g2) = grad.split_at_mut(nt);
        self.forward_all(&scratch.img, g1, &mut scratch.tmp);
        g2.copy_from_slice(&scratch.img);
        kkt_residuals(&grad, beta, &self.partition, lambdas).0
    }

    pub fn solve(&self, y: &[f64], lambda1: f64, lambda2: f64, options: &SolverOptions) -> Result<DemixSolution> {
        options.validate()?;
        let nt = self.geometry.n();
        if y.len() != nt {
            return Err(Error::DimensionMismatch {
                what: "observation length N·T",
                expected: nt,
                got: y.len(),
            });
        }
        for (name, l) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {l}")));
            }
        }
        let lam = (lambda1, lambda2);
        let per_group = self.lambdas(lambda1, lambda2);
        let mut beta = vec![0.0; 2 * nt];
        let mut scratch = Scratch::new(nt, self.geometry.pixels());

        let mut prev = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        let mut trace = vec![prev];
        let mut iterations = 0;
        let mut kkt = f64::INFINITY;
        let mut converged = false;

        for sweep in 1..=options.max_iterations {
            iterations = sweep;
            let (b1, b2) = beta.split_at_mut(nt);
            let current = match options.sweep_order {
                SweepOrder::SmoothFirst => {
                    trace.push(self.update_smooth(y, b1, b2, lam, &mut scratch));
                    self.update_anomaly(y, b1, b2, lam, &mut scratch)
                }
                SweepOrder::AnomalyFirst => {
                    trace.push(self.update_anomaly(y, b1, b2, lam, &mut scratch));
                    self.update_smooth(y, b1, b2, lam, &mut scratch)
                }
            };
            trace.push(current);
            let change = (prev - current).abs() / prev.abs().max(f64::MIN_POSITIVE);
            prev = current;
            if change <= options.objective_rel_tolerance || sweep == options.max_iterations {
                kkt = self.stacked_kkt(y, &beta, &per_group, &mut scratch);
                if kkt <= options.kkt_tolerance {
                    converged = true;
                    break;
                }
            }
        }

        Ok(DemixSolution {
            result: SolverResult {
                estimate: GroupSparseSignal::new(beta, self.partition.clone())?,
                iterations,
                final_objective: prev,
                kkt_residual: kkt,
                converged,
                objective_trace: trace,
            },
            pixels_times_frames: nt,
        })
    }
}

struct Scratch {
    img: Vec<f64>,
    coef: Vec<f64>,
    tmp: Vec<f64>,
}

impl Scratch {
    fn new(nt: usize, n: usize) -> Self {
        Self {
            img: vec![0.0; nt],
            coef: vec![0.0; nt],
            tmp: vec![0.0; n],
        }
    }
}

/// Solves `min ½‖Y − DCT·B₁ − B₂‖² + λ₁Σ‖rows of B₁‖ + λ₂Σ‖tiles of B₂‖`
/// for `y = vec(Y)` (entry `t·N + pixel`).
pub fn solve_demix(
    y: &[f64],
    geometry: DemixGeometry,
    lambda1: f64,
    lambda2: f64,
    options: &SolverOptions,
) -> Result<DemixSolution> {
    DemixProblem::new(geometry)?.solve(y, lambda1, lambda2, options)
}
