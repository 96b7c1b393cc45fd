//! Block-partitioned dictionaries: construction, Kronecker time extension,
//! concatenation, coherence diagnostics and the BDX1 file format.

mod coherence;
pub mod io;
mod partition;
mod structure;

pub use coherence::{
    block_b1_norm, coherence_report, inter_block_coherence, intra_block_coherence,
    operator_norms, CoherenceOptions, CoherenceReport, OperatorNorms,
};
pub use partition::GroupPartition;
pub use structure::StructureTag;

use crate::error::{Error, Result};
use crate::linalg::{LinearOperator, Matrix};

/// Column norms must be one to within this tolerance.
pub const UNIT_NORM_TOL: f64 = 1e-10;

/// A dense `n × p` dictionary with unit-norm columns and a group partition of
/// its columns.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDictionary {
    matrix: Matrix,
    partition: GroupPartition,
    structure: StructureTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// Orthonormal 2-D DCT-II on a `side × side` image.
    Dct2d { side: usize },
    /// `N × N` identity.
    Dirac { n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMode {
    /// Each input group is extended across all frames.
    Temporal,
    /// `d × d` pixel tiles (`D = d²`) extended across all frames.
    Spatiotemporal { tile_size: usize },
}

impl BlockDictionary {
    pub fn new(matrix: Matrix, partition: GroupPartition, structure: StructureTag) -> Result<Self> {
        if partition.p() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                what: "partition size vs column count",
                expected: matrix.cols(),
                got: partition.p(),
            });
        }
        if structure.shape() != (matrix.rows(), matrix.cols()) {
            return Err(Error::InvalidDimension(format!(
                "structure {structure} does not match a {}x{} matrix",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let mut norms = vec![0.0; matrix.cols()];
        for i in 0..matrix.rows() {
            for (n, v) in norms.iter_mut().zip(matrix.row(i)) {
                *n += v * v;
            }
        }
        for (j, n) in norms.into_iter().enumerate() {
            let norm = n.sqrt();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NonUnitColumn { column: j, norm });
            }
        }
        Ok(Self {
            matrix,
            partition,
            structure,
        })
    }

    /// A user-supplied dense dictionary (validated, never renormalized).
    pub fn dense(matrix: Matrix, partition: GroupPartition) -> Result<Self> {
        let structure = StructureTag::Dense {
            rows: matrix.rows(),
            cols: matrix.cols(),
        };
        Self::new(matrix, partition, structure)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn structure(&self) -> &StructureTag {
        &self.structure
    }

    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    pub fn p(&self) -> usize {
        self.matrix.cols()
    }

    pub fn num_groups(&self) -> usize {
        self.partition.num_groups()
    }

    /// Columns of group `g` as an `n × d_g` matrix.
    pub fn block(&self, g: usize) -> Matrix {
        self.matrix.select_columns(self.partition.group(g))
    }

    /// Same matrix, groups listed in a different order.
    pub fn with_partition(&self, partition: GroupPartition) -> Result<Self> {
        Self::new(self.matrix.clone(), partition, self.structure.clone())
    }

    /// Dense `A x` ignoring structure; the reference for the fast paths.
    pub fn apply_dense(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }
}

/// Orthonormal 1-D DCT-II analysis matrix: row `k` is frequency `k`.
pub fn dct_1d(m: usize) -> Matrix {
    let mf = m as f64;
    Matrix::from_fn(m, m, |k, i| {
        let c = if k == 0 { (1.0 / mf).sqrt() } else { (2.0 / mf).sqrt() };
        c * (std::f64::consts::PI * (2 * i + 1) as f64 * k as f64 / (2.0 * mf)).cos()
    })
}

/// Synthesis matrix of the 2-D DCT-II: row `r·side + c` is pixel `(r, c)`,
/// column `k1·side + k2` is the atom with frequencies `(k1, k2)`.
pub fn dct_2d_matrix(side: usize) -> Matrix {
    let c = dct_1d(side);
    let n = side * side;
    Matrix::from_fn(n, n, |pix, atom| {
        let (r, col) = (pix / side, pix % side);
        let (k1, k2) = (atom / side, atom % side);
        c.get(k1, r) * c.get(k2, col)
    })
}

/// Orthonormal basis with singleton groups.
pub fn build_basis(kind: BasisKind) -> Result<BlockDictionary> {
    let (matrix, structure) = match kind {
        BasisKind::Dirac { n } => {
            if n == 0 {
                return Err(Error::InvalidDimension("dirac basis needs N >= 1".into()));
            }
            (Matrix::identity(n), StructureTag::Dirac { n })
        }
        BasisKind::Dct2d { side } => {
            if side == 0 {
                return Err(Error::InvalidDimension("dct2d basis needs side >= 1".into()));
            }
            (dct_2d_matrix(side), StructureTag::Dct2d { side })
        }
    };
    let partition = GroupPartition::singletons(matrix.cols())?;
    BlockDictionary::new(matrix, partition, structure)
}

/// Groups of `d × d` pixel tiles (`D = d²`) on a `side × side` image, tiles in
/// row-major order.
pub fn tile_groups(side: usize, tile_size: usize) -> Result<Vec<Vec<usize>>> {
    let n = side * side;
    if tile_size == 0 || n % tile_size != 0 {
        return Err(Error::InvalidParameter(format!(
            "tile size D = {tile_size} does not divide N = {n}"
        )));
    }
    let d = (tile_size as f64).sqrt().round() as usize;
    if d * d != tile_size {
        return Err(Error::InvalidParameter(format!(
            "tile size D = {tile_size} is not a perfect square"
        )));
    }
    if side % d != 0 {
        return Err(Error::InvalidParameter(format!(
            "tile side {d} does not divide image side {side}"
        )));
    }
    let tiles = side / d;
    let mut groups = Vec::with_capacity(tiles * tiles);
    for a in 0..tiles {
        for b in 0..tiles {
            let mut set = Vec::with_capacity(tile_size);
            for u in 0..d {
                for v in 0..d {
                    set.push((a * d + u) * side + b * d + v);
                }
            }
            set.sort_unstable();
            groups.push(set);
        }
    }
    Ok(groups)
}

fn image_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidParameter(format!(
            "spatiotemporal grouping needs a square image, N = {n}"
        )));
    }
    Ok(side)
}

/// `I_T ⊗ X`. Column `t·p + j` is atom `j` in frame `t`.
pub fn time_extend(x: &BlockDictionary, frames: usize, mode: GroupMode) -> Result<BlockDictionary> {
    if frames == 0 {
        return Err(Error::InvalidDimension("T must be positive".into()));
    }
    let (n, p) = (x.n(), x.p());
    let mut matrix = Matrix::zeros(frames * n, frames * p);
    for t in 0..frames {
        for i in 0..n {
            for j in 0..p {
                matrix.set(t * n + i, t * p + j, x.matrix.get(i, j));
            }
        }
    }
    let spatial: Vec<Vec<usize>> = match mode {
        GroupMode::Temporal => x.partition.groups().to_vec(),
        GroupMode::Spatiotemporal { tile_size } => {
            let side = image_side(p)?;
            tile_groups(side, tile_size)?
        }
    };
    let groups = spatial
        .iter()
        .map(|set| {
            let mut g: Vec<usize> = (0..frames)
                .flat_map(|t| set.iter().map(move |j| t * p + j))
                .collect();
            g.sort_unstable();
            g
        })
        .collect();
    let partition = GroupPartition::from_groups(groups, frames * p)?;
    let structure = StructureTag::KroneckerTime {
        frames,
        inner: Box::new(x.structure.clone()),
    };
    BlockDictionary::new(matrix, partition, structure)
}

/// `[A | B]` with B's groups shifted past A's columns.
pub fn concat_blocks(a: &BlockDictionary, b: &BlockDictionary) -> Result<BlockDictionary> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            what: "row count of concatenated dictionaries",
            expected: a.n(),
            got: b.n(),
        });
    }
    let matrix = a.matrix.hstack(&b.matrix)?;
    let partition = a.partition.concat(&b.partition);
    let structure = StructureTag::Concat(Box::new(a.structure.clone()), Box::new(b.structure.clone()));
    BlockDictionary::new(matrix, partition, structure)
}

/// The DCT⊕Dirac demixing dictionary `[I_T⊗DCT | I_T⊗I_N]` with temporal
/// groups on the smooth part and `D`-pixel spatiotemporal tiles on the
/// anomaly part.
pub fn demix_dictionary(side: usize, frames: usize, tile_size: usize) -> Result<BlockDictionary> {
    let dct = build_basis(BasisKind::Dct2d { side })?;
    let dirac = build_basis(BasisKind::Dirac { n: side * side })?;
    let smooth = time_extend(&dct, frames, GroupMode::Temporal)?;
    let anomaly = time_extend(&dirac, frames, GroupMode::Spatiotemporal { tile_size })?;
    concat_blocks(&smooth, &anomaly)
}

// Structured products over a sub-block of the stored matrix whose top-left
// corner is (r0, c0). Summation runs over columns in ascending order with a
// single accumulator per output entry, matching the dense kernel bit for bit
// whenever the skipped entries are exact zeros.
fn apply_view(m: &Matrix, r0: usize, c0: usize, tag: &StructureTag, x: &[f64], out: &mut [f64]) {
    match tag {
        StructureTag::Dirac { .. } => out.copy_from_slice(x),
        StructureTag::Dense { .. } | StructureTag::Dct2d { .. } => {
            let (rows, cols) = tag.shape();
            for (i, o) in out.iter_mut().enumerate().take(rows) {
                let row = &m.row(r0 + i)[c0..c0 + cols];
                let mut acc = 0.0;
                for (a, b) in row.iter().zip(x) {
                    acc += a * b;
                }
                *o = acc;
            }
        }
        StructureTag::KroneckerTime { frames, inner } => {
            let (r, c) = inner.shape();
            for t in 0..*frames {
                apply_view(m, r0, c0, inner, &x[t * c..(t + 1) * c], &mut out[t * r..(t + 1) * r]);
            }
        }
        StructureTag::Concat(a, b) => {
            let (_, ca) = a.shape();
            apply_view(m, r0, c0, a, &x[..ca], out);
            let mut tmp = vec![0.0; out.len()];
            apply_view(m, r0, c0 + ca, b, &x[ca..], &mut tmp);
            out.iter_mut().zip(tmp).for_each(|(o, v)| *o += v);
        }
    }
}

fn apply_transpose_view(
    m: &Matrix,
    r0: usize,
    c0: usize,
    tag: &StructureTag,
    r: &[f64],
    out: &mut [f64],
) {
    match tag {
        StructureTag::Dirac { .. } => out.copy_from_slice(r),
        StructureTag::Dense { .. } | StructureTag::Dct2d { .. } => {
            let (rows, cols) = tag.shape();
            out.iter_mut().for_each(|o| *o = 0.0);
            for (i, &ri) in r.iter().enumerate().take(rows) {
                if ri == 0.0 {
                    continue;
                }
                let row = &m.row(r0 + i)[c0..c0 + cols];
                for (o, a) in out.iter_mut().zip(row) {
                    *o += a * ri;
                }
            }
        }
        StructureTag::KroneckerTime { frames, inner } => {
            let (rr, c) = inner.shape();
            for t in 0..*frames {
                apply_transpose_view(m, r0, c0, inner, &r[t * rr..(t + 1) * rr], &mut out[t * c..(t + 1) * c]);
            }
        }
        StructureTag::Concat(a, b) => {
            let (_, ca) = a.shape();
            let (head, tail) = out.split_at_mut(ca);
            apply_transpose_view(m, r0, c0, a, r, head);
            apply_transpose_view(m, r0, c0 + ca, b, r, tail);
        }
    }
}

impl LinearOperator for BlockDictionary {
    fn nrows(&self) -> usize {
        self.n()
    }

    fn ncols(&self) -> usize {
        self.p()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        apply_view(&self.matrix, 0, 0, &self.structure, x, out);
    }

    fn apply_transpose(&self, r: &[f64], out: &mut [f64]) {
        apply_transpose_view(&self.matrix, 0, 0, &self.structure, r, out);
    }

    fn spectral_norm_sq(&self) -> Result<f64> {
        self.matrix.spectral_norm_sq()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn orthonormality_error(m: &Matrix) -> f64 {
        let g = m.tr_matmul(m).unwrap();
        let mut worst = 0.0f64;
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.get(i, j) - target).abs());
            }
        }
        worst
    }

    #[test]
    fn dirac_is_identity() {
        let d = build_basis(BasisKind::Dirac { n: 3 }).unwrap();
        assert_eq!(d.matrix(), &Matrix::identity(3));
        assert_eq!(d.num_groups(), 3);
    }

    #[test]
    fn dct2d_side2_entries() {
        // Enumerate all 16 entries: every one is ±1/2.
        let d = build_basis(BasisKind::Dct2d { side: 2 }).unwrap();
        for &v in d.matrix().as_slice() {
            assert!((v.abs() - 0.5).abs() < 1e-15);
        }
        assert!((d.matrix().max_abs() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn dct2d_entry_bound() {
        for side in [4usize, 8, 16] {
            let d = build_basis(BasisKind::Dct2d { side }).unwrap();
            let n = (side * side) as f64;
            assert!(d.matrix().max_abs() <= (4.0 / n).sqrt() + 1e-15);
        }
    }

    #[test]
    fn bases_are_orthonormal() {
        for side in 1..=6 {
            let d = build_basis(BasisKind::Dct2d { side }).unwrap();
            assert!(orthonormality_error(d.matrix()) <= 1e-10);
        }
        let d = build_basis(BasisKind::Dirac { n: 9 }).unwrap();
        assert!(orthonormality_error(d.matrix()) <= 1e-10);
    }

    #[test]
    fn zero_sized_bases_rejected() {
        assert!(build_basis(BasisKind::Dirac { n: 0 }).is_err());
        assert!(build_basis(BasisKind::Dct2d { side: 0 }).is_err());
    }

    #[test]
    fn temporal_extension_of_dirac() {
        let x = build_basis(BasisKind::Dirac { n: 4 }).unwrap();
        let e = time_extend(&x, 2, GroupMode::Temporal).unwrap();
        assert_eq!((e.n(), e.p()), (8, 8));
        assert_eq!(e.num_groups(), 4);
        assert_eq!(e.partition().group(1), &[1, 5]);
        assert!(e.partition().sizes().iter().all(|&d| d == 2));
    }

    #[test]
    fn spatiotemporal_extension_counts() {
        let x = build_basis(BasisKind::Dirac { n: 16 }).unwrap();
        let e = time_extend(&x, 3, GroupMode::Spatiotemporal { tile_size: 4 }).unwrap();
        assert_eq!(e.num_groups(), 4);
        assert!(e.partition().sizes().iter().all(|&d| d == 12));
        // first tile: pixels 0,1,4,5 in each frame
        assert_eq!(e.partition().group(0), &[0, 1, 4, 5, 16, 17, 20, 21, 32, 33, 36, 37]);
    }

    #[test]
    fn spatiotemporal_errors() {
        let x = build_basis(BasisKind::Dirac { n: 16 }).unwrap();
        assert!(time_extend(&x, 2, GroupMode::Spatiotemporal { tile_size: 3 }).is_err());
        assert!(time_extend(&x, 2, GroupMode::Spatiotemporal { tile_size: 8 }).is_err());
        let x = build_basis(BasisKind::Dirac { n: 36 }).unwrap();
        // 6x6 image, 4x4 tiles do not fit; 16 does not divide 36 either
        assert!(time_extend(&x, 2, GroupMode::Spatiotemporal { tile_size: 16 }).is_err());
        assert!(time_extend(&x, 0, GroupMode::Temporal).is_err());
    }

    #[test]
    fn concat_shifts_groups() {
        let a = build_basis(BasisKind::Dirac { n: 2 }).unwrap();
        let c = concat_blocks(&a, &a).unwrap();
        assert_eq!((c.n(), c.p(), c.num_groups()), (2, 4, 4));
        assert_eq!(c.partition().group(3), &[3]);
        let b = build_basis(BasisKind::Dirac { n: 3 }).unwrap();
        assert!(concat_blocks(&a, &b).is_err());
    }

    #[test]
    fn demix_group_count() {
        let x = demix_dictionary(4, 2, 4).unwrap();
        assert_eq!(x.num_groups(), 16 + 4);
        assert_eq!((x.n(), x.p()), (32, 64));
    }

    #[test]
    fn non_unit_columns_rejected() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 0.5]]).unwrap();
        let err = BlockDictionary::dense(m, GroupPartition::singletons(2).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NonUnitColumn { column: 1, .. }));
    }

    #[test]
    fn fast_paths_match_dense() {
        let x = demix_dictionary(4, 3, 4).unwrap();
        let mut rng = SplitMix64::new(5);
        let v = rng.gaussian_vec(x.p(), 1.0);
        let r = rng.gaussian_vec(x.n(), 1.0);
        let mut fast = vec![0.0; x.n()];
        x.apply(&v, &mut fast);
        let dense = x.apply_dense(&v);
        for (a, b) in fast.iter().zip(&dense) {
            assert!((a - b).abs() <= 1e-10);
        }
        let mut fast_t = vec![0.0; x.p()];
        x.apply_transpose(&r, &mut fast_t);
        let dense_t = x.matrix().tr_matvec(&r);
        for (a, b) in fast_t.iter().zip(&dense_t) {
            assert!((a - b).abs() <= 1e-10);
        }
    }
}
