//! SIX1 synthetic instances and WFD1 wavefield files.
//!
//! SIX1 (little-endian):
//!
//! ```text
//! "SIX1", u32 n, u32 p, u32 G, f64 sigma, u64 seed,
//! <BDX1 dictionary>, p × f64 truth, n × f64 noise, n × f64 observations
//! ```
//!
//! WFD1 (little-endian):
//!
//! ```text
//! "WFD1", u32 rows, u32 cols, u32 T, then T frames of rows·cols f64, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{GroupSparseSignal, SyntheticInstance};
use crate::binio::*;
use crate::dictionary::io::{read_bdx, write_bdx};
use crate::error::{Error, Result};

pub const SIX_MAGIC: &[u8; 4] = b"SIX1";
pub const WFD_MAGIC: &[u8; 4] = b"WFD1";

pub fn write_six<W: Write>(w: &mut W, inst: &SyntheticInstance) -> Result<()> {
    w.write_all(SIX_MAGIC)?;
    write_u32(w, inst.dictionary.n())?;
    write_u32(w, inst.dictionary.p())?;
    write_u32(w, inst.dictionary.num_groups())?;
    write_f64(w, inst.sigma)?;
    write_u64(w, inst.seed)?;
    write_bdx(w, &inst.dictionary)?;
    write_f64s(w, inst.truth.coefficients())?;
    write_f64s(w, &inst.noise)?;
    write_f64s(w, &inst.observations)?;
    Ok(())
}

pub fn read_six<R: Read>(r: &mut R) -> Result<SyntheticInstance> {
    read_magic(r, SIX_MAGIC, "SIX1")?;
    let n = read_u32(r)?;
    let p = read_u32(r)?;
    let g = read_u32(r)?;
    let sigma = read_f64(r)?;
    let seed = read_u64(r)?;
    let dictionary = read_bdx(r)?;
    if (dictionary.n(), dictionary.p(), dictionary.num_groups()) != (n, p, g) {
        return Err(Error::format("SIX1", "header does not match embedded dictionary"));
    }
    let truth = GroupSparseSignal::new(read_f64s(r, p)?, dictionary.partition().clone())?;
    let noise = read_f64s(r, n)?;
    let observations = read_f64s(r, n)?;
    Ok(SyntheticInstance {
        dictionary,
        truth,
        noise,
        observations,
        sigma,
        seed,
    })
}

pub fn save_six(path: impl AsRef<Path>, inst: &SyntheticInstance) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_six(&mut w, inst)?;
    w.flush()?;
    Ok(())
}

pub fn load_six(path: impl AsRef<Path>) -> Result<SyntheticInstance> {
    read_six(&mut BufReader::new(File::open(path)?))
}

/// Externally generated wavefield: `frames` snapshots of a `rows × cols` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavefield {
    pub rows: usize,
    pub cols: usize,
    pub frames: usize,
    /// Frame-major, each frame row-major; this is `vec(Y)` for the demix solver.
    pub data: Vec<f64>,
}

impl Wavefield {
    /// Side length of the square image, as the DCT basis requires.
    pub fn square_side(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(Error::InvalidParameter(format!(
                "wavefield frames must be square, got {}x{}",
                self.rows, self.cols
            )));
        }
        Ok(self.rows)
    }
}

pub fn write_wfd<W: Write>(w: &mut W, field: &Wavefield) -> Result<()> {
    if field.data.len() != field.rows * field.cols * field.frames {
        return Err(Error::DimensionMismatch {
            what: "wavefield data length",
            expected: field.rows * field.cols * field.frames,
            got: field.data.len(),
        });
    }
    w.write_all(WFD_MAGIC)?;
    write_u32(w, field.rows)?;
    write_u32(w, field.cols)?;
    write_u32(w, field.frames)?;
    write_f64s(w, &field.data)
}

pub fn read_wfd<R: Read>(r: &mut R) -> Result<Wavefield> {
    read_magic(r, WFD_MAGIC, "WFD1")?;
    let rows = read_u32(r)?;
    let cols = read_u32(r)?;
    let frames = read_u32(r)?;
    let data = read_f64s(r, rows * cols * frames)?;
    Ok(Wavefield {
        rows,
        cols,
        frames,
        data,
    })
}

pub fn save_wfd(path: impl AsRef<Path>, field: &Wavefield) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_wfd(&mut w, field)?;
    w.flush()?;
    Ok(())
}

pub fn load_wfd(path: impl AsRef<Path>) -> Result<Wavefield> {
    read_wfd(&mut BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_demix_scene, SceneConfig, SupportMode};

    #[test]
    fn six_round_trip_is_exact() {
        let cfg = SceneConfig {
            side: 4,
            frames: 2,
            tile_size: 4,
            s1: 2,
            s2: 1,
            alpha: 3.0,
            sigma: 0.1,
            seed: 5,
            support_mode: SupportMode::PerComponent,
        };
        let inst = build_demix_scene(&cfg).unwrap();
        let mut buf = Vec::new();
        write_six(&mut buf, &inst).unwrap();
        assert_eq!(&buf[..4], b"SIX1");
        let back = read_six(&mut buf.as_slice()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back.reconstruct(), back.observations);
    }

    #[test]
    fn wfd_layout() {
        let field = Wavefield {
            rows: 2,
            cols: 2,
            frames: 2,
            data: (0..8).map(f64::from).collect(),
        };
        let mut buf = Vec::new();
        write_wfd(&mut buf, &field).unwrap();
        assert_eq!(buf.len(), 16 + 64);
        assert_eq!(&buf[16..24], &0.0f64.to_le_bytes());
        assert_eq!(&buf[72..80], &7.0f64.to_le_bytes());
        assert_eq!(read_wfd(&mut buf.as_slice()).unwrap(), field);
        let bad = Wavefield { rows: 2, cols: 3, frames: 1, data: vec![0.0; 6] };
        assert!(bad.square_side().is_err());
    }
}
