//! BDX1: flat binary dictionary format.
//!
//! ```text
//! "BDX1"
//! u32 n, u32 p, u32 G
//! G × u32 group sizes
//! n·p × f64 entries, row-major
//! u32 descriptor length, descriptor bytes (UTF-8, one line)
//! p × u32 column indices, groups listed in order
//! ```
//!
//! All integers and floats are little-endian. The trailing index list makes
//! non-contiguous groups (temporal groups of Kronecker dictionaries) round
//! trip; for contiguous partitions it is simply `0..p`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{BlockDictionary, GroupPartition, StructureTag};
use crate::binio::*;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const BDX_MAGIC: &[u8; 4] = b"BDX1";

pub fn write_bdx<W: Write>(w: &mut W, x: &BlockDictionary) -> Result<()> {
    let part = x.partition();
    w.write_all(BDX_MAGIC)?;
    write_u32(w, x.n())?;
    write_u32(w, x.p())?;
    write_u32(w, part.num_groups())?;
    for d in part.sizes() {
        write_u32(w, d)?;
    }
    write_f64s(w, x.matrix().as_slice())?;
    let desc = x.structure().to_string();
    write_u32(w, desc.len())?;
    w.write_all(desc.as_bytes())?;
    for set in part.groups() {
        for &j in set {
            write_u32(w, j)?;
        }
    }
    Ok(())
}

pub fn read_bdx<R: Read>(r: &mut R) -> Result<BlockDictionary> {
    read_magic(r, BDX_MAGIC, "BDX1")?;
    let n = read_u32(r)?;
    let p = read_u32(r)?;
    let g = read_u32(r)?;
    let mut sizes = Vec::with_capacity(g);
    for _ in 0..g {
        sizes.push(read_u32(r)?);
    }
    if sizes.iter().sum::<usize>() != p {
        return Err(Error::format("BDX1", "group sizes do not sum to p"));
    }
    let entries = read_f64s(r, n * p)?;
    let len = read_u32(r)?;
    let mut desc = vec![0u8; len];
    r.read_exact(&mut desc)?;
    let desc = String::from_utf8(desc).map_err(|_| Error::format("BDX1", "descriptor is not UTF-8"))?;
    let structure: StructureTag = desc.parse()?;
    let mut groups = Vec::with_capacity(g);
    for d in sizes {
        let mut set = Vec::with_capacity(d);
        for _ in 0..d {
            set.push(read_u32(r)?);
        }
        groups.push(set);
    }
    let partition = GroupPartition::from_groups(groups, p)?;
    let matrix = Matrix::from_row_major(n, p, entries)?;
    BlockDictionary::new(matrix, partition, structure)
}

pub fn save_bdx(path: impl AsRef<Path>, x: &BlockDictionary) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_bdx(&mut w, x)?;
    w.flush()?;
    Ok(())
}

pub fn load_bdx(path: impl AsRef<Path>) -> Result<BlockDictionary> {
    read_bdx(&mut BufReader::new(File::open(path)?))
}
