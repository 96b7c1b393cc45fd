use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::PhaseGrid;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "s,alpha,trials,successes,rate,mean_precision,mean_recall";

/// One row per cell, `s`-major then ascending α.
pub fn render_csv(grid: &PhaseGrid) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for (i, &s) in grid.config.s_values.iter().enumerate() {
        for (j, &alpha) in grid.config.alpha_values.iter().enumerate() {
            let c = grid.cell(i, j);
            let _ = writeln!(
                out,
                "{s},{alpha},{},{},{},{},{}",
                c.trials,
                c.successes,
                c.rate(),
                c.mean_precision,
                c.mean_recall
            );
        }
    }
    out
}

/// Binary graymap: one column per `s`, one row per α with the largest α on
/// top, pixel `round(255·rate)` (halves round away from zero).
pub fn render_pgm(grid: &PhaseGrid) -> Vec<u8> {
    let (w, h) = (grid.config.s_values.len(), grid.config.alpha_values.len());
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    for j in (0..h).rev() {
        for i in 0..w {
            out.push((255.0 * grid.cell(i, j).rate()).round() as u8);
        }
    }
    out
}

pub fn render(grid: &PhaseGrid, csv_path: impl AsRef<Path>, pgm_path: impl AsRef<Path>) -> Result<()> {
    fs::write(csv_path, render_csv(grid))?;
    fs::write(pgm_path, render_pgm(grid))?;
    Ok(())
}

/// Run record written next to the CSV/PGM pair; enough to re-render or
/// replay any cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub base_seed: u64,
    pub nonconverged: usize,
    pub grid: PhaseGrid,
}

impl Manifest {
    pub fn new(grid: &PhaseGrid) -> Self {
        Self {
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            base_seed: grid.config.base_seed,
            nonconverged: grid.nonconverged,
            grid: grid.clone(),
        }
    }
}

pub fn save_manifest(path: impl AsRef<Path>, grid: &PhaseGrid) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&Manifest::new(grid))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<PhaseGrid> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    let grid = manifest.grid;
    let expected = grid.config.s_values.len() * grid.config.alpha_values.len();
    if grid.cells.len() != expected {
        return Err(Error::format(
            "manifest",
            format!("{} cells for a {expected}-cell grid", grid.cells.len()),
        ));
    }
    if let Some(c) = grid.cells.iter().find(|c| c.successes > c.trials) {
        return Err(Error::format("manifest", format!("{} successes out of {} trials", c.successes, c.trials)));
    }
    Ok(grid)
}
