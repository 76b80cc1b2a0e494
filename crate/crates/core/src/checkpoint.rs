//! Checkpoints: a `# {json header}` first line followed by the field CSV.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::AnchoringSource;
use crate::energy::{EnergyBreakdown, ModelParams, UnitField};
use crate::error::{Error, Result};
use crate::grid::{GridConfig, MeridianGrid};

pub const FORMAT: &str = "boojum-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub grid: GridConfig,
    pub grid_digest: String,
    pub model: ModelParams,
    pub anchoring: AnchoringSource,
    pub iterations: usize,
    pub converged: bool,
    pub energy: EnergyBreakdown,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub field: UnitField,
}

impl Checkpoint {
    /// Fails when the header's digest does not match its own grid config or `expected`.
    pub fn verify(&self, expected: Option<&GridConfig>) -> Result<()> {
        let own = self.header.grid.digest();
        if own != self.header.grid_digest {
            return Err(Error::DigestMismatch { checkpoint: self.header.grid_digest.clone(), expected: own });
        }
        if let Some(cfg) = expected {
            let want = cfg.digest();
            if want != self.header.grid_digest {
                return Err(Error::DigestMismatch { checkpoint: self.header.grid_digest.clone(), expected: want });
            }
        }
        Ok(())
    }
}

pub fn write_to<W: Write>(header: &CheckpointHeader, field: &UnitField, grid: &MeridianGrid, mut out: W) -> Result<()> {
    writeln!(out, "# {}", serde_json::to_string(header)?)?;
    field.write_csv(grid, &mut out)
}

pub fn read_from<R: BufRead>(mut input: R) -> Result<Checkpoint> {
    let mut first = String::new();
    input.read_line(&mut first)?;
    let json = first.trim_end().strip_prefix("# ").ok_or_else(|| Error::parse(1, "missing `# {header}` line"))?;
    let header: CheckpointHeader =
        serde_json::from_str(json).map_err(|e| Error::parse(1, format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(Error::parse(1, format!("unsupported format `{}`", header.format)));
    }
    let field = UnitField::read_csv(input, header.nodes, 2)?;
    Ok(Checkpoint { header, field })
}

/// Write via a temporary sibling and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save(path: &Path, header: &CheckpointHeader, field: &UnitField, grid: &MeridianGrid) -> Result<()> {
    let mut buf = Vec::new();
    write_to(header, field, grid, &mut buf)?;
    write_atomic(path, &buf)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    read_from(BufReader::new(fs::File::open(path)?))
}
