//! Field snapshots: raw little-endian `f64` data plus a JSON sidecar.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anisocahn::{Error, Grid, Result, ScalarField};
use serde::{Deserialize, Serialize};

pub const FORMAT: &str = "anisocahn-field-f64le";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format: String,
    pub cells: Vec<usize>,
    pub lengths: Vec<f64>,
    /// Number of values in the data file.
    pub len: usize,
    pub eps: f64,
    pub delta: f64,
    pub config_hash: String,
}

/// `<stem>.f64` and `<stem>.json` for a path with or without extension.
pub fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("f64") | Some("json") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    (base.with_extension("f64"), base.with_extension("json"))
}

pub fn write_snapshot(stem: &Path, u: &ScalarField<f64>, eps: f64, delta: f64, config_hash: &str) -> Result<Vec<PathBuf>> {
    let (data, meta) = paths(stem);
    let g = u.grid();
    let header = SnapshotHeader {
        format: FORMAT.into(),
        cells: g.cells().to_vec(),
        lengths: g.lengths().to_vec(),
        len: u.len(),
        eps,
        delta,
        config_hash: config_hash.into(),
    };
    let bytes: Vec<u8> = u.data.iter().flat_map(|v| v.to_le_bytes()).collect();
    crate::write_atomic(&data, &bytes)?;
    crate::write_atomic(&meta, &serde_json::to_vec_pretty(&header)?)?;
    Ok(vec![data, meta])
}

pub fn read_snapshot(stem: &Path) -> Result<(SnapshotHeader, ScalarField<f64>)> {
    let (data, meta) = paths(stem);
    let header: SnapshotHeader = serde_json::from_slice(&std::fs::read(&meta)?)
        .map_err(|e| Error::Snapshot(format!("{}: {e}", meta.display())))?;
    if header.format != FORMAT {
        return Err(Error::Snapshot(format!("unknown format '{}'", header.format)));
    }
    let bytes = std::fs::read(&data)?;
    if bytes.len() != 8 * header.len {
        return Err(Error::Snapshot(format!(
            "{}: header declares {} values ({} bytes) but the file has {} bytes",
            data.display(),
            header.len,
            8 * header.len,
            bytes.len()
        )));
    }
    let grid: Arc<Grid> = Grid::new(&header.cells, &header.lengths)?.shared();
    if grid.len() != header.len {
        return Err(Error::Snapshot(format!("grid {:?} has {} cells, header declares {}", header.cells, grid.len(), header.len)));
    }
    let values = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
    let u = ScalarField::from_vec(&grid, values).map_err(|e| Error::Snapshot(e.to_string()))?;
    Ok((header, u))
}
