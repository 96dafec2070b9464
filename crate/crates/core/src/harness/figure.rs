//! Merged learning curves in long format: `curve,timestep,success_rate`.
//!
//! Learning runs contribute their moving-average success per episode.
//! Constant references (pre-trained policy, demonstrations) are emitted on
//! the union of all timesteps so every curve shares the same axis.

use std::collections::BTreeSet;
use std::path::Path;

use super::runlog::RunLog;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub curve: String,
    pub timestep: u64,
    pub success_rate: f32,
}

pub fn merged_rows(curves: &[(String, RunLog)], constants: &[(String, f32)]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    let mut grid = BTreeSet::from([0u64]);
    for (name, log) in curves {
        for r in log.rows() {
            grid.insert(r.timestep);
            rows.push(CurveRow {
                curve: name.clone(),
                timestep: r.timestep,
                success_rate: r.success_ma,
            });
        }
    }
    for (name, value) in constants {
        rows.extend(grid.iter().map(|&t| CurveRow {
            curve: name.clone(),
            timestep: t,
            success_rate: *value,
        }));
    }
    rows
}

pub fn write_merged_curves(path: &Path, curves: &[(String, RunLog)], constants: &[(String, f32)]) -> Result<Vec<CurveRow>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let rows = merged_rows(curves, constants);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["curve", "timestep", "success_rate"])?;
    for r in &rows {
        w.write_record([r.curve.clone(), r.timestep.to_string(), format!("{:.6}", r.success_rate)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}
