//! Plain-text trajectory files and small report-writing helpers.
//!
//! A trajectory file is one header line followed by one row per time node:
//!
//! ```text
//! n_steps n_interior horizon length name
//! v_0(x_1) v_0(x_2) ... v_0(x_n)
//! ...
//! v_{n_steps}(x_1) ... v_{n_steps}(x_n)
//! ```
//!
//! All floating-point values are written with seventeen significant digits
//! (`{:.16e}`), which round-trips every finite `f64` bit-exactly: a file
//! written, read back and written again is byte-identical. A single field
//! (no time axis) is stored as a trajectory with `n_steps = 0`, one row and
//! a zero horizon. The `name` tag records what the rows mean (`state`,
//! `control`, ...) and is not interpreted beyond being echoed back.

use crate::error::{config_error, CliError};
use ripvisc_core::{Field, SpatialGrid, TimeGrid, Trajectory};
use std::fs;
use std::path::Path;

/// A trajectory file after parsing, with the grid data it was stored on.
#[derive(Debug, Clone)]
pub struct StoredTrajectory {
    pub n_steps: usize,
    pub n_interior: usize,
    pub horizon: f64,
    pub length: f64,
    pub name: String,
    pub trajectory: Trajectory,
}

/// Serializes a trajectory on the given grids under a content tag.
pub fn trajectory_text(grid: &SpatialGrid, tg: &TimeGrid, name: &str, traj: &Trajectory) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {:.16e} {:.16e} {name}\n",
        tg.n_steps(),
        grid.n_interior(),
        tg.horizon(),
        grid.length()
    ));
    for field in traj.fields() {
        push_row(&mut out, field.values());
    }
    out
}

/// Serializes a single field as a one-row trajectory with no time axis.
pub fn field_text(grid: &SpatialGrid, name: &str, field: &Field) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "0 {} {:.16e} {:.16e} {name}\n",
        grid.n_interior(),
        0.0,
        grid.length()
    ));
    push_row(&mut out, field.values());
    out
}

fn push_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{v:.16e}"));
    }
    out.push('\n');
}

pub fn write_trajectory(
    path: &Path,
    grid: &SpatialGrid,
    tg: &TimeGrid,
    name: &str,
    traj: &Trajectory,
) -> Result<(), CliError> {
    write_string(path, &trajectory_text(grid, tg, name, traj))
}

/// Parses a trajectory file, validating the row and column counts against
/// its own header; grid compatibility is the caller's concern.
pub fn read_trajectory(path: &Path) -> Result<StoredTrajectory, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| config_error(format!("{}: empty file", path.display())))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 5 {
        return Err(config_error(format!(
            "{}: header must be `n_steps n_interior horizon length name`, got `{header}`",
            path.display()
        )));
    }
    let n_steps: usize = parts[0]
        .parse()
        .map_err(|_| config_error(format!("{}: bad step count `{}`", path.display(), parts[0])))?;
    let n_interior: usize = parts[1]
        .parse()
        .map_err(|_| config_error(format!("{}: bad node count `{}`", path.display(), parts[1])))?;
    let horizon: f64 = parts[2]
        .parse()
        .map_err(|_| config_error(format!("{}: bad horizon `{}`", path.display(), parts[2])))?;
    let length: f64 = parts[3]
        .parse()
        .map_err(|_| config_error(format!("{}: bad length `{}`", path.display(), parts[3])))?;
    let name = parts[4].to_string();

    let mut fields = Vec::with_capacity(n_steps + 1);
    for (row, line) in lines.enumerate() {
        let values: Result<Vec<f64>, CliError> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    config_error(format!(
                        "{}: row {}: `{tok}` is not a number",
                        path.display(),
                        row + 1
                    ))
                })
            })
            .collect();
        let values = values?;
        if values.len() != n_interior {
            return Err(config_error(format!(
                "{}: row {} has {} values, header promises {n_interior}",
                path.display(),
                row + 1,
                values.len()
            )));
        }
        fields.push(Field::from_vec(values));
    }
    if fields.len() != n_steps + 1 {
        return Err(config_error(format!(
            "{}: found {} rows, header promises {}",
            path.display(),
            fields.len(),
            n_steps + 1
        )));
    }
    Ok(StoredTrajectory {
        n_steps,
        n_interior,
        horizon,
        length,
        name,
        trajectory: Trajectory::from_fields(fields),
    })
}

/// Writes text, creating parent directories first.
pub fn write_string(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| config_error(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    fs::write(path, content)
        .map_err(|e| config_error(format!("cannot write {}: {e}", path.display())))
}

/// Writes a pretty-printed JSON report with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| config_error(format!("cannot serialize report: {e}")))?;
    text.push('\n');
    write_string(path, &text)
}
