//! Plot-ready tables derived from sweep artifacts.
//!
//! `fig2.csv` is the boundary table. Per exponent, `fig_a`, `fig_b` and
//! `fig_c` hold `Q_W`, `Q_W / q_avg` and `f_auto / f_exact` in long format
//! `(s, t, value)`, restricted to times from the accuracy boundary on.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::numfmt::{fmt17, gamma_label};

use super::aggregate::BOUNDARY_FILE;
use super::read_status;
use super::table::Table;
use super::task::{task_dir_name, BoundaryRow, TaskArtifacts};
use super::{write_atomic, TaskStatus};

pub const FIG2_FILE: &str = "fig2.csv";

/// Copies the aggregated boundary table to `dest/fig2.csv`.
pub fn export_fig2(output_dir: &Path, dest: &Path) -> Result<PathBuf> {
    let source = output_dir.join(BOUNDARY_FILE);
    let bytes = fs::read(&source).map_err(|e| Error::io(&source, e))?;
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let path = dest.join(FIG2_FILE);
    write_atomic(&path, &bytes)?;
    Ok(path)
}

/// Writes `fig_{a,b,c}_gamma_<g>.csv` for each requested exponent.
pub fn export_fig345(output_dir: &Path, dest: &Path, gammas: &[f64]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dest).map_err(|e| Error::io(dest, e))?;
    let mut written = Vec::new();
    for &gamma in gammas {
        let dir = output_dir.join(task_dir_name(gamma));
        let artifacts = TaskArtifacts::in_dir(&dir);
        let missing = |path: &Path| Error::MissingArtifact {
            gamma,
            path: path.to_path_buf(),
        };
        if !matches!(read_status(&dir), Some((TaskStatus::Done, _, _))) {
            return Err(missing(&dir.join(super::STATUS_FILE)));
        }
        if let Some(path) = artifacts.first_missing() {
            return Err(missing(path));
        }
        let boundary = BoundaryRow::read(&artifacts.accuracy).map_err(|_| missing(&artifacts.accuracy))?;
        let q = Table::read(&artifacts.q_field).map_err(|_| missing(&artifacts.q_field))?;
        let task = Table::read(&artifacts.task_table).map_err(|_| missing(&artifacts.task_table))?;
        let stored: f64 = task
            .header("gamma")?
            .parse()
            .map_err(|_| missing(&artifacts.task_table))?;
        if gamma_label(stored) != gamma_label(gamma) {
            return Err(Error::GammaMismatch(gamma, stored));
        }
        let (t, s) = (q.numbers("t")?, q.numbers("s")?);
        let t_from = boundary.t10.unwrap_or(f64::NEG_INFINITY);
        let t10 = boundary
            .t10
            .map_or_else(|| "not_reached".to_string(), fmt17);
        let panels = [
            ("a", "q_w", q.numbers("q_w")?),
            ("b", "q_norm", q.numbers("q_norm")?),
            ("c", "ratio", task.numbers("ratio")?),
        ];
        for (panel, column, values) in panels {
            if values.len() != t.len() {
                return Err(missing(&artifacts.task_table));
            }
            let mut out = format!("# gamma={} t10={t10}\ns,t,{column}\n", fmt17(gamma));
            for k in 0..t.len() {
                if t[k] >= t_from {
                    let _ = writeln!(out, "{},{},{}", fmt17(s[k]), fmt17(t[k]), fmt17(values[k]));
                }
            }
            let path = dest.join(format!("fig_{panel}_gamma_{}.csv", gamma_label(gamma)));
            write_atomic(&path, out.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}
