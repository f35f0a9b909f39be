//! Cross-task summaries built from the files of a sweep directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::accuracy::BOUNDARY_COLUMNS;
use crate::automodel::GCurve;
use crate::error::{Error, Result};
use crate::numfmt::fmt17;

use super::task::{task_dir_name, BoundaryRow, TaskArtifacts};
use super::{read_status, write_atomic, SweepSpec, TaskStatus, SPEC_FILE};

pub const BOUNDARY_FILE: &str = "boundary.csv";
pub const G_CURVES_FILE: &str = "g_curves.csv";
pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateSummary {
    pub done: Vec<f64>,
    pub failed: Vec<f64>,
    pub pending: Vec<f64>,
    pub boundary: PathBuf,
    pub g_curves: PathBuf,
    pub manifest: PathBuf,
}

/// Writes the boundary table, the g-curve bundle and the manifest.
///
/// Tasks are visited in `gamma` order from the stored spec, so the result
/// does not depend on directory listing order.
pub fn aggregate(output_dir: &Path) -> Result<AggregateSummary> {
    let spec_path = output_dir.join(SPEC_FILE);
    let spec_text = fs::read_to_string(&spec_path).map_err(|e| Error::io(&spec_path, e))?;
    let spec = SweepSpec::from_toml(&spec_text, output_dir)?;

    let mut boundary = format!("{BOUNDARY_COLUMNS}\n");
    let mut g_curves = String::from("gamma,alpha,s,g\n");
    let mut task_lines = String::new();
    let (mut done, mut failed, mut pending) = (Vec::new(), Vec::new(), Vec::new());

    for gamma in spec.gammas()? {
        let name = task_dir_name(gamma);
        let dir = output_dir.join(&name);
        let checksum = spec.task_checksum(gamma);
        let status = match read_status(&dir) {
            Some((status, c, _)) if c == checksum => status,
            _ => TaskStatus::Pending,
        };
        let _ = writeln!(task_lines, "{name} {status} {checksum}");
        match status {
            TaskStatus::Done => done.push(gamma),
            TaskStatus::Failed => {
                failed.push(gamma);
                continue;
            }
            TaskStatus::Pending => {
                pending.push(gamma);
                continue;
            }
        }
        let artifacts = TaskArtifacts::in_dir(&dir);
        if let Some(missing) = artifacts.first_missing() {
            return Err(Error::MissingArtifact {
                gamma,
                path: missing.to_path_buf(),
            });
        }
        let unreadable = |path: &Path| Error::MissingArtifact {
            gamma,
            path: path.to_path_buf(),
        };
        let row = BoundaryRow::read(&artifacts.accuracy).map_err(|_| unreadable(&artifacts.accuracy))?;
        let _ = writeln!(boundary, "{}", row.line);
        let curve_text =
            fs::read_to_string(&artifacts.g_curve).map_err(|_| unreadable(&artifacts.g_curve))?;
        let curve = GCurve::from_text(&curve_text, &artifacts.g_curve)
            .map_err(|_| unreadable(&artifacts.g_curve))?;
        for (s, g) in curve.s_mesh().values().iter().zip(curve.g_values()) {
            let _ = writeln!(
                g_curves,
                "{},{},{},{}",
                fmt17(gamma),
                fmt17(curve.alpha()),
                fmt17(*s),
                fmt17(*g)
            );
        }
    }
    if done.is_empty() {
        return Err(Error::NothingToAggregate(output_dir.to_path_buf()));
    }

    let gaps: Vec<String> = failed
        .iter()
        .chain(&pending)
        .map(|g| crate::numfmt::gamma_label(*g))
        .collect();
    let manifest = format!(
        "levy-automodel {}\nspec_checksum {}\ntasks done={} failed={} pending={}\ngaps {}\n\n[spec]\n{}\n[tasks]\n{}",
        env!("CARGO_PKG_VERSION"),
        spec.checksum()?,
        done.len(),
        failed.len(),
        pending.len(),
        if gaps.is_empty() { "none".to_string() } else { gaps.join(",") },
        spec_text.trim_end(),
        task_lines
    );

    let summary = AggregateSummary {
        done,
        failed,
        pending,
        boundary: output_dir.join(BOUNDARY_FILE),
        g_curves: output_dir.join(G_CURVES_FILE),
        manifest: output_dir.join(MANIFEST_FILE),
    };
    write_atomic(&summary.boundary, boundary.as_bytes())?;
    write_atomic(&summary.g_curves, g_curves.as_bytes())?;
    write_atomic(&summary.manifest, manifest.as_bytes())?;
    Ok(summary)
}
