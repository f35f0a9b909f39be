//! One sweep task: the pipeline for a single exponent and its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::accuracy::{
    accuracy_report, AccuracyReport, Boundary, BOUNDARY_COLUMNS,
};
use crate::automodel::{density_from_spread, GCurve};
use crate::error::{Error, Result};
use crate::exact::{exact_field_cancellable, ExactField};
use crate::kernel::{GTable, KernelParams};
use crate::meshes::LogMesh;
use crate::numfmt::{fmt17, gamma_label};
use crate::quadrature::QuadratureConfig;
use crate::reconstruct::{g_curve_from, q_field_weighted, QField, TimeWeighting};

use super::table::Table;
use super::write_atomic;

pub const EXACT_FIELD_FILE: &str = "exact_field.csv";
pub const Q_FIELD_FILE: &str = "q_field.csv";
pub const G_CURVE_FILE: &str = "g_curve.csv";
pub const ACCURACY_FILE: &str = "accuracy.csv";
pub const TASK_FILE: &str = "task.csv";
pub const STATUS_FILE: &str = "status";
pub const TIMING_FILE: &str = "timing.txt";

/// Columns of the combined per-task table.
pub const TASK_COLUMNS: &str = "t,s,rho,f_exact_reg,f_auto,q_w,ratio";

/// Directory name of a task, e.g. `gamma_0.50`.
pub fn task_dir_name(gamma: f64) -> String {
    format!("gamma_{}", gamma_label(gamma))
}

/// Everything one task produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub field: ExactField,
    pub q_field: QField,
    pub curve: GCurve,
    pub report: AccuracyReport,
}

/// Inputs of one task.
#[derive(Debug, Clone)]
pub struct TaskInputs {
    pub params: KernelParams,
    pub t_mesh: LogMesh,
    pub s_mesh: LogMesh,
    pub quad_cfg: QuadratureConfig,
    pub weighting: TimeWeighting,
}

/// exact field -> Q field -> g curve -> accuracy report.
pub fn run_pipeline(inputs: &TaskInputs) -> Result<PipelineOutput> {
    run_pipeline_cancellable(inputs, &|| false)
}

pub(crate) fn run_pipeline_cancellable(
    inputs: &TaskInputs,
    cancelled: &(dyn Fn() -> bool + Sync),
) -> Result<PipelineOutput> {
    inputs.quad_cfg.validate()?;
    let table = GTable::for_times(inputs.params, inputs.t_mesh.hi(), &QuadratureConfig::inner())?;
    let field = exact_field_cancellable(
        &table,
        &inputs.t_mesh,
        &inputs.s_mesh,
        &inputs.quad_cfg,
        cancelled,
    )?;
    let q_field = q_field_weighted(&field, inputs.weighting)?;
    let curve = g_curve_from(&q_field)?;
    let report = accuracy_report(&field, &curve)?;
    Ok(PipelineOutput {
        field,
        q_field,
        curve,
        report,
    })
}

impl PipelineOutput {
    /// Combined table under `# gamma=<g> t_mesh=<...> s_mesh=<...>`.
    pub fn task_table(&self) -> String {
        let field = &self.field;
        let gamma = field.gamma();
        let mut out = format!(
            "# gamma={} t_mesh={} s_mesh={}\n{TASK_COLUMNS}\n",
            fmt17(gamma),
            field.t_mesh(),
            field.s_mesh()
        );
        let g = self.curve.g_values();
        for (i, &t) in field.t_mesh().values().iter().enumerate() {
            for (j, &s) in field.s_mesh().values().iter().enumerate() {
                let rho = field.rho(i, j);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    fmt17(t),
                    fmt17(s),
                    fmt17(rho),
                    fmt17(field.get(i, j)),
                    fmt17(density_from_spread(gamma, t, rho * g[j])),
                    fmt17(self.q_field.get(i, j)),
                    fmt17(self.report.ratio.get(i, j))
                );
            }
        }
        out
    }

    pub fn accuracy_table(&self) -> String {
        format!("{BOUNDARY_COLUMNS}\n{}\n", self.report.boundary_row())
    }

    /// Writes every artifact except the status marker.
    pub fn write_artifacts(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(EXACT_FIELD_FILE), self.field.to_text().as_bytes())?;
        write_atomic(&dir.join(Q_FIELD_FILE), self.q_field.to_text().as_bytes())?;
        write_atomic(&dir.join(G_CURVE_FILE), self.curve.to_text().as_bytes())?;
        write_atomic(&dir.join(ACCURACY_FILE), self.accuracy_table().as_bytes())?;
        write_atomic(&dir.join(TASK_FILE), self.task_table().as_bytes())?;
        Ok(())
    }
}

/// Paths of a task's artifacts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskArtifacts {
    pub exact_field: PathBuf,
    pub q_field: PathBuf,
    pub g_curve: PathBuf,
    pub accuracy: PathBuf,
    pub task_table: PathBuf,
}

impl TaskArtifacts {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            exact_field: dir.join(EXACT_FIELD_FILE),
            q_field: dir.join(Q_FIELD_FILE),
            g_curve: dir.join(G_CURVE_FILE),
            accuracy: dir.join(ACCURACY_FILE),
            task_table: dir.join(TASK_FILE),
        }
    }

    pub fn all(&self) -> [&Path; 5] {
        [
            &self.exact_field,
            &self.q_field,
            &self.g_curve,
            &self.accuracy,
            &self.task_table,
        ]
    }

    /// First artifact that does not exist.
    pub fn first_missing(&self) -> Option<&Path> {
        self.all().into_iter().find(|p| !p.is_file())
    }
}

/// The single boundary row stored in a task's accuracy file.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryRow {
    pub gamma: f64,
    pub t10: Option<f64>,
    pub t_star: f64,
    pub s_star: f64,
    pub max_error_after_t10: Option<f64>,
    /// The row as written, reused verbatim by aggregation.
    pub line: String,
}

impl BoundaryRow {
    pub fn read(path: &Path) -> Result<Self> {
        let table = Table::read(path)?;
        let bad = |reason: &str| Error::Parse {
            kind: "accuracy",
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        let [row] = table.rows() else {
            return Err(bad("expected exactly one row"));
        };
        let num = |k: usize| row[k].parse::<f64>().map_err(|_| bad("unreadable number"));
        let flagged = |k: usize| -> Result<Option<f64>> {
            if row[k] == Boundary::NotReached.to_string() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        Ok(Self {
            gamma: num(table.column_index("gamma")?)?,
            t10: flagged(table.column_index("t10")?)?,
            t_star: num(table.column_index("t_star")?)?,
            s_star: num(table.column_index("s_star")?)?,
            max_error_after_t10: flagged(table.column_index("max_error_after_t10")?)?,
            line: row.join(","),
        })
    }
}
