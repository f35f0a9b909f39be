//! Parameter sweep over the exponent: one independent task per `gamma`,
//! checkpointed on disk so an interrupted run resumes where it stopped.
//!
//! Layout under `output_dir`:
//!
//! ```text
//! sweep_spec.toml            canonical copy of the inputs
//! gamma_0.50/                one directory per task
//!     exact_field.csv q_field.csv g_curve.csv accuracy.csv task.csv
//!     status                 DONE or FAILED with the input checksum
//!     timing.txt             wall time, not part of the reproducible output
//! boundary.csv g_curves.csv manifest.txt    written by aggregation
//! ```

mod aggregate;
mod export;
mod table;
mod task;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::KernelParams;
use crate::meshes::{LinearMeshSpec, LogMeshSpec};
use crate::numfmt::{fmt17, gamma_label};
use crate::quadrature::QuadratureConfig;
use crate::reconstruct::TimeWeighting;

pub use aggregate::{aggregate, AggregateSummary, BOUNDARY_FILE, G_CURVES_FILE, MANIFEST_FILE};
pub use export::{export_fig2, export_fig345, FIG2_FILE};
pub use task::{
    run_pipeline, task_dir_name, BoundaryRow, PipelineOutput, TaskArtifacts, TaskInputs,
    ACCURACY_FILE, EXACT_FIELD_FILE, G_CURVE_FILE, Q_FIELD_FILE, STATUS_FILE, TASK_COLUMNS,
    TASK_FILE, TIMING_FILE,
};

/// Canonical copy of the spec inside the output directory.
pub const SPEC_FILE: &str = "sweep_spec.toml";

const PARTIAL_PREFIX: &str = ".partial-";

/// Writes `bytes` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut tmp = tempfile::Builder::new()
        .prefix(PARTIAL_PREFIX)
        .tempfile_in(dir)
        .map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Removes temporary files left behind by a killed writer.
fn remove_partials(dir: &Path) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(Error::io(dir, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.file_name().to_string_lossy().starts_with(PARTIAL_PREFIX) {
            fs::remove_file(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        }
    }
    Ok(())
}

/// Per-task replacement inputs, keyed by the two-decimal `gamma` label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskOverride {
    pub quad_cfg: QuadratureConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub gamma_mesh: LinearMeshSpec,
    pub t_mesh: LogMeshSpec,
    pub s_mesh: LogMeshSpec,
    #[serde(default = "QuadratureConfig::outer")]
    pub quad_cfg: QuadratureConfig,
    #[serde(default)]
    pub time_weighting: TimeWeighting,
    pub output_dir: PathBuf,
    /// Worker count; all available cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<String, TaskOverride>,
}

impl SweepSpec {
    /// Parses and validates a spec; a relative `output_dir` is taken
    /// relative to `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut spec: SweepSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("sweep spec: {e}")))?;
        if spec.output_dir.is_relative() {
            spec.output_dir = base_dir.join(&spec.output_dir);
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        let gammas = self.gamma_mesh.build()?;
        for &g in gammas.values() {
            KernelParams::new(g)?;
        }
        let t_mesh = self.t_mesh.build()?;
        self.s_mesh.build()?;
        if t_mesh.lo() < 1.0 {
            return Err(Error::Config(format!(
                "t_mesh.lo must be at least 1, got {}",
                t_mesh.lo()
            )));
        }
        self.quad_cfg.validate()?;
        if self.parallelism == Some(0) {
            return Err(Error::Config("parallelism must be at least 1".into()));
        }
        let labels: Vec<String> = gammas.values().iter().map(|g| gamma_label(*g)).collect();
        for key in self.overrides.keys() {
            if !labels.contains(key) {
                return Err(Error::Config(format!(
                    "override {key:?} does not name a gamma of the mesh"
                )));
            }
        }
        Ok(())
    }

    pub fn gammas(&self) -> Result<Vec<f64>> {
        Ok(self.gamma_mesh.build()?.values().to_vec())
    }

    pub fn worker_count(&self) -> usize {
        self.parallelism
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// Quadrature settings of one task, honouring overrides.
    pub fn quad_cfg_for(&self, gamma: f64) -> QuadratureConfig {
        self.overrides
            .get(&gamma_label(gamma))
            .map_or(self.quad_cfg, |o| o.quad_cfg)
    }

    pub fn task_inputs(&self, gamma: f64) -> Result<TaskInputs> {
        Ok(TaskInputs {
            params: KernelParams::new(gamma)?,
            t_mesh: self.t_mesh.build()?,
            s_mesh: self.s_mesh.build()?,
            quad_cfg: self.quad_cfg_for(gamma),
            weighting: self.time_weighting,
        })
    }

    /// The spec without machine-specific fields, as stored beside the results.
    pub fn canonical_toml(&self) -> String {
        let canonical = SweepSpec {
            output_dir: PathBuf::from("."),
            parallelism: None,
            ..self.clone()
        };
        toml::to_string(&canonical).expect("spec serializes")
    }

    /// Text that fully determines a task's outputs.
    fn task_fingerprint(&self, gamma: f64) -> String {
        let cfg = self.quad_cfg_for(gamma);
        format!(
            "levy-automodel {}\ngamma={}\nt_mesh=log({},{},{})\ns_mesh=log({},{},{})\n\
             quad_cfg rel_tol={} abs_tol={} max_cells={} max_panel_depth={}\ntime_weighting={:?}\n",
            env!("CARGO_PKG_VERSION"),
            fmt17(gamma),
            fmt17(self.t_mesh.lo),
            fmt17(self.t_mesh.hi),
            self.t_mesh.points_per_decade,
            fmt17(self.s_mesh.lo),
            fmt17(self.s_mesh.hi),
            self.s_mesh.points_per_decade,
            fmt17(cfg.rel_tol),
            fmt17(cfg.abs_tol),
            cfg.max_cells,
            cfg.max_panel_depth,
            self.time_weighting,
        )
    }

    pub fn task_checksum(&self, gamma: f64) -> String {
        hex::encode(Sha256::digest(self.task_fingerprint(gamma).as_bytes()))
    }

    pub fn checksum(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        for g in self.gammas()? {
            hasher.update(self.task_fingerprint(g).as_bytes());
        }
        Ok(hex::encode(hasher.finalize()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskStatus {
    Pending,
    Done,
    Failed,
}

impl fmt::Display for TaskStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskStatus::Pending => "PENDING",
            TaskStatus::Done => "DONE",
            TaskStatus::Failed => "FAILED",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub gamma: f64,
    pub status: TaskStatus,
    pub dir: PathBuf,
    pub checksum: String,
    /// Seconds spent in this run; `None` for tasks not executed.
    pub wall_time: Option<f64>,
    pub diagnostic: Option<String>,
}

impl TaskResult {
    pub fn label(&self) -> String {
        gamma_label(self.gamma)
    }

    pub fn artifacts(&self) -> TaskArtifacts {
        TaskArtifacts::in_dir(&self.dir)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub spec_checksum: String,
    pub tasks: Vec<TaskResult>,
}

impl Plan {
    pub fn count(&self, status: TaskStatus) -> usize {
        self.tasks.iter().filter(|t| t.status == status).count()
    }

    /// Keeps only the task with the given two-decimal label.
    pub fn restrict_to(&mut self, gamma: f64) -> Result<()> {
        let label = gamma_label(gamma);
        self.tasks.retain(|t| t.label() == label);
        if self.tasks.is_empty() {
            return Err(Error::Config(format!("gamma {label} is not in the sweep mesh")));
        }
        Ok(())
    }
}

/// Status marker content: `DONE <checksum>` or `FAILED <checksum>` plus diagnostics.
fn read_status(dir: &Path) -> Option<(TaskStatus, String, Option<String>)> {
    let text = fs::read_to_string(dir.join(STATUS_FILE)).ok()?;
    let mut lines = text.lines();
    let (word, checksum) = lines.next()?.split_once(' ')?;
    let status = match word {
        "DONE" => TaskStatus::Done,
        "FAILED" => TaskStatus::Failed,
        _ => return None,
    };
    let rest: Vec<&str> = lines.collect();
    let diagnostic = (!rest.is_empty()).then(|| rest.join("\n"));
    Some((status, checksum.to_string(), diagnostic))
}

/// One task per `gamma`, ascending. Tasks whose directory holds a DONE
/// marker with the current checksum and complete artifacts stay DONE;
/// everything else, including earlier failures, is PENDING.
pub fn plan(spec: &SweepSpec) -> Result<Plan> {
    spec.validate()?;
    let tasks = spec
        .gammas()?
        .into_iter()
        .map(|gamma| {
            let dir = spec.output_dir.join(task_dir_name(gamma));
            let checksum = spec.task_checksum(gamma);
            let done = matches!(
                read_status(&dir),
                Some((TaskStatus::Done, ref c, _)) if *c == checksum
            ) && TaskArtifacts::in_dir(&dir).first_missing().is_none()
                && crate::automodel::GCurve::from_text(
                    &fs::read_to_string(dir.join(G_CURVE_FILE)).unwrap_or_default(),
                    &dir,
                )
                .is_ok();
            TaskResult {
                gamma,
                status: if done { TaskStatus::Done } else { TaskStatus::Pending },
                dir,
                checksum,
                wall_time: None,
                diagnostic: None,
            }
        })
        .collect();
    Ok(Plan {
        spec_checksum: spec.checksum()?,
        tasks,
    })
}

/// Hooks into a running sweep.
#[derive(Default)]
pub struct RunControl<'a> {
    /// Once set, tasks stop between nodes and stay PENDING.
    pub cancel: Option<&'a AtomicBool>,
    /// Called after each executed task settles.
    pub on_task: Option<&'a (dyn Fn(&TaskResult) + Sync)>,
}

/// Executes every PENDING task of `plan` on a pool of `spec.worker_count()`
/// threads. Failures are recorded per task and never abort siblings.
pub fn run(spec: &SweepSpec, plan: &Plan, control: &RunControl<'_>) -> Result<Plan> {
    let expected = spec.checksum()?;
    if plan.spec_checksum != expected {
        return Err(Error::StalePlan {
            expected,
            found: plan.spec_checksum.clone(),
        });
    }
    let out = &spec.output_dir;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_atomic(&out.join(SPEC_FILE), spec.canonical_toml().as_bytes())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.worker_count())
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let cancelled = || control.cancel.is_some_and(|c| c.load(Ordering::Relaxed));

    let tasks: Vec<Result<TaskResult>> = pool.install(|| {
        plan.tasks
            .par_iter()
            .map(|task| {
                if task.status != TaskStatus::Pending {
                    return Ok(task.clone());
                }
                let result = execute(spec, task, &cancelled)?;
                if result.status != TaskStatus::Pending {
                    if let Some(hook) = control.on_task {
                        hook(&result);
                    }
                }
                Ok(result)
            })
            .collect()
    });
    Ok(Plan {
        spec_checksum: plan.spec_checksum.clone(),
        tasks: tasks.into_iter().collect::<Result<_>>()?,
    })
}

/// Runs one task. Numerical failures become a FAILED marker; only I/O on
/// the task directory is returned as an error.
fn execute(
    spec: &SweepSpec,
    task: &TaskResult,
    cancelled: &(dyn Fn() -> bool + Sync),
) -> Result<TaskResult> {
    let dir = &task.dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    remove_partials(dir)?;
    match fs::remove_file(dir.join(STATUS_FILE)) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
        Err(e) => return Err(Error::io(dir.join(STATUS_FILE), e)),
    }
    let start = Instant::now();
    let outcome = spec
        .task_inputs(task.gamma)
        .and_then(|inputs| task::run_pipeline_cancellable(&inputs, cancelled));
    let wall_time = start.elapsed().as_secs_f64();
    let mut result = TaskResult {
        wall_time: Some(wall_time),
        ..task.clone()
    };
    match outcome {
        Ok(output) => {
            output.write_artifacts(dir)?;
            write_atomic(
                &dir.join(STATUS_FILE),
                format!("DONE {}\n", task.checksum).as_bytes(),
            )?;
            result.status = TaskStatus::Done;
        }
        Err(Error::Cancelled) => {
            result.status = TaskStatus::Pending;
            result.wall_time = None;
            return Ok(result);
        }
        Err(e) if e.is_io() => return Err(e),
        Err(e) => {
            let diagnostic = e.to_string();
            write_atomic(
                &dir.join(STATUS_FILE),
                format!("FAILED {}\n{diagnostic}\n", task.checksum).as_bytes(),
            )?;
            result.status = TaskStatus::Failed;
            result.diagnostic = Some(diagnostic);
        }
    }
    write_atomic(
        &dir.join(TIMING_FILE),
        format!("wall_time_seconds={wall_time:.3}\n").as_bytes(),
    )?;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DESK: &str = r#"
output_dir = "out"
parallelism = 2

[gamma_mesh]
lo = 0.5
hi = 1.5
step = 0.5

[t_mesh]
lo = 30.0
hi = 1e6
points_per_decade = 100

[s_mesh]
lo = 0.01
hi = 1000.0
points_per_decade = 25
"#;

    #[test]
    fn parses_and_resolves_output_dir() {
        let spec = SweepSpec::from_toml(DESK, Path::new("/tmp/x")).unwrap();
        assert_eq!(spec.output_dir, Path::new("/tmp/x/out"));
        assert_eq!(spec.gammas().unwrap(), vec![0.5, 1.0, 1.5]);
        assert_eq!(spec.quad_cfg, QuadratureConfig::outer());
        assert_eq!(spec.time_weighting, TimeWeighting::Linear);
        assert_eq!(spec.worker_count(), 2);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let unknown = format!("{DESK}\ncolour = 3\n");
        assert!(SweepSpec::from_toml(&unknown, Path::new(".")).is_err());
        let nested = DESK.replace("step = 0.5", "step = 0.5\nwidth = 1");
        assert!(SweepSpec::from_toml(&nested, Path::new(".")).is_err());
        let zero = DESK.replace("parallelism = 2", "parallelism = 0");
        assert!(SweepSpec::from_toml(&zero, Path::new(".")).is_err());
        let early = DESK.replace("lo = 30.0", "lo = 0.5");
        assert!(SweepSpec::from_toml(&early, Path::new(".")).is_err());
        let stray = format!(
            "{DESK}\n[overrides.\"0.70\".quad_cfg]\nrel_tol = 1e-8\nabs_tol = 1e-250\nmax_cells = 8\nmax_panel_depth = 100\n"
        );
        assert!(SweepSpec::from_toml(&stray, Path::new(".")).is_err());
    }

    #[test]
    fn checksum_ignores_machine_fields() {
        let a = SweepSpec::from_toml(DESK, Path::new("/a")).unwrap();
        let b = SweepSpec::from_toml(&DESK.replace("parallelism = 2", "parallelism = 8"), Path::new("/b"))
            .unwrap();
        assert_eq!(a.checksum().unwrap(), b.checksum().unwrap());
        assert_eq!(a.canonical_toml(), b.canonical_toml());
        let c = SweepSpec::from_toml(&DESK.replace("points_per_decade = 25", "points_per_decade = 26"), Path::new("/a"))
            .unwrap();
        assert_ne!(a.checksum().unwrap(), c.checksum().unwrap());
        assert_ne!(a.task_checksum(0.5), a.task_checksum(1.0));
        let back = SweepSpec::from_toml(&a.canonical_toml(), Path::new("/a")).unwrap();
        assert_eq!(back.checksum().unwrap(), a.checksum().unwrap());
    }

    #[test]
    fn plan_is_ascending_and_pending() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec::from_toml(DESK, dir.path()).unwrap();
        let p = plan(&spec).unwrap();
        assert_eq!(p.tasks.len(), 3);
        assert_eq!(p.count(TaskStatus::Pending), 3);
        assert!(p.tasks.windows(2).all(|w| w[0].gamma < w[1].gamma));
        assert_eq!(p.tasks[0].dir, spec.output_dir.join("gamma_0.50"));
        assert_eq!(plan(&spec).unwrap(), p);
    }

    #[test]
    fn fine_gamma_mesh_has_101_tasks() {
        let fine = DESK.replace("step = 0.5", "step = 0.01");
        let spec = SweepSpec::from_toml(&fine, Path::new("/nonexistent")).unwrap();
        assert_eq!(plan(&spec).unwrap().tasks.len(), 101);
        let single = DESK.replace("lo = 0.5\nhi = 1.5", "lo = 1.0\nhi = 1.0");
        let spec = SweepSpec::from_toml(&single, Path::new("/nonexistent")).unwrap();
        assert_eq!(plan(&spec).unwrap().tasks.len(), 1);
    }

    #[test]
    fn stale_plan_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec::from_toml(DESK, dir.path()).unwrap();
        let mut p = plan(&spec).unwrap();
        p.spec_checksum = "0".repeat(64);
        assert!(matches!(
            run(&spec, &p, &RunControl::default()),
            Err(Error::StalePlan { .. })
        ));
    }

    #[test]
    fn atomic_write_leaves_no_partials() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        fs::write(dir.path().join(".partial-abc"), b"x").unwrap();
        remove_partials(dir.path()).unwrap();
        let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names, vec![std::ffi::OsString::from("a.txt")]);
    }
}
