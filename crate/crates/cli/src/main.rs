//! `automodel`: single-point solves, one-exponent pipelines, sweeps and
//! figure-data export.
//!
//! Exit status: 0 success, 1 usage or configuration error, 2 numerical
//! failure (including any failed sweep task), 3 I/O failure.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use levy_automodel::accuracy::BOUNDARY_COLUMNS;
use levy_automodel::exact::{delta_weight, green_regular};
use levy_automodel::kernel::{GTable, KernelParams};
use levy_automodel::meshes::log_mesh;
use levy_automodel::numfmt::fmt17;
use levy_automodel::quadrature::QuadratureConfig;
use levy_automodel::reconstruct::TimeWeighting;
use levy_automodel::sweep::{
    aggregate, export_fig2, export_fig345, plan, run, run_pipeline, RunControl, SweepSpec,
    TaskInputs, TaskResult, TaskStatus,
};
use levy_automodel::Error;

#[derive(Parser)]
#[command(name = "automodel", version, about = "Levy-flight Green's functions and their automodel approximation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Regular part of the exact Green's function and the weight of its delta term.
    Solve {
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        t: f64,
        #[arg(long)]
        x: f64,
        /// Relative tolerance of the outer inversion integral.
        #[arg(long)]
        rel_tol: Option<f64>,
    },
    /// Characteristic exponent table `p, G(p), 1 - G(p)`.
    Gtable {
        #[arg(long)]
        gamma: f64,
        /// Largest time the table must serve.
        #[arg(long, default_value_t = 1e6)]
        t_max: f64,
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs the pipeline for one exponent and writes its artifacts.
    Reconstruct {
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Directory for the artifacts.
        #[arg(long)]
        out: PathBuf,
    },
    /// Prints the accuracy boundary row for one exponent.
    Boundary {
        #[arg(long)]
        gamma: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Runs or resumes a sweep, then aggregates its results.
    Sweep {
        /// Sweep specification (TOML).
        #[arg(long)]
        spec: PathBuf,
        /// Worker threads; overrides the spec.
        #[arg(long)]
        parallelism: Option<usize>,
        /// Run only the task of this exponent.
        #[arg(long)]
        only_gamma: Option<f64>,
    },
    /// Writes `fig2.csv` from an aggregated sweep.
    #[command(name = "export-fig2")]
    ExportFig2 {
        /// Sweep output directory.
        #[arg(long)]
        dir: PathBuf,
        /// Destination directory.
        #[arg(long)]
        dest: PathBuf,
    },
    /// Writes the per-exponent panel tables `fig_{a,b,c}_gamma_<g>.csv`.
    #[command(name = "export-fig345")]
    ExportFig345 {
        /// Sweep output directory.
        #[arg(long)]
        dir: PathBuf,
        /// Destination directory.
        #[arg(long)]
        dest: PathBuf,
        /// Exponents to export, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 30.0)]
    t_lo: f64,
    #[arg(long, default_value_t = 1e6)]
    t_hi: f64,
    #[arg(long, default_value_t = 100)]
    t_ppd: u32,
    #[arg(long, default_value_t = 0.01)]
    s_lo: f64,
    #[arg(long, default_value_t = 1000.0)]
    s_hi: f64,
    #[arg(long, default_value_t = 25)]
    s_ppd: u32,
    #[arg(long, value_enum, default_value_t = Weighting::Linear)]
    weighting: Weighting,
    /// Relative tolerance of the outer inversion integral.
    #[arg(long)]
    rel_tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Weighting {
    Linear,
    Logarithmic,
}

enum Failure {
    Usage(String),
    Numeric(Error),
    Io(Error),
    FailedTasks(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => Failure::Usage(msg),
            e if e.is_io() => Failure::Io(e),
            e => Failure::Numeric(e),
        }
    }
}

fn outer_cfg(rel_tol: Option<f64>) -> QuadratureConfig {
    let cfg = QuadratureConfig::outer();
    rel_tol.map_or(cfg, |r| cfg.with_rel_tol(r))
}

impl GridArgs {
    fn inputs(&self, gamma: f64) -> Result<TaskInputs, Failure> {
        let quad_cfg = outer_cfg(self.rel_tol);
        quad_cfg
            .validate()
            .map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(TaskInputs {
            params: KernelParams::new(gamma)?,
            t_mesh: log_mesh(self.t_lo, self.t_hi, self.t_ppd).map_err(Error::from)?,
            s_mesh: log_mesh(self.s_lo, self.s_hi, self.s_ppd).map_err(Error::from)?,
            quad_cfg,
            weighting: match self.weighting {
                Weighting::Linear => TimeWeighting::Linear,
                Weighting::Logarithmic => TimeWeighting::Logarithmic,
            },
        })
    }
}

fn print(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|()| out.flush())
        .map_err(|e| Failure::Io(Error::Io { path: "<stdout>".into(), source: e }))
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Solve { gamma, t, x, rel_tol } => {
            let params = KernelParams::new(gamma)?;
            let cfg = outer_cfg(rel_tol);
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let f = green_regular(params, x, t, &cfg)?;
            print(&format!(
                "gamma,t,x,f_reg,delta_weight\n{},{},{},{},{}\n",
                fmt17(gamma),
                fmt17(t),
                fmt17(x),
                fmt17(f),
                fmt17(delta_weight(t))
            ))
        }
        Command::Gtable { gamma, t_max, out } => {
            let table = GTable::for_times(KernelParams::new(gamma)?, t_max, &QuadratureConfig::inner())?;
            match out {
                Some(path) => Ok(levy_automodel::sweep::write_atomic(&path, table.to_text().as_bytes())?),
                None => print(&table.to_text()),
            }
        }
        Command::Reconstruct { gamma, grid, out } => {
            let output = run_pipeline(&grid.inputs(gamma)?)?;
            output.write_artifacts(&out)?;
            print(&format!(
                "{BOUNDARY_COLUMNS},alpha_fit\n{},{}\n",
                output.report.boundary_row(),
                fmt17(output.curve.alpha())
            ))
        }
        Command::Boundary { gamma, grid } => {
            let output = run_pipeline(&grid.inputs(gamma)?)?;
            print(&output.accuracy_table())
        }
        Command::Sweep { spec, parallelism, only_gamma } => sweep(spec, parallelism, only_gamma),
        Command::ExportFig2 { dir, dest } => {
            let path = export_fig2(&dir, &dest)?;
            print(&format!("{}\n", path.display()))
        }
        Command::ExportFig345 { dir, dest, gamma } => {
            let paths = export_fig345(&dir, &dest, &gamma)?;
            let listing: String = paths.iter().map(|p| format!("{}\n", p.display())).collect();
            print(&listing)
        }
    }
}

fn sweep(spec_path: PathBuf, parallelism: Option<usize>, only_gamma: Option<f64>) -> Result<(), Failure> {
    let mut spec = SweepSpec::load(&spec_path)?;
    if parallelism.is_some() {
        spec.parallelism = parallelism;
        spec.validate()?;
    }
    let mut todo = plan(&spec)?;
    if let Some(gamma) = only_gamma {
        todo.restrict_to(gamma)?;
    }
    eprintln!(
        "plan: {} tasks, {} done, {} pending",
        todo.tasks.len(),
        todo.count(TaskStatus::Done),
        todo.count(TaskStatus::Pending)
    );
    let log = |task: &TaskResult| {
        let secs = task.wall_time.map_or(String::new(), |w| format!(" {:.2}s", w));
        match &task.diagnostic {
            Some(d) => eprintln!("gamma={} {}{secs}: {d}", task.label(), task.status),
            None => eprintln!("gamma={} {}{secs}", task.label(), task.status),
        }
    };
    let control = RunControl {
        cancel: None,
        on_task: Some(&log),
    };
    let finished = run(&spec, &todo, &control)?;
    let summary = aggregate(&spec.output_dir)?;
    print(&format!(
        "done={} failed={} pending={}\n{}\n",
        summary.done.len(),
        summary.failed.len(),
        summary.pending.len(),
        summary.manifest.display()
    ))?;
    match finished.count(TaskStatus::Failed) {
        0 => Ok(()),
        n => Err(Failure::FailedTasks(n)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Io(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
        Err(Failure::FailedTasks(n)) => {
            eprintln!("error: {n} of the sweep tasks failed");
            ExitCode::from(2)
        }
    }
}
