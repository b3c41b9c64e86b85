use clap::{Parser, Subcommand, ValueEnum};
use fspif::exec::{with_threads, Execution};
use fspif::scenarios::config::{Method, Scenario, SolverKind};
use fspif::scenarios::study::{self, loglog_slope, solver_name};
use fspif::scenarios::{output::write_csv, ScenarioConfig, Simulation};
use fspif::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fspif", version, about = "Free-space particle-in-Fourier beam simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Output directory.
    #[arg(long, env = "FSPIF_OUT_DIR")]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially, 0 uses every core.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario a configuration file describes.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Precomputed kernels (on) or direct convolution (off).
        #[arg(long, value_enum)]
        precompute: Option<Switch>,
    },
    /// Run a convergence study.
    Study {
        #[arg(value_enum)]
        kind: StudyKind,
        config: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pif,
    Pic,
}

#[derive(Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum StudyKind {
    Poisson,
    Laplace,
    Energy,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", &e.to_string()),
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message.trim() });
    eprintln!("{line}");
    ExitCode::FAILURE
}

fn out_dir(common: &Common, config: &ScenarioConfig) -> PathBuf {
    common.out.clone().or_else(|| config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

fn execution(threads: usize) -> Execution {
    if threads == 1 || !cfg!(feature = "parallel") {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            common,
            seed,
            method,
            precompute,
        } => {
            let mut c = ScenarioConfig::load(&config)?;
            if let Some(s) = seed {
                c.seed = s;
            }
            if let Some(m) = method {
                c.field.method = match m {
                    MethodArg::Pif => Method::Pif,
                    MethodArg::Pic => Method::Pic,
                };
            }
            if let Some(p) = precompute {
                c.field.solver = match p {
                    Switch::On => SolverKind::Precomputed,
                    Switch::Off => SolverKind::Direct,
                };
            }
            c.validate()?;
            let dir = out_dir(&common, &c);
            let exec = execution(common.threads);
            with_threads(common.threads, || run(&c, &dir, exec))
        }
        Command::Study { kind, config, common } => {
            let c = ScenarioConfig::load(&config)?;
            let dir = out_dir(&common, &c);
            let exec = execution(common.threads);
            with_threads(common.threads, || study(kind, &c, &dir, exec))
        }
    }
}

fn save_config(c: &ScenarioConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), c.to_toml())?;
    Ok(())
}

fn run(c: &ScenarioConfig, dir: &Path, exec: Execution) -> Result<()> {
    save_config(c, dir)?;
    match c.scenario {
        Scenario::BeamFreeSpace | Scenario::BeamDirichlet => {
            let out = Simulation::new(c.clone(), exec)?.run()?;
            out.write(dir)?;
            let last = out.rows.last();
            println!(
                "steps={} energy_drift={:.3e} relative_energy_drift={:.3e} anisotropy={:.4} out={}",
                c.time.steps,
                out.energy_error(),
                out.relative_energy_error(),
                last.map_or(f64::NAN, |r| r.anisotropy),
                dir.display()
            );
        }
        Scenario::PoissonManufactured => {
            let rows = study::poisson_sweep(c, &[c.field.solver], &[c.field.modes], exec)?;
            write_csv(&dir.join("poisson.csv"), &rows)?;
            for r in &rows {
                println!("solver={} modes={} rms_error={:.3e} max_error={:.3e}", solver_name(r.solver), r.modes, r.rms_error, r.max_error);
            }
        }
        Scenario::LaplaceManufactured => {
            let nodes = c.boundary.as_ref().map_or(128, |b| b.nodes);
            let rows = study::laplace_sweep(c, &[nodes], exec)?;
            write_csv(&dir.join("laplace.csv"), &rows)?;
            for r in &rows {
                println!("nodes={} max_error={:.3e}", r.nodes, r.max_error);
            }
        }
    }
    Ok(())
}

fn study(kind: StudyKind, c: &ScenarioConfig, dir: &Path, exec: Execution) -> Result<()> {
    save_config(c, dir)?;
    match kind {
        StudyKind::Poisson => {
            let rows = study::poisson_study(c, exec)?;
            write_csv(&dir.join("poisson_convergence.csv"), &rows)?;
            for r in &rows {
                println!("solver={} modes={} rms_error={:.3e} max_error={:.3e}", solver_name(r.solver), r.modes, r.rms_error, r.max_error);
            }
            for s in &c.study.solvers {
                let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.solver == *s).map(|r| (r.modes as f64, r.rms_error)).unzip();
                println!("solver={} slope={:.3}", solver_name(*s), loglog_slope(&x, &y));
            }
        }
        StudyKind::Laplace => {
            let rows = study::laplace_study(c, exec)?;
            write_csv(&dir.join("laplace_convergence.csv"), &rows)?;
            for r in &rows {
                println!("nodes={} max_error={:.3e}", r.nodes, r.max_error);
            }
        }
        StudyKind::Energy => {
            if !matches!(c.scenario, Scenario::BeamFreeSpace | Scenario::BeamDirichlet) {
                return Err(Error::InvalidConfig("the energy study needs a beam scenario".into()));
            }
            let rows = study::energy_study(c, exec, Some(dir))?;
            write_csv(&dir.join("energy_convergence.csv"), &rows)?;
            for r in &rows {
                println!("solver={} dt={:e} max_error={:.3e} relative={:.3e}", solver_name(r.solver), r.dt, r.max_error, r.max_relative_error);
            }
            for s in &c.study.solvers {
                let (x, y): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.solver == *s).map(|r| (r.dt, r.max_error)).unzip();
                println!("solver={} slope={:.3}", solver_name(*s), loglog_slope(&x, &y));
            }
        }
    }
    Ok(())
}
