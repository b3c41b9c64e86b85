//! The time loop: deposit, solve, optional boundary correction, push,
//! diagnose.

use super::config::{BoundaryData, EscapePolicy, Method, Scenario, ScenarioConfig, SolverKind};
use super::init::init_beam;
use super::output::{write_csv, DiagnosticRow, Snapshot};
use crate::dirichlet::{compose_dirichlet, DiskBoundary};
use crate::dynamics::{kinetic_energy, momentum, ParticleEnsemble, Pusher};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{FieldSolver, PotentialKind};
use crate::greens::PrecomputedKernels;
use crate::nufft::ModeGrid;
use crate::pic::PicSolver;
use num_complex::Complex64;
use std::path::Path;

/// Field solver behind the pusher.
#[derive(Debug)]
pub enum Backend {
    Pif(FieldSolver),
    Pic(PicSolver),
}

impl Backend {
    pub fn build(config: &ScenarioConfig, exec: Execution) -> Result<Self> {
        match config.field.method {
            Method::Pic => Ok(Backend::Pic(PicSolver::new(config.field.modes, config.green()?, exec)?)),
            Method::Pif => {
                let fc = config.field_config(config.field.solver)?;
                if config.field.solver == SolverKind::Direct {
                    return Ok(Backend::Pif(FieldSolver::new(fc, exec)?));
                }
                let kernels = match &config.field.kernel_cache {
                    Some(path) => cached_kernels(path, config, exec)?,
                    None => build_kernels(config, exec)?,
                };
                Ok(Backend::Pif(FieldSolver::with_kernels(fc, &kernels, exec)?))
            }
        }
    }
}

fn build_kernels(config: &ScenarioConfig, exec: Execution) -> Result<PrecomputedKernels> {
    let fine = ModeGrid::new(config.field.modes, 4)?;
    PrecomputedKernels::new(fine, Some(config.shape()?), config.green()?, exec)
}

/// Load matching kernels from `path`, or build and store them.
fn cached_kernels(path: &Path, config: &ScenarioConfig, exec: Execution) -> Result<PrecomputedKernels> {
    if path.exists() {
        match PrecomputedKernels::load(path, config.field.modes, Some(config.shape()?), config.green()?, exec) {
            Ok(k) => return Ok(k),
            Err(Error::KernelCache(why)) => eprintln!("warning: rebuilding kernel cache {}: {why}", path.display()),
            Err(e) => return Err(e),
        }
    }
    let k = build_kernels(config, exec)?;
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    k.save(path)?;
    Ok(k)
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<DiagnosticRow>,
    pub snapshots: Vec<Snapshot>,
    pub ensemble: ParticleEnsemble,
}

impl RunOutput {
    /// `max_t |E(t) - E(0)|` over the recorded rows.
    pub fn energy_error(&self) -> f64 {
        let e0 = self.rows.first().map_or(0.0, |r| r.total);
        self.rows.iter().map(|r| (r.total - e0).abs()).fold(0.0, f64::max)
    }

    /// [`energy_error`](Self::energy_error) over `|E(0)|`.
    pub fn relative_energy_error(&self) -> f64 {
        let e0 = self.rows.first().map_or(1.0, |r| r.total.abs());
        self.energy_error() / e0
    }

    /// `diagnostics.csv` plus `snapshots/step_NNNNNN.{bin,csv}`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv(&dir.join("diagnostics.csv"), &self.rows)?;
        if !self.snapshots.is_empty() {
            let sd = dir.join("snapshots");
            std::fs::create_dir_all(&sd)?;
            for s in &self.snapshots {
                s.save(&sd.join(format!("step_{:06}.bin", s.step)))?;
                s.save_csv(&sd.join(format!("step_{:06}.csv", s.step)))?;
            }
        }
        Ok(())
    }
}

struct Boundary {
    disk: DiskBoundary,
    data: Vec<f64>,
}

struct Forces {
    accel: Vec<[f64; 2]>,
    electric: f64,
    harmonic: f64,
    charge_residual: f64,
    support_violations: usize,
    snapshot: Option<Snapshot>,
}

/// A beam simulation that can be advanced one step at a time.
pub struct Simulation {
    config: ScenarioConfig,
    exec: Execution,
    ensemble: ParticleEnsemble,
    pusher: Pusher,
    backend: Backend,
    boundary: Option<Boundary>,
    frozen: Vec<bool>,
    step: usize,
    rows: Vec<DiagnosticRow>,
    snapshots: Vec<Snapshot>,
}

impl Simulation {
    pub fn new(config: ScenarioConfig, exec: Execution) -> Result<Self> {
        let ens = init_beam(&config)?;
        Self::with_ensemble(config, ens, exec)
    }

    pub fn with_ensemble(config: ScenarioConfig, ensemble: ParticleEnsemble, exec: Execution) -> Result<Self> {
        config.validate()?;
        if !matches!(config.scenario, Scenario::BeamFreeSpace | Scenario::BeamDirichlet) {
            return Err(Error::InvalidConfig("time stepping needs a beam scenario".into()));
        }
        let backend = Backend::build(&config, exec)?;
        let boundary = match config.boundary_spec() {
            None => None,
            Some(b) => {
                let disk = DiskBoundary::new(b.radius, b.nodes)?;
                let data = match b.data {
                    BoundaryData::Zero => vec![0.0; b.nodes],
                    BoundaryData::LinearY => disk.sample(|z| z[1]),
                    BoundaryData::Tabulated(v) => v,
                };
                Some(Boundary { disk, data })
            }
        };
        let pusher = Pusher::new(config.time.dt, ensemble.charge_to_mass() * config.time.b_z)?;
        let frozen = vec![false; ensemble.len()];
        let sim = Self {
            config,
            exec,
            ensemble,
            pusher,
            backend,
            boundary,
            frozen,
            step: 0,
            rows: Vec::new(),
            snapshots: Vec::new(),
        };
        if let Some(index) = (0..sim.ensemble.len()).find(|&j| !sim.inside(sim.ensemble.positions[j])) {
            return Err(Error::ParticleEscaped { index, step: 0 });
        }
        Ok(sim)
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ensemble
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn rows(&self) -> &[DiagnosticRow] {
        &self.rows
    }

    /// Region where the fields may be evaluated.
    fn inside(&self, p: [f64; 2]) -> bool {
        if let Some(b) = &self.boundary {
            return p[0].hypot(p[1]) <= b.disk.safe_radius();
        }
        match &self.backend {
            Backend::Pic(s) => s.grid().contains(p),
            Backend::Pif(_) => p[0].abs() <= 0.5 && p[1].abs() <= 0.5,
        }
    }

    fn forces(&self, diagnose: bool, snapshot: bool) -> Result<Forces> {
        let ens = &self.ensemble;
        let (q, m) = (ens.charge, ens.mass);
        let n = ens.len() as f64;
        let mut out = match &self.backend {
            Backend::Pif(solver) => {
                let modes = solver.deposit(&ens.positions)?;
                let charge_residual = solver.total_charge(&modes, q) / (q * n * solver.config().shape.fourier(0.0)) - 1.0;
                let electric = if diagnose { solver.energy(&modes, q) } else { 0.0 };
                let snap = if snapshot { Some(self.pif_snapshot(solver, &modes)?) } else { None };
                match &self.boundary {
                    Some(b) => {
                        let d = compose_dirichlet(solver, &modes, ens, &b.disk, &b.data, self.exec)?;
                        Forces {
                            accel: d.accel,
                            electric,
                            harmonic: d.energy,
                            charge_residual,
                            support_violations: d.support_violations,
                            snapshot: snap,
                        }
                    }
                    None => {
                        let e = solver.electric_field(&modes, q, &ens.positions)?;
                        let qm = q / m;
                        Forces {
                            accel: e.into_iter().map(|[x, y]| [qm * x, qm * y]).collect(),
                            electric,
                            harmonic: 0.0,
                            charge_residual,
                            support_violations: 0,
                            snapshot: snap,
                        }
                    }
                }
            }
            Backend::Pic(solver) => {
                let grid = solver.grid();
                let rho = grid.spread_uniform(&ens.positions, q)?;
                let h2 = grid.spacing() * grid.spacing();
                let charge_residual = rho.iter().sum::<f64>() * h2 / (q * n) - 1.0;
                let field = solver.solve(&rho)?;
                let e = grid.gather([&field.e[0], &field.e[1]], &ens.positions, self.exec)?;
                let qm = q / m;
                let snap = snapshot.then(|| Snapshot {
                    step: self.step,
                    time: self.step as f64 * self.config.time.dt,
                    modes: grid.size(),
                    alpha: 0,
                    origin: grid.node(0),
                    spacing: grid.spacing(),
                    size: grid.size(),
                    values: field.phi.clone(),
                });
                Forces {
                    accel: e.into_iter().map(|[x, y]| [qm * x, qm * y]).collect(),
                    electric: solver.energy(&rho, &field.phi),
                    harmonic: 0.0,
                    charge_residual,
                    support_violations: 0,
                    snapshot: snap,
                }
            }
        };
        for (a, f) in out.accel.iter_mut().zip(&self.frozen) {
            if *f {
                *a = [0.0, 0.0];
            }
        }
        Ok(out)
    }

    /// Free-space potential on the snapshot grid by Fourier interpolation.
    fn pif_snapshot(&self, solver: &FieldSolver, modes: &[Complex64]) -> Result<Snapshot> {
        let size = self.config.output.snapshot_grid;
        let coeffs = solver.potential_modes(modes, self.ensemble.charge, PotentialKind::Raw);
        Ok(Snapshot {
            step: self.step,
            time: self.step as f64 * self.config.time.dt,
            modes: solver.grid().modes_per_dim(),
            alpha: solver.grid().alpha(),
            origin: -0.5,
            spacing: 1.0 / size as f64,
            size,
            values: solver.fourier_interpolate(&coeffs, size)?,
        })
    }

    /// Advance one step, recording diagnostics and snapshots when due.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.step;
        self.advance_inner().map_err(|e| e.at_step(n))
    }

    fn advance_inner(&mut self) -> Result<()> {
        let n = self.step;
        let t = &self.config.time;
        let diagnose = n % t.diagnostic_every == 0 || n + 1 == t.steps;
        let every = self.config.output.snapshot_every;
        let snapshot = every > 0 && n % every == 0;
        let forces = self.forces(diagnose, snapshot)?;
        let moments = diagnose.then(|| second_moments(&self.ensemble.positions));
        let before = self.ensemble.positions.clone();
        let synced = self.pusher.step(&mut self.ensemble, &forces.accel)?;

        for j in 0..self.ensemble.len() {
            if self.frozen[j] || self.inside(self.ensemble.positions[j]) {
                continue;
            }
            match t.escape {
                EscapePolicy::Abort => return Err(Error::ParticleEscaped { index: j, step: n }),
                EscapePolicy::Freeze => {
                    self.frozen[j] = true;
                    self.ensemble.positions[j] = before[j];
                    self.ensemble.velocities[j] = [0.0, 0.0];
                }
            }
        }

        if let Some((c, m)) = moments {
            let mass = self.ensemble.mass;
            let kinetic = kinetic_energy(&synced, mass);
            let p = momentum(&synced, mass);
            self.rows.push(DiagnosticRow {
                step: n,
                time: n as f64 * t.dt,
                kinetic,
                electric: forces.electric,
                harmonic: forces.harmonic,
                total: kinetic + forces.electric + forces.harmonic,
                momentum: p[0].hypot(p[1]),
                charge_residual: forces.charge_residual,
                centroid_x: c[0],
                centroid_y: c[1],
                moment_xx: m[0],
                moment_yy: m[1],
                moment_xy: m[2],
                anisotropy: principal_ratio(m),
                frozen: self.frozen.iter().filter(|&&f| f).count(),
                support_violations: forces.support_violations,
            });
        }
        if let Some(s) = forces.snapshot {
            self.snapshots.push(s);
        }
        self.step += 1;
        Ok(())
    }

    pub fn run(mut self) -> Result<RunOutput> {
        while self.step < self.config.time.steps {
            self.advance()?;
        }
        Ok(RunOutput {
            rows: self.rows,
            snapshots: self.snapshots,
            ensemble: self.ensemble,
        })
    }
}

/// Centroid and central moments `(xx, yy, xy)`.
pub fn second_moments(points: &[[f64; 2]]) -> ([f64; 2], [f64; 3]) {
    let n = points.len().max(1) as f64;
    let c = points.iter().fold([0.0, 0.0], |s, p| [s[0] + p[0], s[1] + p[1]]);
    let c = [c[0] / n, c[1] / n];
    let mut m = [0.0; 3];
    for p in points {
        let (dx, dy) = (p[0] - c[0], p[1] - c[1]);
        m[0] += dx * dx;
        m[1] += dy * dy;
        m[2] += dx * dy;
    }
    (c, [m[0] / n, m[1] / n, m[2] / n])
}

/// Larger over smaller eigenvalue of `[[xx, xy], [xy, yy]]`.
pub fn principal_ratio(m: [f64; 3]) -> f64 {
    let mean = 0.5 * (m[0] + m[1]);
    let r = (0.5 * (m[0] - m[1])).hypot(m[2]);
    if mean - r <= 0.0 {
        return f64::INFINITY;
    }
    (mean + r) / (mean - r)
}

/// Build and run a beam scenario.
pub fn run(config: ScenarioConfig, exec: Execution) -> Result<RunOutput> {
    Simulation::new(config, exec)?.run()
}
