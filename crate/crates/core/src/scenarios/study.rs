//! Convergence studies: free-space Poisson, disk Laplace and energy drift.

use super::config::{Scenario, ScenarioConfig, ShapeSpec, SolverKind};
use super::init::uniform_points;
use super::output::write_csv;
use super::run::Simulation;
use crate::dirichlet::{DiskBoundary, HarmonicField};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{FieldSolver, PotentialKind};
use crate::special::{e1_regular_part, EULER_GAMMA};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonRow {
    pub solver: SolverKind,
    pub modes: usize,
    pub rms_error: f64,
    pub max_error: f64,
    /// RMS of the exact potential, for scale.
    pub rms_potential: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub nodes: usize,
    pub max_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyRow {
    pub solver: SolverKind,
    pub dt: f64,
    pub steps: usize,
    pub max_error: f64,
    pub max_relative_error: f64,
}

/// Potential of a unit-charge 2D Gaussian of width `sigma` at distance `r`:
/// `-(1/4pi) (E1(r^2/2sigma^2) + ln r^2)`, finite at `r = 0`.
pub fn gaussian_potential(sigma: f64, r: f64) -> f64 {
    let u = r * r / (2.0 * sigma * sigma);
    // E1(u) + ln r^2 = reg(u) - gamma + ln(2 sigma^2)
    let s = e1_regular_part(u) - EULER_GAMMA + (2.0 * sigma * sigma).ln();
    -s / (4.0 * PI)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(_, &y)| y > 0.0).map(|(&x, &y)| (x.ln(), y.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn gaussian_sigma(config: &ScenarioConfig) -> Result<f64> {
    match config.field.shape {
        ShapeSpec::Gaussian { sigma, .. } => Ok(sigma),
        _ => Err(Error::InvalidConfig("the Poisson study needs a gaussian shape".into())),
    }
}

/// Particle potential error on the `refine x refine` box grid for every
/// solver and mode count in the study settings.
pub fn poisson_study(config: &ScenarioConfig, exec: Execution) -> Result<Vec<PoissonRow>> {
    let s = &config.study;
    poisson_sweep(config, &s.solvers, &s.modes, exec)
}

pub fn poisson_sweep(config: &ScenarioConfig, solvers: &[SolverKind], modes: &[usize], exec: Execution) -> Result<Vec<PoissonRow>> {
    let sigma = gaussian_sigma(config)?;
    let points = uniform_points(config.particles.count, config.seed);
    let q = config.particles.charge();
    let n = config.study.refine;
    let exact = exec.map_range(n * n, |i| {
        let x = [-0.5 + (i / n) as f64 / n as f64, -0.5 + (i % n) as f64 / n as f64];
        points.iter().map(|p| q * gaussian_potential(sigma, (x[0] - p[0]).hypot(x[1] - p[1]))).sum::<f64>()
    });
    let rms_potential = (exact.iter().map(|v| v * v).sum::<f64>() / exact.len() as f64).sqrt();
    let mut rows = Vec::new();
    for &solver in solvers {
        for &m in modes {
            let mut c = config.clone();
            c.field.modes = m;
            let fs = FieldSolver::new(c.field_config(solver)?, exec)?;
            let dens = fs.deposit(&points)?;
            let phi = fs.fourier_interpolate(&fs.potential_modes(&dens, q, PotentialKind::Raw), n)?;
            let (mut sq, mut mx) = (0.0f64, 0.0f64);
            for (a, b) in phi.iter().zip(&exact) {
                sq += (a - b).powi(2);
                mx = mx.max((a - b).abs());
            }
            rows.push(PoissonRow {
                solver,
                modes: m,
                rms_error: (sq / exact.len() as f64).sqrt(),
                max_error: mx,
                rms_potential,
            });
        }
    }
    Ok(rows)
}

/// `u = x^2 - y^2 + 2`, harmonic with the given boundary trace.
pub fn laplace_solution(x: [f64; 2]) -> f64 {
    x[0] * x[0] - x[1] * x[1] + 2.0
}

/// Max error of the boundary-integral extension of [`laplace_solution`]
/// over the evaluation grid points inside the safe disk.
pub fn laplace_study(config: &ScenarioConfig, exec: Execution) -> Result<Vec<LaplaceRow>> {
    laplace_sweep(config, &config.study.boundary_nodes, exec)
}

pub fn laplace_sweep(config: &ScenarioConfig, nodes: &[usize], exec: Execution) -> Result<Vec<LaplaceRow>> {
    let radius = config.boundary.as_ref().map_or(1.0, |b| b.radius);
    let n = config.study.eval_grid;
    if n < 2 {
        return Err(Error::InvalidConfig("study.eval_grid must be at least 2".into()));
    }
    let mut rows = Vec::new();
    for &nb in nodes {
        let disk = DiskBoundary::new(radius, nb)?;
        let safe = disk.safe_radius();
        let targets: Vec<[f64; 2]> = (0..n * n)
            .map(|i| {
                let t = |k: usize| -radius + 2.0 * radius * k as f64 / (n - 1) as f64;
                [t(i / n), t(i % n)]
            })
            .filter(|p| p[0].hypot(p[1]) <= safe)
            .collect();
        let data = disk.sample(laplace_solution);
        let (u, _) = HarmonicField::new(disk, data)?.evaluate(&targets, exec)?;
        let max_error = u.iter().zip(&targets).map(|(v, p)| (v - laplace_solution(*p)).abs()).fold(0.0, f64::max);
        rows.push(LaplaceRow { nodes: nb, max_error });
    }
    Ok(rows)
}

/// Energy drift `max_t |E(t) - E(0)|` up to the final time for every solver
/// and time step. Each run's diagnostics go to `dir` when given.
pub fn energy_study(config: &ScenarioConfig, exec: Execution, dir: Option<&Path>) -> Result<Vec<EnergyRow>> {
    if !matches!(config.scenario, Scenario::BeamFreeSpace | Scenario::BeamDirichlet) {
        return Err(Error::InvalidConfig("the energy study needs a beam scenario".into()));
    }
    let s = &config.study;
    let mut rows = Vec::new();
    for &solver in &s.solvers {
        for &dt in &s.dts {
            let mut c = config.clone();
            c.field.solver = solver;
            c.time.dt = dt;
            c.time.steps = (s.final_time / dt).round() as usize + 1;
            c.time.diagnostic_every = 1;
            c.output.snapshot_every = 0;
            let out = Simulation::new(c, exec)?.run()?;
            if let Some(d) = dir {
                std::fs::create_dir_all(d)?;
                write_csv(&d.join(format!("energy_{}_dt{dt:e}.csv", solver_name(solver))), &out.rows)?;
            }
            rows.push(EnergyRow {
                solver,
                dt,
                steps: out.rows.len(),
                max_error: out.energy_error(),
                max_relative_error: out.relative_energy_error(),
            });
        }
    }
    Ok(rows)
}

pub fn solver_name(s: SolverKind) -> &'static str {
    match s {
        SolverKind::Direct => "direct",
        SolverKind::Precomputed => "precomputed",
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::integrate;

    #[test]
    fn gaussian_potential_matches_radial_quadrature() {
        // the angular mean of -ln|x - y|/(2 pi) over |y| = s is -ln max(r, s)/(2 pi)
        let sigma = 0.01;
        let rho = |s: f64| (-s * s / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma);
        for r in [0.0f64, 0.003, 0.01, 0.025, 0.2] {
            // split at the kink s = r; s = t^2 smooths the s ln s endpoint
            let inner = if r > 0.0 { -r.ln() * integrate(|s| s * rho(s), 0.0, r, 50, 12) } else { 0.0 };
            let outer = integrate(
                |t: f64| {
                    let s = t * t;
                    -2.0 * t * s * rho(s) * s.ln()
                },
                r.sqrt(),
                (20.0 * sigma).sqrt(),
                400,
                12,
            );
            let q = inner + outer;
            let phi = gaussian_potential(sigma, r);
            assert!((q - phi).abs() < 1e-12 * phi.abs().max(1.0), "r={r} {q} {phi}");
        }
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-2.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn small_studies_behave() {
        let c = ScenarioConfig::from_toml(
            r#"
scenario = "poisson_manufactured"
seed = 3
[particles]
count = 5
total_charge = 5.0
[field]
modes = 16
truncation = 1.75
shape = { kind = "gaussian", sigma = 0.03, radius = 0.15 }
[time]
dt = 1e-3
steps = 0
[study]
refine = 32
"#,
        )
        .unwrap();
        let rows = poisson_sweep(&c, &[SolverKind::Direct], &[16, 32], Execution::Parallel).unwrap();
        assert!(rows[1].rms_error < 0.1 * rows[0].rms_error, "{rows:?}");
        assert!(rows[1].rms_error < 1e-4 * rows[1].rms_potential, "{rows:?}");

        let rows = laplace_sweep(&c, &[16, 256], Execution::Parallel).unwrap();
        assert!(rows[1].max_error < 1e-10 && rows[0].max_error > 1e-6, "{rows:?}");
    }
}
