//! Gridless free-space field solve.
//!
//! With `X(k) = sum_j exp(-i k.X_j)` from a type-1 transform, the potential,
//! the mollified potential `psi = phi * S` and the mollified field are
//!
//! ```text
//! phi(x) = (q/alpha^2) sum_k G1(k) X(k) exp(i k.x)
//! psi(x) = (q/alpha^2) sum_k G3(k) X(k) exp(i k.x)
//! E(x)   = (q/alpha^2) sum_k -i k G3(k) X(k) exp(i k.x)
//! ```
//!
//! where `G1 = g^L S`, `G3 = g^L S^2` on the quadruply extended grid (direct
//! mode) or the precomputed multipliers `T1^`, `T3^` on the doubly extended
//! grid. `1/alpha^2` is the mode-sum measure of the extended box.
//!
//! The unpaired modes `n_d = -alpha N_m / 2` are zeroed in the field
//! multiplier and left out of the energy sum, so the force on every particle
//! is the exact gradient of the energy and pairs of particles feel equal and
//! opposite forces.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::greens::{radial_table, PrecomputedKernels, TruncatedGreen};
use crate::nufft::{fft2, ModeGrid, NufftPlan, DEFAULT_TOLERANCE};
use crate::shapes::ShapeFunction;
use num_complex::Complex64;
use rustfft::FftPlanner;

/// Imaginary residues above this (relative) are always an error.
pub const RESIDUE_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    /// Quadruply extended mode grid, spectrally accurate at any target.
    #[default]
    Direct,
    /// Doubly extended grid with precomputed kernels.
    Precomputed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    /// `phi = g^L * rho`.
    Raw,
    /// `psi = phi * S`, the potential particles feel.
    Mollified,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSolveConfig {
    pub modes_per_dim: usize,
    pub shape: ShapeFunction,
    pub green: TruncatedGreen,
    pub mode: SolverMode,
    pub tolerance: f64,
}

impl FieldSolveConfig {
    /// Direct-mode config with the default NUFFT tolerance; checks the
    /// truncation radius against the shape.
    pub fn new(modes_per_dim: usize, shape: ShapeFunction, radius: f64) -> Result<Self> {
        Ok(Self {
            modes_per_dim,
            shape,
            green: TruncatedGreen::for_shape(2, radius, shape.radius())?,
            mode: SolverMode::Direct,
            tolerance: DEFAULT_TOLERANCE,
        })
    }

    pub fn with_mode(mut self, mode: SolverMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    pub fn alpha(&self) -> usize {
        match self.mode {
            SolverMode::Direct => 4,
            SolverMode::Precomputed => 2,
        }
    }

    /// Mode grid the solve runs on.
    pub fn grid(&self) -> Result<ModeGrid> {
        ModeGrid::new(self.modes_per_dim, self.alpha())
    }
}

/// Per-mode multipliers of one solver configuration.
#[derive(Debug, Clone)]
pub struct SpectralKernel {
    grid: ModeGrid,
    phi: Vec<f64>,
    psi: Vec<f64>,
    paired: Vec<bool>,
}

impl SpectralKernel {
    pub fn direct(config: &FieldSolveConfig, exec: Execution) -> Result<Self> {
        let grid = ModeGrid::new(config.modes_per_dim, 4)?;
        let (shape, green) = (config.shape, config.green);
        let phi = radial_table(&grid, |k| green.ghat(k) * shape.fourier(k), exec);
        let psi = radial_table(
            &grid,
            |k| {
                let s = shape.fourier(k);
                green.ghat(k) * s * s
            },
            exec,
        );
        Ok(Self::from_tables(grid, phi, psi))
    }

    pub fn precomputed(kernels: &PrecomputedKernels) -> Self {
        Self::from_tables(kernels.grid(), kernels.hat_t1().to_vec(), kernels.hat_t3().to_vec())
    }

    fn from_tables(grid: ModeGrid, phi: Vec<f64>, psi: Vec<f64>) -> Self {
        let paired = (0..grid.mode_count()).map(|f| !grid.is_unpaired(f)).collect();
        Self {
            grid,
            phi,
            psi,
            paired,
        }
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    /// Multiplier of the raw potential, `g^L S` (real, even).
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Multiplier of the mollified potential, `g^L S^2` (real, even).
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Field multiplier `-i k psi(k)` at mode `flat`, zero on unpaired modes.
    pub fn field(&self, flat: usize) -> [Complex64; 2] {
        if !self.paired[flat] {
            return [Complex64::new(0.0, 0.0); 2];
        }
        let [kx, ky] = self.grid.k_vector(flat);
        let p = self.psi[flat];
        [Complex64::new(0.0, -kx * p), Complex64::new(0.0, -ky * p)]
    }

    /// Whether the mode has a `-k` partner on the grid.
    pub fn is_paired(&self, flat: usize) -> bool {
        self.paired[flat]
    }
}

/// Field solver bound to one configuration: a NUFFT plan plus kernel tables.
#[derive(Debug)]
pub struct FieldSolver {
    config: FieldSolveConfig,
    kernel: SpectralKernel,
    plan: NufftPlan,
    exec: Execution,
}

impl FieldSolver {
    /// Builds the kernel tables; precomputed mode runs the quadruply
    /// extended precomputation here.
    pub fn new(config: FieldSolveConfig, exec: Execution) -> Result<Self> {
        match config.mode {
            SolverMode::Direct => {
                let kernel = SpectralKernel::direct(&config, exec)?;
                Self::assemble(config, kernel, exec)
            }
            SolverMode::Precomputed => {
                let fine = ModeGrid::new(config.modes_per_dim, 4)?;
                let kernels = PrecomputedKernels::new(fine, Some(config.shape), config.green, exec)?;
                Self::with_kernels(config, &kernels, exec)
            }
        }
    }

    /// Precomputed mode from existing kernels (e.g. loaded from a cache).
    pub fn with_kernels(config: FieldSolveConfig, kernels: &PrecomputedKernels, exec: Execution) -> Result<Self> {
        if config.mode != SolverMode::Precomputed {
            return Err(Error::InvalidConfig("precomputed kernels given to a direct-mode solver".into()));
        }
        if kernels.modes_per_dim() != config.modes_per_dim
            || kernels.green() != config.green
            || kernels.shape() != Some(config.shape)
        {
            return Err(Error::InvalidConfig("precomputed kernels do not match the solver configuration".into()));
        }
        Self::assemble(config, SpectralKernel::precomputed(kernels), exec)
    }

    fn assemble(config: FieldSolveConfig, kernel: SpectralKernel, exec: Execution) -> Result<Self> {
        let plan = NufftPlan::new(*kernel.grid(), config.tolerance)?.with_execution(exec);
        Ok(Self {
            config,
            kernel,
            plan,
            exec,
        })
    }

    pub fn config(&self) -> &FieldSolveConfig {
        &self.config
    }

    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &ModeGrid {
        self.kernel.grid()
    }

    pub fn plan(&self) -> &NufftPlan {
        &self.plan
    }

    /// `X(k) = sum_j exp(-i k.X_j)`; rejects points outside the box with
    /// their index. The zero mode is set to the particle count exactly.
    pub fn deposit(&self, points: &[[f64; 2]]) -> Result<Vec<Complex64>> {
        let ones = vec![Complex64::new(1.0, 0.0); points.len()];
        let mut modes = self.plan.type1(points, &ones)?;
        let f0 = self.grid().flat(0, 0);
        modes[f0] = Complex64::new(points.len() as f64, 0.0);
        Ok(modes)
    }

    /// `rho(k) = q S(k) X(k)`.
    pub fn charge_modes(&self, modes: &[Complex64], charge: f64) -> Vec<Complex64> {
        let grid = self.grid();
        let shape = self.config.shape;
        modes
            .iter()
            .enumerate()
            .map(|(f, x)| {
                let [kx, ky] = grid.k_vector(f);
                x * (charge * shape.fourier((kx * kx + ky * ky).sqrt()))
            })
            .collect()
    }

    /// `q G(k) X(k)` with the raw or mollified multiplier.
    pub fn potential_modes(&self, modes: &[Complex64], charge: f64, kind: PotentialKind) -> Vec<Complex64> {
        let table = match kind {
            PotentialKind::Raw => self.kernel.phi(),
            PotentialKind::Mollified => self.kernel.psi(),
        };
        modes.iter().zip(table).map(|(x, g)| x * (charge * g)).collect()
    }

    /// Evaluate `(1/alpha^2) sum_k c(k) exp(i k.x)` at `points`, returning
    /// the real part after checking the imaginary residue.
    pub fn evaluate(&self, coeffs: &[Complex64], points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let mut values = self.plan.type2(coeffs, points)?;
        let scale = self.grid().inverse_measure();
        // Unpaired modes have no conjugate partner, so their imaginary part
        // is expected; remove it (directly summed) before the integrity check.
        let grid = self.grid();
        let unpaired: Vec<([f64; 2], Complex64)> = (0..grid.mode_count())
            .filter(|&f| grid.is_unpaired(f) && coeffs[f] != Complex64::new(0.0, 0.0))
            .map(|f| (grid.k_vector(f), coeffs[f]))
            .collect();
        if !unpaired.is_empty() {
            let im = self.exec.map_range(points.len(), |i| {
                let [x, y] = points[i];
                unpaired.iter().map(|(k, c)| (c * Complex64::from_polar(1.0, k[0] * x + k[1] * y)).im).sum::<f64>()
            });
            values.iter_mut().zip(im).for_each(|(v, i)| v.im -= i);
        }
        self.check_residue(&[&values], l1(coeffs))?;
        Ok(values.iter().map(|v| v.re * scale).collect())
    }

    /// Mollified field `E = -grad psi` at `points`.
    pub fn electric_field(&self, modes: &[Complex64], charge: f64, points: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        let n = self.grid().mode_count();
        if modes.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: modes.len(),
            });
        }
        let mut cx = vec![Complex64::new(0.0, 0.0); n];
        let mut cy = vec![Complex64::new(0.0, 0.0); n];
        for f in 0..n {
            let [mx, my] = self.kernel.field(f);
            let x = modes[f] * charge;
            cx[f] = mx * x;
            cy[f] = my * x;
        }
        let out = self.plan.type2_many(&[&cx, &cy], points)?;
        self.check_residue(&[&out[0], &out[1]], l1(&cx) + l1(&cy))?;
        let scale = self.grid().inverse_measure();
        Ok(out[0].iter().zip(&out[1]).map(|(ex, ey)| [ex.re * scale, ey.re * scale]).collect())
    }

    /// RMS imaginary part relative to the RMS real part. The denominator is
    /// floored at `1e-6 |c|_1`, the scale of the transform error, so fields
    /// that vanish by symmetry are not flagged.
    fn check_residue(&self, parts: &[&[Complex64]], coeff_l1: f64) -> Result<()> {
        let (mut re, mut im, mut n) = (0.0f64, 0.0f64, 0usize);
        for part in parts {
            for v in part.iter() {
                re += v.re * v.re;
                im += v.im * v.im;
            }
            n += part.len();
        }
        if n == 0 || im == 0.0 {
            return Ok(());
        }
        let floor = 1e-6 * coeff_l1;
        let residue = (im / n as f64).sqrt() / (re / n as f64).sqrt().max(floor).max(f64::MIN_POSITIVE);
        let limit = self.residue_limit();
        if residue > limit {
            return Err(Error::ImaginaryResidue { residue, limit });
        }
        Ok(())
    }

    /// Error threshold on the relative imaginary residue: the fixed limit,
    /// widened for loose NUFFT tolerances whose own error exceeds it.
    pub fn residue_limit(&self) -> f64 {
        RESIDUE_LIMIT.max(100.0 * self.config.tolerance)
    }

    /// Potential (`Raw`) or mollified potential at `points`.
    pub fn potential_at(&self, modes: &[Complex64], charge: f64, kind: PotentialKind, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let c = self.potential_modes(modes, charge, kind);
        self.evaluate(&c, points)
    }

    /// Electrostatic energy `(q^2 / 2 alpha^2) sum_k G3(k) |X(k)|^2` over
    /// the paired modes.
    pub fn energy(&self, modes: &[Complex64], charge: f64) -> f64 {
        let s: f64 = modes
            .iter()
            .zip(self.kernel.psi())
            .enumerate()
            .filter(|(f, _)| self.kernel.is_paired(*f))
            .map(|(_, (x, g))| g * x.norm_sqr())
            .sum();
        0.5 * charge * charge * self.grid().inverse_measure() * s
    }

    /// The same energy grouped as `(1/2 alpha^2) sum_k conj(rho(k)) psi(k) / S(k)`,
    /// i.e. charge density against potential. Direct mode only: there
    /// `psi / S = q g^L S X = phi`.
    pub fn energy_from_density(&self, modes: &[Complex64], charge: f64) -> Result<f64> {
        if self.config.mode != SolverMode::Direct {
            return Err(Error::InvalidConfig("density grouping of the energy needs the direct solver".into()));
        }
        let rho = self.charge_modes(modes, charge);
        let phi = self.potential_modes(modes, charge, PotentialKind::Raw);
        let s: Complex64 = rho
            .iter()
            .zip(&phi)
            .enumerate()
            .filter(|(f, _)| self.kernel.is_paired(*f))
            .map(|(_, (r, p))| r.conj() * p)
            .sum();
        Ok(0.5 * self.grid().inverse_measure() * s.re)
    }

    /// `rho(0) = q S(0) X(0)`.
    pub fn total_charge(&self, modes: &[Complex64], charge: f64) -> f64 {
        let f0 = self.grid().flat(0, 0);
        charge * self.config.shape.fourier(0.0) * modes[f0].re
    }

    /// Values of `(1/alpha^2) sum_k c(k) exp(i k.x)` on the `n x n` grid
    /// `x_i = -1/2 + i/n` covering the box, by zero-padding the modes and one
    /// inverse FFT. Row-major with `x` slow.
    pub fn fourier_interpolate(&self, coeffs: &[Complex64], n: usize) -> Result<Vec<f64>> {
        fourier_interpolate(self.grid(), coeffs, n, self.exec)
    }
}

fn l1(c: &[Complex64]) -> f64 {
    c.iter().map(|v| v.norm()).sum()
}

/// See [`FieldSolver::fourier_interpolate`].
pub fn fourier_interpolate(grid: &ModeGrid, coeffs: &[Complex64], n: usize, exec: Execution) -> Result<Vec<f64>> {
    if n % 2 != 0 || n < grid.modes_per_dim() {
        return Err(Error::InvalidGrid(format!(
            "interpolation grid must be even and at least {} points, got {n}",
            grid.modes_per_dim()
        )));
    }
    if coeffs.len() != grid.mode_count() {
        return Err(Error::LengthMismatch {
            expected: grid.mode_count(),
            got: coeffs.len(),
        });
    }
    let alpha = grid.alpha();
    let p = alpha * n;
    let m = grid.len();
    let mut work = vec![Complex64::new(0.0, 0.0); p * p];
    for ix in 0..m {
        let wx = grid.index_at(ix).rem_euclid(p as i64) as usize;
        for iy in 0..m {
            let wy = grid.index_at(iy).rem_euclid(p as i64) as usize;
            work[wx * p + wy] = coeffs[ix * m + iy];
        }
    }
    let fft = FftPlanner::new().plan_fft_inverse(p);
    fft2(&mut work, p, &fft, exec);
    let scale = grid.inverse_measure();
    let half = (n / 2) as i64;
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let wx = (i as i64 - half).rem_euclid(p as i64) as usize;
        for j in 0..n {
            let wy = (j as i64 - half).rem_euclid(p as i64) as usize;
            out.push(work[wx * p + wy].re * scale);
        }
    }
    Ok(out)
}
