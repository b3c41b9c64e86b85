//! Type-1 and type-2 non-uniform discrete Fourier transforms between points
//! in the unit box and a centered Fourier mode grid.
//!
//! Conventions:
//! - points `x` satisfy `|x_d| <= 1/2` in every dimension;
//! - mode indices `n_d` span `[-M/2, M/2)` with `M = alpha * N_m`, and the
//!   wavenumber of index `n` is `n * 2*pi/alpha`;
//! - coefficient arrays are stored row-major with the first dimension slow:
//!   `flat = (n_x + M/2) * M + (n_y + M/2)`;
//! - type 1 computes `f(k) = sum_j c_j exp(-i k.x_j)` and type 2 computes
//!   `v_j = sum_k f(k) exp(+i k.x_j)`. Neither carries a normalization.
//!
//! The fast path spreads onto an oversampled grid with the "exponential of
//! semicircle" kernel `exp(beta (sqrt(1 - z^2) - 1))`, runs an unnormalized
//! FFT, and divides by the kernel's Fourier transform.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::special::gauss_legendre;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub const MIN_TOLERANCE: f64 = 1e-14;
pub const MAX_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
/// Upper bound on `points * modes` for the direct summation oracles.
pub const DIRECT_GUARD: usize = 100_000_000;

const OVERSAMPLING: usize = 2;
const MAX_WIDTH: usize = 16;

/// Centered Fourier mode set on the (possibly extended) periodic box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeGrid {
    modes_per_dim: usize,
    alpha: usize,
}

impl ModeGrid {
    pub fn new(modes_per_dim: usize, alpha: usize) -> Result<Self> {
        if modes_per_dim == 0 || modes_per_dim % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "modes per dimension must be even and positive, got {modes_per_dim}"
            )));
        }
        if !matches!(alpha, 1 | 2 | 4) {
            return Err(Error::InvalidGrid(format!(
                "extension factor must be 1, 2 or 4, got {alpha}"
            )));
        }
        Ok(Self {
            modes_per_dim,
            alpha,
        })
    }

    pub fn modes_per_dim(&self) -> usize {
        self.modes_per_dim
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    /// Half width of the physical box Omega.
    pub fn half_width(&self) -> f64 {
        0.5
    }

    /// Modes per dimension on the extended grid, `alpha * N_m`.
    pub fn len(&self) -> usize {
        self.alpha * self.modes_per_dim
    }

    /// Total number of modes, `(alpha N_m)^2`.
    pub fn mode_count(&self) -> usize {
        self.len() * self.len()
    }

    /// Side length of the periodic box the modes live on.
    pub fn period(&self) -> f64 {
        2.0 * self.half_width() * self.alpha as f64
    }

    /// `(2pi)^-2 dk^2`: the measure turning a mode sum into the inverse
    /// continuous transform.
    pub fn inverse_measure(&self) -> f64 {
        1.0 / (self.period() * self.period())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.period()
    }

    pub fn lowest_index(&self) -> i64 {
        -(self.len() as i64) / 2
    }

    pub fn wavenumber(&self, n: i64) -> f64 {
        n as f64 * self.spacing()
    }

    /// Signed mode index of position `i` along one dimension.
    pub fn index_at(&self, i: usize) -> i64 {
        i as i64 + self.lowest_index()
    }

    pub fn flat(&self, nx: i64, ny: i64) -> usize {
        let lo = self.lowest_index();
        ((nx - lo) as usize) * self.len() + (ny - lo) as usize
    }

    pub fn indices(&self, flat: usize) -> [i64; 2] {
        [self.index_at(flat / self.len()), self.index_at(flat % self.len())]
    }

    pub fn k_vector(&self, flat: usize) -> [f64; 2] {
        let [nx, ny] = self.indices(flat);
        [self.wavenumber(nx), self.wavenumber(ny)]
    }

    /// Whether the mode lies on the unpaired row/column `n_d = -M/2`.
    pub fn is_unpaired(&self, flat: usize) -> bool {
        let [nx, ny] = self.indices(flat);
        nx == self.lowest_index() || ny == self.lowest_index()
    }

    /// Flat index of `-k`, if that mode exists on the grid.
    pub fn mirror(&self, flat: usize) -> Option<usize> {
        let [nx, ny] = self.indices(flat);
        let lo = self.lowest_index();
        if nx == lo || ny == lo {
            None
        } else {
            Some(self.flat(-nx, -ny))
        }
    }
}

/// Reject points outside the unit box or with non-finite coordinates.
pub fn validate_points(points: &[[f64; 2]]) -> Result<()> {
    for (index, p) in points.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::NonFinitePoint { index });
        }
        if p[0].abs() > 0.5 || p[1].abs() > 0.5 {
            return Err(Error::PointOutsideDomain {
                index,
                x: p[0],
                y: p[1],
            });
        }
    }
    Ok(())
}

fn validate_tolerance(tol: f64) -> Result<()> {
    if !(MIN_TOLERANCE..=MAX_TOLERANCE).contains(&tol) {
        return Err(Error::ToleranceOutOfRange(tol));
    }
    Ok(())
}

/// Reusable transform plan for one mode grid and tolerance.
pub struct NufftPlan {
    grid: ModeGrid,
    tolerance: f64,
    width: usize,
    beta: f64,
    fine: usize,
    correction: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    exec: Execution,
}

impl std::fmt::Debug for NufftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NufftPlan")
            .field("grid", &self.grid)
            .field("tolerance", &self.tolerance)
            .field("width", &self.width)
            .field("beta", &self.beta)
            .field("fine", &self.fine)
            .finish()
    }
}

impl NufftPlan {
    pub fn new(grid: ModeGrid, tolerance: f64) -> Result<Self> {
        validate_tolerance(tolerance)?;
        let digits = (1.0 / tolerance).log10().ceil() as usize;
        let width = (digits + 2).clamp(4, MAX_WIDTH);
        let beta = 2.30 * width as f64;
        let fine = (OVERSAMPLING * grid.len()).max(2 * width);
        let fine = fine + fine % 2;

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fine);
        let inverse = planner.plan_fft_inverse(fine);

        // h / Psi(n), Psi the continuous transform of the kernel in fine-grid
        // angle units.
        let h = 2.0 * PI / fine as f64;
        let half = width as f64 * h / 2.0;
        let (z, wq) = gauss_legendre(4 * width + 40);
        let correction = (0..grid.len())
            .map(|i| {
                let n = grid.index_at(i) as f64;
                let transform: f64 = z
                    .iter()
                    .zip(&wq)
                    .map(|(&zi, &wi)| wi * es_kernel(zi, beta) * (n * zi * half).cos())
                    .sum::<f64>()
                    * half;
                h / transform
            })
            .collect();

        Ok(Self {
            grid,
            tolerance,
            width,
            beta,
            fine,
            correction,
            forward,
            inverse,
            exec: Execution::default(),
        })
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn grid(&self) -> &ModeGrid {
        &self.grid
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    pub fn kernel_width(&self) -> usize {
        self.width
    }

    pub fn fine_len(&self) -> usize {
        self.fine
    }

    /// Type 1: `f(k) = sum_j c_j exp(-i k.x_j)` for every mode.
    pub fn type1(&self, points: &[[f64; 2]], strengths: &[Complex64]) -> Result<Vec<Complex64>> {
        if points.len() != strengths.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: strengths.len(),
            });
        }
        validate_points(points)?;
        let mut fine = self.spread(points, strengths);
        fft2(&mut fine, self.fine, &self.forward, self.exec);

        let m = self.grid.len();
        let nf = self.fine as i64;
        let mut out = vec![Complex64::new(0.0, 0.0); m * m];
        self.exec.for_each_chunk_mut(&mut out, m, |ix, row| {
            let fx = (self.grid.index_at(ix)).rem_euclid(nf) as usize;
            let cx = self.correction[ix];
            for (iy, v) in row.iter_mut().enumerate() {
                let fy = (self.grid.index_at(iy)).rem_euclid(nf) as usize;
                *v = fine[fx * self.fine + fy] * (cx * self.correction[iy]);
            }
        });
        Ok(out)
    }

    /// Type 2: `v_j = sum_k f(k) exp(+i k.x_j)` at every point.
    pub fn type2(&self, coeffs: &[Complex64], points: &[[f64; 2]]) -> Result<Vec<Complex64>> {
        let mut out = self.type2_many(&[coeffs], points)?;
        Ok(out.pop().unwrap_or_default())
    }

    /// Several type-2 transforms at the same points, sharing kernel weights.
    pub fn type2_many(&self, coeffs: &[&[Complex64]], points: &[[f64; 2]]) -> Result<Vec<Vec<Complex64>>> {
        let modes = self.grid.mode_count();
        for c in coeffs {
            if c.len() != modes {
                return Err(Error::LengthMismatch {
                    expected: modes,
                    got: c.len(),
                });
            }
        }
        validate_points(points)?;

        let grids: Vec<Vec<Complex64>> = coeffs
            .iter()
            .map(|c| {
                let mut fine = self.load_modes(c);
                fft2(&mut fine, self.fine, &self.inverse, self.exec);
                fine
            })
            .collect();

        let nf = self.fine;
        let w = self.width;
        let values: Vec<Vec<Complex64>> = self.exec.map_range(points.len(), |j| {
            let (x0, wx) = self.weights(points[j][0]);
            let (y0, wy) = self.weights(points[j][1]);
            grids
                .iter()
                .map(|g| {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for a in 0..w {
                        let row = ((x0 + a as i64).rem_euclid(nf as i64)) as usize * nf;
                        let mut racc = Complex64::new(0.0, 0.0);
                        for b in 0..w {
                            let col = ((y0 + b as i64).rem_euclid(nf as i64)) as usize;
                            racc += g[row + col] * wy[b];
                        }
                        acc += racc * wx[a];
                    }
                    acc
                })
                .collect()
        });

        let mut out = vec![Vec::with_capacity(points.len()); coeffs.len()];
        for v in values {
            for (o, x) in out.iter_mut().zip(v) {
                o.push(x);
            }
        }
        Ok(out)
    }

    fn load_modes(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        let m = self.grid.len();
        let nf = self.fine;
        let mut fine = vec![Complex64::new(0.0, 0.0); nf * nf];
        for ix in 0..m {
            let fx = self.grid.index_at(ix).rem_euclid(nf as i64) as usize;
            let cx = self.correction[ix];
            for iy in 0..m {
                let fy = self.grid.index_at(iy).rem_euclid(nf as i64) as usize;
                fine[fx * nf + fy] = coeffs[ix * m + iy] * (cx * self.correction[iy]);
            }
        }
        fine
    }

    /// First fine-grid index touched by the kernel and the `width` weights.
    fn weights(&self, x: f64) -> (i64, [f64; MAX_WIDTH]) {
        let half = self.width as f64 / 2.0;
        // fine-grid coordinate of angle 2 pi x / period
        let u = x * self.fine as f64 / self.grid.period();
        let start = (u - half).ceil();
        let mut w = [0.0; MAX_WIDTH];
        for (a, wa) in w.iter_mut().enumerate().take(self.width) {
            let z = (start + a as f64 - u) / half;
            *wa = es_kernel(z, self.beta);
        }
        (start as i64, w)
    }

    /// Spread onto the fine grid.
    ///
    /// Points are binned into strips along the first dimension; strips are
    /// spread independently into private buffers and then accumulated in
    /// strip order, so the result does not depend on the execution policy.
    fn spread(&self, points: &[[f64; 2]], strengths: &[Complex64]) -> Vec<Complex64> {
        let nf = self.fine;
        let w = self.width;
        let strips = {
            let s = nf / w;
            if s >= 2 {
                s - s % 2
            } else {
                1
            }
        };
        let strip_len = nf / strips;

        let mut bins: Vec<Vec<(usize, i64, [f64; MAX_WIDTH])>> = vec![Vec::new(); strips];
        for (j, p) in points.iter().enumerate() {
            let (x0, wx) = self.weights(p[0]);
            let start = x0.rem_euclid(nf as i64) as usize;
            let s = (start / strip_len).min(strips - 1);
            bins[s].push((j, x0, wx));
        }

        let partial: Vec<(usize, usize, Vec<Complex64>)> = self.exec.map_range(strips, |s| {
            let first = s * strip_len;
            let last = if s + 1 == strips { nf } else { first + strip_len };
            let rows = last - first + w;
            let mut buf = vec![Complex64::new(0.0, 0.0); rows * nf];
            for &(j, x0, ref wx) in &bins[s] {
                let (y0, wy) = self.weights(points[j][1]);
                let local = (x0.rem_euclid(nf as i64) as usize) - first;
                let c = strengths[j];
                for a in 0..w {
                    let cw = c * wx[a];
                    let row = &mut buf[(local + a) * nf..(local + a + 1) * nf];
                    for b in 0..w {
                        let col = ((y0 + b as i64).rem_euclid(nf as i64)) as usize;
                        row[col] += cw * wy[b];
                    }
                }
            }
            (first, rows, buf)
        });

        let mut fine = vec![Complex64::new(0.0, 0.0); nf * nf];
        for (first, rows, buf) in partial {
            for r in 0..rows {
                let g = (first + r) % nf;
                let dst = &mut fine[g * nf..(g + 1) * nf];
                for (d, s) in dst.iter_mut().zip(&buf[r * nf..(r + 1) * nf]) {
                    *d += *s;
                }
            }
        }
        fine
    }
}

#[inline]
fn es_kernel(z: f64, beta: f64) -> f64 {
    let t = 1.0 - z * z;
    if t <= 0.0 {
        0.0
    } else {
        (beta * (t.sqrt() - 1.0)).exp()
    }
}

/// In-place unnormalized 2D FFT of a square row-major array.
pub(crate) fn fft2(data: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>, exec: Execution) {
    let block = n * 16.min(n).max(1);
    exec.for_each_chunk_mut(data, block, |_, rows| fft.process(rows));
    transpose_square(data, n);
    exec.for_each_chunk_mut(data, block, |_, rows| fft.process(rows));
    transpose_square(data, n);
}

fn transpose_square(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in (i + 1)..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// One-shot type-1 transform.
pub fn type1(
    points: &[[f64; 2]],
    strengths: &[Complex64],
    grid: ModeGrid,
    tolerance: f64,
) -> Result<Vec<Complex64>> {
    NufftPlan::new(grid, tolerance)?.type1(points, strengths)
}

/// One-shot type-2 transform.
pub fn type2(
    coeffs: &[Complex64],
    points: &[[f64; 2]],
    grid: ModeGrid,
    tolerance: f64,
) -> Result<Vec<Complex64>> {
    NufftPlan::new(grid, tolerance)?.type2(coeffs, points)
}

fn check_guard(points: usize, modes: usize) -> Result<()> {
    if points.saturating_mul(modes) > DIRECT_GUARD {
        return Err(Error::DirectSizeGuard { points, modes });
    }
    Ok(())
}

fn phases(grid: &ModeGrid, x: f64, sign: f64) -> Vec<Complex64> {
    (0..grid.len())
        .map(|i| Complex64::from_polar(1.0, sign * grid.wavenumber(grid.index_at(i)) * x))
        .collect()
}

/// Reference type-1 transform by direct summation.
pub fn type1_direct(points: &[[f64; 2]], strengths: &[Complex64], grid: ModeGrid) -> Result<Vec<Complex64>> {
    if points.len() != strengths.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            got: strengths.len(),
        });
    }
    check_guard(points.len(), grid.mode_count())?;
    validate_points(points)?;
    let m = grid.len();
    let ex: Vec<Vec<Complex64>> = points.iter().map(|p| phases(&grid, p[0], -1.0)).collect();
    let ey: Vec<Vec<Complex64>> = points.iter().map(|p| phases(&grid, p[1], -1.0)).collect();
    let rows = Execution::default().map_range(m, |ix| {
        let mut row = vec![Complex64::new(0.0, 0.0); m];
        for j in 0..points.len() {
            let a = strengths[j] * ex[j][ix];
            for (r, e) in row.iter_mut().zip(&ey[j]) {
                *r += a * e;
            }
        }
        row
    });
    Ok(rows.into_iter().flatten().collect())
}

/// Reference type-2 transform by direct summation.
pub fn type2_direct(coeffs: &[Complex64], points: &[[f64; 2]], grid: ModeGrid) -> Result<Vec<Complex64>> {
    if coeffs.len() != grid.mode_count() {
        return Err(Error::LengthMismatch {
            expected: grid.mode_count(),
            got: coeffs.len(),
        });
    }
    check_guard(points.len(), grid.mode_count())?;
    validate_points(points)?;
    let m = grid.len();
    Ok(Execution::default().map_range(points.len(), |j| {
        let ex = phases(&grid, points[j][0], 1.0);
        let ey = phases(&grid, points[j][1], 1.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for ix in 0..m {
            let row = &coeffs[ix * m..(ix + 1) * m];
            let inner: Complex64 = row.iter().zip(&ey).map(|(c, e)| c * e).sum();
            acc += inner * ex[ix];
        }
        acc
    }))
}

/// Relative l2 distance `|a - b| / |b|`.
pub fn relative_l2(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}
