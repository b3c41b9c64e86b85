//! Grid-based free-space PIC, kept as a baseline for the gridless solver.
//!
//! Charges are spread to the nodes `x_g = g h`, `g in [-N_g/2, N_g/2)`,
//! `h = 1/N_g`, with the tensor-product quadratic b-spline, the potential is
//! the doubly extended convolution with the bare truncated kernel, the field
//! its spectral gradient, and particles gather with the same stencil.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::greens::{centered_dft, PrecomputedKernels, TruncatedGreen};
use crate::nufft::ModeGrid;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CollocatedGrid {
    n: usize,
}

impl CollocatedGrid {
    pub fn new(n: usize) -> Result<Self> {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("collocated grid needs an even size of at least 4, got {n}")));
        }
        Ok(Self { n })
    }

    /// Nodes per dimension.
    pub fn size(&self) -> usize {
        self.n
    }

    /// Total node count.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Coordinate of node `i` along one axis, `i in 0..N_g`.
    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.spacing()
    }

    /// Whether the full stencil of a particle at `p` lies on the grid.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.stencil(p[0]).is_some() && self.stencil(p[1]).is_some()
    }

    /// First node index and weights of the 1D stencil at `x`.
    fn stencil(&self, x: f64) -> Option<(usize, [f64; 3])> {
        let u = x / self.spacing();
        if !u.is_finite() {
            return None;
        }
        let c = u.round();
        let d = u - c;
        let first = c as i64 + (self.n / 2) as i64 - 1;
        if !(first >= 0 && first + 2 < self.n as i64) {
            return None;
        }
        let w = [0.5 * (0.5 - d) * (0.5 - d), 0.75 - d * d, 0.5 * (0.5 + d) * (0.5 + d)];
        Some((first as usize, w))
    }

    fn stencils(&self, points: &[[f64; 2]]) -> Result<Vec<[(usize, [f64; 3]); 2]>> {
        points
            .iter()
            .enumerate()
            .map(|(index, p)| match (self.stencil(p[0]), self.stencil(p[1])) {
                (Some(sx), Some(sy)) => Ok([sx, sy]),
                _ => Err(Error::StencilOutOfGrid { index }),
            })
            .collect()
    }

    /// Charge density `rho_g = sum_j s_j W(X_j - x_g) / h^2`.
    pub fn spread(&self, points: &[[f64; 2]], strengths: &[f64]) -> Result<Vec<f64>> {
        if strengths.len() != points.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                got: strengths.len(),
            });
        }
        let st = self.stencils(points)?;
        let inv_area = 1.0 / (self.spacing() * self.spacing());
        let mut rho = vec![0.0; self.len()];
        // sequential so the sum order never depends on the thread count
        for ([(ix, wx), (iy, wy)], s) in st.iter().zip(strengths) {
            for (a, wa) in wx.iter().enumerate() {
                let row = (ix + a) * self.n + iy;
                for (b, wb) in wy.iter().enumerate() {
                    rho[row + b] += s * wa * wb * inv_area;
                }
            }
        }
        Ok(rho)
    }

    /// Equal strengths `charge` for every particle.
    pub fn spread_uniform(&self, points: &[[f64; 2]], charge: f64) -> Result<Vec<f64>> {
        self.spread(points, &vec![charge; points.len()])
    }

    /// `F(X_j) = sum_g F_g W(X_j - x_g)` for every grid array in `fields`.
    pub fn gather<const C: usize>(&self, fields: [&[f64]; C], points: &[[f64; 2]], exec: Execution) -> Result<Vec<[f64; C]>> {
        for f in &fields {
            if f.len() != self.len() {
                return Err(Error::LengthMismatch {
                    expected: self.len(),
                    got: f.len(),
                });
            }
        }
        let st = self.stencils(points)?;
        Ok(exec.map_range(points.len(), |j| {
            let [(ix, wx), (iy, wy)] = st[j];
            let mut out = [0.0; C];
            for (a, wa) in wx.iter().enumerate() {
                let row = (ix + a) * self.n + iy;
                for (b, wb) in wy.iter().enumerate() {
                    let w = wa * wb;
                    for (o, f) in out.iter_mut().zip(&fields) {
                        *o += w * f[row + b];
                    }
                }
            }
            out
        }))
    }
}

/// Node potential and field for one density.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub phi: Vec<f64>,
    pub e: [Vec<f64>; 2],
}

/// Collocated grid plus the bare-kernel multiplier `T0^` on the doubly
/// extended mode grid.
#[derive(Debug, Clone)]
pub struct PicSolver {
    grid: CollocatedGrid,
    kernels: PrecomputedKernels,
    exec: Execution,
}

impl PicSolver {
    pub fn new(n: usize, green: TruncatedGreen, exec: Execution) -> Result<Self> {
        let grid = CollocatedGrid::new(n)?;
        let fine = ModeGrid::new(n, 4)?;
        let kernels = PrecomputedKernels::new(fine, None, green, exec)?;
        Ok(Self { grid, kernels, exec })
    }

    pub fn grid(&self) -> CollocatedGrid {
        self.grid
    }

    pub fn kernels(&self) -> &PrecomputedKernels {
        &self.kernels
    }

    /// `rho^(k) = h^2 sum_g rho_g exp(-i k.x_g)` on the doubly extended grid.
    pub fn density_modes(&self, rho: &[f64]) -> Result<Vec<Complex64>> {
        let n = self.grid.size();
        if rho.len() != self.grid.len() {
            return Err(Error::LengthMismatch {
                expected: self.grid.len(),
                got: rho.len(),
            });
        }
        let m = 2 * n;
        let off = n / 2;
        let mut padded = vec![Complex64::new(0.0, 0.0); m * m];
        for i in 0..n {
            for j in 0..n {
                padded[(i + off) * m + j + off] = Complex64::new(rho[i * n + j], 0.0);
            }
        }
        let h2 = self.grid.spacing() * self.grid.spacing();
        Ok(centered_dft(&padded, m, -1, self.exec).into_iter().map(|c| c * h2).collect())
    }

    /// Potential `h^2 sum T0(x_g - x_g') rho_g'` and its spectral gradient at
    /// the nodes. The unpaired row is dropped from the gradient.
    pub fn solve(&self, rho: &[f64]) -> Result<GridField> {
        let modes = self.density_modes(rho)?;
        let grid = self.kernels.grid();
        let t0 = self.kernels.hat_t1();
        let mut phi = Vec::with_capacity(modes.len());
        let mut ex = Vec::with_capacity(modes.len());
        let mut ey = Vec::with_capacity(modes.len());
        for (f, r) in modes.iter().enumerate() {
            let p = r * t0[f];
            phi.push(p);
            if grid.is_unpaired(f) {
                ex.push(Complex64::new(0.0, 0.0));
                ey.push(Complex64::new(0.0, 0.0));
            } else {
                let [kx, ky] = grid.k_vector(f);
                ex.push(Complex64::new(0.0, -kx) * p);
                ey.push(Complex64::new(0.0, -ky) * p);
            }
        }
        Ok(GridField {
            phi: self.to_nodes(&phi),
            e: [self.to_nodes(&ex), self.to_nodes(&ey)],
        })
    }

    fn to_nodes(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let n = self.grid.size();
        let m = 2 * n;
        let off = n / 2;
        let scale = self.kernels.grid().inverse_measure();
        let full = centered_dft(coeffs, m, 1, self.exec);
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(full[(i + off) * m + j + off].re * scale);
            }
        }
        out
    }

    /// Grid energy `(h^2/2) sum_g rho_g phi_g`.
    pub fn energy(&self, rho: &[f64], phi: &[f64]) -> f64 {
        let h2 = self.grid.spacing() * self.grid.spacing();
        0.5 * h2 * rho.iter().zip(phi).map(|(r, p)| r * p).sum::<f64>()
    }

    /// Spread, solve and gather: per-particle accelerations and the grid
    /// energy.
    pub fn accelerations(&self, points: &[[f64; 2]], charge: f64, mass: f64) -> Result<(Vec<[f64; 2]>, f64)> {
        let rho = self.grid.spread_uniform(points, charge)?;
        let field = self.solve(&rho)?;
        let e = self.grid.gather([&field.e[0], &field.e[1]], points, self.exec)?;
        let qm = charge / mass;
        let accel = e.into_iter().map(|[x, y]| [qm * x, qm * y]).collect();
        Ok((accel, self.energy(&rho, &field.phi)))
    }
}
