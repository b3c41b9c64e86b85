//! Truncated free-space Green's functions and the precomputed real-space
//! kernels used by the doubly extended solver.
//!
//! The 2D kernel is `g(r) = -(1/2pi) log r` restricted to `r < L`, so that
//! `-lap(g * rho) = rho` inside the box. Its transform is
//!
//! ```text
//! g^L(s) = (1 - J0(Ls)) / s^2 - L log(L) J1(Ls) / s            (2D)
//! g^L(s) = 2 (sin(Ls/2) / s)^2                                 (3D)
//! ```
//!
//! # Precomputation
//!
//! On the quadruply extended mode grid (`alpha = 4`) the kernels `g^L * S`
//! and `g^L * S * S` are brought to real space by one inverse FFT, giving
//! samples `T1(x_g)`, `T3(x_g)` at the nodes `x_g = g / N_m`,
//! `g in [-N_m, N_m)^2`. A forward FFT of these samples gives multipliers on
//! the doubly extended grid (`alpha = 2`):
//!
//! ```text
//! T^(k) = h^2 sum_g T(x_g) exp(-i k.x_g),   h = 1/N_m
//! ```
//!
//! The gradient kernel `T2` is the spectral gradient of `T3` on the same
//! grid (multiplier `i k T3^`, unpaired row zeroed), so forces stay the exact
//! gradient of the energy computed from `T3^`.
//!
//! # Kernel cache layout
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes   "FSPIFKRN"
//! version    u32       1
//! dim        u32       2
//! radius     f64       L
//! alpha      u32       extension factor of the stored tables (2)
//! modes      u32       N_m
//! shape tag  u32       0 none, 1 radial b-spline, 2 truncated gaussian
//! shape p    f64       order (b-spline) or sigma (gaussian), 0 for none
//! shape R    f64       support radius, 0 for none
//! tables     u32       number of tables (2: T1^, T3^)
//! per table: u64 length, then `length` f64 values in mode-grid order
//! ```

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::nufft::{fft2, ModeGrid};
use crate::shapes::{ShapeFunction, ShapeKind};
use crate::special::{bessel_j1, one_minus_j0};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::io::{Read, Write};
use std::path::Path;

/// Threshold on `L s` below which the Taylor branch is used.
pub const SERIES_THRESHOLD: f64 = 1e-3;
/// Production truncation radius in 2D.
pub const DEFAULT_RADIUS: f64 = 1.5;

const CACHE_MAGIC: &[u8; 8] = b"FSPIFKRN";
const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGreen {
    dim: usize,
    radius: f64,
}

impl TruncatedGreen {
    pub fn new(dim: usize, radius: f64) -> Result<Self> {
        if !matches!(dim, 2 | 3) {
            return Err(Error::InvalidConfig(format!("dimension must be 2 or 3, got {dim}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("truncation radius must be positive, got {radius}")));
        }
        Ok(Self { dim, radius })
    }

    /// Checks `L >= sqrt(d) + 2R` for a shape of support radius `R`.
    pub fn for_shape(dim: usize, radius: f64, shape_radius: f64) -> Result<Self> {
        let green = Self::new(dim, radius)?;
        let minimum = min_truncation_radius(dim, shape_radius);
        if radius < minimum {
            return Err(Error::TruncationTooSmall {
                radius,
                minimum,
                shape_radius,
            });
        }
        Ok(green)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn ghat(&self, s: f64) -> f64 {
        ghat(self.dim, self.radius, s)
    }
}

/// Transform of the truncated Green's function at wavenumber magnitude `s`.
pub fn ghat(dim: usize, radius: f64, s: f64) -> f64 {
    let l = radius;
    let x = l * s.abs();
    match dim {
        2 => {
            let ll = l * l;
            if x < SERIES_THRESHOLD {
                let x2 = x * x;
                let a = 0.25 - x2 / 64.0 + x2 * x2 / 2304.0;
                let b = 0.5 - x2 / 16.0 + x2 * x2 / 384.0;
                ll * a - ll * l.ln() * b
            } else {
                let s = s.abs();
                one_minus_j0(x) / (s * s) - l * l.ln() * bessel_j1(x) / s
            }
        }
        3 => {
            if x < SERIES_THRESHOLD {
                let y2 = x * x / 4.0;
                0.5 * l * l * (1.0 - y2 / 3.0 + 2.0 * y2 * y2 / 45.0)
            } else {
                let s = s.abs();
                let v = (x / 2.0).sin() / s;
                2.0 * v * v
            }
        }
        _ => f64::NAN,
    }
}

/// `sqrt(d) + 2R`.
pub fn min_truncation_radius(dim: usize, shape_radius: f64) -> f64 {
    (dim as f64).sqrt() + 2.0 * shape_radius
}

/// Evaluate a radial function at every mode of `grid`.
pub fn radial_table(grid: &ModeGrid, f: impl Fn(f64) -> f64 + Sync + Send, exec: Execution) -> Vec<f64> {
    let m = grid.len();
    let radial: Vec<f64> = (0..m).map(|i| grid.wavenumber(grid.index_at(i))).collect();
    let rows = exec.map_range(m, |ix| {
        let kx = radial[ix];
        radial.iter().map(|ky| f((kx * kx + ky * ky).sqrt())).collect::<Vec<_>>()
    });
    rows.into_iter().flatten().collect()
}

/// Centered 2D DFT of a square array whose entries are stored in
/// mode-grid order (signed index `i - n/2` per axis).
/// `sign = -1` is the forward transform, `+1` the inverse; no scaling.
pub(crate) fn centered_dft(data: &[Complex64], n: usize, sign: i32, exec: Execution) -> Vec<Complex64> {
    let half = (n / 2) as i64;
    let wrap = |i: usize| ((i as i64 - half).rem_euclid(n as i64)) as usize;
    let mut work = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let wi = wrap(i);
        for j in 0..n {
            work[wi * n + wrap(j)] = data[i * n + j];
        }
    }
    let mut planner = FftPlanner::new();
    let fft = if sign < 0 {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    fft2(&mut work, n, &fft, exec);
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let wi = wrap(i);
        for j in 0..n {
            out[i * n + j] = work[wi * n + wrap(j)];
        }
    }
    out
}

/// Real-space samples and doubly extended multipliers for `g^L * S` and
/// `g^L * S * S`. With no shape both reduce to the bare kernel `g^L`.
#[derive(Debug, Clone)]
pub struct PrecomputedKernels {
    modes_per_dim: usize,
    green: TruncatedGreen,
    shape: Option<ShapeFunction>,
    t1: Vec<f64>,
    t3: Vec<f64>,
    hat_t1: Vec<f64>,
    hat_t3: Vec<f64>,
}

impl PrecomputedKernels {
    /// Build from the quadruply extended grid `fine` (`alpha` must be 4).
    pub fn new(fine: ModeGrid, shape: Option<ShapeFunction>, green: TruncatedGreen, exec: Execution) -> Result<Self> {
        if fine.alpha() != 4 {
            return Err(Error::PrecomputeNeedsAlpha4(fine.alpha()));
        }
        if green.dim() != 2 {
            return Err(Error::InvalidConfig("precomputation is two-dimensional".into()));
        }
        let nm = fine.modes_per_dim();
        let s = |k: f64| shape.map_or(1.0, |sh| sh.fourier(k));
        let a1 = radial_table(&fine, |k| green.ghat(k) * s(k), exec);
        let a3 = radial_table(&fine, |k| green.ghat(k) * s(k) * s(k), exec);
        let t1 = Self::to_nodes(&fine, &a1, exec);
        let t3 = Self::to_nodes(&fine, &a3, exec);
        let hat_t1 = Self::to_multiplier(nm, &t1, exec);
        let hat_t3 = Self::to_multiplier(nm, &t3, exec);
        Ok(Self {
            modes_per_dim: nm,
            green,
            shape,
            t1,
            t3,
            hat_t1,
            hat_t3,
        })
    }

    /// `(1/16) sum_k A(k) exp(i k.x_g)` restricted to `g in [-N_m, N_m)^2`.
    fn to_nodes(fine: &ModeGrid, table: &[f64], exec: Execution) -> Vec<f64> {
        let m = fine.len();
        let data: Vec<Complex64> = table.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let full = centered_dft(&data, m, 1, exec);
        let scale = fine.inverse_measure();
        let n2 = 2 * fine.modes_per_dim();
        let offset = (m - n2) / 2;
        let mut out = Vec::with_capacity(n2 * n2);
        for i in 0..n2 {
            for j in 0..n2 {
                out.push(full[(i + offset) * m + j + offset].re * scale);
            }
        }
        out
    }

    fn to_multiplier(nm: usize, nodes: &[f64], exec: Execution) -> Vec<f64> {
        let n2 = 2 * nm;
        let h2 = 1.0 / (nm * nm) as f64;
        let data: Vec<Complex64> = nodes.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        centered_dft(&data, n2, -1, exec).into_iter().map(|c| c.re * h2).collect()
    }

    pub fn modes_per_dim(&self) -> usize {
        self.modes_per_dim
    }

    pub fn green(&self) -> TruncatedGreen {
        self.green
    }

    pub fn shape(&self) -> Option<ShapeFunction> {
        self.shape
    }

    /// The doubly extended grid the multipliers live on.
    pub fn grid(&self) -> ModeGrid {
        ModeGrid::new(self.modes_per_dim, 2).expect("validated at construction")
    }

    /// Node spacing `1/N_m`.
    pub fn node_spacing(&self) -> f64 {
        1.0 / self.modes_per_dim as f64
    }

    /// `T1` at the nodes, same layout as the `alpha = 2` mode grid.
    pub fn t1(&self) -> &[f64] {
        &self.t1
    }

    pub fn t3(&self) -> &[f64] {
        &self.t3
    }

    pub fn hat_t1(&self) -> &[f64] {
        &self.hat_t1
    }

    pub fn hat_t3(&self) -> &[f64] {
        &self.hat_t3
    }

    /// Components of `T2 = grad T3` at the nodes.
    pub fn t2(&self, exec: Execution) -> [Vec<f64>; 2] {
        let grid = self.grid();
        let n2 = grid.len();
        let scale = grid.inverse_measure();
        let component = |axis: usize| {
            let data: Vec<Complex64> = (0..grid.mode_count())
                .map(|f| {
                    if grid.is_unpaired(f) {
                        Complex64::new(0.0, 0.0)
                    } else {
                        Complex64::new(0.0, grid.k_vector(f)[axis] * self.hat_t3[f])
                    }
                })
                .collect();
            centered_dft(&data, n2, 1, exec).into_iter().map(|c| c.re * scale).collect()
        };
        [component(0), component(1)]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_u32::<LittleEndian>(CACHE_VERSION)?;
        w.write_u32::<LittleEndian>(self.green.dim() as u32)?;
        w.write_f64::<LittleEndian>(self.green.radius())?;
        w.write_u32::<LittleEndian>(2)?;
        w.write_u32::<LittleEndian>(self.modes_per_dim as u32)?;
        let (tag, p, r) = shape_descriptor(self.shape);
        w.write_u32::<LittleEndian>(tag)?;
        w.write_f64::<LittleEndian>(p)?;
        w.write_f64::<LittleEndian>(r)?;
        w.write_u32::<LittleEndian>(2)?;
        for table in [&self.hat_t1, &self.hat_t3] {
            w.write_u64::<LittleEndian>(table.len() as u64)?;
            for &v in table.iter() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
        Ok(())
    }

    /// Load a cache written by [`save`](Self::save), checking that it was
    /// built for the given parameters. Only the multipliers are stored, so
    /// the node samples are rebuilt from them by an inverse FFT.
    pub fn load(
        path: &Path,
        modes_per_dim: usize,
        shape: Option<ShapeFunction>,
        green: TruncatedGreen,
        exec: Execution,
    ) -> Result<Self> {
        let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r, modes_per_dim, shape, green, exec)
    }

    pub fn read_from(
        r: &mut impl Read,
        modes_per_dim: usize,
        shape: Option<ShapeFunction>,
        green: TruncatedGreen,
        exec: Execution,
    ) -> Result<Self> {
        let bad = |what: &str| Error::KernelCache(what.to_string());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != CACHE_VERSION {
            return Err(Error::KernelCache(format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LittleEndian>()? as usize;
        let radius = r.read_f64::<LittleEndian>()?;
        let alpha = r.read_u32::<LittleEndian>()?;
        let modes = r.read_u32::<LittleEndian>()? as usize;
        let tag = r.read_u32::<LittleEndian>()?;
        let p = r.read_f64::<LittleEndian>()?;
        let sr = r.read_f64::<LittleEndian>()?;
        if dim != green.dim() || radius != green.radius() || alpha != 2 || modes != modes_per_dim {
            return Err(bad("grid or truncation radius does not match"));
        }
        if (tag, p, sr) != shape_descriptor(shape) {
            return Err(bad("shape function does not match"));
        }
        let count = r.read_u32::<LittleEndian>()?;
        if count != 2 {
            return Err(bad("expected two tables"));
        }
        let expected = 4 * modes * modes;
        let mut tables = Vec::with_capacity(2);
        for _ in 0..2 {
            let len = r.read_u64::<LittleEndian>()? as usize;
            if len != expected {
                return Err(Error::KernelCache(format!("table length {len}, expected {expected}")));
            }
            let mut t = vec![0.0; len];
            r.read_f64_into::<LittleEndian>(&mut t)?;
            tables.push(t);
        }
        let hat_t3 = tables.pop().unwrap_or_default();
        let hat_t1 = tables.pop().unwrap_or_default();
        let grid = ModeGrid::new(modes, 2)?;
        let back = |hat: &[f64]| -> Vec<f64> {
            let data: Vec<Complex64> = hat.iter().map(|&v| Complex64::new(v, 0.0)).collect();
            let scale = grid.inverse_measure();
            centered_dft(&data, grid.len(), 1, exec).into_iter().map(|c| c.re * scale).collect()
        };
        Ok(Self {
            modes_per_dim: modes,
            green,
            shape,
            t1: back(&hat_t1),
            t3: back(&hat_t3),
            hat_t1,
            hat_t3,
        })
    }
}

fn shape_descriptor(shape: Option<ShapeFunction>) -> (u32, f64, f64) {
    match shape {
        None => (0, 0.0, 0.0),
        Some(s) => match s.kind() {
            ShapeKind::RadialBspline { order } => (1, order as f64, s.radius()),
            ShapeKind::TruncatedGaussian { sigma } => (2, sigma, s.radius()),
        },
    }
}
