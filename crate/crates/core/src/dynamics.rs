//! Particle state, the leapfrog/Boris pusher and conservation diagnostics.
//!
//! Velocities are staggered: between steps the ensemble holds `X^n` and
//! `V^{n-1/2}`. The first step bootstraps `V^{-1/2}` from `V^0` with a
//! backward half kick using the full Lorentz acceleration at `t = 0`.
//! Synchronized velocities come from the midpoint rule
//! `V^n = (V^{n-1/2} + V^{n+1/2}) / 2`.

use crate::error::{Error, Result};
use crate::nufft::{ModeGrid, NufftPlan};
use crate::shapes::ShapeFunction;
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    pub positions: Vec<[f64; 2]>,
    pub velocities: Vec<[f64; 2]>,
    /// Charge per particle.
    pub charge: f64,
    /// Mass per particle.
    pub mass: f64,
    staggered: bool,
}

impl ParticleEnsemble {
    /// Ensemble with velocities at the same time level as positions.
    pub fn new(positions: Vec<[f64; 2]>, velocities: Vec<[f64; 2]>, charge: f64, mass: f64) -> Result<Self> {
        if positions.len() != velocities.len() {
            return Err(Error::LengthMismatch {
                expected: positions.len(),
                got: velocities.len(),
            });
        }
        if !(mass > 0.0 && mass.is_finite()) || !charge.is_finite() {
            return Err(Error::InvalidConfig(format!("charge {charge} and mass {mass} must be finite, mass positive")));
        }
        for (index, (x, v)) in positions.iter().zip(&velocities).enumerate() {
            if !(x.iter().chain(v).all(|c| c.is_finite())) {
                return Err(Error::NonFinitePoint { index });
            }
        }
        Ok(Self {
            positions,
            velocities,
            charge,
            mass,
            staggered: false,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn charge_to_mass(&self) -> f64 {
        self.charge / self.mass
    }

    /// Whether `velocities` hold half-step values.
    pub fn is_staggered(&self) -> bool {
        self.staggered
    }

    /// Negate all velocities (time reversal of a staggered state).
    pub fn reverse(&mut self) {
        for v in &mut self.velocities {
            v[0] = -v[0];
            v[1] = -v[1];
        }
    }

    /// Index of the first particle outside `|x_d| <= 1/2`.
    pub fn first_escaped(&self) -> Option<usize> {
        self.positions.iter().position(|p| !(p[0].abs() <= 0.5 && p[1].abs() <= 0.5))
    }
}

/// Leapfrog (no magnetic field) or Boris (uniform axial field) pusher.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pusher {
    dt: f64,
    omega: f64,
    cos: f64,
    sin: f64,
}

impl Pusher {
    /// `omega = q B_z / m` is the signed cyclotron frequency; zero gives
    /// plain leapfrog.
    pub fn new(dt: f64, omega: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !omega.is_finite() {
            return Err(Error::InvalidConfig(format!("time step {dt} must be positive and finite")));
        }
        // the Boris rotation angle, clockwise for positive omega
        let theta = -2.0 * (0.5 * omega * dt).atan();
        let (cos, sin) = orthogonal_pair(theta);
        Ok(Self { dt, omega, cos, sin })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Rotation applied to `v` in the magnetic half of the step.
    pub fn rotation(&self) -> (f64, f64) {
        (self.cos, self.sin)
    }

    /// Advance `X^n, V^{n-1/2}` to `X^{n+1}, V^{n+1/2}` given the electric
    /// acceleration `accel = (q/m) E(X^n)`. Returns the synchronized
    /// velocities `V^n`.
    pub fn step(&self, ens: &mut ParticleEnsemble, accel: &[[f64; 2]]) -> Result<Vec<[f64; 2]>> {
        if accel.len() != ens.len() {
            return Err(Error::LengthMismatch {
                expected: ens.len(),
                got: accel.len(),
            });
        }
        if !ens.staggered {
            let h = 0.5 * self.dt;
            for (v, a) in ens.velocities.iter_mut().zip(accel) {
                let lorentz = [a[0] + self.omega * v[1], a[1] - self.omega * v[0]];
                v[0] -= h * lorentz[0];
                v[1] -= h * lorentz[1];
            }
            ens.staggered = true;
        }
        let h = 0.5 * self.dt;
        let (c, s) = (self.cos, self.sin);
        let mut synced = Vec::with_capacity(ens.len());
        for ((x, v), a) in ens.positions.iter_mut().zip(ens.velocities.iter_mut()).zip(accel) {
            let old = *v;
            let minus = [v[0] + h * a[0], v[1] + h * a[1]];
            let plus = [c * minus[0] - s * minus[1], s * minus[0] + c * minus[1]];
            v[0] = plus[0] + h * a[0];
            v[1] = plus[1] + h * a[1];
            x[0] += self.dt * v[0];
            x[1] += self.dt * v[1];
            synced.push([0.5 * (old[0] + v[0]), 0.5 * (old[1] + v[1])]);
        }
        Ok(synced)
    }
}

/// One leapfrog step (no magnetic field).
pub fn leapfrog_step(ens: &mut ParticleEnsemble, accel: &[[f64; 2]], dt: f64) -> Result<Vec<[f64; 2]>> {
    Pusher::new(dt, 0.0)?.step(ens, accel)
}

/// One Boris step in the axial field `b_z`.
pub fn boris_step(ens: &mut ParticleEnsemble, accel: &[[f64; 2]], b_z: f64, dt: f64) -> Result<Vec<[f64; 2]>> {
    Pusher::new(dt, ens.charge_to_mass() * b_z)?.step(ens, accel)
}

/// `(cos t, sin t)` nudged by a few hundred ulps at most so that `c^2 + s^2`
/// is as close to one as double precision allows; repeated rotations then
/// keep `|v|` to rounding noise instead of drifting geometrically.
pub fn orthogonal_pair(theta: f64) -> (f64, f64) {
    let (c0, s0) = (theta.cos(), theta.sin());
    if s0 == 0.0 || c0 == 0.0 {
        return (c0, s0);
    }
    let ulp_s = f64::from_bits(s0.abs().to_bits() + 1) - s0.abs();
    let mut best = (c0, s0, defect(c0, s0).abs());
    // nearest candidates first, stop once the defect is below 2^-64
    for i in (0..=1024i32).map(|k| if k % 2 == 0 { k / 2 } else { -(k + 1) / 2 }) {
        if best.2 <= f64::EPSILON / 4096.0 {
            break;
        }
        let c = nudge(c0, i);
        // d(defect)/ds = 2s, so this many ulps of s cancel the defect
        let j0 = (-defect(c, s0) / (2.0 * s0.abs() * ulp_s)).round() as i32;
        for j in j0 - 2..=j0 + 2 {
            let s = nudge(s0, j);
            let d = defect(c, s).abs();
            if d < best.2 {
                best = (c, s, d);
            }
        }
    }
    (best.0, best.1)
}

fn nudge(x: f64, ulps: i32) -> f64 {
    if ulps == 0 || x == 0.0 {
        return x;
    }
    // moves the magnitude for either sign
    f64::from_bits((x.to_bits() as i64 + ulps as i64) as u64)
}

/// `c^2 + s^2 - 1` evaluated with error-free products.
fn defect(c: f64, s: f64) -> f64 {
    let pc = c * c;
    let ec = c.mul_add(c, -pc);
    let ps = s * s;
    let es = s.mul_add(s, -ps);
    let sum = pc + ps;
    let bb = sum - pc;
    let tail = (pc - (sum - bb)) + (ps - bb);
    (sum - 1.0) + tail + ec + es
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyReport {
    pub time: f64,
    pub kinetic: f64,
    pub electric: f64,
    /// Harmonic (boundary) contribution; zero in free space.
    pub harmonic: f64,
}

impl EnergyReport {
    pub fn total(&self) -> f64 {
        self.kinetic + self.electric + self.harmonic
    }
}

/// `(m/2) sum |v|^2`.
pub fn kinetic_energy(velocities: &[[f64; 2]], mass: f64) -> f64 {
    0.5 * mass * velocities.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>()
}

/// `m sum v`.
pub fn momentum(velocities: &[[f64; 2]], mass: f64) -> [f64; 2] {
    let s = velocities.iter().fold([0.0, 0.0], |a, v| [a[0] + v[0], a[1] + v[1]]);
    [mass * s[0], mass * s[1]]
}

/// Electrostatic energy of a periodic unit box with `G(k) = 1/k^2`, `k = 0`
/// left out (neutralizing background) and unpaired modes dropped.
pub fn periodic_energy(points: &[[f64; 2]], charge: f64, shape: &ShapeFunction, modes_per_dim: usize, tolerance: f64) -> Result<f64> {
    let grid = ModeGrid::new(modes_per_dim, 1)?;
    let plan = NufftPlan::new(grid, tolerance)?;
    let modes = plan.type1(points, &vec![Complex64::new(1.0, 0.0); points.len()])?;
    let mut sum = 0.0;
    for (f, x) in modes.iter().enumerate() {
        let [nx, ny] = grid.indices(f);
        if (nx == 0 && ny == 0) || grid.is_unpaired(f) {
            continue;
        }
        let [kx, ky] = grid.k_vector(f);
        let k2 = kx * kx + ky * ky;
        let s = shape.fourier(k2.sqrt());
        sum += s * s / k2 * x.norm_sqr();
    }
    Ok(0.5 * charge * charge * grid.inverse_measure() * sum)
}
