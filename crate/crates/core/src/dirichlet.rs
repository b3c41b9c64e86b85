//! Harmonic correction on a disk for Dirichlet problems.
//!
//! The free-space solution is corrected by the harmonic function taking the
//! boundary values `f - psi^P` on the circle `|z| = r_b`, evaluated with the
//! trapezoidal rule applied to Poisson's formula
//!
//! ```text
//! u(x) = (1/N_B) sum_j (r_b^2 - |x|^2) / |z_j - x|^2 * data_j
//! ```
//!
//! The rule is spectrally accurate away from the circle and useless near
//! it, so targets are restricted to `|x| <= 0.9 r_b`.

use crate::dynamics::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::field::{FieldSolver, PotentialKind};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Fraction of the radius inside which targets are accepted.
pub const SAFE_FRACTION: f64 = 0.9;

/// Equispaced nodes `z_j = r_b (cos t_j, sin t_j)`, `t_j = 2 pi j / N_B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskBoundary {
    radius: f64,
    nodes: Vec<[f64; 2]>,
}

impl DiskBoundary {
    pub fn new(radius: f64, count: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidConfig(format!("boundary radius {radius} must be positive")));
        }
        if count < 8 {
            return Err(Error::InvalidConfig(format!("need at least 8 boundary nodes, got {count}")));
        }
        let nodes = (0..count)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / count as f64;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect();
        Ok(Self { radius, nodes })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn safe_radius(&self) -> f64 {
        SAFE_FRACTION * self.radius
    }

    /// `f(z_j)` for every node.
    pub fn sample(&self, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&z| f(z)).collect()
    }

    fn check_target(&self, index: usize, x: [f64; 2]) -> Result<()> {
        let r = x[0].hypot(x[1]);
        // negated so NaN fails too
        if !(r <= self.safe_radius()) {
            return Err(Error::NearBoundary {
                index,
                radius: r,
                limit: self.safe_radius(),
            });
        }
        Ok(())
    }

    fn check_data(&self, data: &[f64]) -> Result<()> {
        if data.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: data.len(),
            });
        }
        Ok(())
    }

    /// Potential and field `-grad u` of the discrete Poisson formula. No
    /// target check.
    fn extend(&self, data: &[f64], x: [f64; 2]) -> (f64, [f64; 2]) {
        let r2 = self.radius * self.radius;
        let m = r2 - (x[0] * x[0] + x[1] * x[1]);
        let (mut u, mut ex, mut ey) = (0.0, 0.0, 0.0);
        for (z, g) in self.nodes.iter().zip(data) {
            let d = [z[0] - x[0], z[1] - x[1]];
            let d2 = d[0] * d[0] + d[1] * d[1];
            u += m / d2 * g;
            let w = g / (d2 * d2);
            ex += (x[0] * d2 - m * d[0]) * w;
            ey += (x[1] * d2 - m * d[1]) * w;
        }
        let n = self.len() as f64;
        (u / n, [2.0 * ex / n, 2.0 * ey / n])
    }
}

/// Harmonic extension of `data` (node values) evaluated at `x`.
pub fn harmonic_potential(x: [f64; 2], boundary: &DiskBoundary, data: &[f64]) -> Result<f64> {
    boundary.check_data(data)?;
    boundary.check_target(0, x)?;
    Ok(boundary.extend(data, x).0)
}

/// `-grad` of [`harmonic_potential`], differentiated analytically.
pub fn harmonic_field(x: [f64; 2], boundary: &DiskBoundary, data: &[f64]) -> Result<[f64; 2]> {
    boundary.check_data(data)?;
    boundary.check_target(0, x)?;
    Ok(boundary.extend(data, x).1)
}

/// Boundary values bound to their circle, evaluated at many targets.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicField {
    boundary: DiskBoundary,
    data: Vec<f64>,
}

impl HarmonicField {
    pub fn new(boundary: DiskBoundary, data: Vec<f64>) -> Result<Self> {
        boundary.check_data(&data)?;
        Ok(Self { boundary, data })
    }

    pub fn boundary(&self) -> &DiskBoundary {
        &self.boundary
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Potentials and fields at `points`; the first target outside the safe
    /// disk is reported by index.
    pub fn evaluate(&self, points: &[[f64; 2]], exec: Execution) -> Result<(Vec<f64>, Vec<[f64; 2]>)> {
        for (i, &x) in points.iter().enumerate() {
            self.boundary.check_target(i, x)?;
        }
        let both = exec.map_range(points.len(), |i| self.boundary.extend(&self.data, points[i]));
        Ok(both.into_iter().unzip())
    }
}

/// Result of one Dirichlet-corrected field solve.
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSolve {
    /// Total acceleration `(q/m) (E^P + E^H)` per particle.
    pub accel: Vec<[f64; 2]>,
    /// Harmonic field `E^H` per particle.
    pub harmonic_field: Vec<[f64; 2]>,
    /// `(f - psi^P)(z_j)`.
    pub residual: Vec<f64>,
    /// Harmonic potential energy, see [`compose_dirichlet`].
    pub energy: f64,
    /// Particles closer than `2R` to the circle, where the boundary identity
    /// for the mollified potential is not guaranteed.
    pub support_violations: usize,
}

/// Free-space field plus the harmonic correction enforcing `psi = f` on the
/// circle.
///
/// `modes` is the deposited `X(k)` of the ensemble and `data` the applied
/// potential at the boundary nodes. The energy is
/// `(q/2) sum_j psi^H(X_j) + (q/2) sum_j P[f](X_j)`, where `P[f]` is the
/// extension of the applied potential alone. The image part of `psi^H` is a
/// pair interaction and counts half; the applied potential acts on each
/// particle once and counts fully. With grounded walls the second sum
/// vanishes.
pub fn compose_dirichlet(
    solver: &FieldSolver,
    modes: &[Complex64],
    ens: &ParticleEnsemble,
    boundary: &DiskBoundary,
    data: &[f64],
    exec: Execution,
) -> Result<DirichletSolve> {
    boundary.check_data(data)?;
    let q = ens.charge;
    let psi_p = solver.potential_at(modes, q, PotentialKind::Mollified, boundary.nodes())?;
    let residual: Vec<f64> = data.iter().zip(&psi_p).map(|(f, p)| f - p).collect();
    let harmonic = HarmonicField::new(boundary.clone(), residual)?;
    let (psi_h, e_h) = harmonic.evaluate(&ens.positions, exec)?;
    let e_p = solver.electric_field(modes, q, &ens.positions)?;

    let qm = ens.charge_to_mass();
    let accel = e_p
        .iter()
        .zip(&e_h)
        .map(|(p, h)| [qm * (p[0] + h[0]), qm * (p[1] + h[1])])
        .collect();

    let mut energy = 0.5 * q * psi_h.iter().sum::<f64>();
    if data.iter().any(|&f| f != 0.0) {
        let applied = HarmonicField::new(boundary.clone(), data.to_vec())?;
        let (u, _) = applied.evaluate(&ens.positions, exec)?;
        energy += 0.5 * q * u.iter().sum::<f64>();
    }

    let margin = boundary.radius() - 2.0 * solver.config().shape.radius();
    let support_violations = ens.positions.iter().filter(|x| x[0].hypot(x[1]) > margin).count();

    Ok(DirichletSolve {
        accel,
        harmonic_field: e_h,
        residual: harmonic.data,
        energy,
        support_violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::FieldSolveConfig;
    use crate::shapes::ShapeFunction;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior(n: usize, radius: f64, seed: u64) -> Vec<[f64; 2]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let r = radius * rng.random::<f64>().sqrt();
                let t = 2.0 * PI * rng.random::<f64>();
                [r * t.cos(), r * t.sin()]
            })
            .collect()
    }

    #[test]
    fn constant_data_is_reproduced() {
        // the discrete weights average to 1 + 2 sum_m rho^(m N_B) cos(m N_B phi),
        // so constants are exact at the center and to rounding once
        // 0.9^N_B is negligible
        let small = DiskBoundary::new(0.5, 16).unwrap();
        assert!((harmonic_potential([0.0, 0.0], &small, &[2.75; 16]).unwrap() - 2.75).abs() < 1e-15);
        let b = DiskBoundary::new(0.5, 512).unwrap();
        let data = vec![2.75; 512];
        for x in interior(50, b.safe_radius(), 1) {
            assert!((harmonic_potential(x, &b, &data).unwrap() - 2.75).abs() < 1e-13);
            let e = harmonic_field(x, &b, &data).unwrap();
            assert!(e[0].abs() < 1e-12 && e[1].abs() < 1e-12, "{e:?}");
        }
    }

    #[test]
    fn center_value_is_boundary_mean() {
        let b = DiskBoundary::new(0.7, 40).unwrap();
        let data: Vec<f64> = (0..40).map(|j| ((j * 7919) % 13) as f64 - 4.5).collect();
        let mean = data.iter().sum::<f64>() / 40.0;
        assert!((harmonic_potential([0.0, 0.0], &b, &data).unwrap() - mean).abs() < 1e-15);
    }

    #[test]
    fn sine_data_extends_to_scaled_y() {
        let b = DiskBoundary::new(0.5, 256).unwrap();
        let data = b.sample(|z| z[1].atan2(z[0]).sin());
        for x in interior(100, b.safe_radius(), 2) {
            let u = harmonic_potential(x, &b, &data).unwrap();
            assert!((u - x[1] / 0.5).abs() < 1e-10, "{x:?}");
        }
    }

    #[test]
    fn linear_data_gives_uniform_field() {
        // the field error near 0.9 r_b behaves like N_B 0.9^N_B
        let b = DiskBoundary::new(1.0, 512).unwrap();
        let data = b.sample(|z| z[1]);
        let mut pts = interior(200, b.safe_radius(), 3);
        pts.push([0.9, 0.0]);
        pts.push([0.0, -0.9]);
        let h = HarmonicField::new(b, data).unwrap();
        let (_, e) = h.evaluate(&pts, Execution::Parallel).unwrap();
        for v in e {
            assert!(v[0].abs() < 1e-10 && (v[1] + 1.0).abs() < 1e-10, "{v:?}");
        }
    }

    #[test]
    fn field_is_minus_potential_gradient() {
        let b = DiskBoundary::new(0.5, 64).unwrap();
        let data = b.sample(|z| (3.0 * z[0]).sin() + (z[0] * z[1] * 5.0).cos() + z[1]);
        let h = 1e-5;
        for x in interior(30, b.safe_radius() - 2.0 * h, 4) {
            let u = |p: [f64; 2]| harmonic_potential(p, &b, &data).unwrap();
            let gx = (u([x[0] + h, x[1]]) - u([x[0] - h, x[1]])) / (2.0 * h);
            let gy = (u([x[0], x[1] + h]) - u([x[0], x[1] - h])) / (2.0 * h);
            let e = harmonic_field(x, &b, &data).unwrap();
            assert!((e[0] + gx).abs() < 1e-6 && (e[1] + gy).abs() < 1e-6, "{x:?}");
        }
    }

    #[test]
    fn quadratic_data_converges_spectrally() {
        let exact = |x: [f64; 2]| x[0] * x[0] - x[1] * x[1] + 2.0;
        let pts = interior(300, 0.9, 5);
        let mut errors = Vec::new();
        for n in [32, 64, 128, 256] {
            let b = DiskBoundary::new(1.0, n).unwrap();
            let data = b.sample(exact);
            let err = pts
                .iter()
                .map(|&x| (harmonic_potential(x, &b, &data).unwrap() - exact(x)).abs())
                .fold(0.0, f64::max);
            errors.push(err);
        }
        for w in errors.windows(2) {
            assert!(w[1] < w[0] / 4.0, "{errors:?}");
        }
        assert!(errors[3] < 1e-10, "{errors:?}");
    }

    #[test]
    fn targets_near_the_wall_are_rejected() {
        let b = DiskBoundary::new(0.5, 32).unwrap();
        let data = vec![0.0; 32];
        match harmonic_potential([0.46, 0.0], &b, &data) {
            Err(Error::NearBoundary { .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(matches!(harmonic_field([f64::NAN, 0.0], &b, &data), Err(Error::NearBoundary { .. })));
        assert!(matches!(harmonic_potential([0.0, 0.0], &b, &[0.0; 3]), Err(Error::LengthMismatch { .. })));
        assert!(DiskBoundary::new(0.5, 7).is_err());
        assert!(DiskBoundary::new(-1.0, 16).is_err());
    }

    fn solver(nm: usize) -> FieldSolver {
        let shape = ShapeFunction::truncated_gaussian(0.03, 0.15).unwrap();
        FieldSolver::new(FieldSolveConfig::new(nm, shape, 1.75).unwrap(), Execution::Parallel).unwrap()
    }

    #[test]
    fn centered_particle_feels_no_image_force() {
        let s = solver(32);
        let ens = ParticleEnsemble::new(vec![[0.0, 0.0]], vec![[0.0, 0.0]], 1.0, 1.0).unwrap();
        let modes = s.deposit(&ens.positions).unwrap();
        let b = DiskBoundary::new(0.5, 64).unwrap();
        let out = compose_dirichlet(&s, &modes, &ens, &b, &[0.0; 64], Execution::Sequential).unwrap();
        let e = out.harmonic_field[0];
        assert!(e[0].abs() < 1e-10 && e[1].abs() < 1e-10, "{e:?}");
        assert_eq!(out.support_violations, 0);
    }

    #[test]
    fn grounded_wall_matches_image_charge() {
        // a point charge at a inside a grounded circle of radius r has the
        // image potential (1/2pi) log(|x - a*| |a| / r), a* = r^2 a / |a|^2
        let s = solver(48);
        let a = [0.12, -0.05];
        let ens = ParticleEnsemble::new(vec![a], vec![[0.0, 0.0]], 1.0, 1.0).unwrap();
        let modes = s.deposit(&ens.positions).unwrap();
        let r = 0.5;
        let b = DiskBoundary::new(r, 128).unwrap();
        let out = compose_dirichlet(&s, &modes, &ens, &b, &[0.0; 128], Execution::Parallel).unwrap();
        let a2 = a[0] * a[0] + a[1] * a[1];
        let star = [r * r * a[0] / a2, r * r * a[1] / a2];
        let d = [a[0] - star[0], a[1] - star[1]];
        let d2 = d[0] * d[0] + d[1] * d[1];
        // E = -grad of the image potential, attraction toward the image
        let expect = [-d[0] / (2.0 * PI * d2), -d[1] / (2.0 * PI * d2)];
        let e = out.harmonic_field[0];
        assert!((e[0] - expect[0]).abs() < 1e-6 && (e[1] - expect[1]).abs() < 1e-6, "{e:?} vs {expect:?}");
        let u = (d2.sqrt() * a2.sqrt() / r).ln() / (2.0 * PI);
        assert!((out.energy - 0.5 * u).abs() < 1e-6, "{} vs {}", out.energy, 0.5 * u);
    }

    #[test]
    fn boundary_residual_vanishes_with_correction() {
        // psi^P + psi^H reproduces the boundary data at the nodes
        let s = solver(32);
        let pts = interior(20, 0.25, 6);
        let ens = ParticleEnsemble::new(pts.clone(), vec![[0.0, 0.0]; 20], 0.05, 0.05).unwrap();
        let modes = s.deposit(&pts).unwrap();
        let b = DiskBoundary::new(0.5, 64).unwrap();
        let data = b.sample(|z| z[1]);
        let out = compose_dirichlet(&s, &modes, &ens, &b, &data, Execution::Parallel).unwrap();
        let psi_p = s.potential_at(&modes, 0.05, PotentialKind::Mollified, b.nodes()).unwrap();
        for ((r, f), p) in out.residual.iter().zip(&data).zip(&psi_p) {
            assert!((r + p - f).abs() < 1e-15);
        }
    }

    #[test]
    fn wall_proximity_is_counted() {
        let s = solver(32);
        let pts = vec![[0.0, 0.0], [0.3, 0.0], [0.0, -0.32]];
        let ens = ParticleEnsemble::new(pts.clone(), vec![[0.0, 0.0]; 3], 1.0, 1.0).unwrap();
        let modes = s.deposit(&pts).unwrap();
        let b = DiskBoundary::new(0.5, 32).unwrap();
        let out = compose_dirichlet(&s, &modes, &ens, &b, &[0.0; 32], Execution::Parallel).unwrap();
        assert_eq!(out.support_violations, 2);
    }
}
