//! Seeded initial conditions.

use super::config::ScenarioConfig;
use crate::dynamics::ParticleEnsemble;
use crate::error::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Elongated Gaussian beam with a Maxwellian velocity distribution:
/// density `exp(-x^2/sx^2 - y^2/sy^2)`, so `<x^2> = sx^2/2`, and unit
/// temperature. Samples outside the box are redrawn.
pub fn init_beam(config: &ScenarioConfig) -> Result<ParticleEnsemble> {
    let p = &config.particles;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let nx = normal(p.sigma_x / std::f64::consts::SQRT_2);
    let ny = normal(p.sigma_y / std::f64::consts::SQRT_2);
    let nv = normal(p.thermal_velocity);
    let mut positions = Vec::with_capacity(p.count);
    let mut velocities = Vec::with_capacity(p.count);
    while positions.len() < p.count {
        let x = [nx.sample(&mut rng), ny.sample(&mut rng)];
        let v = [nv.sample(&mut rng), nv.sample(&mut rng)];
        if x[0].abs() < 0.5 && x[1].abs() < 0.5 {
            positions.push(x);
            velocities.push(v);
        }
    }
    ParticleEnsemble::new(positions, velocities, p.charge(), p.mass())
}

/// `count` points uniform in the open box.
pub fn uniform_points(count: usize, seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| [rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)]).collect()
}

fn normal(sd: f64) -> Normal<f64> {
    // sd = 0 is a valid degenerate distribution
    Normal::new(0.0, sd).expect("standard deviation validated as finite and non-negative")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(count: usize, seed: u64) -> ScenarioConfig {
        ScenarioConfig::from_toml(&format!(
            "scenario = \"beam_free_space\"\nseed = {seed}\n[particles]\ncount = {count}\n[field]\nmodes = 32\n[time]\ndt = 1e-3\nsteps = 1\nb_z = 300.0\n"
        ))
        .unwrap()
    }

    #[test]
    fn beam_moments_match_density() {
        let n = 40_000;
        let e = init_beam(&config(n, 11)).unwrap();
        let m = |f: &dyn Fn(usize) -> f64| (0..n).map(f).sum::<f64>() / n as f64;
        let xx = m(&|j| e.positions[j][0].powi(2));
        let yy = m(&|j| e.positions[j][1].powi(2));
        let vx = m(&|j| e.velocities[j][0].powi(2));
        let vy = m(&|j| e.velocities[j][1].powi(2));
        // the sample mean of z^2 for z ~ N(0, s^2) has standard deviation s^2 sqrt(2/n)
        let within = |got: f64, want: f64| (got - want).abs() < 5.0 * want * (2.0 / n as f64).sqrt();
        assert!(within(xx, (1.0f64 / 30.0).powi(2) / 2.0), "{xx}");
        assert!(within(yy, 0.01 / 2.0), "{yy}");
        assert!(within(vx, 1.0) && within(vy, 1.0), "{vx} {vy}");
        assert!((e.charge * n as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_ensemble() {
        let a = init_beam(&config(500, 5)).unwrap();
        let b = init_beam(&config(500, 5)).unwrap();
        let c = init_beam(&config(500, 6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(uniform_points(10, 1), uniform_points(10, 1));
    }
}
