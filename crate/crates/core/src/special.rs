//! Special functions and quadrature used across the solver.

use num_complex::Complex64;
use std::f64::consts::PI;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Bessel function of the first kind, order zero.
#[inline]
pub fn bessel_j0(x: f64) -> f64 {
    libm::j0(x)
}

/// Bessel function of the first kind, order one.
#[inline]
pub fn bessel_j1(x: f64) -> f64 {
    libm::j1(x)
}

/// `1 - J0(x)` without cancellation near the origin.
pub fn one_minus_j0(x: f64) -> f64 {
    if x.abs() < 4.0 {
        // sum_{m>=1} (-1)^(m+1) (x/2)^(2m) / (m!)^2
        let q = x * x / 4.0;
        let mut term = q;
        let mut sum = q;
        for m in 2..60 {
            term *= -q / (m * m) as f64;
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        1.0 - bessel_j0(x)
    }
}

/// `2 J1(x) / x`, the Fourier transform of the unit-mass disk of radius one
/// at wavenumber `x`. Equals 1 at the origin.
pub fn jinc(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 8.0 + x2 * x2 / 192.0
    } else {
        2.0 * bessel_j1(x) / x
    }
}

/// Error function of a complex argument.
///
/// Maclaurin series inside |z| < 3, Laplace continued fraction for erfc
/// outside it (right half plane; the left half plane follows from oddness).
pub fn erf_complex(z: Complex64) -> Complex64 {
    if z.re < 0.0 {
        return -erf_complex(-z);
    }
    if z.norm() < 3.0 {
        if z.re >= z.im.abs() {
            erf_series_scaled(z)
        } else {
            erf_series(z)
        }
    } else {
        Complex64::new(1.0, 0.0) - (-z * z).exp() * erfc_continued_fraction(z)
    }
}

fn erf_series(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..200 {
        term *= -z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    sum * FRAC_2_SQRT_PI
}

/// exp(-z^2) * 2/sqrt(pi) * sum_n (2 z^2)^n z / (2n+1)!!. The terms do not
/// cancel near the real axis, unlike the Maclaurin series.
fn erf_series_scaled(z: Complex64) -> Complex64 {
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    for n in 1..400 {
        term *= 2.0 * z2 / (2 * n + 1) as f64;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm() {
            break;
        }
    }
    (-z2).exp() * sum * FRAC_2_SQRT_PI
}

/// `erfc(z) * exp(z^2)` for Re z >= 0, |z| moderately large.
///
/// erfc(z) = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + ...)))),
/// evaluated with the modified Lentz method.
pub(crate) fn erfc_continued_fraction(z: Complex64) -> Complex64 {
    let tiny = Complex64::new(1e-300, 0.0);
    let mut f = z;
    if f.norm() < 1e-300 {
        f = tiny;
    }
    let mut c = f;
    let mut d = Complex64::new(0.0, 0.0);
    for n in 1..20_000 {
        let a = n as f64 / 2.0;
        d = z + d * a;
        if d.norm() < 1e-300 {
            d = tiny;
        }
        c = z + a / c;
        if c.norm() < 1e-300 {
            c = tiny;
        }
        d = d.inv();
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            break;
        }
    }
    f.inv() / PI.sqrt()
}

/// Exponential integral E1(x) for x > 0.
pub fn exp_integral_e1(x: f64) -> f64 {
    assert!(x > 0.0, "E1 requires a positive argument");
    if x <= 1.0 {
        -EULER_GAMMA - x.ln() - e1_series_tail(x)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    }
}

/// `E1(x) + ln(x) + gamma`, analytic at the origin.
pub fn e1_regular_part(x: f64) -> f64 {
    if x <= 1.0 {
        -e1_series_tail(x)
    } else {
        exp_integral_e1(x) + x.ln() + EULER_GAMMA
    }
}

/// sum_{k>=1} (-x)^k / (k k!)
fn e1_series_tail(x: f64) -> f64 {
    let mut fact_term = 1.0;
    let mut sum = 0.0;
    for k in 1..100 {
        fact_term *= -x / k as f64;
        let add = fact_term / k as f64;
        sum += add;
        if add.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Integrate `f` over [a, b] with a composite Gauss-Legendre rule.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize, order: usize) -> f64 {
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        let mid = lo + 0.5 * h;
        let mut s = 0.0;
        for (xi, wi) in x.iter().zip(&w) {
            s += wi * f(mid + 0.5 * h * xi);
        }
        total += 0.5 * h * s;
    }
    total
}
