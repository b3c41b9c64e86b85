use fspif::dirichlet::{harmonic_potential, DiskBoundary};
use fspif::exec::Execution;
use fspif::field::{FieldSolveConfig, FieldSolver};
use fspif::nufft::{relative_l2, ModeGrid, NufftPlan};
use fspif::shapes::ShapeFunction;
use num_complex::Complex64;
use proptest::prelude::*;

fn points(n: usize, half: f64) -> impl Strategy<Value = Vec<[f64; 2]>> {
    prop::collection::vec(prop::array::uniform2(-half..half), n)
}

fn strengths(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| Complex64::new(a, b)), n)
}

fn plan() -> NufftPlan {
    NufftPlan::new(ModeGrid::new(16, 2).unwrap(), 1e-12).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn type1_is_linear(x in points(40, 0.5), a in strengths(40), b in strengths(40), s in -3.0..3.0f64) {
        let p = plan();
        let mix: Vec<Complex64> = a.iter().zip(&b).map(|(u, v)| u * s + v).collect();
        let fa = p.type1(&x, &a).unwrap();
        let fb = p.type1(&x, &b).unwrap();
        let expect: Vec<Complex64> = fa.iter().zip(&fb).map(|(u, v)| u * s + v).collect();
        prop_assert!(relative_l2(&p.type1(&x, &mix).unwrap(), &expect) < 1e-12);
    }

    #[test]
    fn translation_multiplies_by_a_phase(x in points(30, 0.4), c in strengths(30), shift in prop::array::uniform2(-0.1..0.1f64)) {
        let p = plan();
        let moved: Vec<[f64; 2]> = x.iter().map(|q| [q[0] + shift[0], q[1] + shift[1]]).collect();
        let f = p.type1(&x, &c).unwrap();
        let g = p.type1(&moved, &c).unwrap();
        let grid = *p.grid();
        let expect: Vec<Complex64> = (0..grid.mode_count())
            .map(|i| {
                let k = grid.k_vector(i);
                f[i] * Complex64::from_polar(1.0, -(k[0] * shift[0] + k[1] * shift[1]))
            })
            .collect();
        prop_assert!(relative_l2(&g, &expect) < 1e-11);
    }

    #[test]
    fn real_strengths_give_conjugate_symmetric_modes(x in points(30, 0.5), w in prop::collection::vec(-1.0..1.0f64, 30)) {
        let p = plan();
        let c: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let f = p.type1(&x, &c).unwrap();
        let scale = f.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let grid = *p.grid();
        for i in 0..grid.mode_count() {
            if let Some(j) = grid.mirror(i) {
                prop_assert!((f[i] - f[j].conj()).norm() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn free_space_field_is_translation_covariant(x in points(12, 0.3), shift in prop::array::uniform2(-0.15..0.15f64)) {
        let shape = ShapeFunction::radial_bspline(2, 1.0 / 24.0).unwrap();
        let solver = FieldSolver::new(FieldSolveConfig::new(24, shape, 1.5).unwrap(), Execution::Parallel).unwrap();
        let moved: Vec<[f64; 2]> = x.iter().map(|q| [q[0] + shift[0], q[1] + shift[1]]).collect();
        let e = solver.electric_field(&solver.deposit(&x).unwrap(), 0.1, &x).unwrap();
        let f = solver.electric_field(&solver.deposit(&moved).unwrap(), 0.1, &moved).unwrap();
        let scale = e.iter().map(|v| v[0].hypot(v[1])).fold(1e-300, f64::max);
        for (a, b) in e.iter().zip(&f) {
            // a uniform shift only multiplies the modes by a phase
            prop_assert!((a[0] - b[0]).hypot(a[1] - b[1]) <= 1e-10 * scale, "{a:?} {b:?}");
        }
    }

    #[test]
    fn harmonic_extension_is_linear(u in prop::collection::vec(-1.0..1.0f64, 32), v in prop::collection::vec(-1.0..1.0f64, 32), x in prop::array::uniform2(-0.3..0.3f64)) {
        let disk = DiskBoundary::new(0.5, 32).unwrap();
        let sum: Vec<f64> = u.iter().zip(&v).map(|(a, b)| 2.0 * a - b).collect();
        let lhs = harmonic_potential(x, &disk, &sum).unwrap();
        let rhs = 2.0 * harmonic_potential(x, &disk, &u).unwrap() - harmonic_potential(x, &disk, &v).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-13);
    }
}
