use lowrank_kalman::complexity::{crossover_rank, flops_kf, flops_lkf, CostQuery};
use lowrank_kalman::harness::io::{matrix_to_string, parse_matrix};
use lowrank_kalman::lowrank::{lkf_gain, lkf_gain_direct};
use lowrank_kalman::numerics::{
    expm, noise_gramian, orthonormalize, principal_angles, psd_sqrt, stiefel_deviation,
};
use lowrank_kalman::oja::{oja_step, StiefelPoint};
use nalgebra::DMatrix;
use num_rational::Ratio;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-scale..scale, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn square(max: usize, scale: f64) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max).prop_flat_map(move |n| matrix(n, n, scale))
}

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(n, n, 1.0).prop_map(move |x| &x * x.transpose() + DMatrix::identity(n, n) * 0.1)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expm_inverse(a in square(6, 2.0)) {
        let n = a.nrows();
        let prod = expm(&a).unwrap() * expm(&(-&a)).unwrap();
        prop_assert!((prod - DMatrix::identity(n, n)).norm() < 1e-10);
    }

    #[test]
    fn gramian_is_symmetric_psd(a in square(5, 2.0), h in 0.001f64..0.5) {
        let n = a.nrows();
        let q = noise_gramian(&a, &DMatrix::identity(n, n), h).unwrap();
        prop_assert!((&q - q.transpose()).norm() <= 1e-14 * q.norm());
        let min = q.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min > 0.0);
    }

    #[test]
    fn sqrt_squares_back(x in square(6, 1.0)) {
        let q = &x * x.transpose();
        let s = psd_sqrt(&q).unwrap();
        prop_assert!((&s * &s - &q).norm() <= 1e-10 * q.norm().max(1.0));
        prop_assert!((&s - s.transpose()).norm() <= 1e-12 * s.norm().max(1.0));
    }

    #[test]
    fn orthonormalized_frames(m in (2usize..8).prop_flat_map(|n| (1..=n).prop_flat_map(move |r| matrix(n, r, 1.0)))) {
        if let Ok(q) = orthonormalize(&m) {
            prop_assert!(stiefel_deviation(&q) < 1e-12);
            let ang = principal_angles(&q, &q).unwrap();
            prop_assert!(ang.iter().all(|&t| t < 1e-7));
            let r = q.transpose() * &m;
            for i in 0..r.nrows() {
                prop_assert!(r[(i, i)] > 0.0);
            }
        }
    }

    #[test]
    fn angles_are_symmetric(u in matrix(6, 2, 1.0), v in matrix(6, 2, 1.0)) {
        if let (Ok(u), Ok(v)) = (orthonormalize(&u), orthonormalize(&v)) {
            let a = principal_angles(&u, &v).unwrap();
            let b = principal_angles(&v, &u).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-10);
                prop_assert!(*x >= 0.0 && *x <= std::f64::consts::FRAC_PI_2 + 1e-12);
            }
        }
    }

    #[test]
    fn oja_step_stays_on_stiefel(a in matrix(6, 6, 1.0), r in 1usize..=6) {
        let pt = StiefelPoint::leading(6, r, 1.0, 1).unwrap();
        let dt = 0.4 / a.norm().max(1e-3);
        let next = oja_step(&pt, &a, dt).unwrap();
        prop_assert!(stiefel_deviation(next.frame()) < 1e-12);
    }

    #[test]
    fn smw_equals_direct(r in spd(3), c in matrix(10, 3, 1.0), m in spd(10)) {
        let m_inv = m.clone().try_inverse().unwrap();
        let a = lkf_gain(&r, &c, &m_inv).unwrap();
        let b = lkf_gain_direct(&r, &c, &m).unwrap();
        prop_assert!((&a - &b).norm() <= 1e-9 * b.norm().max(1.0));
    }

    #[test]
    fn lkf_cost_grows_with_rank(n in 2u64..400, p in 1u64..200, s in 1u64..10) {
        let mut prev = Ratio::<i128>::from_integer(0);
        for r in 1..=n.min(40) {
            let c: Ratio<i128> = flops_lkf(&CostQuery::new(n, p, r, s).unwrap());
            prop_assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn crossover_brackets_the_boundary(n in 2u64..2000, p in 1u64..200) {
        let r = crossover_rank(n, p, 4).unwrap();
        let kf: Ratio<i128> = flops_kf(&CostQuery::full(n, p).unwrap());
        if r > 0 {
            prop_assert!(flops_lkf::<Ratio<i128>>(&CostQuery::new(n, p, r, 4).unwrap()) < kf);
        }
        if r < n {
            prop_assert!(flops_lkf::<Ratio<i128>>(&CostQuery::new(n, p, r + 1, 4).unwrap()) >= kf);
        }
    }

    #[test]
    fn csv_round_trip(m in (1usize..5, 1usize..5).prop_flat_map(|(r, c)| matrix(r, c, 1e6))) {
        prop_assert_eq!(parse_matrix(&matrix_to_string(&m)).unwrap(), m);
    }
}
