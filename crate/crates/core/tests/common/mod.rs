//! Reference implementations that share no code with the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// `exp(M)` by scaling, a 30-term Taylor series and squaring.
pub fn taylor_expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.norm();
    let mut s = 0;
    while norm / 2f64.powi(s) > 0.25 {
        s += 1;
    }
    let x = m / 2f64.powi(s);
    let mut term = DMatrix::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &x / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189,
    0.478_628_670_499_366,
    0.568_888_888_888_889,
    0.478_628_670_499_366,
    0.236_926_885_056_189,
];

/// `int_0^h e^{As} G G^T e^{A^T s} ds` by composite 5-point Gauss-Legendre.
pub fn gramian_quadrature(a: &DMatrix<f64>, g: &DMatrix<f64>, h: f64, panels: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let ggt = g * g.transpose();
    let w = h / panels as f64;
    let mut acc = DMatrix::zeros(n, n);
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * w;
        for (x, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let s = mid + 0.5 * w * x;
            let e = taylor_expm(&(a * s));
            acc += (&e * &ggt * e.transpose()) * (0.5 * w * wt);
        }
    }
    acc
}

/// Kalman filter written out with explicit inverses.
pub struct NaiveKf {
    pub x: DVector<f64>,
    pub p: DMatrix<f64>,
}

impl NaiveKf {
    pub fn step(&mut self, y: &DVector<f64>, ad: &DMatrix<f64>, q: &DMatrix<f64>, c: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
        let s = c * &self.p * c.transpose() + m;
        let k = &self.p * c.transpose() * s.try_inverse().unwrap();
        let xf = &self.x + &k * (y - c * &self.x);
        let pf = &self.p - &k * c * &self.p;
        self.x = ad * xf;
        self.p = ad * pf * ad.transpose() + q;
        k
    }
}

/// Solves `V = Phi V Phi^T + W` through the Kronecker system.
pub fn lyapunov_kron(phi: &DMatrix<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = phi.nrows();
    let kron = phi.kronecker(phi);
    let lhs = DMatrix::identity(n * n, n * n) - kron;
    let rhs = DVector::from_column_slice(w.as_slice());
    let v = lhs.lu().solve(&rhs).unwrap();
    DMatrix::from_column_slice(n, n, v.as_slice())
}

/// Residual of the discrete Riccati equation at `P`, relative to `|P|`.
pub fn dare_residual(p: &DMatrix<f64>, ad: &DMatrix<f64>, q: &DMatrix<f64>, c: &DMatrix<f64>, m: &DMatrix<f64>) -> f64 {
    let s = c * p * c.transpose() + m;
    let rhs = ad * (p - p * c.transpose() * s.try_inverse().unwrap() * c * p) * ad.transpose() + q;
    (rhs - p).norm() / p.norm()
}

pub fn rel(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}
