use nalgebra::DMatrix;

use super::{ensure_finite, ensure_square};
use crate::error::{Error, Result};
use crate::Real;

// Pade numerator coefficients b_0..b_m.
const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// Backward-error bounds on the 1-norm for each degree.
#[allow(clippy::excessive_precision)]
const THETA_DOUBLE: [(usize, f64); 5] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
    (13, 5.371920351148152e0),
];
#[allow(clippy::excessive_precision)]
const THETA_SINGLE: [(usize, f64); 3] = [
    (3, 4.258730016922831e-1),
    (5, 1.880152677804762e0),
    (7, 3.925724783138660e0),
];

fn norm1<T: Real>(m: &DMatrix<T>) -> T {
    m.column_iter()
        .map(|c| c.iter().fold(T::zero(), |a, x| a + x.abs()))
        .fold(T::zero(), |a, b| a.max(b))
}

/// Matrix exponential by scaling and squaring around a diagonal Pade
/// approximant (degree chosen from the 1-norm).
pub fn expm<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    ensure_square(m, "expm input")?;
    ensure_finite(m, "expm input")?;
    let n = m.nrows();
    let norm = norm1(m);
    if norm == T::zero() {
        return Ok(DMatrix::identity(n, n));
    }

    let double = T::default_epsilon() < T::lit(1e-10);
    let table: &[(usize, f64)] = if double { &THETA_DOUBLE } else { &THETA_SINGLE };

    for &(deg, theta) in &table[..table.len() - 1] {
        if norm <= T::lit(theta) {
            return pade(m, deg);
        }
    }
    let (deg, theta) = table[table.len() - 1];
    let ratio = (norm / T::lit(theta)).as_f64();
    let s = if ratio > 1.0 { ratio.log2().ceil() as i32 } else { 0 };
    let scaled = m * T::lit(2f64.powi(-s));
    let mut e = pade(&scaled, deg)?;
    for _ in 0..s {
        e = &e * &e;
    }
    Ok(e)
}

fn pade<T: Real>(a: &DMatrix<T>, deg: usize) -> Result<DMatrix<T>> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let c = |v: f64| T::lit(v);
    let a2 = a * a;
    let (u, v) = match deg {
        13 => {
            let b = &B13;
            let a4 = &a2 * &a2;
            let a6 = &a4 * &a2;
            let inner_u = &a6 * (&a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]))
                + &a6 * c(b[7])
                + &a4 * c(b[5])
                + &a2 * c(b[3])
                + &id * c(b[1]);
            let u = a * inner_u;
            let v = &a6 * (&a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]))
                + &a6 * c(b[6])
                + &a4 * c(b[4])
                + &a2 * c(b[2])
                + &id * c(b[0]);
            (u, v)
        }
        3 | 5 | 7 | 9 => {
            let b: &[f64] = match deg {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            // even powers A^0, A^2, A^4, ...
            let mut pow = id.clone();
            let mut odd = DMatrix::<T>::zeros(n, n);
            let mut even = DMatrix::<T>::zeros(n, n);
            for k in 0..=deg / 2 {
                even += &pow * c(b[2 * k]);
                odd += &pow * c(b[2 * k + 1]);
                pow = &pow * &a2;
            }
            (a * odd, even)
        }
        _ => unreachable!("unsupported Pade degree"),
    };
    let p = &v + &u;
    let q = &v - &u;
    q.lu()
        .solve(&p)
        .ok_or_else(|| Error::Domain("Pade denominator is singular".into()))
}
