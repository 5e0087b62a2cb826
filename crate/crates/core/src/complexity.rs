//! Per-step FLOP models for the Kalman filter (KF), the information filter
//! (IF) and the low-rank filter (LKF), and the KF/LKF crossover boundary.
//!
//! The polynomials are generic over any numeric type so they can be
//! evaluated exactly (e.g. `num_rational::Ratio<i128>`) or in floating
//! point; the fractional coefficients are never rounded.

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

use crate::error::{Error, Result};

/// Problem sizes for a cost evaluation. `r` and `s` only affect the LKF row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostQuery {
    pub n: u64,
    pub p: u64,
    pub r: u64,
    pub s: u64,
}

impl CostQuery {
    pub fn new(n: u64, p: u64, r: u64, s: u64) -> Result<Self> {
        if n == 0 || p == 0 || s == 0 || r == 0 || r > n {
            return Err(Error::Config(format!(
                "cost query needs n, p, s >= 1 and 1 <= r <= n (got n={n}, p={p}, r={r}, s={s})"
            )));
        }
        Ok(Self { n, p, r, s })
    }

    /// Query for the full-order filters, which ignore `r` and `s`.
    pub fn full(n: u64, p: u64) -> Result<Self> {
        Self::new(n, p, 1, 1)
    }
}

fn k<T: Num + FromPrimitive>(v: u64) -> T {
    T::from_u64(v).expect("cost coefficient fits the numeric type")
}

/// `4n^3 + 7/2 n^2 - 3/2 n + 4 n^2 p + n p + 3 n p^2 + (16 p^3 - 3 p^2 - p) / 6`
pub fn flops_kf<T: Num + FromPrimitive + Copy>(q: &CostQuery) -> T {
    let (n, p) = (k::<T>(q.n), k::<T>(q.p));
    let (two, six) = (k::<T>(2), k::<T>(6));
    k::<T>(4) * n * n * n + k::<T>(7) * n * n / two - k::<T>(3) * n / two
        + k::<T>(4) * n * n * p
        + n * p
        + k::<T>(3) * n * p * p
        + (k::<T>(16) * p * p * p - k::<T>(3) * p * p - p) / six
}

/// `(50 n^3 + 45 n^2 - 23 n) / 6 + 2 n^2 p + n p`
pub fn flops_if<T: Num + FromPrimitive + Copy>(q: &CostQuery) -> T {
    let (n, p) = (k::<T>(q.n), k::<T>(q.p));
    (k::<T>(50) * n * n * n + k::<T>(45) * n * n - k::<T>(23) * n) / k::<T>(6)
        + k::<T>(2) * n * n * p
        + n * p
}

/// `(4r + sr + 2p + 4 - s/2) n^2 + (3r^2 + 4sr^2 - r + 4pr + p - 2 + s/2) n
///  + (5r + 1/2) p^2 + (7r^2 - 3r - 1/2) p + (56 r^3 - 15 r^2 - 5 r) / 6`
pub fn flops_lkf<T: Num + FromPrimitive + Copy>(q: &CostQuery) -> T {
    let (n, p, r, s) = (k::<T>(q.n), k::<T>(q.p), k::<T>(q.r), k::<T>(q.s));
    let two = k::<T>(2);
    let half = T::one() / two;
    let c2 = k::<T>(4) * r + s * r + two * p + k::<T>(4) - s / two;
    let c1 = k::<T>(3) * r * r + k::<T>(4) * s * r * r - r + k::<T>(4) * p * r + p - two + s / two;
    let cp2 = k::<T>(5) * r + half;
    let cp1 = k::<T>(7) * r * r - k::<T>(3) * r - half;
    let c0 = (k::<T>(56) * r * r * r - k::<T>(15) * r * r - k::<T>(5) * r) / k::<T>(6);
    c2 * n * n + c1 * n + cp2 * p * p + cp1 * p + c0
}

type Exact = Ratio<i128>;

fn lkf_not_costlier(n: u64, p: u64, r: u64, s: u64, kf: &Exact) -> bool {
    let q = CostQuery { n, p, r, s };
    flops_lkf::<Exact>(&q) <= *kf
}

/// Largest `r` in `1..=n` with `flops_lkf <= flops_kf`, or `0` if none.
///
/// The LKF polynomial is strictly increasing in `r`, so the boundary is
/// found by bisection. Evaluation is exact rational arithmetic.
pub fn crossover_rank(n: u64, p: u64, s: u64) -> Result<u64> {
    CostQuery::new(n, p, 1, s)?;
    let kf = flops_kf::<Exact>(&CostQuery { n, p, r: 1, s });
    if !lkf_not_costlier(n, p, 1, s, &kf) {
        return Ok(0);
    }
    let (mut lo, mut hi) = (1u64, n);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if lkf_not_costlier(n, p, mid, s, &kf) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(lo)
}

/// `4n / (4 + s)`, the large-`n` rank bound quoted for LKF to beat KF when
/// only the `n^2` terms of LKF are compared with the `n^3` term of KF.
pub fn asymptotic_rank_rule(n: u64, s: u64) -> f64 {
    4.0 * n as f64 / (4.0 + s as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub n: u64,
    pub r_star: u64,
    pub flops_kf: f64,
    /// `None` when no rank makes LKF cheaper (`r_star = 0`).
    pub flops_lkf_at_rstar: Option<f64>,
}

/// Crossover rank over a grid of state dimensions for one `(p, s)`.
pub fn boundary_curve(p: u64, s: u64, n_grid: &[u64]) -> Result<Vec<BoundaryPoint>> {
    if n_grid.is_empty() {
        return Err(Error::Config("empty state-dimension grid".into()));
    }
    n_grid
        .iter()
        .map(|&n| {
            let r_star = crossover_rank(n, p, s)?;
            let kf = flops_kf::<Exact>(&CostQuery { n, p, r: 1, s });
            let lkf = (r_star > 0).then(|| flops_lkf::<Exact>(&CostQuery { n, p, r: r_star, s }));
            Ok(BoundaryPoint {
                n,
                r_star,
                flops_kf: ratio_to_f64(&kf),
                flops_lkf_at_rstar: lkf.as_ref().map(ratio_to_f64),
            })
        })
        .collect()
}

fn ratio_to_f64(x: &Exact) -> f64 {
    x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap()
}
