//! Seeded test systems with a prescribed spectrum.
//!
//! `A = Q B Q^T` with `Q` a random orthogonal matrix and `B` block upper
//! triangular: `1 x 1` blocks for real eigenvalues, `[[a, b], [-b, a]]` for a
//! pair `a +- bi`, optional random coupling above the blocks. The spectrum of
//! `A` is exactly the prescribed one, so the number of unstable modes and the
//! spectral gaps are known by construction.

use nalgebra::{Complex, DMatrix};
use rand::Rng;

use super::rng::{normal, normal_matrix, system_rng};
use crate::error::{Error, Result};
use crate::model::ContinuousModel;
use crate::numerics::orthonormalize;

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R` fixed).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Result<DMatrix<f64>> {
    orthonormalize(&normal_matrix(rng, n, n))
}

/// Block matrix with the given eigenvalues. Complex entries must come in
/// adjacent conjugate pairs (positive imaginary part first).
pub fn block_matrix(eigenvalues: &[Complex<f64>]) -> Result<DMatrix<f64>> {
    let n = eigenvalues.len();
    let mut b = DMatrix::zeros(n, n);
    let mut i = 0;
    while i < n {
        let l = eigenvalues[i];
        if l.im == 0.0 {
            b[(i, i)] = l.re;
            i += 1;
            continue;
        }
        if i + 1 >= n || eigenvalues[i + 1] != l.conj() {
            return Err(Error::Config(format!("eigenvalue {l} has no adjacent conjugate")));
        }
        b[(i, i)] = l.re;
        b[(i + 1, i + 1)] = l.re;
        b[(i, i + 1)] = l.im;
        b[(i + 1, i)] = -l.im;
        i += 2;
    }
    Ok(b)
}

/// `Q (B + N) Q^T` with `N` random above the diagonal blocks, scaled by
/// `coupling` (zero gives a normal matrix).
pub fn placed_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    eigenvalues: &[Complex<f64>],
    coupling: f64,
) -> Result<DMatrix<f64>> {
    let n = eigenvalues.len();
    let mut b = block_matrix(eigenvalues)?;
    if coupling != 0.0 {
        let block_start: Vec<usize> = block_starts(eigenvalues);
        for (bi, &s) in block_start.iter().enumerate() {
            let end = block_start.get(bi + 1).copied().unwrap_or(n);
            for i in s..end {
                for j in end..n {
                    b[(i, j)] = coupling * normal(rng);
                }
            }
        }
    }
    let q = random_orthogonal(rng, n)?;
    Ok(&q * b * q.transpose())
}

fn block_starts(eigenvalues: &[Complex<f64>]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < eigenvalues.len() {
        out.push(i);
        i += if eigenvalues[i].im == 0.0 { 1 } else { 2 };
    }
    out
}

/// `n` sorted distinct reals in `[lo, hi]`, consecutive values at least
/// `min_gap` apart.
fn spread<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64, min_gap: f64) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let slack = (hi - lo) - min_gap * (n as f64 - 1.0);
    assert!(slack >= 0.0, "interval too narrow for {n} values");
    let mut u: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * slack).collect();
    u.sort_by(|a, b| b.total_cmp(a));
    u.iter()
        .enumerate()
        .map(|(i, x)| lo + x + min_gap * (n - 1 - i) as f64)
        .collect()
}

/// The boundedness example: `n = 10`, six unstable real modes in
/// `[0.2, 1.0]`, four stable ones in `[-2, -0.5]`, `C = [I_4 0]`, `G = I`,
/// `H = I`, `h = 0.01`.
pub fn boundedness_model(seed: u64) -> Result<ContinuousModel<f64>> {
    let mut rng = system_rng(seed);
    let mut eig = spread(&mut rng, 6, 0.2, 1.0, 0.05);
    eig.extend(spread(&mut rng, 4, -2.0, -0.5, 0.1));
    let eig: Vec<Complex<f64>> = eig.into_iter().map(|x| Complex::new(x, 0.0)).collect();
    let a = placed_matrix(&mut rng, &eig, 0.0)?;
    ContinuousModel::new(a, DMatrix::identity(10, 10), DMatrix::identity(4, 10), DMatrix::identity(4, 4), 0.01)
}

/// The rank-sweep example: symmetric `A` of size `n` with `unstable`
/// positive eigenvalues in `[0.05, 1]` and the rest in `[-1.5, -0.05]`,
/// `C = [I_p 0]`, `G = I`, `H = I`.
pub fn symmetric_model(seed: u64, n: usize, unstable: usize, p: usize, period: f64) -> Result<ContinuousModel<f64>> {
    if unstable > n || p == 0 || p > n {
        return Err(Error::Config(format!("cannot build n={n}, r'={unstable}, p={p}")));
    }
    let mut rng = system_rng(seed);
    let mut eig = spread(&mut rng, unstable, 0.05, 1.0, 0.01);
    eig.extend(spread(&mut rng, n - unstable, -1.5, -0.05, 0.01));
    let eig: Vec<Complex<f64>> = eig.into_iter().map(|x| Complex::new(x, 0.0)).collect();
    let a = placed_matrix(&mut rng, &eig, 0.0)?;
    let a = (&a + a.transpose()) * 0.5;
    ContinuousModel::new(a, DMatrix::identity(n, n), DMatrix::identity(p, n), DMatrix::identity(p, p), period)
}

/// A random instance for the stability checks.
#[derive(Debug, Clone)]
pub struct Instance {
    pub model: ContinuousModel<f64>,
    pub unstable: usize,
    pub eigenvalues: Vec<Complex<f64>>,
}

/// Non-normal system of size `n` with `unstable` distinct real unstable
/// modes in `[0.1, 1.5]` (spacing at least 0.05), stable modes with real part
/// in `[-3, -0.3]` of which about half form complex pairs, and a random
/// `p x n` output matrix. `G` and `H` are identities, `h = 0.05`.
pub fn random_instance(seed: u64, n: usize, unstable: usize, p: usize) -> Result<Instance> {
    if unstable > n || p == 0 {
        return Err(Error::Config(format!("cannot build n={n}, r'={unstable}, p={p}")));
    }
    let mut rng = system_rng(seed);
    let mut eig: Vec<Complex<f64>> = spread(&mut rng, unstable, 0.1, 1.5, 0.05)
        .into_iter()
        .map(|x| Complex::new(x, 0.0))
        .collect();
    let stable = n - unstable;
    let pairs = stable / 4;
    let reals = spread(&mut rng, stable - 2 * pairs, -3.0, -0.3, 0.02);
    let pair_re = spread(&mut rng, pairs, -3.0, -0.3, 0.0);
    let mut tail: Vec<Complex<f64>> = reals.into_iter().map(|x| Complex::new(x, 0.0)).collect();
    for re in pair_re {
        let im = 0.2 + rng.random::<f64>();
        tail.push(Complex::new(re, im));
        tail.push(Complex::new(re, -im));
    }
    // keep pairs adjacent and order blocks by descending real part
    let mut blocks: Vec<Vec<Complex<f64>>> = Vec::new();
    let mut i = 0;
    while i < tail.len() {
        if tail[i].im == 0.0 {
            blocks.push(vec![tail[i]]);
            i += 1;
        } else {
            blocks.push(vec![tail[i], tail[i + 1]]);
            i += 2;
        }
    }
    blocks.sort_by(|x, y| y[0].re.total_cmp(&x[0].re));
    eig.extend(blocks.into_iter().flatten());
    let a = placed_matrix(&mut rng, &eig, 0.3)?;
    let c = normal_matrix(&mut rng, p, n);
    let model = ContinuousModel::new(a, DMatrix::identity(n, n), c, DMatrix::identity(p, p), 0.05)?;
    Ok(Instance {
        model,
        unstable,
        eigenvalues: eig,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{eigenvalues_sorted, spectrum_distance, stiefel_deviation};

    #[test]
    fn orthogonal_is_orthogonal() {
        let q = random_orthogonal(&mut system_rng(1), 7).unwrap();
        assert!(stiefel_deviation(&q) < 1e-13);
    }

    #[test]
    fn placed_spectrum_is_exact() {
        let eig = [
            Complex::new(0.5, 0.0),
            Complex::new(-1.0, 2.0),
            Complex::new(-1.0, -2.0),
            Complex::new(-3.0, 0.0),
        ];
        let a = placed_matrix(&mut system_rng(3), &eig, 0.5).unwrap();
        assert!(spectrum_distance(&eigenvalues_sorted(&a).unwrap(), &eig) < 1e-10);
    }

    #[test]
    fn instance_counts() {
        let inst = random_instance(11, 12, 5, 3).unwrap();
        let vals = eigenvalues_sorted(inst.model.a()).unwrap();
        assert_eq!(vals.iter().filter(|l| l.re >= 0.0).count(), 5);
        assert!(vals[4].re - vals[5].re > 0.3);
    }

    #[test]
    fn spread_respects_gap() {
        let v = spread(&mut system_rng(2), 6, 0.2, 1.0, 0.05);
        assert!(v.windows(2).all(|w| w[0] - w[1] >= 0.05 - 1e-15));
        assert!(v[0] <= 1.0 && v[5] >= 0.2);
    }
}
