use nalgebra::{Complex, DMatrix, Schur};

use super::eig::{eigenvalues_sorted, gap, splits_pair};
use super::{ensure_finite, ensure_square};
use crate::error::{Error, Result};
use crate::Real;

/// `|U^T U - I|_F`.
pub fn stiefel_deviation<T: Real>(u: &DMatrix<T>) -> T {
    let r = u.ncols();
    (u.transpose() * u - DMatrix::<T>::identity(r, r)).norm()
}

/// Thin QR with the diagonal of `R` made nonnegative. Fails when a pivot
/// is negligible relative to the input norm (the columns collapsed).
pub fn orthonormalize<T: Real>(m: &DMatrix<T>) -> Result<DMatrix<T>> {
    let (n, r) = m.shape();
    if r == 0 || r > n {
        return Err(Error::Dimension(format!("cannot orthonormalize a {n}x{r} frame")));
    }
    let scale = m.norm();
    let qr = m.clone().qr();
    let mut q = qr.q();
    let rr = qr.r();
    let floor = T::default_epsilon() * T::lit(16.0) * T::from_usize(n).unwrap() * scale;
    for i in 0..r {
        let d = rr[(i, i)];
        if !(d.abs() > floor) {
            return Err(Error::StepSize { pivot: d.as_f64() });
        }
        if d < T::zero() {
            q.column_mut(i).neg_mut();
        }
    }
    Ok(q)
}

fn ensure_orthonormal<T: Real>(u: &DMatrix<T>) -> Result<()> {
    let dev = stiefel_deviation(u);
    if dev > T::tol(1e-8) {
        return Err(Error::NotOrthonormal { deviation: dev.as_f64() });
    }
    Ok(())
}

/// Principal angles between `span(U)` and `span(V)`, descending.
///
/// Small angles come from the sines (singular values of `V - U U^T V`),
/// large ones from the cosines, which keeps both ends accurate.
pub fn principal_angles<T: Real>(u: &DMatrix<T>, v: &DMatrix<T>) -> Result<Vec<T>> {
    if u.shape() != v.shape() {
        return Err(Error::Dimension(format!(
            "frames differ in shape: {:?} vs {:?}",
            u.shape(),
            v.shape()
        )));
    }
    ensure_orthonormal(u)?;
    ensure_orthonormal(v)?;
    let cross = u.transpose() * v;
    let mut cos: Vec<T> = cross.clone().singular_values().iter().copied().collect();
    cos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sin: Vec<T> = (v - u * &cross).singular_values().iter().copied().collect();
    sin.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let half = T::lit(0.5);
    Ok(cos
        .iter()
        .zip(&sin)
        .map(|(&c, &s)| {
            let c = c.min(T::one()).max(-T::one());
            if c * c >= half {
                s.min(T::one()).asin()
            } else {
                c.acos()
            }
        })
        .collect())
}

/// Orthonormal real basis of the invariant subspace belonging to the `r`
/// eigenvalues with largest real part, using the default minimum gap
/// `1e-10 max(1, |A|_F)`.
pub fn dominant_invariant_subspace<T: Real>(a: &DMatrix<T>, r: usize) -> Result<DMatrix<T>> {
    let min_gap = T::tol(1e-10) * a.norm().max(T::one());
    dominant_invariant_subspace_with_gap(a, r, min_gap)
}

/// As [`dominant_invariant_subspace`] with a caller-chosen minimum gap
/// `Re l_r - Re l_{r+1}`.
///
/// Computed from a complex Schur form reordered so the selected
/// eigenvalues lead; conjugate pairs stay together, so the leading Schur
/// vectors span a conjugation-closed subspace whose real and imaginary
/// parts yield the real basis.
pub fn dominant_invariant_subspace_with_gap<T: Real>(
    a: &DMatrix<T>,
    r: usize,
    min_gap: T,
) -> Result<DMatrix<T>> {
    ensure_square(a, "A")?;
    ensure_finite(a, "A")?;
    let n = a.nrows();
    if r == 0 || r > n {
        return Err(Error::Config(format!("rank {r} outside 1..={n}")));
    }
    if r == n {
        return Ok(DMatrix::identity(n, n));
    }
    let vals = eigenvalues_sorted(a)?;
    if splits_pair(&vals, r, a.norm()) {
        return Err(Error::ConjugatePairSplit { rank: r });
    }
    let g = gap(&vals, r).expect("1 <= r < n");
    if !(g > min_gap) {
        return Err(Error::GapViolation { rank: r, gap: g.as_f64() });
    }
    let threshold = (vals[r - 1].re + vals[r].re) * T::lit(0.5);

    let ac: DMatrix<Complex<T>> = a.map(|x| Complex::new(x, T::zero()));
    let max_iter = 1000 * n.max(10);
    let schur = Schur::try_new(ac, T::default_epsilon(), max_iter)
        .ok_or(Error::Eigen { iterations: max_iter })?;
    let (mut q, mut t) = schur.unpack();

    // stable partition of the diagonal by adjacent swaps
    let mut pos = 0;
    for j in 0..n {
        if t[(j, j)].re > threshold {
            for k in (pos..j).rev() {
                swap_adjacent(&mut t, &mut q, k);
            }
            pos += 1;
        }
    }
    if pos != r {
        return Err(Error::GapViolation { rank: r, gap: g.as_f64() });
    }

    let lead = q.columns(0, r);
    let mut parts = DMatrix::<T>::zeros(n, 2 * r);
    for j in 0..r {
        for i in 0..n {
            parts[(i, j)] = lead[(i, j)].re;
            parts[(i, r + j)] = lead[(i, j)].im;
        }
    }
    let svd = parts.svd(true, false);
    let u = svd.u.expect("requested U");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&x, &y| {
        svd.singular_values[y]
            .partial_cmp(&svd.singular_values[x])
            .unwrap()
            .then(x.cmp(&y))
    });
    let mut basis = DMatrix::<T>::zeros(n, r);
    for (c, &k) in idx.iter().take(r).enumerate() {
        basis.set_column(c, &u.column(k));
    }
    orthonormalize(&basis)
}

/// Swaps diagonal entries `k` and `k+1` of the upper-triangular `t`,
/// updating the unitary `q` so that `q t q^H` is unchanged.
fn swap_adjacent<T: Real>(t: &mut DMatrix<Complex<T>>, q: &mut DMatrix<Complex<T>>, k: usize) {
    let n = t.nrows();
    let (t11, t12, t22) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k + 1)]);
    // eigenvector of the 2x2 block for t22
    let mut v0 = t12;
    let mut v1 = t22 - t11;
    let nv = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
    if nv == T::zero() {
        return;
    }
    let inv = Complex::new(T::one() / nv, T::zero());
    v0 *= inv;
    v1 *= inv;
    // G = [[v0, -conj(v1)], [v1, conj(v0)]] is unitary; apply t <- G^H t G
    let (w0, w1) = (-v1.conj(), v0.conj());
    for j in 0..n {
        let (x, y) = (t[(k, j)], t[(k + 1, j)]);
        t[(k, j)] = v0.conj() * x + v1.conj() * y;
        t[(k + 1, j)] = w0.conj() * x + w1.conj() * y;
    }
    for i in 0..n {
        let (x, y) = (t[(i, k)], t[(i, k + 1)]);
        t[(i, k)] = x * v0 + y * v1;
        t[(i, k + 1)] = x * w0 + y * w1;
    }
    for i in 0..n {
        let (x, y) = (q[(i, k)], q[(i, k + 1)]);
        q[(i, k)] = x * v0 + y * v1;
        q[(i, k + 1)] = x * w0 + y * w1;
    }
    t[(k + 1, k)] = Complex::new(T::zero(), T::zero());
}
