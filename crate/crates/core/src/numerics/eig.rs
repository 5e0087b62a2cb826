use std::cmp::Ordering;

use nalgebra::{Complex, ComplexField, DMatrix, DVector, Schur};

use super::{ensure_finite, ensure_square};
use crate::error::{Error, Result};
use crate::Real;

/// Eigenvalues with `|Re|` (or `||l| - 1|`) below this are flagged as
/// borderline for the instability counts.
pub const BORDERLINE_TOL: f64 = 1e-9;

/// Full eigen-structure of a square real matrix.
///
/// Eigenvalues are ordered by descending real part, ties broken by
/// descending imaginary part and then by position in the Schur form, so
/// repeated calls on the same matrix give the same order.
#[derive(Debug, Clone)]
pub struct Spectrum<T: Real> {
    pub eigenvalues: Vec<Complex<T>>,
    /// Unit-norm eigenvectors, column `i` paired with `eigenvalues[i]`.
    pub eigenvectors: DMatrix<Complex<T>>,
    /// Number of eigenvalues with `Re >= 0`.
    pub hurwitz_unstable_count: usize,
    /// Number of eigenvalues with `|l| >= 1`.
    pub schur_unstable_count: usize,
    /// Smallest admissible rank: the first `r >= max(1, hurwitz count)` with
    /// a strict gap `Re l_r > Re l_{r+1}` that does not split a conjugate pair.
    pub gap_at: Option<usize>,
    /// Some eigenvalue sits within [`BORDERLINE_TOL`] of a stability boundary.
    pub borderline: bool,
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `Re l_r - Re l_{r+1}` for 1-based `r` in `1..n`.
    pub fn gap(&self, r: usize) -> Option<T> {
        gap(&self.eigenvalues, r)
    }

    pub fn spectral_radius(&self) -> T {
        self.eigenvalues
            .iter()
            .map(|l| l.modulus())
            .fold(T::zero(), |a, b| a.max(b))
    }
}

pub(crate) fn gap<T: Real>(vals: &[Complex<T>], r: usize) -> Option<T> {
    if r == 0 || r >= vals.len() {
        return None;
    }
    Some(vals[r - 1].re - vals[r].re)
}

/// True when ranks `1..=r` would separate `l_r` from its conjugate.
pub(crate) fn splits_pair<T: Real>(vals: &[Complex<T>], r: usize, scale: T) -> bool {
    if r == 0 || r >= vals.len() {
        return false;
    }
    let (a, b) = (vals[r - 1], vals[r]);
    let tol = T::tol(1e-8) * scale.max(T::one());
    a.im.abs() > tol && (a - b.conj()).modulus() <= tol
}

fn order<T: Real>(a: &(usize, Complex<T>), b: &(usize, Complex<T>)) -> Ordering {
    b.1.re
        .partial_cmp(&a.1.re)
        .unwrap_or(Ordering::Equal)
        .then(b.1.im.partial_cmp(&a.1.im).unwrap_or(Ordering::Equal))
        .then(a.0.cmp(&b.0))
}

/// Eigenvalues only, in the same order as [`eig_sorted`].
pub fn eigenvalues_sorted<T: Real>(m: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    ensure_square(m, "eigenvalue input")?;
    ensure_finite(m, "eigenvalue input")?;
    let n = m.nrows();
    let max_iter = 1000 * n.max(10);
    let schur = Schur::try_new(m.clone(), T::default_epsilon(), max_iter)
        .ok_or(Error::Eigen { iterations: max_iter })?;
    let vals = schur.complex_eigenvalues();
    let mut indexed: Vec<(usize, Complex<T>)> = vals.iter().copied().enumerate().collect();
    indexed.sort_by(order);
    Ok(indexed.into_iter().map(|(_, l)| l).collect())
}

pub fn spectral_radius<T: Real>(m: &DMatrix<T>) -> Result<T> {
    Ok(eigenvalues_sorted(m)?
        .iter()
        .map(|l| l.modulus())
        .fold(T::zero(), |a, b| a.max(b)))
}

/// Sorted spectrum with eigenvectors and instability counts.
pub fn eig_sorted<T: Real>(m: &DMatrix<T>) -> Result<Spectrum<T>> {
    let vals = eigenvalues_sorted(m)?;
    let n = vals.len();
    let scale = m.norm();

    let mut vecs = DMatrix::<Complex<T>>::zeros(n, n);
    for i in 0..n {
        let prior: Vec<usize> = (0..i)
            .filter(|&j| (vals[j] - vals[i]).modulus() <= T::tol(1e-8) * scale.max(T::one()))
            .collect();
        let v = inverse_iteration(m, vals[i], &vecs, &prior, i, scale);
        vecs.set_column(i, &v);
    }

    let hurwitz = vals.iter().filter(|l| l.re >= T::zero()).count();
    let schur = vals.iter().filter(|l| l.modulus() >= T::one()).count();
    let edge = T::lit(BORDERLINE_TOL);
    let borderline = vals
        .iter()
        .any(|l| l.re.abs() < edge || (l.modulus() - T::one()).abs() < edge);
    let min_gap = T::tol(1e-10) * scale.max(T::one());
    let gap_at = (hurwitz.max(1)..n)
        .find(|&r| gap(&vals, r).is_some_and(|g| g > min_gap) && !splits_pair(&vals, r, scale));

    Ok(Spectrum {
        eigenvalues: vals,
        eigenvectors: vecs,
        hurwitz_unstable_count: hurwitz,
        schur_unstable_count: schur,
        gap_at,
        borderline,
    })
}

/// Shifted inverse iteration in complex arithmetic. `prior` lists earlier
/// columns of `found` that share this eigenvalue; the iterate is kept
/// orthogonal to them so semisimple multiple eigenvalues get independent
/// vectors.
fn inverse_iteration<T: Real>(
    m: &DMatrix<T>,
    lambda: Complex<T>,
    found: &DMatrix<Complex<T>>,
    prior: &[usize],
    index: usize,
    scale: T,
) -> DVector<Complex<T>> {
    let n = m.nrows();
    let mc: DMatrix<Complex<T>> = m.map(|x| Complex::new(x, T::zero()));
    let mut start = DVector::<Complex<T>>::from_fn(n, |k, _| {
        Complex::new(T::one() / T::from_usize(k + 1 + (index % 7)).unwrap(), T::zero())
    });
    start[index % n] += Complex::new(T::one(), T::zero());

    let deflate = |v: &mut DVector<Complex<T>>| {
        for &j in prior {
            let q = found.column(j);
            let proj = q.dotc(v);
            *v -= q * proj;
        }
    };

    let mut delta = T::default_epsilon() * T::lit(1e3) * scale.max(T::one());
    let mut x = start.clone();
    for _attempt in 0..8 {
        let shift = lambda + Complex::new(delta, delta);
        let mut b = mc.clone();
        for k in 0..n {
            b[(k, k)] -= shift;
        }
        let lu = b.lu();
        x = start.clone();
        deflate(&mut x);
        let mut ok = true;
        for _ in 0..3 {
            match lu.solve(&x) {
                Some(y) if y.iter().all(|c| c.re.is_finite() && c.im.is_finite()) => {
                    x = y;
                    deflate(&mut x);
                    let nrm = x.norm();
                    if nrm == T::zero() {
                        ok = false;
                        break;
                    }
                    x /= Complex::new(nrm, T::zero());
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            break;
        }
        delta *= T::lit(10.0);
    }

    // phase: largest component real and positive
    let mut best = 0;
    for k in 1..n {
        if x[k].modulus() > x[best].modulus() {
            best = k;
        }
    }
    let pivot = x[best];
    if pivot.modulus() > T::zero() {
        let phase = pivot.conj() / Complex::new(pivot.modulus(), T::zero());
        x *= phase;
        x[best] = Complex::new(x[best].re, T::zero());
    }
    x
}

/// Largest distance in a greedy nearest-neighbour matching of two eigenvalue
/// multisets; `+inf` when the sizes differ.
pub fn spectrum_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    if a.len() != b.len() {
        return T::max_value().unwrap_or(T::one() / T::zero());
    }
    let mut used = vec![false; b.len()];
    let mut worst = T::zero();
    for x in a {
        let mut best: Option<(usize, T)> = None;
        for (j, y) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = (*x - *y).modulus();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, d) = best.expect("sizes match");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}
