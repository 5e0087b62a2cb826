//! The one random source of the harness.
//!
//! Every draw goes through ChaCha8 (`rand_chacha`), seeded with
//! `seed_from_u64(seed)` and split into independent streams with
//! `set_stream`. Replication `i` uses stream `i`; the prior draw of the
//! initial estimate uses stream `i | PRIOR_STREAM`. Standard normals come
//! from the `rand_distr` ziggurat sampler. Both are specified bit-exactly by
//! their crates, so a fixed config gives the same numbers on every platform.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Identifier written into run metadata.
pub const RNG_ALGORITHM: &str = "chacha8-stream/ziggurat-normal";

const PRIOR_STREAM: u64 = 1 << 63;
const SYSTEM_STREAM: u64 = 1 << 62;

/// Generator for replication `rep` of a run seeded with `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    stream(seed, rep)
}

/// Generator for the prior draw of replication `rep`.
pub fn prior_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    stream(seed, rep | PRIOR_STREAM)
}

/// Generator for random system construction.
pub fn system_rng(seed: u64) -> ChaCha8Rng {
    stream(seed, SYSTEM_STREAM)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Fills `out` with independent standard normals, in index order.
pub fn fill_normal<R: Rng + ?Sized>(rng: &mut R, out: &mut DVector<f64>) {
    for x in out.iter_mut() {
        *x = normal(rng);
    }
}

/// Matrix of independent standard normals, filled row by row.
pub fn normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = normal(rng);
        }
    }
    m
}
