//! Keyed random streams.
//!
//! Every random draw in the crate comes from a stream keyed by
//! `(seed, purpose, indices)`, so codebooks, restarts and faking draws are
//! reproducible and do not depend on evaluation order or thread count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags separating independent consumers of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Codebook = 1,
    Cloud = 2,
    Satellite = 3,
    Encoder = 4,
    Faker = 5,
    MonteCarlo = 6,
    Restart = 7,
    Degraded = 8,
    Random = 9,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds the key into a 256-bit ChaCha seed.
pub fn key(seed: u64, purpose: Purpose, indices: &[u64]) -> [u8; 32] {
    let mut h = splitmix64(seed ^ 0x6a09_e667_f3bc_c908);
    h = splitmix64(h ^ purpose as u64);
    h = splitmix64(h ^ indices.len() as u64);
    for &i in indices {
        h = splitmix64(h ^ i);
    }
    let mut out = [0u8; 32];
    let mut s = h;
    for chunk in out.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn stream(seed: u64, purpose: Purpose, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(key(seed, purpose, indices))
}

/// Draws an index from unnormalized non-negative weights.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if u < w {
            return i;
        }
        u -= w;
    }
    last
}

/// A Dirichlet(1, .., 1) draw written into `out`.
pub fn flat_dirichlet<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut total = 0.0;
    for v in out.iter_mut() {
        // 1 - u lies in (0, 1], so the log is finite
        *v = -(1.0 - rng.gen::<f64>()).ln();
        total += *v;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
}
