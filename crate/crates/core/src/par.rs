//! Order-fixed parallel reduction over sample indices.
//!
//! Samples are split into fixed-size blocks. Each block is reduced
//! sequentially and blocks are merged in index order, so the result does
//! not depend on the number of worker threads.

use rayon::prelude::*;

pub const BLOCK: u64 = 256;

pub fn reduce_samples<A, I, S, M>(n: u64, init: I, step: S, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    S: Fn(&mut A, u64) + Sync,
    M: Fn(&mut A, A),
{
    let blocks = n.div_ceil(BLOCK);
    let partials: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                step(&mut acc, i);
            }
            acc
        })
        .collect();
    let mut total = init();
    for p in partials {
        merge(&mut total, p);
    }
    total
}

/// Running sum and sum of squares per entry.
#[derive(Debug, Clone)]
pub struct Moments {
    pub sum: Vec<f64>,
    pub sum_sq: Vec<f64>,
}

impl Moments {
    pub fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            sum_sq: vec![0.0; len],
        }
    }

    pub fn push(&mut self, sample: &[f64]) {
        for ((s, q), x) in self.sum.iter_mut().zip(self.sum_sq.iter_mut()).zip(sample) {
            *s += x;
            *q += x * x;
        }
    }

    pub fn merge(&mut self, other: Moments) {
        for (a, b) in self.sum.iter_mut().zip(other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(other.sum_sq) {
            *a += b;
        }
    }

    pub fn mean(&self, n: u64) -> Vec<f64> {
        self.sum.iter().map(|s| s / n as f64).collect()
    }

    /// Standard error of the mean; zero when n < 2.
    pub fn std_err(&self, n: u64) -> Vec<f64> {
        let nf = n as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                if n < 2 {
                    return 0.0;
                }
                let mean = s / nf;
                let var = ((q - nf * mean * mean) / (nf - 1.0)).max(0.0);
                (var / nf).sqrt()
            })
            .collect()
    }
}

/// Mixes seed components into one stream seed (splitmix64 finalizer).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = (h ^ (h >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        h ^= h >> 31;
    }
    h
}
