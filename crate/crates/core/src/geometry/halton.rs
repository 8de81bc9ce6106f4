//! Halton low-discrepancy sequence, one prime base per dimension.

use crate::error::{Error, Result};

/// First 64 primes; base for dimension k is PRIMES[k].
const PRIMES: [u32; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311,
];

/// Radical inverse of `index` in base `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = base as f64;
    let mut inv = 1.0 / b;
    let mut result = 0.0;
    while index > 0 {
        result += (index % base as u64) as f64 * inv;
        index /= base as u64;
        inv /= b;
    }
    result
}

/// The `index`-th Halton point in `dims` dimensions, each coordinate in [0,1).
pub fn halton(index: u64, dims: usize) -> Result<Vec<f64>> {
    if dims == 0 || dims > PRIMES.len() {
        return Err(Error::InvalidArgument(format!(
            "halton dims must be in 1..=64, got {dims}"
        )));
    }
    Ok((0..dims).map(|k| radical_inverse(index, PRIMES[k])).collect())
}
