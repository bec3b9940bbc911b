//! Deterministic parallel reductions.
//!
//! Reconstructions must be bit-reproducible, so every parallel reduction in
//! the crate folds fixed-size chunk results in index order instead of letting
//! the scheduler pick an association order.

use rayon::prelude::*;

const CHUNK: usize = 1 << 16;

/// Sum with a fixed association order regardless of thread count.
pub(crate) fn sum(values: &[f64]) -> f64 {
    if values.len() < CHUNK {
        return values.iter().sum();
    }
    let partials: Vec<f64> = values
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().sum::<f64>())
        .collect();
    partials.iter().sum()
}

/// Dot product with the same fixed association order as [`sum`].
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < CHUNK {
        return a.iter().zip(b).map(|(x, y)| x * y).sum();
    }
    let partials: Vec<f64> = a
        .par_chunks(CHUNK)
        .zip(b.par_chunks(CHUNK))
        .map(|(ca, cb)| ca.iter().zip(cb).map(|(x, y)| x * y).sum::<f64>())
        .collect();
    partials.iter().sum()
}

pub(crate) fn max(values: &[f64]) -> f64 {
    if values.len() < CHUNK {
        return values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    values
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min(values: &[f64]) -> f64 {
    if values.len() < CHUNK {
        return values.iter().copied().fold(f64::INFINITY, f64::min);
    }
    values
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().copied().fold(f64::INFINITY, f64::min))
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(f64::INFINITY, f64::min)
}

pub(crate) fn count_positive(values: &[f64]) -> usize {
    if values.len() < CHUNK {
        return values.iter().filter(|&&v| v > 0.0).count();
    }
    values
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().filter(|&&v| v > 0.0).count())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_sum_matches_serial_exactly() {
        let values: Vec<f64> = (0..(CHUNK * 3 + 17))
            .map(|i| ((i % 1000) as f64 - 500.0) * 1e-3)
            .collect();
        let serial: f64 = {
            let partials: Vec<f64> = values.chunks(CHUNK).map(|c| c.iter().sum()).collect();
            partials.iter().sum()
        };
        assert_eq!(sum(&values), serial);
        assert_eq!(dot(&values, &values), {
            let partials: Vec<f64> = values
                .chunks(CHUNK)
                .map(|c| c.iter().map(|v| v * v).sum())
                .collect();
            partials.iter().sum::<f64>()
        });
        assert_eq!(max(&values), 0.499);
        assert_eq!(min(&values), -0.5);
    }
}
