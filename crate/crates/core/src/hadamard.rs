//! Sylvester-Hadamard primitives.
//!
//! The fast Walsh-Hadamard transform here is the normally-ordered (Sylvester)
//! variant: the transform of a basis vector `e_i` is row `i` of the Hadamard
//! matrix built from the recursion `H_{2k} = H_2 (x) H_k`. The forward
//! transform is unnormalized; applying it twice scales a vector by its
//! length. Callers account for the missing `1/N` where it matters.

use crate::error::{Error, Result};
use rayon::prelude::*;

/// Below this length the transform runs single threaded; the stage loop is
/// memory bound and thread startup dominates for small inputs.
const PARALLEL_CUTOFF: usize = 1 << 15;

/// In-place fast Walsh-Hadamard transform (normally ordered, unnormalized).
///
/// Cost is `N log2 N` additions/subtractions with no multiplies. Fails if the
/// length is not a power of two. Bit-deterministic: the butterflies of a
/// stage are independent, so the parallel path produces the exact bytes of
/// the serial path.
pub fn fwht_in_place(values: &mut [f64]) -> Result<()> {
    let n = values.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(n));
    }
    if n < PARALLEL_CUTOFF {
        let mut half = 1;
        while half < n {
            for chunk in values.chunks_exact_mut(2 * half) {
                butterfly(chunk, half);
            }
            half *= 2;
        }
    } else {
        fwht_parallel(values);
    }
    Ok(())
}

fn butterfly(chunk: &mut [f64], half: usize) {
    let (lo, hi) = chunk.split_at_mut(half);
    for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
        let s = *a + *b;
        let d = *a - *b;
        *a = s;
        *b = d;
    }
}

fn fwht_parallel(values: &mut [f64]) {
    let n = values.len();
    let mut half = 1;
    while half < n {
        let chunk_len = 2 * half;
        if n / chunk_len >= 2 {
            values
                .par_chunks_exact_mut(chunk_len)
                .for_each(|chunk| butterfly(chunk, half));
        } else {
            // Single chunk spanning the whole vector: split the butterfly
            // range itself across threads.
            let (lo, hi) = values.split_at_mut(half);
            let block = (half / (2 * rayon::current_num_threads().max(1))).max(1 << 12);
            lo.par_chunks_mut(block)
                .zip(hi.par_chunks_mut(block))
                .for_each(|(la, hb)| {
                    for (a, b) in la.iter_mut().zip(hb.iter_mut()) {
                        let s = *a + *b;
                        let d = *a - *b;
                        *a = s;
                        *b = d;
                    }
                });
        }
        half *= 2;
    }
}

/// Integer-exact variant of [`fwht_in_place`] for small-dimension checks.
pub fn fwht_in_place_i64(values: &mut [i64]) -> Result<()> {
    let n = values.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(n));
    }
    let mut half = 1;
    while half < n {
        for chunk in values.chunks_exact_mut(2 * half) {
            let (lo, hi) = chunk.split_at_mut(half);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let s = *a + *b;
                let d = *a - *b;
                *a = s;
                *b = d;
            }
        }
        half *= 2;
    }
    Ok(())
}

/// Transform of a copy; convenience wrapper over [`fwht_in_place`].
pub fn fwht(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Row `row` (0-based) of the Sylvester-Hadamard matrix `H_n`, computed as
/// the transform of a basis vector. The full matrix is never formed.
pub fn hadamard_row(n: usize, row: usize) -> Result<Vec<f64>> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(n));
    }
    if row >= n {
        return Err(Error::IndexOutOfRange { index: row, len: n });
    }
    let mut v = vec![0.0; n];
    v[row] = 1.0;
    fwht_in_place(&mut v)?;
    Ok(v)
}

/// A +/-1 row split into two binary masks, the displayable form of a
/// Hadamard pattern on an on/off modulator.
///
/// `positive` marks the +1 entries, `negative` the -1 entries (stored as
/// magnitudes). Exactly one of the two is set at every position, and
/// `positive - negative` reproduces the signed row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignSplitRow {
    positive: Vec<u8>,
    negative: Vec<u8>,
}

impl SignSplitRow {
    pub fn len(&self) -> usize {
        self.positive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positive.is_empty()
    }

    /// Binary mask of the +1 entries.
    pub fn positive(&self) -> &[u8] {
        &self.positive
    }

    /// Binary mask of the -1 entries (magnitudes).
    pub fn negative(&self) -> &[u8] {
        &self.negative
    }

    /// Recombine into the signed +/-1 row.
    pub fn signed_row(&self) -> Vec<f64> {
        self.positive
            .iter()
            .zip(&self.negative)
            .map(|(&p, &m)| f64::from(p) - f64::from(m))
            .collect()
    }
}

/// Split a +/-1 row into its positive and negative binary masks.
pub fn split_signs(row: &[f64]) -> Result<SignSplitRow> {
    let mut positive = vec![0u8; row.len()];
    let mut negative = vec![0u8; row.len()];
    for (index, &value) in row.iter().enumerate() {
        if value == 1.0 {
            positive[index] = 1;
        } else if value == -1.0 {
            negative[index] = 1;
        } else {
            return Err(Error::NotPlusMinusOne { index, value });
        }
    }
    Ok(SignSplitRow { positive, negative })
}

/// Kronecker product of two dense matrices (rows of `Vec`s, rectangular).
///
/// An `m x n` by `p x q` product is `mp x nq`. Only meant for small
/// instances: test oracles and the sign-split identities. Large operators go
/// through the matrix-free paths instead.
pub fn kron<T>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>>
where
    T: Copy + std::ops::Mul<Output = T>,
{
    let mut out = Vec::with_capacity(a.len() * b.len());
    for row_a in a {
        for row_b in b {
            let mut row = Vec::with_capacity(row_a.len() * row_b.len());
            for &x in row_a {
                for &y in row_b {
                    row.push(x * y);
                }
            }
            out.push(row);
        }
    }
    out
}

/// Kronecker product of two row vectors.
pub fn kron_row<T>(a: &[T], b: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Mul<Output = T>,
{
    let mut out = Vec::with_capacity(a.len() * b.len());
    for &x in a {
        for &y in b {
            out.push(x * y);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense Sylvester matrix by the Kronecker recursion; the oracle for the
    /// fast-transform paths.
    fn explicit_hadamard(n: usize) -> Vec<Vec<i64>> {
        assert!(n.is_power_of_two());
        let mut h = vec![vec![1i64]];
        let h2 = vec![vec![1i64, 1], vec![1, -1]];
        while h.len() < n {
            h = kron(&h2, &h);
        }
        h
    }

    #[test]
    fn fwht_of_ones_pair() {
        assert_eq!(fwht(&[1.0, 1.0]).unwrap(), vec![2.0, 0.0]);
    }

    #[test]
    fn fwht_of_first_basis_vector_is_all_ones() {
        assert_eq!(fwht(&[1.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn fwht_of_second_basis_vector() {
        assert_eq!(
            fwht(&[0.0, 1.0, 0.0, 0.0]).unwrap(),
            vec![1.0, -1.0, 1.0, -1.0]
        );
    }

    #[test]
    fn fwht_twice_scales_by_length() {
        let x = [0.5, -2.0, 3.25, 7.0];
        let mut v = x.to_vec();
        fwht_in_place(&mut v).unwrap();
        fwht_in_place(&mut v).unwrap();
        for (a, b) in v.iter().zip(x.iter()) {
            assert_eq!(*a, 4.0 * b);
        }
    }

    #[test]
    fn fwht_rejects_non_power_of_two() {
        let mut v = vec![1.0, 2.0, 3.0];
        assert!(matches!(
            fwht_in_place(&mut v),
            Err(Error::LengthNotPowerOfTwo(3))
        ));
        assert!(fwht_in_place(&mut []).is_err());
    }

    #[test]
    fn fwht_matches_dense_oracle_up_to_256() {
        let mut state = 0x1234_5678_9abc_def0u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as i64 % 17) - 8
        };
        for k in 0..=8 {
            let n = 1usize << k;
            let h = explicit_hadamard(n);
            let x: Vec<i64> = (0..n).map(|_| next()).collect();
            let mut fast = x.clone();
            fwht_in_place_i64(&mut fast).unwrap();
            for (i, row) in h.iter().enumerate() {
                let dense: i64 = row.iter().zip(&x).map(|(a, b)| a * b).sum();
                assert_eq!(fast[i], dense, "n={n} row={i}");
            }
        }
    }

    #[test]
    fn parallel_path_matches_serial() {
        let n = PARALLEL_CUTOFF * 4;
        let x: Vec<f64> = (0..n)
            .map(|i| ((i * 2654435761) % 1024) as f64 - 512.0)
            .collect();
        let mut fast = x.clone();
        fwht_in_place(&mut fast).unwrap();
        let mut serial = x;
        let mut half = 1;
        while half < n {
            for chunk in serial.chunks_exact_mut(2 * half) {
                butterfly(chunk, half);
            }
            half *= 2;
        }
        assert_eq!(fast, serial);
    }

    #[test]
    fn hadamard_row_examples() {
        assert_eq!(hadamard_row(2, 1).unwrap(), vec![1.0, -1.0]);
        assert_eq!(hadamard_row(4, 0).unwrap(), vec![1.0; 4]);
        let h8 = explicit_hadamard(8);
        let row = hadamard_row(8, 4).unwrap();
        for (a, b) in row.iter().zip(&h8[4]) {
            assert_eq!(*a, *b as f64);
        }
        assert!(hadamard_row(8, 8).is_err());
    }

    #[test]
    fn rows_after_first_sum_to_zero() {
        for n in [2usize, 8, 64] {
            for i in 1..n {
                let s: f64 = hadamard_row(n, i).unwrap().iter().sum();
                assert_eq!(s, 0.0, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn split_signs_examples() {
        let s = split_signs(&[1.0, -1.0]).unwrap();
        assert_eq!(s.positive(), &[1, 0]);
        assert_eq!(s.negative(), &[0, 1]);

        let ones = split_signs(&[1.0; 4]).unwrap();
        assert_eq!(ones.positive(), &[1; 4]);
        assert_eq!(ones.negative(), &[0; 4]);

        // Third row of H_4.
        let s = split_signs(&hadamard_row(4, 2).unwrap()).unwrap();
        assert_eq!(s.positive(), &[1, 1, 0, 0]);
        assert_eq!(s.negative(), &[0, 0, 1, 1]);

        assert!(matches!(
            split_signs(&[1.0, 0.5]),
            Err(Error::NotPlusMinusOne { index: 1, .. })
        ));
    }

    #[test]
    fn sign_split_recombines() {
        for i in 0..8 {
            let row = hadamard_row(8, i).unwrap();
            let split = split_signs(&row).unwrap();
            assert_eq!(split.signed_row(), row);
            for (p, m) in split.positive().iter().zip(split.negative()) {
                assert_eq!(p + m, 1);
            }
        }
    }

    #[test]
    fn kron_examples() {
        let b = vec![vec![3i64, -1], vec![0, 2]];
        assert_eq!(kron(&[vec![1i64]], &b), b);
        assert_eq!(
            kron(&[vec![1i64, -1]], &[vec![1i64, 1]]),
            vec![vec![1, 1, -1, -1]]
        );
        let h2 = explicit_hadamard(2);
        assert_eq!(kron(&h2, &h2), explicit_hadamard(4));
        assert_eq!(kron_row(&[1i64, -1], &[1, 1]), vec![1, 1, -1, -1]);
    }

    #[test]
    fn four_term_sign_split_identity() {
        // H+ (x) H+ + |H-| (x) |H-| - H+ (x) |H-| - |H-| (x) H+ = H_{n^2}
        for n in [2usize, 4] {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for i in 0..n {
                let split = split_signs(&hadamard_row(n, i).unwrap()).unwrap();
                pos.push(
                    split
                        .positive()
                        .iter()
                        .map(|&v| v as i64)
                        .collect::<Vec<_>>(),
                );
                neg.push(
                    split
                        .negative()
                        .iter()
                        .map(|&v| v as i64)
                        .collect::<Vec<_>>(),
                );
            }
            let pp = kron(&pos, &pos);
            let mm = kron(&neg, &neg);
            let pm = kron(&pos, &neg);
            let mp = kron(&neg, &pos);
            let dense = explicit_hadamard(n * n);
            for r in 0..n * n {
                for c in 0..n * n {
                    assert_eq!(
                        pp[r][c] + mm[r][c] - pm[r][c] - mp[r][c],
                        dense[r][c],
                        "n={n} r={r} c={c}"
                    );
                }
            }
        }
    }
}
