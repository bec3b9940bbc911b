//! Dense oracles shared by the integration suites.
//!
//! Everything here is built from the explicit Kronecker recursion and plain
//! double loops, independent of the fast-transform paths under test.

#![allow(dead_code)]

use kfh_core::hadamard::kron;
use kfh_core::sampler::JointSampler;

/// Dense Sylvester-Hadamard matrix from the Kronecker recursion.
pub fn explicit_hadamard(n: usize) -> Vec<Vec<i64>> {
    assert!(n.is_power_of_two());
    let mut h = vec![vec![1i64]];
    let h2 = vec![vec![1i64, 1], vec![1, -1]];
    while h.len() < n {
        h = kron(&h2, &h);
    }
    h
}

/// The joint sensing matrix by direct row selection and column permutation
/// of the explicit `H_{N^2}`.
pub fn dense_joint_by_selection(sampler: &JointSampler) -> Vec<Vec<i64>> {
    let n2 = sampler.joint_dim();
    let h = explicit_hadamard(n2);
    (0..sampler.m())
        .map(|i| {
            let row = &h[sampler.r_si()[i] as usize];
            (0..n2).map(|j| row[sampler.p_si(j)]).collect()
        })
        .collect()
}

/// The joint sensing matrix as the row-wise Kronecker product of the two
/// per-arm pattern matrices, themselves built from the explicit `H_N`.
pub fn dense_joint_by_patterns(sampler: &JointSampler) -> Vec<Vec<i64>> {
    let n = sampler.n();
    let h = explicit_hadamard(n);
    let pattern_row = |r: u32, p: &[u32]| -> Vec<i64> {
        p.iter().map(|&col| h[r as usize][col as usize]).collect()
    };
    (0..sampler.m())
        .map(|i| {
            let ps = pattern_row(sampler.signal().r()[i], sampler.signal().p());
            let pi = pattern_row(sampler.idler().r()[i], sampler.idler().p());
            let mut row = Vec::with_capacity(ps.len() * pi.len());
            for &a in &ps {
                for &b in &pi {
                    row.push(a * b);
                }
            }
            row
        })
        .collect()
}

pub fn matvec(a: &[Vec<i64>], x: &[f64]) -> Vec<f64> {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(&h, &v)| h as f64 * v).sum())
        .collect()
}

pub fn matvec_transpose(a: &[Vec<i64>], y: &[f64]) -> Vec<f64> {
    let cols = a.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (row, &yi) in a.iter().zip(y) {
        for (acc, &h) in out.iter_mut().zip(row) {
            *acc += h as f64 * yi;
        }
    }
    out
}

/// Mutual information by a plain double loop with its own marginal
/// accumulation.
pub fn brute_force_mi(values: &[f64], n: usize) -> f64 {
    assert_eq!(values.len(), n * n);
    let mut p_s = vec![0.0; n];
    let mut p_i = vec![0.0; n];
    for s in 0..n {
        for i in 0..n {
            p_s[s] += values[n * s + i];
            p_i[i] += values[n * s + i];
        }
    }
    let mut mi = 0.0;
    for s in 0..n {
        for i in 0..n {
            let joint = values[n * s + i];
            if joint > 0.0 {
                mi += joint * (joint / (p_s[s] * p_i[i])).log2();
            }
        }
    }
    mi
}

/// Simple deterministic value stream for test inputs.
pub struct TestStream(pub u64);

impl TestStream {
    pub fn next_u64(&mut self) -> u64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        self.0 >> 11
    }

    /// Small signed integers, exactly representable everywhere.
    pub fn small_int(&mut self) -> i64 {
        (self.next_u64() % 41) as i64 - 20
    }

    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() % (1 << 20)) as f64 / (1 << 19) as f64 - 1.0
    }
}
