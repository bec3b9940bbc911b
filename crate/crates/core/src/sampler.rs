//! Measurement plans and the matrix-free sensing operators.
//!
//! A subspace plan randomizes one particle's Hadamard matrix: `r` picks rows
//! (with repetition allowed), `p` shuffles columns, `q` undoes `p`. Two
//! subspace plans combine into a joint plan whose implied sensing matrix is
//! the row-wise Kronecker product of the two pattern matrices; equivalently,
//! a row/column-randomized `H_{N^2}`. The forward and adjoint products are
//! evaluated with fast transforms and index bookkeeping only -- the joint
//! matrix is never materialized.
//!
//! All indices are 0-based in memory. Persisted files are 1-based (see the
//! `io` module).

use crate::error::{Error, Result};
use crate::hadamard::{fwht_in_place, split_signs, SignSplitRow};
use crate::rng::{derive_seed, random_permutation, seeded_rng, uniform_below};
use rayon::prelude::*;
use std::collections::HashSet;

/// Hook for joint signals that are sparse in some other basis. The identity
/// (pixel basis) is the only transform shipped; anything invertible with
/// matching forward/inverse works.
pub trait SparseBasis {
    /// Map pixel-basis values into the sparse basis, in place.
    fn forward(&self, values: &mut [f64]);
    /// Map sparse-basis values back to the pixel basis, in place.
    fn inverse(&self, values: &mut [f64]);
}

/// The pixel basis itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBasis;

impl SparseBasis for IdentityBasis {
    fn forward(&self, _values: &mut [f64]) {}
    fn inverse(&self, _values: &mut [f64]) {}
}

/// Invert a permutation of `0..n`: `q[p[i]] = i`.
pub fn inverse_permutation(p: &[u32]) -> Result<Vec<u32>> {
    let n = p.len();
    let mut q = vec![u32::MAX; n];
    for (i, &target) in p.iter().enumerate() {
        let t = target as usize;
        if t >= n {
            return Err(Error::NotAPermutation("value out of range"));
        }
        if q[t] != u32::MAX {
            return Err(Error::NotAPermutation("repeated value"));
        }
        q[t] = i as u32;
    }
    Ok(q)
}

/// One particle's randomized-Hadamard measurement plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubspaceSampler {
    n: usize,
    r: Vec<u32>,
    p: Vec<u32>,
    q: Vec<u32>,
    seed: u64,
}

impl SubspaceSampler {
    /// Generate a plan for dimension `n` (a power of two) with `m` pattern
    /// draws. Rows are drawn uniformly with repetition from `1..n` (0-based;
    /// the all-ones row 0 is excluded), then the column permutation is drawn.
    /// Deterministic for a fixed seed.
    pub fn generate(n: usize, m: usize, seed: u64) -> Result<Self> {
        Self::generate_inner(n, m, seed, false)
    }

    /// Like [`SubspaceSampler::generate`] but with rows drawn from `0..n`,
    /// admitting the all-ones row for callers that want the total flux on a
    /// detector as one of the projections.
    pub fn generate_with_flux_row(n: usize, m: usize, seed: u64) -> Result<Self> {
        Self::generate_inner(n, m, seed, true)
    }

    fn generate_inner(n: usize, m: usize, seed: u64, include_flux_row: bool) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::LengthNotPowerOfTwo(n));
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "measurement count must be positive".into(),
            ));
        }
        let mut rng = seeded_rng(seed);
        let r: Vec<u32> = (0..m)
            .map(|_| {
                if include_flux_row {
                    uniform_below(&mut rng, n as u64) as u32
                } else {
                    1 + uniform_below(&mut rng, (n - 1) as u64) as u32
                }
            })
            .collect();
        let p = random_permutation(&mut rng, n);
        let q = inverse_permutation(&p).expect("fresh permutation inverts");
        Ok(Self { n, r, p, q, seed })
    }

    /// Rebuild a plan from stored vectors (used when loading files).
    pub fn from_parts(n: usize, r: Vec<u32>, p: Vec<u32>, seed: u64) -> Result<Self> {
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::LengthNotPowerOfTwo(n));
        }
        if p.len() != n {
            return Err(Error::ShapeMismatch {
                what: "column permutation",
                expected: n,
                actual: p.len(),
            });
        }
        if let Some(&bad) = r.iter().find(|&&row| row as usize >= n) {
            return Err(Error::IndexOutOfRange {
                index: bad as usize,
                len: n,
            });
        }
        let q = inverse_permutation(&p)?;
        Ok(Self { n, r, p, q, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of planned patterns.
    pub fn m(&self) -> usize {
        self.r.len()
    }

    /// Row selections, 0-based.
    pub fn r(&self) -> &[u32] {
        &self.r
    }

    /// Column permutation, 0-based.
    pub fn p(&self) -> &[u32] {
        &self.p
    }

    /// Inverse of the column permutation.
    pub fn q(&self) -> &[u32] {
        &self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// The `index`-th display pattern: Hadamard row `r[index]`, columns
    /// permuted by `p`, split into the two binary modulator masks.
    pub fn pattern(&self, index: usize) -> Result<SignSplitRow> {
        if index >= self.m() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.m(),
            });
        }
        let mut basis = vec![0.0; self.n];
        basis[self.r[index] as usize] = 1.0;
        fwht_in_place(&mut basis)?;
        let permuted: Vec<f64> = self.p.iter().map(|&col| basis[col as usize]).collect();
        split_signs(&permuted)
    }

    /// Forward product of the subspace pattern matrix with `x`:
    /// reorder by `q`, transform, extract the `r` entries.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n {
            return Err(Error::ShapeMismatch {
                what: "subspace forward input",
                expected: self.n,
                actual: x.len(),
            });
        }
        let mut work: Vec<f64> = self.q.iter().map(|&j| x[j as usize]).collect();
        fwht_in_place(&mut work)?;
        Ok(self.r.iter().map(|&row| work[row as usize]).collect())
    }

    /// Adjoint product: scatter-accumulate `y` at the `r` positions,
    /// transform, reorder by `p`. Repeated rows accumulate.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.m() {
            return Err(Error::ShapeMismatch {
                what: "subspace adjoint input",
                expected: self.m(),
                actual: y.len(),
            });
        }
        let mut work = vec![0.0; self.n];
        for (&row, &value) in self.r.iter().zip(y) {
            work[row as usize] += value;
        }
        fwht_in_place(&mut work)?;
        Ok(self.p.iter().map(|&col| work[col as usize]).collect())
    }
}

/// The joint-space measurement plan for a signal/idler pair.
///
/// `r_si` holds the deduplicated joint row selections; the embedded subspace
/// plans carry the matching (filtered) per-particle rows and the column
/// permutations. The joint permutation and its inverse factor through the
/// subspace permutations, so they are computed on the fly rather than stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointSampler {
    n: usize,
    r_si: Vec<u64>,
    signal: SubspaceSampler,
    idler: SubspaceSampler,
    seed: u64,
}

impl JointSampler {
    /// Combine two subspace plans of equal dimension and pattern count.
    ///
    /// Joint rows are `n * r_signal + r_idler`; indices whose joint row
    /// already appeared earlier are dropped together with their subspace
    /// rows (first occurrence wins), so the joint count may shrink.
    pub fn build(signal: SubspaceSampler, idler: SubspaceSampler) -> Result<Self> {
        let seed = signal.seed();
        Self::build_with_seed(signal, idler, seed)
    }

    fn build_with_seed(signal: SubspaceSampler, idler: SubspaceSampler, seed: u64) -> Result<Self> {
        if signal.n() != idler.n() {
            return Err(Error::ShapeMismatch {
                what: "joint sampler dimensions",
                expected: signal.n(),
                actual: idler.n(),
            });
        }
        if signal.m() != idler.m() {
            return Err(Error::ShapeMismatch {
                what: "joint sampler pattern counts",
                expected: signal.m(),
                actual: idler.m(),
            });
        }
        let n = signal.n();
        let mut seen = HashSet::with_capacity(signal.m());
        let mut r_si = Vec::with_capacity(signal.m());
        let mut r_s = Vec::with_capacity(signal.m());
        let mut r_i = Vec::with_capacity(signal.m());
        for (&rs, &ri) in signal.r().iter().zip(idler.r()) {
            let joint = n as u64 * rs as u64 + ri as u64;
            if seen.insert(joint) {
                r_si.push(joint);
                r_s.push(rs);
                r_i.push(ri);
            }
        }
        let signal = SubspaceSampler {
            n,
            r: r_s,
            p: signal.p,
            q: signal.q,
            seed: signal.seed,
        };
        let idler = SubspaceSampler {
            n,
            r: r_i,
            p: idler.p,
            q: idler.q,
            seed: idler.seed,
        };
        Ok(Self {
            n,
            r_si,
            signal,
            idler,
            seed,
        })
    }

    /// Generate the whole joint plan from one master seed. The signal draws
    /// use sub-seed label 0, the idler label 1; both embedded plans record
    /// the master seed, which is what persists in sampler files.
    pub fn generate(n: usize, m: usize, seed: u64) -> Result<Self> {
        let mut signal = SubspaceSampler::generate(n, m, derive_seed(seed, 0))?;
        let mut idler = SubspaceSampler::generate(n, m, derive_seed(seed, 1))?;
        signal.seed = seed;
        idler.seed = seed;
        Self::build_with_seed(signal, idler, seed)
    }

    /// Keep only the first `m` measurements. Handy for sample-count sweeps
    /// against one underlying plan.
    pub fn truncated(mut self, m: usize) -> Result<Self> {
        if m == 0 || m > self.m() {
            return Err(Error::IndexOutOfRange {
                index: m,
                len: self.m(),
            });
        }
        self.r_si.truncate(m);
        self.signal.r.truncate(m);
        self.idler.r.truncate(m);
        Ok(self)
    }

    /// Subspace dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Joint dimension `N^2`.
    pub fn joint_dim(&self) -> usize {
        self.n * self.n
    }

    /// Post-deduplication measurement count.
    pub fn m(&self) -> usize {
        self.r_si.len()
    }

    /// Joint row selections, 0-based, collision free.
    pub fn r_si(&self) -> &[u64] {
        &self.r_si
    }

    pub fn signal(&self) -> &SubspaceSampler {
        &self.signal
    }

    pub fn idler(&self) -> &SubspaceSampler {
        &self.idler
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Entry `index` of the joint column permutation: with `index = n*k + l`,
    /// the value is `n * p_signal[k] + p_idler[l]`.
    pub fn p_si(&self, index: usize) -> usize {
        let k = index / self.n;
        let l = index % self.n;
        self.n * self.signal.p[k] as usize + self.idler.p[l] as usize
    }

    /// Entry `index` of the inverse joint permutation; inverts [`Self::p_si`]
    /// factor by factor.
    pub fn q_si(&self, index: usize) -> usize {
        let k = index / self.n;
        let l = index % self.n;
        self.n * self.signal.q[k] as usize + self.idler.q[l] as usize
    }

    /// `A . x` through the fast transform: inverse-permute, transform,
    /// extract the joint rows. Equals the row/column-randomized `H_{N^2}`
    /// acting on `x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_with(x, None)
    }

    /// [`Self::forward`] with an optional sparse-basis hook; the hook's
    /// inverse is applied to `x` first.
    pub fn forward_with(&self, x: &[f64], basis: Option<&dyn SparseBasis>) -> Result<Vec<f64>> {
        self.check_joint("joint forward input", x.len())?;
        let mut pixel;
        let pixel_ref: &[f64] = match basis {
            Some(b) => {
                pixel = x.to_vec();
                b.inverse(&mut pixel);
                &pixel
            }
            None => x,
        };
        let mut scratch = vec![0.0; self.joint_dim()];
        let mut y = vec![0.0; self.m()];
        self.forward_into(pixel_ref, &mut scratch, &mut y);
        Ok(y)
    }

    /// `A^T . y` through the fast transform: scatter at the joint rows,
    /// transform, permute. Unnormalized, like the forward transform; the
    /// composition `A^T A` therefore carries a factor `N^2`.
    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.adjoint_with(y, None)
    }

    /// [`Self::adjoint`] with an optional sparse-basis hook; the hook's
    /// forward transform is applied to the result.
    pub fn adjoint_with(&self, y: &[f64], basis: Option<&dyn SparseBasis>) -> Result<Vec<f64>> {
        if y.len() != self.m() {
            return Err(Error::ShapeMismatch {
                what: "joint adjoint input",
                expected: self.m(),
                actual: y.len(),
            });
        }
        let mut scratch = vec![0.0; self.joint_dim()];
        let mut x = vec![0.0; self.joint_dim()];
        self.adjoint_into(y, &mut scratch, &mut x);
        if let Some(b) = basis {
            b.forward(&mut x);
        }
        Ok(x)
    }

    fn check_joint(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.joint_dim() {
            return Err(Error::ShapeMismatch {
                what,
                expected: self.joint_dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Allocation-free forward product into caller buffers. `scratch` and
    /// `x` must have length `N^2`, `y` length `M`.
    pub(crate) fn forward_into(&self, x: &[f64], scratch: &mut [f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.joint_dim());
        debug_assert_eq!(scratch.len(), self.joint_dim());
        debug_assert_eq!(y.len(), self.m());
        let n = self.n;
        let q_s = &self.signal.q;
        let q_i = &self.idler.q;
        // Gather by the factored inverse permutation.
        scratch
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(k, chunk)| {
                let base = n * q_s[k] as usize;
                for (slot, &qi) in chunk.iter_mut().zip(q_i.iter()) {
                    *slot = x[base + qi as usize];
                }
            });
        fwht_in_place(scratch).expect("joint dimension is a power of two");
        for (out, &row) in y.iter_mut().zip(&self.r_si) {
            *out = scratch[row as usize];
        }
    }

    /// Allocation-free adjoint product into caller buffers.
    pub(crate) fn adjoint_into(&self, y: &[f64], scratch: &mut [f64], x: &mut [f64]) {
        debug_assert_eq!(y.len(), self.m());
        debug_assert_eq!(scratch.len(), self.joint_dim());
        debug_assert_eq!(x.len(), self.joint_dim());
        scratch.par_chunks_mut(1 << 16).for_each(|chunk| {
            chunk.fill(0.0);
        });
        for (&row, &value) in self.r_si.iter().zip(y) {
            scratch[row as usize] += value;
        }
        fwht_in_place(scratch).expect("joint dimension is a power of two");
        let n = self.n;
        let p_s = &self.signal.p;
        let p_i = &self.idler.p;
        x.par_chunks_mut(n).enumerate().for_each(|(k, chunk)| {
            let base = n * p_s[k] as usize;
            for (slot, &pi) in chunk.iter_mut().zip(p_i.iter()) {
                *slot = scratch[base + pi as usize];
            }
        });
    }
}
