//! Mutual information and channel-capacity figures for joint distributions.

use crate::error::{Error, Result};
use crate::parallel;
use crate::spdc::{JointDistribution, OpticalParams, NORMALIZATION_TOLERANCE};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Marginal distributions of the two particles: sums of the joint over the
/// other index. Each returned vector has length `N` and sums to the same
/// total as the joint.
pub fn marginals(x: &JointDistribution) -> (Vec<f64>, Vec<f64>) {
    marginals_raw(x.values(), x.n_subspace())
}

pub(crate) fn marginals_raw(values: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    debug_assert_eq!(values.len(), n * n);
    let marginal_s: Vec<f64> = values
        .par_chunks(n)
        .map(|row| row.iter().sum::<f64>())
        .collect();
    // Idler marginal: per-block column sums folded in block order so the
    // result does not depend on the thread schedule.
    let block_sums: Vec<Vec<f64>> = values
        .par_chunks(n * 64)
        .map(|block| {
            let mut local = vec![0.0; n];
            for row in block.chunks(n) {
                for (acc, &v) in local.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            local
        })
        .collect();
    let mut marginal_i = vec![0.0; n];
    for local in block_sums {
        for (acc, v) in marginal_i.iter_mut().zip(local) {
            *acc += v;
        }
    }
    (marginal_s, marginal_i)
}

/// Shannon mutual information of a joint distribution, in bits:
/// `sum p(s,i) log2( p(s,i) / (p(s) p(i)) )` with `0 log 0 = 0`.
///
/// Fails if the values do not sum to one within the storage tolerance, or if
/// a positive joint entry sits on a zero marginal (impossible for consistent
/// nonnegative inputs).
pub fn mutual_information(x: &JointDistribution) -> Result<f64> {
    let sum = parallel::sum(x.values());
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Unnormalized {
            sum,
            tolerance: NORMALIZATION_TOLERANCE,
        });
    }
    Ok(mi_raw(x.values(), x.n_subspace()))
}

/// Mutual information of an already-validated joint vector.
pub(crate) fn mi_raw(values: &[f64], n: usize) -> f64 {
    let (marginal_s, marginal_i) = marginals_raw(values, n);
    let row_terms: Vec<f64> = values
        .par_chunks(n)
        .enumerate()
        .map(|(s, row)| {
            let ps = marginal_s[s];
            let mut acc = 0.0;
            for (i, &joint) in row.iter().enumerate() {
                if joint > 0.0 {
                    let denom = ps * marginal_i[i];
                    // A positive joint entry forces positive marginals, so
                    // denom == 0 cannot happen for consistent input.
                    acc += joint * (joint / denom).log2();
                }
            }
            acc
        })
        .collect();
    let mi: f64 = row_terms.iter().sum();
    // Tiny negatives can appear from cancellation on near-product inputs.
    mi.max(0.0)
}

/// Effective number of correlated mode pairs: `2^bits`.
pub fn schmidt_number(mi_bits: f64) -> f64 {
    mi_bits.exp2()
}

/// Shannon entropy of a distribution slice, in bits. Entries are assumed
/// nonnegative; zeros contribute nothing.
pub fn entropy_bits(distribution: &[f64]) -> f64 {
    distribution
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Number of Gaussian transverse dimensions of the pump.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransverseDims {
    One,
    Two,
}

/// Closed-form maximum mutual information of a double-Gaussian bi-photon
/// state in the position domain, from the crystal and pump parameters:
/// `log2( (9 pi sigma_p^2 + L_z lambda_p) / (2 sigma_p sqrt(9 pi L_z lambda_p)) )`
/// per transverse dimension, doubled for a two-dimensional Gaussian pump.
pub fn theoretical_max_mi(params: &OpticalParams, dims: TransverseDims) -> Result<f64> {
    params.validate()?;
    let nine_pi = 9.0 * std::f64::consts::PI;
    let sigma_sq = params.sigma_p * params.sigma_p;
    let product = params.l_z * params.lambda_p;
    let one_axis = ((nine_pi * sigma_sq + product)
        / (2.0 * params.sigma_p * (nine_pi * product).sqrt()))
    .log2();
    Ok(match dims {
        TransverseDims::One => one_axis,
        TransverseDims::Two => 2.0 * one_axis,
    })
}

/// Summary of the information content of a joint distribution.
#[derive(Debug, Clone)]
pub struct InfoReport {
    pub mutual_information_bits: f64,
    pub schmidt_number: f64,
    pub marginal_s: Vec<f64>,
    pub marginal_i: Vec<f64>,
    pub theoretical_max_bits: Option<f64>,
}

impl InfoReport {
    /// Compute the report for a distribution, with the theoretical bound
    /// included when optical parameters are supplied.
    pub fn compute(x: &JointDistribution, params: Option<&OpticalParams>) -> Result<Self> {
        let mi = mutual_information(x)?;
        let (marginal_s, marginal_i) = marginals(x);
        let theoretical_max_bits = match params {
            Some(p) => Some(theoretical_max_mi(p, TransverseDims::Two)?),
            None => None,
        };
        Ok(Self {
            mutual_information_bits: mi,
            schmidt_number: schmidt_number(mi),
            marginal_s,
            marginal_i,
            theoretical_max_bits,
        })
    }

    /// Key/value text rendering consumed by the command-line `analyze`
    /// output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "mutual_information_bits: {:.6}",
            self.mutual_information_bits
        );
        let _ = writeln!(out, "schmidt_number: {:.4}", self.schmidt_number);
        for (label, marginal) in [("s", &self.marginal_s), ("i", &self.marginal_i)] {
            let nonzero = marginal.iter().filter(|&&v| v > 0.0).count();
            let peak = marginal
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            let _ = writeln!(
                out,
                "marginal_{label}_entropy_bits: {:.6}",
                entropy_bits(marginal)
            );
            let _ = writeln!(out, "marginal_{label}_nonzero: {nonzero}");
            let _ = writeln!(out, "marginal_{label}_peak_index: {peak}");
        }
        if let Some(bound) = self.theoretical_max_bits {
            let _ = writeln!(out, "theoretical_max_bits: {bound:.4}");
        }
        out
    }
}
