//! Iterative thresholding reconstruction with mutual-information stopping.
//!
//! Starting from a constant vector, every iteration filters the residual
//! gradient with wavelet shrinkage, gates it entry-wise by the current
//! estimate, re-centers, hard-thresholds with a growing cutoff, and
//! renormalizes:
//!
//! ```text
//! x_{t+1} = eta2[ x_t * eta1[ A^T (y - A x_t) ] + x_t - min(x_t) ]
//! ```
//!
//! The hard threshold ramps linearly relative to the current maximum, so the
//! iterate gets progressively sparser; the loop exits once the mutual
//! information of the iterate stops increasing (or, for single-arm marginal
//! runs, once the data residual stops improving) and the best iterate seen
//! is returned. An optional support mask derived from the measured marginals
//! confines the solution to pixel pairs where correlations are possible at
//! all.

use crate::error::{Error, Result};
use crate::hadamard::fwht_in_place;
use crate::info;
use crate::parallel;
use crate::sampler::{JointSampler, SubspaceSampler};
use crate::spdc::{JointDistribution, MeasurementRecord, SinglesCounts};
use crate::wavelet::{dwt2, idwt2, universal_soft_threshold_in_place};
use rayon::prelude::*;

/// Solver schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionConfig {
    /// Hard cap on update steps.
    pub max_iterations: usize,
    /// Updates to run before the stopping test may fire.
    pub min_iterations: usize,
    /// Hard-threshold ramp per iteration, as a fraction of the current
    /// maximum entry.
    pub hard_threshold_step: f64,
    /// Value filling the starting vector; defaults to `1/N^2` so the start
    /// is itself a distribution.
    pub initial_constant: Option<f64>,
    /// Wavelet decomposition depth used inside the denoiser.
    pub wavelet_levels: usize,
    /// Whether the caller intends masked reconstruction; carried for
    /// front-end plumbing, the mask itself is passed explicitly.
    pub use_marginal_mask: bool,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            min_iterations: 5,
            hard_threshold_step: 0.01,
            initial_constant: None,
            wavelet_levels: 2,
            use_marginal_mask: false,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        let step = self.hard_threshold_step;
        if !step.is_finite() || step <= 0.0 || step >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "hard_threshold_step must lie in (0, 1), got {}",
                self.hard_threshold_step
            )));
        }
        if self.min_iterations == 0 || self.max_iterations < self.min_iterations {
            return Err(Error::InvalidParameter(format!(
                "iteration bounds must satisfy max >= min >= 1, got max={} min={}",
                self.max_iterations, self.min_iterations
            )));
        }
        if self.wavelet_levels == 0 {
            return Err(Error::InvalidParameter(
                "wavelet_levels must be at least 1".into(),
            ));
        }
        if let Some(c) = self.initial_constant {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "initial_constant must be positive, got {c}"
                )));
            }
        }
        Ok(())
    }
}

/// Support constraint built from the two measured marginals: the joint mask
/// is the outer product of the per-arm supports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginalMask {
    support_s: Vec<u8>,
    support_i: Vec<u8>,
    joint: Vec<u8>,
}

impl MarginalMask {
    pub fn n(&self) -> usize {
        self.support_s.len()
    }

    pub fn support_s(&self) -> &[u8] {
        &self.support_s
    }

    pub fn support_i(&self) -> &[u8] {
        &self.support_i
    }

    /// Outer-product joint mask, length `N^2`.
    pub fn joint(&self) -> &[u8] {
        &self.joint
    }
}

/// Threshold each marginal at `max / e^2` and take the outer product of the
/// resulting supports.
pub fn build_marginal_mask(marginal_s: &[f64], marginal_i: &[f64]) -> Result<MarginalMask> {
    if marginal_s.len() != marginal_i.len() {
        return Err(Error::ShapeMismatch {
            what: "marginal supports",
            expected: marginal_s.len(),
            actual: marginal_i.len(),
        });
    }
    let support = |marginal: &[f64]| -> Result<Vec<u8>> {
        if marginal.iter().any(|&v| v.is_nan() || v < 0.0) {
            return Err(Error::InvalidParameter(
                "marginals must be nonnegative".into(),
            ));
        }
        let max = marginal.iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::InvalidParameter(
                "marginal is identically zero".into(),
            ));
        }
        let cut = max / (std::f64::consts::E * std::f64::consts::E);
        Ok(marginal.iter().map(|&v| u8::from(v >= cut)).collect())
    };
    let support_s = support(marginal_s)?;
    let support_i = support(marginal_i)?;
    let n = support_s.len();
    let mut joint = vec![0u8; n * n];
    for (s, row) in joint.chunks_mut(n).enumerate() {
        if support_s[s] == 1 {
            row.copy_from_slice(&support_i);
        }
    }
    Ok(MarginalMask {
        support_s,
        support_i,
        joint,
    })
}

/// Wavelet-shrinkage denoiser: reshape to the square image, two-dimensional
/// analysis, universal soft threshold, synthesis, flatten.
///
/// The decomposition depth is capped so the deepest level still covers the
/// 9-tap filter support; desk-scale images below the support size skip
/// shrinkage entirely (the hard-threshold projection still applies).
pub fn eta1(values: &[f64], levels: usize) -> Result<Vec<f64>> {
    let side = integer_sqrt(values.len()).ok_or(Error::ShapeMismatch {
        what: "eta1 input (square image)",
        expected: values.len(),
        actual: values.len(),
    })?;
    if !side.is_power_of_two() {
        return Err(Error::LengthNotPowerOfTwo(side));
    }
    let levels = effective_levels(side, levels);
    if levels == 0 {
        return Ok(values.to_vec());
    }
    let mut pyramid = dwt2(values, side, side, levels)?;
    universal_soft_threshold_in_place(&mut pyramid)?;
    idwt2(&pyramid)
}

/// Largest usable decomposition depth: every level must act on signals at
/// least as long as the analysis filter support.
fn effective_levels(side: usize, requested: usize) -> usize {
    let support = crate::wavelet::ANALYSIS_LOWPASS.len();
    let mut levels = 0;
    let mut len = side;
    while levels < requested && len >= support {
        levels += 1;
        len /= 2;
    }
    levels
}

fn integer_sqrt(n: usize) -> Option<usize> {
    let s = (n as f64).sqrt().round() as usize;
    (s * s == n).then_some(s)
}

/// Output of the hard-threshold projection.
#[derive(Debug, Clone)]
pub struct Eta2Output {
    pub distribution: JointDistribution,
    /// True when the threshold removed every component; the distribution is
    /// then uniform over the mask support and callers should stop iterating.
    pub overshoot: bool,
}

/// Hard threshold, nonnegativity clamp, optional support mask, and
/// renormalization to a probability distribution.
pub fn eta2(
    side: usize,
    values: &[f64],
    threshold: f64,
    mask: Option<&MarginalMask>,
) -> Result<Eta2Output> {
    let n = side * side;
    if values.len() != n * n {
        return Err(Error::ShapeMismatch {
            what: "eta2 input",
            expected: n * n,
            actual: values.len(),
        });
    }
    if let Some(m) = mask {
        if m.joint().len() != values.len() {
            return Err(Error::ShapeMismatch {
                what: "mask",
                expected: values.len(),
                actual: m.joint().len(),
            });
        }
    }
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "threshold must be nonnegative, got {threshold}"
        )));
    }
    let mut out = values.to_vec();
    let overshoot = eta2_raw(&mut out, threshold, mask.map(|m| m.joint()));
    Ok(Eta2Output {
        distribution: JointDistribution::new(side, out)?,
        overshoot,
    })
}

/// In-place core of [`eta2`]; returns true on overshoot, leaving the uniform
/// fallback over the mask support in the buffer.
fn eta2_raw(values: &mut [f64], threshold: f64, mask: Option<&[u8]>) -> bool {
    match mask {
        Some(mask) => {
            values
                .par_chunks_mut(1 << 16)
                .zip(mask.par_chunks(1 << 16))
                .for_each(|(chunk, mask_chunk)| {
                    for (v, &keep) in chunk.iter_mut().zip(mask_chunk) {
                        if keep == 0 || *v < threshold || *v < 0.0 {
                            *v = 0.0;
                        }
                    }
                });
        }
        None => {
            values.par_chunks_mut(1 << 16).for_each(|chunk| {
                for v in chunk.iter_mut() {
                    if *v < threshold || *v < 0.0 {
                        *v = 0.0;
                    }
                }
            });
        }
    }
    let sum = parallel::sum(values);
    if sum <= 0.0 {
        match mask {
            Some(mask) => {
                let support = mask.iter().filter(|&&k| k == 1).count().max(1);
                let fill = 1.0 / support as f64;
                for (v, &keep) in values.iter_mut().zip(mask) {
                    *v = if keep == 1 { fill } else { 0.0 };
                }
            }
            None => {
                let fill = 1.0 / values.len() as f64;
                values.fill(fill);
            }
        }
        return true;
    }
    values.par_chunks_mut(1 << 16).for_each(|chunk| {
        for v in chunk.iter_mut() {
            *v /= sum;
        }
    });
    false
}

/// One update step of the iteration, exposed for desk-scale probing: filter
/// the residual gradient, gate by the current iterate, re-center, project.
pub fn iterate(
    x_t: &JointDistribution,
    y: &[f64],
    sampler: &JointSampler,
    threshold: f64,
    mask: Option<&MarginalMask>,
) -> Result<Eta2Output> {
    if x_t.joint_dim() != sampler.joint_dim() {
        return Err(Error::ShapeMismatch {
            what: "iterate state",
            expected: sampler.joint_dim(),
            actual: x_t.joint_dim(),
        });
    }
    if y.len() != sampler.m() {
        return Err(Error::ShapeMismatch {
            what: "iterate measurements",
            expected: sampler.m(),
            actual: y.len(),
        });
    }
    let y_hat = sampler.forward(x_t.values())?;
    let residual: Vec<f64> = y.iter().zip(&y_hat).map(|(a, b)| a - b).collect();
    let gradient = sampler.adjoint(&residual)?;
    let filtered = eta1(&gradient, ReconstructionConfig::default().wavelet_levels)?;
    let x = x_t.values();
    let min_x = parallel::min(x);
    let update: Vec<f64> = x
        .iter()
        .zip(&filtered)
        .map(|(&xv, &fv)| xv * fv + xv - min_x)
        .collect();
    eta2(x_t.side(), &update, threshold, mask)
}

/// Per-iteration diagnostics. `mi_bits` is the mutual information of the
/// iterate for joint reconstructions and NaN for marginal runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub mi_bits: f64,
    pub relative_residual: f64,
    pub nonzero: usize,
    pub threshold: f64,
}

/// Result of a joint reconstruction.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// The iterate with the highest mutual information.
    pub distribution: JointDistribution,
    pub trace: Vec<TraceRow>,
    /// True when the threshold schedule zeroed the update and the loop was
    /// cut short.
    pub truncated: bool,
    /// Iteration index of the returned iterate.
    pub best_iteration: usize,
}

/// Result of a single-arm marginal reconstruction.
#[derive(Debug, Clone)]
pub struct MarginalReconstruction {
    /// Recovered marginal, normalized to sum one, length `N`.
    pub marginal: Vec<f64>,
    pub truncated: bool,
    pub best_iteration: usize,
    pub iterations: usize,
}

/// Reconstruct the joint distribution from a measurement record.
///
/// Runs the update loop from the constant start, tracks the mutual
/// information of every iterate, stops after the burn-in once it no longer
/// increases, and returns the best iterate together with the full trace.
pub fn reconstruct(
    record: &MeasurementRecord,
    config: &ReconstructionConfig,
    mask: Option<&MarginalMask>,
) -> Result<Reconstruction> {
    config.validate()?;
    let sampler = &record.sampler;
    let n = sampler.n();
    let side = integer_sqrt(n).ok_or(Error::LengthNotPowerOfTwo(n))?;
    if record.y.len() != sampler.m() {
        return Err(Error::ShapeMismatch {
            what: "measurement vector",
            expected: sampler.m(),
            actual: record.y.len(),
        });
    }
    if let Some(m) = mask {
        if m.n() != n {
            return Err(Error::ShapeMismatch {
                what: "mask dimension",
                expected: n,
                actual: m.n(),
            });
        }
    }
    let plan = JointPlan { sampler };
    let outcome = run_loop(
        &plan,
        &record.y,
        n,
        config,
        mask.map(|m| m.joint()),
        Metric::MutualInformation,
    )?;
    Ok(Reconstruction {
        distribution: JointDistribution::new(side, outcome.best)?,
        trace: outcome.trace,
        truncated: outcome.truncated,
        best_iteration: outcome.best_iteration,
    })
}

/// Recover one arm's marginal distribution from its differenced singles
/// counts, running the same iterative scheme in the `N`-dimensional
/// subspace. The stopping metric is the data residual: mutual information
/// is not defined for a single arm.
pub fn reconstruct_marginal(
    singles: &SinglesCounts,
    sampler: &SubspaceSampler,
    config: &ReconstructionConfig,
) -> Result<MarginalReconstruction> {
    config.validate()?;
    if singles.plus.len() != sampler.m() || singles.minus.len() != sampler.m() {
        return Err(Error::ShapeMismatch {
            what: "singles counts",
            expected: sampler.m(),
            actual: singles.plus.len(),
        });
    }
    let y = singles.differenced();
    // The marginal lives on the particle's pixel grid.
    let image_side = integer_sqrt(sampler.n()).ok_or(Error::LengthNotPowerOfTwo(sampler.n()))?;
    let plan = SubspacePlan { sampler };
    let outcome = run_loop(
        &plan,
        &y,
        image_side,
        config,
        None,
        Metric::NegativeResidual,
    )?;
    Ok(MarginalReconstruction {
        marginal: outcome.best,
        truncated: outcome.truncated,
        best_iteration: outcome.best_iteration,
        iterations: outcome.iterations,
    })
}

// ---- shared iteration engine ----

/// The linear measurement model the engine runs against.
trait Plan {
    fn dim(&self) -> usize;
    fn m(&self) -> usize;
    fn forward_into(&self, x: &[f64], scratch: &mut [f64], y: &mut [f64]);
    fn adjoint_into(&self, y: &[f64], scratch: &mut [f64], x: &mut [f64]);
}

struct JointPlan<'a> {
    sampler: &'a JointSampler,
}

impl Plan for JointPlan<'_> {
    fn dim(&self) -> usize {
        self.sampler.joint_dim()
    }
    fn m(&self) -> usize {
        self.sampler.m()
    }
    fn forward_into(&self, x: &[f64], scratch: &mut [f64], y: &mut [f64]) {
        self.sampler.forward_into(x, scratch, y);
    }
    fn adjoint_into(&self, y: &[f64], scratch: &mut [f64], x: &mut [f64]) {
        self.sampler.adjoint_into(y, scratch, x);
    }
}

struct SubspacePlan<'a> {
    sampler: &'a SubspaceSampler,
}

impl Plan for SubspacePlan<'_> {
    fn dim(&self) -> usize {
        self.sampler.n()
    }
    fn m(&self) -> usize {
        self.sampler.r().len()
    }
    fn forward_into(&self, x: &[f64], scratch: &mut [f64], y: &mut [f64]) {
        for (slot, &j) in scratch.iter_mut().zip(self.sampler.q()) {
            *slot = x[j as usize];
        }
        fwht_in_place(scratch).expect("subspace dimension is a power of two");
        for (out, &row) in y.iter_mut().zip(self.sampler.r()) {
            *out = scratch[row as usize];
        }
    }
    fn adjoint_into(&self, y: &[f64], scratch: &mut [f64], x: &mut [f64]) {
        scratch.fill(0.0);
        for (&row, &value) in self.sampler.r().iter().zip(y) {
            scratch[row as usize] += value;
        }
        fwht_in_place(scratch).expect("subspace dimension is a power of two");
        for (slot, &col) in x.iter_mut().zip(self.sampler.p()) {
            *slot = scratch[col as usize];
        }
    }
}

#[derive(Clone, Copy)]
enum Metric {
    MutualInformation,
    /// Negated scale-invariant residual: the measurement vector carries an
    /// arbitrary flux-time factor relative to the operator output, so the
    /// stopping metric measures directional misfit, the residual left after
    /// the best scalar rescaling of the prediction.
    NegativeResidual,
}

/// `sqrt(1 - cos^2)` between the data and the prediction; 1.0 for a zero
/// prediction or zero data.
fn alignment_residual(y: &[f64], y_hat: &[f64]) -> f64 {
    let yy = parallel::dot(y, y);
    let hh = parallel::dot(y_hat, y_hat);
    if yy <= 0.0 || hh <= 0.0 {
        return 1.0;
    }
    let yh = parallel::dot(y, y_hat);
    (1.0 - (yh * yh) / (yy * hh)).max(0.0).sqrt()
}

struct LoopOutcome {
    best: Vec<f64>,
    best_iteration: usize,
    trace: Vec<TraceRow>,
    truncated: bool,
    iterations: usize,
}

fn run_loop(
    plan: &dyn Plan,
    y: &[f64],
    image_side: usize,
    config: &ReconstructionConfig,
    mask: Option<&[u8]>,
    metric_kind: Metric,
) -> Result<LoopOutcome> {
    let dim = plan.dim();
    if !image_side.is_power_of_two() || image_side * image_side != dim {
        return Err(Error::LengthNotPowerOfTwo(image_side));
    }
    let initial = config.initial_constant.unwrap_or(1.0 / dim as f64);
    let mut x = vec![initial; dim];
    let mut scratch = vec![0.0; dim];
    let mut work = vec![0.0; dim];
    let mut y_hat = vec![0.0; plan.m()];
    let y_norm = parallel::dot(y, y).sqrt();

    let mut trace = Vec::new();
    let mut best = x.clone();
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_iteration = 0;
    let mut previous_metric = f64::NEG_INFINITY;
    let mut truncated = false;
    let mut threshold = 0.0;
    let mut iterations = 0;

    for t in 0..=config.max_iterations {
        plan.forward_into(&x, &mut scratch, &mut y_hat);
        let metric = match metric_kind {
            Metric::MutualInformation => info::mi_raw(&x, image_side),
            Metric::NegativeResidual => -alignment_residual(y, &y_hat),
        };
        let mi_bits = match metric_kind {
            Metric::MutualInformation => metric,
            Metric::NegativeResidual => f64::NAN,
        };
        for (r, &yv) in y_hat.iter_mut().zip(y) {
            *r = yv - *r;
        }
        let residual_norm = parallel::dot(&y_hat, &y_hat).sqrt();
        let relative_residual = if y_norm > 0.0 {
            residual_norm / y_norm
        } else {
            residual_norm
        };
        trace.push(TraceRow {
            iteration: t,
            mi_bits,
            relative_residual,
            nonzero: parallel::count_positive(&x),
            threshold,
        });
        iterations = t;
        if metric > best_metric {
            best_metric = metric;
            best_iteration = t;
            best.copy_from_slice(&x);
        }
        if t >= config.min_iterations && metric <= previous_metric {
            break;
        }
        previous_metric = metric;
        if t == config.max_iterations {
            break;
        }

        // Update: filtered gradient, entry-wise gate, re-center, project.
        plan.adjoint_into(&y_hat, &mut scratch, &mut work);
        let filtered = eta1(&work, config.wavelet_levels)?;
        let min_x = parallel::min(&x);
        let max_x = parallel::max(&x);
        work.par_chunks_mut(1 << 16)
            .zip(x.par_chunks(1 << 16))
            .zip(filtered.par_chunks(1 << 16))
            .for_each(|((w, xs), fs)| {
                for ((wv, &xv), &fv) in w.iter_mut().zip(xs).zip(fs) {
                    *wv = xv * fv + xv - min_x;
                }
            });
        threshold = (t + 1) as f64 * config.hard_threshold_step * max_x;
        if eta2_raw(&mut work, threshold, mask) {
            truncated = true;
            break;
        }
        std::mem::swap(&mut x, &mut work);
    }

    Ok(LoopOutcome {
        best,
        best_iteration,
        trace,
        truncated,
        iterations,
    })
}
