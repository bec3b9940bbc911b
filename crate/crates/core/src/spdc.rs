//! Synthetic bi-photon sources and the coincidence-counting measurement
//! model.
//!
//! The source is a double-Gaussian joint position distribution: per
//! transverse axis the two particles are correlated through a wide
//! symmetric-coordinate Gaussian (width `sigma_plus`) and a narrow
//! antisymmetric-coordinate Gaussian (width `sigma_minus`). Measurements
//! displayed on binary modulators split every +/-1 pattern pair into four
//! 0/1 pattern combinations; each combination yields a Poisson coincidence
//! count, and the signed sum of the four counts recovers one Hadamard
//! projection.

use crate::error::{Error, Result};
use crate::info;
use crate::parallel;
use crate::rng::{derive_seed, seeded_rng};
use crate::sampler::JointSampler;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

/// Normalized joint distribution of a two-particle system, stored as a
/// length `N^2` vector indexed `N * i_signal + i_idler` (0-based) with
/// `N = side^2` pixels per particle.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    side: usize,
    values: Vec<f64>,
}

/// Acceptable deviation of a stored distribution's sum from one.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

impl JointDistribution {
    /// Wrap explicitly normalized values. Entries must be nonnegative and
    /// sum to one within [`NORMALIZATION_TOLERANCE`]; the values are stored
    /// verbatim.
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        let n = side * side;
        if side < 2 || values.len() != n * n {
            return Err(Error::ShapeMismatch {
                what: "joint distribution",
                expected: n * n,
                actual: values.len(),
            });
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidParameter(
                "joint distribution entries must be finite and nonnegative".into(),
            ));
        }
        let sum = parallel::sum(&values);
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Unnormalized {
                sum,
                tolerance: NORMALIZATION_TOLERANCE,
            });
        }
        Ok(Self { side, values })
    }

    /// Normalize arbitrary nonnegative weights into a distribution.
    pub fn normalized(side: usize, mut values: Vec<f64>) -> Result<Self> {
        let n = side * side;
        if side < 2 || values.len() != n * n {
            return Err(Error::ShapeMismatch {
                what: "joint distribution",
                expected: n * n,
                actual: values.len(),
            });
        }
        if values.iter().any(|&v| !v.is_finite() || v < 0.0) {
            return Err(Error::InvalidParameter(
                "joint weights must be finite and nonnegative".into(),
            ));
        }
        let sum = parallel::sum(&values);
        if sum <= 0.0 {
            return Err(Error::InvalidParameter("joint weights sum to zero".into()));
        }
        values.par_chunks_mut(1 << 16).for_each(|chunk| {
            for v in chunk {
                *v /= sum;
            }
        });
        Ok(Self { side, values })
    }

    /// Pixels per transverse axis per particle.
    pub fn side(&self) -> usize {
        self.side
    }

    /// Subspace dimension `N = side^2`.
    pub fn n_subspace(&self) -> usize {
        self.side * self.side
    }

    /// Joint dimension `N^2`.
    pub fn joint_dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Value at signal pixel `i_s`, idler pixel `i_i` (0-based subspace
    /// indices).
    pub fn at(&self, i_s: usize, i_i: usize) -> f64 {
        self.values[self.n_subspace() * i_s + i_i]
    }
}

/// Source and acquisition parameters.
///
/// `flux` is the unattenuated coincidence rate; pattern transmission is
/// accounted for by the inner products with the 0/1 patterns, so no separate
/// loss factor is applied. `t_proj` is the integration time for one
/// displayed pattern combination (four combinations per measurement).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalParams {
    /// Pump wavelength in meters.
    pub lambda_p: f64,
    /// Nonlinear crystal length in meters.
    pub l_z: f64,
    /// Pump intensity standard deviation in meters. For a beam quoted by
    /// its 1/e^2 intensity diameter D, the corresponding value is D/4.
    pub sigma_p: f64,
    /// Total coincidence rate in counts per second. May be zero for
    /// degenerate no-light tests; all other parameters must be positive.
    pub flux: f64,
    /// Integration time per displayed pattern combination, seconds.
    pub t_proj: f64,
}

impl OpticalParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_p", self.lambda_p),
            ("l_z", self.l_z),
            ("sigma_p", self.sigma_p),
            ("t_proj", self.t_proj),
        ];
        for (name, value) in positive {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !self.flux.is_finite() || self.flux < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "flux must be nonnegative, got {}",
                self.flux
            )));
        }
        Ok(())
    }
}

/// Per-detector photon counts for the two binary patterns of each
/// measurement: `plus[i]` accumulates while the positive mask of measurement
/// `i` is displayed, `minus[i]` while the negative mask is. Differencing the
/// pair recovers a signed Hadamard projection of that detector's marginal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinglesCounts {
    pub plus: Vec<u64>,
    pub minus: Vec<u64>,
}

impl SinglesCounts {
    /// `plus - minus` as floats, the signed projection data used by the
    /// marginal reconstruction.
    pub fn differenced(&self) -> Vec<f64> {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(&p, &m)| p as f64 - m as f64)
            .collect()
    }
}

/// Noise model for the simulated acquisition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseModel {
    /// Ideal Poisson photon counting.
    Poisson,
    /// No noise: `y` carries the exact expectations and the integer count
    /// channels hold their rounded values.
    Noiseless,
}

/// One simulated acquisition: the measurement vector, the four raw
/// coincidence channels behind it, per-detector singles, and the plan and
/// parameters that produced them.
///
/// In Poisson mode `y[i] = pp[i] + mm[i] - pm[i] - mp[i]` holds exactly by
/// construction. In noiseless mode `y` holds the exact real-valued
/// expectations, which equal the recombined channels whenever the expected
/// counts are integral.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub y: Vec<f64>,
    pub counts_pp: Vec<u64>,
    pub counts_mm: Vec<u64>,
    pub counts_pm: Vec<u64>,
    pub counts_mp: Vec<u64>,
    pub singles_signal: SinglesCounts,
    pub singles_idler: SinglesCounts,
    pub sampler: JointSampler,
    pub params: OpticalParams,
}

impl MeasurementRecord {
    pub fn m(&self) -> usize {
        self.y.len()
    }
}

/// Expected counts for one measurement index, before noise.
struct Expectations {
    pp: f64,
    mm: f64,
    pm: f64,
    mp: f64,
    signal_plus: f64,
    signal_minus: f64,
    idler_plus: f64,
    idler_minus: f64,
    y: f64,
}

/// Double-Gaussian joint distribution sampled at pixel centers.
///
/// Per transverse axis, `p(u_s, u_i)` is proportional to
/// `exp(-(u_s+u_i)^2 / (4 sigma_plus^2)) * exp(-(u_s-u_i)^2 / (4 sigma_minus^2))`
/// with coordinates centered on the grid; the two axes multiply and the
/// result is flattened joint-row-major and normalized. Widths share units
/// with `pixel_pitch`.
pub fn double_gaussian_joint(
    side: usize,
    sigma_plus: f64,
    sigma_minus: f64,
    pixel_pitch: f64,
) -> Result<JointDistribution> {
    if side < 2 {
        return Err(Error::InvalidParameter(format!(
            "side must be at least 2, got {side}"
        )));
    }
    for (name, value) in [
        ("sigma_plus", sigma_plus),
        ("sigma_minus", sigma_minus),
        ("pixel_pitch", pixel_pitch),
    ] {
        if !value.is_finite() || value <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{name} must be positive, got {value}"
            )));
        }
    }
    let center = (side as f64 - 1.0) / 2.0;
    let coord = |i: usize| (i as f64 - center) * pixel_pitch;
    // One axis factor, side x side.
    let mut axis = vec![0.0; side * side];
    for s in 0..side {
        for i in 0..side {
            let sum = coord(s) + coord(i);
            let diff = coord(s) - coord(i);
            axis[s * side + i] = (-(sum * sum) / (4.0 * sigma_plus * sigma_plus)
                - (diff * diff) / (4.0 * sigma_minus * sigma_minus))
                .exp();
        }
    }
    let n = side * side;
    let mut values = vec![0.0; n * n];
    values
        .par_chunks_mut(n)
        .enumerate()
        .for_each(|(i_s, chunk)| {
            let row_s = i_s / side;
            let col_s = i_s % side;
            for (i_i, v) in chunk.iter_mut().enumerate() {
                let row_i = i_i / side;
                let col_i = i_i % side;
                *v = axis[row_s * side + row_i] * axis[col_s * side + col_i];
            }
        });
    JointDistribution::normalized(side, values)
}

/// Simulate the four-pattern coincidence acquisition of `truth` under the
/// given plan.
///
/// For measurement `i` with signal/idler pattern masks `P+`/`P-`, every
/// combination `(s, t)` of masks has expected coincidence count
/// `flux * t_proj * <P_s (x) P_t, truth>`; the count channels draw Poisson
/// values with those means (independent per channel, derived sub-seed per
/// measurement index, so results do not depend on evaluation order), and
/// `y = pp + mm - pm - mp`. Singles channels accumulate over the two
/// combinations each mask is displayed for, with expected count
/// `2 * flux * t_proj * <mask, marginal>`.
pub fn simulate_measurement(
    truth: &JointDistribution,
    sampler: &JointSampler,
    params: &OpticalParams,
    noise: NoiseModel,
    seed: u64,
) -> Result<MeasurementRecord> {
    simulate_measurement_with_accidentals(truth, sampler, params, noise, 0.0, seed)
}

/// [`simulate_measurement`] with a flat accidental-coincidence background:
/// every coincidence channel gains `accidental_rate * t_proj` expected
/// counts. Accidentals hit all four channels equally, so `y` stays unbiased
/// while its variance grows.
pub fn simulate_measurement_with_accidentals(
    truth: &JointDistribution,
    sampler: &JointSampler,
    params: &OpticalParams,
    noise: NoiseModel,
    accidental_rate: f64,
    seed: u64,
) -> Result<MeasurementRecord> {
    params.validate()?;
    if !accidental_rate.is_finite() || accidental_rate < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "accidental_rate must be nonnegative, got {accidental_rate}"
        )));
    }
    if truth.n_subspace() != sampler.n() {
        return Err(Error::ShapeMismatch {
            what: "simulation dimensions",
            expected: sampler.n(),
            actual: truth.n_subspace(),
        });
    }
    let m = sampler.m();
    let base = params.flux * params.t_proj;

    // All 4M pattern inner products reduce to three fast transforms:
    // <P_s (x) P_t, x> = (T + s*u_S + t*u_I + s*t*a) / 4 with T the total
    // mass, a the joint Hadamard projections and u the per-arm projections
    // of the marginals.
    let a = sampler.forward(truth.values())?;
    let (marginal_s, marginal_i) = info::marginals(truth);
    let u_s = sampler.signal().forward(&marginal_s)?;
    let u_i = sampler.idler().forward(&marginal_i)?;
    let total = parallel::sum(truth.values());

    let background = accidental_rate * params.t_proj;
    let expect = |i: usize| -> Expectations {
        let (us, ui, ai) = (u_s[i], u_i[i], a[i]);
        let quarter = base / 4.0;
        Expectations {
            pp: (quarter * (total + us + ui + ai)).max(0.0) + background,
            mm: (quarter * (total - us - ui + ai)).max(0.0) + background,
            pm: (quarter * (total + us - ui - ai)).max(0.0) + background,
            mp: (quarter * (total - us + ui - ai)).max(0.0) + background,
            signal_plus: (base * (total + us)).max(0.0),
            signal_minus: (base * (total - us)).max(0.0),
            idler_plus: (base * (total + ui)).max(0.0),
            idler_minus: (base * (total - ui)).max(0.0),
            y: base * ai,
        }
    };

    let mut record = MeasurementRecord {
        y: vec![0.0; m],
        counts_pp: vec![0; m],
        counts_mm: vec![0; m],
        counts_pm: vec![0; m],
        counts_mp: vec![0; m],
        singles_signal: SinglesCounts {
            plus: vec![0; m],
            minus: vec![0; m],
        },
        singles_idler: SinglesCounts {
            plus: vec![0; m],
            minus: vec![0; m],
        },
        sampler: sampler.clone(),
        params: *params,
    };

    match noise {
        NoiseModel::Noiseless => {
            for i in 0..m {
                let e = expect(i);
                record.counts_pp[i] = e.pp.round() as u64;
                record.counts_mm[i] = e.mm.round() as u64;
                record.counts_pm[i] = e.pm.round() as u64;
                record.counts_mp[i] = e.mp.round() as u64;
                record.singles_signal.plus[i] = e.signal_plus.round() as u64;
                record.singles_signal.minus[i] = e.signal_minus.round() as u64;
                record.singles_idler.plus[i] = e.idler_plus.round() as u64;
                record.singles_idler.minus[i] = e.idler_minus.round() as u64;
                record.y[i] = e.y;
            }
        }
        NoiseModel::Poisson => {
            for i in 0..m {
                let e = expect(i);
                // Fixed draw order within the per-index stream: the four
                // coincidence channels, then signal singles, then idler.
                let mut rng = seeded_rng(derive_seed(seed, 1 + i as u64));
                let pp = poisson_draw(&mut rng, e.pp);
                let mm = poisson_draw(&mut rng, e.mm);
                let pm = poisson_draw(&mut rng, e.pm);
                let mp = poisson_draw(&mut rng, e.mp);
                record.counts_pp[i] = pp;
                record.counts_mm[i] = mm;
                record.counts_pm[i] = pm;
                record.counts_mp[i] = mp;
                record.singles_signal.plus[i] = poisson_draw(&mut rng, e.signal_plus);
                record.singles_signal.minus[i] = poisson_draw(&mut rng, e.signal_minus);
                record.singles_idler.plus[i] = poisson_draw(&mut rng, e.idler_plus);
                record.singles_idler.minus[i] = poisson_draw(&mut rng, e.idler_minus);
                record.y[i] = (pp + mm) as f64 - (pm + mp) as f64;
            }
        }
    }
    Ok(record)
}

fn poisson_draw(rng: &mut impl Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    let sample: f64 = dist.sample(rng);
    sample as u64
}

/// Total integration time, in seconds, for an exhaustive pixel-pair raster
/// scan of an `n`-pixel-per-arm joint space to reach the target
/// signal-to-noise ratio: `n^3 * snr^2 / flux`.
pub fn estimate_raster_time(n: usize, snr: f64, flux: f64) -> f64 {
    let nf = n as f64;
    nf * nf * nf * snr * snr / flux
}

/// Total acquisition time, in seconds, for `m` compressive measurements at
/// `t_per_element` seconds each (all four pattern combinations included).
pub fn estimate_cs_time(m: usize, t_per_element: f64) -> f64 {
    m as f64 * t_per_element
}
