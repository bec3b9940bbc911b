//! Matrix-free compressive sensing of joint two-particle distributions with
//! randomized fast Hadamard transforms.
//!
//! The crate measures and reconstructs the joint position distribution of a
//! correlated photon pair without ever materializing the sensing matrix:
//! per-arm Hadamard plans combine through their Kronecker structure into a
//! joint-space plan whose forward and adjoint products cost one fast
//! transform each. On top of that sit a photon-counting measurement
//! simulator, an iterative thresholding reconstructor driven by mutual
//! information, and the information metrics themselves.
//!
//! Modules:
//! * [`hadamard`] -- Sylvester transform primitives and sign splitting.
//! * [`sampler`] -- subspace/joint measurement plans, forward/adjoint operators.
//! * [`spdc`] -- double-Gaussian sources and coincidence-count simulation.
//! * [`wavelet`] -- 9/7 biorthogonal transform and universal shrinkage.
//! * [`reconstruct`] -- the iterative solver and marginal-support masking.
//! * [`info`] -- mutual information, Schmidt number, theoretical bounds.
//! * [`io`] -- binary file formats, iteration traces, graymap rendering.

pub mod error;
pub mod hadamard;
pub mod info;
pub mod io;
mod parallel;
pub mod reconstruct;
pub mod rng;
pub mod sampler;
pub mod spdc;
pub mod wavelet;

pub use error::{Error, Result};
pub use hadamard::{fwht, fwht_in_place, hadamard_row, kron, split_signs, SignSplitRow};
pub use info::{
    mutual_information, schmidt_number, theoretical_max_mi, InfoReport, TransverseDims,
};
pub use reconstruct::{
    build_marginal_mask, reconstruct, reconstruct_marginal, MarginalMask, Reconstruction,
    ReconstructionConfig,
};
pub use sampler::{inverse_permutation, JointSampler, SparseBasis, SubspaceSampler};
pub use spdc::{
    double_gaussian_joint, estimate_cs_time, estimate_raster_time, simulate_measurement,
    JointDistribution, MeasurementRecord, NoiseModel, OpticalParams,
};
