//! `kfh` -- simulate, reconstruct and analyze joint-space compressive
//! measurements of correlated photon pairs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O or file-format
//! error, 4 numerical failure.

mod config;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::ExperimentConfig;
use kfh_core::info::{self, InfoReport, TransverseDims};
use kfh_core::io;
use kfh_core::reconstruct::{build_marginal_mask, reconstruct, reconstruct_marginal};
use kfh_core::sampler::JointSampler;
use kfh_core::spdc::{
    double_gaussian_joint, estimate_cs_time, estimate_raster_time, simulate_measurement, NoiseModel,
};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "kfh",
    version,
    about = "Joint-space compressive sensing with fast Hadamard transforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by commands that read the experiment configuration.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat key=value configuration file; flags override its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Random seed for plans and noise.
    #[arg(long)]
    seed: Option<u64>,
    /// Pixels per axis per particle (power of two).
    #[arg(long)]
    side: Option<usize>,
    /// Requested measurement count (before deduplication).
    #[arg(long)]
    measurements: Option<usize>,
    /// Coincidence rate, counts per second.
    #[arg(long)]
    flux: Option<f64>,
    /// Integration time per displayed pattern combination, seconds.
    #[arg(long)]
    t_proj: Option<f64>,
    /// Symmetric-coordinate width of the synthetic source, pixels.
    #[arg(long)]
    sigma_plus: Option<f64>,
    /// Antisymmetric-coordinate width of the synthetic source, pixels.
    #[arg(long)]
    sigma_minus: Option<f64>,
    /// Pump wavelength, meters.
    #[arg(long)]
    pump_wavelength: Option<f64>,
    /// Crystal length, meters.
    #[arg(long)]
    crystal_length: Option<f64>,
    /// Pump standard deviation, meters.
    #[arg(long)]
    pump_sigma: Option<f64>,
    /// Hard-threshold ramp per iteration.
    #[arg(long)]
    hard_threshold_step: Option<f64>,
    /// Iteration cap for the reconstruction loop.
    #[arg(long)]
    max_iterations: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<ExperimentConfig, CmdError> {
        let mut config = ExperimentConfig::default();
        if let Some(path) = &self.config {
            config.load_file(path).map_err(|e| CmdError::Config(e.0))?;
        }
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(value) = self.$field { config.$field = value; })*
            };
        }
        apply!(
            seed,
            side,
            measurements,
            flux,
            t_proj,
            sigma_plus,
            sigma_minus,
            pump_wavelength,
            crystal_length,
            pump_sigma,
            hard_threshold_step,
            max_iterations
        );
        config.validate().map_err(|e| CmdError::Config(e.0))?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MarginalArm {
    S,
    I,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic ground truth, a measurement plan, and a
    /// simulated coincidence record.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for truth.kfhd, sampler.kfhs, measurement.kfhm.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// Store exact expectations instead of Poisson draws.
        #[arg(long)]
        noiseless: bool,
    },
    /// Reconstruct a joint distribution from a measurement file.
    Reconstruct {
        /// Measurement record (KFHM).
        measurement: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for reconstruction.kfhd and trace.tsv.
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
        /// Recover both marginals from the singles channels first and
        /// constrain the joint support to their outer product.
        #[arg(long)]
        use_marginals: bool,
    },
    /// Report mutual information and channel capacity of a distribution.
    Analyze {
        /// Distribution file (KFHD).
        distribution: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Include the closed-form theoretical maximum for the configured
        /// optical parameters.
        #[arg(long)]
        theory: bool,
    },
    /// Render a distribution (or one of its marginals) as a binary PGM.
    Plot {
        /// Distribution file (KFHD).
        distribution: PathBuf,
        /// Output image path.
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Crop to the bounding box of the top 99% of the mass.
        #[arg(long)]
        zoom: bool,
        /// Render a marginal instead of the joint image.
        #[arg(long, value_enum, value_name = "S|I")]
        marginal: Option<MarginalArm>,
    },
    /// Print acquisition-time estimates for raster and compressive scans.
    EstimateTime {
        /// Subspace dimension N (pixels per arm).
        #[arg(long, default_value_t = 4096)]
        dimension: usize,
        /// Target signal-to-noise ratio for the raster scan.
        #[arg(long, default_value_t = 1.0)]
        snr: f64,
        /// Coincidence rate, counts per second.
        #[arg(long, default_value_t = 1.6e4)]
        flux: f64,
        /// Compressive measurement count.
        #[arg(long, default_value_t = 20_000)]
        measurements: usize,
        /// Seconds per measurement element (all four pattern combinations).
        #[arg(long, default_value_t = 8.0)]
        seconds_per_element: f64,
    },
}

/// Failures mapped to exit codes.
enum CmdError {
    /// Invalid configuration or arguments (exit 2).
    Config(String),
    /// File system or format trouble (exit 3).
    Io(String),
    /// The numerics refused (exit 4).
    Numerical(String),
}

impl CmdError {
    fn exit_code(&self) -> u8 {
        match self {
            CmdError::Config(_) => 2,
            CmdError::Io(_) => 3,
            CmdError::Numerical(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CmdError::Config(m) | CmdError::Io(m) | CmdError::Numerical(m) => m,
        }
    }
}

/// Errors from core calls that touch files.
fn io_err(e: kfh_core::Error) -> CmdError {
    CmdError::Io(e.to_string())
}

/// Errors from core calls that compute.
fn num_err(e: kfh_core::Error) -> CmdError {
    CmdError::Numerical(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            config,
            out,
            noiseless,
        } => cmd_simulate(&config, &out, noiseless),
        Command::Reconstruct {
            measurement,
            config,
            out,
            use_marginals,
        } => cmd_reconstruct(&measurement, &config, &out, use_marginals),
        Command::Analyze {
            distribution,
            config,
            theory,
        } => cmd_analyze(&distribution, &config, theory),
        Command::Plot {
            distribution,
            out,
            zoom,
            marginal,
        } => cmd_plot(&distribution, &out, zoom, marginal),
        Command::EstimateTime {
            dimension,
            snr,
            flux,
            measurements,
            seconds_per_element,
        } => {
            print_time_estimates(dimension, snr, flux, measurements, seconds_per_element);
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn print_time_estimates(n: usize, snr: f64, flux: f64, m: usize, seconds_per_element: f64) {
    let raster = estimate_raster_time(n, snr, flux);
    let cs = estimate_cs_time(m, seconds_per_element);
    println!(
        "raster_scan: {raster:.3e} s ({:.1} days) for N={n}, SNR={snr}, flux={flux:.3e}/s",
        raster / 86_400.0
    );
    println!(
        "compressive_scan: {cs:.3e} s ({:.1} hours) for M={m} at {seconds_per_element} s/element",
        cs / 3_600.0
    );
}

fn create_out_dir(out: &Path) -> Result<(), CmdError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CmdError::Io(format!("cannot create {}: {e}", out.display())))
}

fn cmd_simulate(args: &ConfigArgs, out: &Path, noiseless_flag: bool) -> Result<(), CmdError> {
    let config = args.build()?;
    create_out_dir(out)?;
    let n = config.side * config.side;
    let truth = double_gaussian_joint(
        config.side,
        config.sigma_plus,
        config.sigma_minus,
        config.pixel_pitch,
    )
    .map_err(num_err)?;
    let sampler = JointSampler::generate(n, config.measurements, config.seed).map_err(num_err)?;
    let noise = if noiseless_flag || config.noiseless {
        NoiseModel::Noiseless
    } else {
        NoiseModel::Poisson
    };
    let params = config.optical_params();
    let record =
        simulate_measurement(&truth, &sampler, &params, noise, config.seed).map_err(num_err)?;

    let truth_path = out.join("truth.kfhd");
    let sampler_path = out.join("sampler.kfhs");
    let measurement_path = out.join("measurement.kfhm");
    io::write_distribution_file(&truth_path, &truth).map_err(io_err)?;
    io::write_sampler_file(&sampler_path, &sampler).map_err(io_err)?;
    io::write_measurement_file(&measurement_path, &record).map_err(io_err)?;

    println!(
        "simulated side={} N={n} M={} (of {} requested) seed={}",
        config.side,
        sampler.m(),
        config.measurements,
        config.seed
    );
    println!("wrote {}", truth_path.display());
    println!("wrote {}", sampler_path.display());
    println!("wrote {}", measurement_path.display());
    print_time_estimates(n, 1.0, config.flux, sampler.m(), 4.0 * config.t_proj);
    Ok(())
}

fn cmd_reconstruct(
    measurement: &Path,
    args: &ConfigArgs,
    out: &Path,
    use_marginals_flag: bool,
) -> Result<(), CmdError> {
    let config = args.build()?;
    let record = io::read_measurement_file(measurement).map_err(io_err)?;
    create_out_dir(out)?;
    let recon_config = config.reconstruction_config();
    let use_marginals = use_marginals_flag || config.use_marginals;

    let mask = if use_marginals {
        let signal = reconstruct_marginal(
            &record.singles_signal,
            record.sampler.signal(),
            &recon_config,
        )
        .map_err(num_err)?;
        let idler =
            reconstruct_marginal(&record.singles_idler, record.sampler.idler(), &recon_config)
                .map_err(num_err)?;
        Some(build_marginal_mask(&signal.marginal, &idler.marginal).map_err(num_err)?)
    } else {
        None
    };
    let result = reconstruct(&record, &recon_config, mask.as_ref()).map_err(num_err)?;

    let distribution_path = out.join("reconstruction.kfhd");
    let trace_path = out.join("trace.tsv");
    io::write_distribution_file(&distribution_path, &result.distribution).map_err(io_err)?;
    io::write_trace_file(&trace_path, &result.trace).map_err(io_err)?;

    if result.truncated {
        eprintln!("warning: threshold schedule truncated the iteration; best iterate returned");
    }
    let mi = info::mutual_information(&result.distribution).map_err(num_err)?;
    println!(
        "reconstructed {} ({} iterations, best {}): {mi:.4} bits, {} modes",
        if use_marginals {
            "with marginal mask"
        } else {
            "unmasked"
        },
        result.trace.len() - 1,
        result.best_iteration,
        info::schmidt_number(mi).round(),
    );
    println!("wrote {}", distribution_path.display());
    println!("wrote {}", trace_path.display());
    Ok(())
}

fn cmd_analyze(distribution: &Path, args: &ConfigArgs, theory: bool) -> Result<(), CmdError> {
    let config = args.build()?;
    let dist = io::read_distribution_file(distribution).map_err(io_err)?;
    let params = theory.then(|| config.optical_params());
    let report = InfoReport::compute(&dist, params.as_ref()).map_err(num_err)?;
    print!("{}", report.to_text());
    if let Some(p) = params {
        // One-dimensional bound printed alongside for reference.
        let one = info::theoretical_max_mi(&p, TransverseDims::One).map_err(num_err)?;
        println!("theoretical_max_one_dim_bits: {one:.4}");
    }
    Ok(())
}

fn cmd_plot(
    distribution: &Path,
    out: &Path,
    zoom: bool,
    marginal: Option<MarginalArm>,
) -> Result<(), CmdError> {
    let dist = io::read_distribution_file(distribution).map_err(io_err)?;
    let image = match marginal {
        Some(arm) => {
            let (signal, idler) = info::marginals(&dist);
            let values = match arm {
                MarginalArm::S => signal,
                MarginalArm::I => idler,
            };
            io::render_marginal(&values, dist.side()).map_err(num_err)?
        }
        None => io::render_joint(&dist, zoom),
    };
    io::write_pgm_file(out, &image).map_err(io_err)?;
    println!("wrote {} ({}x{})", out.display(), image.width, image.height);
    Ok(())
}
