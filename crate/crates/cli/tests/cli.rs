//! End-to-end checks of the `kfh` binary.

use std::path::Path;
use std::process::{Command, Output};

fn kfh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kfh"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn simulate_tiny(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "simulate",
        "--side",
        "4",
        "--measurements",
        "24",
        "--seed",
        "9",
        "--sigma-plus",
        "1.5",
        "--sigma-minus",
        "0.4",
        "--out",
        out,
    ];
    args.extend_from_slice(extra);
    kfh(&args)
}

#[test]
fn simulate_writes_parseable_files_and_time_estimates() {
    let dir = tempfile::tempdir().unwrap();
    let output = simulate_tiny(dir.path(), &[]);
    assert!(output.status.success(), "{output:?}");
    let text = stdout(&output);
    assert!(text.contains("raster_scan:"), "{text}");
    assert!(text.contains("compressive_scan:"), "{text}");

    let truth = kfh_core::io::read_distribution_file(dir.path().join("truth.kfhd")).unwrap();
    assert_eq!(truth.side(), 4);
    let sampler = kfh_core::io::read_sampler_file(dir.path().join("sampler.kfhs")).unwrap();
    assert_eq!(sampler.n(), 16);
    let record = kfh_core::io::read_measurement_file(dir.path().join("measurement.kfhm")).unwrap();
    assert_eq!(record.sampler, sampler);
}

#[test]
fn simulate_rejects_non_power_of_two_side() {
    let dir = tempfile::tempdir().unwrap();
    let output = kfh(&[
        "simulate",
        "--side",
        "48",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(2), "{output:?}");
}

#[test]
fn reference_scale_time_estimates() {
    let output = kfh(&["estimate-time"]);
    assert!(output.status.success());
    let text = stdout(&output);
    assert!(text.contains("49.7 days"), "{text}");
    assert!(text.contains("44.4 hours"), "{text}");
}

#[test]
fn full_scale_simulation_reports_acquisition_times() {
    // The headline configuration: 64 pixels per axis, twenty thousand
    // measurements. Files land on disk and the printed estimates match the
    // closed forms.
    let dir = tempfile::tempdir().unwrap();
    let output = kfh(&[
        "simulate",
        "--side",
        "64",
        "--measurements",
        "20000",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let text = stdout(&output);
    assert!(text.contains("49.7 days"), "{text}");
    assert!(text.contains("44.4 hours"), "{text}");

    let truth = kfh_core::io::read_distribution_file(dir.path().join("truth.kfhd")).unwrap();
    assert_eq!(truth.side(), 64);
    let record =
        kfh_core::io::read_measurement_file(dir.path().join("measurement.kfhm")).unwrap();
    assert!(record.m() > 19_900 && record.m() <= 20_000, "{}", record.m());
}

#[test]
fn reconstruct_is_deterministic_and_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate_tiny(dir.path(), &[]).status.success());
    let measurement = dir.path().join("measurement.kfhm");

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let output = kfh(&[
            "reconstruct",
            measurement.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(output.status.success(), "{output:?}");
    }
    let bytes_a = std::fs::read(out_a.join("reconstruction.kfhd")).unwrap();
    let bytes_b = std::fs::read(out_b.join("reconstruction.kfhd")).unwrap();
    assert_eq!(bytes_a, bytes_b);

    let trace = std::fs::read_to_string(out_a.join("trace.tsv")).unwrap();
    for line in trace.lines() {
        assert_eq!(line.split('\t').count(), 5, "{line:?}");
    }
    assert!(trace.lines().count() >= 2);
}

#[test]
fn masked_reconstruction_never_reports_more_information() {
    // Noisy record at ten measurements; the masked run must not exceed the
    // unmasked run's mutual information.
    let dir = tempfile::tempdir().unwrap();
    let output = kfh(&[
        "simulate",
        "--side",
        "8",
        "--measurements",
        "10",
        "--seed",
        "3",
        "--flux",
        "5e3",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let measurement = dir.path().join("measurement.kfhm");

    let mi_of = |out: &Path, masked: bool| -> f64 {
        let mut args = vec![
            "reconstruct",
            measurement.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        if masked {
            args.push("--use-marginals");
        }
        let output = kfh(&args);
        assert!(output.status.success(), "{output:?}");
        let analyze = kfh(&["analyze", out.join("reconstruction.kfhd").to_str().unwrap()]);
        assert!(analyze.status.success());
        stdout(&analyze)
            .lines()
            .find_map(|l| {
                l.strip_prefix("mutual_information_bits: ")
                    .map(str::to_owned)
            })
            .unwrap()
            .parse()
            .unwrap()
    };
    let unmasked = mi_of(&dir.path().join("u"), false);
    let masked = mi_of(&dir.path().join("m"), true);
    assert!(
        masked <= unmasked + 1e-9,
        "masked {masked} vs unmasked {unmasked}"
    );
}

#[test]
fn analyze_reports_known_values() {
    let dir = tempfile::tempdir().unwrap();

    // Product distribution: zero bits, Schmidt number one.
    let product = kfh_core::spdc::double_gaussian_joint(4, 2.0, 2.0, 1.0).unwrap();
    let product_path = dir.path().join("product.kfhd");
    kfh_core::io::write_distribution_file(&product_path, &product).unwrap();
    let text = stdout(&kfh(&["analyze", product_path.to_str().unwrap()]));
    assert!(text.contains("mutual_information_bits: 0.000000"), "{text}");
    assert!(text.contains("schmidt_number: 1.0000"), "{text}");

    // Perfectly correlated diagonal over N = 4: two bits.
    let mut values = vec![0.0; 16];
    for i in 0..4 {
        values[4 * i + i] = 0.25;
    }
    let diagonal = kfh_core::spdc::JointDistribution::new(2, values).unwrap();
    let diagonal_path = dir.path().join("diagonal.kfhd");
    kfh_core::io::write_distribution_file(&diagonal_path, &diagonal).unwrap();
    let text = stdout(&kfh(&["analyze", diagonal_path.to_str().unwrap()]));
    assert!(text.contains("mutual_information_bits: 2.000000"), "{text}");

    // Theoretical bound line uses the configured pump parameters.
    let text = stdout(&kfh(&[
        "analyze",
        diagonal_path.to_str().unwrap(),
        "--theory",
    ]));
    assert!(text.contains("theoretical_max_bits: 10.9"), "{text}");
}

#[test]
fn plot_emits_valid_pgm() {
    let dir = tempfile::tempdir().unwrap();
    assert!(simulate_tiny(dir.path(), &[]).status.success());
    let truth = dir.path().join("truth.kfhd");

    let joint = dir.path().join("joint.pgm");
    let output = kfh(&[
        "plot",
        truth.to_str().unwrap(),
        "--out",
        joint.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let bytes = std::fs::read(&joint).unwrap();
    assert!(bytes.starts_with(b"P5\n16 16\n255\n"));
    assert_eq!(bytes.len(), b"P5\n16 16\n255\n".len() + 256);

    let marginal = dir.path().join("marginal.pgm");
    let output = kfh(&[
        "plot",
        truth.to_str().unwrap(),
        "--marginal",
        "s",
        "--out",
        marginal.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    assert!(std::fs::read(&marginal)
        .unwrap()
        .starts_with(b"P5\n4 4\n255\n"));

    let zoomed = dir.path().join("zoom.pgm");
    let output = kfh(&[
        "plot",
        truth.to_str().unwrap(),
        "--zoom",
        "--out",
        zoomed.to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let header = std::fs::read(&zoomed).unwrap();
    assert!(header.starts_with(b"P5\n"));
}

#[test]
fn corrupt_magic_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.kfhm");
    std::fs::write(&bad, b"XXXX not a measurement").unwrap();
    let output = kfh(&[
        "reconstruct",
        bad.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(output.status.code(), Some(3), "{output:?}");
    let stderr = String::from_utf8_lossy(&output.stderr).into_owned();
    assert!(stderr.contains("byte"), "{stderr}");
}

#[test]
fn truncation_warning_surfaces() {
    // Zero flux gives an all-zero measurement vector; the first update
    // zeroes everything and the loop reports truncation.
    let dir = tempfile::tempdir().unwrap();
    let output = simulate_tiny(dir.path(), &["--flux", "0"]);
    assert!(output.status.success(), "{output:?}");
    let result = kfh(&[
        "reconstruct",
        dir.path().join("measurement.kfhm").to_str().unwrap(),
        "--out",
        dir.path().join("r").to_str().unwrap(),
    ]);
    assert!(result.status.success(), "{result:?}");
    let stderr = String::from_utf8_lossy(&result.stderr).into_owned();
    assert!(stderr.contains("truncated"), "{stderr}");
}

#[test]
fn config_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("experiment.conf");
    std::fs::write(
        &config_path,
        "side = 4\nmeasurements = 12\nseed = 5\nsigma_plus = 1.5\nsigma_minus = 0.4\n",
    )
    .unwrap();
    let output = kfh(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(output.status.success(), "{output:?}");
    let sampler = kfh_core::io::read_sampler_file(dir.path().join("sampler.kfhs")).unwrap();
    assert_eq!(sampler.n(), 16);
    assert_eq!(sampler.seed(), 5);

    // Flag overrides beat the file.
    let output = kfh(&[
        "simulate",
        "--config",
        config_path.to_str().unwrap(),
        "--seed",
        "8",
        "--out",
        dir.path().join("override").to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let sampler =
        kfh_core::io::read_sampler_file(dir.path().join("override").join("sampler.kfhs")).unwrap();
    assert_eq!(sampler.seed(), 8);
}
