//! Binary file formats and figure output.
//!
//! All multi-byte integers are little-endian. Indices are persisted 1-based,
//! matching the conventions of the accompanying formulas, and converted at
//! the boundary; in-memory vectors are 0-based.
//!
//! Sampler file (`KFHS`):
//! magic `KFHS`, version u16, `N` u32, `M` u32, seed u64, then `r_S` and
//! `r_I` as u32 arrays of length `M`, then `p_S` and `p_I` as u32 arrays of
//! length `N`. The joint row selections and joint permutation are always
//! rederived from these, never stored.
//!
//! Distribution file (`KFHD`):
//! magic `KFHD`, version u16, `side_S` u32, `side_I` u32, then
//! `side_S^2 * side_I^2` f64 values joint-row-major. Only equal sides are
//! supported.
//!
//! Measurement file (`KFHM`):
//! magic `KFHM`, version u16, `M` u32, an embedded sampler block (complete
//! `KFHS` record), the five optical parameters as f64 in the order
//! `lambda_p, l_z, sigma_p, flux, t_proj`, the four coincidence channels
//! `pp, mm, pm, mp` as u64 arrays of length `M`, `y` as an f64 array, then
//! the singles channels as u64 arrays of length `M` each in the order
//! `signal+, signal-, idler+, idler-`.

use crate::error::{Error, Result};
use crate::reconstruct::TraceRow;
use crate::sampler::{JointSampler, SubspaceSampler};
use crate::spdc::{JointDistribution, MeasurementRecord, OpticalParams, SinglesCounts};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const SAMPLER_MAGIC: &[u8; 4] = b"KFHS";
pub const DISTRIBUTION_MAGIC: &[u8; 4] = b"KFHD";
pub const MEASUREMENT_MAGIC: &[u8; 4] = b"KFHM";
pub const FORMAT_VERSION: u16 = 1;

/// Reader wrapper that tracks the byte offset for error reporting.
struct Cursor<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> Cursor<R> {
    fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    fn fail(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.offset,
            message: message.into(),
        }
    }

    fn read_exact(&mut self, buf: &mut [u8]) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
                Err(self.fail("unexpected end of file"))
            }
            Err(e) => Err(Error::Io(e)),
        }
    }

    fn u16(&mut self) -> Result<u16> {
        let mut b = [0u8; 2];
        self.read_exact(&mut b)?;
        Ok(u16::from_le_bytes(b))
    }

    fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    fn f64(&mut self) -> Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    fn u32_array(&mut self, len: usize) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.u32()?);
        }
        Ok(out)
    }

    fn u64_array(&mut self, len: usize) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(len);
        for _ in 0..len {
            out.push(self.u64()?);
        }
        Ok(out)
    }

    fn f64_array(&mut self, len: usize) -> Result<Vec<f64>> {
        let mut buf = vec![0u8; len * 8];
        self.read_exact(&mut buf)?;
        Ok(buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let mut got = [0u8; 4];
        self.read_exact(&mut got)?;
        if &got != expected {
            return Err(Error::Parse {
                offset: self.offset - 4,
                message: format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(&got),
                    String::from_utf8_lossy(expected)
                ),
            });
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        let v = self.u16()?;
        if v != FORMAT_VERSION {
            return Err(Error::Parse {
                offset: self.offset - 2,
                message: format!("unsupported format version {v}"),
            });
        }
        Ok(())
    }
}

fn write_u32_array(w: &mut impl Write, values: impl Iterator<Item = u32>) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_u64_array(w: &mut impl Write, values: &[u64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn write_f64_array(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

// ---- sampler ----

pub fn write_sampler(w: &mut impl Write, sampler: &JointSampler) -> Result<()> {
    w.write_all(SAMPLER_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(sampler.n() as u32).to_le_bytes())?;
    w.write_all(&(sampler.m() as u32).to_le_bytes())?;
    w.write_all(&sampler.seed().to_le_bytes())?;
    // 1-based on disk.
    write_u32_array(w, sampler.signal().r().iter().map(|&v| v + 1))?;
    write_u32_array(w, sampler.idler().r().iter().map(|&v| v + 1))?;
    write_u32_array(w, sampler.signal().p().iter().map(|&v| v + 1))?;
    write_u32_array(w, sampler.idler().p().iter().map(|&v| v + 1))?;
    Ok(())
}

pub fn read_sampler(r: &mut impl Read) -> Result<JointSampler> {
    let mut cursor = Cursor::new(r);
    read_sampler_inner(&mut cursor)
}

fn read_sampler_inner<R: Read>(cursor: &mut Cursor<R>) -> Result<JointSampler> {
    cursor.magic(SAMPLER_MAGIC)?;
    cursor.version()?;
    let n = cursor.u32()? as usize;
    let m = cursor.u32()? as usize;
    let seed = cursor.u64()?;
    if n < 2 || !n.is_power_of_two() {
        return Err(cursor.fail(format!("dimension {n} is not a power of two")));
    }
    let mut one_based_block = |what: &str, len: usize, max: usize| -> Result<Vec<u32>> {
        let raw = cursor.u32_array(len)?;
        let mut out = Vec::with_capacity(len);
        for v in raw {
            if v == 0 || v as usize > max {
                return Err(Error::Parse {
                    offset: cursor.offset,
                    message: format!("{what} entry {v} outside 1..={max}"),
                });
            }
            out.push(v - 1);
        }
        Ok(out)
    };
    let r_s = one_based_block("r_S", m, n)?;
    let r_i = one_based_block("r_I", m, n)?;
    let p_s = one_based_block("p_S", n, n)?;
    let p_i = one_based_block("p_I", n, n)?;
    let signal = SubspaceSampler::from_parts(n, r_s, p_s, seed)
        .map_err(|e| cursor.fail(format!("signal plan: {e}")))?;
    let idler = SubspaceSampler::from_parts(n, r_i, p_i, seed)
        .map_err(|e| cursor.fail(format!("idler plan: {e}")))?;
    let joint = JointSampler::build(signal, idler)?;
    if joint.m() != m {
        return Err(cursor.fail(format!(
            "stored rows contain duplicates: {} joint rows from {m} entries",
            joint.m()
        )));
    }
    Ok(joint)
}

pub fn write_sampler_file(path: impl AsRef<Path>, sampler: &JointSampler) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sampler(&mut w, sampler)?;
    w.flush()?;
    Ok(())
}

pub fn read_sampler_file(path: impl AsRef<Path>) -> Result<JointSampler> {
    read_sampler(&mut BufReader::new(File::open(path)?))
}

// ---- distribution ----

pub fn write_distribution(w: &mut impl Write, distribution: &JointDistribution) -> Result<()> {
    w.write_all(DISTRIBUTION_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(distribution.side() as u32).to_le_bytes())?;
    w.write_all(&(distribution.side() as u32).to_le_bytes())?;
    write_f64_array(w, distribution.values())?;
    Ok(())
}

pub fn read_distribution(r: &mut impl Read) -> Result<JointDistribution> {
    let mut cursor = Cursor::new(r);
    cursor.magic(DISTRIBUTION_MAGIC)?;
    cursor.version()?;
    let side_s = cursor.u32()? as usize;
    let side_i = cursor.u32()? as usize;
    if side_s != side_i {
        return Err(cursor.fail(format!(
            "asymmetric sides {side_s}x{side_i} are not supported"
        )));
    }
    if side_s < 2 {
        return Err(cursor.fail(format!("side {side_s} too small")));
    }
    let count = side_s * side_s * side_i * side_i;
    let values = cursor.f64_array(count)?;
    JointDistribution::new(side_s, values)
}

pub fn write_distribution_file(
    path: impl AsRef<Path>,
    distribution: &JointDistribution,
) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_distribution(&mut w, distribution)?;
    w.flush()?;
    Ok(())
}

pub fn read_distribution_file(path: impl AsRef<Path>) -> Result<JointDistribution> {
    read_distribution(&mut BufReader::new(File::open(path)?))
}

// ---- measurement ----

pub fn write_measurement(w: &mut impl Write, record: &MeasurementRecord) -> Result<()> {
    w.write_all(MEASUREMENT_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(record.m() as u32).to_le_bytes())?;
    write_sampler(w, &record.sampler)?;
    for value in [
        record.params.lambda_p,
        record.params.l_z,
        record.params.sigma_p,
        record.params.flux,
        record.params.t_proj,
    ] {
        w.write_all(&value.to_le_bytes())?;
    }
    write_u64_array(w, &record.counts_pp)?;
    write_u64_array(w, &record.counts_mm)?;
    write_u64_array(w, &record.counts_pm)?;
    write_u64_array(w, &record.counts_mp)?;
    write_f64_array(w, &record.y)?;
    write_u64_array(w, &record.singles_signal.plus)?;
    write_u64_array(w, &record.singles_signal.minus)?;
    write_u64_array(w, &record.singles_idler.plus)?;
    write_u64_array(w, &record.singles_idler.minus)?;
    Ok(())
}

pub fn read_measurement(r: &mut impl Read) -> Result<MeasurementRecord> {
    let mut cursor = Cursor::new(r);
    cursor.magic(MEASUREMENT_MAGIC)?;
    cursor.version()?;
    let m = cursor.u32()? as usize;
    let sampler = read_sampler_inner(&mut cursor)?;
    if sampler.m() != m {
        return Err(cursor.fail(format!(
            "measurement count {m} does not match sampler count {}",
            sampler.m()
        )));
    }
    let params = OpticalParams {
        lambda_p: cursor.f64()?,
        l_z: cursor.f64()?,
        sigma_p: cursor.f64()?,
        flux: cursor.f64()?,
        t_proj: cursor.f64()?,
    };
    params
        .validate()
        .map_err(|e| cursor.fail(format!("optical parameters: {e}")))?;
    let counts_pp = cursor.u64_array(m)?;
    let counts_mm = cursor.u64_array(m)?;
    let counts_pm = cursor.u64_array(m)?;
    let counts_mp = cursor.u64_array(m)?;
    let y = cursor.f64_array(m)?;
    let singles_signal = SinglesCounts {
        plus: cursor.u64_array(m)?,
        minus: cursor.u64_array(m)?,
    };
    let singles_idler = SinglesCounts {
        plus: cursor.u64_array(m)?,
        minus: cursor.u64_array(m)?,
    };
    Ok(MeasurementRecord {
        y,
        counts_pp,
        counts_mm,
        counts_pm,
        counts_mp,
        singles_signal,
        singles_idler,
        sampler,
        params,
    })
}

pub fn write_measurement_file(path: impl AsRef<Path>, record: &MeasurementRecord) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_measurement(&mut w, record)?;
    w.flush()?;
    Ok(())
}

pub fn read_measurement_file(path: impl AsRef<Path>) -> Result<MeasurementRecord> {
    read_measurement(&mut BufReader::new(File::open(path)?))
}

// ---- trace ----

/// One line per iteration: index, mutual information in bits, relative
/// residual, nonzero count, threshold; tab separated.
pub fn write_trace(w: &mut impl Write, trace: &[TraceRow]) -> Result<()> {
    for row in trace {
        writeln!(
            w,
            "{}\t{:.9}\t{:.9}\t{}\t{:.9e}",
            row.iteration, row.mi_bits, row.relative_residual, row.nonzero, row.threshold
        )?;
    }
    Ok(())
}

pub fn write_trace_file(path: impl AsRef<Path>, trace: &[TraceRow]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_trace(&mut w, trace)?;
    w.flush()?;
    Ok(())
}

// ---- portable graymap ----

/// 8-bit binary PGM (`P5`), linear scale normalized to the maximum value.
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    fn from_values(values: &[f64], width: usize, height: usize) -> Self {
        let max = values.iter().copied().fold(0.0f64, f64::max);
        let pixels = values
            .iter()
            .map(|&v| {
                if max > 0.0 {
                    (v.max(0.0) / max * 255.0).round() as u8
                } else {
                    0
                }
            })
            .collect();
        Self {
            width,
            height,
            pixels,
        }
    }
}

/// Render the full `N x N` joint image (signal index along rows, idler along
/// columns). With `zoom`, crop to the bounding box of the smallest set of
/// pixels holding 99% of the mass.
pub fn render_joint(distribution: &JointDistribution, zoom: bool) -> GrayImage {
    let n = distribution.n_subspace();
    let values = distribution.values();
    if !zoom {
        return GrayImage::from_values(values, n, n);
    }
    let cutoff = top_mass_cutoff(values, 0.99);
    let (mut r0, mut r1, mut c0, mut c1) = (n, 0usize, n, 0usize);
    for (idx, &v) in values.iter().enumerate() {
        if v >= cutoff && v > 0.0 {
            let (r, c) = (idx / n, idx % n);
            r0 = r0.min(r);
            r1 = r1.max(r);
            c0 = c0.min(c);
            c1 = c1.max(c);
        }
    }
    if r0 > r1 {
        // Degenerate all-zero distribution; fall back to the full frame.
        return GrayImage::from_values(values, n, n);
    }
    let (height, width) = (r1 - r0 + 1, c1 - c0 + 1);
    let mut cropped = Vec::with_capacity(width * height);
    for r in r0..=r1 {
        cropped.extend_from_slice(&values[r * n + c0..r * n + c1 + 1]);
    }
    GrayImage::from_values(&cropped, width, height)
}

/// Smallest value such that entries at or above it carry at least `fraction`
/// of the total mass.
fn top_mass_cutoff(values: &[f64], fraction: f64) -> f64 {
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return f64::INFINITY;
    }
    let mut sorted: Vec<f64> = values.iter().copied().filter(|&v| v > 0.0).collect();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    for &v in &sorted {
        acc += v;
        if acc >= fraction * total {
            return v;
        }
    }
    0.0
}

/// Render a length-`N` marginal as its `side x side` pixel grid.
pub fn render_marginal(marginal: &[f64], side: usize) -> Result<GrayImage> {
    if marginal.len() != side * side {
        return Err(Error::ShapeMismatch {
            what: "marginal image",
            expected: side * side,
            actual: marginal.len(),
        });
    }
    Ok(GrayImage::from_values(marginal, side, side))
}

pub fn write_pgm(w: &mut impl Write, image: &GrayImage) -> Result<()> {
    write!(w, "P5\n{} {}\n255\n", image.width, image.height)?;
    w.write_all(&image.pixels)?;
    Ok(())
}

pub fn write_pgm_file(path: impl AsRef<Path>, image: &GrayImage) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_pgm(&mut w, image)?;
    w.flush()?;
    Ok(())
}
