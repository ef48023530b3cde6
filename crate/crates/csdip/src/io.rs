//! On-disk formats.
//!
//! Binary containers (measurements, weights) are a single line of compact
//! JSON — the header — terminated by `\n`, followed immediately by the raw
//! payload: little-endian IEEE-754 doubles, with no framing or padding.
//! The header always carries `"dtype": "f64le"` so a reader can refuse
//! anything it does not understand. Prior statistics and run manifests are
//! plain JSON files; images are 8-bit PNG/PGM/PPM through the usual
//! `[-1, 1]` pixel mapping.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{GeneratorConfig, GeneratorWeights};
use crate::linops::{make_fourier, make_gaussian, IdentityOperator, Operator, OperatorKind};
use crate::metrics::{pixel_to_signal, signal_to_pixel};
use crate::regularization::PriorStats;
use crate::solver::SolverConfig;
use crate::tensor::Tensor;

/// Salt XORed into an operator seed to derive the noise seed, so the
/// operator's and the noise's random streams never collide.
pub const NOISE_SALT: u64 = 0x6E01_5E00_0000_0001;

const DTYPE: &str = "f64le";

fn write_container(path: &Path, header: &str, payload: &[f64]) -> Result<()> {
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    out.write_all(header.as_bytes())?;
    out.write_all(b"\n")?;
    for v in payload {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

fn read_container(path: &Path) -> Result<(Vec<u8>, Vec<f64>)> {
    let bytes = fs::read(path)?;
    let split = bytes.iter().position(|&b| b == b'\n').ok_or_else(|| {
        Error::format(format!("{}: no header line", path.display()))
    })?;
    let header = bytes[..split].to_vec();
    let body = &bytes[split + 1..];
    if body.len() % 8 != 0 {
        return Err(Error::format(format!(
            "{}: payload of {} bytes is not a whole number of doubles",
            path.display(),
            body.len()
        )));
    }
    let payload = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunks_exact yields 8 bytes")))
        .collect();
    Ok((header, payload))
}

/// Header of a measurement container.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementHeader {
    pub kind: OperatorKind,
    /// Measurement count (payload length).
    pub m: usize,
    /// Signal length the operator expects.
    pub n: usize,
    pub height: usize,
    pub width: usize,
    /// Radial line count; present only for the partial-frequency kind.
    pub lines: Option<usize>,
    /// Noise variance parameter used when the file was produced.
    pub sigma2: f64,
    /// Seed the file was produced from. Required to regenerate a dense
    /// Gaussian operator; for other kinds it only records provenance.
    pub seed: Option<u64>,
    pub dtype: String,
}

impl MeasurementHeader {
    /// Channel count implied by the stored dimensions.
    pub fn channels(&self) -> Result<usize> {
        let hw = self.height * self.width;
        if hw == 0 || self.n % hw != 0 {
            return Err(Error::format(format!(
                "signal length {} does not tile {} x {} images",
                self.n, self.height, self.width
            )));
        }
        Ok(self.n / hw)
    }
}

/// A measurement file: header plus the measured values themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementFile {
    pub header: MeasurementHeader,
    pub y: Tensor,
}

pub fn write_measurements(path: &Path, file: &MeasurementFile) -> Result<()> {
    if file.header.dtype != DTYPE {
        return Err(Error::format(format!("unsupported dtype {:?}", file.header.dtype)));
    }
    if file.y.len() != file.header.m {
        return Err(Error::shape(
            "write_measurements",
            format!("header m {} vs payload {}", file.header.m, file.y.len()),
        ));
    }
    let header = serde_json::to_string(&file.header)?;
    write_container(path, &header, file.y.data())
}

pub fn read_measurements(path: &Path) -> Result<MeasurementFile> {
    let (header_bytes, payload) = read_container(path)?;
    let header: MeasurementHeader = serde_json::from_slice(&header_bytes)?;
    if header.dtype != DTYPE {
        return Err(Error::format(format!("unsupported dtype {:?}", header.dtype)));
    }
    if payload.len() != header.m {
        return Err(Error::format(format!(
            "{}: header promises {} measurements, payload holds {}",
            path.display(),
            header.m,
            payload.len()
        )));
    }
    let y = Tensor::from_vec(&[header.m], payload)?;
    Ok(MeasurementFile { header, y })
}

/// Rebuilds the measurement operator a header describes. Dense Gaussian
/// operators regenerate from their recorded seed; partial-frequency
/// operators from their grid and line count.
pub fn operator_from_header(header: &MeasurementHeader) -> Result<Operator> {
    match header.kind {
        OperatorKind::Gaussian => {
            let seed = header
                .seed
                .ok_or_else(|| Error::format("gaussian header without a seed".to_string()))?;
            let op = make_gaussian(header.m, header.n, seed)?;
            Ok(Operator::Gaussian(op))
        }
        OperatorKind::Fourier => {
            let lines = header
                .lines
                .ok_or_else(|| Error::format("fourier header without a line count".to_string()))?;
            if header.channels()? != 1 {
                return Err(Error::format(
                    "fourier measurements expect single-channel images".to_string(),
                ));
            }
            let op = Operator::Fourier(make_fourier(header.height, header.width, lines)?);
            if op.measurement_len() != header.m || op.signal_len() != header.n {
                return Err(Error::format(format!(
                    "fourier header sizes {} / {} disagree with the mask ({} / {})",
                    header.m,
                    header.n,
                    op.measurement_len(),
                    op.signal_len()
                )));
            }
            Ok(op)
        }
        OperatorKind::Identity => {
            if header.m != header.n {
                return Err(Error::format(format!(
                    "identity header with m {} != n {}",
                    header.m, header.n
                )));
            }
            Ok(Operator::Identity(IdentityOperator::new(header.n)))
        }
    }
}

const WEIGHTS_MAGIC: &str = "generator-weights";

#[derive(Serialize, Deserialize)]
struct WeightsHeader {
    format: String,
    config: GeneratorConfig,
    param_count: usize,
    dtype: String,
}

/// Writes generator weights with their architecture so they can be reloaded
/// standalone.
pub fn write_weights(path: &Path, weights: &GeneratorWeights) -> Result<()> {
    let header = WeightsHeader {
        format: WEIGHTS_MAGIC.to_string(),
        config: weights.config.clone(),
        param_count: weights.param_count(),
        dtype: DTYPE.to_string(),
    };
    let header = serde_json::to_string(&header)?;
    write_container(path, &header, &weights.flatten())
}

pub fn read_weights(path: &Path) -> Result<GeneratorWeights> {
    let (header_bytes, payload) = read_container(path)?;
    let header: WeightsHeader = serde_json::from_slice(&header_bytes)?;
    if header.format != WEIGHTS_MAGIC {
        return Err(Error::format(format!("unexpected container format {:?}", header.format)));
    }
    if header.dtype != DTYPE {
        return Err(Error::format(format!("unsupported dtype {:?}", header.dtype)));
    }
    if payload.len() != header.param_count {
        return Err(Error::format(format!(
            "{}: header promises {} parameters, payload holds {}",
            path.display(),
            header.param_count,
            payload.len()
        )));
    }
    GeneratorWeights::from_flat(&header.config, &payload)
}

pub fn write_prior_stats(path: &Path, stats: &PriorStats) -> Result<()> {
    stats.validate()?;
    let mut text = serde_json::to_string_pretty(stats)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_prior_stats(path: &Path) -> Result<PriorStats> {
    let text = fs::read(path)?;
    let stats: PriorStats = serde_json::from_slice(&text)?;
    stats.validate()?;
    Ok(stats)
}

pub fn write_generator_config(path: &Path, config: &GeneratorConfig) -> Result<()> {
    config.validate()?;
    let mut text = serde_json::to_string_pretty(config)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_generator_config(path: &Path) -> Result<GeneratorConfig> {
    let text = fs::read(path)?;
    let config: GeneratorConfig = serde_json::from_slice(&text)?;
    config.validate()?;
    Ok(config)
}

/// Saves an image tensor, `[C, H, W]` with `C` of 1 or 3 and values in
/// `[-1, 1]`, as an 8-bit image; the format follows the file extension.
pub fn save_image(path: &Path, image: &Tensor) -> Result<()> {
    let dims = image.shape();
    if dims.len() != 3 {
        return Err(Error::shape("save_image", format!("{dims:?} is not [C, H, W]")));
    }
    let (c, h, w) = (dims[0], dims[1], dims[2]);
    if h == 0 || w == 0 {
        return Err(Error::invalid("save_image", format!("{h} x {w} image")));
    }
    match c {
        1 => {
            let pixels: Vec<u8> = image.data().iter().map(|&v| signal_to_pixel(v)).collect();
            let img = image::GrayImage::from_raw(w as u32, h as u32, pixels)
                .expect("buffer length matches dimensions");
            img.save(path)?;
        }
        3 => {
            let plane = h * w;
            let mut pixels = Vec::with_capacity(3 * plane);
            for i in 0..plane {
                for ch in 0..3 {
                    pixels.push(signal_to_pixel(image.data()[ch * plane + i]));
                }
            }
            let img = image::RgbImage::from_raw(w as u32, h as u32, pixels)
                .expect("buffer length matches dimensions");
            img.save(path)?;
        }
        _ => {
            return Err(Error::invalid(
                "save_image",
                format!("{c} channels; only 1 or 3 are supported"),
            ))
        }
    }
    Ok(())
}

/// Loads an image as `[C, H, W]` in `[-1, 1]`; color inputs become three
/// channels, everything else one.
pub fn load_image(path: &Path) -> Result<Tensor> {
    let img = image::open(path)?;
    if img.color().channel_count() >= 3 {
        let rgb = img.to_rgb8();
        let (w, h) = (rgb.width() as usize, rgb.height() as usize);
        let plane = h * w;
        let mut data = vec![0.0; 3 * plane];
        for (i, px) in rgb.pixels().enumerate() {
            for ch in 0..3 {
                data[ch * plane + i] = pixel_to_signal(px.0[ch]);
            }
        }
        Tensor::from_vec(&[3, h, w], data)
    } else {
        let gray = img.to_luma8();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        let data = gray.pixels().map(|p| pixel_to_signal(p.0[0])).collect();
        Tensor::from_vec(&[1, h, w], data)
    }
}

/// Summary of one command invocation, written next to its outputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub created_unix_seconds: f64,
    pub elapsed_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<MeasurementHeader>,
    /// Command-specific numbers (losses, chosen settings, report bodies).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str) -> RunManifest {
        let created = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs_f64())
            .unwrap_or(0.0);
        RunManifest {
            command: command.to_string(),
            created_unix_seconds: created,
            elapsed_seconds: 0.0,
            seed: None,
            threads: None,
            outputs: Vec::new(),
            generator: None,
            solver: None,
            measurement: None,
            details: serde_json::Value::Null,
        }
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes the per-step loss table: `step,measurement_loss,objective`.
pub fn write_loss_csv(path: &Path, measurement: &[f64], objective: &[f64]) -> Result<()> {
    if measurement.len() != objective.len() {
        return Err(Error::shape(
            "write_loss_csv",
            format!("{} measurement rows vs {} objective rows", measurement.len(), objective.len()),
        ));
    }
    let mut text = String::from("step,measurement_loss,objective\n");
    for (i, (m, o)) in measurement.iter().zip(objective).enumerate() {
        text.push_str(&format!("{i},{m},{o}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes a single-series table: `step,<name>`.
pub fn write_trace_csv(path: &Path, name: &str, values: &[f64]) -> Result<()> {
    let mut text = format!("step,{name}\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{i},{v}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes a regularization-sweep table: `lambda,measurement_loss,chosen_step`.
pub fn write_grid_csv(path: &Path, rows: &[(f64, f64, usize)]) -> Result<()> {
    let mut text = String::from("lambda,measurement_loss,chosen_step\n");
    for (lambda, loss, step) in rows {
        text.push_str(&format!("{lambda},{loss},{step}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}
