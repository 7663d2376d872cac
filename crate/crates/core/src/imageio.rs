//! Lossless image files and the JSON report document.
//!
//! Only PNG and binary PPM/PGM are accepted. A lossy re-encode after
//! privatization would change the released bits, so JPEG input is refused
//! outright rather than decoded.

use std::fs::File;
use std::io::{BufWriter, Read};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, ImageReader};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::PrivacyReport;
use crate::error::{invalid, Error, Result};
use crate::raster::{ColorSpace, PixelImage};

/// What to do with an alpha channel on input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaPolicy {
    #[default]
    Reject,
    Strip,
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn sniff(path: &Path) -> Result<ImageFormat> {
    let mut head = [0u8; 8];
    let mut file = File::open(path).map_err(|e| io_error(path, e))?;
    let n = file.read(&mut head).map_err(|e| io_error(path, e))?;
    let head = &head[..n];
    if head.starts_with(&[0xff, 0xd8, 0xff]) {
        return Err(Error::UnsupportedImage(format!(
            "{}: JPEG is lossy; re-encoding would alter privatized bits, use PNG or PPM/PGM",
            path.display()
        )));
    }
    if head.starts_with(b"\x89PNG\r\n\x1a\n") {
        return Ok(ImageFormat::Png);
    }
    if head.starts_with(b"P5") || head.starts_with(b"P6") {
        return Ok(ImageFormat::Pnm);
    }
    Err(Error::UnsupportedImage(format!(
        "{}: not a PNG or binary PPM/PGM file",
        path.display()
    )))
}

pub fn read_image(path: impl AsRef<Path>, alpha: AlphaPolicy) -> Result<PixelImage> {
    let path = path.as_ref();
    let format = sniff(path)?;
    let mut reader = ImageReader::open(path).map_err(|e| io_error(path, e))?;
    reader.set_format(format);
    let decoded = reader.decode()?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let has_alpha = decoded.color().has_alpha();
    if has_alpha && alpha == AlphaPolicy::Reject {
        return Err(Error::UnsupportedImage(format!(
            "{}: image has an alpha channel (strip it explicitly to continue)",
            path.display()
        )));
    }
    match decoded {
        DynamicImage::ImageLuma8(buf) => PixelImage::gray(w, h, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => PixelImage::rgb(w, h, buf.into_raw()),
        DynamicImage::ImageLumaA8(buf) => {
            PixelImage::gray(w, h, buf.into_raw().chunks_exact(2).map(|p| p[0]).collect())
        }
        DynamicImage::ImageRgba8(buf) => PixelImage::rgb(
            w,
            h,
            buf.into_raw()
                .chunks_exact(4)
                .flat_map(|p| [p[0], p[1], p[2]])
                .collect(),
        ),
        other => Err(Error::UnsupportedImage(format!(
            "{}: only 8-bit samples are supported, got {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Writes `img` losslessly. The extension picks the codec: `.png`, `.ppm`
/// (RGB only) or `.pgm` (grayscale only).
pub fn write_image(img: &PixelImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let color = match img.colorspace() {
        ColorSpace::Rgb => ExtendedColorType::Rgb8,
        ColorSpace::Gray => ExtendedColorType::L8,
        ColorSpace::YCbCr => return Err(invalid("convert YCbCr images to RGB before writing")),
    };
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let subtype = match (ext.as_str(), img.colorspace()) {
        ("png", _) => None,
        ("ppm", ColorSpace::Rgb) => Some(PnmSubtype::Pixmap(SampleEncoding::Binary)),
        ("pgm", ColorSpace::Gray) => Some(PnmSubtype::Graymap(SampleEncoding::Binary)),
        ("ppm" | "pgm", cs) => {
            return Err(invalid(format!("{cs:?} image cannot be stored as .{ext}")))
        }
        _ => {
            return Err(Error::UnsupportedImage(format!(
                "{}: output extension must be .png, .ppm or .pgm",
                path.display()
            )))
        }
    };
    let file = File::create(path).map_err(|e| io_error(path, e))?;
    let out = BufWriter::new(file);
    match subtype {
        None => PngEncoder::new(out).write_image(img.samples(), w, h, color)?,
        Some(sub) => {
            PnmEncoder::new(out)
                .with_subtype(sub)
                .write_image(img.samples(), w, h, color)?
        }
    }
    Ok(())
}

pub const REPORT_VERSION: u32 = 1;

/// One row of the allocation table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationEntry {
    pub channel: String,
    pub bit: usize,
    pub epsilon: f64,
    pub p_keep: f64,
}

/// JSON form of a [`PrivacyReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub version: u32,
    pub epsilon_total: f64,
    pub weights: Vec<f64>,
    pub allocation: Vec<AllocationEntry>,
    pub tv_bound: f64,
    pub advantage_bound: f64,
    #[serde(with = "psnr_field")]
    pub psnr_db: Option<f64>,
    pub prune: bool,
    pub seed: u64,
}

pub fn channel_name(channels: usize, channel: usize) -> &'static str {
    match (channels, channel) {
        (1, _) => "GRAY",
        (_, 0) => "Y",
        (_, 1) => "Cb",
        _ => "Cr",
    }
}

impl From<&PrivacyReport> for ReportDocument {
    fn from(r: &PrivacyReport) -> Self {
        let channels = r.channel_weights.len();
        ReportDocument {
            version: REPORT_VERSION,
            epsilon_total: r.epsilon_total,
            weights: r.channel_weights.clone(),
            allocation: r
                .planes
                .iter()
                .map(|p| AllocationEntry {
                    channel: channel_name(channels, p.channel).to_string(),
                    bit: p.bit,
                    epsilon: p.epsilon,
                    p_keep: p.p_keep,
                })
                .collect(),
            tv_bound: r.tv_bound,
            advantage_bound: r.advantage_bound,
            psnr_db: r.psnr_db,
            prune: r.prune,
            seed: r.seed,
        }
    }
}

impl ReportDocument {
    pub fn validate(&self) -> Result<()> {
        if self.version != REPORT_VERSION {
            return Err(invalid(format!(
                "unsupported report version {}",
                self.version
            )));
        }
        let sum: f64 = self.allocation.iter().map(|a| a.epsilon).sum();
        if (sum - self.epsilon_total).abs() > 1e-9 {
            return Err(invalid(format!(
                "allocation sums to {sum}, report claims {}",
                self.epsilon_total
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Self = serde_json::from_str(text)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| io_error(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
        Self::from_json(&text)
    }
}

/// PSNR as a JSON number, the string `"inf"` for identical images, or null.
mod psnr_field {
    use super::*;

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_infinite() && *x > 0.0 => s.serialize_str("inf"),
            Some(x) => s.serialize_f64(*x),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Number(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) if t == "inf" => Ok(Some(f64::INFINITY)),
            Some(Repr::Text(t)) => Err(serde::de::Error::custom(format!("invalid psnr_db {t:?}"))),
        }
    }
}
