use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Color space tag carried by a [`PixelImage`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColorSpace {
    Rgb,
    YCbCr,
    Gray,
}

impl ColorSpace {
    pub fn channels(self) -> usize {
        match self {
            ColorSpace::Gray => 1,
            ColorSpace::Rgb | ColorSpace::YCbCr => 3,
        }
    }
}

/// An 8-bit raster with interleaved, row-major samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelImage {
    width: usize,
    height: usize,
    colorspace: ColorSpace,
    samples: Vec<u8>,
}

impl PixelImage {
    pub fn new(
        width: usize,
        height: usize,
        colorspace: ColorSpace,
        samples: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(colorspace.channels()))
            .ok_or_else(|| invalid("image dimensions overflow"))?;
        if samples.len() != expected {
            return Err(invalid(format!(
                "expected {expected} samples for {width}x{height} {colorspace:?}, got {}",
                samples.len()
            )));
        }
        Ok(Self {
            width,
            height,
            colorspace,
            samples,
        })
    }

    pub fn gray(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        Self::new(width, height, ColorSpace::Gray, samples)
    }

    pub fn rgb(width: usize, height: usize, samples: Vec<u8>) -> Result<Self> {
        Self::new(width, height, ColorSpace::Rgb, samples)
    }

    /// Builds an image from per-channel planes, each `width * height` long.
    pub fn from_planes(
        width: usize,
        height: usize,
        colorspace: ColorSpace,
        planes: &[Vec<u8>],
    ) -> Result<Self> {
        if planes.len() != colorspace.channels() {
            return Err(invalid(format!(
                "{colorspace:?} needs {} planes, got {}",
                colorspace.channels(),
                planes.len()
            )));
        }
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(invalid("plane length does not match dimensions"));
        }
        let channels = planes.len();
        let mut samples = vec![0u8; n * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                samples[i * channels + c] = v;
            }
        }
        Self::new(width, height, colorspace, samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    /// Sample at `(row, col)` in channel `channel`.
    pub fn get(&self, row: usize, col: usize, channel: usize) -> u8 {
        self.samples[(row * self.width + col) * self.channels() + channel]
    }

    /// Copies one channel out as a contiguous row-major plane.
    pub fn channel_plane(&self, channel: usize) -> Vec<u8> {
        self.samples
            .iter()
            .skip(channel)
            .step_by(self.channels())
            .copied()
            .collect()
    }

    /// Same samples, different tag. Channel counts must agree.
    pub fn retag(self, colorspace: ColorSpace) -> Result<Self> {
        if colorspace.channels() != self.channels() {
            return Err(invalid(format!(
                "cannot retag {:?} image as {colorspace:?}",
                self.colorspace
            )));
        }
        Ok(Self { colorspace, ..self })
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().map(|&v| v as f64).sum::<f64>() / self.samples.len() as f64
    }
}

/// Round half away from zero, then clamp into the 8-bit range.
pub(crate) fn quantize(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}
