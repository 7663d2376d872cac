//! Bit-plane slicing of 8-bit samples and the inverse weighted sum.
//!
//! Planes are indexed by significance `b` in `1..=8`, where `b = 8` is the
//! most significant bit and carries value `2^(b-1)`. A bit counted from the
//! MSB at position `l` (1-based) has significance `b = 9 - l`.

use crate::error::{invalid, Result};
use crate::raster::{ColorSpace, PixelImage};

pub const BITS: usize = 8;

/// One binary plane, packed 64 pixels per word with each row word-aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    width: usize,
    height: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitPlane {
    pub fn zeros(width: usize, height: usize) -> Self {
        let words_per_row = width.div_ceil(64);
        Self {
            width,
            height,
            words_per_row,
            words: vec![0; words_per_row * height],
        }
    }

    /// Builds a plane from a row-major 0/1 matrix.
    pub fn from_bits(width: usize, height: usize, bits: &[u8]) -> Result<Self> {
        if bits.len() != width * height {
            return Err(invalid(format!(
                "bit matrix of {} entries does not fit {width}x{height}",
                bits.len()
            )));
        }
        let mut plane = Self::zeros(width, height);
        for (i, &bit) in bits.iter().enumerate() {
            match bit {
                0 => {}
                1 => plane.set(i / width, i % width, true),
                other => {
                    return Err(invalid(format!(
                        "non-binary plane entry {other} at index {i}"
                    )))
                }
            }
        }
        Ok(plane)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        let w = self.words[row * self.words_per_row + col / 64];
        (w >> (col % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        let word = &mut self.words[row * self.words_per_row + col / 64];
        let mask = 1u64 << (col % 64);
        if value {
            *word |= mask;
        } else {
            *word &= !mask;
        }
    }

    /// Mutable access to the packed words of one row. Bits past `width` must stay zero.
    pub fn row_words_mut(&mut self, row: usize) -> &mut [u64] {
        let start = row * self.words_per_row;
        &mut self.words[start..start + self.words_per_row]
    }

    /// Mutable row slices, for processing rows independently.
    pub fn rows_mut(&mut self) -> impl Iterator<Item = &mut [u64]> {
        self.words.chunks_mut(self.words_per_row.max(1))
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Unpacked row-major 0/1 matrix.
    pub fn to_bits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                out.push(self.get(r, c) as u8);
            }
        }
        out
    }
}

/// Eight planes per channel. Planes of channel `c` live at `c * 8 + (b - 1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlaneStack {
    width: usize,
    height: usize,
    colorspace: ColorSpace,
    planes: Vec<BitPlane>,
}

impl BitPlaneStack {
    pub fn new(
        width: usize,
        height: usize,
        colorspace: ColorSpace,
        planes: Vec<BitPlane>,
    ) -> Result<Self> {
        if planes.len() != BITS * colorspace.channels() {
            return Err(invalid(format!(
                "{colorspace:?} needs {} planes, got {}",
                BITS * colorspace.channels(),
                planes.len()
            )));
        }
        if planes
            .iter()
            .any(|p| p.width != width || p.height != height)
        {
            return Err(invalid("plane dimensions do not match the stack"));
        }
        Ok(Self {
            width,
            height,
            colorspace,
            planes,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn colorspace(&self) -> ColorSpace {
        self.colorspace
    }

    pub fn channels(&self) -> usize {
        self.colorspace.channels()
    }

    pub fn len(&self) -> usize {
        self.planes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.planes.is_empty()
    }

    /// Plane of `channel` with significance `b` (1 = LSB, 8 = MSB).
    pub fn plane(&self, channel: usize, b: usize) -> &BitPlane {
        assert!((1..=BITS).contains(&b), "significance {b} out of range");
        &self.planes[channel * BITS + b - 1]
    }

    pub fn plane_mut(&mut self, channel: usize, b: usize) -> &mut BitPlane {
        assert!((1..=BITS).contains(&b), "significance {b} out of range");
        &mut self.planes[channel * BITS + b - 1]
    }

    /// All planes with their `(channel, significance)` ids.
    pub fn planes_mut(&mut self) -> impl Iterator<Item = ((usize, usize), &mut BitPlane)> {
        self.planes
            .iter_mut()
            .enumerate()
            .map(|(i, p)| ((i / BITS, i % BITS + 1), p))
    }

    pub fn into_planes(self) -> Vec<BitPlane> {
        self.planes
    }
}

pub fn slice(img: &PixelImage) -> BitPlaneStack {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut planes = vec![BitPlane::zeros(w, h); ch * BITS];
    let samples = img.samples();
    for row in 0..h {
        for chunk_start in (0..w).step_by(64) {
            let chunk_end = (chunk_start + 64).min(w);
            for c in 0..ch {
                let mut acc = [0u64; BITS];
                for col in chunk_start..chunk_end {
                    let x = samples[(row * w + col) * ch + c] as u64;
                    let shift = col - chunk_start;
                    for (k, word) in acc.iter_mut().enumerate() {
                        *word |= ((x >> k) & 1) << shift;
                    }
                }
                for (k, word) in acc.into_iter().enumerate() {
                    planes[c * BITS + k].row_words_mut(row)[chunk_start / 64] = word;
                }
            }
        }
    }
    BitPlaneStack {
        width: w,
        height: h,
        colorspace: img.colorspace(),
        planes,
    }
}

pub fn reconstruct(stack: &BitPlaneStack) -> Result<PixelImage> {
    let (w, h, ch) = (stack.width, stack.height, stack.channels());
    if stack.planes.len() != ch * BITS || stack.planes.iter().any(|p| p.width != w || p.height != h)
    {
        return Err(invalid("inconsistent bit-plane stack"));
    }
    let mut samples = vec![0u8; w * h * ch];
    for c in 0..ch {
        for k in 0..BITS {
            let plane = &stack.planes[c * BITS + k];
            for row in 0..h {
                let words =
                    &plane.words[row * plane.words_per_row..(row + 1) * plane.words_per_row];
                for col in 0..w {
                    let bit = (words[col / 64] >> (col % 64)) & 1;
                    samples[(row * w + col) * ch + c] |= (bit as u8) << k;
                }
            }
        }
    }
    PixelImage::new(w, h, stack.colorspace, samples)
}
