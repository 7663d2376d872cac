//! One-level orthonormal 2-D Haar transform and LL-band pruning.
//!
//! Odd dimensions are padded by edge replication before analysis; synthesis
//! crops back to the recorded size.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::raster::{quantize, PixelImage};

/// Dense row-major matrix of reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(invalid(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_u8(rows: usize, cols: usize, data: &[u8]) -> Result<Self> {
        Self::new(rows, cols, data.iter().map(|&v| v as f64).collect())
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

/// The four sub-bands of one channel plus the size of the source before padding.
#[derive(Debug, Clone, PartialEq)]
pub struct SubbandSet {
    pub ll: Matrix,
    /// Horizontal differences (column detail).
    pub lh: Matrix,
    /// Vertical differences (row detail).
    pub hl: Matrix,
    pub hh: Matrix,
    pub rows: usize,
    pub cols: usize,
}

impl SubbandSet {
    pub fn energy(&self) -> f64 {
        self.ll.energy() + self.lh.energy() + self.hl.energy() + self.hh.energy()
    }

    /// True when the source had an odd dimension and was edge-padded.
    pub fn padded(&self) -> bool {
        self.rows % 2 == 1 || self.cols % 2 == 1
    }
}

pub fn haar_dwt(channel: &Matrix) -> Result<SubbandSet> {
    if channel.rows == 0 || channel.cols == 0 || channel.data.is_empty() {
        return Err(invalid("cannot transform an empty matrix"));
    }
    if channel.data.len() != channel.rows * channel.cols {
        return Err(invalid("matrix data length does not match its shape"));
    }
    let (h, w) = (channel.rows.div_ceil(2), channel.cols.div_ceil(2));
    // Edge replication: index past the last row/column maps to the last one.
    let px = |r: usize, c: usize| channel.at(r.min(channel.rows - 1), c.min(channel.cols - 1));

    let mut ll = Matrix::zeros(h, w);
    let mut lh = Matrix::zeros(h, w);
    let mut hl = Matrix::zeros(h, w);
    let mut hh = Matrix::zeros(h, w);
    for i in 0..h {
        for j in 0..w {
            let a = px(2 * i, 2 * j);
            let b = px(2 * i, 2 * j + 1);
            let c = px(2 * i + 1, 2 * j);
            let d = px(2 * i + 1, 2 * j + 1);
            let k = i * w + j;
            ll.data[k] = (a + b + c + d) * 0.5;
            lh.data[k] = (a - b + c - d) * 0.5;
            hl.data[k] = (a + b - c - d) * 0.5;
            hh.data[k] = (a - b - c + d) * 0.5;
        }
    }
    Ok(SubbandSet {
        ll,
        lh,
        hl,
        hh,
        rows: channel.rows,
        cols: channel.cols,
    })
}

/// Zeroes the LL band. Detail bands are untouched.
pub fn ll_prune(bands: &SubbandSet) -> SubbandSet {
    let mut out = bands.clone();
    out.ll.data.iter_mut().for_each(|v| *v = 0.0);
    out
}

pub fn haar_idwt(bands: &SubbandSet) -> Result<Matrix> {
    let SubbandSet {
        ll,
        lh,
        hl,
        hh,
        rows,
        cols,
    } = bands;
    if !(ll.same_shape(lh) && ll.same_shape(hl) && ll.same_shape(hh)) {
        return Err(invalid("sub-bands have mismatched dimensions"));
    }
    if ll.data.len() != ll.rows * ll.cols
        || [lh, hl, hh].iter().any(|m| m.data.len() != m.rows * m.cols)
    {
        return Err(invalid("sub-band data length does not match its shape"));
    }
    if *rows == 0 || *cols == 0 || ll.rows != rows.div_ceil(2) || ll.cols != cols.div_ceil(2) {
        return Err(invalid(format!(
            "sub-bands of {}x{} cannot synthesize a {rows}x{cols} matrix",
            ll.rows, ll.cols
        )));
    }
    let mut out = Matrix::zeros(*rows, *cols);
    for i in 0..ll.rows {
        for j in 0..ll.cols {
            let k = i * ll.cols + j;
            let (s, h, v, d) = (ll.data[k], lh.data[k], hl.data[k], hh.data[k]);
            let block = [
                (s + h + v + d) * 0.5,
                (s - h + v - d) * 0.5,
                (s + h - v - d) * 0.5,
                (s - h - v + d) * 0.5,
            ];
            for (n, value) in block.into_iter().enumerate() {
                let (r, c) = (2 * i + n / 2, 2 * j + n % 2);
                if r < *rows && c < *cols {
                    out.data[r * cols + c] = value;
                }
            }
        }
    }
    Ok(out)
}

/// Removes the coarse approximation from every channel: DWT, LL zeroing,
/// inverse DWT, then round and clamp back to 8 bits.
///
/// Deterministic and data-independent in its parameters, so it spends no
/// privacy budget.
pub fn perceptual_obfuscate(img: &PixelImage) -> PixelImage {
    let (w, h) = (img.width(), img.height());
    let planes: Vec<Vec<u8>> = (0..img.channels())
        .into_par_iter()
        .map(|c| {
            let m = Matrix::from_u8(h, w, &img.channel_plane(c)).expect("plane matches shape");
            let bands = haar_dwt(&m).expect("image is nonempty");
            let rec = haar_idwt(&ll_prune(&bands)).expect("bands are consistent");
            rec.data.into_iter().map(quantize).collect()
        })
        .collect();
    PixelImage::from_planes(w, h, img.colorspace(), &planes).expect("dimensions unchanged")
}
