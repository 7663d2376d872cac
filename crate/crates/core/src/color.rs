//! Full-range BT.601 (JFIF) conversion between RGB and YCbCr.

use crate::error::{invalid, Result};
use crate::raster::{quantize, ColorSpace, PixelImage};

const KR: f64 = 0.299;
const KG: f64 = 0.587;
const KB: f64 = 0.114;

fn forward(r: f64, g: f64, b: f64) -> [f64; 3] {
    [
        KR * r + KG * g + KB * b,
        128.0 - 0.168_736 * r - 0.331_264 * g + 0.5 * b,
        128.0 + 0.5 * r - 0.418_688 * g - 0.081_312 * b,
    ]
}

fn inverse(y: f64, cb: f64, cr: f64) -> [f64; 3] {
    let cb = cb - 128.0;
    let cr = cr - 128.0;
    [
        y + 1.402 * cr,
        y - 0.344_136 * cb - 0.714_136 * cr,
        y + 1.772 * cb,
    ]
}

fn convert(img: &PixelImage, to: ColorSpace, f: fn(f64, f64, f64) -> [f64; 3]) -> PixelImage {
    let samples = img
        .samples()
        .chunks_exact(3)
        .flat_map(|px| f(px[0] as f64, px[1] as f64, px[2] as f64).map(quantize))
        .collect();
    PixelImage::new(img.width(), img.height(), to, samples).expect("dimensions unchanged")
}

pub fn rgb_to_ycbcr(img: &PixelImage) -> Result<PixelImage> {
    if img.colorspace() != ColorSpace::Rgb {
        return Err(invalid(format!(
            "expected an RGB image, got {:?}",
            img.colorspace()
        )));
    }
    Ok(convert(img, ColorSpace::YCbCr, forward))
}

pub fn ycbcr_to_rgb(img: &PixelImage) -> Result<PixelImage> {
    if img.colorspace() != ColorSpace::YCbCr {
        return Err(invalid(format!(
            "expected a YCbCr image, got {:?}",
            img.colorspace()
        )));
    }
    Ok(convert(img, ColorSpace::Rgb, inverse))
}
