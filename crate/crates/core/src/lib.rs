//! Per-pixel ε-local differential privacy for images.
//!
//! The pipeline converts an image to YCbCr, optionally zeroes the LL band of a
//! one-level Haar transform, slices every sample into eight bit-planes, applies
//! binary randomized response to each bit with a budget allocated in
//! proportion to the square root of the plane's importance weight, and packs
//! the bits back into an ordinary 8-bit image.
//!
//! ```
//! use pixel_ldp::{allocate, privatize, PixelImage, RandomnessSpec, WeightTable};
//!
//! let img = PixelImage::gray(4, 4, vec![17; 16]).unwrap();
//! let alloc = allocate(20.0, &WeightTable::grayscale()).unwrap();
//! let (out, report) = privatize(&img, &alloc, &RandomnessSpec::new(7), true).unwrap();
//! assert_eq!((out.width(), out.height()), (4, 4));
//! assert_eq!(report.epsilon_total, 20.0);
//! ```

pub mod analysis;
pub mod bitplane;
pub mod budget;
pub mod color;
mod error;
pub mod imageio;
pub mod mechanism;
pub mod raster;
pub mod verify;
pub mod wavelet;

pub use crate::analysis::{
    advantage_bound, blocklevel_to_pixel_epsilon, exact_tv_reduced, psnr, tv_bound, PrivacyReport,
};
pub use crate::bitplane::{reconstruct, slice, BitPlane, BitPlaneStack};
pub use crate::budget::{allocate, solve_numeric, BudgetAllocation, WeightTable};
pub use crate::color::{rgb_to_ycbcr, ycbcr_to_rgb};
pub use crate::error::{Error, Result};
pub use crate::mechanism::{
    empirical_flip_rate, privatize, rr_bit, FlipProbabilities, RandomnessSpec,
};
pub use crate::raster::{ColorSpace, PixelImage};
pub use crate::verify::{
    certify_bit_ldp, certify_pixel_pipeline, monotone_psnr_sweep, LdpTestResult,
};
pub use crate::wavelet::{haar_dwt, haar_idwt, ll_prune, perceptual_obfuscate, SubbandSet};
