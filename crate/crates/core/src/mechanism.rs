//! Binary randomized response applied to every bit-plane, and the end-to-end
//! privatization pipeline.
//!
//! Randomness is counter based: each uniform draw is a pure function of the
//! master seed and the `(channel, plane, row, column)` it is used for, so the
//! output does not depend on how work is scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::analysis::{psnr, PrivacyReport};
use crate::bitplane::{reconstruct, slice};
use crate::budget::BudgetAllocation;
use crate::color::{rgb_to_ycbcr, ycbcr_to_rgb};
use crate::error::{invalid, Result};
use crate::raster::{ColorSpace, PixelImage};
use crate::wavelet::perceptual_obfuscate;

/// Keys that separate independent uses of one seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Image = 0,
    Certification = 1,
    FlipRate = 2,
}

/// Master seed plus the rule that derives one uniform draw per
/// `(domain, channel, plane, row, column)`.
///
/// The stream id of ChaCha12 encodes `(domain, channel, plane)` and the
/// keystream position encodes `(row, column)`; one 64-bit word is spent per draw.
#[derive(Debug, Clone)]
pub struct RandomnessSpec {
    seed: u64,
    base: ChaCha12Rng,
}

impl RandomnessSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            base: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws for `row`, starting at column 0. Reading past column `2^32 - 1`
    /// continues into the next row.
    pub fn stream(&self, domain: Domain, channel: usize, plane: usize, row: u32) -> DrawStream {
        let mut rng = self.base.clone();
        rng.set_stream(
            ((domain as u64) << 16) | ((channel as u64 & 0xff) << 8) | (plane as u64 & 0xff),
        );
        rng.set_word_pos((row as u128) << 33);
        DrawStream { rng }
    }

    /// The single draw used for one bit of one pixel.
    pub fn draw(&self, domain: Domain, channel: usize, plane: usize, row: u32, col: u32) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(
            ((domain as u64) << 16) | ((channel as u64 & 0xff) << 8) | (plane as u64 & 0xff),
        );
        rng.set_word_pos(((row as u128) << 33) | ((col as u128) << 1));
        unit_interval(rng.next_u64())
    }
}

impl PartialEq for RandomnessSpec {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed
    }
}

/// Sequential uniform draws in `[0, 1)` with 53-bit resolution.
pub struct DrawStream {
    rng: ChaCha12Rng,
}

impl DrawStream {
    #[inline]
    pub fn next_draw(&mut self) -> f64 {
        unit_interval(self.rng.next_u64())
    }
}

impl Iterator for DrawStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_draw())
    }
}

#[inline]
fn unit_interval(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Keep and flip probabilities of binary randomized response at one budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlipProbabilities {
    pub p_keep: f64,
    pub p_flip: f64,
}

impl FlipProbabilities {
    pub fn for_epsilon(epsilon: f64) -> Self {
        // e^ε / (e^ε + 1) without overflowing for large ε.
        let p_keep = 1.0 / (1.0 + (-epsilon).exp());
        Self {
            p_keep,
            p_flip: 1.0 - p_keep,
        }
    }

    /// A mechanism with an arbitrary keep probability, for calibration tests.
    pub fn with_keep(p_keep: f64) -> Self {
        Self {
            p_keep,
            p_flip: 1.0 - p_keep,
        }
    }
}

/// Reports `bit` when `draw < p_keep`, otherwise its complement.
#[inline]
pub fn rr_bit(bit: u8, epsilon: f64, draw: f64) -> u8 {
    respond(bit, FlipProbabilities::for_epsilon(epsilon).p_keep, draw)
}

#[inline]
pub(crate) fn respond(bit: u8, p_keep: f64, draw: f64) -> u8 {
    if draw < p_keep {
        bit
    } else {
        1 - bit
    }
}

/// Runs the full pipeline: color conversion, optional LL pruning, bit-plane
/// randomized response with the allocation's budgets, and reconstruction.
///
/// Output has the input's dimensions, channel count and color space. Each
/// output pixel is `alloc.epsilon_total`-LDP with respect to the input pixel.
pub fn privatize(
    img: &PixelImage,
    alloc: &BudgetAllocation,
    rand: &RandomnessSpec,
    prune: bool,
) -> Result<(PixelImage, PrivacyReport)> {
    if alloc.channels() != img.channels() {
        return Err(invalid(format!(
            "allocation covers {} channels but the image has {}",
            alloc.channels(),
            img.channels()
        )));
    }
    if img.height() > u32::MAX as usize {
        return Err(invalid("image too tall for the randomness contract"));
    }
    let working = match img.colorspace() {
        ColorSpace::Rgb => rgb_to_ycbcr(img)?,
        _ => img.clone(),
    };
    let working = if prune {
        perceptual_obfuscate(&working)
    } else {
        working
    };

    let mut stack = slice(&working);
    let width = stack.width();
    stack
        .planes_mut()
        .collect::<Vec<_>>()
        .into_par_iter()
        .for_each(|((c, b), plane)| {
            let p_keep = FlipProbabilities::for_epsilon(alloc.epsilon(c, b)).p_keep;
            if p_keep >= 1.0 {
                return;
            }
            for (row, words) in plane.rows_mut().enumerate() {
                let mut draws = rand.stream(Domain::Image, c, b, row as u32);
                for col in 0..width {
                    if draws.next_draw() >= p_keep {
                        words[col / 64] ^= 1 << (col % 64);
                    }
                }
            }
        });

    let released = reconstruct(&stack)?;
    let released = match img.colorspace() {
        ColorSpace::Rgb => ycbcr_to_rgb(&released)?,
        _ => released,
    };
    let mut report = PrivacyReport::new(alloc, prune, rand.seed());
    report.psnr_db = Some(psnr(img, &released)?);
    Ok((released, report))
}

/// Fraction of flipped bits over `trials` independent uses of randomized
/// response at budget `epsilon`.
pub fn empirical_flip_rate(epsilon: f64, trials: u64, rand: &RandomnessSpec) -> Result<f64> {
    if trials < 10_000 {
        return Err(invalid(format!("need at least 10^4 trials, got {trials}")));
    }
    let p_keep = FlipProbabilities::for_epsilon(epsilon).p_keep;
    let mut draws = rand.stream(Domain::FlipRate, 0, 0, 0);
    let flips = (0..trials)
        .filter(|_| respond(0, p_keep, draws.next_draw()) == 1)
        .count();
    Ok(flips as f64 / trials as f64)
}
