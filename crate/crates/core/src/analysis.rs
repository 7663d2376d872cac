//! Closed-form privacy accounting and distortion metrics.

use serde::{Deserialize, Serialize};

use crate::budget::BudgetAllocation;
use crate::error::{invalid, Result};
use crate::mechanism::FlipProbabilities;
use crate::raster::PixelImage;

/// Largest bit depth [`exact_tv_reduced`] will enumerate.
pub const MAX_REDUCED_DEPTH: usize = 8;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon.is_nan() || epsilon < 0.0 {
        return Err(invalid(format!("ε must be nonnegative, got {epsilon}")));
    }
    Ok(())
}

/// Upper bound on the total variation distance between the output
/// distributions of an ε-LDP mechanism on any two inputs: `tanh(ε/2)`.
pub fn tv_bound(epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok((epsilon / 2.0).tanh())
}

/// Bound on an adversary's advantage over guessing when deciding whether a
/// released image matches a reference identity: half the TV bound.
pub fn advantage_bound(epsilon: f64) -> Result<f64> {
    Ok(tv_bound(epsilon)? / 2.0)
}

/// Exact TV distance between the outputs of composed per-bit randomized
/// response on inputs `x` and `x_prime`, by enumerating every output word.
///
/// `epsilons[i]` is the budget of the `i`-th bit counted from the most
/// significant one; inputs must fit in `epsilons.len()` bits.
pub fn exact_tv_reduced(epsilons: &[f64], x: u32, x_prime: u32) -> Result<f64> {
    let depth = epsilons.len();
    if depth == 0 || depth > MAX_REDUCED_DEPTH {
        return Err(invalid(format!(
            "depth must be 1..={MAX_REDUCED_DEPTH}, got {depth}"
        )));
    }
    for &e in epsilons {
        check_epsilon(e)?;
    }
    let outcomes = 1u32 << depth;
    if x >= outcomes || x_prime >= outcomes {
        return Err(invalid(format!("inputs must be below 2^{depth}")));
    }
    let probs: Vec<FlipProbabilities> = epsilons
        .iter()
        .map(|&e| FlipProbabilities::for_epsilon(e))
        .collect();
    let likelihood = |input: u32, output: u32| -> f64 {
        probs
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let shift = depth - 1 - i;
                if (input >> shift) & 1 == (output >> shift) & 1 {
                    p.p_keep
                } else {
                    p.p_flip
                }
            })
            .product()
    };
    let l1: f64 = (0..outcomes)
        .map(|y| (likelihood(x, y) - likelihood(x_prime, y)).abs())
        .sum();
    Ok(0.5 * l1)
}

/// Per-pixel budget implied by a block-level mechanism that spends
/// `per_coeff_epsilon` on every retained coefficient of a
/// `block_w × block_h` block in each of `channels` channels.
///
/// Sequential composition over the retained coefficients gives an upper
/// bound for comparison, not a tight accountant.
pub fn blocklevel_to_pixel_epsilon(
    per_coeff_epsilon: f64,
    block_w: usize,
    block_h: usize,
    channels: usize,
    removed_coeffs: usize,
) -> Result<f64> {
    check_epsilon(per_coeff_epsilon)?;
    if block_w == 0 || block_h == 0 || channels == 0 {
        return Err(invalid(
            "block dimensions and channel count must be positive",
        ));
    }
    let coeffs = block_w * block_h;
    if removed_coeffs >= coeffs {
        return Err(invalid(format!(
            "cannot remove {removed_coeffs} of {coeffs} coefficients"
        )));
    }
    Ok((coeffs - removed_coeffs) as f64 * channels as f64 * per_coeff_epsilon)
}

/// Peak signal-to-noise ratio in dB over all samples; `+∞` for identical images.
pub fn psnr(a: &PixelImage, b: &PixelImage) -> Result<f64> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(invalid(format!(
            "shape mismatch: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.samples().len() as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Budget and flip probabilities of one bit-plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneBudget {
    pub channel: usize,
    pub bit: usize,
    pub epsilon: f64,
    pub p_keep: f64,
    pub p_flip: f64,
}

/// Guarantees derived from one privatization run.
#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyReport {
    /// Claimed per-pixel ε: the sum of the per-plane budgets.
    pub epsilon_total: f64,
    pub planes: Vec<PlaneBudget>,
    pub channel_weights: Vec<f64>,
    pub tv_bound: f64,
    pub advantage_bound: f64,
    pub psnr_db: Option<f64>,
    pub prune: bool,
    pub seed: u64,
}

impl PrivacyReport {
    pub fn new(alloc: &BudgetAllocation, prune: bool, seed: u64) -> Self {
        let planes: Vec<PlaneBudget> = alloc
            .iter()
            .map(|((channel, bit), epsilon)| {
                let p = FlipProbabilities::for_epsilon(epsilon);
                PlaneBudget {
                    channel,
                    bit,
                    epsilon,
                    p_keep: p.p_keep,
                    p_flip: p.p_flip,
                }
            })
            .collect();
        let epsilon_total = alloc.sum();
        let tv = (epsilon_total / 2.0).tanh();
        Self {
            epsilon_total,
            planes,
            channel_weights: alloc.weights().channel_weights().to_vec(),
            tv_bound: tv,
            advantage_bound: tv / 2.0,
            psnr_db: None,
            prune,
            seed,
        }
    }
}
