//! Statistical certification of the per-bit LDP guarantee.
//!
//! Each plane's randomizer is run on inputs 0 and 1; the worst-case
//! likelihood ratio over the two outputs is bounded from below with exact
//! (Clopper–Pearson) binomial intervals. A plane passes when that lower
//! confidence bound does not exceed the claimed ε.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::analysis::psnr;
use crate::budget::{allocate, BudgetAllocation, WeightTable};
use crate::error::{invalid, Error, Result};
use crate::mechanism::{privatize, respond, Domain, FlipProbabilities, RandomnessSpec};
use crate::raster::{ColorSpace, PixelImage};

pub const MIN_CERTIFY_TRIALS: u64 = 100_000;
pub const DEFAULT_CONFIDENCE: f64 = 0.999;

/// Outcome of certifying one bit-plane randomizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdpTestResult {
    pub channel: usize,
    pub bit: usize,
    pub claimed_epsilon: f64,
    /// Point estimate of the worst-case log-likelihood ratio.
    pub estimate: f64,
    /// Lower confidence bound on the true worst-case log-ratio.
    pub ci_lower: f64,
    /// Upper confidence bound; infinite when no flips were observed.
    pub ci_upper: f64,
    pub confidence: f64,
    pub trials: u64,
    pub pass: bool,
}

/// Per-plane results for a whole allocation and the composed budget they certify.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineCertificate {
    pub planes: Vec<LdpTestResult>,
    /// Σ ε over planes: the per-pixel budget under basic composition.
    pub certified_epsilon: f64,
}

impl PipelineCertificate {
    pub fn passed(&self) -> bool {
        self.planes.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &LdpTestResult> {
        self.planes.iter().filter(|r| !r.pass)
    }
}

/// `P[X <= k]` for `X ~ Binomial(n, p)`, summed outward from `k` over
/// geometrically shrinking terms.
fn binomial_cdf(k: u64, n: u64, p: f64) -> f64 {
    if k >= n || p <= 0.0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let mode = ((n + 1) as f64 * p).floor() as u64;
    if k < mode {
        tail_sum(k, n, p, false)
    } else {
        1.0 - tail_sum(k + 1, n, p, true)
    }
}

/// Sum of pmf terms from `start` moving away from the mode.
fn tail_sum(start: u64, n: u64, p: f64, upward: bool) -> f64 {
    let (nf, sf) = (n as f64, start as f64);
    let ln_pmf = ln_gamma(nf + 1.0) - ln_gamma(sf + 1.0) - ln_gamma(nf - sf + 1.0)
        + sf * p.ln()
        + (nf - sf) * (-p).ln_1p();
    let odds = p / (1.0 - p);
    let mut term = ln_pmf.exp();
    let mut sum = term;
    let mut i = start;
    loop {
        if upward {
            if i >= n {
                break;
            }
            term *= (n - i) as f64 / (i + 1) as f64 * odds;
            i += 1;
        } else {
            if i == 0 {
                break;
            }
            term *= i as f64 / (n - i + 1) as f64 / odds;
            i -= 1;
        }
        sum += term;
        if term <= sum * 1e-18 {
            break;
        }
    }
    sum.min(1.0)
}

/// Bisection for `f(p) = target` on `[lo, hi]`, `f` increasing.
fn solve_increasing(mut lo: f64, mut hi: f64, target: f64, f: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper–Pearson lower bound on a binomial proportion.
pub fn clopper_pearson_lower(k: u64, n: u64, alpha: f64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    // P[X >= k | p] rises with p; find where it reaches alpha.
    solve_increasing(0.0, k as f64 / n as f64, alpha, |p| {
        1.0 - binomial_cdf(k - 1, n, p)
    })
}

/// One-sided Clopper–Pearson upper bound on a binomial proportion.
pub fn clopper_pearson_upper(k: u64, n: u64, alpha: f64) -> f64 {
    if k >= n {
        return 1.0;
    }
    // P[X <= k | p] falls with p; find where it drops to alpha.
    solve_increasing(k as f64 / n as f64, 1.0, -alpha, |p| -binomial_cdf(k, n, p))
}

/// Counts `(ones given input 0, ones given input 1)` over `trials` runs each.
fn run_randomizer(
    mechanism: FlipProbabilities,
    channel: usize,
    bit: usize,
    trials: u64,
    rand: &RandomnessSpec,
) -> (u64, u64) {
    let count_ones = |input: u8| {
        let mut draws = rand.stream(Domain::Certification, channel, bit, input as u32);
        (0..trials)
            .filter(|_| respond(input, mechanism.p_keep, draws.next_draw()) == 1)
            .count() as u64
    };
    (count_ones(0), count_ones(1))
}

fn log_ratio(num: f64, den: f64) -> f64 {
    match (num > 0.0, den > 0.0) {
        (_, true) => num.ln() - den.ln(),
        (true, false) => f64::INFINITY,
        (false, false) => 0.0,
    }
}

fn evaluate(
    channel: usize,
    bit: usize,
    claimed_epsilon: f64,
    mechanism: FlipProbabilities,
    trials: u64,
    rand: &RandomnessSpec,
    alpha: f64,
) -> LdpTestResult {
    let (ones_from_0, ones_from_1) = run_randomizer(mechanism, channel, bit, trials, rand);
    let n = trials;
    // Outcome 1: P[M(1)=1] / P[M(0)=1].  Outcome 0: P[M(0)=0] / P[M(1)=0].
    let outcomes = [
        (ones_from_1, ones_from_0),
        (n - ones_from_0, n - ones_from_1),
    ];
    // Four one-sided bounds share the plane's error budget.
    let a = alpha / 4.0;
    let mut estimate = f64::NEG_INFINITY;
    let mut ci_lower = f64::NEG_INFINITY;
    let mut ci_upper = f64::NEG_INFINITY;
    for (num, den) in outcomes {
        estimate = estimate.max(log_ratio(num as f64 / n as f64, den as f64 / n as f64));
        ci_lower = ci_lower.max(log_ratio(
            clopper_pearson_lower(num, n, a),
            clopper_pearson_upper(den, n, a),
        ));
        ci_upper = ci_upper.max(log_ratio(
            clopper_pearson_upper(num, n, a),
            clopper_pearson_lower(den, n, a),
        ));
    }
    LdpTestResult {
        channel,
        bit,
        claimed_epsilon,
        estimate,
        ci_lower,
        ci_upper,
        confidence: 1.0 - alpha,
        trials,
        pass: ci_lower <= claimed_epsilon,
    }
}

fn check_trials(trials: u64) -> Result<()> {
    if trials < MIN_CERTIFY_TRIALS {
        return Err(invalid(format!(
            "certification needs at least {MIN_CERTIFY_TRIALS} trials, got {trials}"
        )));
    }
    if trials > u32::MAX as u64 {
        return Err(invalid("too many trials for one randomness row"));
    }
    Ok(())
}

fn check_confidence(confidence: f64) -> Result<()> {
    if !(confidence > 0.9 && confidence < 1.0) {
        return Err(invalid(format!(
            "confidence must lie in (0.9, 1), got {confidence}"
        )));
    }
    Ok(())
}

/// Certifies binary randomized response at budget `epsilon` against the
/// claim that it is `epsilon`-LDP.
pub fn certify_bit_ldp(
    epsilon: f64,
    trials: u64,
    rand: &RandomnessSpec,
    confidence: f64,
) -> Result<LdpTestResult> {
    certify_randomizer(
        epsilon,
        FlipProbabilities::for_epsilon(epsilon),
        trials,
        rand,
        confidence,
    )
}

/// Certifies an arbitrary binary randomizer against a claimed ε. Used for
/// negative controls, where the mechanism and the claim disagree.
pub fn certify_randomizer(
    claimed_epsilon: f64,
    mechanism: FlipProbabilities,
    trials: u64,
    rand: &RandomnessSpec,
    confidence: f64,
) -> Result<LdpTestResult> {
    check_trials(trials)?;
    check_confidence(confidence)?;
    Ok(evaluate(
        0,
        0,
        claimed_epsilon,
        mechanism,
        trials,
        rand,
        1.0 - confidence,
    ))
}

/// A plane to certify: its id, the ε it claims, and the randomizer actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneClaim {
    pub channel: usize,
    pub bit: usize,
    pub claimed_epsilon: f64,
    pub mechanism: FlipProbabilities,
}

/// The honest claims for every plane of `alloc`.
pub fn plane_claims(alloc: &BudgetAllocation) -> Vec<PlaneClaim> {
    alloc
        .iter()
        .map(|((channel, bit), eps)| PlaneClaim {
            channel,
            bit,
            claimed_epsilon: eps,
            mechanism: FlipProbabilities::for_epsilon(eps),
        })
        .collect()
}

/// Certifies every claim with a Bonferroni-corrected family-wise confidence.
/// Returns all results, passing or not.
pub fn certify_planes(
    claims: &[PlaneClaim],
    trials: u64,
    rand: &RandomnessSpec,
    confidence: f64,
) -> Result<PipelineCertificate> {
    check_trials(trials)?;
    check_confidence(confidence)?;
    if claims.is_empty() {
        return Err(invalid("no planes to certify"));
    }
    let alpha = (1.0 - confidence) / claims.len() as f64;
    let planes: Vec<LdpTestResult> = claims
        .par_iter()
        .map(|c| {
            evaluate(
                c.channel,
                c.bit,
                c.claimed_epsilon,
                c.mechanism,
                trials,
                rand,
                alpha,
            )
        })
        .collect();
    let certified_epsilon = claims.iter().map(|c| c.claimed_epsilon).sum();
    Ok(PipelineCertificate {
        planes,
        certified_epsilon,
    })
}

/// Certifies every plane of `alloc` at the default family-wise confidence.
/// Fails with the first offending plane.
pub fn certify_pixel_pipeline(
    alloc: &BudgetAllocation,
    trials: u64,
    rand: &RandomnessSpec,
) -> Result<PipelineCertificate> {
    let cert = certify_planes(&plane_claims(alloc), trials, rand, DEFAULT_CONFIDENCE)?;
    if let Some(bad) = cert.failures().next() {
        return Err(Error::CertificationFailure {
            plane: format!("channel {} bit {}", bad.channel, bad.bit),
            detail: format!(
                "log-ratio lower bound {:.6} exceeds claimed ε {:.6}",
                bad.ci_lower, bad.claimed_epsilon
            ),
        });
    }
    Ok(cert)
}

/// Mean PSNR per budget, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsnrSweep {
    pub epsilons: Vec<f64>,
    pub means: Vec<f64>,
    /// Standard error of each mean.
    pub std_errors: Vec<f64>,
}

impl PsnrSweep {
    /// Root-mean-square of the per-budget standard errors.
    pub fn pooled_std_error(&self) -> f64 {
        let finite: Vec<f64> = self
            .std_errors
            .iter()
            .copied()
            .filter(|s| s.is_finite())
            .collect();
        if finite.is_empty() {
            return 0.0;
        }
        (finite.iter().map(|s| s * s).sum::<f64>() / finite.len() as f64).sqrt()
    }

    /// Means never drop by more than one pooled standard error.
    pub fn is_monotone(&self) -> bool {
        let tol = self.pooled_std_error();
        self.means.windows(2).all(|w| w[1] >= w[0] - tol)
    }

    pub fn is_non_decreasing(&self) -> bool {
        self.means.windows(2).all(|w| w[1] >= w[0])
    }
}

/// Privatizes `img` at each total budget with seeds `0..seeds` and averages
/// the PSNR against the input.
pub fn monotone_psnr_sweep(
    img: &PixelImage,
    epsilons: &[f64],
    seeds: u64,
    prune: bool,
) -> Result<PsnrSweep> {
    if epsilons.len() < 3 {
        return Err(invalid("a sweep needs at least 3 budgets"));
    }
    if seeds < 5 {
        return Err(invalid("a sweep needs at least 5 seeds"));
    }
    if epsilons.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("budgets must be ascending"));
    }
    let weights = WeightTable::for_colorspace(img.colorspace());
    let mut means = Vec::with_capacity(epsilons.len());
    let mut std_errors = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let alloc = allocate(eps, &weights)?;
        let values = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let (out, _) = privatize(img, &alloc, &RandomnessSpec::new(seed), prune)?;
                psnr(img, &out)
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if mean.is_finite() {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            f64::NAN
        };
        means.push(mean);
        std_errors.push(se);
    }
    Ok(PsnrSweep {
        epsilons: epsilons.to_vec(),
        means,
        std_errors,
    })
}

/// Deterministic RGB test scene with smooth shading, edges and texture.
pub fn synthetic_scene(width: usize, height: usize) -> PixelImage {
    let mut samples = Vec::with_capacity(width * height * 3);
    let (w, h) = (width as f64, height as f64);
    for row in 0..height {
        for col in 0..width {
            let (x, y) = (col as f64 / w, row as f64 / h);
            let (dx, dy) = (x - 0.5, y - 0.45);
            let face = (dx * dx / 0.09 + dy * dy / 0.14) < 1.0;
            let shade = 0.5 + 0.5 * (6.0 * x).sin() * (4.0 * y).cos();
            let texture = 12.0 * (37.0 * x + 23.0 * y).sin();
            let (r, g, b) = if face {
                let light = 1.0 - (dx * dx + dy * dy).sqrt();
                (
                    205.0 * light + texture,
                    160.0 * light + texture,
                    130.0 * light,
                )
            } else {
                (
                    40.0 + 90.0 * shade,
                    70.0 + 60.0 * y + texture,
                    110.0 + 100.0 * x * shade,
                )
            };
            samples.extend([r, g, b].map(|v: f64| v.round().clamp(0.0, 255.0) as u8));
        }
    }
    PixelImage::new(width, height, ColorSpace::Rgb, samples).expect("dimensions are consistent")
}
