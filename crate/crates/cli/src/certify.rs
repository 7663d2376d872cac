use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use pixel_ldp::verify::{
    certify_planes, monotone_psnr_sweep, plane_claims, synthetic_scene, PipelineCertificate,
    PsnrSweep, DEFAULT_CONFIDENCE,
};
use pixel_ldp::{
    advantage_bound, allocate, exact_tv_reduced, tv_bound, FlipProbabilities, RandomnessSpec,
};
use serde::Serialize;

use crate::{parse_path, BudgetArgs, SeedArgs, EXIT_CHECK_FAILED};

/// Budgets swept by the utility check.
pub const SWEEP_EPSILONS: [f64; 7] = [1.0, 2.4, 5.2, 12.0, 20.0, 32.0, 58.0];
const SWEEP_SEEDS: u64 = 5;
const SCENE_SIZE: usize = 112;

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,

    #[command(flatten)]
    pub seed: SeedArgs,

    /// Randomized-response trials per input bit and plane.
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: u64,

    /// Write the certification report as JSON.
    #[arg(long, value_parser = parse_path)]
    pub report: Option<PathBuf>,

    /// Replace the randomizer of plane CHANNEL:BIT with one that spends
    /// more budget than it claims. Test hook for negative controls.
    #[arg(long, hide = true, value_parser = parse_plane)]
    pub inject_miscalibration: Option<(usize, usize)>,
}

fn parse_plane(s: &str) -> Result<(usize, usize), String> {
    let (c, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected CHANNEL:BIT, got {s:?}"))?;
    let c = c.parse().map_err(|_| format!("invalid channel {c:?}"))?;
    let b = b.parse().map_err(|_| format!("invalid bit {b:?}"))?;
    Ok((c, b))
}

#[derive(Serialize)]
struct TvSpotCheck {
    x: u32,
    x_prime: u32,
    exact_tv: f64,
    bound: f64,
    pass: bool,
}

#[derive(Serialize)]
struct CertificationReport {
    epsilon_total: f64,
    seed: u64,
    trials: u64,
    confidence: f64,
    tv_bound: f64,
    advantage_bound: f64,
    planes: PipelineCertificate,
    tv_checks: Vec<TvSpotCheck>,
    psnr_sweep: PsnrSweep,
    pass: bool,
}

pub fn run(args: CertifyArgs) -> anyhow::Result<u8> {
    let weights = args.budget.weight_table()?;
    let alloc = allocate(args.budget.epsilon, &weights)?;
    let seed = args.seed.resolve();
    let rand = RandomnessSpec::new(seed);

    let mut claims = plane_claims(&alloc);
    if let Some((channel, bit)) = args.inject_miscalibration {
        let claim = claims
            .iter_mut()
            .find(|c| (c.channel, c.bit) == (channel, bit))
            .with_context(|| format!("no plane {channel}:{bit} in this allocation"))?;
        claim.mechanism = FlipProbabilities::for_epsilon(2.0 * claim.claimed_epsilon + 1.5);
    }
    let planes = certify_planes(&claims, args.trials, &rand, DEFAULT_CONFIDENCE)?;
    for r in planes.failures() {
        eprintln!(
            "FAIL plane channel {} bit {}: log-ratio lower bound {:.4} > claimed ε {:.4}",
            r.channel, r.bit, r.ci_lower, r.claimed_epsilon
        );
    }

    // Exact TV over the first channel's eight bits, MSB first.
    let luma: Vec<f64> = (1..=8).rev().map(|b| alloc.epsilon(0, b)).collect();
    let bound = tv_bound(luma.iter().sum())?;
    let tv_checks = [
        (0, 255),
        (0, 128),
        (127, 128),
        (85, 170),
        (200, 201),
        (17, 17),
    ]
    .into_iter()
    .map(|(x, x_prime)| {
        let exact_tv = exact_tv_reduced(&luma, x, x_prime)?;
        Ok(TvSpotCheck {
            x,
            x_prime,
            exact_tv,
            bound,
            pass: exact_tv <= bound + 1e-12,
        })
    })
    .collect::<anyhow::Result<Vec<_>>>()?;
    for c in tv_checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "FAIL exact TV({}, {}) = {} above bound {}",
            c.x, c.x_prime, c.exact_tv, c.bound
        );
    }

    let mut scene = synthetic_scene(SCENE_SIZE, SCENE_SIZE);
    if args.budget.grayscale {
        scene = pixel_ldp::PixelImage::gray(
            SCENE_SIZE,
            SCENE_SIZE,
            pixel_ldp::rgb_to_ycbcr(&scene)?.channel_plane(0),
        )?;
    }
    let sweep = monotone_psnr_sweep(&scene, &SWEEP_EPSILONS, SWEEP_SEEDS, false)?;
    if !sweep.is_monotone() {
        eprintln!("FAIL PSNR sweep is not monotone: {:?}", sweep.means);
    }

    let pass = planes.passed() && tv_checks.iter().all(|c| c.pass) && sweep.is_monotone();
    let report = CertificationReport {
        epsilon_total: alloc.epsilon_total,
        seed,
        trials: args.trials,
        confidence: DEFAULT_CONFIDENCE,
        tv_bound: tv_bound(alloc.epsilon_total)?,
        advantage_bound: advantage_bound(alloc.epsilon_total)?,
        planes,
        tv_checks,
        psnr_sweep: sweep,
        pass,
    };
    println!(
        "planes certified: {}/{}",
        report.planes.planes.iter().filter(|r| r.pass).count(),
        report.planes.planes.len()
    );
    println!("certified per-pixel ε: {}", report.planes.certified_epsilon);
    println!("advantage bound: {}", report.advantage_bound);
    println!(
        "psnr sweep (dB): {}",
        report
            .psnr_sweep
            .means
            .iter()
            .map(|m| format!("{m:.3}"))
            .collect::<Vec<_>>()
            .join(" ")
    );
    println!("seed: {seed}");
    println!("{}", if pass { "PASS" } else { "FAIL" });
    if let Some(path) = &args.report {
        let text = serde_json::to_string_pretty(&report)?;
        std::fs::write(path, text + "\n")
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(if pass { 0 } else { EXIT_CHECK_FAILED })
}
