use std::path::PathBuf;

use clap::Args;
use pixel_ldp::imageio::{channel_name, ReportDocument};
use pixel_ldp::{allocate, blocklevel_to_pixel_epsilon, PrivacyReport};

use crate::{parse_path, BudgetArgs};

/// Block-level comparison point: 0.5 per DCT coefficient over an 8×8 block
/// in 3 channels with the DC coefficient removed.
const BLOCK_EPSILON_PER_COEFF: f64 = 0.5;
const BLOCK_SIZE: usize = 8;
const BLOCK_CHANNELS: usize = 3;
const BLOCK_REMOVED: usize = 1;

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,

    /// Also write the report document as JSON.
    #[arg(long, value_parser = parse_path)]
    pub report: Option<PathBuf>,
}

pub fn run(args: ReportArgs) -> anyhow::Result<u8> {
    let weights = args.budget.weight_table()?;
    let alloc = allocate(args.budget.epsilon, &weights)?;
    let report = PrivacyReport::new(&alloc, true, 0);
    let channels = alloc.channels();

    println!("ε_total = {}", alloc.epsilon_total);
    println!(
        "{:<8}{:>5}{:>14}{:>14}{:>16}",
        "channel", "bit", "epsilon", "p_keep", "p_flip"
    );
    for p in &report.planes {
        println!(
            "{:<8}{:>5}{:>14.6}{:>14.6}{:>16.6e}",
            channel_name(channels, p.channel),
            p.bit,
            p.epsilon,
            p.p_keep,
            p.p_flip
        );
    }
    println!("tv_bound = {:.12}", report.tv_bound);
    println!("advantage_bound = {:.12}", report.advantage_bound);

    let block = blocklevel_to_pixel_epsilon(
        BLOCK_EPSILON_PER_COEFF,
        BLOCK_SIZE,
        BLOCK_SIZE,
        BLOCK_CHANNELS,
        BLOCK_REMOVED,
    )?;
    println!("block-level per-pixel ε (8x8 DCT, 0.5/coeff, DC removed, 3 channels) = {block}");
    if alloc.epsilon_total > 0.0 {
        println!("strictness ratio = {:.4}", block / alloc.epsilon_total);
    } else {
        println!("strictness ratio = n/a");
    }

    if let Some(path) = &args.report {
        let mut doc = ReportDocument::from(&report);
        doc.psnr_db = None;
        doc.write(path)?;
    }
    Ok(0)
}
