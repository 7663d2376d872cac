use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use pixel_ldp::imageio::{read_image, write_image, AlphaPolicy, ReportDocument};
use pixel_ldp::{
    allocate, privatize, rgb_to_ycbcr, BudgetAllocation, ColorSpace, PixelImage, RandomnessSpec,
};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::{parse_path, BudgetArgs, SeedArgs, EXIT_USAGE};

#[derive(Args, Debug)]
pub struct PrivatizeArgs {
    /// Input images (PNG, PPM or PGM).
    #[arg(required = true, value_parser = parse_path)]
    pub inputs: Vec<PathBuf>,

    /// Output directory; created if missing.
    #[arg(short, long, value_parser = parse_path)]
    pub output: PathBuf,

    #[command(flatten)]
    pub budget: BudgetArgs,

    #[command(flatten)]
    pub seed: SeedArgs,

    /// Skip LL-band pruning.
    #[arg(long)]
    pub no_ll_prune: bool,

    /// Report path. With one input this replaces `<output>/<stem>.report.json`;
    /// with several it receives a merged report keyed by file name.
    #[arg(long, value_parser = parse_path)]
    pub report: Option<PathBuf>,

    /// Drop an alpha channel instead of rejecting the file.
    #[arg(long)]
    pub strip_alpha: bool,

    /// Worker threads for batch processing (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
}

/// Seed for one file: SHA-256 of the master seed and the file name.
///
/// Files released under one master seed must not share flip masks, or the
/// XOR of two outputs would expose the XOR of their inputs.
pub fn file_seed(master: u64, name: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(master.to_le_bytes())
        .chain_update(name.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

fn file_name(path: &Path) -> anyhow::Result<String> {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(str::to_owned)
        .with_context(|| format!("{} has no usable file name", path.display()))
}

fn to_luma(img: PixelImage) -> anyhow::Result<PixelImage> {
    match img.colorspace() {
        ColorSpace::Gray => Ok(img),
        _ => {
            let ycc = rgb_to_ycbcr(&img)?;
            Ok(PixelImage::gray(
                ycc.width(),
                ycc.height(),
                ycc.channel_plane(0),
            )?)
        }
    }
}

fn process(
    input: &Path,
    args: &PrivatizeArgs,
    alloc: &BudgetAllocation,
    master_seed: u64,
) -> anyhow::Result<ReportDocument> {
    let name = file_name(input)?;
    let alpha = if args.strip_alpha {
        AlphaPolicy::Strip
    } else {
        AlphaPolicy::Reject
    };
    let mut img = read_image(input, alpha)?;
    if args.budget.grayscale {
        img = to_luma(img)?;
    } else if img.channels() == 1 {
        bail!("{name} is grayscale; pass --grayscale to privatize single-channel images");
    }
    let rand = RandomnessSpec::new(file_seed(master_seed, &name));
    let (out, report) = privatize(&img, alloc, &rand, !args.no_ll_prune)?;
    let target = args.output.join(&name);
    write_image(&out, &target)?;
    let mut doc = ReportDocument::from(&report);
    doc.seed = master_seed;
    Ok(doc)
}

fn report_path(output: &Path, name: &str) -> PathBuf {
    let stem = Path::new(name)
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or(name);
    output.join(format!("{stem}.report.json"))
}

pub fn run(args: PrivatizeArgs) -> anyhow::Result<u8> {
    let weights = args.budget.weight_table()?;
    let alloc = allocate(args.budget.epsilon, &weights)?;
    let master_seed = args.seed.resolve();
    std::fs::create_dir_all(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let results: Vec<(PathBuf, anyhow::Result<ReportDocument>)> = pool.install(|| {
        args.inputs
            .par_iter()
            .map(|input| (input.clone(), process(input, &args, &alloc, master_seed)))
            .collect()
    });

    let mut failed = 0usize;
    let mut merged = BTreeMap::new();
    for (input, result) in results {
        match result {
            Ok(doc) => {
                let name = file_name(&input)?;
                println!(
                    "{} -> {} (ε = {}, psnr = {})",
                    input.display(),
                    args.output.join(&name).display(),
                    doc.epsilon_total,
                    doc.psnr_db
                        .map_or("n/a".to_string(), |p| format!("{p:.2} dB")),
                );
                merged.insert(name, doc);
            }
            Err(e) => {
                failed += 1;
                eprintln!("error: {}: {e:#}", input.display());
            }
        }
    }

    match (&args.report, args.inputs.len()) {
        (Some(path), 1) => {
            if let Some(doc) = merged.values().next() {
                doc.write(path)?;
            }
        }
        (Some(path), _) => {
            let text = serde_json::to_string_pretty(&merged)?;
            std::fs::write(path, text + "\n")
                .with_context(|| format!("cannot write {}", path.display()))?;
        }
        (None, _) => {
            for (name, doc) in &merged {
                doc.write(report_path(&args.output, name))?;
            }
        }
    }
    println!("seed: {master_seed}");
    Ok(if failed == 0 { 0 } else { EXIT_USAGE })
}
