use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pixel_ldp::{ColorSpace, WeightTable};

mod certify;
mod privatize;
mod report;

/// Exit status for a failed privacy or utility check.
pub const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for bad usage or an I/O failure.
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "pixel-ldp",
    version,
    about = "Per-pixel ε-LDP image privatization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Privatize one or more images.
    Privatize(privatize::PrivatizeArgs),
    /// Statistically certify the mechanism at a budget.
    Certify(certify::CertifyArgs),
    /// Print the allocation and the derived privacy bounds for a budget.
    Report(report::ReportArgs),
}

/// Budget options shared by every subcommand.
#[derive(Args, Debug, Clone)]
pub struct BudgetArgs {
    /// Per-pixel privacy budget ε_total, in nats.
    #[arg(long, default_value_t = 20.0)]
    pub epsilon: f64,

    /// Channel weight ratio Y:Cb:Cr.
    #[arg(long, default_value = "4:1:1", value_parser = parse_weights)]
    pub weights: [f64; 3],

    /// Work on single-channel luma.
    #[arg(long)]
    pub grayscale: bool,
}

impl BudgetArgs {
    pub fn weight_table(&self) -> anyhow::Result<WeightTable> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            anyhow::bail!("--epsilon must be a finite nonnegative number");
        }
        if self.grayscale {
            return Ok(WeightTable::grayscale());
        }
        let [y, cb, cr] = self.weights;
        Ok(WeightTable::color(y, cb, cr)?)
    }

    pub fn colorspace(&self) -> ColorSpace {
        if self.grayscale {
            ColorSpace::Gray
        } else {
            ColorSpace::Rgb
        }
    }
}

fn parse_weights(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected Y:Cb:Cr, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (slot, part) in out.iter_mut().zip(parts) {
        let v: f64 = part
            .trim()
            .parse()
            .map_err(|_| format!("invalid weight {part:?}"))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(format!("weights must be positive, got {part:?}"));
        }
        *slot = v;
    }
    Ok(out)
}

/// Seed options shared by subcommands that draw randomness.
#[derive(Args, Debug, Clone)]
pub struct SeedArgs {
    /// Master seed. A fresh random seed is drawn (and recorded) when omitted.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SeedArgs {
    pub fn resolve(&self) -> u64 {
        self.seed.unwrap_or_else(rand::random)
    }
}

pub fn parse_path(s: &str) -> Result<PathBuf, String> {
    Ok(PathBuf::from(s))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Privatize(args) => privatize::run(args),
        Command::Certify(args) => certify::run(args),
        Command::Report(args) => report::run(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
