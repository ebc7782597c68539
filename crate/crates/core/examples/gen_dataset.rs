//! Writes seeded synthetic datasets in fvecs/bvecs form, for trying out the
//! CLI without real benchmark files.
//!
//! Example:
//!   cargo run -p quiver --release --example gen_dataset -- \
//!     --out /tmp/base.fvecs --count 10000 --dim 128 --kind clustered --seed 1

use std::path::PathBuf;

use clap::Parser;
use quiver::dataset::{write_dataset, FileFormat};
use quiver::synthetic;

#[derive(Parser)]
struct Args {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    count: usize,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    /// clustered (f32 mixture), structured (u8 per-dimension Gaussian), or
    /// uniform (incompressible u8).
    #[arg(long, default_value = "clustered")]
    kind: String,
    #[arg(long, default_value_t = 64)]
    clusters: usize,
    #[arg(long, default_value_t = 10.0)]
    std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> anyhow::Result<()> {
    let args = Args::parse();
    let (data, format) = match args.kind.as_str() {
        "clustered" => (
            synthetic::clustered_f32(args.count, args.dim, args.clusters, args.seed),
            FileFormat::Fvecs,
        ),
        "structured" => (
            synthetic::dimension_structured_u8(args.count, args.dim, args.std, args.seed),
            FileFormat::Bvecs,
        ),
        "uniform" => (
            synthetic::uniform_random(args.count, args.dim, quiver::types::ElementType::U8, args.seed),
            FileFormat::Bvecs,
        ),
        other => anyhow::bail!("unknown kind {other:?}"),
    };
    write_dataset(&data, &args.out, format)?;
    eprintln!(
        "wrote {} vectors x {} dims to {}",
        data.count(),
        data.dim(),
        args.out.display()
    );
    Ok(())
}
