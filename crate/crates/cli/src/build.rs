//! `quiver build`: dataset file in, complete store directory out.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use quiver::engine::{colocated_baseline_bytes, Engine, StoreOptions};

use crate::common::{engine_config, DatasetArgs, RuntimeArgs, SearchArgs};
use crate::stats::storage_breakdown;

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Output store directory (must be empty or absent).
    #[arg(long)]
    pub store: PathBuf,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    /// Graph degree bound R.
    #[arg(short = 'R', long, default_value_t = 96)]
    pub max_degree: u32,
    /// Build candidate list size L_b.
    #[arg(long, default_value_t = 100)]
    pub l_build: usize,
    /// Pruning slack alpha.
    #[arg(long, default_value_t = 1.2)]
    pub prune_alpha: f32,
    /// Uncompressed chunk byte budget C.
    #[arg(long, default_value_t = 4 << 20)]
    pub chunk_bytes: usize,
    /// Chunk-metadata overhead budget; overrides --chunk-bytes when set.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Assumed compression ratio for chunk sizing.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Uncompressed segment byte capacity.
    #[arg(long, default_value_t = 512 << 20)]
    pub segment_bytes: usize,
    /// PQ subspace count M (default: dim/4 capped at 64).
    #[arg(long)]
    pub pq_m: Option<u32>,
    /// PQ training sample size.
    #[arg(long, default_value_t = 20_000)]
    pub pq_sample: usize,
    /// Also materialize the co-located baseline layout next to the store
    /// for a byte-exact size comparison.
    #[arg(long)]
    pub materialize_baseline: bool,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

pub fn run(args: BuildArgs) -> Result<()> {
    args.runtime.init();
    let data = args.dataset.load()?;
    anyhow::ensure!(data.count() > 0, quiver::Error::usage("dataset is empty"));
    let options = StoreOptions {
        segment_bytes: args.segment_bytes,
        chunk_bytes: args.chunk_bytes,
        beta: args.beta,
        alpha: args.alpha,
        max_degree: args.max_degree,
        pq_subspaces: args.pq_m,
        sample_fraction: 0.10,
    };
    let mut config = engine_config(
        args.runtime.seed,
        args.search.params(100),
        args.l_build,
        args.prune_alpha,
        args.search.cache_entries,
        0.3,
    );
    config.pq_sample = args.pq_sample;

    eprintln!(
        "building store at {} from {} vectors (dim {}, {:?})",
        args.store.display(),
        data.count(),
        data.dim(),
        data.element_type()
    );
    let t0 = std::time::Instant::now();
    let engine = Engine::build(&args.store, &data, &options, config)?;
    eprintln!("build finished in {:.1}s", t0.elapsed().as_secs_f64());

    if args.materialize_baseline {
        let path = baseline_path(&args.store);
        let v = engine.store().config().vector_width() as u64;
        let written = materialize_baseline(&path, &data, args.max_degree as u64)?;
        let analytic = colocated_baseline_bytes(data.count() as u64, v, args.max_degree as u64);
        eprintln!(
            "materialized co-located baseline at {} ({written} bytes; analytic {analytic})",
            path.display()
        );
    }

    let breakdown = storage_breakdown(&args.store)?;
    println!("{}", serde_json::to_string(&breakdown)?);
    eprintln!(
        "decoupled total {} bytes vs co-located baseline {} bytes ({:.1}% of baseline)",
        breakdown.decoupled_total_bytes,
        breakdown.colocated_baseline_bytes,
        100.0 * breakdown.decoupled_total_bytes as f64 / breakdown.colocated_baseline_bytes.max(1) as f64
    );
    Ok(())
}

fn baseline_path(store: &std::path::Path) -> PathBuf {
    let name = store.file_name().map(|n| n.to_string_lossy().to_string()).unwrap_or_default();
    store.with_file_name(format!("{name}.colocated"))
}

/// Writes the page-aligned fixed-entry layout (vector followed by a padded
/// degree-R id list) that co-locating systems use, for byte-exact size
/// comparison.
fn materialize_baseline(path: &std::path::Path, data: &quiver::types::Dataset, r: u64) -> Result<u64> {
    use std::io::Write;
    let v = data.vector_width() as u64;
    let entry = v + 4 * (r + 1);
    let per_page = if entry <= 4096 { (4096 / entry).max(1) } else { 1 };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut page = Vec::with_capacity(4096);
    let mut in_page = 0u64;
    for bytes in data.iter_bytes() {
        page.extend_from_slice(bytes);
        page.extend_from_slice(&(r as u32).to_le_bytes());
        page.resize(page.len() + 4 * r as usize, 0);
        in_page += 1;
        if in_page == per_page {
            page.resize(4096.max(page.len()), 0);
            out.write_all(&page)?;
            page.clear();
            in_page = 0;
        }
    }
    if !page.is_empty() {
        page.resize(4096.max(page.len()), 0);
        out.write_all(&page)?;
    }
    out.flush()?;
    Ok(std::fs::metadata(path)?.len())
}
