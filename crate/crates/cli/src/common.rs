//! Shared flag groups and helpers for the subcommands.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use quiver::dataset::FileFormat;
use quiver::engine::EngineConfig;
use quiver::index::vamana::BuildParams;
use quiver::search::SearchParams;
use quiver::types::{Dataset, ElementType};

#[derive(Args, Debug, Clone)]
pub struct DatasetArgs {
    /// Dataset file (fvecs/bvecs/ivecs by extension).
    #[arg(long)]
    pub data: PathBuf,
    /// Override the format inferred from the extension.
    #[arg(long)]
    pub format: Option<String>,
    /// Reinterpret bvecs payloads as signed bytes.
    #[arg(long)]
    pub element_type: Option<String>,
}

impl DatasetArgs {
    pub fn load(&self) -> Result<Dataset> {
        load_vectors(&self.data, self.format.as_deref(), self.element_type.as_deref())
    }
}

pub fn load_vectors(path: &Path, format: Option<&str>, element_type: Option<&str>) -> Result<Dataset> {
    let fmt = match format {
        Some(f) => f.parse::<FileFormat>()?,
        None => FileFormat::from_path(path)?,
    };
    let ds = quiver::dataset::load_dataset(path, fmt)
        .with_context(|| format!("loading {}", path.display()))?;
    match element_type.map(|s| s.parse::<ElementType>()).transpose()? {
        Some(et) if et != ds.element_type() => {
            anyhow::ensure!(
                et.width() == ds.element_type().width(),
                "cannot reinterpret {:?} as {:?}",
                ds.element_type(),
                et
            );
            Ok(Dataset::from_raw(ds.dim(), et, ds.raw().to_vec())?)
        }
        _ => Ok(ds),
    }
}

#[derive(Args, Debug, Clone)]
pub struct SearchArgs {
    /// Result size K.
    #[arg(short = 'K', long, default_value_t = 10)]
    pub k: usize,
    /// Beam width W.
    #[arg(short = 'W', long, default_value_t = 4)]
    pub beam_width: usize,
    /// Re-rank batch size B.
    #[arg(short = 'B', long, default_value_t = 10)]
    pub rerank_batch: usize,
    /// Benefit-ratio early-termination threshold.
    #[arg(long, default_value_t = 0.01)]
    pub benefit_threshold: f64,
    /// Neighbor-cache capacity in entries (default: 1% of the universe).
    #[arg(long)]
    pub cache_entries: Option<usize>,
}

impl SearchArgs {
    pub fn params(&self, l_search: usize) -> SearchParams {
        SearchParams {
            k: self.k,
            l_search,
            beam_width: self.beam_width,
            rerank_batch: self.rerank_batch,
            benefit_threshold: self.benefit_threshold,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct RuntimeArgs {
    /// Deterministic seed for builds, PQ, and workload sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (rayon pool and bench workers). Defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

impl RuntimeArgs {
    pub fn init(&self) {
        if let Some(n) = self.threads {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
        }
    }

    pub fn workers(&self) -> usize {
        self.threads
            .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
            .max(1)
    }
}

pub fn engine_config(seed: u64, search: SearchParams, build_list: usize, prune_alpha: f32, cache_entries: Option<usize>, gc_threshold: f64) -> EngineConfig {
    EngineConfig {
        search,
        build: BuildParams {
            build_list_size: build_list,
            prune_alpha,
            seed,
            ..Default::default()
        },
        cache_entries,
        gc_threshold,
        seed,
        ..Default::default()
    }
}

/// Total bytes of every regular file under a store directory.
pub fn dir_bytes(dir: &Path) -> Result<u64> {
    let mut total = 0;
    for entry in walk(dir)? {
        total += entry.1;
    }
    Ok(total)
}

/// (path, size) of every regular file under `dir`, one level of nesting.
pub fn walk(dir: &Path) -> Result<Vec<(PathBuf, u64)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("reading {}", d.display()))? {
            let entry = entry?;
            let path = entry.path();
            let meta = entry.metadata()?;
            if meta.is_dir() {
                stack.push(path);
            } else {
                out.push((path, meta.len()));
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Percentile over raw latency samples (nearest-rank).
pub fn percentile_us(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
