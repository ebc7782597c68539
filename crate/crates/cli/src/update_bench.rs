//! `quiver update-bench`: streaming update workload — iterations of batched
//! deletes and inserts merged into the index under concurrent query load.

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::Result;
use clap::Args;
use std::sync::Mutex;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use quiver::engine::{Engine, EngineConfig};

use crate::bench::{bench_one, compute_oracle, BenchArgs};
use crate::common::{dir_bytes, engine_config, percentile_us, RuntimeArgs, SearchArgs};

#[derive(Args, Debug)]
pub struct UpdateBenchArgs {
    /// Built store directory to mutate.
    #[arg(long)]
    pub store: PathBuf,
    /// Insert source: rows beyond the store's current id horizon are drawn
    /// in order as the new vectors.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub element_type: Option<String>,
    /// Query file for the concurrent load and final benchmark.
    #[arg(long)]
    pub queries: PathBuf,
    /// Compute live-set ground truth after every merge.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, default_value_t = 10)]
    pub iterations: usize,
    /// Fraction of the live set deleted per iteration.
    #[arg(long, default_value_t = 0.05)]
    pub delete_frac: f64,
    /// Fraction of the live set inserted per iteration.
    #[arg(long, default_value_t = 0.05)]
    pub insert_frac: f64,
    /// GC trigger ratio.
    #[arg(long, default_value_t = 0.3)]
    pub gc_threshold: f64,
    /// Candidate list size for queries.
    #[arg(long, default_value_t = 100)]
    pub ls: usize,
    /// Concurrent query worker threads during updates.
    #[arg(long, default_value_t = 2)]
    pub query_threads: usize,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Serialize)]
struct IterationRecord {
    record: &'static str,
    iteration: usize,
    deleted: usize,
    inserted: usize,
    #[serde(flatten)]
    merge: quiver::update::MergeStats,
    live_count: u64,
    store_bytes: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    recall: Option<f64>,
    concurrent_queries: usize,
    concurrent_p50_us: u64,
    concurrent_p99_us: u64,
}

pub fn run(args: UpdateBenchArgs) -> Result<()> {
    args.runtime.init();
    let mut config: EngineConfig = engine_config(
        args.runtime.seed,
        args.search.params(args.ls),
        100,
        1.2,
        args.search.cache_entries,
        args.gc_threshold,
    );
    // merges are driven per iteration, not by the overlay threshold
    config.mem_threshold = Some(usize::MAX);
    let engine = Engine::open(&args.store, config)?;
    let data = crate::common::load_vectors(&args.data, args.format.as_deref(), args.element_type.as_deref())?;
    let queries = crate::common::load_vectors(&args.queries, args.format.as_deref(), args.element_type.as_deref())?;
    let params = args.search.params(args.ls);
    let mut rng = ChaCha8Rng::seed_from_u64(args.runtime.seed.wrapping_add(0x5eed));

    let mut insert_cursor = engine.store().next_id();
    anyhow::ensure!(
        data.dim() == engine.store().config().dim,
        quiver::Error::usage("insert source dimension does not match the store")
    );

    for iteration in 0..args.iterations {
        let live = engine.store().live_ids();
        let n_delete = (live.len() as f64 * args.delete_frac) as usize;
        let n_insert = (live.len() as f64 * args.insert_frac) as usize;
        anyhow::ensure!(
            (insert_cursor as usize + n_insert) <= data.count(),
            quiver::Error::usage(format!(
                "insert source exhausted at iteration {iteration}: need {} rows",
                insert_cursor as usize + n_insert
            ))
        );
        let victims: Vec<u32> = {
            let mut ids = live.clone();
            ids.shuffle(&mut rng);
            ids.truncate(n_delete);
            ids
        };

        // concurrent query load for the whole iteration
        let stop = AtomicBool::new(false);
        let issued = AtomicUsize::new(0);
        let latencies = Mutex::new(Vec::<u64>::new());
        let record = std::thread::scope(|scope| -> Result<IterationRecord> {
            for w in 0..args.query_threads {
                let stop = &stop;
                let issued = &issued;
                let latencies = &latencies;
                let engine = &engine;
                let queries = &queries;
                let params = params.clone();
                scope.spawn(move || {
                    let mut q = w;
                    while !stop.load(Ordering::Relaxed) {
                        let query = queries.vector_f32((q % queries.count()) as u32);
                        let t = Instant::now();
                        if engine.search(&query, &params).is_ok() {
                            latencies.lock().unwrap().push(t.elapsed().as_micros() as u64);
                            issued.fetch_add(1, Ordering::Relaxed);
                        }
                        q += args.query_threads;
                    }
                });
            }

            for &id in &victims {
                engine.delete(id)?;
            }
            let mut inserted = 0usize;
            for _ in 0..n_insert {
                engine.insert(data.vector_bytes(insert_cursor))?;
                insert_cursor += 1;
                inserted += 1;
            }
            let merge = engine.merge()?;
            stop.store(true, Ordering::Relaxed);
            Ok(IterationRecord {
                record: "iteration",
                iteration,
                deleted: victims.len(),
                inserted,
                merge,
                live_count: engine.store().live_count(),
                store_bytes: dir_bytes(&args.store)?,
                recall: None,
                concurrent_queries: issued.load(Ordering::Relaxed),
                concurrent_p50_us: 0,
                concurrent_p99_us: 0,
            })
        });
        let mut record = record?;
        let mut lat = latencies.into_inner().unwrap();
        lat.sort_unstable();
        record.concurrent_p50_us = percentile_us(&lat, 50.0);
        record.concurrent_p99_us = percentile_us(&lat, 99.0);

        if args.oracle {
            record.recall = Some(post_merge_recall(&engine, &queries, &args)?);
        }
        println!("{}", serde_json::to_string(&record)?);
        eprintln!(
            "iteration {iteration}: -{} +{} vectors, merge {:.2}s/{:.2}s, {} blocks rewritten, gc {} bytes{}",
            record.deleted,
            record.inserted,
            record.merge.merge_delete_seconds,
            record.merge.merge_insert_seconds,
            record.merge.graph_blocks_rewritten,
            record.merge.gc_bytes_reclaimed,
            record.recall.map(|r| format!(", recall {r:.4}")).unwrap_or_default()
        );
    }

    // final benchmark over the quiesced store
    let bench_args = BenchArgs {
        store: args.store.clone(),
        queries: args.queries.clone(),
        format: args.format.clone(),
        element_type: args.element_type.clone(),
        truth: None,
        oracle: true,
        ls: vec![args.ls],
        search: args.search.clone(),
        runtime: RuntimeArgs { seed: args.runtime.seed, threads: args.runtime.threads },
    };
    let truth = compute_oracle(&engine, &queries, args.search.k)?;
    let report = bench_one(&engine, &queries, Some(&truth), args.ls, &bench_args)?;
    println!("{}", serde_json::to_string(&report.aggregate)?);
    eprintln!(
        "final: {} live vectors, recall {:.4}, {} bytes on disk",
        engine.store().live_count(),
        report.aggregate.mean_recall.unwrap_or(0.0),
        dir_bytes(&args.store)?
    );
    Ok(())
}

fn post_merge_recall(engine: &Engine, queries: &quiver::types::Dataset, args: &UpdateBenchArgs) -> Result<f64> {
    use rayon::prelude::*;
    let truth = compute_oracle(engine, queries, args.search.k)?;
    let params = args.search.params(args.ls);
    let sum: f64 = (0..queries.count() as u32)
        .into_par_iter()
        .map(|q| {
            let query = queries.vector_f32(q);
            let Ok((found, _)) = engine.search(&query, &params) else { return 0.0 };
            let ids: Vec<u32> = found.into_iter().map(|(id, _)| id).collect();
            if ids.len() < args.search.k {
                return 0.0;
            }
            quiver::distance::recall_at_k(&ids, &truth[q as usize], args.search.k).unwrap_or(0.0)
        })
        .sum();
    Ok(sum / queries.count() as f64)
}
