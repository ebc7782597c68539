//! `quiver bench`: recall/throughput benchmark over a built store.

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::Args;
use quiver::dataset;
use quiver::engine::Engine;
use quiver::search::QueryStats;
use quiver::types::Dataset;
use serde::Serialize;

use crate::common::{engine_config, percentile_us, RuntimeArgs, SearchArgs};

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Store directory.
    #[arg(long)]
    pub store: PathBuf,
    /// Query file (same format and dimension as the dataset).
    #[arg(long)]
    pub queries: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub element_type: Option<String>,
    /// Ground-truth ivecs file (one id row per query).
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Compute exact ground truth by scanning the live set.
    #[arg(long)]
    pub oracle: bool,
    /// Candidate list sizes to sweep, e.g. 50,100,200.
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub ls: Vec<usize>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[command(flatten)]
    pub runtime: RuntimeArgs,
}

#[derive(Serialize)]
struct QueryRecord<'a> {
    record: &'static str,
    l_search: usize,
    #[serde(flatten)]
    stats: &'a QueryStats,
    result_ids: &'a [u32],
}

#[derive(Serialize)]
pub struct Aggregate {
    pub record: &'static str,
    pub l_search: usize,
    pub queries: usize,
    pub qps: f64,
    pub mean_latency_us: f64,
    pub p50_us: u64,
    pub p99_us: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_recall: Option<f64>,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub graph_ios: u64,
    pub vector_ios: u64,
    pub pq_evals: u64,
    pub reranked: u64,
    pub terminated_early: u64,
}

pub fn run(args: BenchArgs) -> Result<()> {
    args.runtime.init();
    let engine = Engine::open(
        &args.store,
        engine_config(args.runtime.seed, args.search.params(100), 100, 1.2, args.search.cache_entries, 0.3),
    )?;
    let queries = crate::common::load_vectors(&args.queries, args.format.as_deref(), args.element_type.as_deref())?;
    anyhow::ensure!(queries.count() > 0, quiver::Error::usage("query file is empty"));

    let truth = load_truth(&args, &engine, &queries)?;
    if truth.is_none() && !args.oracle {
        anyhow::bail!(quiver::Error::usage(
            "no ground truth: pass --truth FILE.ivecs or --oracle"
        ));
    }

    let stdout = std::io::stdout();
    for &l_search in &args.ls {
        let report = bench_one(&engine, &queries, truth.as_deref(), l_search, &args)?;
        let mut lock = stdout.lock();
        use std::io::Write;
        for (stats, ids) in &report.records {
            let line = serde_json::to_string(&QueryRecord {
                record: "query",
                l_search,
                stats,
                result_ids: ids,
            })?;
            writeln!(lock, "{line}")?;
        }
        writeln!(lock, "{}", serde_json::to_string(&report.aggregate)?)?;
        eprintln!(
            "L_s={l_search}: {} queries, {:.0} qps, mean {:.0}us p50 {}us p99 {}us{}",
            report.aggregate.queries,
            report.aggregate.qps,
            report.aggregate.mean_latency_us,
            report.aggregate.p50_us,
            report.aggregate.p99_us,
            report
                .aggregate
                .mean_recall
                .map(|r| format!(", recall@{} {:.4}", args.search.k, r))
                .unwrap_or_default()
        );
    }
    Ok(())
}

pub struct BenchReport {
    pub records: Vec<(QueryStats, Vec<u32>)>,
    pub aggregate: Aggregate,
}

fn load_truth(args: &BenchArgs, engine: &Engine, queries: &Dataset) -> Result<Option<Vec<Vec<u32>>>> {
    if let Some(path) = &args.truth {
        let rows = dataset::load_ivecs_ids(path).with_context(|| format!("loading {}", path.display()))?;
        anyhow::ensure!(
            rows.len() >= queries.count(),
            quiver::Error::usage("ground truth has fewer rows than queries")
        );
        return Ok(Some(rows));
    }
    if args.oracle {
        return Ok(Some(compute_oracle(engine, queries, args.search.k)?));
    }
    Ok(None)
}

/// Exact top-k ids per query over the live set (linear scan, parallel over
/// queries).
pub fn compute_oracle(engine: &Engine, queries: &Dataset, k: usize) -> Result<Vec<Vec<u32>>> {
    use rayon::prelude::*;
    let (ids, flat) = engine.live_matrix()?;
    anyhow::ensure!(!ids.is_empty(), quiver::Error::usage("live set is empty"));
    Ok((0..queries.count() as u32)
        .into_par_iter()
        .map(|q| {
            let query = queries.vector_f32(q);
            engine
                .oracle_knn(&ids, &flat, &query, k)
                .into_iter()
                .map(|(id, _)| id)
                .collect()
        })
        .collect())
}

pub fn bench_one(
    engine: &Engine,
    queries: &Dataset,
    truth: Option<&[Vec<u32>]>,
    l_search: usize,
    args: &BenchArgs,
) -> Result<BenchReport> {
    let params = args.search.params(l_search);
    params.validate()?;
    let n = queries.count();
    let next = AtomicUsize::new(0);
    let workers = args.runtime.workers().min(n.max(1));
    let t0 = Instant::now();
    let mut slots: Vec<Option<(QueryStats, Vec<u32>)>> = Vec::new();
    slots.resize_with(n, || None);

    // workers claim disjoint query indices and return their batches
    let results: Vec<Vec<(usize, QueryStats, Vec<u32>)>> = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for _ in 0..workers {
            let next = &next;
            let params = params.clone();
            handles.push(scope.spawn(move || {
                let mut out = Vec::new();
                loop {
                    let q = next.fetch_add(1, Ordering::Relaxed);
                    if q >= n {
                        break out;
                    }
                    let query = queries.vector_f32(q as u32);
                    let t = Instant::now();
                    match engine.search(&query, &params) {
                        Ok((found, mut stats)) => {
                            stats.query_id = q as u64;
                            stats.latency_us = t.elapsed().as_micros() as u64;
                            out.push((q, stats, found.into_iter().map(|(id, _)| id).collect()));
                        }
                        Err(e) => {
                            let mut stats = QueryStats {
                                query_id: q as u64,
                                read_errors: 1,
                                ..Default::default()
                            };
                            stats.latency_us = t.elapsed().as_micros() as u64;
                            eprintln!("query {q} failed: {e}");
                            out.push((q, stats, Vec::new()));
                        }
                    }
                }
            }));
        }
        handles.into_iter().map(|h| h.join().expect("bench worker")).collect()
    });
    let wall = t0.elapsed().as_secs_f64();
    for batch in results {
        for (q, stats, ids) in batch {
            slots[q] = Some((stats, ids));
        }
    }

    let mut records: Vec<(QueryStats, Vec<u32>)> = slots.into_iter().flatten().collect();
    let mut recall_sum = 0.0;
    let mut recall_n = 0usize;
    if let Some(truth) = truth {
        for (stats, ids) in records.iter_mut() {
            let row = &truth[stats.query_id as usize];
            if ids.len() >= args.search.k && row.len() >= args.search.k {
                let r = quiver::distance::recall_at_k(ids, row, args.search.k)?;
                stats.recall = Some(r);
                recall_sum += r;
                recall_n += 1;
            }
        }
    }

    let mut latencies: Vec<u64> = records.iter().map(|(s, _)| s.latency_us).collect();
    latencies.sort_unstable();
    let aggregate = Aggregate {
        record: "aggregate",
        l_search,
        queries: records.len(),
        qps: records.len() as f64 / wall.max(1e-9),
        mean_latency_us: latencies.iter().sum::<u64>() as f64 / records.len().max(1) as f64,
        p50_us: percentile_us(&latencies, 50.0),
        p99_us: percentile_us(&latencies, 99.0),
        mean_recall: (recall_n > 0).then(|| recall_sum / recall_n as f64),
        cache_hits: records.iter().map(|(s, _)| s.cache_hits).sum(),
        cache_misses: records.iter().map(|(s, _)| s.cache_misses).sum(),
        graph_ios: records.iter().map(|(s, _)| s.graph_ios).sum(),
        vector_ios: records.iter().map(|(s, _)| s.vector_ios).sum(),
        pq_evals: records.iter().map(|(s, _)| s.pq_evals).sum(),
        reranked: records.iter().map(|(s, _)| s.reranked as u64).sum(),
        terminated_early: records.iter().filter(|(s, _)| s.terminated_early).count() as u64,
    };
    Ok(BenchReport { records, aggregate })
}
