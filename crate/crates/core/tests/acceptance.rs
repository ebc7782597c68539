//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with the measured values (run with `--nocapture` to see them).
//!
//! Scale: 100K synthetic vectors where a criterion is about storage or
//! durability, 10K-subset stores for search-quality criteria; every
//! threshold is pinned in the assertions below.

use std::collections::HashSet;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quiver::characterize::characterize;
use quiver::codec::{
    build_frequency_table, ef_decode, ef_encode, ef_worst_case_bits, huffman_build,
    huffman_decode, huffman_encode,
};
use quiver::distance::recall_at_k;
use quiver::engine::{colocated_baseline_bytes, Engine, EngineConfig, StoreOptions};
use quiver::index::vamana::BuildParams;
use quiver::layout::{StoreConfig, VectorStore};
use quiver::search::SearchParams;
use quiver::synthetic;
use quiver::types::{Dataset, ElementType};

fn dir_bytes(dir: &Path) -> u64 {
    let mut total = 0;
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap().flatten() {
            let meta = entry.metadata().unwrap();
            if meta.is_dir() {
                stack.push(entry.path());
            } else {
                total += meta.len();
            }
        }
    }
    total
}

fn sealed_data_bytes(dir: &Path) -> u64 {
    let store = VectorStore::open(dir).unwrap();
    let sealed: Vec<u32> = store
        .manifests()
        .iter()
        .filter(|m| m.state == quiver::layout::SegmentState::Sealed)
        .map(|m| m.segment_id)
        .collect();
    sealed
        .iter()
        .map(|id| {
            std::fs::metadata(dir.join("segments").join(format!("{id}.data")))
                .unwrap()
                .len()
        })
        .sum()
}

/// Store + queries + exact ground truth shared by the search criteria.
struct SearchFixture {
    store_dir: std::path::PathBuf,
    engine: Engine,
    queries: Dataset,
    truth: Vec<Vec<u32>>,
}

static SEARCH_FIXTURE: OnceLock<SearchFixture> = OnceLock::new();

fn search_fixture() -> &'static SearchFixture {
    SEARCH_FIXTURE.get_or_init(|| {
        let n = 10_000;
        let dim = 128;
        let data = synthetic::clustered_f32(n, dim, 64, 41);
        let queries = synthetic::clustered_f32_queries(1000, dim, 64, 41, 42);
        let dir = std::env::temp_dir().join(format!("quiver-accept-search-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        let options = StoreOptions {
            segment_bytes: 512 * 2500,
            chunk_bytes: 512 * 500,
            max_degree: 32,
            ..Default::default()
        };
        let config = EngineConfig {
            build: BuildParams { max_degree: 32, build_list_size: 64, prune_alpha: 1.2, seed: 7 },
            cache_entries: Some(4096),
            pq_sample: n,
            seed: 7,
            ..Default::default()
        };
        let engine = Engine::build(&dir, &data, &options, config).unwrap();
        let truth: Vec<Vec<u32>> = (0..queries.count() as u32)
            .map(|q| {
                quiver::distance::brute_force_knn(&data, &queries.vector_f32(q), 10, &HashSet::new())
                    .unwrap()
                    .into_iter()
                    .map(|(id, _)| id)
                    .collect()
            })
            .collect();
        SearchFixture { store_dir: dir, engine, queries, truth }
    })
}

fn mean_recall(engine: &Engine, queries: &Dataset, truth: &[Vec<u32>], params: &SearchParams) -> (f64, f64) {
    let mut sum = 0.0;
    let mut reranked = 0u64;
    for q in 0..queries.count() as u32 {
        let (found, stats) = engine.search(&queries.vector_f32(q), params).unwrap();
        let ids: Vec<u32> = found.iter().map(|c| c.0).collect();
        sum += recall_at_k(&ids, &truth[q as usize], params.k).unwrap();
        reranked += stats.reranked as u64;
    }
    (sum / queries.count() as f64, reranked as f64 / queries.count() as f64)
}

#[test]
fn c01_losslessness_through_seal_reopen_merge_gc() {
    let n = 100_000usize;
    let dim = 128;
    let data = synthetic::dimension_structured_u8(n, dim, 10.0, 11);

    // phase 1: append-only log, reads before sealing
    let raw_dir = tempfile::tempdir().unwrap();
    {
        let store = VectorStore::create(
            raw_dir.path(),
            StoreConfig {
                dim,
                element_type: ElementType::U8,
                segment_capacity: 200_000,
                vectors_per_chunk: 1000,
                beta: 0.01,
                alpha: 1.0,
                max_degree: 16,
                pq_subspaces: 32,
                sample_fraction: 0.10,
                entry_point: None,
            },
        )
        .unwrap();
        for v in data.iter_bytes() {
            store.append_vector(v).unwrap();
        }
        for id in 0..n as u32 {
            assert_eq!(store.read_vector(id).unwrap(), data.vector_bytes(id), "pre-seal id {id}");
        }
    }

    // phase 2: full engine build (sealed), reopen, merge + GC, reopen again
    let dir = tempfile::tempdir().unwrap();
    let options = StoreOptions {
        segment_bytes: 128 * 10_000,
        chunk_bytes: 128 * 1000,
        max_degree: 16,
        ..Default::default()
    };
    let config = EngineConfig {
        build: BuildParams { max_degree: 16, build_list_size: 32, prune_alpha: 1.2, seed: 3 },
        gc_threshold: 0.3,
        seed: 3,
        ..Default::default()
    };
    let engine = Engine::build(dir.path(), &data, &options, config.clone()).unwrap();
    for id in 0..n as u32 {
        assert_eq!(engine.read_vector(id).unwrap(), data.vector_bytes(id), "post-seal id {id}");
    }
    drop(engine);
    let engine = Engine::open(dir.path(), config.clone()).unwrap();
    for id in (0..n as u32).step_by(3) {
        assert_eq!(engine.read_vector(id).unwrap(), data.vector_bytes(id), "post-reopen id {id}");
    }

    // deletes concentrated in segment 0 so GC relocates it, plus spread
    // deletes and fresh inserts so the merge exercises both paths
    let mut deleted = HashSet::new();
    for id in 0..6000u32 {
        engine.delete(id).unwrap();
        deleted.insert(id);
    }
    for id in (10_000..n as u32).step_by(50) {
        engine.delete(id).unwrap();
        deleted.insert(id);
    }
    let extra = synthetic::dimension_structured_u8(2000, dim, 10.0, 99);
    let mut inserted = Vec::new();
    for v in extra.iter_bytes() {
        inserted.push(engine.insert(v).unwrap());
    }
    let stats = engine.merge().unwrap();
    assert!(stats.gc_bytes_reclaimed > 0, "segment 0 should have been collected");

    let check = |engine: &Engine, label: &str| {
        for id in 0..n as u32 {
            if deleted.contains(&id) {
                assert!(engine.read_vector(id).is_err(), "{label}: deleted id {id} readable");
            } else {
                assert_eq!(engine.read_vector(id).unwrap(), data.vector_bytes(id), "{label} id {id}");
            }
        }
        for (i, &id) in inserted.iter().enumerate() {
            assert_eq!(engine.read_vector(id).unwrap(), extra.vector_bytes(i as u32), "{label} insert {id}");
        }
    };
    check(&engine, "post-merge-gc");
    drop(engine);
    let engine = Engine::open(dir.path(), config).unwrap();
    check(&engine, "post-final-reopen");
    println!(
        "ACCEPT c01 PASS: 100K vectors byte-identical pre-seal, post-seal, post-reopen, post-merge+GC ({} reclaimed)",
        stats.gc_bytes_reclaimed
    );
}

#[test]
fn c02_codec_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);

    // 10K Huffman buffers across skew regimes
    for i in 0..10_000 {
        let len = rng.random_range(1..=512);
        let spread: u32 = [2, 16, 256][i % 3];
        let data: Vec<u8> = (0..len).map(|_| (rng.random_range(0..spread) % 256) as u8).collect();
        let table = huffman_build(&build_frequency_table(&data).unwrap()).unwrap();
        let (bits, count) = huffman_encode(&data, &table).unwrap();
        assert_eq!(huffman_decode(&bits, count, &table, data.len()).unwrap(), data);
    }

    // 10K sorted EF lists; every encoding within the worst-case bound
    for _ in 0..10_000 {
        let universe = rng.random_range(2u32..1_000_000);
        let r = rng.random_range(1usize..=128.min(universe as usize));
        let mut ids: Vec<u32> = (0..r).map(|_| rng.random_range(0..universe)).collect();
        ids.sort_unstable();
        let enc = ef_encode(&ids, universe).unwrap();
        assert_eq!(ef_decode(&enc), ids);
        assert!(enc.payload_bits() <= ef_worst_case_bits(r as u64, universe as u64).unwrap());
    }
    println!("ACCEPT c02 PASS: 10K Huffman buffers and 10K Elias-Fano lists round-trip within bounds");
}

#[test]
fn c03_index_compression_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let universe = 1_000_000u32;
    let r = 128usize;
    let lists = 50_000usize;
    let mut encoded_bytes = 0u64;
    for _ in 0..lists {
        let mut set = HashSet::with_capacity(r);
        while set.len() < r {
            set.insert(rng.random_range(0..universe));
        }
        let mut ids: Vec<u32> = set.into_iter().collect();
        ids.sort_unstable();
        let enc = ef_encode(&ids, universe).unwrap();
        assert!(enc.payload_bits() <= ef_worst_case_bits(r as u64, universe as u64).unwrap());
        encoded_bytes += enc.to_bytes().len() as u64;
    }
    let raw_bytes = lists as u64 * (32 * (r as u64 + 1)) / 8;
    let ratio = encoded_bytes as f64 / raw_bytes as f64;
    assert!(ratio <= 0.65, "EF graph payload ratio {ratio:.4} above 0.65");
    println!("ACCEPT c03 PASS: EF payload = {ratio:.4} x raw 32(R+1) layout (bound 0.65)");
}

#[test]
fn c04_vector_compression_and_fallback_cap() {
    // structured u8 (per-dimension Gaussian, std 10): sealed <= 0.80 x raw
    let n = 100_000usize;
    let dim = 128;
    let data = synthetic::dimension_structured_u8(n, dim, 10.0, 44);
    let dir = tempfile::tempdir().unwrap();
    let store = VectorStore::create(
        dir.path(),
        StoreConfig {
            dim,
            element_type: ElementType::U8,
            segment_capacity: 25_000,
            vectors_per_chunk: 4096,
            beta: 0.01,
            alpha: 1.0,
            max_degree: 16,
            pq_subspaces: 32,
            sample_fraction: 0.10,
            entry_point: None,
        },
    )
    .unwrap();
    for v in data.iter_bytes() {
        store.append_vector(v).unwrap();
    }
    store.seal_full_segments().unwrap();
    let sealed = sealed_data_bytes(dir.path());
    let raw = (n * dim) as u64;
    let structured_ratio = sealed as f64 / raw as f64;
    assert!(structured_ratio <= 0.80, "structured sealed ratio {structured_ratio:.4} above 0.80");
    for id in (0..n as u32).step_by(997) {
        assert_eq!(store.read_vector(id).unwrap(), data.vector_bytes(id));
    }
    drop(store);

    // uniform random: raw fallback caps expansion at 1.02 x raw
    let dim = 176;
    let data = synthetic::uniform_random(n, dim, ElementType::U8, 45);
    let dir = tempfile::tempdir().unwrap();
    let store = VectorStore::create(
        dir.path(),
        StoreConfig {
            dim,
            element_type: ElementType::U8,
            segment_capacity: 25_000,
            vectors_per_chunk: 4096,
            beta: 0.01,
            alpha: 1.0,
            max_degree: 16,
            pq_subspaces: 16,
            sample_fraction: 0.10,
            entry_point: None,
        },
    )
    .unwrap();
    for v in data.iter_bytes() {
        store.append_vector(v).unwrap();
    }
    store.seal_full_segments().unwrap();
    let sealed = sealed_data_bytes(dir.path());
    let raw = (n * dim) as u64;
    let uniform_ratio = sealed as f64 / raw as f64;
    assert!(uniform_ratio <= 1.02, "uniform sealed ratio {uniform_ratio:.4} above 1.02");
    for id in (0..n as u32).step_by(1009) {
        assert_eq!(store.read_vector(id).unwrap(), data.vector_bytes(id));
    }
    println!(
        "ACCEPT c04 PASS: sealed/raw = {structured_ratio:.4} structured (bound 0.80), {uniform_ratio:.4} uniform (bound 1.02)"
    );
}

#[test]
fn c05_total_storage_vs_colocated_baseline() {
    let n = 10_000usize;
    let dim = 128; // V = 512 bytes (f32)
    let r = 96u32;
    let data = synthetic::clustered_f32(n, dim, 64, 51);
    let dir = tempfile::tempdir().unwrap();
    let options = StoreOptions {
        segment_bytes: 512 * 2500,
        chunk_bytes: 512 * 500,
        max_degree: r,
        ..Default::default()
    };
    let config = EngineConfig {
        build: BuildParams { max_degree: r as usize, build_list_size: 48, prune_alpha: 1.2, seed: 5 },
        pq_sample: n,
        seed: 5,
        ..Default::default()
    };
    let engine = Engine::build(dir.path(), &data, &options, config).unwrap();
    drop(engine);

    let decoupled = dir_bytes(dir.path());
    let baseline = colocated_baseline_bytes(n as u64, 512, r as u64);
    let ratio = decoupled as f64 / baseline as f64;
    assert!(ratio <= 0.70, "decoupled/baseline = {ratio:.4} above 0.70");
    println!(
        "ACCEPT c05 PASS: decoupled {decoupled} bytes = {ratio:.4} x co-located baseline {baseline} (V=512, R={r}, bound 0.70)"
    );
}

#[test]
fn c06_metadata_budget() {
    for &beta in &[0.002f64, 0.005] {
        let dim = 128;
        let v = dim;
        let chunk_bytes = quiver::layout::chunk_capacity_for_budget(beta, 1.0, v).unwrap();
        let n = 50_000usize;
        let data = synthetic::dimension_structured_u8(n, dim, 10.0, 61);
        let dir = tempfile::tempdir().unwrap();
        let store = VectorStore::create(
            dir.path(),
            StoreConfig {
                dim,
                element_type: ElementType::U8,
                segment_capacity: 25_000,
                vectors_per_chunk: (chunk_bytes / v) as u32,
                beta,
                alpha: 1.0,
                max_degree: 16,
                pq_subspaces: 32,
                sample_fraction: 0.10,
                entry_point: None,
            },
        )
        .unwrap();
        for vb in data.iter_bytes() {
            store.append_vector(vb).unwrap();
        }
        store.seal_full_segments().unwrap();
        let chunk_meta_bytes: u64 = store
            .manifests()
            .iter()
            .flat_map(|m| m.chunks.iter())
            .map(|c| quiver::layout::ChunkMetadata::serialized_len(c.num_blocks as usize, v) as u64)
            .sum();
        let raw_bytes = (n * v) as u64;
        let measured = chunk_meta_bytes as f64 / raw_bytes as f64;
        assert!(
            measured <= beta * 1.10,
            "beta {beta}: measured overhead {measured:.6} above {:.6}",
            beta * 1.10
        );
        println!("ACCEPT c06 PASS: beta {beta}: measured chunk-metadata overhead {measured:.6} <= {:.6}", beta * 1.10);
    }
}

#[test]
fn c07_search_accuracy() {
    let fx = search_fixture();
    let (recall_100, _) = mean_recall(
        &fx.engine,
        &fx.queries,
        &fx.truth,
        &SearchParams { k: 10, l_search: 100, beam_width: 4, rerank_batch: 10, benefit_threshold: 0.01 },
    );
    let (recall_200, _) = mean_recall(
        &fx.engine,
        &fx.queries,
        &fx.truth,
        &SearchParams { k: 10, l_search: 200, beam_width: 4, rerank_batch: 10, benefit_threshold: 0.01 },
    );
    assert!(recall_100 >= 0.90, "recall@10 at L_s=100 = {recall_100:.4} below 0.90");
    assert!(recall_200 >= 0.95, "recall@10 at L_s=200 = {recall_200:.4} below 0.95");
    assert!(recall_200 >= recall_100 - 0.01, "recall not monotone: {recall_100:.4} -> {recall_200:.4}");
    println!("ACCEPT c07 PASS: recall@10 = {recall_100:.4} at L_s=100 (>=0.90), {recall_200:.4} at L_s=200 (>=0.95)");
}

#[test]
fn c08_early_termination_fidelity() {
    let fx = search_fixture();
    let base = SearchParams { k: 10, l_search: 100, beam_width: 4, rerank_batch: 10, benefit_threshold: 0.0 };
    let early = SearchParams { benefit_threshold: 0.01, ..base.clone() };
    let (recall_full, reranked_full) = mean_recall(&fx.engine, &fx.queries, &fx.truth, &base);
    let (recall_early, reranked_early) = mean_recall(&fx.engine, &fx.queries, &fx.truth, &early);
    let gap = (recall_full - recall_early).abs();
    assert!(gap <= 0.005, "early-termination recall gap {gap:.4} above 0.005");
    assert!(
        reranked_early < reranked_full,
        "early termination did not reduce re-ranked candidates: {reranked_early} vs {reranked_full}"
    );
    println!(
        "ACCEPT c08 PASS: recall gap {gap:.4} (<=0.005), mean re-ranked {reranked_early:.1} vs {reranked_full:.1} full"
    );
}

#[test]
fn c09_io_path_separation_and_cache_warming() {
    let fx = search_fixture();
    // fresh engine: cold cache; capacity covers the working set
    let config = EngineConfig {
        cache_entries: Some(4096),
        ..Default::default()
    };
    let engine = Engine::open(&fx.store_dir, config).unwrap();
    let params = SearchParams::default();

    let batch: Vec<Vec<f32>> = (0..20).map(|q| fx.queries.vector_f32(q * 37)).collect();
    let mut traversal_vector_reads = 0u64;
    let run_batch = |label: &str, traversal: &mut u64| -> (u64, u64) {
        let _ = label;
        let mut hits = 0;
        let mut misses = 0;
        for q in &batch {
            let before = engine.store().io.snapshot();
            let (_, stats) = engine.search(q, &params).unwrap();
            let after = engine.store().io.snapshot();
            hits += stats.cache_hits;
            misses += stats.cache_misses;
            // every vector read this query issued is attributed to the
            // prefetch or re-rank path; traversal reads are the remainder
            *traversal += (after.vector_ios - before.vector_ios).saturating_sub(stats.vector_ios);
        }
        (hits, misses)
    };
    let (cold_hits, cold_misses) = run_batch("cold", &mut traversal_vector_reads);
    let (warm_hits, warm_misses) = run_batch("warm", &mut traversal_vector_reads);
    assert_eq!(traversal_vector_reads, 0, "vector reads escaped the prefetch/re-rank paths");
    let cold_rate = cold_hits as f64 / (cold_hits + cold_misses).max(1) as f64;
    let warm_rate = warm_hits as f64 / (warm_hits + warm_misses).max(1) as f64;
    assert!(
        warm_rate >= 2.0 * cold_rate,
        "warm hit rate {warm_rate:.3} below 2x cold rate {cold_rate:.3}"
    );
    println!(
        "ACCEPT c09 PASS: zero traversal vector reads; cache hit rate {cold_rate:.3} cold -> {warm_rate:.3} warm (>=2x)"
    );
}

#[test]
fn c10_update_correctness_and_write_amplification() {
    let n = 100_000usize;
    let dim = 128;
    let total = synthetic::clustered_f32(n + 60_000, dim, 64, 71);
    let base = total.prefix(n);
    let queries = synthetic::clustered_f32_queries(200, dim, 64, 71, 72);
    let dir = tempfile::tempdir().unwrap();
    let options = StoreOptions {
        segment_bytes: 512 * 25_000,
        chunk_bytes: 512 * 2000,
        max_degree: 32,
        ..Default::default()
    };
    let config = EngineConfig {
        build: BuildParams { max_degree: 32, build_list_size: 64, prune_alpha: 1.2, seed: 9 },
        mem_threshold: Some(usize::MAX),
        gc_threshold: 0.10,
        pq_sample: 20_000,
        seed: 9,
        ..Default::default()
    };
    let engine = Engine::build(dir.path(), &base, &options, config).unwrap();

    // write-amplification sanity on a small delta: a merge touching few
    // vertices rewrites strictly less than the whole graph
    for id in 0..20u32 {
        engine.delete(id).unwrap();
    }
    let small = engine.merge().unwrap();
    let total_blocks = engine.graph_file_bytes() / 4096;
    assert!(
        small.graph_blocks_rewritten < total_blocks,
        "small merge rewrote {} of {total_blocks} blocks",
        small.graph_blocks_rewritten
    );

    let mut rng = ChaCha8Rng::seed_from_u64(73);
    let mut insert_cursor = n as u32;
    let mut cumulative_rewritten = small.graph_blocks_rewritten;
    let mut min_recall = f64::INFINITY;
    for iteration in 0..10 {
        let live = engine.store().live_ids();
        let batch = live.len() / 20; // 5%
        let victims: Vec<u32> = {
            let mut ids = live.clone();
            ids.shuffle(&mut rng);
            ids.truncate(batch);
            ids
        };

        // concurrent query load while the iteration's updates run
        let stop = std::sync::atomic::AtomicBool::new(false);
        let tombstoned_leak = std::sync::atomic::AtomicU64::new(0);
        std::thread::scope(|scope| {
            for w in 0..2usize {
                let stop = &stop;
                let engine = &engine;
                let queries = &queries;
                let leak = &tombstoned_leak;
                scope.spawn(move || {
                    let params = SearchParams::default();
                    let mut q = w;
                    while !stop.load(std::sync::atomic::Ordering::Relaxed) {
                        let query = queries.vector_f32((q % queries.count()) as u32);
                        let pre: HashSet<u32> = engine.store().tombstones_snapshot();
                        if let Ok((found, _)) = engine.search(&query, &params) {
                            for (id, _) in found {
                                if pre.contains(&id) {
                                    leak.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                                }
                            }
                        }
                        q += 2;
                    }
                });
            }
            for &id in &victims {
                engine.delete(id).unwrap();
            }
            for _ in 0..batch {
                engine.insert(total.vector_bytes(insert_cursor)).unwrap();
                insert_cursor += 1;
            }
            let stats = engine.merge().unwrap();
            cumulative_rewritten += stats.graph_blocks_rewritten;
            stop.store(true, std::sync::atomic::Ordering::Relaxed);
        });
        assert_eq!(
            tombstoned_leak.load(std::sync::atomic::Ordering::Relaxed),
            0,
            "tombstoned ids surfaced in results during iteration {iteration}"
        );

        // quiesced recall vs the live-set oracle after every merge
        let (ids, flat) = engine.live_matrix().unwrap();
        let params = SearchParams { l_search: 100, ..Default::default() };
        let mut recall_sum = 0.0;
        for q in 0..queries.count() as u32 {
            let query = queries.vector_f32(q);
            let truth: Vec<u32> = engine
                .oracle_knn(&ids, &flat, &query, 10)
                .into_iter()
                .map(|(id, _)| id)
                .collect();
            let (found, _) = engine.search(&query, &params).unwrap();
            let got: Vec<u32> = found.iter().map(|c| c.0).collect();
            recall_sum += recall_at_k(&got, &truth, 10).unwrap();
        }
        let recall = recall_sum / queries.count() as f64;
        min_recall = min_recall.min(recall);
        assert!(recall >= 0.85, "iteration {iteration}: recall {recall:.4} below 0.85");
    }

    // (c) cumulative rewrite volume strictly below 10 full rewrites
    let full_bytes = engine.graph_file_bytes();
    let rewritten_bytes = cumulative_rewritten * 4096;
    assert!(
        rewritten_bytes < 10 * full_bytes,
        "cumulative rewrites {rewritten_bytes} not below 10 x {full_bytes}"
    );

    // (d) final size within 1.15x of a fresh rebuild over the live set
    let (ids, flat) = engine.live_matrix().unwrap();
    let mut live_data = Dataset::new(dim, ElementType::F32);
    for i in 0..ids.len() {
        let bytes: Vec<u8> = flat.vector(i as u32).iter().flat_map(|v| v.to_le_bytes()).collect();
        live_data.push_bytes(&bytes).unwrap();
    }
    drop(engine);
    let final_bytes = dir_bytes(dir.path());
    let rebuild_dir = tempfile::tempdir().unwrap();
    let rebuild_cfg = EngineConfig {
        build: BuildParams { max_degree: 32, build_list_size: 64, prune_alpha: 1.2, seed: 9 },
        pq_sample: 20_000,
        seed: 9,
        ..Default::default()
    };
    let rebuilt = Engine::build(rebuild_dir.path(), &live_data, &options, rebuild_cfg).unwrap();
    drop(rebuilt);
    let rebuild_bytes = dir_bytes(rebuild_dir.path());
    let size_ratio = final_bytes as f64 / rebuild_bytes as f64;
    assert!(size_ratio <= 1.15, "final size {final_bytes} = {size_ratio:.4} x fresh rebuild {rebuild_bytes}");
    println!(
        "ACCEPT c10 PASS: zero tombstoned results, min post-merge recall {min_recall:.4} (>=0.85), \
         rewrites {rewritten_bytes} < 10x{full_bytes}, final/rebuild size {size_ratio:.4} (<=1.15)"
    );
}

#[test]
fn c11_characterization_trends() {
    let structured = synthetic::dimension_structured_u8(100_000, 128, 10.0, 81);
    let s = characterize(&structured).unwrap();
    assert!(
        s.columnar_entropy < s.global_entropy,
        "structured: columnar {:.4} not below global {:.4}",
        s.columnar_entropy,
        s.global_entropy
    );
    assert!(
        s.dimensional_dispersion < s.global_dispersion,
        "structured: dimensional {:.4} not below global {:.4}",
        s.dimensional_dispersion,
        s.global_dispersion
    );

    let uniform = synthetic::uniform_random(100_000, 128, ElementType::U8, 82);
    let u = characterize(&uniform).unwrap();
    assert!(
        (u.columnar_entropy - u.global_entropy).abs() < 0.1,
        "uniform entropies diverge: {:.4} vs {:.4}",
        u.columnar_entropy,
        u.global_entropy
    );
    assert!(
        (u.dimensional_dispersion - u.global_dispersion).abs() < 0.1 * u.global_dispersion.max(1.0),
        "uniform dispersions diverge: {:.4} vs {:.4}",
        u.dimensional_dispersion,
        u.global_dispersion
    );
    println!(
        "ACCEPT c11 PASS: structured columnar {:.3} < global {:.3} bits, dispersion {:.2} < {:.2}; uniform pairs agree",
        s.columnar_entropy, s.global_entropy, s.dimensional_dispersion, s.global_dispersion
    );
}
