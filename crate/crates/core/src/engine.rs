//! The engine: one handle over the vector store, the compressed graph, PQ
//! artifacts, and the insert overlay.
//!
//! Concurrency: queries snapshot an immutable view (graph generation, PQ
//! codes, overlay handle) under a brief read lock; insert/delete/merge/GC
//! serialize on one update lock; merges build a whole new generation offline
//! and swap it in atomically, so a query observes either the pre-merge or
//! post-merge index, never a mix.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use rayon::prelude::*;

use crate::dataset;
use crate::error::{Error, Result};
use crate::index::pq::{pq_encode, train_pq_matrix, PQCodebook};
use crate::index::vamana::{build_graph, medoid, BuildParams, FlatVectors};
use crate::layout::graph_file::{write_graph_index, GraphStore};
use crate::layout::store::{StoreConfig, VectorStore};
use crate::layout::{chunk_capacity_for_budget, BLOCK_SIZE};
use crate::search::beam::{beam_search, GraphState, SearchContext};
use crate::search::{NeighborCache, QueryStats, SearchParams};
use crate::types::{Dataset, ElementType};
use crate::update::merge::{commit_merge, stage_merge, MergeInput, StagedMerge};
use crate::update::{run_gc, MemIndex, MergeStats};

/// Sizing knobs resolved into a [`StoreConfig`] at build time.
#[derive(Debug, Clone)]
pub struct StoreOptions {
    pub segment_bytes: usize,
    /// Uncompressed chunk byte budget; overridden by `beta` when set.
    pub chunk_bytes: usize,
    /// Chunk-metadata overhead budget; sizes the chunk via the closed form.
    pub beta: Option<f64>,
    pub alpha: f64,
    pub max_degree: u32,
    pub pq_subspaces: Option<u32>,
    pub sample_fraction: f64,
}

impl Default for StoreOptions {
    fn default() -> Self {
        StoreOptions {
            segment_bytes: 512 << 20,
            chunk_bytes: 4 << 20,
            beta: None,
            alpha: 1.0,
            max_degree: 96,
            pq_subspaces: None,
            sample_fraction: 0.10,
        }
    }
}

impl StoreOptions {
    pub fn resolve(&self, dim: usize, element_type: ElementType) -> Result<StoreConfig> {
        let v = dim * element_type.width();
        if v == 0 {
            return Err(Error::usage("zero-width vectors"));
        }
        let chunk_bytes = match self.beta {
            Some(beta) => chunk_capacity_for_budget(beta, self.alpha, v)?,
            None => self.chunk_bytes,
        };
        let beta = self
            .beta
            .unwrap_or((v as f64 + 12.0) / chunk_bytes.max(v) as f64 + self.alpha / 1024.0);
        let pq_subspaces = match self.pq_subspaces {
            Some(m) => m,
            None => default_pq_subspaces(dim)?,
        };
        let config = StoreConfig {
            dim,
            element_type,
            segment_capacity: (self.segment_bytes / v).max(1) as u32,
            vectors_per_chunk: (chunk_bytes / v).max(1) as u32,
            beta,
            alpha: self.alpha,
            max_degree: self.max_degree,
            pq_subspaces,
            sample_fraction: self.sample_fraction,
            entry_point: None,
        };
        config.validate()?;
        Ok(config)
    }
}

/// Default M: dim/4 capped at 64, falling back to the largest divisor of
/// `dim` below the cap.
pub fn default_pq_subspaces(dim: usize) -> Result<u32> {
    let cap = (dim / 4).clamp(1, 64);
    for m in (1..=cap).rev() {
        if dim % m == 0 {
            return Ok(m as u32);
        }
    }
    Err(Error::usage(format!("no valid PQ subspace count for dim {dim}")))
}

/// Runtime knobs (the persisted ones live in [`StoreConfig`]).
#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub search: SearchParams,
    pub build: BuildParams,
    /// Neighbor-cache entries; defaults to 1% of the graph universe.
    pub cache_entries: Option<usize>,
    pub gc_threshold: f64,
    /// Buffered-insert merge threshold; defaults to 5% of the on-disk count.
    pub mem_threshold: Option<usize>,
    pub mem_threshold_frac: f64,
    pub pq_sample: usize,
    pub seed: u64,
    /// Run GC automatically at the end of every merge.
    pub auto_gc: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            search: SearchParams::default(),
            build: BuildParams::default(),
            cache_entries: None,
            gc_threshold: 0.3,
            mem_threshold: None,
            mem_threshold_frac: 0.05,
            pq_sample: 20_000,
            seed: 0,
            auto_gc: true,
        }
    }
}

/// Flat PQ codes for the current graph generation.
pub struct DiskCodes {
    pub m: usize,
    pub codes: Vec<u8>,
}

#[derive(Clone)]
struct EngineView {
    graph: Arc<GraphState>,
    mem: Arc<RwLock<MemIndex>>,
    codes: Arc<DiskCodes>,
}

pub struct Engine {
    store: VectorStore,
    codebook: Arc<PQCodebook>,
    view: RwLock<EngineView>,
    update_lock: Mutex<()>,
    pub config: EngineConfig,
}

impl Engine {
    /// Bulk-builds a complete store in an empty or absent directory:
    /// appends and seals the vector segments, trains PQ, builds the graph,
    /// and writes every artifact.
    pub fn build(
        dir: impl AsRef<Path>,
        data: &Dataset,
        options: &StoreOptions,
        config: EngineConfig,
    ) -> Result<Engine> {
        let dir = dir.as_ref();
        if dir.exists() && fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some() {
            return Err(Error::usage(format!(
                "refusing to build into nonempty directory {}",
                dir.display()
            )));
        }
        let store_cfg = options.resolve(data.dim(), data.element_type())?;
        let store = VectorStore::create(dir, store_cfg.clone())?;
        for v in data.iter_bytes() {
            store.append_vector(v)?;
        }
        store.seal_full_segments()?;

        let n = data.count();
        let m = store_cfg.pq_subspaces as usize;
        let vectors = FlatVectors::from_dataset(data);
        let sample_n = config.pq_sample.clamp(256, n.max(1));
        if n >= 256 {
            let sample = &vectors.data[..sample_n * data.dim()];
            let codebook = train_pq_matrix(sample, data.dim(), m, config.seed)?;
            codebook.save(dir.join("pq.codebook"))?;
            let codes: Vec<u8> = (0..n as u32)
                .into_par_iter()
                .map(|i| pq_encode(vectors.vector(i), &codebook).expect("dim checked"))
                .flatten()
                .collect();
            fs::write(dir.join("pq.codes"), &codes).map_err(|e| Error::io(dir.join("pq.codes"), e))?;
        } else {
            return Err(Error::usage(format!(
                "bulk build needs at least 256 vectors for PQ training, got {n}"
            )));
        }

        let graph = if n >= 2 {
            build_graph(
                &vectors,
                &BuildParams {
                    max_degree: store_cfg.max_degree as usize,
                    build_list_size: config.build.build_list_size,
                    prune_alpha: config.build.prune_alpha,
                    seed: config.seed,
                },
            )?
        } else {
            crate::index::vamana::GraphIndex {
                adjacency: (0..n).map(|_| Vec::new()).collect(),
                entry_point: 0,
            }
        };
        write_graph_index(dir, &graph.adjacency, n as u32)?;
        store.set_entry_point((n > 0).then_some(graph.entry_point))?;
        drop(store);
        Engine::open(dir, config)
    }

    /// Opens a store from its metadata alone and rebuilds the insert overlay
    /// for ids appended after the last merge.
    pub fn open(dir: impl AsRef<Path>, config: EngineConfig) -> Result<Engine> {
        let dir = dir.as_ref();
        for tmp in ["graph.data.tmp", "graph.sparse.tmp", "pq.codes.tmp"] {
            let _ = fs::remove_file(dir.join(tmp));
        }
        let store = VectorStore::open(dir)?;
        let store_cfg = store.config();
        let graph_store = GraphStore::open(dir, store.io.clone())?;
        let universe = graph_store.universe();
        let codebook = Arc::new(PQCodebook::load(
            dir.join("pq.codebook"),
            store_cfg.dim,
            &store.io,
        )?);
        let m = codebook.m;
        let codes_path = dir.join("pq.codes");
        let codes = fs::read(&codes_path).map_err(|e| Error::io(&codes_path, e))?;
        store
            .io
            .metadata_bytes_read
            .fetch_add(codes.len() as u64, std::sync::atomic::Ordering::Relaxed);
        if codes.len() != universe as usize * m {
            return Err(Error::startup(
                &codes_path,
                format!("code array holds {} bytes for universe {universe}", codes.len()),
            ));
        }

        let cache_entries = config
            .cache_entries
            .unwrap_or_else(|| ((universe as usize) / 100).max(1));
        let graph = GraphState {
            store: graph_store,
            cache: NeighborCache::new(cache_entries, store_cfg.max_degree, universe),
            entry_point: store_cfg.entry_point,
        };

        let engine = Engine {
            store,
            codebook,
            view: RwLock::new(EngineView {
                graph: Arc::new(graph),
                mem: Arc::new(RwLock::new(MemIndex::new())),
                codes: Arc::new(DiskCodes { m, codes }),
            }),
            update_lock: Mutex::new(()),
            config,
        };
        engine.rebuild_overlay(universe)?;
        Ok(engine)
    }

    pub fn open_or_build(
        dir: impl AsRef<Path>,
        data: &Dataset,
        options: &StoreOptions,
        config: EngineConfig,
    ) -> Result<Engine> {
        if dir.as_ref().join("store.json").exists() {
            Engine::open(dir, config)
        } else {
            Engine::build(dir, data, options, config)
        }
    }

    /// Re-inserts un-merged appended ids into a fresh overlay (their bytes
    /// are already durable in the segments; only the overlay graph is
    /// volatile across restarts).
    fn rebuild_overlay(&self, universe: u32) -> Result<()> {
        let next = self.store.next_id();
        if next <= universe {
            return Ok(());
        }
        let view = self.view.read().clone();
        let mut mem = view.mem.write();
        let params = self.overlay_params();
        for id in universe..next {
            if self.store.is_tombstoned(id) {
                continue;
            }
            let Ok(bytes) = self.store.read_vector(id) else { continue };
            let v = self.decode(&bytes);
            let code = pq_encode(&v, &self.codebook)?;
            mem.insert(id, v, code, params.0, params.1, params.2);
        }
        Ok(())
    }

    fn overlay_params(&self) -> (usize, usize, f32) {
        let cfg = self.store.config();
        (
            cfg.max_degree as usize,
            self.config.build.build_list_size,
            self.config.build.prune_alpha,
        )
    }

    pub fn store(&self) -> &VectorStore {
        &self.store
    }

    pub fn codebook(&self) -> &PQCodebook {
        &self.codebook
    }

    pub fn dir(&self) -> PathBuf {
        self.store.dir().to_path_buf()
    }

    pub fn graph_universe(&self) -> u32 {
        self.view.read().graph.store.universe()
    }

    pub fn graph_file_bytes(&self) -> u64 {
        self.view.read().graph.store.file_bytes()
    }

    /// (hits, misses) of the current graph generation's neighbor cache.
    pub fn cache_counters(&self) -> (u64, u64) {
        let view = self.view.read();
        (view.graph.cache.hit_count(), view.graph.cache.miss_count())
    }

    pub fn mem_len(&self) -> usize {
        self.view.read().mem.read().len()
    }

    fn decode(&self, bytes: &[u8]) -> Vec<f32> {
        let cfg = self.store.config();
        let mut out = Vec::with_capacity(cfg.dim);
        cfg.element_type.decode_f32(bytes, &mut out);
        out
    }

    /// Exact bytes of a live vector.
    pub fn read_vector(&self, id: u32) -> Result<Vec<u8>> {
        self.store.read_vector(id)
    }

    pub fn read_vector_f32(&self, id: u32) -> Result<Vec<f32>> {
        Ok(self.decode(&self.store.read_vector(id)?))
    }

    /// Top-K query; `query` must be decoded f32 of the store's dimension.
    pub fn search(&self, query: &[f32], params: &SearchParams) -> Result<(Vec<(u32, f32)>, QueryStats)> {
        let cfg = self.store.config();
        if query.len() != cfg.dim {
            return Err(Error::usage(format!(
                "query dim {} does not match store dim {}",
                query.len(),
                cfg.dim
            )));
        }
        let view = self.view.read().clone();
        let is_deleted = |id: u32| self.store.is_tombstoned(id);
        let read_vector = |id: u32| self.read_vector_f32(id);
        let ctx = SearchContext {
            graph: &view.graph,
            mem: Some(&view.mem),
            codebook: &self.codebook,
            disk_codes: &view.codes.codes,
            is_deleted: &is_deleted,
            read_vector: &read_vector,
        };
        beam_search(&ctx, query, params)
    }

    /// Appends a vector, PQ-encodes it, and makes it searchable through the
    /// overlay; triggers a merge when the overlay reaches its threshold.
    pub fn insert(&self, bytes: &[u8]) -> Result<u32> {
        let _g = self.update_lock.lock();
        if self.mem_len() >= self.mem_threshold() {
            self.merge_locked()?;
        }
        let (id, _seg) = self.store.append_vector(bytes)?;
        let v = self.decode(bytes);
        let code = pq_encode(&v, &self.codebook)?;
        let params = self.overlay_params();
        {
            let view = self.view.read().clone();
            let mut mem = view.mem.write();
            mem.insert(id, v, code, params.0, params.1, params.2);
        }
        if self.mem_len() >= self.mem_threshold() {
            self.merge_locked()?;
        }
        Ok(id)
    }

    pub fn mem_threshold(&self) -> usize {
        self.config.mem_threshold.unwrap_or_else(|| {
            ((self.graph_universe() as f64 * self.config.mem_threshold_frac) as usize).max(64)
        })
    }

    /// Tombstones a live id: excluded from results immediately, merged out
    /// of the graph at the next merge, reclaimed by GC.
    pub fn delete(&self, id: u32) -> Result<()> {
        let _g = self.update_lock.lock();
        self.store.tombstone(id)
    }

    /// Folds buffered inserts and tombstones into the on-disk graph, then
    /// runs the GC check.
    pub fn merge(&self) -> Result<MergeStats> {
        let _g = self.update_lock.lock();
        self.merge_locked()
    }

    fn merge_locked(&self) -> Result<MergeStats> {
        let staged = self.stage_merge_locked()?;
        let mut stats = self.commit_merge_locked(staged)?;
        if self.config.auto_gc {
            let gc = run_gc(&self.store, self.config.gc_threshold)?;
            stats.gc_bytes_reclaimed = gc.reclaimed_bytes;
            stats.vector_bytes_written += gc.copied_bytes;
        }
        Ok(stats)
    }

    /// Stages a merge without committing (testing hook for crash safety;
    /// normal callers use [`merge`](Self::merge)).
    pub fn stage_merge_locked(&self) -> Result<StagedMerge> {
        let view = self.view.read().clone();
        let cfg = self.store.config();
        let buffered: Vec<(u32, Vec<f32>, Vec<u8>)> = {
            let mem = view.mem.read();
            mem.buffered_ids_sorted()
                .into_iter()
                .filter(|id| !self.store.is_tombstoned(*id))
                .map(|id| {
                    (
                        id,
                        mem.vector(id).expect("buffered vector").clone(),
                        mem.code(id).expect("buffered code").clone(),
                    )
                })
                .collect()
        };
        stage_merge(MergeInput {
            store: &self.store,
            graph: &view.graph.store,
            entry_point: view.graph.entry_point,
            codebook: &self.codebook,
            disk_codes: &view.codes.codes,
            buffered,
            max_degree: cfg.max_degree as usize,
            build_list_size: self.config.build.build_list_size,
            prune_alpha: self.config.build.prune_alpha,
        })
    }

    /// Swaps a staged merge in: renames the staged files, reopens the graph
    /// generation, and replaces the whole view atomically.
    pub fn commit_merge_locked(&self, staged: StagedMerge) -> Result<MergeStats> {
        let dir = self.dir();
        commit_merge(&dir, &staged, &self.store)?;
        let graph_store = GraphStore::open(&dir, self.store.io.clone())?;
        let universe = graph_store.universe();
        let cfg = self.store.config();
        let cache_entries = self
            .config
            .cache_entries
            .unwrap_or_else(|| ((universe as usize) / 100).max(1));
        let codes = fs::read(dir.join("pq.codes")).map_err(|e| Error::io(dir.join("pq.codes"), e))?;
        let new_view = EngineView {
            graph: Arc::new(GraphState {
                store: graph_store,
                cache: NeighborCache::new(cache_entries, cfg.max_degree, universe),
                entry_point: staged.new_entry,
            }),
            mem: Arc::new(RwLock::new(MemIndex::new())),
            codes: Arc::new(DiskCodes { m: self.codebook.m, codes }),
        };
        *self.view.write() = new_view;
        Ok(staged.stats)
    }

    /// Explicit GC pass (merges also trigger one when `auto_gc` is set).
    pub fn run_gc(&self) -> Result<crate::update::GcOutcome> {
        let _g = self.update_lock.lock();
        run_gc(&self.store, self.config.gc_threshold)
    }

    /// Live ids and their decoded vectors, for oracle computations.
    pub fn live_matrix(&self) -> Result<(Vec<u32>, FlatVectors)> {
        let dim = self.store.config().dim;
        let mut ids = Vec::new();
        let mut flat = FlatVectors { dim, data: Vec::new() };
        let et = self.store.config().element_type;
        self.store.for_each_live(|id, bytes| {
            ids.push(id);
            et.decode_f32(bytes, &mut flat.data);
            Ok(())
        })?;
        Ok((ids, flat))
    }

    /// Exact top-k over the live set by linear scan.
    pub fn oracle_knn(&self, ids: &[u32], flat: &FlatVectors, query: &[f32], k: usize) -> Vec<(u32, f32)> {
        let mut all: Vec<(u32, f32)> = ids
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, crate::distance::l2_sq(flat.vector(i as u32), query)))
            .collect();
        all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        all.truncate(k);
        all
    }

    /// Bytes of every file the engine reads at startup (metadata contract).
    pub fn metadata_file_bytes(&self) -> u64 {
        let mut total = self.store.metadata_file_bytes();
        for name in ["graph.sparse", "pq.codebook", "pq.codes"] {
            if let Ok(m) = fs::metadata(self.dir().join(name)) {
                total += m.len();
            }
        }
        total
    }

    /// Recomputes the standing medoid over the full-precision live set (used
    /// by tests; merges use the PQ-reconstruction medoid).
    pub fn exact_medoid(&self) -> Result<Option<u32>> {
        let (ids, flat) = self.live_matrix()?;
        if ids.is_empty() {
            return Ok(None);
        }
        Ok(Some(ids[medoid(&flat) as usize]))
    }
}

/// Analytic size of the co-located baseline layout: fixed-size page-aligned
/// entries of `V + 4 (R + 1)` bytes, packed whole into 4,096-byte pages.
pub fn colocated_baseline_bytes(n: u64, vector_bytes: u64, max_degree: u64) -> u64 {
    let entry = vector_bytes + 4 * (max_degree + 1);
    if n == 0 {
        return 0;
    }
    if entry <= BLOCK_SIZE as u64 {
        let per_page = BLOCK_SIZE as u64 / entry;
        n.div_ceil(per_page) * BLOCK_SIZE as u64
    } else {
        n * entry.div_ceil(BLOCK_SIZE as u64) * BLOCK_SIZE as u64
    }
}

/// Convenience loader matching the CLI surface: picks the format from the
/// extension unless overridden.
pub fn load_dataset_auto(path: &Path, format: Option<dataset::FileFormat>) -> Result<Dataset> {
    let fmt = match format {
        Some(f) => f,
        None => dataset::FileFormat::from_path(path)?,
    };
    dataset::load_dataset(path, fmt)
}
