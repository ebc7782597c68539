//! The on-disk vector store: one append-only mutable segment plus sealed,
//! compressed segments, a tombstone log, and the id-to-location map that
//! tracks garbage-collection relocations.
//!
//! Directory layout: `store.json`, `segments/<id>.data`, `segments/<id>.meta`
//! (sealed only), `tombstones.log`, `idmap.0`, plus the graph and PQ files
//! owned by other modules. Relocated (GC output) segments use ids with the
//! high bit set so they never collide with the id-range-derived segment ids
//! of the append log.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::os::unix::fs::FileExt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::codec::huffman::{huffman_build, HuffmanTable};
use crate::error::{Error, Result};
use crate::layout::block::BLOCK_SIZE;
use crate::layout::segment::{
    data_header_matches, decode_meta, locate_key, seal_segment_bytes, SegmentManifest,
    SegmentState,
};
use crate::types::ElementType;

/// Largest supported full-precision vector: one item plus block framing must
/// fit a 4,096-byte block with room to spare for the offset table.
pub const MAX_VECTOR_BYTES: usize = 4050;

/// High bit marks relocated (GC output) segment ids.
pub const RELOC_SEGMENT_BIT: u32 = 1 << 31;

/// Persisted store parameters (`store.json`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StoreConfig {
    pub dim: usize,
    pub element_type: ElementType,
    /// Vectors per segment.
    pub segment_capacity: u32,
    /// Vectors per chunk (fixed; derived from the chunk byte budget).
    pub vectors_per_chunk: u32,
    /// Chunk-metadata overhead budget.
    pub beta: f64,
    /// Assumed compressed/uncompressed ratio used when sizing chunks.
    pub alpha: f64,
    /// Graph degree bound R.
    pub max_degree: u32,
    /// PQ subspace count M.
    pub pq_subspaces: u32,
    /// Transform-decision sample fraction.
    pub sample_fraction: f64,
    pub entry_point: Option<u32>,
}

impl StoreConfig {
    pub fn vector_width(&self) -> usize {
        self.dim * self.element_type.width()
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::usage("dim must be at least 1"));
        }
        if self.element_type == ElementType::I32 {
            return Err(Error::usage("stores hold u8/i8/f32 vectors, not i32"));
        }
        let v = self.vector_width();
        if v > MAX_VECTOR_BYTES {
            return Err(Error::usage(format!(
                "vector of {v} bytes exceeds the {MAX_VECTOR_BYTES}-byte block budget"
            )));
        }
        if self.segment_capacity == 0 || self.vectors_per_chunk == 0 {
            return Err(Error::usage("segment and chunk capacities must be positive"));
        }
        if !(self.sample_fraction > 0.0 && self.sample_fraction <= 1.0) {
            return Err(Error::usage("sample_fraction must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Read-side counters, split by path so tests can assert the traversal /
/// re-rank separation and the metadata-only startup contract.
#[derive(Debug, Default)]
pub struct IoStats {
    pub metadata_bytes_read: AtomicU64,
    pub vector_ios: AtomicU64,
    pub vector_bytes_read: AtomicU64,
    pub graph_ios: AtomicU64,
    pub graph_bytes_read: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IoSnapshot {
    pub metadata_bytes_read: u64,
    pub vector_ios: u64,
    pub vector_bytes_read: u64,
    pub graph_ios: u64,
    pub graph_bytes_read: u64,
}

impl IoStats {
    pub fn snapshot(&self) -> IoSnapshot {
        IoSnapshot {
            metadata_bytes_read: self.metadata_bytes_read.load(Ordering::Relaxed),
            vector_ios: self.vector_ios.load(Ordering::Relaxed),
            vector_bytes_read: self.vector_bytes_read.load(Ordering::Relaxed),
            graph_ios: self.graph_ios.load(Ordering::Relaxed),
            graph_bytes_read: self.graph_bytes_read.load(Ordering::Relaxed),
        }
    }
}

struct StoredSegment {
    manifest: RwLock<SegmentManifest>,
    file: File,
    huffman: Option<HuffmanTable>,
}

/// The vector side of the store. One writer at a time for appends, deletes,
/// sealing, and GC (callers serialize); reads are lock-light and concurrent.
pub struct VectorStore {
    dir: PathBuf,
    config: RwLock<StoreConfig>,
    segments: RwLock<BTreeMap<u32, Arc<StoredSegment>>>,
    /// Published id horizon: ids below this are durable and readable.
    next_id: AtomicU32,
    tombstones: RwLock<HashSet<u32>>,
    tombstone_log: Mutex<File>,
    /// id -> (segment, slot) for GC-relocated vectors.
    idmap: RwLock<HashMap<u32, (u32, u32)>>,
    /// slot -> id per relocated segment (derived from `idmap` at open).
    reloc_ids: RwLock<HashMap<u32, Vec<u32>>>,
    pub io: Arc<IoStats>,
}

impl VectorStore {
    pub fn create(dir: impl AsRef<Path>, config: StoreConfig) -> Result<VectorStore> {
        let dir = dir.as_ref().to_path_buf();
        config.validate()?;
        fs::create_dir_all(dir.join("segments")).map_err(|e| Error::io(&dir, e))?;
        write_json_atomic(&dir.join("store.json"), &config)?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(dir.join("tombstones.log"))
            .map_err(|e| Error::io(dir.join("tombstones.log"), e))?;
        let store = VectorStore {
            dir,
            config: RwLock::new(config),
            segments: RwLock::new(BTreeMap::new()),
            next_id: AtomicU32::new(0),
            tombstones: RwLock::new(HashSet::new()),
            tombstone_log: Mutex::new(log),
            idmap: RwLock::new(HashMap::new()),
            reloc_ids: RwLock::new(HashMap::new()),
            io: Arc::new(IoStats::default()),
        };
        store.ensure_mutable_segment(0)?;
        Ok(store)
    }

    /// Opens an existing store from its metadata files alone; data files are
    /// never scanned (sizes come from stat).
    pub fn open(dir: impl AsRef<Path>) -> Result<VectorStore> {
        let dir = dir.as_ref().to_path_buf();
        let io = Arc::new(IoStats::default());
        let config_path = dir.join("store.json");
        let config: StoreConfig = read_json(&config_path, &io)?;
        config.validate()?;
        let v = config.vector_width();
        let capacity = config.segment_capacity;

        // tombstone log replay
        let log_path = dir.join("tombstones.log");
        let mut tombstones = HashSet::new();
        if log_path.exists() {
            let bytes = read_metadata(&log_path, &io)?;
            if bytes.len() % 4 != 0 {
                return Err(Error::startup(&log_path, "truncated tombstone log"));
            }
            for c in bytes.chunks_exact(4) {
                tombstones.insert(u32::from_le_bytes(c.try_into().unwrap()));
            }
        }
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&log_path)
            .map_err(|e| Error::io(&log_path, e))?;

        // relocation map
        let idmap_path = dir.join("idmap.0");
        let idmap = if idmap_path.exists() {
            read_idmap(&read_metadata(&idmap_path, &io)?, &idmap_path)?
        } else {
            HashMap::new()
        };
        let mut reloc_ids: HashMap<u32, Vec<(u32, u32)>> = HashMap::new();
        for (&id, &(seg, slot)) in &idmap {
            reloc_ids.entry(seg).or_default().push((slot, id));
        }
        let reloc_ids: HashMap<u32, Vec<u32>> = reloc_ids
            .into_iter()
            .map(|(seg, mut pairs)| {
                pairs.sort_unstable();
                (seg, pairs.into_iter().map(|(_, id)| id).collect())
            })
            .collect();

        // segment discovery
        let seg_dir = dir.join("segments");
        let mut segments = BTreeMap::new();
        let mut max_original_end = 0u32;
        let entries = fs::read_dir(&seg_dir).map_err(|e| Error::io(&seg_dir, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&seg_dir, e))?;
            let path = entry.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            if name.ends_with(".tmp") {
                // leftover from an interrupted seal/merge; safe to discard
                let _ = fs::remove_file(&path);
                continue;
            }
            let Some(stem) = name.strip_suffix(".data") else { continue };
            let seg_id: u32 = stem
                .parse()
                .map_err(|_| Error::startup(&path, "unparseable segment file name"))?;
            let meta_path = seg_dir.join(format!("{seg_id}.meta"));
            if seg_id & RELOC_SEGMENT_BIT != 0 && !reloc_ids.contains_key(&seg_id) {
                // GC crashed after writing this segment but before publishing
                // the relocation map: the originals are still authoritative
                let _ = fs::remove_file(&path);
                let _ = fs::remove_file(&meta_path);
                continue;
            }
            let data_len = entry.metadata().map_err(|e| Error::io(&path, e))?.len();
            let segment = if meta_path.exists() {
                let manifest = decode_meta(&read_metadata(&meta_path, &io)?, capacity, v)?;
                if manifest.segment_id != seg_id {
                    return Err(Error::startup(&meta_path, "segment id mismatch in metadata"));
                }
                let sealed_len = (manifest.total_blocks as u64 + 1) * BLOCK_SIZE as u64;
                if data_len == sealed_len {
                    open_sealed(&path, manifest)?
                } else if data_len == manifest.count as u64 * v as u64 && !manifest.relocated {
                    // seal committed its metadata but not its data: restart it
                    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
                    io.vector_bytes_read.fetch_add(raw.len() as u64, Ordering::Relaxed);
                    let first_key = seg_id * capacity;
                    let sealed = seal_segment_bytes(
                        seg_id,
                        &raw,
                        v,
                        manifest.vectors_per_chunk,
                        capacity,
                        first_key,
                        false,
                        config.sample_fraction,
                    )?;
                    commit_seal(&seg_dir, seg_id, &sealed.data, &sealed.meta)?;
                    open_sealed(&path, sealed.manifest)?
                } else {
                    return Err(Error::startup(
                        &path,
                        format!("segment data length {data_len} matches neither sealed nor raw form"),
                    ));
                }
            } else {
                if seg_id & RELOC_SEGMENT_BIT != 0 {
                    return Err(Error::startup(&meta_path, "missing metadata for relocated segment"));
                }
                // a sealed data file without its metadata is unreadable:
                // probe the 20-byte sealed header before trusting raw form
                let mut probe = [0u8; 20];
                let probed = if data_len >= 20 {
                    let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
                    f.read_exact_at(&mut probe, 0).map_err(|e| Error::io(&path, e))?;
                    io.metadata_bytes_read.fetch_add(20, Ordering::Relaxed);
                    true
                } else {
                    false
                };
                if probed && data_header_matches(&probe, seg_id) {
                    return Err(Error::startup(&meta_path, "missing metadata file for sealed segment"));
                }
                if data_len % v as u64 != 0 {
                    return Err(Error::startup(&path, "mutable segment holds partial vectors"));
                }
                let mut manifest = SegmentManifest::new_mutable(seg_id, capacity);
                manifest.count = (data_len / v as u64) as u32;
                manifest.live_count = manifest.count;
                let file = OpenOptions::new()
                    .read(true)
                    .write(true)
                    .open(&path)
                    .map_err(|e| Error::io(&path, e))?;
                Arc::new(StoredSegment { manifest: RwLock::new(manifest), file, huffman: None })
            };
            {
                let m = segment.manifest.read();
                if !m.relocated {
                    max_original_end = max_original_end.max(seg_id * capacity + m.count);
                }
            }
            segments.insert(seg_id, segment);
        }

        let max_reloc_id = idmap.keys().copied().max().map(|id| id + 1).unwrap_or(0);
        let next_id = max_original_end.max(max_reloc_id);

        // apply tombstones to live/stale counts
        let store = VectorStore {
            dir,
            config: RwLock::new(config),
            segments: RwLock::new(segments),
            next_id: AtomicU32::new(next_id),
            tombstones: RwLock::new(tombstones),
            tombstone_log: Mutex::new(log),
            idmap: RwLock::new(idmap),
            reloc_ids: RwLock::new(reloc_ids),
            io,
        };
        {
            let tombs: Vec<u32> = store.tombstones.read().iter().copied().collect();
            for id in tombs {
                if let Some((seg_id, _)) = store.location_of(id) {
                    if let Some(seg) = store.segment(seg_id) {
                        let mut m = seg.manifest.write();
                        m.stale_count += 1;
                        m.live_count = m.count - m.stale_count;
                    }
                }
            }
        }
        store.ensure_mutable_segment(store.next_id.load(Ordering::Relaxed))?;
        Ok(store)
    }

    pub fn open_or_create(dir: impl AsRef<Path>, config: StoreConfig) -> Result<VectorStore> {
        if dir.as_ref().join("store.json").exists() {
            Self::open(dir)
        } else {
            Self::create(dir, config)
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn config(&self) -> StoreConfig {
        self.config.read().clone()
    }

    pub fn set_entry_point(&self, entry: Option<u32>) -> Result<()> {
        let mut cfg = self.config.write();
        cfg.entry_point = entry;
        write_json_atomic(&self.dir.join("store.json"), &*cfg)
    }

    pub fn vector_width(&self) -> usize {
        self.config.read().vector_width()
    }

    pub fn next_id(&self) -> u32 {
        self.next_id.load(Ordering::Acquire)
    }

    pub fn live_count(&self) -> u64 {
        let tombs = self.tombstones.read().len() as u64;
        self.next_id() as u64 - tombs - self.purged_count()
    }

    /// Ids that were removed entirely (tombstoned, then their segment GC'd).
    fn purged_count(&self) -> u64 {
        let segments = self.segments.read();
        let stored: u64 = segments
            .values()
            .map(|s| s.manifest.read().count as u64)
            .sum();
        self.next_id() as u64 - stored
    }

    fn segment(&self, seg_id: u32) -> Option<Arc<StoredSegment>> {
        self.segments.read().get(&seg_id).cloned()
    }

    fn segment_path(&self, seg_id: u32) -> PathBuf {
        self.dir.join("segments").join(format!("{seg_id}.data"))
    }

    fn meta_path(&self, seg_id: u32) -> PathBuf {
        self.dir.join("segments").join(format!("{seg_id}.meta"))
    }

    fn ensure_mutable_segment(&self, first_id: u32) -> Result<()> {
        let cfg = self.config.read();
        let seg_id = first_id / cfg.segment_capacity;
        drop(cfg);
        if self.segment(seg_id).is_some() {
            return Ok(());
        }
        let path = self.segment_path(seg_id);
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        let manifest = SegmentManifest::new_mutable(seg_id, self.config.read().segment_capacity);
        self.segments
            .write()
            .insert(seg_id, Arc::new(StoredSegment { manifest: RwLock::new(manifest), file, huffman: None }));
        Ok(())
    }

    /// Appends one vector to the mutable segment, sealing it and opening the
    /// next one when it fills. Callers serialize writes; the id is published
    /// only after the bytes are written.
    pub fn append_vector(&self, bytes: &[u8]) -> Result<(u32, u32)> {
        let cfg = self.config.read();
        let v = cfg.vector_width();
        let capacity = cfg.segment_capacity;
        drop(cfg);
        if bytes.len() != v {
            return Err(Error::usage(format!(
                "append of {} bytes; store vectors are {v} bytes",
                bytes.len()
            )));
        }
        let id = self.next_id.load(Ordering::Acquire);
        if id == u32::MAX {
            return Err(Error::usage("id space exhausted"));
        }
        let seg_id = id / capacity;
        if self.segment(seg_id).is_none() {
            // the previous segment just filled: seal it, then start the next
            if seg_id > 0 {
                let prev = seg_id - 1;
                let seal_needed = self
                    .segment(prev)
                    .map(|s| s.manifest.read().state == SegmentState::Mutable)
                    .unwrap_or(false);
                if seal_needed {
                    self.seal_segment(prev)?;
                }
            }
            self.ensure_mutable_segment(id)?;
        }
        let seg = self.segment(seg_id).expect("mutable segment exists");
        let slot = id - seg_id * capacity;
        seg.file
            .write_all_at(bytes, slot as u64 * v as u64)
            .map_err(|e| Error::io(self.segment_path(seg_id), e))?;
        {
            let mut m = seg.manifest.write();
            m.count += 1;
            m.live_count += 1;
        }
        self.next_id.store(id + 1, Ordering::Release);
        Ok((id, seg_id))
    }

    /// Seals a full mutable segment in place (metadata first, then the data
    /// file swap; an interrupted seal restarts at open).
    pub fn seal_segment(&self, seg_id: u32) -> Result<SegmentManifest> {
        let cfg = self.config.read().clone();
        let seg = self
            .segment(seg_id)
            .ok_or_else(|| Error::Lookup(format!("segment {seg_id} does not exist")))?;
        {
            let m = seg.manifest.read();
            if m.state != SegmentState::Mutable {
                return Err(Error::usage(format!("segment {seg_id} is already sealed")));
            }
            if m.count != m.capacity {
                return Err(Error::usage(format!(
                    "segment {seg_id} holds {} of {} vectors; only full segments seal",
                    m.count, m.capacity
                )));
            }
        }
        let path = self.segment_path(seg_id);
        let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let stale = seg.manifest.read().stale_count;
        let sealed = seal_segment_bytes(
            seg_id,
            &raw,
            cfg.vector_width(),
            cfg.vectors_per_chunk,
            cfg.segment_capacity,
            seg_id * cfg.segment_capacity,
            false,
            cfg.sample_fraction,
        )?;
        commit_seal(&self.dir.join("segments"), seg_id, &sealed.data, &sealed.meta)?;
        let mut manifest = sealed.manifest.clone();
        manifest.stale_count = stale;
        manifest.live_count = manifest.count - stale;
        let handle = open_sealed(&path, manifest.clone())?;
        self.segments.write().insert(seg_id, handle);
        Ok(manifest)
    }

    /// Seals the mutable tail if it happens to be exactly full (bulk-build
    /// convenience; partial tails stay mutable).
    pub fn seal_full_segments(&self) -> Result<()> {
        let full: Vec<u32> = self
            .segments
            .read()
            .values()
            .filter_map(|s| {
                let m = s.manifest.read();
                (m.state == SegmentState::Mutable && m.count == m.capacity)
                    .then_some(m.segment_id)
            })
            .collect();
        for seg_id in full {
            self.seal_segment(seg_id)?;
        }
        self.ensure_mutable_segment(self.next_id())?;
        Ok(())
    }

    /// Registers a GC output segment built from already-collected live
    /// vectors (ascending by id). The segment is sealed immediately, even
    /// when below capacity, so the store keeps exactly one mutable segment.
    pub fn add_relocated_segment(&self, raw: &[u8], ids: &[u32]) -> Result<u32> {
        let cfg = self.config.read().clone();
        let v = cfg.vector_width();
        debug_assert_eq!(raw.len() / v, ids.len());
        let seg_id = {
            let segments = self.segments.read();
            let max_reloc = segments
                .keys()
                .filter(|&&id| id & RELOC_SEGMENT_BIT != 0)
                .max()
                .copied()
                .unwrap_or(RELOC_SEGMENT_BIT);
            if segments.contains_key(&max_reloc) {
                max_reloc + 1
            } else {
                max_reloc
            }
        };
        let sealed = seal_segment_bytes(
            seg_id,
            raw,
            v,
            cfg.vectors_per_chunk,
            cfg.segment_capacity,
            0,
            true,
            cfg.sample_fraction,
        )?;
        commit_seal(&self.dir.join("segments"), seg_id, &sealed.data, &sealed.meta)?;
        let handle = open_sealed(&self.segment_path(seg_id), sealed.manifest)?;
        {
            let mut idmap = self.idmap.write();
            for (slot, &id) in ids.iter().enumerate() {
                idmap.insert(id, (seg_id, slot as u32));
            }
        }
        self.reloc_ids.write().insert(seg_id, ids.to_vec());
        self.segments.write().insert(seg_id, handle);
        Ok(seg_id)
    }

    /// Drops segments whose live vectors were already relocated, then clears
    /// the tombstones of ids that died with them. Ordering is crash-safe:
    /// the relocation map is persisted while the old files still exist, the
    /// files go away next, and only then does the tombstone log shrink (a
    /// dead id stays excluded at every intermediate point).
    pub fn remove_segments(&self, seg_ids: &[u32]) -> Result<u64> {
        let mut dead_ids = Vec::new();
        {
            let mut segments = self.segments.write();
            let mut reloc = self.reloc_ids.write();
            let mut idmap = self.idmap.write();
            let tombs = self.tombstones.read();
            for &seg_id in seg_ids {
                let Some(seg) = segments.get(&seg_id) else { continue };
                let m = seg.manifest.read();
                let ids = self.segment_ids_inner(&m, reloc.get(&seg_id));
                drop(m);
                for id in ids {
                    if tombs.contains(&id) {
                        dead_ids.push(id);
                    } else if idmap.get(&id).map(|&(s, _)| s) == Some(seg_id) {
                        // still mapped here means the caller forgot to relocate
                        return Err(Error::usage(format!(
                            "segment {seg_id} removed while id {id} still lives there"
                        )));
                    }
                }
                segments.remove(&seg_id);
                reloc.remove(&seg_id);
            }
            for id in &dead_ids {
                idmap.remove(id);
            }
        }
        self.persist_idmap()?;
        let mut removed_bytes = 0u64;
        for &seg_id in seg_ids {
            for path in [self.segment_path(seg_id), self.meta_path(seg_id)] {
                if let Ok(meta) = fs::metadata(&path) {
                    removed_bytes += meta.len();
                    fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
                }
            }
        }
        if !dead_ids.is_empty() {
            let mut tombs = self.tombstones.write();
            for id in &dead_ids {
                tombs.remove(id);
            }
        }
        self.rewrite_tombstone_log()?;
        Ok(removed_bytes)
    }

    /// All ids stored in a segment, ascending.
    pub fn segment_ids(&self, seg_id: u32) -> Vec<u32> {
        let Some(seg) = self.segment(seg_id) else { return Vec::new() };
        let m = seg.manifest.read();
        let reloc = self.reloc_ids.read();
        self.segment_ids_inner(&m, reloc.get(&seg_id))
    }

    fn segment_ids_inner(&self, m: &SegmentManifest, reloc: Option<&Vec<u32>>) -> Vec<u32> {
        if m.relocated {
            reloc.cloned().unwrap_or_default()
        } else {
            let base = m.segment_id * m.capacity;
            (base..base + m.count).collect()
        }
    }

    /// Resolves an id to `(segment, key)`, where `key` feeds
    /// [`locate_key`]: the id itself for log-order segments, the slot for
    /// relocated ones.
    pub fn location_of(&self, id: u32) -> Option<(u32, u32)> {
        if id >= self.next_id() {
            return None;
        }
        if let Some(&(seg, slot)) = self.idmap.read().get(&id) {
            return Some((seg, slot));
        }
        let capacity = self.config.read().segment_capacity;
        let seg_id = id / capacity;
        let seg = self.segment(seg_id)?;
        let m = seg.manifest.read();
        (id - seg_id * capacity < m.count).then_some((seg_id, id))
    }

    pub fn is_tombstoned(&self, id: u32) -> bool {
        self.tombstones.read().contains(&id)
    }

    pub fn tombstones_snapshot(&self) -> HashSet<u32> {
        self.tombstones.read().clone()
    }

    /// Marks an id stale: excluded from reads immediately, reclaimed by GC.
    pub fn tombstone(&self, id: u32) -> Result<()> {
        if self.is_tombstoned(id) {
            return Err(Error::NotFound(id));
        }
        let Some((seg_id, _)) = self.location_of(id) else {
            return Err(Error::NotFound(id));
        };
        {
            let mut log = self.tombstone_log.lock();
            use std::io::Write;
            log.write_all(&id.to_le_bytes())
                .map_err(|e| Error::io(self.dir.join("tombstones.log"), e))?;
        }
        self.tombstones.write().insert(id);
        if let Some(seg) = self.segment(seg_id) {
            let mut m = seg.manifest.write();
            m.stale_count += 1;
            m.live_count = m.count - m.stale_count;
        }
        Ok(())
    }

    fn rewrite_tombstone_log(&self) -> Result<()> {
        let path = self.dir.join("tombstones.log");
        let tmp = self.dir.join("tombstones.log.tmp");
        let mut out = Vec::new();
        for id in self.tombstones.read().iter() {
            out.extend_from_slice(&id.to_le_bytes());
        }
        fs::write(&tmp, &out).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        let log = OpenOptions::new()
            .create(true)
            .append(true)
            .read(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        *self.tombstone_log.lock() = log;
        Ok(())
    }

    fn persist_idmap(&self) -> Result<()> {
        let path = self.dir.join("idmap.0");
        let tmp = self.dir.join("idmap.0.tmp");
        let idmap = self.idmap.read();
        let mut out = Vec::with_capacity(8 + idmap.len() * 12);
        out.extend_from_slice(&IDMAP_MAGIC.to_le_bytes());
        out.extend_from_slice(&(idmap.len() as u32).to_le_bytes());
        let mut entries: Vec<_> = idmap.iter().collect();
        entries.sort_unstable_by_key(|(id, _)| **id);
        for (id, (seg, slot)) in entries {
            out.extend_from_slice(&id.to_le_bytes());
            out.extend_from_slice(&seg.to_le_bytes());
            out.extend_from_slice(&slot.to_le_bytes());
        }
        drop(idmap);
        fs::write(&tmp, &out).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    /// Reads back the exact bytes of a live vector: direct offset read for
    /// the mutable segment, a single-block read and decode for sealed ones.
    pub fn read_vector(&self, id: u32) -> Result<Vec<u8>> {
        if self.is_tombstoned(id) {
            return Err(Error::NotFound(id));
        }
        let (seg_id, key) = self.location_of(id).ok_or(Error::NotFound(id))?;
        let seg = self
            .segment(seg_id)
            .ok_or_else(|| Error::Lookup(format!("segment {seg_id} missing for id {id}")))?;
        let cfg = self.config.read();
        let v = cfg.vector_width();
        drop(cfg);
        let m = seg.manifest.read();
        match m.state {
            SegmentState::Mutable => {
                let slot = key - m.segment_id * m.capacity;
                let mut buf = vec![0u8; v];
                seg.file
                    .read_exact_at(&mut buf, slot as u64 * v as u64)
                    .map_err(|e| Error::io(self.segment_path(seg_id), e))?;
                self.io.vector_ios.fetch_add(1, Ordering::Relaxed);
                self.io.vector_bytes_read.fetch_add(v as u64, Ordering::Relaxed);
                Ok(buf)
            }
            SegmentState::Sealed => {
                let (ci, bi, slot) = locate_key(&m, key)?;
                let chunk = &m.chunks[ci];
                let abs_block = chunk.first_block_offset as u64 + bi as u64;
                let mut buf = vec![0u8; BLOCK_SIZE];
                seg.file
                    .read_exact_at(&mut buf, abs_block * BLOCK_SIZE as u64)
                    .map_err(|e| Error::io(self.segment_path(seg_id), e))?;
                self.io.vector_ios.fetch_add(1, Ordering::Relaxed);
                self.io.vector_bytes_read.fetch_add(BLOCK_SIZE as u64, Ordering::Relaxed);
                let huffman = seg.huffman.as_ref().expect("sealed segment has a huffman table");
                crate::layout::segment::decode_vector_from_block(
                    &buf, abs_block, slot, chunk, huffman, v,
                )
            }
        }
    }

    /// Sequentially visits every live vector (ascending segment order, slot
    /// order within a segment), decoding sealed blocks once each.
    pub fn for_each_live(&self, mut f: impl FnMut(u32, &[u8]) -> Result<()>) -> Result<()> {
        let seg_ids: Vec<u32> = self.segments.read().keys().copied().collect();
        let cfg = self.config.read().clone();
        let v = cfg.vector_width();
        for seg_id in seg_ids {
            let Some(seg) = self.segment(seg_id) else { continue };
            let m = seg.manifest.read().clone();
            let ids = self.segment_ids(seg_id);
            match m.state {
                SegmentState::Mutable => {
                    let mut buf = vec![0u8; v];
                    for (slot, &id) in ids.iter().enumerate() {
                        if self.is_tombstoned(id) {
                            continue;
                        }
                        seg.file
                            .read_exact_at(&mut buf, slot as u64 * v as u64)
                            .map_err(|e| Error::io(self.segment_path(seg_id), e))?;
                        self.io.vector_ios.fetch_add(1, Ordering::Relaxed);
                        self.io.vector_bytes_read.fetch_add(v as u64, Ordering::Relaxed);
                        f(id, &buf)?;
                    }
                }
                SegmentState::Sealed => {
                    let huffman = seg.huffman.as_ref().unwrap();
                    let mut block = vec![0u8; BLOCK_SIZE];
                    let mut idx = 0usize;
                    for chunk in &m.chunks {
                        for bi in 0..chunk.num_blocks as usize {
                            let abs = chunk.first_block_offset as u64 + bi as u64;
                            seg.file
                                .read_exact_at(&mut block, abs * BLOCK_SIZE as u64)
                                .map_err(|e| Error::io(self.segment_path(seg_id), e))?;
                            self.io.vector_ios.fetch_add(1, Ordering::Relaxed);
                            self.io
                                .vector_bytes_read
                                .fetch_add(BLOCK_SIZE as u64, Ordering::Relaxed);
                            let view = crate::layout::block::BlockView::new(&block, abs)?;
                            for s in 0..view.count() {
                                let id = ids[idx];
                                idx += 1;
                                if self.is_tombstoned(id) {
                                    continue;
                                }
                                let bytes = crate::layout::segment::decode_vector_from_block(
                                    &block, abs, s, chunk, huffman, v,
                                )?;
                                f(id, &bytes)?;
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn live_ids(&self) -> Vec<u32> {
        let mut ids = Vec::new();
        let seg_ids: Vec<u32> = self.segments.read().keys().copied().collect();
        for seg_id in seg_ids {
            for id in self.segment_ids(seg_id) {
                if !self.is_tombstoned(id) {
                    ids.push(id);
                }
            }
        }
        ids.sort_unstable();
        ids
    }

    /// Clones of every segment manifest, for stats and GC planning.
    pub fn manifests(&self) -> Vec<SegmentManifest> {
        self.segments
            .read()
            .values()
            .map(|s| s.manifest.read().clone())
            .collect()
    }

    /// Raw bytes of each metadata file the store reads at startup; data
    /// files excluded. Used by the startup I/O accounting contract.
    pub fn metadata_file_bytes(&self) -> u64 {
        let mut total = 0u64;
        for name in ["store.json", "tombstones.log", "idmap.0"] {
            if let Ok(m) = fs::metadata(self.dir.join(name)) {
                total += m.len();
            }
        }
        if let Ok(entries) = fs::read_dir(self.dir.join("segments")) {
            for e in entries.flatten() {
                if e.path().extension().and_then(|x| x.to_str()) == Some("meta") {
                    if let Ok(m) = e.metadata() {
                        total += m.len();
                    }
                }
            }
        }
        total
    }
}

const IDMAP_MAGIC: u32 = 0x3050_414d; // "MAP0"

fn read_idmap(bytes: &[u8], path: &Path) -> Result<HashMap<u32, (u32, u32)>> {
    if bytes.len() < 8 || u32::from_le_bytes(bytes[..4].try_into().unwrap()) != IDMAP_MAGIC {
        return Err(Error::startup(path, "bad id-location map header"));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    if bytes.len() != 8 + count * 12 {
        return Err(Error::startup(path, "id-location map length mismatch"));
    }
    let mut map = HashMap::with_capacity(count);
    for c in bytes[8..].chunks_exact(12) {
        let id = u32::from_le_bytes(c[0..4].try_into().unwrap());
        let seg = u32::from_le_bytes(c[4..8].try_into().unwrap());
        let slot = u32::from_le_bytes(c[8..12].try_into().unwrap());
        map.insert(id, (seg, slot));
    }
    Ok(map)
}

fn open_sealed(path: &Path, manifest: SegmentManifest) -> Result<Arc<StoredSegment>> {
    let huffman = huffman_build(manifest.frequency_table.as_ref().expect("sealed manifest"))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(Arc::new(StoredSegment { manifest: RwLock::new(manifest), file, huffman: Some(huffman) }))
}

/// Writes both sealed files and swaps them in: metadata first, data last, so
/// a crash in between leaves a raw data file that open() re-seals.
fn commit_seal(seg_dir: &Path, seg_id: u32, data: &[u8], meta: &[u8]) -> Result<()> {
    let data_tmp = seg_dir.join(format!("{seg_id}.data.tmp"));
    let meta_tmp = seg_dir.join(format!("{seg_id}.meta.tmp"));
    let data_path = seg_dir.join(format!("{seg_id}.data"));
    let meta_path = seg_dir.join(format!("{seg_id}.meta"));
    write_durable(&data_tmp, data)?;
    write_durable(&meta_tmp, meta)?;
    fs::rename(&meta_tmp, &meta_path).map_err(|e| Error::io(&meta_path, e))?;
    fs::rename(&data_tmp, &data_path).map_err(|e| Error::io(&data_path, e))?;
    if let Ok(d) = File::open(seg_dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

pub(crate) fn write_durable(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    use std::io::Write;
    f.write_all(bytes).map_err(|e| Error::io(path, e))?;
    f.sync_all().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let body = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::usage(format!("serialize {}: {e}", path.display())))?;
    write_durable(&tmp, &body)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_metadata(path: &Path, io: &IoStats) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    io.metadata_bytes_read.fetch_add(bytes.len() as u64, Ordering::Relaxed);
    Ok(bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, io: &IoStats) -> Result<T> {
    if !path.exists() {
        return Err(Error::startup(path, "missing metadata file"));
    }
    let bytes = read_metadata(path, io)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::startup(path, format!("unparseable metadata: {e}")))
}

/// stale / stored fraction for one segment; empty segments count as 0.
pub fn garbage_ratio(manifest: &SegmentManifest) -> f64 {
    if manifest.count == 0 {
        0.0
    } else {
        manifest.stale_count as f64 / manifest.count as f64
    }
}
