//! Segment garbage collection: relocates the live vectors of high-garbage
//! sealed segments into fresh compressed segments and frees the old files.

use serde::Serialize;

use crate::error::Result;
use crate::layout::store::{garbage_ratio, VectorStore};
use crate::layout::SegmentState;

#[derive(Debug, Clone, Default, Serialize)]
pub struct GcOutcome {
    /// Net bytes freed: removed data+meta files minus the new segments.
    pub reclaimed_bytes: u64,
    /// Raw vector bytes copied into fresh segments.
    pub copied_bytes: u64,
    pub segments_removed: usize,
    pub segments_created: usize,
}

/// Collects every sealed segment whose garbage ratio reaches the threshold
/// (highest ratio first), copies the survivors into fresh sealed segments in
/// ascending id order, and drops the originals. Readers keep resolving ids
/// throughout via the relocation map.
pub fn run_gc(store: &VectorStore, ratio_threshold: f64) -> Result<GcOutcome> {
    let mut candidates: Vec<(f64, u32)> = store
        .manifests()
        .into_iter()
        .filter(|m| m.state == SegmentState::Sealed)
        .map(|m| (garbage_ratio(&m), m.segment_id))
        .filter(|&(ratio, _)| ratio >= ratio_threshold && ratio > 0.0)
        .collect();
    candidates.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    if candidates.is_empty() {
        return Ok(GcOutcome::default());
    }

    let v = store.vector_width();
    let capacity = store.config().segment_capacity as usize;
    let mut live: Vec<(u32, Vec<u8>)> = Vec::new();
    for &(_, seg_id) in &candidates {
        for id in store.segment_ids(seg_id) {
            if !store.is_tombstoned(id) {
                live.push((id, store.read_vector(id)?));
            }
        }
    }
    live.sort_unstable_by_key(|&(id, _)| id);

    let mut outcome = GcOutcome::default();
    let mut created = Vec::new();
    for group in live.chunks(capacity) {
        let mut raw = Vec::with_capacity(group.len() * v);
        let mut ids = Vec::with_capacity(group.len());
        for (id, bytes) in group {
            raw.extend_from_slice(bytes);
            ids.push(*id);
        }
        created.push(store.add_relocated_segment(&raw, &ids)?);
        outcome.copied_bytes += raw.len() as u64;
    }
    outcome.segments_created = created.len();

    let selected: Vec<u32> = candidates.iter().map(|&(_, id)| id).collect();
    let removed_bytes = store.remove_segments(&selected)?;
    outcome.segments_removed = selected.len();

    let mut added_bytes = 0u64;
    for seg in created {
        for suffix in ["data", "meta"] {
            let path = store.dir().join("segments").join(format!("{seg}.{suffix}"));
            if let Ok(m) = std::fs::metadata(path) {
                added_bytes += m.len();
            }
        }
    }
    outcome.reclaimed_bytes = removed_bytes.saturating_sub(added_bytes);
    Ok(outcome)
}
