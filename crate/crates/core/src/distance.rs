//! Squared-Euclidean distance, the exact brute-force oracle, and recall.
//!
//! Distances are squared L2 throughout: ranking-equivalent to L2 and cheaper.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::types::{Dataset, VectorRecord};

/// Squared L2 over f32 slices. Panics in debug builds on length mismatch;
/// the checked record-level entry point is [`l2_distance`].
#[inline]
pub fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0f32;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        sum += d * d;
    }
    sum
}

/// Squared Euclidean distance between two records of equal shape.
pub fn l2_distance(a: &VectorRecord, b: &VectorRecord) -> Result<f32> {
    if a.element_type != b.element_type || a.data.len() != b.data.len() {
        return Err(Error::usage(format!(
            "distance between mismatched vectors: {:?}x{} vs {:?}x{}",
            a.element_type,
            a.dim(),
            b.element_type,
            b.dim()
        )));
    }
    Ok(l2_sq(&a.to_f32(), &b.to_f32()))
}

/// Exact k nearest live ids by squared L2, ties broken by smaller id.
/// Ids in `excluded` are never returned.
pub fn brute_force_knn(
    dataset: &Dataset,
    query: &[f32],
    k: usize,
    excluded: &HashSet<u32>,
) -> Result<Vec<(u32, f32)>> {
    if query.len() != dataset.dim() {
        return Err(Error::usage(format!(
            "query dim {} does not match dataset dim {}",
            query.len(),
            dataset.dim()
        )));
    }
    let live = dataset.count() - excluded.len();
    if k == 0 || k > live {
        return Err(Error::usage(format!("k = {k} out of range for {live} live vectors")));
    }
    let mut all: Vec<(u32, f32)> = Vec::with_capacity(live);
    let mut buf = Vec::with_capacity(dataset.dim());
    for (i, bytes) in dataset.iter_bytes().enumerate() {
        let id = i as u32;
        if excluded.contains(&id) {
            continue;
        }
        buf.clear();
        dataset.element_type().decode_f32(bytes, &mut buf);
        all.push((id, l2_sq(query, &buf)));
    }
    all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    all.truncate(k);
    Ok(all)
}

/// |first-k(result) ∩ first-k(truth)| / k.
pub fn recall_at_k(result_ids: &[u32], truth_ids: &[u32], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::usage("recall@0 is undefined"));
    }
    if result_ids.len() < k || truth_ids.len() < k {
        return Err(Error::usage(format!(
            "recall@{k} needs {k} entries in both lists, got {} and {}",
            result_ids.len(),
            truth_ids.len()
        )));
    }
    let truth: HashSet<u32> = truth_ids[..k].iter().copied().collect();
    let hit = result_ids[..k].iter().filter(|id| truth.contains(id)).count();
    Ok(hit as f64 / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ElementType;
    use proptest::prelude::*;

    fn ds(points: &[&[f32]]) -> Dataset {
        let mut d = Dataset::new(points[0].len(), ElementType::F32);
        for p in points {
            let bytes: Vec<u8> = p.iter().flat_map(|v| v.to_le_bytes()).collect();
            d.push_bytes(&bytes).unwrap();
        }
        d
    }

    #[test]
    fn l2_basics() {
        let a = VectorRecord::new(0, ElementType::F32, 0f32.to_le_bytes().to_vec()).unwrap();
        assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(l2_sq(&[0.0, 0.0], &[3.0, 4.0]), 25.0);
    }

    #[test]
    fn l2_dim_mismatch() {
        let a = VectorRecord::new(0, ElementType::U8, vec![1, 2]).unwrap();
        let b = VectorRecord::new(1, ElementType::U8, vec![1]).unwrap();
        assert!(matches!(l2_distance(&a, &b), Err(Error::Usage(_))));
    }

    #[test]
    fn knn_hand_checkable() {
        let d = ds(&[&[0.0, 0.0], &[1.0, 0.0], &[3.0, 0.0]]);
        let r = brute_force_knn(&d, &[0.9, 0.0], 1, &HashSet::new()).unwrap();
        assert_eq!(r[0].0, 1);
    }

    #[test]
    fn knn_exhaustive_and_single() {
        let d = ds(&[&[0.0], &[2.0], &[1.0]]);
        let r = brute_force_knn(&d, &[0.0], 3, &HashSet::new()).unwrap();
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 2, 1]);
        let single = ds(&[&[5.0]]);
        assert_eq!(brute_force_knn(&single, &[0.0], 1, &HashSet::new()).unwrap()[0].0, 0);
    }

    #[test]
    fn knn_excluded_and_k_too_large() {
        let d = ds(&[&[0.0], &[1.0]]);
        let ex: HashSet<u32> = [0].into_iter().collect();
        let r = brute_force_knn(&d, &[0.0], 1, &ex).unwrap();
        assert_eq!(r[0].0, 1);
        assert!(matches!(brute_force_knn(&d, &[0.0], 2, &ex), Err(Error::Usage(_))));
    }

    #[test]
    fn knn_ties_break_by_id() {
        let d = ds(&[&[1.0], &[1.0], &[1.0]]);
        let r = brute_force_knn(&d, &[0.0], 2, &HashSet::new()).unwrap();
        assert_eq!(r.iter().map(|x| x.0).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn recall_cases() {
        let a = [1u32, 2, 3, 4];
        assert_eq!(recall_at_k(&a, &a, 4).unwrap(), 1.0);
        assert_eq!(recall_at_k(&[1, 2], &[3, 4], 2).unwrap(), 0.0);
        let r: Vec<u32> = (0..10).collect();
        let t: Vec<u32> = (5..15).collect();
        assert_eq!(recall_at_k(&r, &t, 10).unwrap(), 0.5);
        assert!(matches!(recall_at_k(&a, &a, 5), Err(Error::Usage(_))));
    }

    proptest! {
        #[test]
        fn l2_symmetry(a in proptest::collection::vec(-100f32..100.0, 8),
                       b in proptest::collection::vec(-100f32..100.0, 8)) {
            prop_assert_eq!(l2_sq(&a, &b), l2_sq(&b, &a));
        }
    }
}
