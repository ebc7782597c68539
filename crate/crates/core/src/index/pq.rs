//! Product quantization: per-subspace k-means codebooks, one-byte codes, and
//! asymmetric distance tables for traversal-time scoring.

use std::fs;
use std::path::Path;
use std::sync::atomic::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::distance::l2_sq;
use crate::error::{Error, Result};
use crate::layout::store::IoStats;
use crate::types::Dataset;

pub const PQ_CENTROIDS: usize = 256;
const LLOYD_ITERATIONS: usize = 10;

/// Per-subspace centroid tables: `m * 256 * dsub` floats.
#[derive(Debug, Clone, PartialEq)]
pub struct PQCodebook {
    pub m: usize,
    pub dsub: usize,
    centroids: Vec<f32>,
}

impl PQCodebook {
    pub fn dim(&self) -> usize {
        self.m * self.dsub
    }

    #[inline]
    pub fn centroid(&self, subspace: usize, index: usize) -> &[f32] {
        let start = (subspace * PQ_CENTROIDS + index) * self.dsub;
        &self.centroids[start..start + self.dsub]
    }

    /// Concatenated centroids selected by a code.
    pub fn reconstruct(&self, code: &[u8]) -> Vec<f32> {
        debug_assert_eq!(code.len(), self.m);
        let mut out = Vec::with_capacity(self.dim());
        for (s, &c) in code.iter().enumerate() {
            out.extend_from_slice(self.centroid(s, c as usize));
        }
        out
    }

    /// `pq.codebook`: M as little-endian u32, then the centroid floats.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = Vec::with_capacity(4 + self.centroids.len() * 4);
        out.extend_from_slice(&(self.m as u32).to_le_bytes());
        for c in &self.centroids {
            out.extend_from_slice(&c.to_le_bytes());
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>, dim: usize, io: &IoStats) -> Result<PQCodebook> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::startup(path, "missing metadata file"));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        io.metadata_bytes_read.fetch_add(bytes.len() as u64, Ordering::Relaxed);
        if bytes.len() < 4 {
            return Err(Error::startup(path, "truncated codebook"));
        }
        let m = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        if m == 0 || dim % m != 0 {
            return Err(Error::startup(path, format!("codebook M={m} does not divide dim {dim}")));
        }
        let dsub = dim / m;
        let expect = 4 + m * PQ_CENTROIDS * dsub * 4;
        if bytes.len() != expect {
            return Err(Error::startup(path, format!("codebook is {} bytes, expected {expect}", bytes.len())));
        }
        let centroids = bytes[4..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(PQCodebook { m, dsub, centroids })
    }
}

/// Trains per-subspace k-means (k = 256) with seeded k-means++ starts and a
/// fixed 10 Lloyd iterations; fully deterministic for a given (sample, M,
/// seed).
pub fn train_pq(sample: &Dataset, m: usize, seed: u64) -> Result<PQCodebook> {
    train_pq_matrix(&sample.to_f32_matrix(), sample.dim(), m, seed)
}

pub fn train_pq_matrix(data: &[f32], dim: usize, m: usize, seed: u64) -> Result<PQCodebook> {
    if m == 0 || dim % m != 0 {
        return Err(Error::usage(format!("PQ subspace count {m} must divide dim {dim}")));
    }
    let n = data.len() / dim;
    if n < PQ_CENTROIDS {
        return Err(Error::usage(format!(
            "PQ training needs at least {PQ_CENTROIDS} samples, got {n}"
        )));
    }
    let dsub = dim / m;
    let per_subspace: Vec<Vec<f32>> = (0..m)
        .into_par_iter()
        .map(|s| {
            // contiguous copy of this subspace's components
            let mut pts = vec![0.0f32; n * dsub];
            for i in 0..n {
                let src = &data[i * dim + s * dsub..i * dim + (s + 1) * dsub];
                pts[i * dsub..(i + 1) * dsub].copy_from_slice(src);
            }
            kmeans_256(&pts, dsub, seed.wrapping_add(s as u64))
        })
        .collect();
    let mut centroids = Vec::with_capacity(m * PQ_CENTROIDS * dsub);
    for c in per_subspace {
        centroids.extend_from_slice(&c);
    }
    Ok(PQCodebook { m, dsub, centroids })
}

fn kmeans_256(points: &[f32], dsub: usize, seed: u64) -> Vec<f32> {
    let n = points.len() / dsub;
    let point = |i: usize| &points[i * dsub..(i + 1) * dsub];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding over squared distances
    let mut centroids = Vec::with_capacity(PQ_CENTROIDS * dsub);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f32> = (0..n)
        .map(|i| l2_sq(point(i), &centroids[..dsub]))
        .collect();
    while centroids.len() < PQ_CENTROIDS * dsub {
        let total: f64 = d2.iter().map(|&d| d as f64).sum();
        let chosen = if total > 0.0 {
            let mut r = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                r -= d as f64;
                if r <= 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            // all remaining points coincide with chosen centroids
            (centroids.len() / dsub) % n
        };
        let start = centroids.len();
        centroids.extend_from_slice(point(chosen));
        let c = &centroids[start..start + dsub];
        for i in 0..n {
            let d = l2_sq(point(i), c);
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }

    // Lloyd refinement with a fixed iteration count
    let mut assign = vec![0usize; n];
    for _ in 0..LLOYD_ITERATIONS {
        for i in 0..n {
            assign[i] = nearest_centroid(point(i), &centroids, dsub);
        }
        let mut sums = vec![0.0f64; PQ_CENTROIDS * dsub];
        let mut counts = vec![0u32; PQ_CENTROIDS];
        for i in 0..n {
            counts[assign[i]] += 1;
            let p = point(i);
            let s = &mut sums[assign[i] * dsub..(assign[i] + 1) * dsub];
            for (acc, &v) in s.iter_mut().zip(p) {
                *acc += v as f64;
            }
        }
        for c in 0..PQ_CENTROIDS {
            if counts[c] > 0 {
                for d in 0..dsub {
                    centroids[c * dsub + d] = (sums[c * dsub + d] / counts[c] as f64) as f32;
                }
            }
        }
    }
    centroids
}

#[inline]
fn nearest_centroid(p: &[f32], centroids: &[f32], dsub: usize) -> usize {
    let mut best = 0usize;
    let mut best_d = f32::INFINITY;
    for (c, cent) in centroids.chunks_exact(dsub).enumerate() {
        let d = l2_sq(p, cent);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// Nearest centroid per subspace, ties to the smaller index.
pub fn pq_encode(vector: &[f32], codebook: &PQCodebook) -> Result<Vec<u8>> {
    if vector.len() != codebook.dim() {
        return Err(Error::usage(format!(
            "pq_encode dim {} does not match codebook dim {}",
            vector.len(),
            codebook.dim()
        )));
    }
    let mut code = Vec::with_capacity(codebook.m);
    for s in 0..codebook.m {
        let sub = &vector[s * codebook.dsub..(s + 1) * codebook.dsub];
        let base = s * PQ_CENTROIDS * codebook.dsub;
        let table = &codebook.centroids[base..base + PQ_CENTROIDS * codebook.dsub];
        code.push(nearest_centroid(sub, table, codebook.dsub) as u8);
    }
    Ok(code)
}

/// `table[s * 256 + j]` = squared L2 between the query's subvector `s` and
/// centroid `j`.
pub fn pq_distance_table(query: &[f32], codebook: &PQCodebook) -> Result<Vec<f32>> {
    if query.len() != codebook.dim() {
        return Err(Error::usage(format!(
            "query dim {} does not match codebook dim {}",
            query.len(),
            codebook.dim()
        )));
    }
    let mut table = vec![0.0f32; codebook.m * PQ_CENTROIDS];
    for s in 0..codebook.m {
        let sub = &query[s * codebook.dsub..(s + 1) * codebook.dsub];
        for j in 0..PQ_CENTROIDS {
            table[s * PQ_CENTROIDS + j] = l2_sq(sub, codebook.centroid(s, j));
        }
    }
    Ok(table)
}

/// Asymmetric distance: sum of the table cells selected by a code. Equals
/// the exact squared L2 between the query and the code's reconstruction.
#[inline]
pub fn pq_asym_distance(code: &[u8], table: &[f32]) -> f32 {
    let mut sum = 0.0f32;
    for (s, &c) in code.iter().enumerate() {
        sum += table[s * PQ_CENTROIDS + c as usize];
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ElementType;

    fn toy_dataset(n: usize, dim: usize, seed: u64) -> Dataset {
        crate::synthetic::clustered_f32(n, dim, 32, seed)
    }

    #[test]
    fn m_must_divide_dim() {
        let ds = toy_dataset(300, 8, 1);
        assert!(matches!(train_pq(&ds, 3, 0), Err(Error::Usage(_))));
        assert!(train_pq(&ds, 4, 0).is_ok());
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_dataset(400, 8, 2);
        let a = train_pq(&ds, 4, 7).unwrap();
        let b = train_pq(&ds, 4, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_sample_of_256_becomes_centroids() {
        // 256 well-separated vectors: every point ends up its own centroid,
        // so a member's asymmetric self-distance is ~0
        let dim = 8;
        let mut ds = Dataset::new(dim, ElementType::F32);
        for i in 0..256u32 {
            let v: Vec<u8> = (0..dim)
                .flat_map(|d| ((i as f32) * 10.0 + d as f32 * 1000.0).to_le_bytes())
                .collect();
            ds.push_bytes(&v).unwrap();
        }
        let cb = train_pq(&ds, 4, 3).unwrap();
        for i in (0..256u32).step_by(17) {
            let v = ds.vector_f32(i);
            let code = pq_encode(&v, &cb).unwrap();
            let table = pq_distance_table(&v, &cb).unwrap();
            let d = pq_asym_distance(&code, &table);
            let scale = 1.0 + v.iter().map(|x| x * x).sum::<f32>();
            assert!(d <= 1e-3 * scale, "self distance {d} too large for {i}");
        }
    }

    #[test]
    fn scalar_quantization_when_m_equals_dim() {
        let ds = toy_dataset(400, 4, 5);
        let cb = train_pq(&ds, 4, 0).unwrap();
        assert_eq!(cb.dsub, 1);
        let v = ds.vector_f32(0);
        assert_eq!(pq_encode(&v, &cb).unwrap().len(), 4);
    }

    #[test]
    fn encode_matches_exhaustive_oracle() {
        use rand::{Rng, SeedableRng};
        let ds = toy_dataset(600, 8, 8);
        let cb = train_pq(&ds, 2, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let v: Vec<f32> = (0..8).map(|_| rng.random_range(-2.0f32..2.0)).collect();
            let code = pq_encode(&v, &cb).unwrap();
            for s in 0..cb.m {
                let sub = &v[s * cb.dsub..(s + 1) * cb.dsub];
                let mut best = 0usize;
                let mut best_d = f32::INFINITY;
                for j in 0..PQ_CENTROIDS {
                    let d = l2_sq(sub, cb.centroid(s, j));
                    if d < best_d {
                        best_d = d;
                        best = j;
                    }
                }
                assert_eq!(code[s] as usize, best);
            }
        }
    }

    #[test]
    fn asym_distance_equals_reconstruction_distance() {
        use rand::{Rng, SeedableRng};
        let ds = toy_dataset(500, 8, 4);
        let cb = train_pq(&ds, 4, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let q: Vec<f32> = (0..8).map(|_| rng.random_range(-2.0f32..2.0)).collect();
            let v: Vec<f32> = (0..8).map(|_| rng.random_range(-2.0f32..2.0)).collect();
            let code = pq_encode(&v, &cb).unwrap();
            let table = pq_distance_table(&q, &cb).unwrap();
            let asym = pq_asym_distance(&code, &table);
            let direct = l2_sq(&q, &cb.reconstruct(&code));
            assert!(asym >= 0.0);
            assert!((asym - direct).abs() <= 1e-4 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn codebook_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_dataset(300, 8, 6);
        let cb = train_pq(&ds, 4, 1).unwrap();
        let path = dir.path().join("pq.codebook");
        cb.save(&path).unwrap();
        let io = IoStats::default();
        let back = PQCodebook::load(&path, 8, &io).unwrap();
        assert_eq!(back, cb);
        assert!(io.metadata_bytes_read.load(Ordering::Relaxed) > 0);
    }
}
