//! Session-sharded vector index. One immutable shard per session, built
//! with that session's model: exact flat storage by default, optional 4-bit
//! product quantization with per-shard codebooks. Distributed search scans
//! every shard and merges ranked lists by raw dot-product score, which is
//! comparable across shards because all models share the output space.

use std::cmp::Ordering;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::encoder::{dot, EncoderModel};
use crate::io_util::{self, CountingReader};
use crate::{Error, Result, Scalar};

pub const SHARD_MAGIC: &[u8; 8] = b"MURRIDX1";
pub const SHARD_FORMAT_VERSION: u32 = 1;

/// Centroids per subquantizer; 4-bit codes.
pub const PQ_CENTROIDS: usize = 16;
pub const KMEANS_MAX_ITERS: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum IndexMode {
    Flat,
    Pq { m: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShardStorage<F: Scalar> {
    /// n x d_out row-major vectors.
    Flat { vectors: Vec<F> },
    /// m subquantizers of 16 centroids each; codebooks are
    /// m x 16 x (d_out/m) row-major, codes are n x m nibbles packed two per
    /// byte in sequence order.
    Pq { m: usize, codebooks: Vec<F>, codes: Vec<u8> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexShard<F: Scalar> {
    pub session: u32,
    pub encoder_version: String,
    pub d_out: usize,
    pub doc_ids: Vec<String>,
    pub storage: ShardStorage<F>,
}

/// (doc_id, score) pairs ordered by descending score, ties broken by
/// ascending doc_id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList<F: Scalar> {
    pub entries: Vec<(String, F)>,
}

impl<F: Scalar> RankedList<F> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(String, F)> {
        self.entries.iter()
    }
}

fn rank_key<F: Scalar>(a: &(String, F), b: &(String, F)) -> Ordering {
    b.1.partial_cmp(&a.1).unwrap_or(Ordering::Equal).then_with(|| a.0.cmp(&b.0))
}

fn rank_and_truncate<F: Scalar>(mut entries: Vec<(String, F)>, k: usize) -> RankedList<F> {
    entries.sort_by(rank_key);
    entries.truncate(k);
    RankedList { entries }
}

// ---------------------------------------------------------------------------
// k-means for PQ codebooks

fn sq_dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// Seeded k-means++ with empty-cluster repair by splitting the largest
/// cluster; at most `KMEANS_MAX_ITERS` Lloyd iterations.
pub fn kmeans<F: Scalar>(
    data: &[F],
    n: usize,
    dim: usize,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<F> {
    assert!(n >= 1 && data.len() == n * dim);
    let point = |i: usize| &data[i * dim..(i + 1) * dim];

    // k-means++ seeding
    let mut centroids: Vec<F> = Vec::with_capacity(k * dim);
    let first = rng.gen_range(0..n);
    centroids.extend_from_slice(point(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(point(i), point(first)).to_real()).collect();
    while centroids.len() < k * dim {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        let c_idx = centroids.len() / dim;
        centroids.extend_from_slice(point(next));
        for i in 0..n {
            let nd = sq_dist(point(i), &centroids[c_idx * dim..(c_idx + 1) * dim]).to_real();
            if nd < d2[i] {
                d2[i] = nd;
            }
        }
    }

    let mut assign = vec![0usize; n];
    for _ in 0..KMEANS_MAX_ITERS {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = sq_dist(point(i), &centroids[0..dim]);
            for c in 1..k {
                let d = sq_dist(point(i), &centroids[c * dim..(c + 1) * dim]);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }

        let mut counts = vec![0usize; k];
        let mut sums = vec![F::zero(); k * dim];
        for i in 0..n {
            counts[assign[i]] += 1;
            let p = point(i);
            let row = &mut sums[assign[i] * dim..(assign[i] + 1) * dim];
            for (s, &v) in row.iter_mut().zip(p) {
                *s = *s + v;
            }
        }

        // empty-cluster repair: reseed from the largest cluster's farthest point
        for c in 0..k {
            if counts[c] == 0 {
                let largest =
                    (0..k).max_by_key(|&j| counts[j]).expect("at least one non-empty cluster");
                let far = (0..n)
                    .filter(|&i| assign[i] == largest)
                    .max_by(|&a, &b| {
                        sq_dist(point(a), &centroids[largest * dim..(largest + 1) * dim])
                            .partial_cmp(&sq_dist(
                                point(b),
                                &centroids[largest * dim..(largest + 1) * dim],
                            ))
                            .unwrap_or(Ordering::Equal)
                    })
                    .expect("largest cluster non-empty");
                counts[largest] -= 1;
                counts[c] += 1;
                let moved = point(far).to_vec();
                for (j, &v) in moved.iter().enumerate() {
                    sums[largest * dim + j] = sums[largest * dim + j] - v;
                    sums[c * dim + j] = sums[c * dim + j] + v;
                }
                assign[far] = c;
                changed = true;
            }
        }

        for c in 0..k {
            if counts[c] > 0 {
                let inv = F::from_real(1.0 / counts[c] as f64);
                for j in 0..dim {
                    centroids[c * dim + j] = sums[c * dim + j] * inv;
                }
            }
        }
        if !changed {
            break;
        }
    }
    centroids
}

// ---------------------------------------------------------------------------
// Shard construction

/// Encode and index the documents of one session. PQ mode trains per-shard
/// codebooks by k-means on this shard's own vectors; shards with fewer than
/// 16 vectors fall back to flat storage with a warning.
pub fn build_shard<F: Scalar>(
    model: &EncoderModel<F>,
    docs: &[&Document],
    mode: IndexMode,
    session: u32,
    seed: u64,
) -> Result<IndexShard<F>> {
    let d_out = model.dims.d_out;
    let mut vectors = Vec::with_capacity(docs.len() * d_out);
    let mut doc_ids = Vec::with_capacity(docs.len());
    for doc in docs {
        vectors.extend(model.encode(&doc.text));
        doc_ids.push(doc.doc_id.clone());
    }
    shard_from_vectors(vectors, doc_ids, d_out, mode, session, &model.version, seed)
}

/// Build a shard directly from `n x d_out` row-major vectors.
pub fn shard_from_vectors<F: Scalar>(
    vectors: Vec<F>,
    doc_ids: Vec<String>,
    d_out: usize,
    mode: IndexMode,
    session: u32,
    encoder_version: &str,
    seed: u64,
) -> Result<IndexShard<F>> {
    let n = doc_ids.len();
    assert_eq!(vectors.len(), n * d_out, "vector buffer does not match doc count");

    let storage = match mode {
        IndexMode::Flat => ShardStorage::Flat { vectors },
        IndexMode::Pq { m } => {
            if m == 0 || d_out % m != 0 {
                return Err(Error::Config(format!(
                    "pq_m = {m} must divide the output dimension {d_out}"
                )));
            }
            if n < PQ_CENTROIDS {
                log::warn!(
                    "session {session}: only {n} vectors (< {PQ_CENTROIDS}); falling back to flat storage"
                );
                ShardStorage::Flat { vectors }
            } else {
                let d_sub = d_out / m;
                let mut codebooks = Vec::with_capacity(m * PQ_CENTROIDS * d_sub);
                let mut codes_flat = Vec::with_capacity(n * m);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut sub = vec![F::zero(); n * d_sub];
                let mut all_codes: Vec<Vec<u8>> = vec![Vec::with_capacity(m); n];
                for j in 0..m {
                    for i in 0..n {
                        let src = &vectors[i * d_out + j * d_sub..i * d_out + (j + 1) * d_sub];
                        sub[i * d_sub..(i + 1) * d_sub].copy_from_slice(src);
                    }
                    let cb = kmeans(&sub, n, d_sub, PQ_CENTROIDS, &mut rng);
                    for i in 0..n {
                        let p = &sub[i * d_sub..(i + 1) * d_sub];
                        let mut best = 0u8;
                        let mut best_d = sq_dist(p, &cb[0..d_sub]);
                        for c in 1..PQ_CENTROIDS {
                            let d = sq_dist(p, &cb[c * d_sub..(c + 1) * d_sub]);
                            if d < best_d {
                                best_d = d;
                                best = c as u8;
                            }
                        }
                        all_codes[i].push(best);
                    }
                    codebooks.extend(cb);
                }
                for row in all_codes {
                    codes_flat.extend(row);
                }
                ShardStorage::Pq { m, codebooks, codes: pack_nibbles(&codes_flat) }
            }
        }
    };

    Ok(IndexShard {
        session,
        encoder_version: encoder_version.to_string(),
        d_out,
        doc_ids,
        storage,
    })
}

fn pack_nibbles(codes: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; codes.len().div_ceil(2)];
    for (i, &c) in codes.iter().enumerate() {
        debug_assert!(c < 16);
        if i % 2 == 0 {
            out[i / 2] |= c;
        } else {
            out[i / 2] |= c << 4;
        }
    }
    out
}

fn unpack_nibble(packed: &[u8], i: usize) -> u8 {
    let b = packed[i / 2];
    if i % 2 == 0 {
        b & 0x0f
    } else {
        b >> 4
    }
}

// ---------------------------------------------------------------------------
// Search

/// Exact top-k scan for flat shards; asymmetric distance computation with
/// per-subquantizer lookup tables for PQ shards.
pub fn search_shard<F: Scalar>(shard: &IndexShard<F>, qvec: &[F], k: usize) -> RankedList<F> {
    assert_eq!(qvec.len(), shard.d_out, "query dimension mismatch");
    if k == 0 {
        return RankedList { entries: Vec::new() };
    }
    let n = shard.doc_ids.len();
    let mut entries: Vec<(String, F)> = Vec::with_capacity(n);
    match &shard.storage {
        ShardStorage::Flat { vectors } => {
            for (i, id) in shard.doc_ids.iter().enumerate() {
                let score = dot(qvec, &vectors[i * shard.d_out..(i + 1) * shard.d_out]);
                entries.push((id.clone(), score));
            }
        }
        ShardStorage::Pq { m, codebooks, codes } => {
            let d_sub = shard.d_out / m;
            // table[j][c] = dot(q_subspace_j, centroid c of subquantizer j)
            let mut tables = vec![F::zero(); m * PQ_CENTROIDS];
            for j in 0..*m {
                let q_sub = &qvec[j * d_sub..(j + 1) * d_sub];
                for c in 0..PQ_CENTROIDS {
                    let off = (j * PQ_CENTROIDS + c) * d_sub;
                    tables[j * PQ_CENTROIDS + c] = dot(q_sub, &codebooks[off..off + d_sub]);
                }
            }
            for (i, id) in shard.doc_ids.iter().enumerate() {
                let mut score = F::zero();
                for j in 0..*m {
                    let c = unpack_nibble(codes, i * m + j) as usize;
                    score = score + tables[j * PQ_CENTROIDS + c];
                }
                entries.push((id.clone(), score));
            }
        }
    }
    rank_and_truncate(entries, k)
}

/// Distributed search: per-shard top-k lists merged by (score desc, doc_id
/// asc) and truncated to k. Documents are indexed exactly once across
/// shards, so no deduplication is needed.
pub fn search_all<F: Scalar>(shards: &[IndexShard<F>], qvec: &[F], k: usize) -> RankedList<F> {
    let mut entries = Vec::new();
    for shard in shards {
        entries.extend(search_shard(shard, qvec, k).entries);
    }
    rank_and_truncate(entries, k)
}

// ---------------------------------------------------------------------------
// Serialization

pub fn save_shard<F: Scalar>(shard: &IndexShard<F>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(SHARD_MAGIC)?;
    io_util::write_u32(&mut w, SHARD_FORMAT_VERSION)?;
    io_util::write_u32(&mut w, shard.session)?;
    let mode: u8 = match &shard.storage {
        ShardStorage::Flat { .. } => 0,
        ShardStorage::Pq { .. } => 1,
    };
    io_util::write_u8(&mut w, mode)?;
    io_util::write_u32(&mut w, shard.d_out as u32)?;
    io_util::write_u64(&mut w, shard.doc_ids.len() as u64)?;
    io_util::write_string(&mut w, &shard.encoder_version)?;
    match &shard.storage {
        ShardStorage::Flat { vectors } => {
            for &v in vectors {
                io_util::write_f64(&mut w, v.to_real())?;
            }
        }
        ShardStorage::Pq { m, codebooks, codes } => {
            io_util::write_u32(&mut w, *m as u32)?;
            for &v in codebooks {
                io_util::write_f64(&mut w, v.to_real())?;
            }
            w.write_all(codes)?;
        }
    }
    io_util::write_u32(&mut w, shard.doc_ids.len() as u32)?;
    for id in &shard.doc_ids {
        io_util::write_string(&mut w, id)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_shard<F: Scalar>(path: &Path) -> Result<IndexShard<F>> {
    let mut r = CountingReader::new(BufReader::new(std::fs::File::open(path)?));
    r.read_magic(SHARD_MAGIC)?;
    let version = r.read_u32()?;
    if version != SHARD_FORMAT_VERSION {
        return Err(r.format_err(format!("unsupported shard format version {version}")));
    }
    let session = r.read_u32()?;
    let mode = r.read_u8()?;
    let d_out = r.read_u32()? as usize;
    let n = r.read_u64()? as usize;
    let encoder_version = r.read_string()?;
    let storage = match mode {
        0 => {
            let raw = r.read_f64_vec(n * d_out)?;
            ShardStorage::Flat { vectors: raw.into_iter().map(F::from_real).collect() }
        }
        1 => {
            let m = r.read_u32()? as usize;
            if m == 0 || d_out % m != 0 {
                return Err(r.format_err(format!("pq m = {m} does not divide d_out = {d_out}")));
            }
            let d_sub = d_out / m;
            let raw = r.read_f64_vec(m * PQ_CENTROIDS * d_sub)?;
            let mut codes = vec![0u8; (n * m).div_ceil(2)];
            r.read_exact(&mut codes)?;
            ShardStorage::Pq {
                m,
                codebooks: raw.into_iter().map(F::from_real).collect(),
                codes,
            }
        }
        other => return Err(r.format_err(format!("unknown storage mode {other}"))),
    };
    let id_count = r.read_u32()? as usize;
    if id_count != n {
        return Err(r.format_err(format!("id table count {id_count} != vector count {n}")));
    }
    let mut doc_ids = Vec::with_capacity(n);
    for _ in 0..n {
        doc_ids.push(r.read_string()?);
    }
    Ok(IndexShard { session, encoder_version, d_out, doc_ids, storage })
}
