//! Embedding providers and the persisted cosine-similarity vector index.
//!
//! Search is an exact brute-force scan: corpus scale stays small enough that
//! exactness is affordable and metric evaluation sees no ANN artifacts.

use std::collections::BTreeSet;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{CoreError, CoreResult};
use crate::hashing::fnv1a64_seeded;
use crate::synth_corpus::{Corpus, IntervalSelector, TimeInterval};

/// Magic bytes opening every index file.
pub const INDEX_MAGIC: &[u8; 8] = b"CIFVIDX1";

/// A fixed-dimension embedding with its cached Euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector {
    pub values: Vec<f32>,
    pub norm: f64,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f32>) -> EmbeddingVector {
        let norm = euclidean_norm(&values);
        EmbeddingVector { values, norm }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

fn euclidean_norm(values: &[f32]) -> f64 {
    values
        .iter()
        .map(|&v| f64::from(v) * f64::from(v))
        .sum::<f64>()
        .sqrt()
}

/// cosine(a, b), or None when either vector has zero norm.
pub fn cosine(a: &EmbeddingVector, b: &EmbeddingVector) -> Option<f64> {
    if a.norm == 0.0 || b.norm == 0.0 {
        return None;
    }
    let dot: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Some(dot / (a.norm * b.norm))
}

pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> CoreResult<EmbeddingVector>;
}

/// Deterministic test embedder: case-folded unigrams and bigrams hashed into
/// `dim` buckets with a seeded signed-hash scheme, then L2-normalized.
/// Empty text embeds to the zero vector.
#[derive(Debug, Clone)]
pub struct HashEmbedder {
    dim: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> CoreResult<HashEmbedder> {
        if dim < 8 {
            return Err(CoreError::Config(format!(
                "hash embedder dimension must be at least 8, got {dim}"
            )));
        }
        Ok(HashEmbedder { dim, seed })
    }
}

impl EmbeddingProvider for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> CoreResult<EmbeddingVector> {
        Ok(embed_text_deterministic(text, self.dim, self.seed))
    }
}

/// The hash-embedding function behind [`HashEmbedder`].
pub fn embed_text_deterministic(text: &str, dim: usize, seed: u64) -> EmbeddingVector {
    let lowered = text.to_lowercase();
    let tokens: Vec<&str> = lowered
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .collect();

    let mut acc = vec![0.0f32; dim];
    let mut add_feature = |bytes: &[u8]| {
        let h = fnv1a64_seeded(seed, bytes);
        let bucket = (h % dim as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[bucket] += sign;
    };
    for token in &tokens {
        add_feature(token.as_bytes());
    }
    for pair in tokens.windows(2) {
        let bigram = format!("{}\u{1f}{}", pair[0], pair[1]);
        add_feature(bigram.as_bytes());
    }

    let norm = euclidean_norm(&acc);
    if norm > 0.0 {
        let inv = (1.0 / norm) as f32;
        for v in &mut acc {
            *v *= inv;
        }
    }
    EmbeddingVector::new(acc)
}

/// Remote embedding endpoint speaking `{model, input} -> {data:[{embedding}]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    model: String,
    dim: usize,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, dim: usize) -> RemoteEmbedder {
        RemoteEmbedder {
            endpoint: endpoint.into(),
            model: model.into(),
            dim,
        }
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> CoreResult<EmbeddingVector> {
        let body = serde_json::json!({ "model": self.model, "input": text });
        let mut response = ureq::post(&self.endpoint)
            .send_json(&body)
            .map_err(|e| match e {
                ureq::Error::StatusCode(code) => CoreError::Backend {
                    status: code,
                    msg: format!("embedding endpoint returned {code}"),
                },
                other => CoreError::Network {
                    query: text.chars().take(80).collect(),
                    msg: other.to_string(),
                },
            })?;
        let text_body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| CoreError::Network {
                query: String::new(),
                msg: e.to_string(),
            })?;
        let value: serde_json::Value =
            serde_json::from_str(&text_body).map_err(|e| CoreError::MalformedResponse {
                msg: format!("embedding response: {e}"),
                excerpt: text_body.chars().take(200).collect(),
            })?;
        let embedding = value
            .get("data")
            .and_then(|d| d.get(0))
            .and_then(|d| d.get("embedding"))
            .and_then(|e| e.as_array())
            .ok_or_else(|| CoreError::MalformedResponse {
                msg: "no data[0].embedding in response".into(),
                excerpt: text_body.chars().take(200).collect(),
            })?;
        let values: Vec<f32> = embedding
            .iter()
            .map(|v| v.as_f64().unwrap_or(0.0) as f32)
            .collect();
        if values.len() != self.dim {
            return Err(CoreError::DimMismatch {
                index_dim: self.dim as u32,
                provider_dim: values.len() as u32,
            });
        }
        Ok(EmbeddingVector::new(values))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexRecord {
    pub tweet_id: String,
    pub interval: TimeInterval,
    pub vector: Vec<f32>,
    pub norm: f64,
}

/// File-backed collection of embedding records, searchable by cosine
/// similarity. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: u32,
    records: Vec<IndexRecord>,
}

impl VectorIndex {
    pub fn new(dim: u32) -> VectorIndex {
        VectorIndex {
            dim,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> u32 {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[IndexRecord] {
        &self.records
    }

    pub fn push(&mut self, tweet_id: String, interval: TimeInterval, vector: Vec<f32>) -> CoreResult<()> {
        if vector.len() != self.dim as usize {
            return Err(CoreError::DimMismatch {
                index_dim: self.dim,
                provider_dim: vector.len() as u32,
            });
        }
        let norm = euclidean_norm(&vector);
        self.records.push(IndexRecord {
            tweet_id,
            interval,
            vector,
            norm,
        });
        Ok(())
    }
}

/// Embed every tweet of a corpus (signal and noise alike) in corpus order.
/// A provider failure aborts with the offending tweet id; no partial index
/// escapes.
pub fn index_corpus(corpus: &Corpus, provider: &dyn EmbeddingProvider) -> CoreResult<VectorIndex> {
    let mut index = VectorIndex::new(provider.dim() as u32);
    let mut seen = BTreeSet::new();
    for tweet in &corpus.tweets {
        if !seen.insert(tweet.id.as_str()) {
            return Err(CoreError::Data(format!("duplicate tweet id {:?}", tweet.id)));
        }
        let vector = provider
            .embed(&tweet.text)
            .map_err(|e| CoreError::Data(format!("embedding tweet {:?}: {e}", tweet.id)))?;
        index.push(tweet.id.clone(), tweet.interval, vector.values)?;
    }
    Ok(index)
}

/// One search hit.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredHit {
    pub tweet_id: String,
    pub score: f64,
}

/// Exact top-K by cosine over records passing the interval filter. Ties
/// break by ascending tweet id; zero-norm vectors score −1 and rank last.
pub fn query_topk(
    index: &VectorIndex,
    query_text: &str,
    provider: &dyn EmbeddingProvider,
    k: usize,
    interval_filter: IntervalSelector,
) -> CoreResult<Vec<ScoredHit>> {
    if k == 0 {
        return Err(CoreError::Config("top-K requires K >= 1".into()));
    }
    if provider.dim() as u32 != index.dim {
        return Err(CoreError::DimMismatch {
            index_dim: index.dim,
            provider_dim: provider.dim() as u32,
        });
    }
    let query_vec = provider.embed(query_text)?;
    Ok(scan_topk(index, &query_vec, k, interval_filter))
}

/// The scan behind [`query_topk`], reusable when the query embedding is
/// already computed.
pub fn scan_topk(
    index: &VectorIndex,
    query_vec: &EmbeddingVector,
    k: usize,
    interval_filter: IntervalSelector,
) -> Vec<ScoredHit> {
    let mut hits: Vec<ScoredHit> = index
        .records
        .iter()
        .filter(|r| interval_filter.matches(r.interval))
        .map(|r| {
            let score = if query_vec.norm == 0.0 || r.norm == 0.0 {
                -1.0
            } else {
                let dot: f64 = query_vec
                    .values
                    .iter()
                    .zip(&r.vector)
                    .map(|(&x, &y)| f64::from(x) * f64::from(y))
                    .sum();
                dot / (query_vec.norm * r.norm)
            };
            ScoredHit {
                tweet_id: r.tweet_id.clone(),
                score,
            }
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.tweet_id.cmp(&b.tweet_id))
    });
    hits.truncate(k);
    hits
}

/// Write the index: magic, u32 dim, u64 count, then per record a u16 id
/// length, the UTF-8 id, a u8 interval code, and dim little-endian f32s.
pub fn save_index(index: &VectorIndex, path: &Path) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io_err = |e| CoreError::io(path, e);

    w.write_all(INDEX_MAGIC).map_err(io_err)?;
    w.write_all(&index.dim.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(index.records.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for record in &index.records {
        let id_bytes = record.tweet_id.as_bytes();
        if id_bytes.len() > u16::MAX as usize {
            return Err(CoreError::Data(format!(
                "tweet id too long for index format: {} bytes",
                id_bytes.len()
            )));
        }
        w.write_all(&(id_bytes.len() as u16).to_le_bytes())
            .map_err(io_err)?;
        w.write_all(id_bytes).map_err(io_err)?;
        w.write_all(&[record.interval.code()]).map_err(io_err)?;
        for &v in &record.vector {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

pub fn load_index(path: &Path) -> CoreResult<VectorIndex> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let mut r = BufReader::new(file);
    let bad = |msg: String| CoreError::Data(format!("index file {}: {msg}", path.display()));

    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|e| CoreError::io(path, e))?;
    if &magic != INDEX_MAGIC {
        return Err(bad(format!("bad magic {magic:?}")));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|e| CoreError::io(path, e))?;
    let dim = u32::from_le_bytes(u32buf);
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(|e| CoreError::io(path, e))?;
    let count = u64::from_le_bytes(u64buf);

    let mut index = VectorIndex::new(dim);
    let mut seen = BTreeSet::new();
    for i in 0..count {
        let mut u16buf = [0u8; 2];
        r.read_exact(&mut u16buf).map_err(|e| CoreError::io(path, e))?;
        let id_len = u16::from_le_bytes(u16buf) as usize;
        let mut id_bytes = vec![0u8; id_len];
        r.read_exact(&mut id_bytes).map_err(|e| CoreError::io(path, e))?;
        let tweet_id = String::from_utf8(id_bytes)
            .map_err(|e| bad(format!("record {i}: id not UTF-8: {e}")))?;
        if !seen.insert(tweet_id.clone()) {
            return Err(bad(format!("duplicate tweet id {tweet_id:?}")));
        }
        let mut code = [0u8; 1];
        r.read_exact(&mut code).map_err(|e| CoreError::io(path, e))?;
        let interval = TimeInterval::from_code(code[0])
            .ok_or_else(|| bad(format!("record {i}: bad interval code {}", code[0])))?;
        let mut vector = Vec::with_capacity(dim as usize);
        let mut f32buf = [0u8; 4];
        for _ in 0..dim {
            r.read_exact(&mut f32buf).map_err(|e| CoreError::io(path, e))?;
            vector.push(f32::from_le_bytes(f32buf));
        }
        index.push(tweet_id, interval, vector)?;
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| CoreError::io(path, e))? != 0 {
        return Err(bad("trailing bytes after final record".into()));
    }
    Ok(index)
}
