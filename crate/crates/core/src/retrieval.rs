//! CIF query formulations and retrieval runs: per-facility queries over the
//! K grid and time intervals, with relevance judgments against corpus ground
//! truth.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cif_catalog::{AreaOfInterest, Cif};
use crate::embed_index::{scan_topk, EmbeddingProvider, ScoredHit, VectorIndex};
use crate::error::{CoreError, CoreResult};
use crate::synth_corpus::{Corpus, IntervalSelector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QueryStrategy {
    #[serde(rename = "cif")]
    CifOnly,
    #[serde(rename = "cif+terms")]
    CifPlusTerms,
    #[serde(rename = "cif+phrase")]
    CifPlusPhrase,
}

impl QueryStrategy {
    pub const ALL: [QueryStrategy; 3] = [
        QueryStrategy::CifOnly,
        QueryStrategy::CifPlusTerms,
        QueryStrategy::CifPlusPhrase,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QueryStrategy::CifOnly => "cif",
            QueryStrategy::CifPlusTerms => "cif+terms",
            QueryStrategy::CifPlusPhrase => "cif+phrase",
        }
    }
}

impl std::fmt::Display for QueryStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QueryStrategy {
    type Err = CoreError;

    fn from_str(s: &str) -> CoreResult<QueryStrategy> {
        QueryStrategy::ALL
            .iter()
            .copied()
            .find(|strategy| strategy.as_str() == s)
            .ok_or_else(|| CoreError::Config(format!("unknown query strategy {s:?}")))
    }
}

/// Build the query text for one facility under a strategy. Pure.
pub fn build_query(cif: &Cif, strategy: QueryStrategy, aoi: &AreaOfInterest) -> String {
    match strategy {
        QueryStrategy::CifOnly => cif.name.clone(),
        QueryStrategy::CifPlusTerms => {
            format!("{} {}", cif.name, aoi.impact_terms.join(", "))
        }
        QueryStrategy::CifPlusPhrase => format!("{} disaster impacts", cif.name),
    }
}

/// Why a retrieved tweet is or is not relevant to the queried facility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelevanceBucket {
    /// Signal tweet for the queried facility.
    Relevant,
    /// Signal tweet for a different facility.
    OtherCif,
    /// Noise, including injected-name noise.
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub tweet_id: String,
    pub score: f64,
    pub relevant: bool,
    pub bucket: RelevanceBucket,
}

/// Judge retrieved hits against corpus ground truth: relevant iff signal and
/// linked to the queried facility; irrelevant hits split into other-CIF and
/// noise.
pub fn judge_relevance(
    hits: &[ScoredHit],
    queried_cif_id: &str,
    corpus: &Corpus,
) -> CoreResult<Vec<RankedEntry>> {
    let by_id: BTreeMap<&str, &crate::synth_corpus::Tweet> =
        corpus.tweets.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut out = Vec::with_capacity(hits.len());
    for hit in hits {
        let tweet = by_id.get(hit.tweet_id.as_str()).ok_or_else(|| {
            CoreError::Data(format!(
                "retrieved tweet {:?} does not exist in the corpus",
                hit.tweet_id
            ))
        })?;
        let bucket = if tweet.is_signal {
            if tweet.cif_id.as_deref() == Some(queried_cif_id) {
                RelevanceBucket::Relevant
            } else {
                RelevanceBucket::OtherCif
            }
        } else {
            RelevanceBucket::Noise
        };
        out.push(RankedEntry {
            tweet_id: hit.tweet_id.clone(),
            score: hit.score,
            relevant: bucket == RelevanceBucket::Relevant,
            bucket,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreakdownCounts {
    pub relevant: usize,
    pub other_cif: usize,
    pub noise: usize,
}

pub fn breakdown(entries: &[RankedEntry]) -> BreakdownCounts {
    let mut counts = BreakdownCounts::default();
    for entry in entries {
        match entry.bucket {
            RelevanceBucket::Relevant => counts.relevant += 1,
            RelevanceBucket::OtherCif => counts.other_cif += 1,
            RelevanceBucket::Noise => counts.noise += 1,
        }
    }
    counts
}

/// Judged ranked list for one (facility, interval) query at the largest K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    pub cif_id: String,
    pub interval: IntervalSelector,
    /// Ground-truth relevant count for the query (signal tweets of this
    /// facility within the interval).
    pub total_relevant: usize,
    pub entries: Vec<RankedEntry>,
}

impl QueryResult {
    /// Prefix slice at K (exactness of the scan makes slices consistent
    /// across the grid).
    pub fn at_k(&self, k: usize) -> &[RankedEntry] {
        &self.entries[..k.min(self.entries.len())]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalRun {
    pub aoi: String,
    pub strategy: QueryStrategy,
    pub k_grid: Vec<usize>,
    pub results: Vec<QueryResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// The default K grid: 5 to 50 in steps of 5.
pub fn default_k_grid() -> Vec<usize> {
    (1..=10).map(|n| n * 5).collect()
}

/// A K grid must be non-empty and strictly increasing.
pub fn validate_k_grid_monotone(k_grid: &[usize]) -> CoreResult<()> {
    if k_grid.is_empty() {
        return Err(CoreError::Config("K grid must be non-empty".into()));
    }
    for window in k_grid.windows(2) {
        if window[1] <= window[0] {
            return Err(CoreError::Config(format!(
                "K grid must be strictly increasing, got {k_grid:?}"
            )));
        }
    }
    Ok(())
}

/// Full grid validation: monotone plus every K a multiple of the AP step.
pub fn validate_k_grid(k_grid: &[usize], step: usize) -> CoreResult<()> {
    validate_k_grid_monotone(k_grid)?;
    for &k in k_grid {
        if step == 0 || !k.is_multiple_of(step) {
            return Err(CoreError::Config(format!(
                "K grid value {k} is not a multiple of the AP step {step}"
            )));
        }
    }
    Ok(())
}

/// Count ground-truth relevant tweets for a (facility, interval) query.
pub fn ground_truth_relevant(corpus: &Corpus, cif_id: &str, selector: IntervalSelector) -> usize {
    corpus
        .tweets
        .iter()
        .filter(|t| {
            t.is_signal
                && t.cif_id.as_deref() == Some(cif_id)
                && selector.matches(t.interval)
        })
        .count()
}

/// Execute one strategy over the whole catalog: per facility, the query is
/// embedded once and scanned per interval selector at the grid's largest K;
/// smaller K values are prefix slices.
#[allow(clippy::too_many_arguments)]
pub fn run_retrieval(
    index: &VectorIndex,
    catalog: &[Cif],
    corpus: &Corpus,
    strategy: QueryStrategy,
    provider: &dyn EmbeddingProvider,
    aoi: &AreaOfInterest,
    k_grid: &[usize],
    selectors: &[IntervalSelector],
) -> CoreResult<RetrievalRun> {
    validate_k_grid_monotone(k_grid)?;
    if provider.dim() as u32 != index.dim() {
        return Err(CoreError::DimMismatch {
            index_dim: index.dim(),
            provider_dim: provider.dim() as u32,
        });
    }
    let kmax = *k_grid.last().unwrap();
    let mut results = Vec::with_capacity(catalog.len() * selectors.len());
    for cif in catalog {
        let query = build_query(cif, strategy, aoi);
        let query_vec = provider.embed(&query).map_err(|e| {
            CoreError::Data(format!("embedding query for CIF {:?}: {e}", cif.id))
        })?;
        for &selector in selectors {
            let hits = scan_topk(index, &query_vec, kmax, selector);
            let entries = judge_relevance(&hits, &cif.id, corpus).map_err(|e| {
                CoreError::Data(format!(
                    "judging (cif {:?}, interval {selector}): {e}",
                    cif.id
                ))
            })?;
            results.push(QueryResult {
                cif_id: cif.id.clone(),
                interval: selector,
                total_relevant: ground_truth_relevant(corpus, &cif.id, selector),
                entries,
            });
        }
    }
    Ok(RetrievalRun {
        aoi: aoi.name.clone(),
        strategy,
        k_grid: k_grid.to_vec(),
        results,
        config_hash: None,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct RunHeader {
    run_meta: RunMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunMeta {
    aoi: String,
    strategy: QueryStrategy,
    k_grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RunRow {
    cif_id: String,
    strategy: QueryStrategy,
    interval: IntervalSelector,
    k: usize,
    total_relevant: usize,
    ranked: Vec<RankedEntry>,
}

/// Write a run: a metadata header line, then one row per (facility,
/// interval, K) with the ranked slice at that K.
pub fn save_run(run: &RetrievalRun, path: &Path) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = RunHeader {
        run_meta: RunMeta {
            aoi: run.aoi.clone(),
            strategy: run.strategy,
            k_grid: run.k_grid.clone(),
            config_hash: run.config_hash.clone(),
        },
    };
    let line = serde_json::to_string(&header)
        .map_err(|e| CoreError::Data(format!("serializing run header: {e}")))?;
    writeln!(w, "{line}").map_err(|e| CoreError::io(path, e))?;
    for result in &run.results {
        for &k in &run.k_grid {
            let row = RunRow {
                cif_id: result.cif_id.clone(),
                strategy: run.strategy,
                interval: result.interval,
                k,
                total_relevant: result.total_relevant,
                ranked: result.at_k(k).to_vec(),
            };
            let line = serde_json::to_string(&row)
                .map_err(|e| CoreError::Data(format!("serializing run row: {e}")))?;
            writeln!(w, "{line}").map_err(|e| CoreError::io(path, e))?;
        }
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

/// Load a run, reconstructing full ranked lists from the largest-K rows.
pub fn load_run(path: &Path) -> CoreResult<RetrievalRun> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let meta = match lines.next() {
        Some((_, Ok(line))) => {
            let header: RunHeader = serde_json::from_str(&line)
                .map_err(|e| CoreError::schema(path, 1, format!("run header: {e}")))?;
            header.run_meta
        }
        Some((_, Err(e))) => return Err(CoreError::io(path, e)),
        None => return Err(CoreError::schema(path, 1, "empty run file")),
    };
    let kmax = *meta
        .k_grid
        .last()
        .ok_or_else(|| CoreError::schema(path, 1, "run header has empty K grid"))?;

    let mut results = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: RunRow = serde_json::from_str(&line)
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        if row.k == kmax {
            results.push(QueryResult {
                cif_id: row.cif_id,
                interval: row.interval,
                total_relevant: row.total_relevant,
                entries: row.ranked,
            });
        }
    }
    Ok(RetrievalRun {
        aoi: meta.aoi,
        strategy: meta.strategy,
        k_grid: meta.k_grid,
        results,
        config_hash: meta.config_hash,
    })
}
