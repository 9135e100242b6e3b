//! Labeled synthetic-corpus construction: tagged generation output, the
//! impact taxonomy, timeline dispersal, noise mixing, facility-name
//! injection, and ground-truth overall-status derivation.

pub mod prompts;
pub mod taxonomy;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::cif_catalog::Cif;
use crate::error::{CoreError, CoreResult};

pub use prompts::{
    cif_slot, parse_generated_tweets, render_generation_prompt, render_status_label_prompt,
    ParsedGeneration, ParsedTweet,
};
pub use taxonomy::{
    consolidate_impact, normalize_label, parse_severity, parse_status_response,
    ConsolidatedImpact, IntervalSelector, OperationalStatus, Severity, TimeInterval,
    CONSOLIDATION_EXTENSIONS, CONSOLIDATION_TABLE, DEFAULT_IMPACT_PRECEDENCE,
};

/// A short message with its timeline slot, signal/noise flag, optional
/// facility linkage, and ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub text: String,
    pub cif_id: Option<String>,
    /// True for noise tweets that had a facility name injected.
    #[serde(default)]
    pub injected: bool,
    pub interval: TimeInterval,
    pub ordinal: u32,
    pub is_signal: bool,
    pub gt_raw_impact: String,
    pub gt_impact: ConsolidatedImpact,
    pub gt_severity: Severity,
    pub gt_status: OperationalStatus,
}

/// A signal tweet before timeline assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalDraft {
    pub id: String,
    pub cif_id: String,
    pub text: String,
    pub gt_raw_impact: String,
    pub gt_impact: ConsolidatedImpact,
    pub gt_severity: Severity,
    pub gt_status: OperationalStatus,
}

/// Corpus-level metadata, serialized as the header line of the corpus file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusMeta {
    pub aoi: String,
    pub seed: u64,
    pub signal_ratio_target: f64,
    pub injection_rate: f64,
    pub achieved_signal_ratio: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub meta: CorpusMeta,
    pub tweets: Vec<Tweet>,
}

impl Corpus {
    pub fn signal_count(&self) -> usize {
        self.tweets.iter().filter(|t| t.is_signal).count()
    }

    pub fn noise_count(&self) -> usize {
        self.tweets.len() - self.signal_count()
    }

    pub fn tweet_by_id(&self, id: &str) -> Option<&Tweet> {
        self.tweets.iter().find(|t| t.id == id)
    }
}

/// Timeline slot for one input tweet, produced by [`disperse_timeline`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineSlot {
    /// Index into the input list.
    pub input_index: usize,
    pub interval: TimeInterval,
    pub ordinal: u32,
}

/// A precedence order must cover all 22 impact classes exactly once.
pub fn validate_precedence(precedence: &[ConsolidatedImpact]) -> CoreResult<()> {
    let mut seen = std::collections::BTreeSet::new();
    for &label in precedence {
        if !seen.insert(label) {
            return Err(CoreError::Config(format!(
                "impact precedence lists {label} twice"
            )));
        }
    }
    for label in ConsolidatedImpact::ALL {
        if !seen.contains(&label) {
            return Err(CoreError::Config(format!(
                "impact precedence is missing {label}"
            )));
        }
    }
    Ok(())
}

/// Sort one facility's tweets by impact precedence (stable on input order)
/// and split them into four contiguous chunks as equal as possible, earlier
/// intervals taking the extra. Returned slots are in chronological order.
pub fn disperse_timeline(
    impacts: &[ConsolidatedImpact],
    precedence: &[ConsolidatedImpact],
) -> CoreResult<Vec<TimelineSlot>> {
    validate_precedence(precedence)?;
    let rank: BTreeMap<ConsolidatedImpact, usize> = precedence
        .iter()
        .enumerate()
        .map(|(i, &label)| (label, i))
        .collect();

    let mut order: Vec<usize> = (0..impacts.len()).collect();
    order.sort_by_key(|&i| (rank[&impacts[i]], i));

    let n = impacts.len();
    let base = n / 4;
    let extra = n % 4;
    let mut slots = Vec::with_capacity(n);
    let mut cursor = 0;
    for (chunk_idx, interval) in TimeInterval::ALL.into_iter().enumerate() {
        let size = base + usize::from(chunk_idx < extra);
        for ordinal in 0..size {
            slots.push(TimelineSlot {
                input_index: order[cursor],
                interval,
                ordinal: ordinal as u32,
            });
            cursor += 1;
        }
    }
    Ok(slots)
}

/// Signal tweets with their timeline slots already assigned, ready for
/// noise mixing. Produced per facility via [`disperse_timeline`].
#[derive(Debug, Clone)]
pub struct PlacedSignal {
    pub draft: SignalDraft,
    pub interval: TimeInterval,
}

/// Apply [`disperse_timeline`] to every facility's drafts, in catalog order.
pub fn place_signal(
    drafts: &[SignalDraft],
    cif_order: &[String],
    precedence: &[ConsolidatedImpact],
) -> CoreResult<Vec<PlacedSignal>> {
    let mut placed = Vec::with_capacity(drafts.len());
    for cif_id in cif_order {
        let for_cif: Vec<&SignalDraft> =
            drafts.iter().filter(|d| &d.cif_id == cif_id).collect();
        if for_cif.is_empty() {
            continue;
        }
        let impacts: Vec<ConsolidatedImpact> = for_cif.iter().map(|d| d.gt_impact).collect();
        let mut slots = disperse_timeline(&impacts, precedence)?;
        slots.sort_by_key(|s| (s.interval, s.ordinal));
        for slot in slots {
            placed.push(PlacedSignal {
                draft: for_cif[slot.input_index].clone(),
                interval: slot.interval,
            });
        }
    }
    let known: std::collections::BTreeSet<&String> = cif_order.iter().collect();
    if let Some(stray) = drafts.iter().find(|d| !known.contains(&d.cif_id)) {
        return Err(CoreError::Data(format!(
            "signal tweet {:?} references unknown CIF {:?}",
            stray.id, stray.cif_id
        )));
    }
    Ok(placed)
}

pub struct MixParams {
    pub aoi: String,
    pub target_ratio: f64,
    pub injection_rate: f64,
    pub seed: u64,
}

/// Mix noise-pool tweets into the placed signal at the target signal ratio.
/// Draws `min(pool, round(|S|·(1−r)/r))` noise texts without replacement,
/// assigns each a uniformly random interval, and renumbers ordinals per
/// interval corpus-wide. Noise ground truth is all-unknown.
pub fn mix_noise(
    signal: &[PlacedSignal],
    noise_pool: &[String],
    params: &MixParams,
) -> CoreResult<Corpus> {
    if signal.is_empty() {
        return Err(CoreError::Data(
            "cannot mix noise into an empty signal set (ratio undefined)".into(),
        ));
    }
    let r = params.target_ratio;
    if !(r > 0.0 && r < 1.0) {
        return Err(CoreError::Config(format!(
            "signal ratio must be in (0, 1), got {r}"
        )));
    }
    if let Some(bad) = noise_pool.iter().position(|t| t.trim().is_empty()) {
        return Err(CoreError::Data(format!(
            "noise pool entry {bad} is empty"
        )));
    }

    let needed = ((signal.len() as f64) * (1.0 - r) / r).round() as usize;
    let drawn = needed.min(noise_pool.len());
    let mut warnings = Vec::new();
    if drawn < needed {
        warnings.push(format!(
            "noise pool has {} texts but {} were needed for ratio {}; proceeding with {}",
            noise_pool.len(),
            needed,
            r,
            drawn
        ));
    }

    let mut rng = ChaCha12Rng::seed_from_u64(params.seed);
    let chosen = sample(&mut rng, noise_pool.len(), drawn);

    // Group tweets per interval: signal first (placement order), then noise
    // in draw order; ordinals then run 0.. within each interval.
    let mut per_interval: BTreeMap<TimeInterval, Vec<Tweet>> =
        TimeInterval::ALL.iter().map(|&i| (i, Vec::new())).collect();

    for placed in signal {
        let d = &placed.draft;
        per_interval.get_mut(&placed.interval).unwrap().push(Tweet {
            id: d.id.clone(),
            text: d.text.clone(),
            cif_id: Some(d.cif_id.clone()),
            injected: false,
            interval: placed.interval,
            ordinal: 0,
            is_signal: true,
            gt_raw_impact: d.gt_raw_impact.clone(),
            gt_impact: d.gt_impact,
            gt_severity: d.gt_severity,
            gt_status: d.gt_status,
        });
    }

    for (draw_idx, pool_idx) in chosen.into_iter().enumerate() {
        let interval = TimeInterval::ALL[rng.random_range(0..4)];
        per_interval.get_mut(&interval).unwrap().push(Tweet {
            id: format!("n-{draw_idx:06}"),
            text: noise_pool[pool_idx].clone(),
            cif_id: None,
            injected: false,
            interval,
            ordinal: 0,
            is_signal: false,
            gt_raw_impact: String::new(),
            gt_impact: ConsolidatedImpact::UnknownInapplicable,
            gt_severity: Severity::Unknown,
            gt_status: OperationalStatus::Unknown,
        });
    }

    let mut tweets = Vec::with_capacity(signal.len() + drawn);
    for interval in TimeInterval::ALL {
        let bucket = per_interval.remove(&interval).unwrap();
        for (ordinal, mut tweet) in bucket.into_iter().enumerate() {
            tweet.ordinal = ordinal as u32;
            tweets.push(tweet);
        }
    }

    let total = tweets.len();
    Ok(Corpus {
        meta: CorpusMeta {
            aoi: params.aoi.clone(),
            seed: params.seed,
            signal_ratio_target: r,
            injection_rate: params.injection_rate,
            achieved_signal_ratio: signal.len() as f64 / total as f64,
            warnings,
            config_hash: None,
        },
        tweets,
    })
}

/// Per interval, prepend a uniformly chosen facility name to exactly
/// `round(rate · noise-in-interval)` noise tweets. Injected tweets keep
/// their noise ground truth but record the facility linkage.
pub fn inject_cif_names(corpus: &mut Corpus, cifs: &[Cif], rate: f64, seed: u64) -> CoreResult<()> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(CoreError::Config(format!(
            "injection rate must be in [0, 1], got {rate}"
        )));
    }
    if rate == 0.0 || cifs.is_empty() {
        return Ok(());
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for interval in TimeInterval::ALL {
        let noise_idx: Vec<usize> = corpus
            .tweets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.interval == interval && !t.is_signal)
            .map(|(i, _)| i)
            .collect();
        let count = ((rate * noise_idx.len() as f64).round() as usize).min(noise_idx.len());
        if count == 0 {
            continue;
        }
        let mut picks: Vec<usize> = sample(&mut rng, noise_idx.len(), count).into_iter().collect();
        picks.sort_unstable();
        for pick in picks {
            let tweet = &mut corpus.tweets[noise_idx[pick]];
            let cif = &cifs[rng.random_range(0..cifs.len())];
            tweet.text = format!("{}: {}", cif.name, tweet.text);
            tweet.cif_id = Some(cif.id.clone());
            tweet.injected = true;
        }
    }
    Ok(())
}

/// Chronological overall status for one facility: the last tweet's status
/// through `up_to`, falling back to the last non-unknown status, else
/// unknown.
pub fn derive_overall_status_ground_truth(
    corpus: &Corpus,
    cif_id: &str,
    up_to: IntervalSelector,
) -> OperationalStatus {
    let bound = match up_to {
        IntervalSelector::Interval(i) => i,
        IntervalSelector::FullDay => TimeInterval::H18_24,
    };
    let mut tweets: Vec<&Tweet> = corpus
        .tweets
        .iter()
        .filter(|t| {
            t.is_signal
                && t.cif_id.as_deref() == Some(cif_id)
                && t.interval.code() <= bound.code()
        })
        .collect();
    tweets.sort_by_key(|t| (t.interval, t.ordinal));
    tweets
        .iter()
        .rev()
        .map(|t| t.gt_status)
        .find(|&s| s != OperationalStatus::Unknown)
        .unwrap_or(OperationalStatus::Unknown)
}

/// Write the corpus: a metadata header line then one tweet per line.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = serde_json::json!({ "corpus_meta": corpus.meta });
    writeln!(w, "{header}").map_err(|e| CoreError::io(path, e))?;
    for tweet in &corpus.tweets {
        let line = serde_json::to_string(tweet)
            .map_err(|e| CoreError::Data(format!("serializing tweet {:?}: {e}", tweet.id)))?;
        writeln!(w, "{line}").map_err(|e| CoreError::io(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

pub fn load_corpus(path: &Path) -> CoreResult<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let meta = match lines.next() {
        Some((_, Ok(line))) => {
            #[derive(Deserialize)]
            struct Header {
                corpus_meta: CorpusMeta,
            }
            let header: Header = serde_json::from_str(&line)
                .map_err(|e| CoreError::schema(path, 1, format!("corpus header: {e}")))?;
            header.corpus_meta
        }
        Some((_, Err(e))) => return Err(CoreError::io(path, e)),
        None => return Err(CoreError::schema(path, 1, "empty corpus file")),
    };

    let mut tweets = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let tweet: Tweet = serde_json::from_str(&line)
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        tweets.push(tweet);
    }
    Ok(Corpus { meta, tweets })
}

/// Load a noise pool: JSON-lines (bare strings or objects with a `text`
/// field) or plain text, one tweet per line.
pub fn load_noise_pool(path: &Path) -> CoreResult<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let text = match serde_json::from_str::<serde_json::Value>(trimmed) {
            Ok(serde_json::Value::String(s)) => s,
            Ok(serde_json::Value::Object(map)) => match map.get("text").and_then(|v| v.as_str()) {
                Some(s) => s.to_string(),
                None => trimmed.to_string(),
            },
            _ => trimmed.to_string(),
        };
        out.push(text);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn draft(id: &str, cif: &str, impact: ConsolidatedImpact, status: OperationalStatus) -> SignalDraft {
        SignalDraft {
            id: id.to_string(),
            cif_id: cif.to_string(),
            text: format!("text for {id}"),
            gt_raw_impact: impact.as_str().to_string(),
            gt_impact: impact,
            gt_severity: Severity::Moderate,
            gt_status: status,
        }
    }

    fn pool(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("noise text number {i}")).collect()
    }

    #[test]
    fn disperse_equal_split() {
        let impacts = vec![ConsolidatedImpact::Damaged; 8];
        let slots = disperse_timeline(&impacts, &DEFAULT_IMPACT_PRECEDENCE).unwrap();
        let mut sizes = BTreeMap::new();
        for s in &slots {
            *sizes.entry(s.interval).or_insert(0usize) += 1;
        }
        assert_eq!(
            sizes.values().copied().collect::<Vec<_>>(),
            vec![2, 2, 2, 2]
        );
    }

    #[test]
    fn disperse_remainder_to_front() {
        let impacts = vec![ConsolidatedImpact::Damaged; 6];
        let slots = disperse_timeline(&impacts, &DEFAULT_IMPACT_PRECEDENCE).unwrap();
        let mut sizes = BTreeMap::new();
        for s in &slots {
            *sizes.entry(s.interval).or_insert(0usize) += 1;
        }
        assert_eq!(
            sizes.values().copied().collect::<Vec<_>>(),
            vec![2, 2, 1, 1]
        );
    }

    #[test]
    fn disperse_orders_by_precedence() {
        let impacts = vec![
            ConsolidatedImpact::Damaged,
            ConsolidatedImpact::Destroyed,
            ConsolidatedImpact::Cracked,
        ];
        let slots = disperse_timeline(&impacts, &DEFAULT_IMPACT_PRECEDENCE).unwrap();
        let ordered: Vec<ConsolidatedImpact> =
            slots.iter().map(|s| impacts[s.input_index]).collect();
        assert_eq!(
            ordered,
            vec![
                ConsolidatedImpact::Destroyed,
                ConsolidatedImpact::Cracked,
                ConsolidatedImpact::Damaged,
            ]
        );
    }

    #[test]
    fn disperse_empty_input() {
        let slots = disperse_timeline(&[], &DEFAULT_IMPACT_PRECEDENCE).unwrap();
        assert!(slots.is_empty());
    }

    #[test]
    fn disperse_rejects_incomplete_precedence() {
        let err = disperse_timeline(&[ConsolidatedImpact::Damaged], &[ConsolidatedImpact::Damaged]);
        assert!(matches!(err, Err(CoreError::Config(_))));
    }

    fn mix(signal_n: usize, pool_n: usize, seed: u64) -> Corpus {
        let drafts: Vec<SignalDraft> = (0..signal_n)
            .map(|i| draft(&format!("s-{i}"), "cif-a", ConsolidatedImpact::Flooded, OperationalStatus::Open))
            .collect();
        let placed = place_signal(&drafts, &["cif-a".to_string()], &DEFAULT_IMPACT_PRECEDENCE).unwrap();
        mix_noise(
            &placed,
            &pool(pool_n),
            &MixParams {
                aoi: "Christchurch".to_string(),
                target_ratio: 0.02,
                injection_rate: 0.08,
                seed,
            },
        )
        .unwrap()
    }

    #[test]
    fn mix_noise_single_signal_draws_49() {
        let corpus = mix(1, 200, 7);
        assert_eq!(corpus.signal_count(), 1);
        assert_eq!(corpus.noise_count(), 49);
    }

    #[test]
    fn mix_noise_draws_forty_nine_per_signal_at_two_percent() {
        // 728 signal at a 2% target wants round(728 * 49) = 35,672 noise.
        let corpus = mix(728, 40_000, 0);
        assert_eq!(corpus.noise_count(), 35_672);
        assert_eq!(corpus.tweets.len(), 36_400);
        assert_eq!(corpus.meta.achieved_signal_ratio, 0.02);
    }

    #[test]
    fn mix_noise_pool_bound_warns() {
        let drafts: Vec<SignalDraft> = (0..10)
            .map(|i| draft(&format!("s-{i}"), "cif-a", ConsolidatedImpact::Flooded, OperationalStatus::Open))
            .collect();
        let placed = place_signal(&drafts, &["cif-a".to_string()], &DEFAULT_IMPACT_PRECEDENCE).unwrap();
        let corpus = mix_noise(
            &placed,
            &pool(5),
            &MixParams {
                aoi: "Christchurch".to_string(),
                target_ratio: 0.02,
                injection_rate: 0.08,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(corpus.noise_count(), 5);
        assert_eq!(corpus.meta.warnings.len(), 1);
    }

    #[test]
    fn mix_noise_empty_signal_is_error() {
        let err = mix_noise(
            &[],
            &pool(10),
            &MixParams {
                aoi: "x".to_string(),
                target_ratio: 0.02,
                injection_rate: 0.08,
                seed: 0,
            },
        );
        assert!(matches!(err, Err(CoreError::Data(_))));
    }

    #[test]
    fn mix_noise_is_seed_deterministic() {
        let a = mix(4, 500, 42);
        let b = mix(4, 500, 42);
        let c = mix(4, 500, 43);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn ordinals_unique_per_interval() {
        let corpus = mix(4, 500, 1);
        let mut seen = std::collections::BTreeSet::new();
        for t in &corpus.tweets {
            assert!(seen.insert((t.interval, t.ordinal)), "duplicate slot");
        }
    }

    #[test]
    fn injection_counts_exact_per_interval() {
        let mut corpus = mix(8, 600, 3);
        let cifs = vec![Cif {
            id: "cif-a".to_string(),
            name: "Christchurch Hospital".to_string(),
            address: String::new(),
            lat: None,
            lon: None,
            category: crate::cif_catalog::CifCategory::Medical,
            aoi: "Christchurch".to_string(),
        }];
        let noise_per_interval: BTreeMap<TimeInterval, usize> = TimeInterval::ALL
            .iter()
            .map(|&i| {
                (
                    i,
                    corpus
                        .tweets
                        .iter()
                        .filter(|t| t.interval == i && !t.is_signal)
                        .count(),
                )
            })
            .collect();
        inject_cif_names(&mut corpus, &cifs, 0.08, 9).unwrap();
        for interval in TimeInterval::ALL {
            let injected = corpus
                .tweets
                .iter()
                .filter(|t| t.interval == interval && t.injected)
                .count();
            let expected = (0.08 * noise_per_interval[&interval] as f64).round() as usize;
            assert_eq!(injected, expected, "interval {interval}");
        }
        // Injected tweets keep noise ground truth but gain a facility link.
        for t in corpus.tweets.iter().filter(|t| t.injected) {
            assert!(!t.is_signal);
            assert_eq!(t.gt_impact, ConsolidatedImpact::UnknownInapplicable);
            assert_eq!(t.cif_id.as_deref(), Some("cif-a"));
            assert!(t.text.starts_with("Christchurch Hospital: "));
        }
    }

    #[test]
    fn injection_rate_zero_is_identity() {
        let mut corpus = mix(4, 300, 5);
        let before = corpus.clone();
        inject_cif_names(&mut corpus, &[], 0.0, 1).unwrap();
        assert_eq!(corpus, before);
    }

    #[test]
    fn ground_truth_status_walks_backward() {
        let mut corpus = mix(3, 200, 11);
        // Overwrite the three signal tweets' statuses chronologically.
        let mut signal_slots: Vec<usize> = corpus
            .tweets
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_signal)
            .map(|(i, _)| i)
            .collect();
        signal_slots.sort_by_key(|&i| (corpus.tweets[i].interval, corpus.tweets[i].ordinal));
        let statuses = [
            OperationalStatus::Open,
            OperationalStatus::Unknown,
            OperationalStatus::Closed,
        ];
        for (&slot, &status) in signal_slots.iter().zip(statuses.iter()) {
            corpus.tweets[slot].gt_status = status;
        }
        assert_eq!(
            derive_overall_status_ground_truth(&corpus, "cif-a", IntervalSelector::FullDay),
            OperationalStatus::Closed
        );

        let statuses = [
            OperationalStatus::Closed,
            OperationalStatus::Unknown,
            OperationalStatus::Unknown,
        ];
        for (&slot, &status) in signal_slots.iter().zip(statuses.iter()) {
            corpus.tweets[slot].gt_status = status;
        }
        assert_eq!(
            derive_overall_status_ground_truth(&corpus, "cif-a", IntervalSelector::FullDay),
            OperationalStatus::Closed
        );

        assert_eq!(
            derive_overall_status_ground_truth(&corpus, "no-such-cif", IntervalSelector::FullDay),
            OperationalStatus::Unknown
        );
    }

    #[test]
    fn corpus_round_trip() {
        let corpus = mix(4, 300, 21);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        save_corpus(&corpus, &path).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded, corpus);
    }

    #[test]
    fn corpus_load_rejects_missing_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "{\"id\":\"x\"}\n").unwrap();
        assert!(matches!(
            load_corpus(&path),
            Err(CoreError::Schema { line: 1, .. })
        ));
    }

    #[test]
    fn noise_pool_accepts_all_three_forms() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.jsonl");
        std::fs::write(
            &path,
            "plain text line\n\"a json string line\"\n{\"text\": \"an object line\", \"ts\": 1}\n",
        )
        .unwrap();
        let pool = load_noise_pool(&path).unwrap();
        assert_eq!(
            pool,
            vec![
                "plain text line".to_string(),
                "a json string line".to_string(),
                "an object line".to_string(),
            ]
        );
    }
}
