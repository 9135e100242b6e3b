//! Staged experiment orchestration: one config file, seeded determinism,
//! resumable file artifacts between stages, and structured reports.

pub mod report;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cif_catalog::{load_catalog, AreaOfInterest, Cif, DisasterKind};
use crate::embed_index::{
    index_corpus, load_index, save_index, EmbeddingProvider, HashEmbedder, RemoteEmbedder,
    VectorIndex,
};
use crate::error::{CoreError, CoreResult};
use crate::hashing::{fnv1a64, hex64};
use crate::llm_gateway::{build_backend, BackendDescriptor, GenerationRequest, TextGenerator};
use crate::metrics::{ApConfig, ApMode};
use crate::retrieval::{
    load_run, run_retrieval, save_run, validate_k_grid, QueryStrategy, RetrievalRun,
};
use crate::synth_corpus::{
    consolidate_impact, inject_cif_names, load_corpus, load_noise_pool, mix_noise,
    parse_generated_tweets, parse_severity, parse_status_response, place_signal, prompts,
    save_corpus, validate_precedence, ConsolidatedImpact, Corpus, IntervalSelector, MixParams,
    OperationalStatus, SignalDraft, DEFAULT_IMPACT_PRECEDENCE,
};
use crate::zeroshot_classifier::{
    classify_impact_severity, classify_operational_status, infer_overall_status,
    load_overall_status, load_predictions, save_overall_status, save_predictions,
    OverallStatusPrediction, TweetPrediction,
};

pub use report::{emit_reports, evaluate, ExperimentReport};

pub const ENV_LLM_ENDPOINT: &str = "CIFWATCH_LLM_ENDPOINT";
pub const ENV_LLM_MODEL: &str = "CIFWATCH_LLM_MODEL";
pub const ENV_EMBED_ENDPOINT: &str = "CIFWATCH_EMBED_ENDPOINT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AoiConfig {
    pub name: String,
    pub disaster_kind: DisasterKind,
    /// Empty means: use the shipped term set for a built-in AOI.
    #[serde(default)]
    pub impact_terms: Vec<String>,
    /// Dispersal precedence override; default order when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precedence: Option<Vec<ConsolidatedImpact>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathsConfig {
    pub catalog: PathBuf,
    pub noise_pool: PathBuf,
    pub corpus: PathBuf,
    pub index: PathBuf,
    pub runs: PathBuf,
    pub reports: PathBuf,
    /// Optional overrides; derived from the corpus directory when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictions: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overall_status: Option<PathBuf>,
}

impl PathsConfig {
    fn work_dir(&self) -> PathBuf {
        self.corpus
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn signal_raw(&self) -> PathBuf {
        self.work_dir().join("signal_raw.jsonl")
    }

    pub fn signal_labeled(&self) -> PathBuf {
        self.work_dir().join("signal_labeled.jsonl")
    }

    pub fn predictions(&self) -> PathBuf {
        self.predictions
            .clone()
            .unwrap_or_else(|| self.work_dir().join("predictions.jsonl"))
    }

    pub fn overall_status(&self) -> PathBuf {
        self.overall_status
            .clone()
            .unwrap_or_else(|| self.work_dir().join("overall_status.jsonl"))
    }

    pub fn index_meta(&self) -> PathBuf {
        let mut name = self
            .index
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "index".to_string());
        name.push_str(".meta.json");
        self.index.with_file_name(name)
    }

    pub fn run_file(&self, strategy: QueryStrategy) -> PathBuf {
        let token = strategy.as_str().replace('+', "_");
        self.runs.join(format!("run_{token}.jsonl"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDescriptor {
    pub kind: EmbeddingKind,
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
}

impl EmbeddingDescriptor {
    pub fn validate(&self) -> CoreResult<()> {
        match self.kind {
            EmbeddingKind::Mock => {
                if self.dim < 8 {
                    return Err(CoreError::Config(format!(
                        "mock embedding dim must be at least 8, got {}",
                        self.dim
                    )));
                }
            }
            EmbeddingKind::Remote => {
                if self.endpoint.as_deref().unwrap_or("").is_empty() {
                    return Err(CoreError::Config(
                        "remote embedding requires an endpoint".into(),
                    ));
                }
                if self.dim == 0 {
                    return Err(CoreError::Config("remote embedding dim must be set".into()));
                }
            }
        }
        Ok(())
    }

    pub fn provider(&self) -> CoreResult<Box<dyn EmbeddingProvider>> {
        self.validate()?;
        match self.kind {
            EmbeddingKind::Mock => Ok(Box::new(HashEmbedder::new(self.dim, self.seed)?)),
            EmbeddingKind::Remote => Ok(Box::new(RemoteEmbedder::new(
                self.endpoint.clone().unwrap(),
                self.model.clone().unwrap_or_default(),
                self.dim,
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendsConfig {
    pub generation: BackendDescriptor,
    pub classification: BackendDescriptor,
    pub embedding: EmbeddingDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusParams {
    #[serde(default = "default_signal_ratio")]
    pub signal_ratio: f64,
    #[serde(default = "default_injection_rate")]
    pub injection_rate: f64,
    pub seed: u64,
}

fn default_signal_ratio() -> f64 {
    0.02
}

fn default_injection_rate() -> f64 {
    0.08
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalParams {
    #[serde(default = "default_strategies")]
    pub strategies: Vec<QueryStrategy>,
    #[serde(default = "crate::retrieval::default_k_grid")]
    pub k_grid: Vec<usize>,
}

fn default_strategies() -> Vec<QueryStrategy> {
    QueryStrategy::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsParams {
    #[serde(default = "default_ap_mode")]
    pub ap_mode: ApMode,
    #[serde(default = "default_ap_step")]
    pub step: usize,
}

fn default_ap_mode() -> ApMode {
    ApMode::StepSampled
}

fn default_ap_step() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub aoi: AoiConfig,
    pub paths: PathsConfig,
    pub backends: BackendsConfig,
    pub corpus: CorpusParams,
    pub retrieval: RetrievalParams,
    pub metrics: MetricsParams,
}

impl PipelineConfig {
    /// Parse a config file; relative paths resolve against the config file's
    /// directory, and `CIFWATCH_*` environment variables override backend
    /// endpoints and model names.
    pub fn load(path: &Path) -> CoreResult<PipelineConfig> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CoreError::Config(format!("reading {}: {e}", path.display())))?;
        let mut config: PipelineConfig = serde_json::from_str(&body)
            .map_err(|e| CoreError::Config(format!("parsing {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        config.resolve_paths(base);
        config.apply_env_overrides();
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        resolve(&mut self.paths.catalog);
        resolve(&mut self.paths.noise_pool);
        resolve(&mut self.paths.corpus);
        resolve(&mut self.paths.index);
        resolve(&mut self.paths.runs);
        resolve(&mut self.paths.reports);
        if let Some(p) = self.paths.predictions.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.paths.overall_status.as_mut() {
            resolve(p);
        }
        for descriptor in [
            &mut self.backends.generation,
            &mut self.backends.classification,
        ] {
            if let Some(fixtures) = descriptor.fixtures.as_mut() {
                if fixtures.is_relative() {
                    *fixtures = base.join(&*fixtures);
                }
            }
        }
    }

    fn apply_env_overrides(&mut self) {
        if let Ok(endpoint) = std::env::var(ENV_LLM_ENDPOINT) {
            self.backends.generation.endpoint = Some(endpoint.clone());
            self.backends.classification.endpoint = Some(endpoint);
        }
        if let Ok(model) = std::env::var(ENV_LLM_MODEL) {
            self.backends.generation.model = Some(model.clone());
            self.backends.classification.model = Some(model);
        }
        if let Ok(endpoint) = std::env::var(ENV_EMBED_ENDPOINT) {
            self.backends.embedding.endpoint = Some(endpoint);
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        self.effective_aoi()?.validate()?;
        self.backends.generation.validate()?;
        self.backends.classification.validate()?;
        self.backends.embedding.validate()?;
        if !(self.corpus.signal_ratio > 0.0 && self.corpus.signal_ratio < 1.0) {
            return Err(CoreError::Config(format!(
                "signal_ratio must be in (0, 1), got {}",
                self.corpus.signal_ratio
            )));
        }
        if !(0.0..=1.0).contains(&self.corpus.injection_rate) {
            return Err(CoreError::Config(format!(
                "injection_rate must be in [0, 1], got {}",
                self.corpus.injection_rate
            )));
        }
        if self.retrieval.strategies.is_empty() {
            return Err(CoreError::Config("at least one query strategy required".into()));
        }
        validate_k_grid(&self.retrieval.k_grid, self.metrics.step)?;
        validate_precedence(self.precedence())?;
        Ok(())
    }

    pub fn effective_aoi(&self) -> CoreResult<AreaOfInterest> {
        let terms = if self.aoi.impact_terms.is_empty() {
            AreaOfInterest::builtin(&self.aoi.name)
                .map(|aoi| aoi.impact_terms)
                .ok_or_else(|| {
                    CoreError::Config(format!(
                        "AOI {:?} is not built in; impact_terms must be listed",
                        self.aoi.name
                    ))
                })?
        } else {
            self.aoi.impact_terms.clone()
        };
        Ok(AreaOfInterest {
            name: self.aoi.name.clone(),
            disaster_kind: self.aoi.disaster_kind,
            impact_terms: terms,
        })
    }

    pub fn precedence(&self) -> &[ConsolidatedImpact] {
        self.aoi
            .precedence
            .as_deref()
            .unwrap_or(&DEFAULT_IMPACT_PRECEDENCE)
    }

    /// The strategy whose retrieved tweets feed classification and overall
    /// status (the best-performing query form, when configured).
    pub fn default_strategy(&self) -> QueryStrategy {
        if self
            .retrieval
            .strategies
            .contains(&QueryStrategy::CifPlusPhrase)
        {
            QueryStrategy::CifPlusPhrase
        } else {
            self.retrieval.strategies[0]
        }
    }

    pub fn ap_config(&self, k: usize) -> ApConfig {
        ApConfig {
            step: self.metrics.step,
            mode: self.metrics.ap_mode,
            k,
        }
    }

    /// Fingerprint of the semantic parameters (not paths or endpoints);
    /// artifacts carry it so stages refuse mixed inputs.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::json!({
            "aoi": self.aoi,
            "backend_generation": {
                "kind": self.backends.generation.kind,
                "model": self.backends.generation.model,
            },
            "backend_classification": {
                "kind": self.backends.classification.kind,
                "model": self.backends.classification.model,
            },
            "embedding": {
                "kind": self.backends.embedding.kind,
                "dim": self.backends.embedding.dim,
                "seed": self.backends.embedding.seed,
                "model": self.backends.embedding.model,
            },
            "corpus": self.corpus,
            "retrieval": self.retrieval,
            "metrics": self.metrics,
        });
        hex64(fnv1a64(canonical.to_string().as_bytes()))
    }
}

/// Planned experiment shape, derivable without running anything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub aoi: String,
    pub cif_count: usize,
    pub strategies: Vec<QueryStrategy>,
    pub interval_selectors: usize,
    /// cif_count × interval selectors, per strategy.
    pub query_slots_per_strategy: usize,
    pub k_grid: Vec<usize>,
}

/// Validate the config and compute the experiment shape from the catalog.
pub fn plan(config: &PipelineConfig) -> CoreResult<PlanSummary> {
    config.validate()?;
    let catalog = load_catalog(&config.paths.catalog)?;
    let catalog: Vec<Cif> = catalog
        .into_iter()
        .filter(|c| c.aoi == config.aoi.name)
        .collect();
    Ok(PlanSummary {
        aoi: config.aoi.name.clone(),
        cif_count: catalog.len(),
        strategies: config.retrieval.strategies.clone(),
        interval_selectors: IntervalSelector::ALL.len(),
        query_slots_per_strategy: catalog.len() * IntervalSelector::ALL.len(),
        k_grid: config.retrieval.k_grid.clone(),
    })
}

fn stage_err(stage: &str, artifact: &Path, e: CoreError) -> CoreError {
    match e {
        CoreError::Config(msg) => CoreError::Config(format!(
            "stage {stage} ({}): {msg}",
            artifact.display()
        )),
        CoreError::Data(msg) => CoreError::Data(format!(
            "stage {stage} ({}): {msg}",
            artifact.display()
        )),
        other => other,
    }
}

fn check_hash(stage: &str, path: &Path, found: Option<&str>, expected: &str) -> CoreResult<()> {
    match found {
        Some(hash) if hash == expected => Ok(()),
        Some(hash) => Err(CoreError::Config(format!(
            "stage {stage}: artifact {} was built with config hash {hash}, current config is {expected}",
            path.display()
        ))),
        None => Err(CoreError::Config(format!(
            "stage {stage}: artifact {} carries no config hash",
            path.display()
        ))),
    }
}

// ─── Stage: catalog ─────────────────────────────────────────────────────────

/// Load the catalog input and restrict it to the configured AOI.
pub fn stage_catalog(config: &PipelineConfig) -> CoreResult<Vec<Cif>> {
    let catalog = load_catalog(&config.paths.catalog)?;
    let filtered: Vec<Cif> = catalog
        .into_iter()
        .filter(|c| c.aoi == config.aoi.name)
        .collect();
    if filtered.is_empty() {
        return Err(CoreError::Data(format!(
            "catalog {} holds no facilities for AOI {:?}",
            config.paths.catalog.display(),
            config.aoi.name
        )));
    }
    Ok(filtered)
}

// ─── Stage: generate ────────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct SignalFileHeader {
    signal_meta: SignalFileMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct SignalFileMeta {
    config_hash: String,
    stage: String,
    #[serde(default)]
    rejects: Vec<String>,
}

fn save_drafts(
    drafts: &[SignalDraft],
    rejects: &[String],
    stage: &str,
    config_hash: &str,
    path: &Path,
) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = SignalFileHeader {
        signal_meta: SignalFileMeta {
            config_hash: config_hash.to_string(),
            stage: stage.to_string(),
            rejects: rejects.to_vec(),
        },
    };
    writeln!(w, "{}", serde_json::to_string(&header).unwrap()).map_err(|e| CoreError::io(path, e))?;
    for draft in drafts {
        writeln!(w, "{}", serde_json::to_string(draft).unwrap())
            .map_err(|e| CoreError::io(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

fn load_drafts(path: &Path) -> CoreResult<(SignalFileMeta, Vec<SignalDraft>)> {
    use std::io::BufRead;
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = std::io::BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let meta = match lines.next() {
        Some((_, Ok(line))) => {
            let header: SignalFileHeader = serde_json::from_str(&line)
                .map_err(|e| CoreError::schema(path, 1, format!("signal header: {e}")))?;
            header.signal_meta
        }
        Some((_, Err(e))) => return Err(CoreError::io(path, e)),
        None => return Err(CoreError::schema(path, 1, "empty signal file")),
    };
    let mut drafts = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let draft: SignalDraft = serde_json::from_str(&line)
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        drafts.push(draft);
    }
    Ok((meta, drafts))
}

/// Generate tagged signal tweets for every facility through the generation
/// backend, parse them, and consolidate their labels. Unparseable blocks are
/// kept as rejects in the artifact header.
pub fn stage_generate(
    config: &PipelineConfig,
    catalog: &[Cif],
    backend: &dyn TextGenerator,
) -> CoreResult<Vec<SignalDraft>> {
    let aoi = config.effective_aoi()?;
    let mut drafts = Vec::new();
    let mut rejects = Vec::new();
    for cif in catalog {
        let prompt = prompts::render_generation_prompt(cif, &aoi);
        let response = backend.generate(&GenerationRequest::generation(prompt))?;
        let parsed = parse_generated_tweets(&response);
        for (j, tweet) in parsed.tweets.iter().enumerate() {
            drafts.push(SignalDraft {
                id: format!("s-{}-{j:02}", cif.id),
                cif_id: cif.id.clone(),
                text: tweet.text.clone(),
                gt_raw_impact: tweet.raw_impact.clone(),
                gt_impact: consolidate_impact(&tweet.raw_impact),
                gt_severity: parse_severity(&tweet.raw_severity),
                gt_status: OperationalStatus::Unknown,
            });
        }
        rejects.extend(parsed.rejects);
    }
    let path = config.paths.signal_raw();
    save_drafts(&drafts, &rejects, "generate", &config.config_hash(), &path)
        .map_err(|e| stage_err("generate", &path, e))?;
    Ok(drafts)
}

// ─── Stage: label-status ────────────────────────────────────────────────────

/// Assign a ground-truth operational status to every signal tweet via the
/// generation-side backend.
pub fn stage_label_status(
    config: &PipelineConfig,
    drafts: &[SignalDraft],
    backend: &dyn TextGenerator,
) -> CoreResult<Vec<SignalDraft>> {
    let mut labeled = Vec::with_capacity(drafts.len());
    for draft in drafts {
        let prompt = prompts::render_status_label_prompt(&draft.text);
        let response = backend.generate(&GenerationRequest::classification(prompt))?;
        let mut updated = draft.clone();
        updated.gt_status = parse_status_response(&response);
        labeled.push(updated);
    }
    let path = config.paths.signal_labeled();
    save_drafts(&labeled, &[], "label-status", &config.config_hash(), &path)
        .map_err(|e| stage_err("label-status", &path, e))?;
    Ok(labeled)
}

pub fn load_signal_raw(config: &PipelineConfig) -> CoreResult<Vec<SignalDraft>> {
    let path = config.paths.signal_raw();
    let (meta, drafts) = load_drafts(&path)?;
    check_hash("label-status", &path, Some(&meta.config_hash), &config.config_hash())?;
    Ok(drafts)
}

pub fn load_signal_labeled(config: &PipelineConfig) -> CoreResult<Vec<SignalDraft>> {
    let path = config.paths.signal_labeled();
    let (meta, drafts) = load_drafts(&path)?;
    check_hash("build-timeline", &path, Some(&meta.config_hash), &config.config_hash())?;
    Ok(drafts)
}

// ─── Stage: build-timeline ──────────────────────────────────────────────────

/// Disperse signal tweets over the four intervals, mix in noise at the
/// target ratio, and inject facility names into noise.
pub fn stage_build_timeline(
    config: &PipelineConfig,
    catalog: &[Cif],
    labeled: &[SignalDraft],
) -> CoreResult<Corpus> {
    let cif_order: Vec<String> = catalog.iter().map(|c| c.id.clone()).collect();
    let placed = place_signal(labeled, &cif_order, config.precedence())?;
    let pool = load_noise_pool(&config.paths.noise_pool)?;
    let mut corpus = mix_noise(
        &placed,
        &pool,
        &MixParams {
            aoi: config.aoi.name.clone(),
            target_ratio: config.corpus.signal_ratio,
            injection_rate: config.corpus.injection_rate,
            seed: config.corpus.seed,
        },
    )?;
    inject_cif_names(&mut corpus, catalog, config.corpus.injection_rate, config.corpus.seed)?;
    corpus.meta.config_hash = Some(config.config_hash());
    save_corpus(&corpus, &config.paths.corpus)
        .map_err(|e| stage_err("build-timeline", &config.paths.corpus, e))?;
    Ok(corpus)
}

pub fn load_corpus_checked(config: &PipelineConfig, stage: &str) -> CoreResult<Corpus> {
    let corpus = load_corpus(&config.paths.corpus)?;
    check_hash(
        stage,
        &config.paths.corpus,
        corpus.meta.config_hash.as_deref(),
        &config.config_hash(),
    )?;
    Ok(corpus)
}

// ─── Stage: index ───────────────────────────────────────────────────────────

#[derive(Debug, Serialize, Deserialize)]
struct IndexMeta {
    config_hash: String,
    dim: u32,
    count: u64,
}

/// Embed the whole corpus and persist the index plus its sidecar metadata.
pub fn stage_index(config: &PipelineConfig, corpus: &Corpus) -> CoreResult<VectorIndex> {
    let provider = config.backends.embedding.provider()?;
    let index = index_corpus(corpus, provider.as_ref())?;
    save_index(&index, &config.paths.index)?;
    let meta = IndexMeta {
        config_hash: config.config_hash(),
        dim: index.dim(),
        count: index.len() as u64,
    };
    let meta_path = config.paths.index_meta();
    std::fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).unwrap() + "\n",
    )
    .map_err(|e| CoreError::io(&meta_path, e))?;
    Ok(index)
}

pub fn load_index_checked(config: &PipelineConfig, stage: &str) -> CoreResult<VectorIndex> {
    let meta_path = config.paths.index_meta();
    let body = std::fs::read_to_string(&meta_path).map_err(|e| CoreError::io(&meta_path, e))?;
    let meta: IndexMeta = serde_json::from_str(&body)
        .map_err(|e| CoreError::schema(&meta_path, 1, e.to_string()))?;
    check_hash(stage, &config.paths.index, Some(&meta.config_hash), &config.config_hash())?;
    load_index(&config.paths.index)
}

// ─── Stage: retrieve ────────────────────────────────────────────────────────

/// Run every configured strategy over the catalog and persist one run file
/// per strategy.
pub fn stage_retrieve(
    config: &PipelineConfig,
    catalog: &[Cif],
    corpus: &Corpus,
    index: &VectorIndex,
) -> CoreResult<Vec<RetrievalRun>> {
    let aoi = config.effective_aoi()?;
    let provider = config.backends.embedding.provider()?;
    let mut runs = Vec::new();
    for &strategy in &config.retrieval.strategies {
        let mut run = run_retrieval(
            index,
            catalog,
            corpus,
            strategy,
            provider.as_ref(),
            &aoi,
            &config.retrieval.k_grid,
            &IntervalSelector::ALL,
        )?;
        run.config_hash = Some(config.config_hash());
        let path = config.paths.run_file(strategy);
        save_run(&run, &path).map_err(|e| stage_err("retrieve", &path, e))?;
        runs.push(run);
    }
    Ok(runs)
}

pub fn load_runs_checked(config: &PipelineConfig, stage: &str) -> CoreResult<Vec<RetrievalRun>> {
    let mut runs = Vec::new();
    for &strategy in &config.retrieval.strategies {
        let path = config.paths.run_file(strategy);
        let run = load_run(&path)?;
        check_hash(stage, &path, run.config_hash.as_deref(), &config.config_hash())?;
        runs.push(run);
    }
    Ok(runs)
}

// ─── Stage: classify ────────────────────────────────────────────────────────

/// Pick the run feeding classification and overall status (the default
/// strategy's).
pub fn default_run<'a>(
    config: &PipelineConfig,
    runs: &'a [RetrievalRun],
) -> CoreResult<&'a RetrievalRun> {
    let strategy = config.default_strategy();
    runs.iter()
        .find(|r| r.strategy == strategy)
        .ok_or_else(|| CoreError::Data(format!("no retrieval run for default strategy {strategy}")))
}

/// Tweets to classify: every signal tweet plus everything the run
/// retrieved at the largest K, deduplicated and id-sorted.
pub fn classification_targets(corpus: &Corpus, run: &RetrievalRun) -> Vec<String> {
    let mut ids: BTreeSet<String> = corpus
        .tweets
        .iter()
        .filter(|t| t.is_signal)
        .map(|t| t.id.clone())
        .collect();
    for result in &run.results {
        for entry in &result.entries {
            ids.insert(entry.tweet_id.clone());
        }
    }
    ids.into_iter().collect()
}

/// Classify impact, severity, and per-tweet status for every target tweet.
pub fn stage_classify(
    config: &PipelineConfig,
    corpus: &Corpus,
    run: &RetrievalRun,
    backend: &dyn TextGenerator,
) -> CoreResult<Vec<TweetPrediction>> {
    let targets = classification_targets(corpus, run);
    let mut predictions = Vec::with_capacity(targets.len());
    for id in &targets {
        let tweet = corpus
            .tweet_by_id(id)
            .ok_or_else(|| CoreError::Data(format!("target tweet {id:?} not in corpus")))?;
        let impact_severity = classify_impact_severity(&tweet.text, backend)?;
        let status = classify_operational_status(&tweet.text, backend)?;
        predictions.push(TweetPrediction {
            tweet_id: id.clone(),
            raw_model_impact: impact_severity.raw_model_impact,
            impact: impact_severity.impact,
            severity: impact_severity.severity,
            status,
        });
    }
    let path = config.paths.predictions();
    save_predictions(&predictions, Some(&config.config_hash()), &path)
        .map_err(|e| stage_err("classify", &path, e))?;
    Ok(predictions)
}

pub fn load_predictions_checked(
    config: &PipelineConfig,
    stage: &str,
) -> CoreResult<Vec<TweetPrediction>> {
    let path = config.paths.predictions();
    let (hash, predictions) = load_predictions(&path)?;
    check_hash(stage, &path, hash.as_deref(), &config.config_hash())?;
    Ok(predictions)
}

// ─── Stage: status ──────────────────────────────────────────────────────────

/// Evidence for overall-status inference: the default strategy's retrieved
/// tweets (retrieval order) whose predicted impact is not
/// unknown/inapplicable.
pub fn overall_status_evidence(
    corpus: &Corpus,
    run: &RetrievalRun,
    predictions: &[TweetPrediction],
    cif_id: &str,
    selector: IntervalSelector,
) -> CoreResult<Vec<(String, String)>> {
    let predicted: std::collections::BTreeMap<&str, &TweetPrediction> = predictions
        .iter()
        .map(|p| (p.tweet_id.as_str(), p))
        .collect();
    let result = run
        .results
        .iter()
        .find(|r| r.cif_id == cif_id && r.interval == selector)
        .ok_or_else(|| {
            CoreError::Data(format!(
                "run has no result for (cif {cif_id:?}, interval {selector})"
            ))
        })?;
    let mut evidence = Vec::new();
    for entry in &result.entries {
        let prediction = predicted.get(entry.tweet_id.as_str()).ok_or_else(|| {
            CoreError::Data(format!(
                "retrieved tweet {:?} has no classification prediction",
                entry.tweet_id
            ))
        })?;
        if prediction.impact != ConsolidatedImpact::UnknownInapplicable {
            let tweet = corpus.tweet_by_id(&entry.tweet_id).ok_or_else(|| {
                CoreError::Data(format!("tweet {:?} not in corpus", entry.tweet_id))
            })?;
            evidence.push((tweet.id.clone(), tweet.text.clone()));
        }
    }
    Ok(evidence)
}

/// Infer the overall status per (facility, interval selector) from
/// impact-bearing retrieved tweets.
pub fn stage_status(
    config: &PipelineConfig,
    catalog: &[Cif],
    corpus: &Corpus,
    run: &RetrievalRun,
    predictions: &[TweetPrediction],
    backend: &dyn TextGenerator,
) -> CoreResult<Vec<OverallStatusPrediction>> {
    let mut out = Vec::new();
    for cif in catalog {
        for selector in IntervalSelector::ALL {
            let evidence =
                overall_status_evidence(corpus, run, predictions, &cif.id, selector)?;
            let prediction =
                infer_overall_status(&cif.id, &cif.name, selector, &evidence, backend)?;
            out.push(prediction);
        }
    }
    let path = config.paths.overall_status();
    save_overall_status(&out, Some(&config.config_hash()), &path)
        .map_err(|e| stage_err("status", &path, e))?;
    Ok(out)
}

pub fn load_overall_status_checked(
    config: &PipelineConfig,
    stage: &str,
) -> CoreResult<Vec<OverallStatusPrediction>> {
    let path = config.paths.overall_status();
    let (hash, predictions) = load_overall_status(&path)?;
    check_hash(stage, &path, hash.as_deref(), &config.config_hash())?;
    Ok(predictions)
}

// ─── run-all ────────────────────────────────────────────────────────────────

/// Execute every stage in order, writing each artifact along the way, and
/// return the final report. With mock backends and a fixed seed the entire
/// run is byte-deterministic.
pub fn run_all(config: &PipelineConfig) -> CoreResult<ExperimentReport> {
    config.validate()?;
    let generation = build_backend(&config.backends.generation)?;
    let classification = build_backend(&config.backends.classification)?;

    let catalog = stage_catalog(config)?;
    let drafts = stage_generate(config, &catalog, generation.as_ref())?;
    let labeled = stage_label_status(config, &drafts, generation.as_ref())?;
    let corpus = stage_build_timeline(config, &catalog, &labeled)?;
    let index = stage_index(config, &corpus)?;
    let runs = stage_retrieve(config, &catalog, &corpus, &index)?;
    let feed = default_run(config, &runs)?;
    let predictions = stage_classify(config, &corpus, feed, classification.as_ref())?;
    let overall = stage_status(config, &catalog, &corpus, feed, &predictions, classification.as_ref())?;

    let report = evaluate(config, &catalog, &corpus, &runs, &predictions, &overall)?;
    emit_reports(&report, &config.paths.reports)?;
    Ok(report)
}
