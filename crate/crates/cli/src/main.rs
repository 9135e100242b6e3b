//! `cifwatch`: staged pipeline for monitoring critical infrastructure
//! facilities from short social-media messages.

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use cifwatch_core::cif_catalog::{
    fetch_cifs, save_catalog, AreaOfInterest, CatalogSource, CifCategory, FetchOptions,
};
use cifwatch_core::embed_index::{load_index, query_topk, HashEmbedder};
use cifwatch_core::error::{CoreError, CoreResult};
use cifwatch_core::llm_gateway::build_backend;
use cifwatch_core::pipeline::{self, PipelineConfig};
use cifwatch_core::retrieval::QueryStrategy;
use cifwatch_core::synth_corpus::{IntervalSelector, TimeInterval};

#[derive(Parser)]
#[command(name = "cifwatch", version, about = "Monitor critical infrastructure facilities during disasters from social-media messages")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceKind {
    Live,
    Fixture,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Cif,
    #[value(name = "cif+terms")]
    CifTerms,
    #[value(name = "cif+phrase")]
    CifPhrase,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Mock,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Mock,
    Http,
}

impl From<StrategyArg> for QueryStrategy {
    fn from(arg: StrategyArg) -> QueryStrategy {
        match arg {
            StrategyArg::Cif => QueryStrategy::CifOnly,
            StrategyArg::CifTerms => QueryStrategy::CifPlusTerms,
            StrategyArg::CifPhrase => QueryStrategy::CifPlusPhrase,
        }
    }
}

impl From<ProviderArg> for cifwatch_core::pipeline::EmbeddingKind {
    fn from(arg: ProviderArg) -> cifwatch_core::pipeline::EmbeddingKind {
        match arg {
            ProviderArg::Mock => cifwatch_core::pipeline::EmbeddingKind::Mock,
            ProviderArg::Remote => cifwatch_core::pipeline::EmbeddingKind::Remote,
        }
    }
}

impl From<BackendArg> for cifwatch_core::llm_gateway::BackendKind {
    fn from(arg: BackendArg) -> cifwatch_core::llm_gateway::BackendKind {
        match arg {
            BackendArg::Mock => cifwatch_core::llm_gateway::BackendKind::Mock,
            BackendArg::Http => cifwatch_core::llm_gateway::BackendKind::Http,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fetch a facility catalog from the geocoder or a fixture file.
    FetchCifs {
        #[arg(long)]
        aoi: String,
        #[arg(long, value_enum)]
        source: SourceKind,
        /// Fixture catalog path (fixture mode).
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Geocoder search endpoint (live mode).
        #[arg(long, default_value = "https://nominatim.openstreetmap.org/search")]
        endpoint: String,
        /// Politeness delay between live requests, in milliseconds.
        #[arg(long, default_value_t = 1100)]
        delay_ms: u64,
        /// Directory for caching raw live responses.
        #[arg(long)]
        cache_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Validate a config and print the planned experiment shape.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Generate tagged signal tweets for every cataloged facility.
    GenerateCorpus {
        #[arg(long)]
        config: PathBuf,
        /// Override the AOI (built-in AOIs bring their term set along).
        #[arg(long)]
        aoi: Option<String>,
        /// Override the catalog path.
        #[arg(long)]
        cifs: Option<PathBuf>,
        /// Override the generation backend kind.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Override the noise-pool path used by later stages.
        #[arg(long)]
        noise: Option<PathBuf>,
        /// Override the corpus seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the corpus output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Label each generated tweet with a ground-truth operational status.
    LabelStatus {
        #[arg(long)]
        config: PathBuf,
    },
    /// Disperse signal over the timeline, mix noise, inject facility names.
    BuildTimeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Embed the corpus and build the vector index.
    Index {
        #[arg(long)]
        config: PathBuf,
        /// Override the corpus path.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Override the embedding provider kind.
        #[arg(long, value_enum)]
        provider: Option<ProviderArg>,
        /// Override the embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        /// Override the index output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search an index file directly (debugging aid).
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// 0h-6h, 6h-12h, 12h-18h, 18h-24h, or 0h-24h.
        #[arg(long, default_value = "0h-24h")]
        interval: String,
        #[arg(long, default_value_t = 64)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run every configured retrieval strategy over the catalog.
    Retrieve {
        #[arg(long)]
        config: PathBuf,
        /// Restrict to a single strategy.
        #[arg(long, value_enum)]
        strategy: Option<StrategyArg>,
        /// Override the largest K (the grid is truncated to it).
        #[arg(long)]
        kmax: Option<usize>,
        /// Override the index path.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Override the catalog path.
        #[arg(long)]
        cifs: Option<PathBuf>,
        /// Override the runs output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Classify impact, severity, and status for signal plus retrieved tweets.
    Classify {
        #[arg(long)]
        config: PathBuf,
        /// Classify against this retrieval run file instead of the default
        /// strategy's.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Override the classification backend kind.
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        /// Override the predictions output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Infer overall operational status per facility and interval.
    Status {
        #[arg(long)]
        config: PathBuf,
        /// Override the per-tweet predictions input path.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Override the overall-status output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute metrics and emit the report files.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every stage in order.
    RunAll {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_interval(s: &str) -> CoreResult<IntervalSelector> {
    if s == "0h-24h" {
        return Ok(IntervalSelector::FullDay);
    }
    TimeInterval::ALL
        .iter()
        .copied()
        .find(|i| i.as_str() == s)
        .map(IntervalSelector::Interval)
        .ok_or_else(|| CoreError::Config(format!("unknown interval {s:?}")))
}

fn load_config_with(
    path: &std::path::Path,
    mutate: impl FnOnce(&mut PipelineConfig),
) -> CoreResult<PipelineConfig> {
    let mut config = PipelineConfig::load(path)?;
    mutate(&mut config);
    config.validate()?;
    Ok(config)
}

fn run(command: Command) -> CoreResult<()> {
    match command {
        Command::FetchCifs {
            aoi,
            source,
            fixture,
            endpoint,
            delay_ms,
            cache_dir,
            out,
        } => {
            let aoi = AreaOfInterest::builtin(&aoi)
                .ok_or_else(|| CoreError::Config(format!("AOI {aoi:?} is not built in")))?;
            let source = match source {
                SourceKind::Live => CatalogSource::Live { endpoint },
                SourceKind::Fixture => CatalogSource::Fixture {
                    path: fixture.ok_or_else(|| {
                        CoreError::Config("--fixture is required with --source fixture".into())
                    })?,
                },
            };
            let opts = FetchOptions {
                delay_ms,
                cache_dir,
                limit: 50,
            };
            let cifs = fetch_cifs(&aoi, &CifCategory::ALL, &source, &opts)?;
            save_catalog(&cifs, &out)?;
            eprintln!("fetched {} facilities for {} -> {}", cifs.len(), aoi.name, out.display());
        }
        Command::Validate { config } => {
            let config = PipelineConfig::load(&config)?;
            let plan = pipeline::plan(&config)?;
            println!("{}", serde_json::to_string_pretty(&plan).unwrap());
        }
        Command::GenerateCorpus {
            config,
            aoi,
            cifs,
            backend,
            noise,
            seed,
            out,
        } => {
            let config = load_config_with(&config, |c| {
                if let Some(name) = aoi {
                    if let Some(builtin) = AreaOfInterest::builtin(&name) {
                        c.aoi.disaster_kind = builtin.disaster_kind;
                        c.aoi.impact_terms.clear();
                    }
                    c.aoi.name = name;
                }
                if let Some(cifs) = cifs {
                    c.paths.catalog = cifs;
                }
                if let Some(kind) = backend {
                    c.backends.generation.kind = kind.into();
                }
                if let Some(noise) = noise {
                    c.paths.noise_pool = noise;
                }
                if let Some(seed) = seed {
                    c.corpus.seed = seed;
                }
                if let Some(out) = out {
                    c.paths.corpus = out;
                }
            })?;
            let backend = build_backend(&config.backends.generation)?;
            let catalog = pipeline::stage_catalog(&config)?;
            let drafts = pipeline::stage_generate(&config, &catalog, backend.as_ref())?;
            eprintln!(
                "generated {} signal tweets for {} facilities -> {}",
                drafts.len(),
                catalog.len(),
                config.paths.signal_raw().display()
            );
        }
        Command::LabelStatus { config } => {
            let config = PipelineConfig::load(&config)?;
            let backend = build_backend(&config.backends.generation)?;
            let drafts = pipeline::load_signal_raw(&config)?;
            let labeled = pipeline::stage_label_status(&config, &drafts, backend.as_ref())?;
            eprintln!(
                "labeled {} tweets -> {}",
                labeled.len(),
                config.paths.signal_labeled().display()
            );
        }
        Command::BuildTimeline { config, seed } => {
            let config = load_config_with(&config, |c| {
                if let Some(seed) = seed {
                    c.corpus.seed = seed;
                }
            })?;
            let catalog = pipeline::stage_catalog(&config)?;
            let labeled = pipeline::load_signal_labeled(&config)?;
            let corpus = pipeline::stage_build_timeline(&config, &catalog, &labeled)?;
            eprintln!(
                "corpus: {} tweets ({} signal, {} noise) -> {}",
                corpus.tweets.len(),
                corpus.signal_count(),
                corpus.noise_count(),
                config.paths.corpus.display()
            );
        }
        Command::Index {
            config,
            corpus,
            provider,
            dim,
            out,
        } => {
            let corpus_overridden = corpus.is_some();
            let config = load_config_with(&config, |c| {
                if let Some(corpus) = corpus {
                    c.paths.corpus = corpus;
                }
                if let Some(provider) = provider {
                    c.backends.embedding.kind = provider.into();
                }
                if let Some(dim) = dim {
                    c.backends.embedding.dim = dim;
                }
                if let Some(out) = out {
                    c.paths.index = out;
                }
            })?;
            // An explicit --corpus is trusted as-is; config-derived inputs
            // must match the config fingerprint.
            let corpus = if corpus_overridden {
                cifwatch_core::synth_corpus::load_corpus(&config.paths.corpus)?
            } else {
                pipeline::load_corpus_checked(&config, "index")?
            };
            let index = pipeline::stage_index(&config, &corpus)?;
            eprintln!(
                "indexed {} vectors (dim {}) -> {}",
                index.len(),
                index.dim(),
                config.paths.index.display()
            );
        }
        Command::Query {
            index,
            text,
            k,
            interval,
            dim,
            seed,
        } => {
            let index = load_index(&index)?;
            let provider = HashEmbedder::new(dim, seed)?;
            let selector = parse_interval(&interval)?;
            let hits = query_topk(&index, &text, &provider, k, selector)?;
            for hit in hits {
                println!("{}", serde_json::json!({"tweet_id": hit.tweet_id, "score": hit.score}));
            }
        }
        Command::Retrieve {
            config,
            strategy,
            kmax,
            index,
            cifs,
            out,
        } => {
            let config = load_config_with(&config, |c| {
                if let Some(strategy) = strategy {
                    c.retrieval.strategies = vec![strategy.into()];
                }
                if let Some(kmax) = kmax {
                    c.retrieval.k_grid.retain(|&k| k <= kmax);
                }
                if let Some(index) = index {
                    c.paths.index = index;
                }
                if let Some(cifs) = cifs {
                    c.paths.catalog = cifs;
                }
                if let Some(out) = out {
                    c.paths.runs = out;
                }
            })?;
            let catalog = pipeline::stage_catalog(&config)?;
            let corpus = pipeline::load_corpus_checked(&config, "retrieve")?;
            let index = pipeline::load_index_checked(&config, "retrieve")?;
            let runs = pipeline::stage_retrieve(&config, &catalog, &corpus, &index)?;
            for run in &runs {
                eprintln!(
                    "strategy {}: {} ranked lists -> {}",
                    run.strategy,
                    run.results.len(),
                    config.paths.run_file(run.strategy).display()
                );
            }
        }
        Command::Classify {
            config,
            run: run_path,
            backend: backend_kind,
            out,
        } => {
            let config = load_config_with(&config, |c| {
                if let Some(kind) = backend_kind {
                    c.backends.classification.kind = kind.into();
                }
                if let Some(out) = out {
                    c.paths.predictions = Some(out);
                }
            })?;
            let backend = build_backend(&config.backends.classification)?;
            let corpus = pipeline::load_corpus_checked(&config, "classify")?;
            let run = match run_path {
                Some(path) => cifwatch_core::retrieval::load_run(&path)?,
                None => {
                    let runs = pipeline::load_runs_checked(&config, "classify")?;
                    pipeline::default_run(&config, &runs)?.clone()
                }
            };
            let predictions = pipeline::stage_classify(&config, &corpus, &run, backend.as_ref())?;
            eprintln!(
                "classified {} tweets -> {}",
                predictions.len(),
                config.paths.predictions().display()
            );
        }
        Command::Status {
            config,
            predictions: predictions_path,
            out,
        } => {
            let predictions_overridden = predictions_path.is_some();
            let config = load_config_with(&config, |c| {
                if let Some(path) = predictions_path {
                    c.paths.predictions = Some(path);
                }
                if let Some(out) = out {
                    c.paths.overall_status = Some(out);
                }
            })?;
            let backend = build_backend(&config.backends.classification)?;
            let catalog = pipeline::stage_catalog(&config)?;
            let corpus = pipeline::load_corpus_checked(&config, "status")?;
            let runs = pipeline::load_runs_checked(&config, "status")?;
            let run = pipeline::default_run(&config, &runs)?;
            let predictions = if predictions_overridden {
                cifwatch_core::zeroshot_classifier::load_predictions(&config.paths.predictions())?.1
            } else {
                pipeline::load_predictions_checked(&config, "status")?
            };
            let overall = pipeline::stage_status(
                &config,
                &catalog,
                &corpus,
                run,
                &predictions,
                backend.as_ref(),
            )?;
            eprintln!(
                "inferred {} overall statuses -> {}",
                overall.len(),
                config.paths.overall_status().display()
            );
        }
        Command::Evaluate { config } => {
            let config = PipelineConfig::load(&config)?;
            let catalog = pipeline::stage_catalog(&config)?;
            let corpus = pipeline::load_corpus_checked(&config, "evaluate")?;
            let runs = pipeline::load_runs_checked(&config, "evaluate")?;
            let predictions = pipeline::load_predictions_checked(&config, "evaluate")?;
            let overall = pipeline::load_overall_status_checked(&config, "evaluate")?;
            let report =
                pipeline::evaluate(&config, &catalog, &corpus, &runs, &predictions, &overall)?;
            pipeline::emit_reports(&report, &config.paths.reports)?;
            eprintln!("report -> {}", config.paths.reports.join("report.json").display());
        }
        Command::RunAll { config } => {
            let config = PipelineConfig::load(&config)?;
            let report = pipeline::run_all(&config)?;
            eprintln!(
                "run complete: {} tweets, {} strategies, report -> {}",
                report.corpus_summary.total,
                report.retrieval.len(),
                config.paths.reports.join("report.json").display()
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
