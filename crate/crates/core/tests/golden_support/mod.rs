//! Support for the deterministic end-to-end golden run: synthetic noise
//! pool, scripted mock completions, fixture generation, and artifact
//! fingerprinting.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cifwatch_core::cif_catalog::Cif;
use cifwatch_core::hashing::{fnv1a128, fnv1a64, hex128};
use cifwatch_core::llm_gateway::{prompt_fixture_key, MockBackend};
use cifwatch_core::pipeline::{
    self, ExperimentReport, PipelineConfig,
};
use cifwatch_core::synth_corpus::{prompts, OperationalStatus, Tweet};
use cifwatch_core::zeroshot_classifier::{
    render_impact_severity_prompt, render_overall_status_prompt, TweetPrediction,
};

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/golden")
}

pub fn bless_requested() -> bool {
    std::env::var("CIFWATCH_BLESS").map(|v| v == "1").unwrap_or(false)
}

/// Deterministic combinatorial noise pool: ambient disaster-adjacent chatter
/// with no facility linkage.
pub fn synth_noise_pool(n: usize) -> Vec<String> {
    let openers = [
        "Heavy rain all night here,",
        "Winds picking up again,",
        "Power flickering on our street,",
        "Another band of the storm coming through,",
        "Streets looking rough this morning,",
        "Radio says stay indoors,",
        "Neighbors checking on each other,",
        "Supermarket shelves nearly empty,",
        "Sirens in the distance again,",
        "Finally a break in the weather,",
    ];
    let middles = [
        "water pooling along the avenue",
        "branches down across the sidewalk",
        "traffic lights out near the mall",
        "the canal running higher than I've seen",
        "fences flattened along the block",
        "debris scattered over the parking lots",
        "gusts rattling every window",
        "the drainage backing up fast",
        "roof shingles in the yard",
        "plenty of flooding videos going around",
    ];
    let tails = [
        "stay safe everyone. #storm",
        "hoping it passes soon.",
        "county crews are out already.",
        "keep your phones charged!",
        "no word yet on when it clears.",
        "sharing for anyone nearby.",
        "hard to believe this is day two.",
        "updates as I get them.",
        "checking back in an hour.",
        "be careful driving out there.",
    ];
    (0..n)
        .map(|i| {
            let o = openers[i % openers.len()];
            let m = middles[(i / openers.len()) % middles.len()];
            let t = tails[(i / (openers.len() * middles.len())) % tails.len()];
            format!("{o} {m}, {t} (report {i:04})")
        })
        .collect()
}

/// Ten tagged tweets per facility, 100-250 characters each, with a spread of
/// raw impact tags including multiword ones.
pub fn scripted_generation_response(cif: &Cif) -> String {
    let name = &cif.name;
    let blocks = [
        format!("{name}'s ground floor is underwater after the surge pushed past the barriers overnight. Staff moved everyone to the upper levels while pumps run nonstop and crews wait for daylight. (Tags: Flooded, Severe)"),
        format!("Strong gusts stripped part of the facade at {name}, scattering glass across the entrance. Maintenance teams cordoned off the walkway and are assessing what can reopen tomorrow. (Tags: Damaged, Moderate)"),
        format!("The annex behind {name} is simply gone, flattened by the strongest band of the hurricane. Nothing salvageable in that wing according to the first crew on the scene this morning. (Tags: Destroyed, Severe)"),
        format!("{name} has been running on generators since 2am; the whole block lost electricity when the lines came down. Staff say essential systems are stable but everything else is dark. (Tags: Power Outage, Mild)"),
        format!("A fallen oak and a tangle of lines have sealed off the main drive into {name}. Vehicles are being turned around and told to use the service entrance on the far side. (Tags: Blocked, Moderate)"),
        format!("Part of the roof over {name}'s east corridor came down an hour ago, and engineers are shoring up what remains. Nobody was inside the corridor when it gave way, thankfully. (Tags: Collapsed, Severe)"),
        format!("Inspectors flagged long cracks running up the stairwell walls at {name} after the worst of the winds passed. The building stays open while a structural review is scheduled. (Tags: Cracked, Mild)"),
        format!("The basement archives at {name} sat under a meter of water by sunrise; the lower parking level is a lagoon. Salvage teams started hauling records out in crates. (Tags: Submerged, Severe)"),
        format!("Sheet metal peeled off the awning at {name} and ended up two blocks away. The exposed section is tarped for now while the rest of the roofline gets inspected. (Tags: Roof Torn Off, Moderate)"),
        format!("Officials call {name} structurally questionable until an engineer signs off; entry limited to essential staff in hard hats. Neighbors told to keep clear of the north wall. (Tags: Unsafe, Mild)"),
    ];
    blocks.join("\n\n")
}

const STATUS_WORD_CYCLE: [&str; 10] = [
    "closed",
    "open",
    "partially closed",
    "unknown",
    "partially open",
    "closed",
    "unknown",
    "open",
    "partially closed",
    "unknown",
];

/// Ground-truth status completion for the i-th generated signal tweet.
pub fn scripted_gt_status_response(draft_index: usize) -> String {
    format!(
        "Operational status: {}",
        STATUS_WORD_CYCLE[draft_index % STATUS_WORD_CYCLE.len()]
    )
}

fn status_words(status: OperationalStatus) -> &'static str {
    match status {
        OperationalStatus::Open => "open",
        OperationalStatus::Closed => "closed",
        OperationalStatus::PartiallyOpen => "partially open",
        OperationalStatus::PartiallyClosed => "partially closed",
        OperationalStatus::Unknown => "unknown",
    }
}

/// Classification-side impact+severity completion: mostly echoes ground
/// truth, with deterministic confusions toward "damaged" and occasional
/// noise mislabels.
pub fn scripted_impact_severity_response(tweet: &Tweet) -> String {
    let h = fnv1a64(tweet.id.as_bytes());
    if tweet.is_signal {
        let impact = if h.is_multiple_of(4) {
            "damaged".to_string()
        } else {
            tweet.gt_raw_impact.to_lowercase()
        };
        let severity = if h.is_multiple_of(5) {
            "severe"
        } else {
            tweet.gt_severity.as_str()
        };
        format!("Infrastructure impact: {impact}\nInfrastructure severity: {severity}")
    } else if h.is_multiple_of(37) {
        "Infrastructure impact: damaged\nInfrastructure severity: mild".to_string()
    } else {
        "Infrastructure impact: not_applicable\nInfrastructure severity: unknown".to_string()
    }
}

/// Classification-side per-tweet status completion.
pub fn scripted_tweet_status_response(tweet: &Tweet) -> String {
    let h = fnv1a64(tweet.id.as_bytes());
    let words = if tweet.is_signal {
        if h.is_multiple_of(6) {
            "unknown"
        } else {
            status_words(tweet.gt_status)
        }
    } else if h.is_multiple_of(41) {
        "closed"
    } else {
        "unknown"
    };
    format!("Operational status: {words}")
}

/// Overall-status completion: the last non-unknown predicted status among
/// the evidence tweets, occasionally overridden to exercise disagreement.
pub fn scripted_overall_status_response(
    cif_id: &str,
    interval: &str,
    evidence_ids: &[String],
    predictions: &BTreeMap<String, TweetPrediction>,
) -> String {
    let h = fnv1a64(format!("{cif_id}|{interval}").as_bytes());
    let words = if h.is_multiple_of(5) {
        "partially open"
    } else {
        evidence_ids
            .iter()
            .rev()
            .filter_map(|id| predictions.get(id))
            .map(|p| p.status)
            .find(|&s| s != OperationalStatus::Unknown)
            .map(status_words)
            .unwrap_or("unknown")
    };
    format!("operational_status: {words}")
}

/// Load the golden config, pointing artifact outputs into `run_dir`.
pub fn golden_config(run_dir: &Path) -> PipelineConfig {
    let mut config = PipelineConfig::load(&golden_dir().join("config.json")).expect("golden config");
    config.paths.corpus = run_dir.join("artifacts/corpus.jsonl");
    config.paths.index = run_dir.join("artifacts/index.bin");
    config.paths.runs = run_dir.join("artifacts/runs");
    config.paths.reports = run_dir.join("reports");
    config
}

pub struct GeneratedFixtures {
    pub generation: BTreeMap<String, String>,
    pub classification: BTreeMap<String, String>,
    pub report: ExperimentReport,
}

/// Replay the pipeline stage by stage, scripting a completion for every
/// prompt it will issue. The committed fixture files must equal the maps
/// produced here.
pub fn generate_golden_fixtures(run_dir: &Path) -> GeneratedFixtures {
    let config = golden_config(run_dir);
    let aoi = config.effective_aoi().expect("aoi");
    let catalog = pipeline::stage_catalog(&config).expect("catalog");

    let mut gen_map = BTreeMap::new();
    for cif in &catalog {
        gen_map.insert(
            prompt_fixture_key(&prompts::render_generation_prompt(cif, &aoi)),
            scripted_generation_response(cif),
        );
    }
    let drafts = pipeline::stage_generate(&config, &catalog, &MockBackend::new(gen_map.clone()))
        .expect("generate");

    for (i, draft) in drafts.iter().enumerate() {
        gen_map.insert(
            prompt_fixture_key(&prompts::render_status_label_prompt(&draft.text)),
            scripted_gt_status_response(i),
        );
    }
    let labeled =
        pipeline::stage_label_status(&config, &drafts, &MockBackend::new(gen_map.clone()))
            .expect("label");

    let corpus = pipeline::stage_build_timeline(&config, &catalog, &labeled).expect("timeline");
    let index = pipeline::stage_index(&config, &corpus).expect("index");
    let runs = pipeline::stage_retrieve(&config, &catalog, &corpus, &index).expect("retrieve");

    let mut cls_map = BTreeMap::new();
    for tweet in &corpus.tweets {
        cls_map.insert(
            prompt_fixture_key(&render_impact_severity_prompt(&tweet.text)),
            scripted_impact_severity_response(tweet),
        );
        cls_map.insert(
            prompt_fixture_key(&prompts::render_status_label_prompt(&tweet.text)),
            scripted_tweet_status_response(tweet),
        );
    }
    let default_run = pipeline::default_run(&config, &runs).expect("default run");
    let predictions =
        pipeline::stage_classify(&config, &corpus, default_run, &MockBackend::new(cls_map.clone()))
            .expect("classify");
    let by_id: BTreeMap<String, TweetPrediction> = predictions
        .iter()
        .map(|p| (p.tweet_id.clone(), p.clone()))
        .collect();
    for cif in &catalog {
        for selector in cifwatch_core::synth_corpus::IntervalSelector::ALL {
            let evidence = pipeline::overall_status_evidence(
                &corpus,
                default_run,
                &predictions,
                &cif.id,
                selector,
            )
            .expect("evidence");
            if evidence.is_empty() {
                continue;
            }
            let texts: Vec<String> = evidence.iter().map(|(_, t)| t.clone()).collect();
            let ids: Vec<String> = evidence.iter().map(|(id, _)| id.clone()).collect();
            cls_map.insert(
                prompt_fixture_key(&render_overall_status_prompt(&cif.name, &texts)),
                scripted_overall_status_response(&cif.id, selector.as_str(), &ids, &by_id),
            );
        }
    }
    let overall = pipeline::stage_status(
        &config,
        &catalog,
        &corpus,
        default_run,
        &predictions,
        &MockBackend::new(cls_map.clone()),
    )
    .expect("status");

    let report = pipeline::evaluate(&config, &catalog, &corpus, &runs, &predictions, &overall)
        .expect("evaluate");
    pipeline::emit_reports(&report, &config.paths.reports).expect("reports");

    GeneratedFixtures {
        generation: gen_map,
        classification: cls_map,
        report,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub fnv1a128: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

fn walk(dir: &Path, base: &Path, out: &mut Vec<ManifestEntry>) {
    let Ok(entries) = std::fs::read_dir(dir) else {
        return;
    };
    let mut paths: Vec<PathBuf> = entries.map(|e| e.unwrap().path()).collect();
    paths.sort();
    for path in paths {
        if path.is_dir() {
            walk(&path, base, out);
        } else {
            let body = std::fs::read(&path).unwrap();
            out.push(ManifestEntry {
                path: path
                    .strip_prefix(base)
                    .unwrap()
                    .to_string_lossy()
                    .replace('\\', "/"),
                bytes: body.len() as u64,
                fnv1a128: hex128(fnv1a128(&body)),
            });
        }
    }
}

/// Fingerprint every artifact and report file under a run directory.
pub fn artifact_manifest(run_dir: &Path) -> Manifest {
    let mut files = Vec::new();
    walk(&run_dir.join("artifacts"), run_dir, &mut files);
    walk(&run_dir.join("reports"), run_dir, &mut files);
    files.sort_by(|a, b| a.path.cmp(&b.path));
    Manifest { files }
}
