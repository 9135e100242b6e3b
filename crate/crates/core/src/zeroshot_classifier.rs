//! Zero-shot classification prompts and their strict response
//! normalization: per-tweet impact + severity, per-tweet operational status,
//! and multi-tweet overall facility status. Template bytes are pinned by
//! golden tests.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};
use crate::llm_gateway::{GenerationRequest, TextGenerator};
use crate::synth_corpus::{
    consolidate_impact, parse_severity, parse_status_response, prompts, ConsolidatedImpact,
    IntervalSelector, OperationalStatus, Severity,
};

const IMPACT_SEVERITY_TEMPLATE: &str = "Your task is to analyze the provided tweet and determine the impacts of the disaster on the mentioned infrastructure. Please include only impact descriptors from the list such as blocked, blown, buried, burnt, collapsed, cracked, damaged, destroyed, displaced, disrupted, eroded, failed, flooded, ground liquefaction, ground shake, leakage, muddy, power outage, ruptured, slippery, torn, unsafe, uprooted, washed away, weakened or not_applicable, and severity such as severe, mild, moderate, unknown.\n\nTweet: [TWEET]\n\nInfrastructure impact:\nInfrastructure severity:";

const OVERALL_STATUS_TEMPLATE: &str = "Your task is to analyze the tweets given below and deduce the operational status of a facility, named [CIF]. Since these tweets are retrieved based on the facility name, it's possible that some tweets may not pertain to the given facility. Focus solely on the tweets pertinent to [CIF] and derive the most recent operational status for the facility. Your operational status label must be one of these: open, closed, partially open, partially closed, or unknown.\n\n[TWEETS]\n\noperational_status:";

pub fn impact_severity_template() -> &'static str {
    IMPACT_SEVERITY_TEMPLATE
}

pub fn overall_status_template() -> &'static str {
    OVERALL_STATUS_TEMPLATE
}

pub fn render_impact_severity_prompt(tweet_text: &str) -> String {
    IMPACT_SEVERITY_TEMPLATE.replace("[TWEET]", tweet_text)
}

pub fn render_overall_status_prompt(cif_name: &str, tweet_texts: &[String]) -> String {
    let tweet_lines = tweet_texts
        .iter()
        .map(|t| format!("Tweet: {t}"))
        .collect::<Vec<_>>()
        .join("\n");
    OVERALL_STATUS_TEMPLATE
        .replace("[CIF]", cif_name)
        .replace("[TWEETS]", &tweet_lines)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactSeverityPrediction {
    /// Impact value as extracted from the response, before consolidation.
    pub raw_model_impact: String,
    pub impact: ConsolidatedImpact,
    pub severity: Severity,
}

impl ImpactSeverityPrediction {
    /// The degenerate prediction used when nothing parseable came back.
    pub fn unparsed() -> ImpactSeverityPrediction {
        ImpactSeverityPrediction {
            raw_model_impact: String::new(),
            impact: ConsolidatedImpact::UnknownInapplicable,
            severity: Severity::Unknown,
        }
    }
}

/// Pull the value following a `label:` line (or inline occurrence) out of a
/// model response, case-insensitively.
fn extract_labeled_value(response: &str, label: &str) -> Option<String> {
    let lower = response.to_lowercase();
    let pos = lower.find(&label.to_lowercase())?;
    let after = &response[pos + label.len()..];
    let value = after.lines().next().unwrap_or("").trim();
    Some(value.to_string())
}

/// Parse an impact+severity response. Multi-valued impacts reduce to the
/// first comma-separated value; anything unparseable degrades to
/// (unknown_inapplicable, unknown) as data, not as an error.
pub fn parse_impact_severity_response(response: &str) -> ImpactSeverityPrediction {
    let raw_impact = extract_labeled_value(response, "infrastructure impact:");
    let raw_severity = extract_labeled_value(response, "infrastructure severity:");
    let Some(raw_impact) = raw_impact else {
        return ImpactSeverityPrediction::unparsed();
    };
    let first_impact = raw_impact.split(',').next().unwrap_or("").trim();
    let impact = consolidate_impact(first_impact);
    let severity = raw_severity
        .as_deref()
        .map(|s| parse_severity(s.split(',').next().unwrap_or("").trim()))
        .unwrap_or(Severity::Unknown);
    ImpactSeverityPrediction {
        raw_model_impact: raw_impact,
        impact,
        severity,
    }
}

/// Classify one tweet's impact and severity through the backend.
pub fn classify_impact_severity(
    tweet_text: &str,
    backend: &dyn TextGenerator,
) -> CoreResult<ImpactSeverityPrediction> {
    let prompt = render_impact_severity_prompt(tweet_text);
    let response = backend.generate(&GenerationRequest::classification(prompt))?;
    Ok(parse_impact_severity_response(&response))
}

/// Classify one tweet's operational status through the backend.
pub fn classify_operational_status(
    tweet_text: &str,
    backend: &dyn TextGenerator,
) -> CoreResult<OperationalStatus> {
    let prompt = prompts::render_status_label_prompt(tweet_text);
    let response = backend.generate(&GenerationRequest::classification(prompt))?;
    Ok(parse_status_response(&response))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverallStatusPrediction {
    pub cif_id: String,
    pub interval: IntervalSelector,
    pub status: OperationalStatus,
    pub evidence_tweet_ids: Vec<String>,
}

/// Infer a facility's overall status from its retrieved impact-bearing
/// tweets, in retrieval order. An empty evidence list returns `unknown`
/// without touching the backend.
pub fn infer_overall_status(
    cif_id: &str,
    cif_name: &str,
    interval: IntervalSelector,
    evidence: &[(String, String)],
    backend: &dyn TextGenerator,
) -> CoreResult<OverallStatusPrediction> {
    if evidence.is_empty() {
        return Ok(OverallStatusPrediction {
            cif_id: cif_id.to_string(),
            interval,
            status: OperationalStatus::Unknown,
            evidence_tweet_ids: Vec::new(),
        });
    }
    let texts: Vec<String> = evidence.iter().map(|(_, text)| text.clone()).collect();
    let prompt = render_overall_status_prompt(cif_name, &texts);
    let response = backend.generate(&GenerationRequest::classification(prompt))?;
    Ok(OverallStatusPrediction {
        cif_id: cif_id.to_string(),
        interval,
        status: parse_status_response(&response),
        evidence_tweet_ids: evidence.iter().map(|(id, _)| id.clone()).collect(),
    })
}

/// Per-tweet prediction row for the predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TweetPrediction {
    pub tweet_id: String,
    pub raw_model_impact: String,
    pub impact: ConsolidatedImpact,
    pub severity: Severity,
    pub status: OperationalStatus,
}

#[derive(Debug, Serialize, Deserialize)]
struct PredictionsHeader {
    predictions_meta: FileMeta,
}

#[derive(Debug, Serialize, Deserialize)]
struct OverallHeader {
    overall_status_meta: FileMeta,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct FileMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
}

pub fn save_predictions(
    predictions: &[TweetPrediction],
    config_hash: Option<&str>,
    path: &Path,
) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = PredictionsHeader {
        predictions_meta: FileMeta {
            config_hash: config_hash.map(str::to_string),
        },
    };
    writeln!(w, "{}", serde_json::to_string(&header).unwrap()).map_err(|e| CoreError::io(path, e))?;
    for prediction in predictions {
        let line = serde_json::to_string(prediction)
            .map_err(|e| CoreError::Data(format!("serializing prediction: {e}")))?;
        writeln!(w, "{line}").map_err(|e| CoreError::io(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

pub fn load_predictions(path: &Path) -> CoreResult<(Option<String>, Vec<TweetPrediction>)> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let config_hash = match lines.next() {
        Some((_, Ok(line))) => {
            let header: PredictionsHeader = serde_json::from_str(&line)
                .map_err(|e| CoreError::schema(path, 1, format!("predictions header: {e}")))?;
            header.predictions_meta.config_hash
        }
        Some((_, Err(e))) => return Err(CoreError::io(path, e)),
        None => return Err(CoreError::schema(path, 1, "empty predictions file")),
    };
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let prediction: TweetPrediction = serde_json::from_str(&line)
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        out.push(prediction);
    }
    Ok((config_hash, out))
}

pub fn save_overall_status(
    predictions: &[OverallStatusPrediction],
    config_hash: Option<&str>,
    path: &Path,
) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let header = OverallHeader {
        overall_status_meta: FileMeta {
            config_hash: config_hash.map(str::to_string),
        },
    };
    writeln!(w, "{}", serde_json::to_string(&header).unwrap()).map_err(|e| CoreError::io(path, e))?;
    for prediction in predictions {
        let line = serde_json::to_string(prediction)
            .map_err(|e| CoreError::Data(format!("serializing overall status: {e}")))?;
        writeln!(w, "{line}").map_err(|e| CoreError::io(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

pub fn load_overall_status(
    path: &Path,
) -> CoreResult<(Option<String>, Vec<OverallStatusPrediction>)> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();
    let config_hash = match lines.next() {
        Some((_, Ok(line))) => {
            let header: OverallHeader = serde_json::from_str(&line)
                .map_err(|e| CoreError::schema(path, 1, format!("overall-status header: {e}")))?;
            header.overall_status_meta.config_hash
        }
        Some((_, Err(e))) => return Err(CoreError::io(path, e)),
        None => return Err(CoreError::schema(path, 1, "empty overall-status file")),
    };
    let mut out = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let prediction: OverallStatusPrediction = serde_json::from_str(&line)
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        out.push(prediction);
    }
    Ok((config_hash, out))
}
