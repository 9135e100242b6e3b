//! Prompt templates for corpus generation and status labeling, and the
//! parser for tagged generation output. Template bytes are pinned by golden
//! tests; do not reflow them.

use crate::cif_catalog::{AreaOfInterest, Cif, DisasterKind};

const HURRICANE_OPENING: &str = "Generate 15 diverse tweets describing the impact of a Category-5 hurricane on [CIF NAME & ADDRESS]. The disaster triggered sub-events such as tornado, storm surge, burst of rain, strong winds, resulting in varied impacts like flooded, collapsed, submerged, damaged, destroyed, cracked, etc.";

// "Christchruch's" is intentional (sic).
const EARTHQUAKE_OPENING: &str = "Generate 15 diverse tweets describing the impact of a severe earthquake on Christchruch's [CIF NAME & ADDRESS]. The disaster triggered sub-events such as ground shake, landslide, liquefaction, ground rupture, aftershock, resulting in varied impacts like collapsed, cracked, damaged, destroyed, etc.";

const GENERATION_BODY: &str = "Ensure linguistic diversity in each tweet, providing unique insights into the impact and its severity. In some tweets, include the infrastructure's address. Aim for tweet lengths between 100 to 250 characters, and avoid using emojis. Tag each tweet with the type of impact (e.g., damaged, destroyed) and its severity (e.g., low, mild, severe). These tags will be used for training classifiers.\n\nAlways include 2 tags at the 'end' of the generated tweet with the following template:\n(Tags: ***** , *****)";

const STATUS_TEMPLATE: &str = "Your task is to analyze the provided tweet and determine the operational status of the mentioned infrastructure. The operational status could include descriptors such as open, closed, partially open, partially closed, or unknown.\n\nTweet: [TWEET]\n\nOperational status:";

/// Name-and-address slot value: `"<name> & <address>"`, or just the name
/// when the fixture has no address.
pub fn cif_slot(cif: &Cif) -> String {
    if cif.address.is_empty() {
        cif.name.clone()
    } else {
        format!("{} & {}", cif.name, cif.address)
    }
}

/// Render the tweet-generation prompt for one facility. The opening
/// paragraph depends on the AOI's disaster kind.
pub fn render_generation_prompt(cif: &Cif, aoi: &AreaOfInterest) -> String {
    let opening = match aoi.disaster_kind {
        DisasterKind::Hurricane => HURRICANE_OPENING,
        DisasterKind::Earthquake => EARTHQUAKE_OPENING,
    };
    format!(
        "{}\n\n{}",
        opening.replace("[CIF NAME & ADDRESS]", &cif_slot(cif)),
        GENERATION_BODY
    )
}

/// Render the per-tweet operational-status labeling prompt.
pub fn render_status_label_prompt(tweet_text: &str) -> String {
    STATUS_TEMPLATE.replace("[TWEET]", tweet_text)
}

/// Raw template bytes, exposed for golden-prompt pinning.
pub fn generation_template(kind: DisasterKind) -> String {
    let opening = match kind {
        DisasterKind::Hurricane => HURRICANE_OPENING,
        DisasterKind::Earthquake => EARTHQUAKE_OPENING,
    };
    format!("{opening}\n\n{GENERATION_BODY}")
}

/// Raw status-label template bytes, exposed for golden-prompt pinning.
pub fn status_label_template() -> &'static str {
    STATUS_TEMPLATE
}

/// One successfully parsed generated tweet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedTweet {
    pub text: String,
    pub raw_impact: String,
    pub raw_severity: String,
}

/// Output of [`parse_generated_tweets`]: parsed tweets plus the blocks whose
/// tag pair could not be recovered (kept as data for manual handling).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedGeneration {
    pub tweets: Vec<ParsedTweet>,
    pub rejects: Vec<String>,
}

/// Split a generation response on blank lines and extract the trailing
/// `(Tags: A, B)` pair from each block. Matching is case-insensitive and
/// tolerant of spacing; blocks without a parseable pair go to `rejects`.
pub fn parse_generated_tweets(response: &str) -> ParsedGeneration {
    let mut out = ParsedGeneration::default();
    for block in split_blocks(response) {
        match split_tag_suffix(&block) {
            Some((text, impact, severity)) if !text.is_empty() => out.tweets.push(ParsedTweet {
                text,
                raw_impact: impact,
                raw_severity: severity,
            }),
            _ => out.rejects.push(block),
        }
    }
    out
}

fn split_blocks(response: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current = Vec::new();
    for line in response.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks
}

/// Returns (text without the tag suffix, raw impact, raw severity).
fn split_tag_suffix(block: &str) -> Option<(String, String, String)> {
    let trimmed = block.trim_end();
    if !trimmed.ends_with(')') {
        return None;
    }
    let open = trimmed.rfind('(')?;
    let inner = &trimmed[open + 1..trimmed.len() - 1];
    let inner_trimmed = inner.trim_start();
    if !inner_trimmed.to_lowercase().starts_with("tags") {
        return None;
    }
    let after_tags = inner_trimmed["tags".len()..].trim_start();
    let after_colon = after_tags.strip_prefix(':')?;
    let parts: Vec<&str> = after_colon.split(',').map(str::trim).collect();
    if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
        return None;
    }
    let text = trimmed[..open].trim().to_string();
    Some((text, parts[0].to_string(), parts[1].to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cif_catalog::CifCategory;

    fn aventura() -> Cif {
        Cif {
            id: "bro-med-06".to_string(),
            name: "Aventura Hospital and Medical Center".to_string(),
            address: "20900, Biscayne Boulevard, Aventura, Miami-Dade County, Florida, 33180, United States".to_string(),
            lat: None,
            lon: None,
            category: CifCategory::Medical,
            aoi: "Broward County".to_string(),
        }
    }

    #[test]
    fn hurricane_prompt_substitutes_name_and_address() {
        let prompt = render_generation_prompt(&aventura(), &AreaOfInterest::broward_county());
        assert!(prompt.contains(
            "impact of a Category-5 hurricane on Aventura Hospital and Medical Center & 20900, Biscayne Boulevard"
        ));
        assert!(prompt.ends_with("(Tags: ***** , *****)"));
    }

    #[test]
    fn earthquake_prompt_uses_quake_opening() {
        let mut cif = aventura();
        cif.aoi = "Christchurch".to_string();
        let prompt = render_generation_prompt(&cif, &AreaOfInterest::christchurch());
        assert!(prompt.contains("severe earthquake"));
        assert!(prompt.contains("ground shake, landslide, liquefaction"));
    }

    #[test]
    fn prompts_are_pure() {
        let cif = aventura();
        let aoi = AreaOfInterest::broward_county();
        assert_eq!(
            render_generation_prompt(&cif, &aoi),
            render_generation_prompt(&cif, &aoi)
        );
        assert_eq!(
            render_status_label_prompt("same text"),
            render_status_label_prompt("same text")
        );
    }

    #[test]
    fn name_only_slot_when_address_empty() {
        let mut cif = aventura();
        cif.address = String::new();
        assert_eq!(cif_slot(&cif), "Aventura Hospital and Medical Center");
    }

    #[test]
    fn status_prompt_shape() {
        let p = render_status_label_prompt("The computer lab has been closed.");
        assert!(p.starts_with("Your task is to analyze the provided tweet"));
        assert!(p.contains("Tweet: The computer lab has been closed."));
        assert!(p.ends_with("Operational status:"));

        // Empty slot is allowed; the caller validates.
        let empty = render_status_label_prompt("");
        assert!(empty.contains("Tweet: \n"));
    }

    #[test]
    fn parses_tagged_blocks() {
        let response = "Aventura Hospital's emergency room is flooded after a burst of rain caused by the Category 5 hurricane. Patients and staff are being evacuated to safer areas. (Tags: Flooded, Mild)\n\nStrong winds from the hurricane have caused significant damage to Aventura Hospital's roof and windows, leaving many areas closed off to patients and staff. (Tags: Damaged, Severe)";
        let parsed = parse_generated_tweets(response);
        assert_eq!(parsed.tweets.len(), 2);
        assert!(parsed.rejects.is_empty());
        assert_eq!(parsed.tweets[0].raw_impact, "Flooded");
        assert_eq!(parsed.tweets[0].raw_severity, "Mild");
        assert!(parsed.tweets[0].text.ends_with("safer areas."));
        assert_eq!(parsed.tweets[1].raw_impact, "Damaged");
        assert_eq!(parsed.tweets[1].raw_severity, "Severe");
    }

    #[test]
    fn tolerates_case_and_spacing() {
        let parsed = parse_generated_tweets("Some facility update text here. ( tags :  Submerged ,  Severe )");
        assert_eq!(parsed.tweets.len(), 1);
        assert_eq!(parsed.tweets[0].raw_impact, "Submerged");
        assert_eq!(parsed.tweets[0].raw_severity, "Severe");
    }

    #[test]
    fn untagged_blocks_are_rejects() {
        let parsed = parse_generated_tweets("no tags in this block\n\nanother (Tags: only-one)\n\ngood one here (Tags: Cracked, Mild)");
        assert_eq!(parsed.tweets.len(), 1);
        assert_eq!(parsed.rejects.len(), 2);
        assert_eq!(parsed.tweets[0].raw_impact, "Cracked");
    }

    #[test]
    fn empty_response_parses_to_nothing() {
        let parsed = parse_generated_tweets("");
        assert!(parsed.tweets.is_empty());
        assert!(parsed.rejects.is_empty());
    }
}
