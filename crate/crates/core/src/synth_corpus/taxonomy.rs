//! Closed label sets for impact, severity, and operational status, plus the
//! consolidation mapping from raw open-vocabulary impact tags to the 22
//! canonical impact classes.

use serde::{Deserialize, Serialize};

/// The 22 canonical impact classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsolidatedImpact {
    Damaged,
    Flooded,
    Destroyed,
    Weakened,
    Cracked,
    Blocked,
    Torn,
    PowerOutage,
    Ruptured,
    Collapsed,
    Failed,
    Uprooted,
    Eroded,
    WashedAway,
    Slippery,
    Displaced,
    Blown,
    Burnt,
    Unsafe,
    Leakage,
    Sinked,
    UnknownInapplicable,
}

impl ConsolidatedImpact {
    pub const ALL: [ConsolidatedImpact; 22] = [
        ConsolidatedImpact::Damaged,
        ConsolidatedImpact::Flooded,
        ConsolidatedImpact::Destroyed,
        ConsolidatedImpact::Weakened,
        ConsolidatedImpact::Cracked,
        ConsolidatedImpact::Blocked,
        ConsolidatedImpact::Torn,
        ConsolidatedImpact::PowerOutage,
        ConsolidatedImpact::Ruptured,
        ConsolidatedImpact::Collapsed,
        ConsolidatedImpact::Failed,
        ConsolidatedImpact::Uprooted,
        ConsolidatedImpact::Eroded,
        ConsolidatedImpact::WashedAway,
        ConsolidatedImpact::Slippery,
        ConsolidatedImpact::Displaced,
        ConsolidatedImpact::Blown,
        ConsolidatedImpact::Burnt,
        ConsolidatedImpact::Unsafe,
        ConsolidatedImpact::Leakage,
        ConsolidatedImpact::Sinked,
        ConsolidatedImpact::UnknownInapplicable,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConsolidatedImpact::Damaged => "damaged",
            ConsolidatedImpact::Flooded => "flooded",
            ConsolidatedImpact::Destroyed => "destroyed",
            ConsolidatedImpact::Weakened => "weakened",
            ConsolidatedImpact::Cracked => "cracked",
            ConsolidatedImpact::Blocked => "blocked",
            ConsolidatedImpact::Torn => "torn",
            ConsolidatedImpact::PowerOutage => "power_outage",
            ConsolidatedImpact::Ruptured => "ruptured",
            ConsolidatedImpact::Collapsed => "collapsed",
            ConsolidatedImpact::Failed => "failed",
            ConsolidatedImpact::Uprooted => "uprooted",
            ConsolidatedImpact::Eroded => "eroded",
            ConsolidatedImpact::WashedAway => "washed_away",
            ConsolidatedImpact::Slippery => "slippery",
            ConsolidatedImpact::Displaced => "displaced",
            ConsolidatedImpact::Blown => "blown",
            ConsolidatedImpact::Burnt => "burnt",
            ConsolidatedImpact::Unsafe => "unsafe",
            ConsolidatedImpact::Leakage => "leakage",
            ConsolidatedImpact::Sinked => "sinked",
            ConsolidatedImpact::UnknownInapplicable => "unknown_inapplicable",
        }
    }
}

impl std::fmt::Display for ConsolidatedImpact {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Severe,
    Moderate,
    Mild,
    Unknown,
}

impl Severity {
    pub const ALL: [Severity; 4] = [
        Severity::Severe,
        Severity::Moderate,
        Severity::Mild,
        Severity::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Severe => "severe",
            Severity::Moderate => "moderate",
            Severity::Mild => "mild",
            Severity::Unknown => "unknown",
        }
    }
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperationalStatus {
    Open,
    Closed,
    PartiallyOpen,
    PartiallyClosed,
    /// No operational status is explicitly mentioned.
    Unknown,
}

impl OperationalStatus {
    pub const ALL: [OperationalStatus; 5] = [
        OperationalStatus::Open,
        OperationalStatus::Closed,
        OperationalStatus::PartiallyOpen,
        OperationalStatus::PartiallyClosed,
        OperationalStatus::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OperationalStatus::Open => "open",
            OperationalStatus::Closed => "closed",
            OperationalStatus::PartiallyOpen => "partially_open",
            OperationalStatus::PartiallyClosed => "partially_closed",
            OperationalStatus::Unknown => "unknown",
        }
    }
}

impl std::fmt::Display for OperationalStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the four six-hour windows partitioning the 24-hour timeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TimeInterval {
    #[serde(rename = "0h-6h")]
    H0_6,
    #[serde(rename = "6h-12h")]
    H6_12,
    #[serde(rename = "12h-18h")]
    H12_18,
    #[serde(rename = "18h-24h")]
    H18_24,
}

impl TimeInterval {
    pub const ALL: [TimeInterval; 4] = [
        TimeInterval::H0_6,
        TimeInterval::H6_12,
        TimeInterval::H12_18,
        TimeInterval::H18_24,
    ];

    pub fn code(self) -> u8 {
        match self {
            TimeInterval::H0_6 => 0,
            TimeInterval::H6_12 => 1,
            TimeInterval::H12_18 => 2,
            TimeInterval::H18_24 => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<TimeInterval> {
        TimeInterval::ALL.get(usize::from(code)).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TimeInterval::H0_6 => "0h-6h",
            TimeInterval::H6_12 => "6h-12h",
            TimeInterval::H12_18 => "12h-18h",
            TimeInterval::H18_24 => "18h-24h",
        }
    }
}

impl std::fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Interval restriction for queries and metrics: one window or the whole day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum IntervalSelector {
    Interval(TimeInterval),
    FullDay,
}

impl Serialize for IntervalSelector {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for IntervalSelector {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = String::deserialize(de)?;
        IntervalSelector::ALL
            .iter()
            .copied()
            .find(|sel| sel.as_str() == s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown interval {s:?}")))
    }
}

impl IntervalSelector {
    pub const ALL: [IntervalSelector; 5] = [
        IntervalSelector::Interval(TimeInterval::H0_6),
        IntervalSelector::Interval(TimeInterval::H6_12),
        IntervalSelector::Interval(TimeInterval::H12_18),
        IntervalSelector::Interval(TimeInterval::H18_24),
        IntervalSelector::FullDay,
    ];

    pub fn matches(self, interval: TimeInterval) -> bool {
        match self {
            IntervalSelector::Interval(i) => i == interval,
            IntervalSelector::FullDay => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            IntervalSelector::Interval(i) => i.as_str(),
            IntervalSelector::FullDay => "0h-24h",
        }
    }
}

impl std::fmt::Display for IntervalSelector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Raw-to-consolidated mapping rows, in table order. Where a raw phrase is
/// listed under more than one consolidated label ("structurally compromised",
/// "gas leak"), the earlier row owns it.
pub const CONSOLIDATION_TABLE: &[(ConsolidatedImpact, &[&str])] = &[
    (
        ConsolidatedImpact::Damaged,
        &[
            "aftershock damage",
            "damage",
            "damaged",
            "broken windows",
            "damaged infrastructure",
            "damaged roads",
            "damaged roofs",
            "damaged walls",
            "electrical damage",
            "coastal ecosystem damage",
            "foundation damage",
            "landscaping damage",
            "exterior damage",
            "hvac damage",
            "infrastructure damage",
            "roof damage",
            "plumbing damage",
            "sewage system damage",
            "structural damage",
            "wall damage",
            "water damage",
            "equipment damage",
            "damaged foundation",
            "interior damage",
            "IT damage",
            "liquefaction damage",
            "partially damaged",
            "pavement damage",
            "plumbing damage",
            "IT infrastructure damage",
            "equipment damage",
            "paint damage",
        ],
    ),
    (
        ConsolidatedImpact::Flooded,
        &[
            "flooded basement",
            "flooded businesses",
            "flooded parking lot",
            "flooding",
            "severe flooding",
            "flash flooding",
            "submerged",
            "inundated",
        ],
    ),
    (
        ConsolidatedImpact::Destroyed,
        &["destroyed", "destroyed buildings", "destroyed homes", "rubble"],
    ),
    (
        ConsolidatedImpact::Weakened,
        &["weakened", "structurally compromised"],
    ),
    (
        ConsolidatedImpact::Cracked,
        &[
            "cracked",
            "shattered",
            "shattered windows",
            "debris",
            "cracked wall",
            "cracked walls",
        ],
    ),
    (
        ConsolidatedImpact::Blocked,
        &[
            "blocked access",
            "blocked entrance",
            "impassable",
            "obstructed",
            "clogged sewage",
            "inaccessible",
            "partially blocked",
            "landslide",
            "jammed doors",
        ],
    ),
    (
        ConsolidatedImpact::Torn,
        &["partially torn off", "roof torn off"],
    ),
    (
        ConsolidatedImpact::PowerOutage,
        &[
            "power line down",
            "power loss",
            "power outage",
            "power down",
            "communication down",
            "communication loss",
            "down",
            "knocked out",
            "disrupted",
            "downed trees",
            "offline",
        ],
    ),
    (
        ConsolidatedImpact::Ruptured,
        &["blown open", "gas leak", "roof leak"],
    ),
    (
        ConsolidatedImpact::Collapsed,
        &[
            "partially collapsed",
            "collapsed",
            "crushed",
            "collapse risk",
            "collapsed wall",
            "collapsed chimney",
            "partially collapsed roof",
        ],
    ),
    (
        ConsolidatedImpact::Failed,
        &["generator failure", "ventilation failure", "out of order"],
    ),
    (
        ConsolidatedImpact::Uprooted,
        &["uprooted", "uprooted power lines"],
    ),
    (ConsolidatedImpact::Eroded, &["eroded", "erosion"]),
    (ConsolidatedImpact::WashedAway, &["washed away", "muddy"]),
    (ConsolidatedImpact::Slippery, &["slippery", "slick"]),
    (ConsolidatedImpact::Displaced, &["displaced"]),
    (ConsolidatedImpact::Blown, &["blown", "blown off"]),
    (ConsolidatedImpact::Burnt, &["burnt", "burning", "fire"]),
    (
        ConsolidatedImpact::Unsafe,
        &[
            "unsafe",
            "unstable",
            "structurally compromised",
            "uninhabitable",
            "contaminated",
        ],
    ),
    (
        ConsolidatedImpact::Leakage,
        &["leak", "gas leak", "gasleak"],
    ),
    (
        ConsolidatedImpact::Sinked,
        &[
            "ground liquefaction",
            "liquefaction",
            "buried",
            "sinked",
            "sinking",
            "caved-in",
            "ground rupture",
            "liquefied",
        ],
    ),
    (
        ConsolidatedImpact::UnknownInapplicable,
        &["not applicable", "not humanitarian", "no impact", "unknown"],
    ),
];

/// Additions beyond the raw-label table: descriptors that appear in the
/// classification prompt but not in the table. Flagged separately so the
/// extension is auditable.
pub const CONSOLIDATION_EXTENSIONS: &[(ConsolidatedImpact, &[&str])] =
    &[(ConsolidatedImpact::Damaged, &["ground shake"])];

/// Case-fold, underscores to spaces, collapse internal whitespace, trim.
pub fn normalize_label(raw: &str) -> String {
    raw.to_lowercase()
        .replace('_', " ")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Map a raw impact tag onto the consolidated taxonomy. Consolidated label
/// names act as their own keys; anything unmapped lands in
/// `unknown_inapplicable`.
pub fn consolidate_impact(raw: &str) -> ConsolidatedImpact {
    let key = normalize_label(raw);
    if key.is_empty() {
        return ConsolidatedImpact::UnknownInapplicable;
    }
    if key == "unknown/inapplicable" || key == "unknown inapplicable" {
        return ConsolidatedImpact::UnknownInapplicable;
    }
    // Identity on the consolidated names (the table omits some of them from
    // its raw-label column, e.g. "flooded" and "ruptured").
    for label in ConsolidatedImpact::ALL {
        if key == normalize_label(label.as_str()) {
            return label;
        }
    }
    for &(label, raws) in CONSOLIDATION_TABLE {
        for r in raws {
            if key == normalize_label(r) {
                return label;
            }
        }
    }
    for &(label, raws) in CONSOLIDATION_EXTENSIONS {
        for r in raws {
            if key == normalize_label(r) {
                return label;
            }
        }
    }
    ConsolidatedImpact::UnknownInapplicable
}

/// Severity strings outside the closed set collapse to `unknown`.
pub fn parse_severity(raw: &str) -> Severity {
    match normalize_label(raw).as_str() {
        "severe" => Severity::Severe,
        "moderate" => Severity::Moderate,
        "mild" => Severity::Mild,
        _ => Severity::Unknown,
    }
}

const STATUS_KEYWORDS: [(&str, OperationalStatus); 5] = [
    ("partially closed", OperationalStatus::PartiallyClosed),
    ("partially open", OperationalStatus::PartiallyOpen),
    ("closed", OperationalStatus::Closed),
    ("open", OperationalStatus::Open),
    ("unknown", OperationalStatus::Unknown),
];

/// Scan a model response for the first operational-status keyword. Matches
/// are longest-first at the same position ("partially closed" wins over
/// "closed"); no keyword at all means `unknown`.
pub fn parse_status_response(response: &str) -> OperationalStatus {
    let haystack = response.to_lowercase();
    let mut best: Option<(usize, usize, OperationalStatus)> = None;
    for (needle, status) in STATUS_KEYWORDS {
        if let Some(pos) = haystack.find(needle) {
            let candidate = (pos, needle.len(), status);
            best = Some(match best {
                None => candidate,
                Some(cur) => {
                    // Earlier position wins; longer keyword wins a tie.
                    if candidate.0 < cur.0 || (candidate.0 == cur.0 && candidate.1 > cur.1) {
                        candidate
                    } else {
                        cur
                    }
                }
            });
        }
    }
    best.map_or(OperationalStatus::Unknown, |(_, _, s)| s)
}

/// Default dispersal precedence over the 22 impact classes, most severe
/// first. Overridable through configuration.
pub const DEFAULT_IMPACT_PRECEDENCE: [ConsolidatedImpact; 22] = [
    ConsolidatedImpact::Destroyed,
    ConsolidatedImpact::Collapsed,
    ConsolidatedImpact::Burnt,
    ConsolidatedImpact::Flooded,
    ConsolidatedImpact::Sinked,
    ConsolidatedImpact::WashedAway,
    ConsolidatedImpact::Ruptured,
    ConsolidatedImpact::Torn,
    ConsolidatedImpact::Uprooted,
    ConsolidatedImpact::Blown,
    ConsolidatedImpact::Eroded,
    ConsolidatedImpact::Cracked,
    ConsolidatedImpact::Weakened,
    ConsolidatedImpact::Unsafe,
    ConsolidatedImpact::Leakage,
    ConsolidatedImpact::Blocked,
    ConsolidatedImpact::Displaced,
    ConsolidatedImpact::Slippery,
    ConsolidatedImpact::Failed,
    ConsolidatedImpact::PowerOutage,
    ConsolidatedImpact::Damaged,
    ConsolidatedImpact::UnknownInapplicable,
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn consolidates_table_samples() {
        assert_eq!(consolidate_impact("submerged"), ConsolidatedImpact::Flooded);
        assert_eq!(
            consolidate_impact("partially collapsed roof"),
            ConsolidatedImpact::Collapsed
        );
        assert_eq!(
            consolidate_impact("xyzzy"),
            ConsolidatedImpact::UnknownInapplicable
        );
    }

    #[test]
    fn consolidation_is_case_and_whitespace_insensitive() {
        assert_eq!(consolidate_impact("  Submerged "), ConsolidatedImpact::Flooded);
        assert_eq!(consolidate_impact("POWER   OUTAGE"), ConsolidatedImpact::PowerOutage);
        assert_eq!(
            consolidate_impact("not_applicable"),
            ConsolidatedImpact::UnknownInapplicable
        );
    }

    #[test]
    fn consolidated_names_map_to_themselves() {
        for label in ConsolidatedImpact::ALL {
            assert_eq!(consolidate_impact(label.as_str()), label, "{label}");
        }
    }

    #[test]
    fn cross_row_duplicates_resolve_to_first_row() {
        assert_eq!(
            consolidate_impact("structurally compromised"),
            ConsolidatedImpact::Weakened
        );
        assert_eq!(consolidate_impact("gas leak"), ConsolidatedImpact::Ruptured);
    }

    #[test]
    fn prompt_only_descriptors_consolidate() {
        assert_eq!(consolidate_impact("ground shake"), ConsolidatedImpact::Damaged);
        assert_eq!(consolidate_impact("buried"), ConsolidatedImpact::Sinked);
        assert_eq!(
            consolidate_impact("ground liquefaction"),
            ConsolidatedImpact::Sinked
        );
    }

    #[test]
    fn status_parsing_rules() {
        assert_eq!(
            parse_status_response("Operational status: closed"),
            OperationalStatus::Closed
        );
        assert_eq!(
            parse_status_response("The facility is partially open for emergencies."),
            OperationalStatus::PartiallyOpen
        );
        assert_eq!(parse_status_response("no idea"), OperationalStatus::Unknown);
        assert_eq!(
            parse_status_response("partially closed for repairs"),
            OperationalStatus::PartiallyClosed
        );
        assert_eq!(parse_status_response(""), OperationalStatus::Unknown);
    }

    #[test]
    fn severity_parsing_closed_set() {
        assert_eq!(parse_severity("Severe"), Severity::Severe);
        assert_eq!(parse_severity(" mild"), Severity::Mild);
        assert_eq!(parse_severity("low"), Severity::Unknown);
        assert_eq!(parse_severity("catastrophic"), Severity::Unknown);
    }

    #[test]
    fn precedence_covers_all_labels_once() {
        let mut seen = std::collections::BTreeSet::new();
        for label in DEFAULT_IMPACT_PRECEDENCE {
            assert!(seen.insert(label), "duplicate {label}");
        }
        assert_eq!(seen.len(), 22);
    }

    #[test]
    fn interval_codes_round_trip() {
        for interval in TimeInterval::ALL {
            assert_eq!(TimeInterval::from_code(interval.code()), Some(interval));
        }
        assert_eq!(TimeInterval::from_code(4), None);
    }

    #[test]
    fn interval_selector_serde_forms() {
        let full: IntervalSelector = serde_json::from_str("\"0h-24h\"").unwrap();
        assert_eq!(full, IntervalSelector::FullDay);
        let h6: IntervalSelector = serde_json::from_str("\"6h-12h\"").unwrap();
        assert_eq!(h6, IntervalSelector::Interval(TimeInterval::H6_12));
        assert_eq!(serde_json::to_string(&IntervalSelector::FullDay).unwrap(), "\"0h-24h\"");
    }
}
