//! Catalogs of Critical Infrastructure Facilities for an area of interest,
//! fetched from a Nominatim-style geocoding endpoint or loaded from bundled
//! fixture files.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, CoreResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisasterKind {
    Hurricane,
    Earthquake,
}

/// The geographic region whose facilities and disaster type define an
/// experiment, together with its impact-term set for query expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaOfInterest {
    pub name: String,
    pub disaster_kind: DisasterKind,
    pub impact_terms: Vec<String>,
}

impl AreaOfInterest {
    pub fn broward_county() -> AreaOfInterest {
        AreaOfInterest {
            name: "Broward County".to_string(),
            disaster_kind: DisasterKind::Hurricane,
            impact_terms: [
                "flooded",
                "submerged",
                "damaged",
                "destroyed",
                "weakened",
                "cracked",
                "blocked",
                "torn",
                "power outage",
                "ruptured",
                "collapsed",
                "failed",
                "uprooted",
                "eroded",
                "burnt",
                "washed away",
                "slippery",
                "displaced",
                "disrupted",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }

    pub fn christchurch() -> AreaOfInterest {
        AreaOfInterest {
            name: "Christchurch".to_string(),
            disaster_kind: DisasterKind::Earthquake,
            impact_terms: [
                "flooded",
                "destroyed",
                "leak",
                "blocked",
                "cracked",
                "ground liquefaction",
                "power outage",
                "ruptured",
                "buried",
                "collapsed",
                "ground shake",
                "unsafe",
                "muddy",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }

    /// Look up one of the shipped AOIs by display name.
    pub fn builtin(name: &str) -> Option<AreaOfInterest> {
        match name {
            "Broward County" => Some(AreaOfInterest::broward_county()),
            "Christchurch" => Some(AreaOfInterest::christchurch()),
            _ => None,
        }
    }

    pub fn validate(&self) -> CoreResult<()> {
        if self.name.is_empty() {
            return Err(CoreError::Config("AOI name must be non-empty".into()));
        }
        if self.impact_terms.is_empty() {
            return Err(CoreError::Config(format!(
                "AOI {:?} has no impact terms",
                self.name
            )));
        }
        let mut seen = BTreeSet::new();
        for term in &self.impact_terms {
            if !seen.insert(term.as_str()) {
                return Err(CoreError::Config(format!(
                    "AOI {:?} lists impact term {term:?} twice",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CifCategory {
    FireStation,
    Medical,
    Educational,
    Airport,
    BridgeTunnelRail,
}

impl CifCategory {
    pub const ALL: [CifCategory; 5] = [
        CifCategory::FireStation,
        CifCategory::Medical,
        CifCategory::Educational,
        CifCategory::Airport,
        CifCategory::BridgeTunnelRail,
    ];

    /// Search phrase appended to the AOI name when querying the geocoder.
    pub fn query_phrase(self) -> &'static str {
        match self {
            CifCategory::FireStation => "fire stations",
            CifCategory::Medical => "hospitals",
            CifCategory::Educational => "schools",
            CifCategory::Airport => "airports",
            CifCategory::BridgeTunnelRail => "railway stations",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CifCategory::FireStation => "fire_station",
            CifCategory::Medical => "medical",
            CifCategory::Educational => "educational",
            CifCategory::Airport => "airport",
            CifCategory::BridgeTunnelRail => "bridge_tunnel_rail",
        }
    }
}

impl std::fmt::Display for CifCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A named critical facility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cif {
    pub id: String,
    pub name: String,
    pub address: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub category: CifCategory,
    pub aoi: String,
}

impl Cif {
    pub fn validate(&self) -> CoreResult<()> {
        if self.id.is_empty() {
            return Err(CoreError::Data("CIF id must be non-empty".into()));
        }
        if self.name.is_empty() {
            return Err(CoreError::Data(format!("CIF {:?} has empty name", self.id)));
        }
        if let Some(lat) = self.lat {
            if !(-90.0..=90.0).contains(&lat) {
                return Err(CoreError::Data(format!("CIF {:?} lat {lat} out of range", self.id)));
            }
        }
        if let Some(lon) = self.lon {
            if !(-180.0..=180.0).contains(&lon) {
                return Err(CoreError::Data(format!("CIF {:?} lon {lon} out of range", self.id)));
            }
        }
        Ok(())
    }

    /// Dedup key: case-folded name plus coordinates rounded to 4 decimals.
    fn dedup_key(&self) -> (String, Option<(i64, i64)>) {
        let coords = match (self.lat, self.lon) {
            (Some(lat), Some(lon)) => {
                Some(((lat * 1e4).round() as i64, ((lon * 1e4).round() as i64)))
            }
            _ => None,
        };
        (self.name.to_lowercase(), coords)
    }
}

/// Build the geocoder search string for one (AOI, category) pair.
pub fn build_geocode_query(aoi: &AreaOfInterest, category: CifCategory) -> String {
    format!("{} {}", aoi.name, category.query_phrase())
}

#[derive(Debug, Clone)]
pub enum CatalogSource {
    Live { endpoint: String },
    Fixture { path: PathBuf },
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    /// Politeness delay between live requests.
    pub delay_ms: u64,
    /// Where raw responses are cached (`<dir>/<aoi>/<category>.json`).
    pub cache_dir: Option<PathBuf>,
    /// Per-query result cap sent to the geocoder.
    pub limit: u32,
}

impl Default for FetchOptions {
    fn default() -> Self {
        FetchOptions {
            delay_ms: 1100,
            cache_dir: None,
            limit: 50,
        }
    }
}

#[derive(Debug, Deserialize)]
struct GeocodePlace {
    place_id: serde_json::Value,
    display_name: String,
    lat: String,
    lon: String,
    #[serde(default)]
    name: Option<String>,
}

/// Fetch the catalog for an AOI, either live (one search request per
/// category, sequential, rate-limited) or from a fixture file. Results are
/// deduplicated; an empty result set is not an error.
pub fn fetch_cifs(
    aoi: &AreaOfInterest,
    categories: &[CifCategory],
    source: &CatalogSource,
    opts: &FetchOptions,
) -> CoreResult<Vec<Cif>> {
    aoi.validate()?;
    let raw = match source {
        CatalogSource::Fixture { path } => {
            let all = load_catalog(path)?;
            all.into_iter()
                .filter(|c| c.aoi == aoi.name && categories.contains(&c.category))
                .collect::<Vec<_>>()
        }
        CatalogSource::Live { endpoint } => {
            let mut out = Vec::new();
            for (i, &category) in categories.iter().enumerate() {
                if i > 0 && opts.delay_ms > 0 {
                    std::thread::sleep(Duration::from_millis(opts.delay_ms));
                }
                out.extend(fetch_category_live(aoi, category, endpoint, opts)?);
            }
            out
        }
    };
    Ok(dedup_cifs(raw))
}

fn fetch_category_live(
    aoi: &AreaOfInterest,
    category: CifCategory,
    endpoint: &str,
    opts: &FetchOptions,
) -> CoreResult<Vec<Cif>> {
    let query = build_geocode_query(aoi, category);
    let url = format!(
        "{endpoint}?q={}&format=jsonv2&limit={}",
        percent_encode(&query),
        opts.limit
    );
    let mut response = ureq::get(&url)
        .header("User-Agent", "cifwatch/0.1 (facility catalog builder)")
        .call()
        .map_err(|e| CoreError::Network {
            query: query.clone(),
            msg: e.to_string(),
        })?;
    let body = response
        .body_mut()
        .read_to_string()
        .map_err(|e| CoreError::Network {
            query: query.clone(),
            msg: e.to_string(),
        })?;

    if let Some(dir) = &opts.cache_dir {
        let cache_path = dir.join(slug(&aoi.name)).join(format!("{}.json", category.as_str()));
        if let Some(parent) = cache_path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
        std::fs::write(&cache_path, &body).map_err(|e| CoreError::io(&cache_path, e))?;
    }

    let places: Vec<GeocodePlace> =
        serde_json::from_str(&body).map_err(|e| CoreError::MalformedResponse {
            msg: format!("geocoder response for {query:?}: {e}"),
            excerpt: excerpt(&body),
        })?;

    let mut cifs = Vec::new();
    for place in places {
        let name = match place.name.filter(|n| !n.is_empty()) {
            Some(n) => n,
            None => place
                .display_name
                .split(',')
                .next()
                .unwrap_or_default()
                .trim()
                .to_string(),
        };
        if name.is_empty() {
            continue;
        }
        cifs.push(Cif {
            id: format!("osm-{}", place.place_id),
            name,
            address: place.display_name,
            lat: place.lat.parse().ok(),
            lon: place.lon.parse().ok(),
            category,
            aoi: aoi.name.clone(),
        });
    }
    Ok(cifs)
}

fn dedup_cifs(cifs: Vec<Cif>) -> Vec<Cif> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(cifs.len());
    for cif in cifs {
        let key = cif.dedup_key();
        if seen.insert(key) {
            out.push(cif);
        }
    }
    out
}

fn percent_encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for byte in s.bytes() {
        match byte {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'.' | b'_' | b'~' => {
                out.push(byte as char)
            }
            _ => out.push_str(&format!("%{byte:02X}")),
        }
    }
    out
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect()
}

fn excerpt(body: &str) -> String {
    body.chars().take(200).collect()
}

/// Write a catalog as JSON-lines, one facility per line.
pub fn save_catalog(cifs: &[Cif], path: &Path) -> CoreResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| CoreError::io(parent, e))?;
        }
    }
    let file = std::fs::File::create(path).map_err(|e| CoreError::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for cif in cifs {
        let line = serde_json::to_string(cif)
            .map_err(|e| CoreError::Data(format!("serializing CIF {:?}: {e}", cif.id)))?;
        writeln!(w, "{line}").map_err(|e| CoreError::io(path, e))?;
    }
    w.flush().map_err(|e| CoreError::io(path, e))
}

/// Load a JSON-lines catalog; schema violations name the offending line.
pub fn load_catalog(path: &Path) -> CoreResult<Vec<Cif>> {
    let file = std::fs::File::open(path).map_err(|e| CoreError::io(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CoreError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let cif: Cif = serde_json::from_str(&line)
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        cif.validate()
            .map_err(|e| CoreError::schema(path, idx + 1, e.to_string()))?;
        out.push(cif);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cif(id: &str, name: &str, lat: f64, lon: f64) -> Cif {
        Cif {
            id: id.to_string(),
            name: name.to_string(),
            address: String::new(),
            lat: Some(lat),
            lon: Some(lon),
            category: CifCategory::Medical,
            aoi: "Christchurch".to_string(),
        }
    }

    #[test]
    fn geocode_query_examples() {
        let chch = AreaOfInterest::christchurch();
        assert_eq!(
            build_geocode_query(&chch, CifCategory::Medical),
            "Christchurch hospitals"
        );
        assert_eq!(
            build_geocode_query(&chch, CifCategory::FireStation),
            "Christchurch fire stations"
        );
        let broward = AreaOfInterest::broward_county();
        assert_eq!(
            build_geocode_query(&broward, CifCategory::Airport),
            "Broward County airports"
        );
    }

    #[test]
    fn geocode_query_is_pure() {
        let aoi = AreaOfInterest::christchurch();
        assert_eq!(
            build_geocode_query(&aoi, CifCategory::Educational),
            build_geocode_query(&aoi, CifCategory::Educational)
        );
    }

    #[test]
    fn builtin_aoi_term_sets() {
        let broward = AreaOfInterest::broward_county();
        assert_eq!(broward.impact_terms.len(), 19);
        assert_eq!(broward.disaster_kind, DisasterKind::Hurricane);
        broward.validate().unwrap();

        let chch = AreaOfInterest::christchurch();
        assert_eq!(chch.impact_terms.len(), 13);
        assert_eq!(chch.disaster_kind, DisasterKind::Earthquake);
        chch.validate().unwrap();

        assert!(AreaOfInterest::builtin("Nowhere").is_none());
    }

    #[test]
    fn catalog_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.jsonl");
        let cifs = vec![
            cif("a", "Christchurch Hospital", -43.5336, 172.6260),
            Cif {
                id: "b".to_string(),
                name: "Wigram Fire Station".to_string(),
                address: "".to_string(),
                lat: None,
                lon: None,
                category: CifCategory::FireStation,
                aoi: "Christchurch".to_string(),
            },
        ];
        save_catalog(&cifs, &path).unwrap();
        let loaded = load_catalog(&path).unwrap();
        assert_eq!(loaded, cifs);
    }

    #[test]
    fn empty_catalog_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.jsonl");
        save_catalog(&[], &path).unwrap();
        assert_eq!(load_catalog(&path).unwrap(), Vec::<Cif>::new());
    }

    #[test]
    fn load_reports_line_of_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        let good = serde_json::to_string(&cif("a", "A", 0.0, 0.0)).unwrap();
        std::fs::write(
            &path,
            format!("{good}\n{{\"id\":\"x\",\"address\":\"\",\"lat\":null,\"lon\":null,\"category\":\"medical\",\"aoi\":\"Christchurch\"}}\n"),
        )
        .unwrap();
        let err = load_catalog(&path).unwrap_err();
        match err {
            CoreError::Schema { line, msg, .. } => {
                assert_eq!(line, 2);
                assert!(msg.contains("name"), "{msg}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn dedup_uses_name_and_rounded_coords() {
        let cifs = vec![
            cif("a", "Triton Hearing", -43.50001, 172.60001),
            cif("b", "triton hearing", -43.50003, 172.60002), // same at 4 decimals
            cif("c", "Triton Hearing", -43.51, 172.60),
            cif("d", "Triton Hearing Clinic, St Albans", -43.50001, 172.60001),
        ];
        let out = dedup_cifs(cifs);
        let ids: Vec<_> = out.iter().map(|c| c.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "c", "d"]);
    }

    #[test]
    fn empty_category_list_yields_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("catalog.jsonl");
        save_catalog(&[cif("a", "A", 0.0, 0.0)], &path).unwrap();
        let got = fetch_cifs(
            &AreaOfInterest::christchurch(),
            &[],
            &CatalogSource::Fixture { path },
            &FetchOptions::default(),
        )
        .unwrap();
        assert!(got.is_empty());
    }

    #[test]
    fn live_fetch_parses_and_caches() {
        use std::io::{Read, Write};

        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let body = r#"[{"place_id": 42, "display_name": "Christchurch Hospital, 2 Riccarton Avenue, Christchurch", "lat": "-43.5336", "lon": "172.6260", "name": "Christchurch Hospital"}]"#;
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(response.as_bytes()).unwrap();
        });

        let dir = tempfile::tempdir().unwrap();
        let opts = FetchOptions {
            delay_ms: 0,
            cache_dir: Some(dir.path().to_path_buf()),
            limit: 50,
        };
        let got = fetch_cifs(
            &AreaOfInterest::christchurch(),
            &[CifCategory::Medical],
            &CatalogSource::Live {
                endpoint: format!("http://{addr}/search"),
            },
            &opts,
        )
        .unwrap();
        handle.join().unwrap();

        assert_eq!(got.len(), 1);
        assert_eq!(got[0].name, "Christchurch Hospital");
        assert_eq!(got[0].id, "osm-42");
        assert_eq!(got[0].lat, Some(-43.5336));
        assert!(dir.path().join("christchurch/medical.json").exists());
    }

    #[test]
    fn live_fetch_network_error_is_retriable_and_names_query() {
        // Nothing listens on this port.
        let got = fetch_cifs(
            &AreaOfInterest::christchurch(),
            &[CifCategory::Medical],
            &CatalogSource::Live {
                endpoint: "http://127.0.0.1:1/search".to_string(),
            },
            &FetchOptions {
                delay_ms: 0,
                cache_dir: None,
                limit: 50,
            },
        );
        match got {
            Err(CoreError::Network { query, .. }) => {
                assert_eq!(query, "Christchurch hospitals");
            }
            other => panic!("expected network error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_live_response_carries_excerpt() {
        use std::io::{Read, Write};

        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut buf = [0u8; 4096];
            let _ = stream.read(&mut buf);
            let body = "<html>not json</html>";
            let response = format!(
                "HTTP/1.1 200 OK\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                body.len(),
                body
            );
            stream.write_all(response.as_bytes()).unwrap();
        });

        let got = fetch_cifs(
            &AreaOfInterest::christchurch(),
            &[CifCategory::Medical],
            &CatalogSource::Live {
                endpoint: format!("http://{addr}/search"),
            },
            &FetchOptions {
                delay_ms: 0,
                cache_dir: None,
                limit: 50,
            },
        );
        handle.join().unwrap();
        match got {
            Err(CoreError::MalformedResponse { excerpt, .. }) => {
                assert!(excerpt.contains("not json"));
            }
            other => panic!("expected malformed response, got {other:?}"),
        }
    }
}
