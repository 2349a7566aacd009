//! Comment ingestion: parsing, filtering, deterministic sampling, week
//! bucketing and community categorization.
//!
//! Every function here is pure, so an input stream can be split across any
//! number of workers and the accepted set stays the same.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;
use xxhash_rust::xxh64::xxh64;

/// Seconds in one week bucket.
pub const WEEK_SECONDS: i64 = 604_800;

/// 2015-01-01T00:00:00Z, the default week anchor.
pub const DEFAULT_ANCHOR: i64 = 1_420_070_400;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed comment line: {0}")]
    MalformedLine(String),
    #[error("timestamp {created_utc} precedes week anchor {anchor}")]
    BeforeAnchor { created_utc: i64, anchor: i64 },
    #[error("invalid filter config: {0}")]
    InvalidConfig(String),
    #[error("subreddit {0:?} is listed as both political and default")]
    OverlappingTaxonomy(String),
    #[error("taxonomy: {0}")]
    Taxonomy(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One comment from a dump.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawComment {
    pub id: String,
    pub author: String,
    pub subreddit: String,
    pub body: String,
    pub score: i64,
    #[serde(deserialize_with = "integer_or_numeric_string")]
    pub created_utc: i64,
}

// Older public dumps store `created_utc` as a decimal string.
fn integer_or_numeric_string<'de, D: Deserializer<'de>>(d: D) -> Result<i64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Int(i64),
        Str(String),
    }
    match Repr::deserialize(d)? {
        Repr::Int(v) => Ok(v),
        Repr::Str(s) => s
            .parse::<i64>()
            .map_err(|_| serde::de::Error::custom(format!("non-integer timestamp {s:?}"))),
    }
}

/// Parses one JSON-lines record. Unknown fields are ignored and the body is
/// kept exactly as decoded.
pub fn parse_comment_line(line: &str) -> Result<RawComment, CorpusError> {
    let c: RawComment =
        serde_json::from_str(line).map_err(|e| CorpusError::MalformedLine(e.to_string()))?;
    if c.id.is_empty() {
        return Err(CorpusError::MalformedLine("empty id".into()));
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Minimum body length in Unicode scalar values.
    pub min_body_length: usize,
    pub excluded_author: String,
    pub sample_rate: f64,
    pub sample_seed: u64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_body_length: 10,
            excluded_author: "[deleted]".to_string(),
            sample_rate: 0.1,
            sample_seed: 0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if !(self.sample_rate > 0.0 && self.sample_rate <= 1.0) {
            return Err(CorpusError::InvalidConfig(format!(
                "sample_rate must lie in (0, 1], got {}",
                self.sample_rate
            )));
        }
        Ok(())
    }
}

pub fn passes_filter(c: &RawComment, cfg: &FilterConfig) -> bool {
    c.body.chars().count() >= cfg.min_body_length && c.author != cfg.excluded_author
}

/// Keyed hash of `id` mapped onto `[0, 1)`.
pub fn sample_point(id: &str, seed: u64) -> f64 {
    let h = xxh64(id.as_bytes(), seed);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Deterministic per `(id, seed)`, independent of read order.
pub fn sample_decision(id: &str, cfg: &FilterConfig) -> bool {
    sample_point(id, cfg.sample_seed) < cfg.sample_rate
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeekIndex(pub u32);

impl fmt::Display for WeekIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

pub fn week_of(created_utc: i64, anchor: i64) -> Result<WeekIndex, CorpusError> {
    if created_utc < anchor {
        return Err(CorpusError::BeforeAnchor {
            created_utc,
            anchor,
        });
    }
    let weeks = (created_utc - anchor) / WEEK_SECONDS;
    u32::try_from(weeks)
        .map(WeekIndex)
        .map_err(|_| CorpusError::InvalidConfig(format!("week index {weeks} out of range")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Political,
    Default,
    Other,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Political, Category::Default, Category::Other];

    pub fn is_political(self) -> bool {
        self == Category::Political
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Political => "political",
            Category::Default => "default",
            Category::Other => "other",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Political and default community lists. Anything else is "other".
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubredditTaxonomy {
    political: HashSet<String>,
    default: HashSet<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaxonomyFile {
    political: Vec<String>,
    default: Vec<String>,
}

fn canonical_name(name: &str) -> String {
    name.trim().to_lowercase()
}

impl SubredditTaxonomy {
    pub fn new<P, D>(political: P, default: D) -> Result<Self, CorpusError>
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        D: IntoIterator,
        D::Item: AsRef<str>,
    {
        let political: HashSet<String> = political
            .into_iter()
            .map(|s| canonical_name(s.as_ref()))
            .collect();
        let default: HashSet<String> = default
            .into_iter()
            .map(|s| canonical_name(s.as_ref()))
            .collect();
        let mut overlap: Vec<&String> = political.intersection(&default).collect();
        overlap.sort();
        if let Some(name) = overlap.first() {
            return Err(CorpusError::OverlappingTaxonomy((*name).clone()));
        }
        Ok(Self { political, default })
    }

    pub fn from_json(json: &str) -> Result<Self, CorpusError> {
        let file: TaxonomyFile =
            serde_json::from_str(json).map_err(|e| CorpusError::Taxonomy(e.to_string()))?;
        Self::new(file.political, file.default)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Sorted JSON form, stable across runs.
    pub fn to_json(&self) -> String {
        let mut political: Vec<String> = self.political.iter().cloned().collect();
        let mut default: Vec<String> = self.default.iter().cloned().collect();
        political.sort();
        default.sort();
        serde_json::to_string_pretty(&TaxonomyFile { political, default })
            .expect("taxonomy serializes")
    }

    /// A partial reference list of well-known political and default
    /// communities. Supply a complete list with [`SubredditTaxonomy::load`].
    pub fn reference() -> Self {
        Self::from_json(include_str!("../resources/taxonomy.json"))
            .expect("bundled taxonomy is valid")
    }

    pub fn categorize(&self, subreddit: &str) -> Category {
        let name = canonical_name(subreddit);
        if self.political.contains(&name) {
            Category::Political
        } else if self.default.contains(&name) {
            Category::Default
        } else {
            Category::Other
        }
    }
}

pub fn categorize(subreddit: &str, tax: &SubredditTaxonomy) -> Category {
    tax.categorize(subreddit)
}

/// Inclusive-exclusive `[start, end)` window on `created_utc`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudyWindow {
    pub start: i64,
    pub end: i64,
}

impl StudyWindow {
    pub fn contains(&self, t: i64) -> bool {
        t >= self.start && t < self.end
    }
}

/// Why a line did or did not survive ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accepted(RawComment),
    Malformed,
    TooShort,
    DeletedAuthor,
    OutOfWindow,
    NotSampled,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunnelStats {
    pub read: u64,
    pub malformed: u64,
    pub filtered_short: u64,
    pub filtered_deleted: u64,
    pub out_of_window: u64,
    pub not_sampled: u64,
    pub sampled: u64,
}

impl FunnelStats {
    pub fn record(&mut self, v: &Verdict) {
        self.read += 1;
        match v {
            Verdict::Accepted(_) => self.sampled += 1,
            Verdict::Malformed => self.malformed += 1,
            Verdict::TooShort => self.filtered_short += 1,
            Verdict::DeletedAuthor => self.filtered_deleted += 1,
            Verdict::OutOfWindow => self.out_of_window += 1,
            Verdict::NotSampled => self.not_sampled += 1,
        }
    }

    pub fn merge(&mut self, other: &FunnelStats) {
        self.read += other.read;
        self.malformed += other.malformed;
        self.filtered_short += other.filtered_short;
        self.filtered_deleted += other.filtered_deleted;
        self.out_of_window += other.out_of_window;
        self.not_sampled += other.not_sampled;
        self.sampled += other.sampled;
    }
}

/// The full ingestion funnel: parse, length and author filter, window, sample.
#[derive(Debug, Clone)]
pub struct Funnel {
    pub filter: FilterConfig,
    pub window: Option<StudyWindow>,
}

impl Funnel {
    pub fn new(filter: FilterConfig, window: Option<StudyWindow>) -> Result<Self, CorpusError> {
        filter.validate()?;
        Ok(Self { filter, window })
    }

    pub fn admit(&self, line: &str) -> Verdict {
        let c = match parse_comment_line(line) {
            Ok(c) => c,
            Err(_) => return Verdict::Malformed,
        };
        if c.body.chars().count() < self.filter.min_body_length {
            return Verdict::TooShort;
        }
        if c.author == self.filter.excluded_author {
            return Verdict::DeletedAuthor;
        }
        if let Some(w) = self.window {
            if !w.contains(c.created_utc) {
                return Verdict::OutOfWindow;
            }
        }
        if !sample_decision(&c.id, &self.filter) {
            return Verdict::NotSampled;
        }
        Verdict::Accepted(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn comment(body: &str, author: &str) -> RawComment {
        RawComment {
            id: "x".into(),
            author: author.into(),
            subreddit: "news".into(),
            body: body.into(),
            score: 1,
            created_utc: DEFAULT_ANCHOR,
        }
    }

    #[test]
    fn parses_standard_record() {
        let c = parse_comment_line(
            r#"{"id":"c1","author":"a","subreddit":"news","body":"hello world","score":3,"created_utc":1420070400,"gilded":0}"#,
        )
        .unwrap();
        assert_eq!(c.id, "c1");
        assert_eq!(c.author, "a");
        assert_eq!(c.subreddit, "news");
        assert_eq!(c.body, "hello world");
        assert_eq!(c.score, 3);
        assert_eq!(c.created_utc, 1_420_070_400);
    }

    #[test]
    fn rejects_incomplete_and_non_integer_records() {
        assert!(matches!(
            parse_comment_line(r#"{"id":"c2"}"#),
            Err(CorpusError::MalformedLine(_))
        ));
        assert!(parse_comment_line("not json").is_err());
        assert!(parse_comment_line(
            r#"{"id":"c","author":"a","subreddit":"s","body":"b","score":1.5,"created_utc":1}"#
        )
        .is_err());
        assert!(parse_comment_line(
            r#"{"id":"c","author":"a","subreddit":"s","body":"b","score":1,"created_utc":"soon"}"#
        )
        .is_err());
        assert!(parse_comment_line(
            r#"{"id":"","author":"a","subreddit":"s","body":"b","score":1,"created_utc":1}"#
        )
        .is_err());
    }

    #[test]
    fn accepts_string_timestamps() {
        let c = parse_comment_line(
            r#"{"id":"c","author":"a","subreddit":"s","body":"b","score":-2,"created_utc":"1420070400"}"#,
        )
        .unwrap();
        assert_eq!(c.created_utc, 1_420_070_400);
        assert_eq!(c.score, -2);
    }

    #[test]
    fn body_round_trips_byte_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let alphabet: Vec<char> = "ab \"\\\n\t/é😀\u{0}\u{1f}ʼ’{}".chars().collect();
        for i in 0..1000 {
            let len = rng.random_range(0..40);
            let body: String = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            let c = RawComment {
                id: format!("id{i}"),
                author: "a".into(),
                subreddit: "s".into(),
                body,
                score: rng.random_range(-100..100),
                created_utc: rng.random_range(0..2_000_000_000),
            };
            let line = serde_json::to_string(&c).unwrap();
            let back = parse_comment_line(&line).unwrap();
            assert_eq!(back.body.as_bytes(), c.body.as_bytes());
            assert_eq!(back, c);
        }
    }

    #[test]
    fn filter_boundaries() {
        let cfg = FilterConfig::default();
        assert!(!passes_filter(&comment("short", "a"), &cfg));
        assert!(!passes_filter(&comment("0123456789", "[deleted]"), &cfg));
        assert!(passes_filter(&comment("0123456789", "a"), &cfg));
        // scalar values, not bytes
        assert!(passes_filter(&comment("éééééééééé", "a"), &cfg));
        assert!(!passes_filter(&comment("ééééééééé", "a"), &cfg));
    }

    #[test]
    fn sampling_is_deterministic_and_calibrated() {
        let cfg = FilterConfig {
            sample_seed: 99,
            ..FilterConfig::default()
        };
        assert_eq!(sample_decision("abc", &cfg), sample_decision("abc", &cfg));

        let all = FilterConfig {
            sample_rate: 1.0,
            ..cfg.clone()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut accepted = 0;
        for _ in 0..100_000 {
            let id = format!("t1_{:x}", rng.random::<u64>());
            assert!(sample_decision(&id, &all));
            if sample_decision(&id, &cfg) {
                accepted += 1;
            }
        }
        let frac = accepted as f64 / 100_000.0;
        assert!((frac - 0.10).abs() <= 0.01, "fraction {frac}");
    }

    #[test]
    fn rejects_bad_sample_rates() {
        for rate in [0.0, -0.5, 1.5, f64::NAN] {
            let cfg = FilterConfig {
                sample_rate: rate,
                ..FilterConfig::default()
            };
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn week_boundaries() {
        let a = DEFAULT_ANCHOR;
        assert_eq!(week_of(a, a).unwrap(), WeekIndex(0));
        assert_eq!(week_of(a + 604_799, a).unwrap(), WeekIndex(0));
        assert_eq!(week_of(a + 604_800, a).unwrap(), WeekIndex(1));
        // 2015-07-01T00:00Z is 181 days after the anchor
        assert_eq!(week_of(1_435_708_800, a).unwrap(), WeekIndex(25));
        assert!(matches!(
            week_of(a - 1, a),
            Err(CorpusError::BeforeAnchor { .. })
        ));
    }

    #[test]
    fn reference_taxonomy_categories() {
        let tax = SubredditTaxonomy::reference();
        assert_eq!(categorize("the_donald", &tax), Category::Political);
        assert_eq!(categorize("askscience", &tax), Category::Default);
        assert_eq!(categorize("dota2", &tax), Category::Other);
        assert_eq!(categorize("  The_Donald ", &tax), Category::Political);
    }

    #[test]
    fn taxonomy_rejects_overlap() {
        let err = SubredditTaxonomy::new(["Politics"], ["politics "]).unwrap_err();
        assert!(matches!(err, CorpusError::OverlappingTaxonomy(n) if n == "politics"));
    }

    #[test]
    fn taxonomy_json_round_trip() {
        let tax = SubredditTaxonomy::reference();
        assert_eq!(SubredditTaxonomy::from_json(&tax.to_json()).unwrap(), tax);
    }

    #[test]
    fn funnel_reports_each_exit() {
        let funnel = Funnel::new(
            FilterConfig {
                sample_rate: 1.0,
                ..FilterConfig::default()
            },
            Some(StudyWindow {
                start: DEFAULT_ANCHOR,
                end: DEFAULT_ANCHOR + 100,
            }),
        )
        .unwrap();
        let line = |id: &str, author: &str, body: &str, t: i64| {
            format!(
                r#"{{"id":"{id}","author":"{author}","subreddit":"s","body":"{body}","score":0,"created_utc":{t}}}"#
            )
        };
        let mut stats = FunnelStats::default();
        for (l, want) in [
            ("{".to_string(), Verdict::Malformed),
            (line("a", "u", "tiny", DEFAULT_ANCHOR), Verdict::TooShort),
            (
                line("b", "[deleted]", "long enough body", DEFAULT_ANCHOR),
                Verdict::DeletedAuthor,
            ),
            (
                line("c", "u", "long enough body", DEFAULT_ANCHOR + 100),
                Verdict::OutOfWindow,
            ),
        ] {
            let v = funnel.admit(&l);
            assert_eq!(v, want);
            stats.record(&v);
        }
        let ok = funnel.admit(&line("d", "u", "long enough body", DEFAULT_ANCHOR + 5));
        assert!(matches!(ok, Verdict::Accepted(_)));
        stats.record(&ok);
        assert_eq!(stats.read, 5);
        assert_eq!(stats.sampled, 1);
        assert_eq!(stats.malformed, 1);
    }

    proptest! {
        #[test]
        fn week_index_is_monotone(a in 0i64..10_000_000, b in 0i64..10_000_000) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let wl = week_of(DEFAULT_ANCHOR + lo, DEFAULT_ANCHOR).unwrap();
            let wh = week_of(DEFAULT_ANCHOR + hi, DEFAULT_ANCHOR).unwrap();
            prop_assert!(wl <= wh);
            if hi - lo < WEEK_SECONDS {
                prop_assert!(wh.0 - wl.0 <= 1);
            }
        }

        #[test]
        fn accepted_set_ignores_order(ids in proptest::collection::vec("[a-z0-9]{1,8}", 0..60), seed in any::<u64>()) {
            let cfg = FilterConfig { sample_rate: 0.5, sample_seed: seed, ..FilterConfig::default() };
            let mut forward: Vec<&String> = ids.iter().filter(|id| sample_decision(id, &cfg)).collect();
            let mut backward: Vec<&String> = ids.iter().rev().filter(|id| sample_decision(id, &cfg)).collect();
            forward.sort();
            backward.sort();
            prop_assert_eq!(forward, backward);
        }
    }
}
