//! Aggregate measurements over a classified comment stream.
//!
//! Everything is computed from [`Aggregates`], a mergeable tally of integer
//! counts and sums. Shards can be folded independently and combined in any
//! order; the finished [`AnalyticsReport`] does not depend on sharding.
//! Author-keyed state can instead be spilled to hash partitions on disk with
//! [`SpillAnalyzer`].

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::Label;
use crate::corpus::{week_of, Category, CorpusError, SubredditTaxonomy, WeekIndex, DEFAULT_ANCHOR};
use crate::hatemodel::ScoredComment;

/// 2016-07-01T00:00:00Z.
pub const DEFAULT_CUTOVER: i64 = 1_467_331_200;

#[derive(Debug, Error)]
pub enum AnalyticsError {
    #[error("no offensive comments in destination {0:?}")]
    UnknownDestination(String),
    #[error("unlabeled comment {0:?}")]
    Unlabeled(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("spill file: {0}")]
    Spill(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, AnalyticsError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyticsConfig {
    pub anchor: i64,
    /// Comments at or after this instant count as post-cutover.
    pub cutover_utc: i64,
    /// Subreddits need strictly more comments than this to be reported.
    pub min_comments: u64,
    /// Flow edges need at least this many authors.
    pub min_flow: u64,
    pub flow_destinations: Vec<String>,
    pub offensive_share_threshold: f64,
    /// Rows per category in the most/least offensive tables.
    pub top_n: usize,
}

impl Default for AnalyticsConfig {
    fn default() -> Self {
        Self {
            anchor: DEFAULT_ANCHOR,
            cutover_utc: DEFAULT_CUTOVER,
            min_comments: 1000,
            min_flow: 200,
            flow_destinations: vec!["politics".into()],
            offensive_share_threshold: 0.10,
            top_n: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedComment {
    pub id: String,
    pub author: String,
    /// Lowercased.
    pub subreddit: String,
    pub category: Category,
    pub week: WeekIndex,
    pub created_utc: i64,
    pub score: i64,
    pub offense_score: f64,
    pub label: Label,
}

impl ClassifiedComment {
    pub fn from_scored(
        s: &ScoredComment,
        taxonomy: &SubredditTaxonomy,
        anchor: i64,
    ) -> Result<Self> {
        let label = match s.offensive {
            Some(true) => Label::Offensive,
            Some(false) => Label::NotOffensive,
            None => return Err(AnalyticsError::Unlabeled(s.id.clone())),
        };
        Ok(Self {
            id: s.id.clone(),
            author: s.author.clone(),
            subreddit: s.subreddit.trim().to_lowercase(),
            category: taxonomy.categorize(&s.subreddit),
            week: week_of(s.created_utc, anchor)?,
            created_utc: s.created_utc,
            score: s.score,
            offense_score: s.offense_score,
            label,
        })
    }

    fn political(&self) -> usize {
        usize::from(self.category.is_political())
    }

    fn offensive(&self) -> usize {
        usize::from(self.label.is_offensive())
    }
}

/// Comment counts and offensive score sums for one week, indexed
/// `[political][offensive]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct WeekCell {
    counts: [[u64; 2]; 2],
    score_sums: [[i128; 2]; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct SubredditCell {
    category: Category,
    total: u64,
    offensive: u64,
}

/// Per-author state: totals and earliest offensive timestamp per subreddit.
#[derive(Debug, Clone, Default, PartialEq)]
struct AuthorState {
    totals: HashMap<String, [u64; 2]>,
    first_offense: HashMap<String, HashMap<String, i64>>,
}

impl AuthorState {
    fn add(&mut self, author: &str, subreddit: &str, t: i64, offensive: bool) {
        let e = self.totals.entry(author.to_string()).or_default();
        e[0] += 1;
        if offensive {
            e[1] += 1;
            let subs = self.first_offense.entry(author.to_string()).or_default();
            subs.entry(subreddit.to_string())
                .and_modify(|v| *v = (*v).min(t))
                .or_insert(t);
        }
    }

    fn merge(&mut self, other: AuthorState) {
        for (a, [t, o]) in other.totals {
            let e = self.totals.entry(a).or_default();
            e[0] += t;
            e[1] += o;
        }
        for (a, subs) in other.first_offense {
            let mine = self.first_offense.entry(a).or_default();
            for (s, t) in subs {
                mine.entry(s).and_modify(|v| *v = (*v).min(t)).or_insert(t);
            }
        }
    }

    fn reduce(&self, destinations: &[String]) -> AuthorTally {
        let mut tally = AuthorTally::default();
        for &[t, o] in self.totals.values() {
            *tally.histogram.entry((t, o)).or_default() += 1;
        }
        for dest in destinations {
            let flow = tally.flows.entry(dest.clone()).or_default();
            for subs in self.first_offense.values() {
                let Some(&t0) = subs.get(dest) else { continue };
                flow.destination_authors += 1;
                for (src, &t) in subs {
                    if src != dest && t < t0 {
                        *flow.sources.entry(src.clone()).or_default() += 1;
                    }
                }
            }
        }
        tally
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct FlowTally {
    destination_authors: u64,
    sources: BTreeMap<String, u64>,
}

/// Author-keyed results reduced to mergeable counts.
#[derive(Debug, Clone, Default, PartialEq)]
struct AuthorTally {
    /// `(total, offensive)` to number of authors.
    histogram: BTreeMap<(u64, u64), u64>,
    flows: BTreeMap<String, FlowTally>,
}

impl AuthorTally {
    fn merge(&mut self, other: AuthorTally) {
        for (k, n) in other.histogram {
            *self.histogram.entry(k).or_default() += n;
        }
        for (dest, f) in other.flows {
            let mine = self.flows.entry(dest).or_default();
            mine.destination_authors += f.destination_authors;
            for (s, n) in f.sources {
                *mine.sources.entry(s).or_default() += n;
            }
        }
    }
}

/// Commutative tally of everything except per-author state.
#[derive(Debug, Clone, Default, PartialEq)]
struct GlobalState {
    weeks: BTreeMap<u32, WeekCell>,
    /// `[post_cutover][political][offensive]`.
    cutover: [[[u64; 2]; 2]; 2],
    subreddits: BTreeMap<String, SubredditCell>,
}

impl GlobalState {
    fn add(&mut self, c: &ClassifiedComment, cutover_utc: i64) {
        let (p, o) = (c.political(), c.offensive());
        let w = self.weeks.entry(c.week.0).or_default();
        w.counts[p][o] += 1;
        w.score_sums[p][o] += i128::from(c.score);
        self.cutover[usize::from(c.created_utc >= cutover_utc)][p][o] += 1;
        let s = self
            .subreddits
            .entry(c.subreddit.clone())
            .or_insert(SubredditCell {
                category: c.category,
                total: 0,
                offensive: 0,
            });
        s.total += 1;
        s.offensive += o as u64;
    }

    fn merge(&mut self, other: GlobalState) {
        for (k, cell) in other.weeks {
            let w = self.weeks.entry(k).or_default();
            for p in 0..2 {
                for o in 0..2 {
                    w.counts[p][o] += cell.counts[p][o];
                    w.score_sums[p][o] += cell.score_sums[p][o];
                }
            }
        }
        for i in 0..2 {
            for p in 0..2 {
                for o in 0..2 {
                    self.cutover[i][p][o] += other.cutover[i][p][o];
                }
            }
        }
        for (name, cell) in other.subreddits {
            self.subreddits
                .entry(name)
                .and_modify(|s| {
                    s.total += cell.total;
                    s.offensive += cell.offensive;
                })
                .or_insert(cell);
        }
    }
}

/// Mergeable partial aggregate over any subset of the stream.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Aggregates {
    cutover_utc: i64,
    global: GlobalState,
    authors: AuthorState,
}

impl Aggregates {
    pub fn new(cfg: &AnalyticsConfig) -> Self {
        Self {
            cutover_utc: cfg.cutover_utc,
            ..Self::default()
        }
    }

    pub fn add(&mut self, c: &ClassifiedComment) {
        self.global.add(c, self.cutover_utc);
        self.authors
            .add(&c.author, &c.subreddit, c.created_utc, c.label.is_offensive());
    }

    pub fn merge(&mut self, other: Aggregates) {
        self.global.merge(other.global);
        self.authors.merge(other.authors);
    }

    pub fn from_comments(comments: &[ClassifiedComment], cfg: &AnalyticsConfig) -> Self {
        let mut a = Self::new(cfg);
        comments.iter().for_each(|c| a.add(c));
        a
    }

    /// Folds `shards` contiguous chunks in parallel, then merges them.
    pub fn from_comments_sharded(
        comments: &[ClassifiedComment],
        cfg: &AnalyticsConfig,
        shards: usize,
    ) -> Self {
        let chunk = comments.len().div_ceil(shards.max(1)).max(1);
        comments
            .par_chunks(chunk)
            .map(|c| Self::from_comments(c, cfg))
            .reduce(|| Self::new(cfg), |mut a, b| {
                a.merge(b);
                a
            })
    }

    /// Per-author profiles, sorted by author.
    pub fn author_profiles(&self) -> Vec<AuthorProfile> {
        let mut v: Vec<AuthorProfile> = self
            .authors
            .totals
            .iter()
            .map(|(a, &[t, o])| AuthorProfile::new(a, t, o))
            .collect();
        v.sort_by(|a, b| a.author.cmp(&b.author));
        v
    }

    pub fn finish(&self, cfg: &AnalyticsConfig) -> AnalyticsReport {
        AnalyticsReport::build(&self.global, self.authors.reduce(&cfg.flow_destinations), cfg)
    }
}

fn fraction(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn mean(sum: i128, n: u64) -> Option<f64> {
    (n > 0).then(|| sum as f64 / n as f64)
}

/// `political / apolitical - 1`.
fn excess(cells: &[[u64; 2]; 2]) -> Option<f64> {
    let p = ratio(cells[1][1], cells[1][0] + cells[1][1])?;
    let a = ratio(cells[0][1], cells[0][0] + cells[0][1])?;
    (a > 0.0).then(|| p / a - 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineRow {
    pub week: u32,
    pub political_total: u64,
    pub political_offensive: u64,
    pub political_fraction: f64,
    pub apolitical_total: u64,
    pub apolitical_offensive: u64,
    pub apolitical_fraction: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimelineReport {
    /// Every week from 0 to the last observed week.
    pub rows: Vec<TimelineRow>,
    pub political_fraction: Option<f64>,
    pub apolitical_fraction: Option<f64>,
    /// Relative excess of the political offensive fraction over the
    /// apolitical one, before and after the cutover.
    pub pre_cutover_excess: Option<f64>,
    pub post_cutover_excess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub week: u32,
    pub political_offensive: u64,
    /// `None` when the week has no such comments.
    pub political_mean: Option<f64>,
    pub apolitical_offensive: u64,
    pub apolitical_mean: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rows: Vec<ScoreRow>,
    pub offensive_mean: Option<f64>,
    pub not_offensive_mean: Option<f64>,
    pub offensive_political_mean: Option<f64>,
    pub offensive_apolitical_mean: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuthorClass {
    Throwaway,
    Mid,
    HighVolume,
}

impl AuthorClass {
    pub const ALL: [AuthorClass; 3] = [AuthorClass::Throwaway, AuthorClass::Mid, AuthorClass::HighVolume];

    pub fn of(total: u64) -> Self {
        match total {
            0..=4 => AuthorClass::Throwaway,
            5..=15 => AuthorClass::Mid,
            _ => AuthorClass::HighVolume,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AuthorClass::Throwaway => "throwaway",
            AuthorClass::Mid => "mid",
            AuthorClass::HighVolume => "high_volume",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

pub const TROLL_FRACTION: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorProfile {
    pub author: String,
    pub total_comments: u64,
    pub offensive_comments: u64,
    pub offensive_fraction: f64,
    pub class: AuthorClass,
    pub troll: bool,
}

impl AuthorProfile {
    pub fn new(author: &str, total: u64, offensive: u64) -> Self {
        let class = AuthorClass::of(total);
        let f = fraction(offensive, total);
        Self {
            author: author.to_string(),
            total_comments: total,
            offensive_comments: offensive,
            offensive_fraction: f,
            class,
            troll: class == AuthorClass::HighVolume && f > TROLL_FRACTION,
        }
    }
}

/// Quartile of an offensive fraction: `[0, .25]`, `(.25, .5]`, `(.5, .75]`,
/// `(.75, 1]`.
pub fn quartile(f: f64) -> usize {
    if f <= 0.25 {
        0
    } else if f <= 0.5 {
        1
    } else if f <= 0.75 {
        2
    } else {
        3
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorCdfRow {
    pub offensive_fraction: f64,
    /// Authors at exactly this fraction, by class.
    pub authors: [u64; 3],
    pub cumulative_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorClassSummary {
    pub class: AuthorClass,
    pub authors: u64,
    pub quartiles: [u64; 4],
    pub trolls: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuthorReport {
    pub authors: u64,
    pub cdf: Vec<AuthorCdfRow>,
    pub classes: Vec<AuthorClassSummary>,
    /// Authors whose offensive fraction exceeds the troll fraction.
    pub high_offense_authors: u64,
    pub high_offense_throwaway_share: Option<f64>,
    pub high_offense_mid_share: Option<f64>,
    pub high_offense_troll_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubredditStats {
    pub subreddit: String,
    pub category: Category,
    pub comment_count: u64,
    pub offensive_count: u64,
    pub offensive_fraction: f64,
    /// Share of the category's reported subreddits at or below this fraction.
    pub category_cdf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryBreakdown {
    pub category: Category,
    pub subreddits: u64,
    pub most_offensive: Vec<SubredditStats>,
    pub least_offensive: Vec<SubredditStats>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubredditReport {
    /// Sorted by category, then fraction, then name.
    pub stats: Vec<SubredditStats>,
    pub categories: Vec<CategoryBreakdown>,
    /// Share of reported subreddits whose fraction exceeds the threshold,
    /// and the share of reported comments they hold.
    pub share_above_threshold: Option<f64>,
    pub comment_share_above_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowEdge {
    pub source: String,
    pub destination: String,
    pub author_count: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub destination: String,
    /// Authors with at least one offensive comment in the destination.
    pub destination_authors: u64,
    /// Sorted by count descending, then source.
    pub edges: Vec<FlowEdge>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsReport {
    pub comments: u64,
    pub timeline: TimelineReport,
    pub scores: ScoreReport,
    pub authors: AuthorReport,
    pub subreddits: SubredditReport,
    pub flows: Vec<FlowReport>,
}

impl AnalyticsReport {
    fn build(g: &GlobalState, a: AuthorTally, cfg: &AnalyticsConfig) -> Self {
        let (timeline, scores) = timelines(g);
        Self {
            comments: g.weeks.values().flat_map(|w| w.counts.iter().flatten()).sum(),
            timeline,
            scores,
            authors: author_report(&a.histogram),
            subreddits: subreddit_report(&g.subreddits, cfg),
            flows: cfg
                .flow_destinations
                .iter()
                .map(|d| flow_report(d, a.flows.get(d), cfg.min_flow))
                .collect(),
        }
    }
}

fn timelines(g: &GlobalState) -> (TimelineReport, ScoreReport) {
    let last = g.weeks.keys().next_back().copied();
    let mut tl = TimelineReport::default();
    let mut sc = ScoreReport::default();
    let mut totals = [[0u64; 2]; 2];
    let mut sums = [[0i128; 2]; 2];
    for week in last.map_or(0..0, |l| 0..l + 1) {
        let w = g.weeks.get(&week).copied().unwrap_or_default();
        let [a, p] = w.counts;
        tl.rows.push(TimelineRow {
            week,
            political_total: p[0] + p[1],
            political_offensive: p[1],
            political_fraction: fraction(p[1], p[0] + p[1]),
            apolitical_total: a[0] + a[1],
            apolitical_offensive: a[1],
            apolitical_fraction: fraction(a[1], a[0] + a[1]),
        });
        sc.rows.push(ScoreRow {
            week,
            political_offensive: p[1],
            political_mean: mean(w.score_sums[1][1], p[1]),
            apolitical_offensive: a[1],
            apolitical_mean: mean(w.score_sums[0][1], a[1]),
        });
        for i in 0..2 {
            for o in 0..2 {
                totals[i][o] += w.counts[i][o];
                sums[i][o] += w.score_sums[i][o];
            }
        }
    }
    tl.political_fraction = ratio(totals[1][1], totals[1][0] + totals[1][1]);
    tl.apolitical_fraction = ratio(totals[0][1], totals[0][0] + totals[0][1]);
    tl.pre_cutover_excess = excess(&g.cutover[0]);
    tl.post_cutover_excess = excess(&g.cutover[1]);
    sc.offensive_mean = mean(sums[0][1] + sums[1][1], totals[0][1] + totals[1][1]);
    sc.not_offensive_mean = mean(sums[0][0] + sums[1][0], totals[0][0] + totals[1][0]);
    sc.offensive_political_mean = mean(sums[1][1], totals[1][1]);
    sc.offensive_apolitical_mean = mean(sums[0][1], totals[0][1]);
    (tl, sc)
}

fn author_report(hist: &BTreeMap<(u64, u64), u64>) -> AuthorReport {
    let mut r = AuthorReport {
        classes: AuthorClass::ALL
            .iter()
            .map(|&class| AuthorClassSummary {
                class,
                authors: 0,
                quartiles: [0; 4],
                trolls: 0,
            })
            .collect(),
        ..AuthorReport::default()
    };
    let mut points: Vec<(f64, AuthorClass, u64)> = Vec::with_capacity(hist.len());
    let mut high = [0u64; 3];
    let mut trolls = 0;
    for (&(t, o), &n) in hist {
        let p = AuthorProfile::new("", t, o);
        let s = &mut r.classes[p.class.slot()];
        s.authors += n;
        s.quartiles[quartile(p.offensive_fraction)] += n;
        if p.troll {
            s.trolls += n;
            trolls += n;
        }
        if p.offensive_fraction > TROLL_FRACTION {
            high[p.class.slot()] += n;
        }
        r.authors += n;
        points.push((p.offensive_fraction, p.class, n));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut seen = 0u64;
    for (f, class, n) in points {
        seen += n;
        match r.cdf.last_mut() {
            Some(row) if row.offensive_fraction == f => {
                row.authors[class.slot()] += n;
                row.cumulative_share = seen as f64 / r.authors as f64;
            }
            _ => {
                let mut authors = [0; 3];
                authors[class.slot()] = n;
                r.cdf.push(AuthorCdfRow {
                    offensive_fraction: f,
                    authors,
                    cumulative_share: seen as f64 / r.authors as f64,
                });
            }
        }
    }
    r.high_offense_authors = high.iter().sum();
    r.high_offense_throwaway_share = ratio(high[0], r.high_offense_authors);
    r.high_offense_mid_share = ratio(high[1], r.high_offense_authors);
    r.high_offense_troll_share = ratio(trolls, r.high_offense_authors);
    r
}

fn subreddit_report(subs: &BTreeMap<String, SubredditCell>, cfg: &AnalyticsConfig) -> SubredditReport {
    let mut r = SubredditReport::default();
    let (mut above, mut above_comments, mut all_comments) = (0u64, 0u64, 0u64);
    let mut eligible = 0u64;
    for &category in &Category::ALL {
        let mut rows: Vec<SubredditStats> = subs
            .iter()
            .filter(|(_, c)| c.category == category && c.total > cfg.min_comments)
            .map(|(name, c)| SubredditStats {
                subreddit: name.clone(),
                category,
                comment_count: c.total,
                offensive_count: c.offensive,
                offensive_fraction: fraction(c.offensive, c.total),
                category_cdf: 0.0,
            })
            .collect();
        rows.sort_by(|a, b| {
            a.offensive_fraction
                .total_cmp(&b.offensive_fraction)
                .then_with(|| a.subreddit.cmp(&b.subreddit))
        });
        let n = rows.len();
        for i in 0..n {
            let f = rows[i].offensive_fraction;
            let at_or_below = i + rows[i..].iter().take_while(|s| s.offensive_fraction == f).count();
            rows[i].category_cdf = at_or_below as f64 / n as f64;
            all_comments += rows[i].comment_count;
            if f > cfg.offensive_share_threshold {
                above += 1;
                above_comments += rows[i].comment_count;
            }
        }
        eligible += n as u64;
        let mut most: Vec<SubredditStats> = rows.iter().rev().take(cfg.top_n).cloned().collect();
        most.sort_by(|a, b| {
            b.offensive_fraction
                .total_cmp(&a.offensive_fraction)
                .then_with(|| a.subreddit.cmp(&b.subreddit))
        });
        r.categories.push(CategoryBreakdown {
            category,
            subreddits: n as u64,
            most_offensive: most,
            least_offensive: rows.iter().take(cfg.top_n).cloned().collect(),
        });
        r.stats.extend(rows);
    }
    r.share_above_threshold = ratio(above, eligible);
    r.comment_share_above_threshold = ratio(above_comments, all_comments);
    r
}

fn flow_report(dest: &str, tally: Option<&FlowTally>, min_flow: u64) -> FlowReport {
    let Some(t) = tally else {
        return FlowReport {
            destination: dest.to_string(),
            ..FlowReport::default()
        };
    };
    let mut edges: Vec<FlowEdge> = t
        .sources
        .iter()
        .filter(|&(_, &n)| n >= min_flow)
        .map(|(s, &n)| FlowEdge {
            source: s.clone(),
            destination: dest.to_string(),
            author_count: n,
        })
        .collect();
    edges.sort_by(|a, b| b.author_count.cmp(&a.author_count).then_with(|| a.source.cmp(&b.source)));
    FlowReport {
        destination: dest.to_string(),
        destination_authors: t.destination_authors,
        edges,
    }
}

pub fn weekly_offense_timeline(comments: &[ClassifiedComment], cfg: &AnalyticsConfig) -> TimelineReport {
    let mut g = GlobalState::default();
    comments.iter().for_each(|c| g.add(c, cfg.cutover_utc));
    timelines(&g).0
}

pub fn weekly_score_timeline(comments: &[ClassifiedComment]) -> ScoreReport {
    let mut g = GlobalState::default();
    comments.iter().for_each(|c| g.add(c, DEFAULT_CUTOVER));
    timelines(&g).1
}

pub fn author_profiles(comments: &[ClassifiedComment]) -> (Vec<AuthorProfile>, AuthorReport) {
    let agg = Aggregates::from_comments(comments, &AnalyticsConfig::default());
    let report = author_report(&agg.authors.reduce(&[]).histogram);
    (agg.author_profiles(), report)
}

pub fn subreddit_stats(comments: &[ClassifiedComment], cfg: &AnalyticsConfig) -> SubredditReport {
    let mut g = GlobalState::default();
    comments.iter().for_each(|c| g.add(c, cfg.cutover_utc));
    subreddit_report(&g.subreddits, cfg)
}

pub fn offense_flow(
    comments: &[ClassifiedComment],
    destination: &str,
    min_flow: u64,
) -> Result<Vec<FlowEdge>> {
    let mut a = AuthorState::default();
    for c in comments {
        a.add(&c.author, &c.subreddit, c.created_utc, c.label.is_offensive());
    }
    let dest = destination.trim().to_lowercase();
    let tally = a.reduce(std::slice::from_ref(&dest));
    let report = flow_report(&dest, tally.flows.get(&dest), min_flow);
    if report.destination_authors == 0 {
        return Err(AnalyticsError::UnknownDestination(dest));
    }
    Ok(report.edges)
}

pub fn analyze(comments: &[ClassifiedComment], cfg: &AnalyticsConfig, shards: usize) -> AnalyticsReport {
    Aggregates::from_comments_sharded(comments, cfg, shards).finish(cfg)
}

/// Streams comments once, keeping global tallies in memory and appending
/// author-keyed records to `partitions` files under `dir`. [`finish`]
/// processes one partition at a time.
///
/// [`finish`]: SpillAnalyzer::finish
pub struct SpillAnalyzer {
    cfg: AnalyticsConfig,
    global: GlobalState,
    paths: Vec<PathBuf>,
    writers: Vec<BufWriter<File>>,
}

#[derive(Serialize, Deserialize)]
struct SpillRecord<'a> {
    a: &'a str,
    s: &'a str,
    t: i64,
    o: bool,
}

impl SpillAnalyzer {
    pub fn new(dir: &Path, partitions: usize, cfg: &AnalyticsConfig) -> Result<Self> {
        let partitions = partitions.max(1);
        std::fs::create_dir_all(dir)?;
        let paths: Vec<PathBuf> = (0..partitions)
            .map(|i| dir.join(format!("authors-{i:04}.jsonl")))
            .collect();
        let writers = paths
            .iter()
            .map(|p| File::create(p).map(BufWriter::new))
            .collect::<std::io::Result<_>>()?;
        Ok(Self {
            cfg: cfg.clone(),
            global: GlobalState::default(),
            paths,
            writers,
        })
    }

    pub fn add(&mut self, c: &ClassifiedComment) -> Result<()> {
        self.global.add(c, self.cfg.cutover_utc);
        let slot = (crate::fingerprint(c.author.as_bytes()) % self.writers.len() as u64) as usize;
        let w = &mut self.writers[slot];
        serde_json::to_writer(
            &mut *w,
            &SpillRecord {
                a: &c.author,
                s: &c.subreddit,
                t: c.created_utc,
                o: c.label.is_offensive(),
            },
        )?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(self) -> Result<AnalyticsReport> {
        for mut w in self.writers {
            w.flush()?;
        }
        let mut tally = AuthorTally::default();
        for p in &self.paths {
            let mut state = AuthorState::default();
            for line in BufReader::new(File::open(p)?).lines() {
                let line = line?;
                let r: SpillRecord<'_> =
                    serde_json::from_str(&line).map_err(|e| AnalyticsError::Spill(e.to_string()))?;
                state.add(r.a, r.s, r.t, r.o);
            }
            tally.merge(state.reduce(&self.cfg.flow_destinations));
            std::fs::remove_file(p)?;
        }
        Ok(AnalyticsReport::build(&self.global, tally, &self.cfg))
    }
}

pub const TIMELINE_CSV_HEADER: &str = "week,political_total,political_offensive,political_fraction,apolitical_total,apolitical_offensive,apolitical_fraction";
pub const SCORES_CSV_HEADER: &str =
    "week,political_offensive,political_mean_score,apolitical_offensive,apolitical_mean_score";
pub const AUTHORS_CDF_CSV_HEADER: &str =
    "offensive_fraction,throwaway_authors,mid_authors,high_volume_authors,cumulative_share";
pub const AUTHOR_SUMMARY_CSV_HEADER: &str = "class,authors,q1_authors,q2_authors,q3_authors,q4_authors,trolls";
pub const SUBREDDITS_CSV_HEADER: &str =
    "subreddit,category,comment_count,offensive_count,offensive_fraction,category_cdf";
pub const FLOW_CSV_HEADER: &str = "source,destination,author_count";

pub const REPORT_FILES: [&str; 7] = [
    "timeline.csv",
    "scores.csv",
    "authors_cdf.csv",
    "author_summary.csv",
    "subreddits.csv",
    "flow.csv",
    "manifest.json",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_bytes<F>(header: &str, fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<()>,
{
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header.split(','))?;
        fill(&mut w)?;
        w.flush()?;
    }
    Ok(buf)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Serializes every table into CSV bytes, keyed by file name.
pub fn render_tables(r: &AnalyticsReport) -> Result<BTreeMap<&'static str, Vec<u8>>> {
    let mut out = BTreeMap::new();
    out.insert(
        "timeline.csv",
        csv_bytes(TIMELINE_CSV_HEADER, |w| {
            for row in &r.timeline.rows {
                w.write_record([
                    row.week.to_string(),
                    row.political_total.to_string(),
                    row.political_offensive.to_string(),
                    row.political_fraction.to_string(),
                    row.apolitical_total.to_string(),
                    row.apolitical_offensive.to_string(),
                    row.apolitical_fraction.to_string(),
                ])?;
            }
            Ok(())
        })?,
    );
    out.insert(
        "scores.csv",
        csv_bytes(SCORES_CSV_HEADER, |w| {
            for row in &r.scores.rows {
                w.write_record([
                    row.week.to_string(),
                    row.political_offensive.to_string(),
                    opt(row.political_mean),
                    row.apolitical_offensive.to_string(),
                    opt(row.apolitical_mean),
                ])?;
            }
            Ok(())
        })?,
    );
    out.insert(
        "authors_cdf.csv",
        csv_bytes(AUTHORS_CDF_CSV_HEADER, |w| {
            for row in &r.authors.cdf {
                w.write_record([
                    row.offensive_fraction.to_string(),
                    row.authors[0].to_string(),
                    row.authors[1].to_string(),
                    row.authors[2].to_string(),
                    row.cumulative_share.to_string(),
                ])?;
            }
            Ok(())
        })?,
    );
    out.insert(
        "author_summary.csv",
        csv_bytes(AUTHOR_SUMMARY_CSV_HEADER, |w| {
            for c in &r.authors.classes {
                let mut rec = vec![c.class.as_str().to_string(), c.authors.to_string()];
                rec.extend(c.quartiles.iter().map(|q| q.to_string()));
                rec.push(c.trolls.to_string());
                w.write_record(rec)?;
            }
            Ok(())
        })?,
    );
    out.insert(
        "subreddits.csv",
        csv_bytes(SUBREDDITS_CSV_HEADER, |w| {
            for s in &r.subreddits.stats {
                w.write_record([
                    s.subreddit.clone(),
                    s.category.as_str().to_string(),
                    s.comment_count.to_string(),
                    s.offensive_count.to_string(),
                    s.offensive_fraction.to_string(),
                    s.category_cdf.to_string(),
                ])?;
            }
            Ok(())
        })?,
    );
    out.insert(
        "flow.csv",
        csv_bytes(FLOW_CSV_HEADER, |w| {
            for e in r.flows.iter().flat_map(|f| &f.edges) {
                w.write_record([e.source.clone(), e.destination.clone(), e.author_count.to_string()])?;
            }
            Ok(())
        })?,
    );
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportManifest {
    pub config: AnalyticsConfig,
    /// Caller-supplied hashes and seeds of upstream artifacts.
    pub inputs: BTreeMap<String, serde_json::Value>,
    /// xxh64 of each emitted CSV.
    pub files: BTreeMap<String, String>,
    pub comments: u64,
    pub political_fraction: Option<f64>,
    pub apolitical_fraction: Option<f64>,
    /// `political_fraction / apolitical_fraction - 1`.
    pub pre_cutover_excess: Option<f64>,
    pub post_cutover_excess: Option<f64>,
    pub scores: ScoreSummary,
    pub authors: AuthorSummary,
    pub subreddits: SubredditSummary,
    pub flows: Vec<FlowSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub offensive_mean: Option<f64>,
    pub not_offensive_mean: Option<f64>,
    pub offensive_political_mean: Option<f64>,
    pub offensive_apolitical_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuthorSummary {
    pub authors: u64,
    pub high_offense_authors: u64,
    pub high_offense_throwaway_share: Option<f64>,
    pub high_offense_mid_share: Option<f64>,
    pub high_offense_troll_share: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubredditSummary {
    pub share_above_threshold: Option<f64>,
    pub comment_share_above_threshold: Option<f64>,
    pub categories: Vec<CategoryBreakdown>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub destination: String,
    pub destination_authors: u64,
    pub edges: usize,
}

/// Writes the six tables and `manifest.json` into `dir`. Output bytes depend
/// only on the report, config and inputs.
pub fn emit_report(
    r: &AnalyticsReport,
    cfg: &AnalyticsConfig,
    inputs: &BTreeMap<String, serde_json::Value>,
    dir: &Path,
) -> Result<ReportManifest> {
    std::fs::create_dir_all(dir)?;
    let tables = render_tables(r)?;
    let mut files = BTreeMap::new();
    for (name, bytes) in &tables {
        write_atomic(&dir.join(name), bytes)?;
        files.insert(name.to_string(), crate::hex_hash(crate::fingerprint(bytes)));
    }
    let manifest = ReportManifest {
        config: cfg.clone(),
        inputs: inputs.clone(),
        files,
        comments: r.comments,
        political_fraction: r.timeline.political_fraction,
        apolitical_fraction: r.timeline.apolitical_fraction,
        pre_cutover_excess: r.timeline.pre_cutover_excess,
        post_cutover_excess: r.timeline.post_cutover_excess,
        scores: ScoreSummary {
            offensive_mean: r.scores.offensive_mean,
            not_offensive_mean: r.scores.not_offensive_mean,
            offensive_political_mean: r.scores.offensive_political_mean,
            offensive_apolitical_mean: r.scores.offensive_apolitical_mean,
        },
        authors: AuthorSummary {
            authors: r.authors.authors,
            high_offense_authors: r.authors.high_offense_authors,
            high_offense_throwaway_share: r.authors.high_offense_throwaway_share,
            high_offense_mid_share: r.authors.high_offense_mid_share,
            high_offense_troll_share: r.authors.high_offense_troll_share,
        },
        subreddits: SubredditSummary {
            share_above_threshold: r.subreddits.share_above_threshold,
            comment_share_above_threshold: r.subreddits.comment_share_above_threshold,
            categories: r.subreddits.categories.clone(),
        },
        flows: r
            .flows
            .iter()
            .map(|f| FlowSummary {
                destination: f.destination.clone(),
                destination_authors: f.destination_authors,
                edges: f.edges.len(),
            })
            .collect(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_atomic(&dir.join("manifest.json"), &json)?;
    Ok(manifest)
}
