//! Slow, direct recomputations used as reference answers.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};

use offense_core::analytics::{
    AnalyticsConfig, AnalyticsReport, ClassifiedComment, FlowEdge,
};
use offense_core::classifier::LabeledSample;
use offense_core::corpus::Category;
use offense_core::embedding::EmbeddingModel;
use offense_core::textnorm::{normalize, NormalizerConfig};

/// Max cosine between `hate` and each normalized token's vector, with
/// out-of-vocabulary tokens as zero vectors.
pub fn transform(text: &str, model: &EmbeddingModel, hate: &[f64], cfg: &NormalizerConfig) -> f64 {
    let hn: f64 = hate.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut best = f64::NEG_INFINITY;
    let tokens = normalize(text, cfg);
    for tok in tokens.tokens() {
        let c = match model.vector(tok) {
            Some(v) => {
                let dot: f64 = v.iter().zip(hate).map(|(&a, &b)| a as f64 * b).sum();
                let vn: f64 = v.iter().map(|&a| (a as f64) * (a as f64)).sum::<f64>().sqrt();
                if vn == 0.0 || hn == 0.0 {
                    0.0
                } else {
                    (dot / (vn * hn)).clamp(-1.0, 1.0)
                }
            }
            None => 0.0,
        };
        if c > best {
            best = c;
        }
    }
    if tokens.is_empty() {
        0.0
    } else {
        best
    }
}

/// Mean of in-vocabulary vectors with present and missing counts.
pub fn hate_vector(words: &[String], model: &EmbeddingModel) -> (Vec<f64>, usize, usize) {
    let mut sum = vec![0.0f64; model.dim()];
    let (mut found, mut missing) = (0, 0);
    for w in words {
        match model.vector(w) {
            Some(v) => {
                for i in 0..sum.len() {
                    sum[i] += v[i] as f64;
                }
                found += 1;
            }
            None => missing += 1,
        }
    }
    for s in &mut sum {
        *s /= found as f64;
    }
    (sum, found, missing)
}

fn h2(p: f64, q: f64) -> f64 {
    let n = p + q;
    let mut h = 0.0;
    for c in [p, q] {
        if c > 0.0 {
            h -= (c / n) * (c / n).log2();
        }
    }
    h
}

/// Best `(gain, threshold)` over all midpoints of a 1-D dataset.
pub fn best_split(samples: &[LabeledSample]) -> Option<(f64, f64)> {
    let mut xs: Vec<f64> = samples.iter().map(|s| s.features[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let pb = samples.iter().filter(|s| s.label.is_offensive()).count() as f64;
    let pa = samples.len() as f64 - pb;
    let mut best: Option<(f64, f64)> = None;
    for w in xs.windows(2) {
        let t = (w[0] + w[1]) / 2.0;
        let left: Vec<&LabeledSample> = samples.iter().filter(|s| s.features[0] <= t).collect();
        let lb = left.iter().filter(|s| s.label.is_offensive()).count() as f64;
        let la = left.len() as f64 - lb;
        let (ra, rb) = (pa - la, pb - lb);
        let n = pa + pb;
        let g = h2(pa, pb) - (la + lb) / n * h2(la, lb) - (ra + rb) / n * h2(ra, rb);
        if best.is_none_or(|(bg, _)| g > bg) {
            best = Some((g, t));
        }
    }
    best
}

/// Every analytics table recomputed by direct scans over the comment list.
pub fn analytics(comments: &[ClassifiedComment], cfg: &AnalyticsConfig) -> AnalyticsReport {
    use offense_core::analytics::*;
    let mut r = AnalyticsReport {
        comments: comments.len() as u64,
        ..AnalyticsReport::default()
    };
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let opt_frac = |a: usize, b: usize| if b == 0 { None } else { Some(a as f64 / b as f64) };
    let mean = |xs: &[i64]| {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().map(|&x| x as i128).sum::<i128>() as f64 / xs.len() as f64)
        }
    };

    // timeline and scores
    if let Some(max_week) = comments.iter().map(|c| c.week.0).max() {
        let mut by_week: Vec<Vec<&ClassifiedComment>> = vec![Vec::new(); max_week as usize + 1];
        for c in comments {
            by_week[c.week.0 as usize].push(c);
        }
        for (w, cs) in by_week.iter().enumerate() {
            let p: Vec<&&ClassifiedComment> = cs.iter().filter(|c| c.category == Category::Political).collect();
            let a: Vec<&&ClassifiedComment> = cs.iter().filter(|c| c.category != Category::Political).collect();
            let po: Vec<i64> = p.iter().filter(|c| c.label.is_offensive()).map(|c| c.score).collect();
            let ao: Vec<i64> = a.iter().filter(|c| c.label.is_offensive()).map(|c| c.score).collect();
            r.timeline.rows.push(TimelineRow {
                week: w as u32,
                political_total: p.len() as u64,
                political_offensive: po.len() as u64,
                political_fraction: frac(po.len(), p.len()),
                apolitical_total: a.len() as u64,
                apolitical_offensive: ao.len() as u64,
                apolitical_fraction: frac(ao.len(), a.len()),
            });
            r.scores.rows.push(ScoreRow {
                week: w as u32,
                political_offensive: po.len() as u64,
                political_mean: mean(&po),
                apolitical_offensive: ao.len() as u64,
                apolitical_mean: mean(&ao),
            });
        }
    }
    let p_all: Vec<&ClassifiedComment> = comments.iter().filter(|c| c.category == Category::Political).collect();
    let a_all: Vec<&ClassifiedComment> = comments.iter().filter(|c| c.category != Category::Political).collect();
    r.timeline.political_fraction = opt_frac(p_all.iter().filter(|c| c.label.is_offensive()).count(), p_all.len());
    r.timeline.apolitical_fraction = opt_frac(a_all.iter().filter(|c| c.label.is_offensive()).count(), a_all.len());
    let excess = |post: bool| {
        let sel: Vec<&ClassifiedComment> = comments
            .iter()
            .filter(|c| (c.created_utc >= cfg.cutover_utc) == post)
            .collect();
        let p: Vec<_> = sel.iter().filter(|c| c.category == Category::Political).collect();
        let a: Vec<_> = sel.iter().filter(|c| c.category != Category::Political).collect();
        let pf = opt_frac(p.iter().filter(|c| c.label.is_offensive()).count(), p.len())?;
        let af = opt_frac(a.iter().filter(|c| c.label.is_offensive()).count(), a.len())?;
        (af > 0.0).then(|| pf / af - 1.0)
    };
    r.timeline.pre_cutover_excess = excess(false);
    r.timeline.post_cutover_excess = excess(true);
    let scores_where = |f: &dyn Fn(&ClassifiedComment) -> bool| {
        mean(&comments.iter().filter(|c| f(c)).map(|c| c.score).collect::<Vec<_>>())
    };
    r.scores.offensive_mean = scores_where(&|c| c.label.is_offensive());
    r.scores.not_offensive_mean = scores_where(&|c| !c.label.is_offensive());
    r.scores.offensive_political_mean =
        scores_where(&|c| c.label.is_offensive() && c.category == Category::Political);
    r.scores.offensive_apolitical_mean =
        scores_where(&|c| c.label.is_offensive() && c.category != Category::Political);

    // authors
    let mut per_author: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for c in comments {
        let e = per_author.entry(&c.author).or_default();
        e.0 += 1;
        e.1 += u64::from(c.label.is_offensive());
    }
    let profiles: Vec<AuthorProfile> = per_author
        .iter()
        .map(|(a, &(t, o))| AuthorProfile::new(a, t, o))
        .collect();
    r.authors.authors = profiles.len() as u64;
    let mut fracs: Vec<f64> = profiles.iter().map(|p| p.offensive_fraction).collect();
    fracs.sort_by(f64::total_cmp);
    fracs.dedup();
    for f in fracs {
        let mut authors = [0u64; 3];
        for p in profiles.iter().filter(|p| p.offensive_fraction == f) {
            authors[AuthorClass::ALL.iter().position(|&c| c == p.class).unwrap()] += 1;
        }
        let at_or_below = profiles.iter().filter(|p| p.offensive_fraction <= f).count();
        r.authors.cdf.push(AuthorCdfRow {
            offensive_fraction: f,
            authors,
            cumulative_share: at_or_below as f64 / profiles.len() as f64,
        });
    }
    for class in AuthorClass::ALL {
        let mine: Vec<&AuthorProfile> = profiles.iter().filter(|p| p.class == class).collect();
        let mut q = [0u64; 4];
        for p in &mine {
            let f = p.offensive_fraction;
            let i = if f <= 0.25 { 0 } else if f <= 0.5 { 1 } else if f <= 0.75 { 2 } else { 3 };
            q[i] += 1;
        }
        r.authors.classes.push(AuthorClassSummary {
            class,
            authors: mine.len() as u64,
            quartiles: q,
            trolls: mine.iter().filter(|p| p.troll).count() as u64,
        });
    }
    let high: Vec<&AuthorProfile> = profiles.iter().filter(|p| p.offensive_fraction > 0.75).collect();
    r.authors.high_offense_authors = high.len() as u64;
    r.authors.high_offense_throwaway_share = opt_frac(
        high.iter().filter(|p| p.total_comments < 5).count(),
        high.len(),
    );
    r.authors.high_offense_mid_share = opt_frac(
        high.iter().filter(|p| (5..=15).contains(&p.total_comments)).count(),
        high.len(),
    );
    r.authors.high_offense_troll_share = opt_frac(
        high.iter().filter(|p| p.total_comments > 15).count(),
        high.len(),
    );

    // subreddits
    let names: BTreeSet<&str> = comments.iter().map(|c| c.subreddit.as_str()).collect();
    let mut eligible: Vec<SubredditStats> = Vec::new();
    for name in names {
        let cs: Vec<&ClassifiedComment> = comments.iter().filter(|c| c.subreddit == name).collect();
        if (cs.len() as u64) <= cfg.min_comments {
            continue;
        }
        let o = cs.iter().filter(|c| c.label.is_offensive()).count();
        eligible.push(SubredditStats {
            subreddit: name.to_string(),
            category: cs[0].category,
            comment_count: cs.len() as u64,
            offensive_count: o as u64,
            offensive_fraction: o as f64 / cs.len() as f64,
            category_cdf: 0.0,
        });
    }
    for cat in Category::ALL {
        let mut rows: Vec<SubredditStats> =
            eligible.iter().filter(|s| s.category == cat).cloned().collect();
        let n = rows.len();
        let snapshot = rows.clone();
        for s in &mut rows {
            s.category_cdf = snapshot
                .iter()
                .filter(|o| o.offensive_fraction <= s.offensive_fraction)
                .count() as f64
                / n as f64;
        }
        rows.sort_by(|a, b| {
            a.offensive_fraction
                .partial_cmp(&b.offensive_fraction)
                .unwrap()
                .then(a.subreddit.cmp(&b.subreddit))
        });
        let mut most = rows.clone();
        most.sort_by(|a, b| {
            b.offensive_fraction
                .partial_cmp(&a.offensive_fraction)
                .unwrap()
                .then(a.subreddit.cmp(&b.subreddit))
        });
        most.truncate(cfg.top_n);
        let least: Vec<SubredditStats> = rows.iter().take(cfg.top_n).cloned().collect();
        r.subreddits.categories.push(CategoryBreakdown {
            category: cat,
            subreddits: n as u64,
            most_offensive: most,
            least_offensive: least,
        });
        r.subreddits.stats.extend(rows);
    }
    let above: Vec<&SubredditStats> = r
        .subreddits
        .stats
        .iter()
        .filter(|s| s.offensive_fraction > cfg.offensive_share_threshold)
        .collect();
    r.subreddits.share_above_threshold = opt_frac(above.len(), r.subreddits.stats.len());
    let total_c: u64 = r.subreddits.stats.iter().map(|s| s.comment_count).sum();
    let above_c: u64 = above.iter().map(|s| s.comment_count).sum();
    r.subreddits.comment_share_above_threshold =
        if total_c == 0 { None } else { Some(above_c as f64 / total_c as f64) };

    // flows
    for dest in &cfg.flow_destinations {
        let (authors, edges) = flow(comments, dest, cfg.min_flow);
        r.flows.push(FlowReport {
            destination: dest.clone(),
            destination_authors: authors,
            edges,
        });
    }
    r
}

/// Per-author scan: sources whose offensive comments strictly precede the
/// author's first offensive comment in `dest`.
pub fn flow(comments: &[ClassifiedComment], dest: &str, min_flow: u64) -> (u64, Vec<FlowEdge>) {
    let mut by_author: HashMap<&str, Vec<&ClassifiedComment>> = HashMap::new();
    for c in comments.iter().filter(|c| c.label.is_offensive()) {
        by_author.entry(&c.author).or_default().push(c);
    }
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut authors = 0;
    for cs in by_author.values() {
        let Some(t0) = cs.iter().filter(|c| c.subreddit == dest).map(|c| c.created_utc).min() else {
            continue;
        };
        authors += 1;
        let sources: BTreeSet<&str> = cs
            .iter()
            .filter(|c| c.subreddit != dest && c.created_utc < t0)
            .map(|c| c.subreddit.as_str())
            .collect();
        for s in sources {
            *counts.entry(s.to_string()).or_default() += 1;
        }
    }
    let mut edges: Vec<FlowEdge> = counts
        .into_iter()
        .filter(|&(_, n)| n >= min_flow)
        .map(|(source, author_count)| FlowEdge {
            source,
            destination: dest.to_string(),
            author_count,
        })
        .collect();
    edges.sort_by(|a, b| b.author_count.cmp(&a.author_count).then(a.source.cmp(&b.source)));
    (authors, edges)
}

fn close(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9,
        _ => false,
    }
}

/// Exact on counts and structure, 1e-9 on means; `Err` names the first
/// difference.
pub fn compare_reports(got: &AnalyticsReport, want: &AnalyticsReport) -> Result<(), String> {
    let mut g = got.clone();
    let mut w = want.clone();
    if g.scores.rows.len() != w.scores.rows.len() {
        return Err("score row count".into());
    }
    for (a, b) in g.scores.rows.iter_mut().zip(w.scores.rows.iter_mut()) {
        if !close(a.political_mean, b.political_mean) || !close(a.apolitical_mean, b.apolitical_mean) {
            return Err(format!("score means in week {}", a.week));
        }
        a.political_mean = None;
        a.apolitical_mean = None;
        b.political_mean = None;
        b.apolitical_mean = None;
    }
    for (name, a, b) in [
        ("offensive mean", &mut g.scores.offensive_mean, &mut w.scores.offensive_mean),
        ("non-offensive mean", &mut g.scores.not_offensive_mean, &mut w.scores.not_offensive_mean),
        (
            "political offensive mean",
            &mut g.scores.offensive_political_mean,
            &mut w.scores.offensive_political_mean,
        ),
        (
            "apolitical offensive mean",
            &mut g.scores.offensive_apolitical_mean,
            &mut w.scores.offensive_apolitical_mean,
        ),
    ] {
        if !close(*a, *b) {
            return Err(format!("{name}: {a:?} vs {b:?}"));
        }
        *a = None;
        *b = None;
    }
    macro_rules! check {
        ($($f:ident).+) => {
            if g.$($f).+ != w.$($f).+ {
                return Err(format!("{} differs", stringify!($($f).+)));
            }
        };
    }
    check!(comments);
    check!(timeline);
    check!(scores);
    check!(authors);
    check!(subreddits);
    check!(flows);
    Ok(())
}
