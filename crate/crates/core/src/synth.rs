//! Deterministic synthetic data: comment streams, word lists, labeled
//! datasets and a planted-similarity corpus.
//!
//! Generated words are made of open syllables, so they pass through
//! normalization unchanged.

use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{RawComment, DEFAULT_ANCHOR};

const NEUTRAL_SYLLABLES: [&str; 12] = [
    "ka", "lo", "mi", "ru", "te", "vo", "na", "pi", "zu", "fe", "do", "be",
];
const OFFENSIVE_SYLLABLES: [&str; 6] = ["gro", "bla", "dru", "sko", "kra", "vu"];

fn syllable_word(syl: &[&str], mut i: usize, len: usize) -> String {
    let mut w = String::new();
    for _ in 0..len {
        w.push_str(syl[i % syl.len()]);
        i /= syl.len();
    }
    w
}

const REGISTER_WORDS: usize = 12;

/// Vocabulary shared by every generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthWorld {
    pub neutral: Vec<String>,
    pub offensive: Vec<String>,
}

impl SynthWorld {
    pub fn new(neutral: usize, offensive: usize) -> Self {
        let stride = 7;
        Self {
            neutral: (0..neutral)
                .map(|i| syllable_word(&NEUTRAL_SYLLABLES, i * stride + 1, 3))
                .collect(),
            offensive: (0..offensive)
                .map(|i| syllable_word(&OFFENSIVE_SYLLABLES, i + 1, 2))
                .collect(),
        }
    }

    /// Two overlapping word lists. Together they cover the first
    /// three quarters of the offensive words, plus a phrase and a word that
    /// never occurs in generated text.
    pub fn lexicons(&self) -> (Vec<String>, Vec<String>) {
        let n = self.offensive.len();
        let a: Vec<String> = self.offensive[..n / 2].to_vec();
        let mut b: Vec<String> = self.offensive[n / 4..3 * n / 4].to_vec();
        b.push(format!("{} {}", self.offensive[0], self.offensive[1]));
        b.push("qwyxzzq".into());
        (a, b)
    }

    /// Neutral words that only appear around offensive ones.
    pub fn register(&self) -> &[String] {
        &self.neutral[..REGISTER_WORDS.min(self.neutral.len() / 2)]
    }

    fn sentence<R: Rng>(&self, rng: &mut R, len: usize, offensive_words: usize) -> String {
        let register = self.register();
        let plain = &self.neutral[register.len()..];
        let mut words: Vec<&str> = (0..len)
            .map(|_| {
                let pool = if offensive_words > 0 && rng.random_bool(0.5) {
                    register
                } else {
                    plain
                };
                pool.choose(rng).expect("neutral words").as_str()
            })
            .collect();
        for _ in 0..offensive_words {
            let at = rng.random_range(0..=words.len());
            words.insert(at, self.offensive.choose(rng).expect("offensive words"));
        }
        words.join(" ")
    }
}

impl Default for SynthWorld {
    fn default() -> Self {
        Self::new(120, 24)
    }
}

/// Communities used by the comment generator beyond the taxonomy lists.
pub const OTHER_SUBREDDITS: [&str; 8] = [
    "nfl",
    "conspiracy",
    "dota2",
    "reactiongifs",
    "blackpeopletwitter",
    "imgoingtohellforthis",
    "gaming",
    "pics",
];

pub const POLITICAL_SUBREDDITS: [&str; 5] =
    ["politics", "the_donald", "sandersforpresident", "hillaryclinton", "worldpolitics"];
pub const DEFAULT_SUBREDDITS: [&str; 6] = ["askreddit", "news", "worldnews", "videos", "wtf", "tifu"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub comments: usize,
    pub authors: usize,
    pub seed: u64,
    pub start: i64,
    pub end: i64,
    /// Share of lines that are short, deleted-author or malformed.
    pub noise_rate: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            comments: 5000,
            authors: 600,
            seed: 7,
            start: DEFAULT_ANCHOR,
            // 2017-01-01
            end: 1_483_228_800,
            noise_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub comments: Vec<RawComment>,
    /// Whether each comment was generated with offensive words.
    pub planted_offensive: Vec<bool>,
}

/// Authors have heavy-tailed activity and individual offensive propensity.
/// Political communities become more offensive after mid-2016.
pub fn synth_corpus(world: &SynthWorld, spec: &CorpusSpec) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let authors = spec.authors.max(1);
    let weights: Vec<f64> = (0..authors).map(|i| 1.0 / (1.0 + i as f64).powf(1.1)).collect();
    let total_w: f64 = weights.iter().sum();
    let cumulative: Vec<f64> = weights
        .iter()
        .scan(0.0, |acc, w| {
            *acc += w / total_w;
            Some(*acc)
        })
        .collect();
    let propensity: Vec<f64> = (0..authors)
        .map(|i| match i % 10 {
            0 => 0.9,
            1 | 2 => 0.3,
            _ => 0.04,
        })
        .collect();
    let cutover = crate::analytics::DEFAULT_CUTOVER;
    let mut out = SynthCorpus {
        comments: Vec::with_capacity(spec.comments),
        planted_offensive: Vec::with_capacity(spec.comments),
    };
    for n in 0..spec.comments {
        let u: f64 = rng.random();
        let a = cumulative.partition_point(|&c| c < u).min(authors - 1);
        let pick: f64 = rng.random();
        let (subreddit, political) = if pick < 0.35 {
            (*POLITICAL_SUBREDDITS.choose(&mut rng).unwrap(), true)
        } else if pick < 0.75 {
            (*DEFAULT_SUBREDDITS.choose(&mut rng).unwrap(), false)
        } else {
            (*OTHER_SUBREDDITS.choose(&mut rng).unwrap(), false)
        };
        let t = rng.random_range(spec.start..spec.end);
        let mut p = propensity[a];
        if political && t >= cutover {
            p = (p * 1.5).min(1.0);
        }
        let offensive = rng.random_bool(p);
        let len = rng.random_range(4..14);
        let k = if offensive { rng.random_range(1..4) } else { 0 };
        let body = world.sentence(&mut rng, len, k);
        let score = rng.random_range(-3..20) + if offensive { 2 } else { 0 };
        out.comments.push(RawComment {
            id: format!("c{n:07}"),
            author: format!("user{a}"),
            subreddit: subreddit.to_string(),
            body,
            score,
            created_utc: t,
        });
        out.planted_offensive.push(offensive);
    }
    out
}

/// Writes comments as JSON lines. With a nonzero noise rate some lines are
/// replaced by short bodies, deleted authors or invalid JSON.
pub fn write_jsonl<W: Write>(
    mut out: W,
    comments: &[RawComment],
    noise_rate: f64,
    seed: u64,
) -> std::io::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x006e_6f69_7365);
    for c in comments {
        if noise_rate > 0.0 && rng.random_bool(noise_rate) {
            match rng.random_range(0..3) {
                0 => {
                    let short = RawComment {
                        body: "too short".into(),
                        ..c.clone()
                    };
                    serde_json::to_writer(&mut out, &short)?;
                }
                1 => {
                    let deleted = RawComment {
                        author: "[deleted]".into(),
                        ..c.clone()
                    };
                    serde_json::to_writer(&mut out, &deleted)?;
                }
                _ => out.write_all(b"{\"id\": \"broken\", ")?,
            }
        } else {
            serde_json::to_writer(&mut out, c)?;
        }
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthLabeled {
    pub text: String,
    /// `NO`, `O` or `OH`.
    pub class: String,
    pub confidence: f64,
}

/// Labeled texts with class shares near 50.4 / 33.1 / 16.5 percent.
/// Low-confidence rows carry label noise, so raising the confidence
/// threshold yields cleaner data.
pub fn synth_labeled(world: &SynthWorld, n: usize, seed: u64) -> Vec<SynthLabeled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            let class = if u < 0.504 {
                "NO"
            } else if u < 0.835 {
                "O"
            } else {
                "OH"
            };
            let confidence = [0.34, 0.5, 0.67, 0.8, 1.0][rng.random_range(0..5)];
            // the text disagrees with the label with probability (1 - c) / 2
            let flip = rng.random_bool((1.0 - confidence) / 2.0);
            let looks_offensive = (class != "NO") != flip;
            let len = rng.random_range(4..12);
            let k = if looks_offensive { rng.random_range(1..3) } else { 0 };
            SynthLabeled {
                text: world.sentence(&mut rng, len, k),
                class: class.to_string(),
                confidence,
            }
        })
        .collect()
}

/// CSV with the default labeled-dataset column names.
pub fn write_labeled_csv<W: Write>(out: W, rows: &[SynthLabeled]) -> csv::Result<()> {
    let fmt = crate::classifier::DatasetFormat::default();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([&fmt.text_column, &fmt.class_column, &fmt.confidence_column])?;
    for r in rows {
        w.write_record([r.text.as_str(), r.class.as_str(), &r.confidence.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Words planted by [`planted_pairs`]: `a`/`b` share one context pool and
/// `c`/`d` share another.
pub const PLANTED: [&str; 4] = ["alpha", "bravo", "charlie", "delta"];

/// Tokenized sentences of eight words: one planted word among seven fillers
/// drawn from its group's pool.
pub fn planted_pairs(sentences: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pools: [Vec<String>; 2] = [
        (0..20).map(|i| format!("pfill{i:02}")).collect(),
        (0..20).map(|i| format!("qfill{i:02}")).collect(),
    ];
    (0..sentences)
        .map(|_| {
            let g = rng.random_range(0..2);
            let mut s: Vec<String> = (0..7).map(|_| pools[g].choose(&mut rng).unwrap().clone()).collect();
            let planted = PLANTED[2 * g + rng.random_range(0..2)].to_string();
            let at = rng.random_range(0..=s.len());
            s.insert(at, planted);
            s
        })
        .collect()
}
