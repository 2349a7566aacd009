//! Hate vector construction and the max-cosine text transform.
//!
//! A text is scored by the largest cosine similarity between the hate vector
//! and any of its normalized tokens. Out-of-vocabulary tokens stand in as
//! zero vectors and so contribute a similarity of exactly zero.

use std::collections::HashSet;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RawComment;
use crate::embedding::{cosine, EmbeddingModel};
use crate::textnorm::{normalize, NormalizerConfig};
use crate::{fingerprint, hex_hash};

#[derive(Debug, Error)]
pub enum HateModelError {
    #[error("lexicon is empty after normalization")]
    EmptyLexicon,
    #[error("none of the {0} lexicon words is in the embedding vocabulary")]
    NoLexiconWordInVocabulary(usize),
    #[error("hate vector was built on embedding {expected}, scoring with {actual}")]
    ProvenanceMismatch { expected: String, actual: String },
    #[error("hate vector was built with normalizer {expected}, scoring with {actual}")]
    NormalizerMismatch { expected: String, actual: String },
    #[error("hate vector file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub word: String,
    pub source: String,
}

/// Deduplicated, normalized offensive words in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffensiveLexicon {
    entries: Vec<LexiconEntry>,
}

impl OffensiveLexicon {
    /// Takes words as given, without normalization.
    pub fn from_words<I, S>(words: I, source: &str) -> Result<Self, HateModelError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut lex = Self {
            entries: Vec::new(),
        };
        let mut seen = HashSet::new();
        for w in words {
            let w = w.into();
            if seen.insert(w.clone()) {
                lex.entries.push(LexiconEntry {
                    word: w,
                    source: source.to_string(),
                });
            }
        }
        if lex.entries.is_empty() {
            return Err(HateModelError::EmptyLexicon);
        }
        Ok(lex)
    }

    /// Parses one or more word-list files (`(source tag, contents)`), one entry
    /// per line with `#` comments. Entries go through the normalizer and
    /// multi-word entries contribute each surviving unigram.
    pub fn parse(sources: &[(&str, &str)], cfg: &NormalizerConfig) -> Result<Self, HateModelError> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (tag, text) in sources {
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                for tok in normalize(line, cfg).into_inner() {
                    if seen.insert(tok.clone()) {
                        entries.push(LexiconEntry {
                            word: tok,
                            source: tag.to_string(),
                        });
                    }
                }
            }
        }
        if entries.is_empty() {
            return Err(HateModelError::EmptyLexicon);
        }
        Ok(Self { entries })
    }

    pub fn load(paths: &[(&str, &Path)], cfg: &NormalizerConfig) -> Result<Self, HateModelError> {
        let texts = paths
            .iter()
            .map(|(tag, p)| Ok((*tag, std::fs::read_to_string(p)?)))
            .collect::<Result<Vec<_>, std::io::Error>>()?;
        let borrowed: Vec<(&str, &str)> = texts.iter().map(|(t, s)| (*t, s.as_str())).collect();
        Self::parse(&borrowed, cfg)
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        let mut buf = Vec::new();
        for e in &self.entries {
            buf.extend_from_slice(e.word.as_bytes());
            buf.push(b'\n');
        }
        fingerprint(&buf)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub embedding: String,
    pub lexicon: String,
    pub normalizer: String,
}

/// Mean of the in-vocabulary lexicon vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HateVector {
    pub h: Vec<f64>,
    pub contributing_count: usize,
    pub missing_count: usize,
    pub provenance: Provenance,
}

impl HateVector {
    pub fn save(&self, path: &Path) -> Result<(), HateModelError> {
        let json =
            serde_json::to_vec_pretty(self).map_err(|e| HateModelError::Format(e.to_string()))?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HateModelError> {
        let hv: HateVector = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| HateModelError::Format(e.to_string()))?;
        if hv.contributing_count == 0 || hv.h.iter().any(|v| !v.is_finite()) {
            return Err(HateModelError::Format("degenerate hate vector".into()));
        }
        Ok(hv)
    }
}

pub fn build_hate_vector(
    lexicon: &OffensiveLexicon,
    model: &EmbeddingModel,
    cfg: &NormalizerConfig,
) -> Result<HateVector, HateModelError> {
    let mut sum = vec![0f64; model.dim()];
    let mut found = 0usize;
    for e in lexicon.entries() {
        if let Some(v) = model.vector(&e.word) {
            for (s, &x) in sum.iter_mut().zip(v) {
                *s += f64::from(x);
            }
            found += 1;
        }
    }
    if found == 0 {
        return Err(HateModelError::NoLexiconWordInVocabulary(lexicon.len()));
    }
    let n = found as f64;
    sum.iter_mut().for_each(|s| *s /= n);
    Ok(HateVector {
        h: sum,
        contributing_count: found,
        missing_count: lexicon.len() - found,
        provenance: Provenance {
            embedding: hex_hash(model.content_hash()),
            lexicon: hex_hash(lexicon.fingerprint()),
            normalizer: hex_hash(cfg.fingerprint()),
        },
    })
}

/// Transformed score in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OffenseScore(pub f64);

impl OffenseScore {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Score plus the number of cosine evaluations spent on it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformTrace {
    pub score: OffenseScore,
    pub tokens: usize,
    pub cosine_evaluations: usize,
}

/// A model, hate vector and normalizer checked to belong together.
pub struct Scorer<'a> {
    model: &'a EmbeddingModel,
    hate: &'a HateVector,
    cfg: &'a NormalizerConfig,
    zero: Vec<f32>,
}

impl<'a> Scorer<'a> {
    pub fn new(
        model: &'a EmbeddingModel,
        hate: &'a HateVector,
        cfg: &'a NormalizerConfig,
    ) -> Result<Self, HateModelError> {
        let actual = hex_hash(model.content_hash());
        if hate.provenance.embedding != actual || hate.h.len() != model.dim() {
            return Err(HateModelError::ProvenanceMismatch {
                expected: hate.provenance.embedding.clone(),
                actual,
            });
        }
        let actual = hex_hash(cfg.fingerprint());
        if hate.provenance.normalizer != actual {
            return Err(HateModelError::NormalizerMismatch {
                expected: hate.provenance.normalizer.clone(),
                actual,
            });
        }
        Ok(Self {
            model,
            hate,
            cfg,
            zero: vec![0.0; model.dim()],
        })
    }

    pub fn score(&self, text: &str) -> OffenseScore {
        self.trace(text).score
    }

    pub fn trace(&self, text: &str) -> TransformTrace {
        let tokens = normalize(text, self.cfg);
        let mut best: Option<f64> = None;
        let mut evaluations = 0;
        for tok in tokens.tokens() {
            let v = self.model.vector(tok).unwrap_or(&self.zero);
            let c = cosine(v, &self.hate.h);
            evaluations += 1;
            best = Some(best.map_or(c, |b: f64| b.max(c)));
        }
        TransformTrace {
            score: OffenseScore(best.unwrap_or(0.0)),
            tokens: tokens.len(),
            cosine_evaluations: evaluations,
        }
    }
}

/// One-shot transform; prefer [`Scorer`] when scoring many texts.
pub fn transform(
    text: &str,
    model: &EmbeddingModel,
    hate: &HateVector,
    cfg: &NormalizerConfig,
) -> Result<OffenseScore, HateModelError> {
    Ok(Scorer::new(model, hate, cfg)?.score(text))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredComment {
    pub id: String,
    pub subreddit: String,
    pub author: String,
    pub score: i64,
    pub created_utc: i64,
    pub offense_score: f64,
    /// Forest verdict, when a classifier was applied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offensive: Option<bool>,
}

impl ScoredComment {
    pub fn new(c: &RawComment, s: OffenseScore) -> Self {
        Self {
            id: c.id.clone(),
            subreddit: c.subreddit.clone(),
            author: c.author.clone(),
            score: c.score,
            created_utc: c.created_utc,
            offense_score: s.value(),
            offensive: None,
        }
    }
}

/// Scores a stream in order.
pub fn score_corpus<'s, I>(comments: I, scorer: &'s Scorer<'s>) -> impl Iterator<Item = ScoredComment> + 's
where
    I: IntoIterator<Item = RawComment>,
    I::IntoIter: 's,
{
    comments
        .into_iter()
        .map(move |c| ScoredComment::new(&c, scorer.score(&c.body)))
}

/// Scores a batch on the current rayon pool; output order matches input.
pub fn score_batch(comments: &[RawComment], scorer: &Scorer<'_>) -> Vec<ScoredComment> {
    comments
        .par_iter()
        .map(|c| ScoredComment::new(c, scorer.score(&c.body)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreFormat {
    Csv,
    JsonLines,
}

pub const SCORE_CSV_HEADER: &str = "id,subreddit,author,score,created_utc,offense_score,offensive";

/// Streaming writer for scored comments.
pub struct ScoreWriter<W: Write> {
    format: ScoreFormat,
    csv: Option<csv::Writer<W>>,
    raw: Option<BufWriter<W>>,
}

impl<W: Write> ScoreWriter<W> {
    pub fn new(out: W, format: ScoreFormat) -> Result<Self, HateModelError> {
        Ok(match format {
            ScoreFormat::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(SCORE_CSV_HEADER.split(','))
                    .map_err(|e| HateModelError::Format(e.to_string()))?;
                Self {
                    format,
                    csv: Some(w),
                    raw: None,
                }
            }
            ScoreFormat::JsonLines => Self {
                format,
                csv: None,
                raw: Some(BufWriter::new(out)),
            },
        })
    }

    pub fn write(&mut self, s: &ScoredComment) -> Result<(), HateModelError> {
        match self.format {
            ScoreFormat::Csv => {
                let offensive = match s.offensive {
                    Some(true) => "1",
                    Some(false) => "0",
                    None => "",
                };
                self.csv
                    .as_mut()
                    .unwrap()
                    .write_record([
                        s.id.as_str(),
                        s.subreddit.as_str(),
                        s.author.as_str(),
                        &s.score.to_string(),
                        &s.created_utc.to_string(),
                        &s.offense_score.to_string(),
                        offensive,
                    ])
                    .map_err(|e| HateModelError::Format(e.to_string()))?;
            }
            ScoreFormat::JsonLines => {
                let w = self.raw.as_mut().unwrap();
                serde_json::to_writer(&mut *w, s).map_err(|e| HateModelError::Format(e.to_string()))?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), HateModelError> {
        if let Some(mut w) = self.csv {
            w.flush()?;
        }
        if let Some(mut w) = self.raw {
            w.flush()?;
        }
        Ok(())
    }
}

/// Reads scores written by [`ScoreWriter`], in either format.
pub fn read_scores(path: &Path) -> Result<Vec<ScoredComment>, HateModelError> {
    let text = std::fs::read_to_string(path)?;
    if text.starts_with("id,") {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut out = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| HateModelError::Format(e.to_string()))?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| {
                field(i)
                    .parse::<i64>()
                    .map_err(|_| HateModelError::Format(format!("bad integer {:?}", field(i))))
            };
            out.push(ScoredComment {
                id: field(0).to_string(),
                subreddit: field(1).to_string(),
                author: field(2).to_string(),
                score: num(3)?,
                created_utc: num(4)?,
                offense_score: field(5)
                    .parse()
                    .map_err(|_| HateModelError::Format(format!("bad score {:?}", field(5))))?,
                offensive: match field(6) {
                    "1" => Some(true),
                    "0" => Some(false),
                    _ => None,
                },
            });
        }
        Ok(out)
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| HateModelError::Format(e.to_string())))
            .collect()
    }
}
