//! Tokenization, stop-word removal and rule-based lemmatization.
//!
//! The same [`NormalizerConfig`] runs before embedding training, before lexicon
//! lookup and before scoring, so all three see identical token streams.
//! Normalizing already-normalized text is a fixed point.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint;

#[derive(Debug, Error)]
pub enum TextNormError {
    #[error("stop-word file line {line}: {msg}")]
    Stopwords { line: usize, msg: String },
    #[error("lemma exception line {line}: {msg}")]
    Exceptions { line: usize, msg: String },
    #[error("suffix rules: {0}")]
    Rules(String),
    #[error("lemma {lemma:?} for {token:?} is not a fixed point of the lemmatizer")]
    UnstableLemma { token: String, lemma: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Lowercase, whitespace split, edge punctuation stripped, URLs dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().filter_map(clean_token).collect()
}

fn clean_token(raw: &str) -> Option<String> {
    let lower = raw.to_lowercase();
    let trimmed = lower.trim_matches(|c: char| !c.is_alphanumeric());
    if trimmed.is_empty() || is_url(trimmed) {
        return None;
    }
    Some(trimmed.to_string())
}

fn is_url(token: &str) -> bool {
    token.contains("://") || token.starts_with("www.")
}

fn is_single_token(s: &str) -> bool {
    let toks = tokenize(s);
    toks.len() == 1 && toks[0] == s
}

/// Normalized text, the `S = {s1, ..., sn}` that gets scored.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRule {
    pub suffix: String,
    pub replacement: String,
    /// Characters that must remain before the suffix.
    pub min_stem: usize,
}

impl SuffixRule {
    /// A rule whose replacement equals its suffix protects the word from
    /// every later rule.
    fn is_guard(&self) -> bool {
        self.suffix == self.replacement
    }

    fn apply(&self, token: &str) -> Option<String> {
        let stem = token.strip_suffix(self.suffix.as_str())?;
        if stem.chars().count() < self.min_stem {
            return None;
        }
        let out = format!("{stem}{}", self.replacement);
        // never leave a token that the tokenizer would trim differently
        let edge_ok = |c: Option<char>| c.is_some_and(char::is_alphanumeric);
        if !edge_ok(out.chars().next()) || !edge_ok(out.chars().last()) {
            return None;
        }
        Some(out)
    }
}

/// Swappable lemmatization step.
pub trait Lemmatizer {
    fn lemma(&self, token: &str) -> String;
}

/// Exception map first, then the first matching suffix rule, repeated until
/// nothing changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleLemmatizer {
    exceptions: BTreeMap<String, String>,
    rules: Vec<SuffixRule>,
}

impl RuleLemmatizer {
    pub fn new(
        exceptions: BTreeMap<String, String>,
        rules: Vec<SuffixRule>,
    ) -> Result<Self, TextNormError> {
        for r in &rules {
            if r.suffix.is_empty() {
                return Err(TextNormError::Rules("empty suffix".into()));
            }
            if r.replacement.chars().count() > r.suffix.chars().count() {
                return Err(TextNormError::Rules(format!(
                    "rule {:?} -> {:?} lengthens tokens",
                    r.suffix, r.replacement
                )));
            }
            if r.replacement.len() == r.suffix.len() && !r.is_guard() {
                return Err(TextNormError::Rules(format!(
                    "rule {:?} -> {:?} must shorten or guard",
                    r.suffix, r.replacement
                )));
            }
            if r.suffix != r.suffix.to_lowercase() || r.replacement != r.replacement.to_lowercase()
            {
                return Err(TextNormError::Rules(format!(
                    "rule {:?} -> {:?} is not lowercase",
                    r.suffix, r.replacement
                )));
            }
        }
        let lem = Self { exceptions, rules };
        for (token, lemma) in &lem.exceptions {
            if !is_single_token(lemma) || lem.lemma(lemma) != *lemma {
                return Err(TextNormError::UnstableLemma {
                    token: token.clone(),
                    lemma: lemma.clone(),
                });
            }
        }
        Ok(lem)
    }

    pub fn parse(exceptions_tsv: &str, rules_json: &str) -> Result<Self, TextNormError> {
        let mut exceptions = BTreeMap::new();
        for (i, line) in exceptions_tsv.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (token, lemma) = line.split_once('\t').ok_or(TextNormError::Exceptions {
                line: i + 1,
                msg: "expected token<TAB>lemma".into(),
            })?;
            exceptions.insert(token.trim().to_lowercase(), lemma.trim().to_lowercase());
        }
        let rules: Vec<SuffixRule> =
            serde_json::from_str(rules_json).map_err(|e| TextNormError::Rules(e.to_string()))?;
        Self::new(exceptions, rules)
    }

    pub fn english() -> Self {
        Self::parse(
            include_str!("../resources/lemma_exceptions.tsv"),
            include_str!("../resources/suffix_rules.json"),
        )
        .expect("bundled lemmatizer tables are valid")
    }

    pub fn rules(&self) -> &[SuffixRule] {
        &self.rules
    }

    pub fn exceptions(&self) -> &BTreeMap<String, String> {
        &self.exceptions
    }
}

impl Lemmatizer for RuleLemmatizer {
    fn lemma(&self, token: &str) -> String {
        let mut cur = token.to_string();
        // every non-guard rule strictly shortens, so this terminates
        'outer: loop {
            if let Some(l) = self.exceptions.get(&cur) {
                return l.clone();
            }
            for rule in self.rules.iter().filter(|r| cur.ends_with(r.suffix.as_str())) {
                if rule.is_guard() {
                    return cur;
                }
                if let Some(next) = rule.apply(&cur) {
                    cur = next;
                    continue 'outer;
                }
            }
            return cur;
        }
    }
}

pub fn parse_stopwords(text: &str) -> Result<BTreeSet<String>, TextNormError> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let w = line.trim();
        if w.is_empty() || w.starts_with('#') {
            continue;
        }
        if w.split_whitespace().count() != 1 {
            return Err(TextNormError::Stopwords {
                line: i + 1,
                msg: format!("{w:?} is not a single token"),
            });
        }
        out.insert(w.to_lowercase());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizerConfig {
    pub stopwords: BTreeSet<String>,
    pub lemmatizer: RuleLemmatizer,
}

impl NormalizerConfig {
    pub fn english() -> Self {
        Self {
            stopwords: parse_stopwords(include_str!("../resources/stopwords.txt"))
                .expect("bundled stop-words are valid"),
            lemmatizer: RuleLemmatizer::english(),
        }
    }

    pub fn load(
        stopwords: &Path,
        exceptions: &Path,
        rules: &Path,
    ) -> Result<Self, TextNormError> {
        Ok(Self {
            stopwords: parse_stopwords(&std::fs::read_to_string(stopwords)?)?,
            lemmatizer: RuleLemmatizer::parse(
                &std::fs::read_to_string(exceptions)?,
                &std::fs::read_to_string(rules)?,
            )?,
        })
    }

    /// Stable hash of every table, recorded in provenance.
    pub fn fingerprint(&self) -> u64 {
        let mut buf = Vec::new();
        for w in &self.stopwords {
            buf.extend_from_slice(w.as_bytes());
            buf.push(0);
        }
        buf.push(1);
        for (k, v) in &self.lemmatizer.exceptions {
            buf.extend_from_slice(k.as_bytes());
            buf.push(0);
            buf.extend_from_slice(v.as_bytes());
            buf.push(0);
        }
        buf.push(1);
        for r in &self.lemmatizer.rules {
            buf.extend_from_slice(r.suffix.as_bytes());
            buf.push(0);
            buf.extend_from_slice(r.replacement.as_bytes());
            buf.push(0);
            buf.extend_from_slice(&(r.min_stem as u64).to_le_bytes());
        }
        fingerprint(&buf)
    }
}

impl Default for NormalizerConfig {
    fn default() -> Self {
        Self::english()
    }
}

/// Tokenize, drop stop-words, lemmatize.
pub fn normalize(text: &str, cfg: &NormalizerConfig) -> TokenSequence {
    normalize_with(text, &cfg.stopwords, &cfg.lemmatizer)
}

/// [`normalize`] with any [`Lemmatizer`].
pub fn normalize_with<L: Lemmatizer + ?Sized>(
    text: &str,
    stopwords: &BTreeSet<String>,
    lemmatizer: &L,
) -> TokenSequence {
    let tokens = tokenize(text)
        .into_iter()
        .filter(|t| !stopwords.contains(t))
        .map(|t| lemmatizer.lemma(&t))
        // a lemma can land on a stop-word ("thes" -> "the")
        .filter(|l| !l.is_empty() && !stopwords.contains(l))
        .collect();
    TokenSequence(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Hello, WORLD!"), vec!["hello", "world"]);
        assert_eq!(
            tokenize("don't stop-gap http://x.y"),
            vec!["don't", "stop-gap"]
        );
        assert_eq!(tokenize("(www.example.com) ... --- !!"), Vec::<String>::new());
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("\u{3000}tab\tnew\nline"), vec!["tab", "new", "line"]);
    }

    #[test]
    fn normalize_example() {
        let cfg = NormalizerConfig {
            stopwords: ["the", "are"].iter().map(|s| s.to_string()).collect(),
            lemmatizer: RuleLemmatizer::english(),
        };
        assert_eq!(
            normalize("the dogs are running", &cfg).tokens(),
            &["dog", "run"]
        );
        assert!(normalize("", &cfg).is_empty());
    }

    #[test]
    fn default_lemmas() {
        let l = RuleLemmatizer::english();
        for (w, want) in [
            ("dogs", "dog"),
            ("running", "run"),
            ("parties", "party"),
            ("class", "class"),
            ("classes", "class"),
            ("virus", "virus"),
            ("talked", "talk"),
            ("went", "go"),
            ("trump's", "trump"),
            ("yes", "yes"),
            ("news", "news"),
        ] {
            assert_eq!(l.lemma(w), want, "{w}");
        }
    }

    #[test]
    fn output_excludes_stopwords_even_after_lemmatizing() {
        let cfg = NormalizerConfig {
            stopwords: ["dog"].iter().map(|s| s.to_string()).collect(),
            lemmatizer: RuleLemmatizer::english(),
        };
        assert!(normalize("dogs dog", &cfg).is_empty());
    }

    #[test]
    fn rejects_unstable_exception_targets() {
        let mut exc = BTreeMap::new();
        exc.insert("geese".to_string(), "cats".to_string());
        let rules = vec![SuffixRule {
            suffix: "s".into(),
            replacement: "".into(),
            min_stem: 1,
        }];
        assert!(matches!(
            RuleLemmatizer::new(exc, rules),
            Err(TextNormError::UnstableLemma { .. })
        ));
    }

    #[test]
    fn rejects_lengthening_rules() {
        let rules = vec![SuffixRule {
            suffix: "y".into(),
            replacement: "ies".into(),
            min_stem: 1,
        }];
        assert!(RuleLemmatizer::new(BTreeMap::new(), rules).is_err());
    }

    #[test]
    fn bundled_files_parse() {
        let cfg = NormalizerConfig::english();
        assert!(cfg.stopwords.contains("the"));
        assert!(!cfg.stopwords.contains("#"));
        assert_eq!(cfg.fingerprint(), NormalizerConfig::english().fingerprint());
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        proptest::collection::vec(
            prop_oneof![
                "[a-zA-Z]{1,12}",
                "[a-z]{2,6}(ing|ed|es|s|ies|'s|nning|ss|us)",
                "[-.,!?'\"()]{1,3}",
                "(http://|www\\.)[a-z]{1,5}",
                "[\\PC]{1,4}",
                "(The|ARE|dogs|running|classes|went|is|this)",
            ],
            0..20,
        )
        .prop_map(|parts| parts.join(" "))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn tokens_are_clean(text in "\\PC{0,60}") {
            for t in tokenize(&text) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
                prop_assert_eq!(t.to_lowercase(), t.clone());
                prop_assert!(t.chars().next().unwrap().is_alphanumeric());
                prop_assert!(t.chars().last().unwrap().is_alphanumeric());
            }
        }

        #[test]
        fn normalize_is_idempotent(text in text_strategy()) {
            let cfg = NormalizerConfig::english();
            let once = normalize(&text, &cfg);
            let twice = normalize(&once.to_string(), &cfg);
            prop_assert_eq!(&once, &twice);
            for t in once.tokens() {
                prop_assert!(!cfg.stopwords.contains(t));
            }
        }
    }
}
