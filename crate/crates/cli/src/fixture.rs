//! The bundled synthetic fixture: a comment dump, two word lists, a labeled
//! dataset and a run config sized for a quick end-to-end run.

use std::io::Write;
use std::path::Path;

use offense_core::classifier::{ForestConfig, TreeConfig};
use offense_core::synth::{synth_corpus, synth_labeled, write_jsonl, write_labeled_csv, CorpusSpec, SynthWorld};
use serde::{Deserialize, Serialize};

use crate::config::{LexiconSource, RunConfig};
use crate::output::{write_file, write_json, Staged};
use crate::{CliError, Result};

pub const FIXTURE_FILES: [&str; 5] = [
    "comments.jsonl",
    "lexicon_a.txt",
    "lexicon_b.txt",
    "labeled.csv",
    "config.json",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub corpus: CorpusSpec,
    pub labeled: usize,
    pub labeled_seed: u64,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            corpus: CorpusSpec {
                noise_rate: 0.05,
                ..CorpusSpec::default()
            },
            labeled: 2000,
            labeled_seed: 11,
        }
    }
}

/// Run settings matched to the fixture's size.
pub fn fixture_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.ingest.filter.sample_rate = 1.0;
    cfg.embedding.dim = 32;
    cfg.embedding.min_count = 5;
    cfg.embedding.epochs = 3;
    cfg.lexicons = vec![
        LexiconSource {
            tag: "a".into(),
            path: "lexicon_a.txt".into(),
        },
        LexiconSource {
            tag: "b".into(),
            path: "lexicon_b.txt".into(),
        },
    ];
    let c = &mut cfg.classifier;
    c.dataset = Some("labeled.csv".into());
    c.folds = 5;
    c.grid = [10, 30]
        .into_iter()
        .flat_map(|n| {
            [Some(2), Some(4)].into_iter().map(move |d| ForestConfig {
                n_estimators: n,
                tree: TreeConfig {
                    max_depth: d,
                    ..TreeConfig::default()
                },
                ..ForestConfig::default()
            })
        })
        .collect();
    c.forest = ForestConfig {
        n_estimators: 30,
        tree: TreeConfig {
            max_depth: Some(4),
            ..TreeConfig::default()
        },
        ..ForestConfig::default()
    };
    c.sweep_fractions = vec![0.25, 0.5, 0.75];
    cfg.analytics.min_comments = 100;
    cfg.analytics.min_flow = 2;
    cfg.analytics.flow_destinations = vec!["politics".into(), "the_donald".into()];
    cfg
}

fn word_list(words: &[String]) -> Vec<u8> {
    let mut out = b"# synthetic word list\n".to_vec();
    for w in words {
        out.extend_from_slice(w.as_bytes());
        out.push(b'\n');
    }
    out
}

/// Writes every fixture file into `dir`.
pub fn write_fixture(dir: &Path, spec: &FixtureSpec) -> Result<()> {
    let world = SynthWorld::default();
    let corpus = synth_corpus(&world, &spec.corpus);
    let mut staged = Staged::create(&dir.join("comments.jsonl"))?;
    write_jsonl(staged.writer(), &corpus.comments, spec.corpus.noise_rate, spec.corpus.seed)?;
    staged.commit()?;

    let (a, b) = world.lexicons();
    write_file(&dir.join("lexicon_a.txt"), &word_list(&a))?;
    write_file(&dir.join("lexicon_b.txt"), &word_list(&b))?;

    let rows = synth_labeled(&world, spec.labeled, spec.labeled_seed);
    let mut staged = Staged::create(&dir.join("labeled.csv"))?;
    write_labeled_csv(staged.writer(), &rows).map_err(CliError::data)?;
    staged.writer().flush()?;
    staged.commit()?;

    write_json(&dir.join("config.json"), &fixture_config())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_fixture_matches_the_generator() {
        let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
        let dir = tempfile::tempdir().unwrap();
        write_fixture(dir.path(), &FixtureSpec::default()).unwrap();
        for f in FIXTURE_FILES {
            let want = std::fs::read(dir.path().join(f)).unwrap();
            let got = std::fs::read(bundled.join(f)).unwrap_or_default();
            assert!(got == want, "fixtures/{f} is stale; regenerate with `offense synth`");
        }
    }

    #[test]
    fn fixture_config_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        write_json(&dir.path().join("c.json"), &fixture_config()).unwrap();
        let c = RunConfig::load(&dir.path().join("c.json")).unwrap();
        assert_eq!(c.lexicons[0].path, dir.path().join("lexicon_a.txt"));
        assert_eq!(c.classifier.grid, fixture_config().classifier.grid);
    }
}
