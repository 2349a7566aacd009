use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use offense_core::hatemodel::ScoreFormat;

use crate::config::{LexiconSource, RunConfig};
use crate::fixture::{write_fixture, FixtureSpec};
use crate::stages::{self, in_pool, EvalFlags};
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "offense", version, about = "Offensive-speech scoring and corpus measurement pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, filter and sample a JSON-lines comment dump.
    Ingest {
        #[arg(long)]
        input: PathBuf,
    },
    /// Train word vectors on the ingested comments.
    TrainEmbedding {
        /// Defaults to the ingested comments in the output directory.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Average the vectors of the offensive word lists.
    BuildHatevector {
        /// Word list as TAG=PATH; repeatable.
        #[arg(long, value_parser = parse_lexicon)]
        lexicon: Vec<LexiconSource>,
    },
    /// Grid search, refit and holdout evaluation of the forest.
    TrainClassifier {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        confidence_threshold: Option<f64>,
        #[arg(long)]
        holdout_fraction: Option<f64>,
    },
    /// Run evaluation protocols on the labeled data.
    Evaluate {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        kfold: bool,
        #[arg(long)]
        holdout: bool,
        /// Holdout fraction by confidence threshold grid.
        #[arg(long)]
        sweep: bool,
        /// Compare against simple classifiers.
        #[arg(long)]
        baselines: bool,
    },
    /// Label every comment with the trained forest.
    Classify {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Jsonl)]
        format: Format,
    },
    /// Aggregate classified comments into the report tables.
    Analyze {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        taxonomy: Option<PathBuf>,
        /// Keep per-author state in this many on-disk partitions.
        #[arg(long)]
        spill_partitions: Option<usize>,
    },
    /// Write the synthetic fixture into a directory.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long)]
        comments: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Jsonl,
    Csv,
}

fn parse_lexicon(s: &str) -> std::result::Result<LexiconSource, String> {
    let (tag, path) = s
        .split_once('=')
        .filter(|(t, p)| !t.is_empty() && !p.is_empty())
        .ok_or_else(|| format!("expected TAG=PATH, got {s:?}"))?;
    Ok(LexiconSource {
        tag: tag.to_string(),
        path: path.into(),
    })
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        }
        Ok(cfg)
    }
}

fn apply_overrides(cfg: &mut RunConfig, cmd: &Command) {
    match cmd {
        Command::BuildHatevector { lexicon } if !lexicon.is_empty() => cfg.lexicons = lexicon.clone(),
        Command::TrainClassifier {
            dataset,
            confidence_threshold,
            holdout_fraction,
        } => {
            if let Some(d) = dataset {
                cfg.classifier.dataset = Some(d.clone());
            }
            if let Some(t) = confidence_threshold {
                cfg.classifier.confidence_threshold = *t;
            }
            if let Some(f) = holdout_fraction {
                cfg.classifier.holdout_fraction = *f;
            }
        }
        Command::Evaluate { dataset: Some(d), .. } => cfg.classifier.dataset = Some(d.clone()),
        Command::Analyze {
            taxonomy,
            spill_partitions,
            ..
        } => {
            if let Some(t) = taxonomy {
                cfg.taxonomy = Some(t.clone());
            }
            if let Some(p) = spill_partitions {
                cfg.spill_partitions = Some(*p);
            }
        }
        _ => {}
    }
}

/// Executes a parsed command line; returns a one-line summary.
pub fn execute(cli: Cli) -> Result<String> {
    let mut cfg = cli.global.resolve()?;
    apply_overrides(&mut cfg, &cli.command);
    let cfg = cfg.resolve()?;
    let workers = cfg.workers;
    in_pool(workers, move || match &cli.command {
        Command::Ingest { input } => {
            let s = stages::cmd_ingest(&cfg, input)?;
            Ok(format!(
                "read {} malformed {} short {} deleted {} out-of-window {} sampled {}",
                s.read, s.malformed, s.filtered_short, s.filtered_deleted, s.out_of_window, s.sampled
            ))
        }
        Command::TrainEmbedding { input } => {
            let m = stages::cmd_train_embedding(&cfg, input.as_deref())?;
            Ok(format!("vocabulary {} dim {}", m.vocab().len(), m.dim()))
        }
        Command::BuildHatevector { .. } => {
            let hv = stages::cmd_build_hatevector(&cfg, &cfg.lexicons)?;
            Ok(format!(
                "contributing {} missing {}",
                hv.contributing_count, hv.missing_count
            ))
        }
        Command::TrainClassifier { .. } => {
            let r = stages::cmd_train_classifier(&cfg, None)?;
            Ok(format!(
                "best n_estimators {} max_depth {:?}: cv accuracy {:.4}, holdout accuracy {:.4}",
                r.best.n_estimators, r.best.tree.max_depth, r.best_cv.accuracy, r.holdout.accuracy
            ))
        }
        Command::Evaluate {
            kfold,
            holdout,
            sweep,
            baselines,
            ..
        } => {
            let flags = EvalFlags {
                kfold: *kfold,
                holdout: *holdout,
                sweep: *sweep,
                baselines: *baselines,
            };
            let files = stages::cmd_evaluate(&cfg, None, flags)?;
            Ok(format!("wrote {} files", files.len()))
        }
        Command::Classify { input, format } => {
            let format = match format {
                Format::Jsonl => ScoreFormat::JsonLines,
                Format::Csv => ScoreFormat::Csv,
            };
            let s = stages::cmd_classify(&cfg, input.as_deref(), format)?;
            Ok(format!("classified {} offensive {}", s.comments, s.offensive))
        }
        Command::Analyze { input, .. } => {
            let (r, _) = stages::cmd_analyze(&cfg, input.as_deref())?;
            Ok(format!("analyzed {} comments", r.comments))
        }
        Command::Synth { dir, comments } => {
            let mut spec = FixtureSpec::default();
            if let Some(n) = comments {
                spec.corpus.comments = *n;
            }
            write_fixture(dir, &spec)?;
            Ok(format!("fixture written to {}", dir.display()))
        }
    })
}

/// Parses `args` and runs; the result's exit code is 0 on success.
pub fn run<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            return (code, e.render().to_string());
        }
    };
    match execute(cli) {
        Ok(msg) => (0, msg),
        Err(e) => (e.exit_code(), e.to_string()),
    }
}
