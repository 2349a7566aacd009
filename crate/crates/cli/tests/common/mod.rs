#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use offense_cli::cli::run;

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn fixture_config() -> PathBuf {
    fixture_dir().join("config.json")
}

/// Runs one subcommand against the fixture config; panics on a nonzero exit.
pub fn stage(out: &Path, args: &[&str]) -> String {
    let (code, msg) = try_stage(out, args);
    assert_eq!(code, 0, "{args:?}: {msg}");
    msg
}

pub fn try_stage(out: &Path, args: &[&str]) -> (i32, String) {
    let cfg = fixture_config();
    let mut argv = vec![
        "offense",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ];
    argv.extend_from_slice(args);
    run(argv)
}

/// Every stage in order, with `extra` global flags on each call.
pub fn full_pipeline(out: &Path, extra: &[&str]) {
    let input = fixture_dir().join("comments.jsonl");
    let steps: [Vec<&str>; 7] = [
        vec!["ingest", "--input", input.to_str().unwrap()],
        vec!["train-embedding"],
        vec!["build-hatevector"],
        vec!["train-classifier"],
        vec!["evaluate", "--kfold", "--holdout", "--sweep", "--baselines"],
        vec!["classify"],
        vec!["analyze"],
    ];
    for mut s in steps {
        s.extend_from_slice(extra);
        stage(out, &s);
    }
}

/// Relative path to contents for every file under `dir`.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}
