//! Skip-gram word embedding with negative sampling.
//!
//! Training keeps input and output matrices in relaxed atomics so several
//! workers can update them without locks. A single worker with a fixed seed
//! is bit-for-bit reproducible; more workers trade that for throughput.
//!
//! Model file layout (little-endian):
//!
//! ```text
//! b"OFFEMB1\0"  u32 dim  u64 vocab_size
//! vocab_size x { u16 byte_len, utf8 word, dim x f32 }
//! u64 xxh64 checksum of every preceding byte
//! ```
//!
//! Counts and training metadata go to a `<model>.meta.json` sidecar.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fingerprint;

pub const MAGIC: &[u8; 8] = b"OFFEMB1\0";

const NEGATIVE_TABLE_SIZE: usize = 1_000_000;
const UNIGRAM_POWER: f64 = 0.75;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("no token reaches the minimum count")]
    EmptyVocabulary,
    #[error("non-finite weight update; lower the learning rate")]
    NonFiniteUpdate,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model file truncated")]
    Truncated,
    #[error("bad magic bytes, not an embedding model")]
    BadMagic,
    #[error("checksum mismatch: stored {stored:016x}, computed {computed:016x}")]
    ChecksumMismatch { stored: u64, computed: u64 },
    #[error("corrupt model file: {0}")]
    Corrupt(String),
    #[error("word of {0} bytes does not fit the model format")]
    WordTooLong(usize),
    #[error("sidecar metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AsRef<[String]> for crate::textnorm::TokenSequence {
    fn as_ref(&self) -> &[String] {
        self.tokens()
    }
}

/// Retained words with dense indices, most frequent first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
    min_count: u64,
    total_tokens: u64,
}

impl Vocabulary {
    fn from_parts(words: Vec<String>, counts: Vec<u64>, min_count: u64) -> Self {
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let total_tokens = counts.iter().sum();
        Self {
            words,
            counts,
            index,
            min_count,
            total_tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    pub fn word(&self, idx: u32) -> &str {
        &self.words[idx as usize]
    }

    pub fn count(&self, idx: u32) -> u64 {
        self.counts[idx as usize]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn min_count(&self) -> u64 {
        self.min_count
    }

    /// Sum of counts over retained words.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }
}

/// Exact global counts; words under `min_count` are dropped. Indices go by
/// descending count, ties broken lexicographically.
pub fn build_vocab<I, T>(corpus: I, min_count: u64) -> Result<Vocabulary, EmbeddingError>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[String]>,
{
    let mut counts: HashMap<String, u64> = HashMap::new();
    for seq in corpus {
        for tok in seq.as_ref() {
            match counts.get_mut(tok.as_str()) {
                Some(c) => *c += 1,
                None => {
                    counts.insert(tok.clone(), 1);
                }
            }
        }
    }
    let mut kept: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .collect();
    if kept.is_empty() {
        return Err(EmbeddingError::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let (words, counts) = kept.into_iter().unzip();
    Ok(Vocabulary::from_parts(words, counts, min_count))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub initial_learning_rate: f32,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub seed: u64,
    /// 1 gives a reproducible model; more workers race on the weights.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            initial_learning_rate: 0.025,
            subsample_threshold: 1e-3,
            min_count: 25,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::InvalidConfig(m.to_string()));
        if self.dim == 0 || self.dim > u32::MAX as usize {
            return bad("dim must be positive");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.negative_samples == 0 {
            return bad("negative_samples must be at least 1");
        }
        if !(self.initial_learning_rate > 0.0 && self.initial_learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.subsample_threshold > 0.0 && self.subsample_threshold.is_finite()) {
            return bad("subsample threshold must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub config: Option<TrainConfig>,
    /// Fingerprint of the training token stream.
    pub corpus_hash: Option<u64>,
}

/// A trained, immutable embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    vocab: Vocabulary,
    vectors: Vec<f32>,
    metadata: ModelMetadata,
    content_hash: u64,
}

impl EmbeddingModel {
    pub fn new(
        vocab: Vocabulary,
        dim: usize,
        vectors: Vec<f32>,
        metadata: ModelMetadata,
    ) -> Result<Self, EmbeddingError> {
        if dim == 0 || vectors.len() != vocab.len() * dim {
            return Err(EmbeddingError::Corrupt(format!(
                "{} floats for {} words of dim {dim}",
                vectors.len(),
                vocab.len()
            )));
        }
        if vectors.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFiniteUpdate);
        }
        let mut model = Self {
            dim,
            vocab,
            vectors,
            metadata,
            content_hash: 0,
        };
        model.content_hash = model.encode()?.1;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn metadata(&self) -> &ModelMetadata {
        &self.metadata
    }

    /// The file checksum; identifies this model in provenance records.
    pub fn content_hash(&self) -> u64 {
        self.content_hash
    }

    pub fn row(&self, idx: u32) -> &[f32] {
        let start = idx as usize * self.dim;
        &self.vectors[start..start + self.dim]
    }

    /// The word's vector, or `None` out of vocabulary.
    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.vocab.index_of(word).map(|i| self.row(i))
    }

    fn encode(&self) -> Result<(Vec<u8>, u64), EmbeddingError> {
        let mut buf = Vec::with_capacity(20 + self.vectors.len() * 4 + self.vocab.len() * 10);
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(self.dim as u32).to_le_bytes());
        buf.extend_from_slice(&(self.vocab.len() as u64).to_le_bytes());
        for (i, w) in self.vocab.words.iter().enumerate() {
            let len = u16::try_from(w.len()).map_err(|_| EmbeddingError::WordTooLong(w.len()))?;
            buf.extend_from_slice(&len.to_le_bytes());
            buf.extend_from_slice(w.as_bytes());
            for v in self.row(i as u32) {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let checksum = fingerprint(&buf);
        buf.extend_from_slice(&checksum.to_le_bytes());
        Ok((buf, checksum))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.encode().expect("validated at construction").0
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        let (words, dim, vectors, checksum) = decode(bytes)?;
        let n = words.len();
        let vocab = Vocabulary::from_parts(words, vec![0; n], 0);
        let model = Self::new(vocab, dim, vectors, ModelMetadata::default())?;
        debug_assert_eq!(model.content_hash, checksum);
        Ok(model)
    }

    /// Writes the model and its metadata sidecar.
    pub fn save(&self, path: &Path) -> Result<(), EmbeddingError> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        f.write_all(&self.to_bytes())?;
        f.flush()?;
        let sidecar = Sidecar {
            model_checksum: crate::hex_hash(self.content_hash),
            min_count: self.vocab.min_count,
            counts: self.vocab.counts.clone(),
            metadata: self.metadata.clone(),
        };
        std::fs::write(
            sidecar_path(path),
            serde_json::to_vec_pretty(&sidecar).map_err(|e| EmbeddingError::Metadata(e.to_string()))?,
        )?;
        Ok(())
    }

    /// Loads a model; counts and metadata come from the sidecar when present.
    pub fn load(path: &Path) -> Result<Self, EmbeddingError> {
        let mut model = Self::from_bytes(&std::fs::read(path)?)?;
        let side = sidecar_path(path);
        if side.exists() {
            let s: Sidecar = serde_json::from_slice(&std::fs::read(&side)?)
                .map_err(|e| EmbeddingError::Metadata(e.to_string()))?;
            if s.model_checksum != crate::hex_hash(model.content_hash) {
                return Err(EmbeddingError::Metadata(format!(
                    "sidecar belongs to model {}, file is {}",
                    s.model_checksum,
                    crate::hex_hash(model.content_hash)
                )));
            }
            if s.counts.len() != model.vocab.len() {
                return Err(EmbeddingError::Metadata("count vector length".into()));
            }
            let words = std::mem::take(&mut model.vocab.words);
            model.vocab = Vocabulary::from_parts(words, s.counts, s.min_count);
            model.metadata = s.metadata;
        }
        Ok(model)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Sidecar {
    model_checksum: String,
    min_count: u64,
    counts: Vec<u64>,
    metadata: ModelMetadata,
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbeddingError> {
        let end = self.pos.checked_add(n).ok_or(EmbeddingError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(EmbeddingError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, EmbeddingError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, EmbeddingError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, EmbeddingError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

fn decode(bytes: &[u8]) -> Result<(Vec<String>, usize, Vec<f32>, u64), EmbeddingError> {
    if bytes.len() < MAGIC.len() {
        return Err(EmbeddingError::Truncated);
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err(EmbeddingError::BadMagic);
    }
    if bytes.len() < MAGIC.len() + 4 + 8 + 8 {
        return Err(EmbeddingError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let mut r = Reader {
        buf: body,
        pos: MAGIC.len(),
    };
    let dim = r.u32()? as usize;
    let n = r.u64()?;
    if dim == 0 {
        return Err(EmbeddingError::Corrupt("zero dim".into()));
    }
    // each entry needs at least 2 + 4 * dim bytes
    let min_entry = 2 + 4 * dim as u64;
    if n.saturating_mul(min_entry) > body.len() as u64 {
        return Err(EmbeddingError::Truncated);
    }
    let n = n as usize;
    let mut words = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let len = r.u16()? as usize;
        let w = std::str::from_utf8(r.take(len)?)
            .map_err(|_| EmbeddingError::Corrupt("word is not UTF-8".into()))?;
        words.push(w.to_string());
        for c in r.take(4 * dim)?.chunks_exact(4) {
            vectors.push(f32::from_le_bytes(c.try_into().unwrap()));
        }
    }
    if r.pos != body.len() {
        // a body longer than declared points at truncation of the tail or a bad count
        return Err(EmbeddingError::Corrupt(format!(
            "{} unexpected trailing bytes",
            body.len() - r.pos
        )));
    }
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = fingerprint(body);
    if stored != computed {
        return Err(EmbeddingError::ChecksumMismatch { stored, computed });
    }
    let mut seen = std::collections::HashSet::with_capacity(n);
    for w in &words {
        if !seen.insert(w.as_str()) {
            return Err(EmbeddingError::Corrupt(format!("duplicate word {w:?}")));
        }
    }
    Ok((words, dim, vectors, stored))
}

/// Cosine similarity, `0` when either vector has zero norm.
pub fn cosine<A, B>(a: &[A], b: &[B]) -> f64
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    debug_assert_eq!(a.len(), b.len());
    let (mut dot, mut na, mut nb) = (0.0f64, 0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (x.into(), y.into());
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// One skip-gram step for a center word against its context (label `true`)
/// and sampled negatives (label `false`).
///
/// Output rows are updated in place as they are visited; the input row
/// receives the accumulated gradient once all outputs are done, so every
/// output sees the pre-step input. `scratch` must have the input's length.
/// Returns the summed negative log-likelihood before the update.
pub fn sgns_step<F: Float>(
    input: &mut [F],
    outputs: &mut [Vec<F>],
    labels: &[bool],
    lr: F,
    scratch: &mut [F],
) -> F {
    debug_assert_eq!(outputs.len(), labels.len());
    scratch.iter_mut().for_each(|g| *g = F::zero());
    let mut loss = F::zero();
    for (out, &label) in outputs.iter_mut().zip(labels) {
        let dot = input
            .iter()
            .zip(out.iter())
            .fold(F::zero(), |acc, (&a, &b)| acc + a * b);
        let p = sigmoid(dot);
        let target = if label { F::one() } else { F::zero() };
        loss = loss - if label { p.ln() } else { (F::one() - p).ln() };
        let g = (target - p) * lr;
        for ((s, o), &i) in scratch.iter_mut().zip(out.iter_mut()).zip(input.iter()) {
            *s = *s + g * *o;
            *o = *o + g * i;
        }
    }
    for (i, &s) in input.iter_mut().zip(scratch.iter()) {
        *i = *i + s;
    }
    loss
}

/// The seeded starting point of the input matrix.
pub fn initial_vectors(vocab_size: usize, dim: usize, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..vocab_size * dim)
        .map(|_| (rng.random::<f32>() - 0.5) / dim as f32)
        .collect()
}

struct SharedMatrix {
    cells: Vec<AtomicU32>,
    dim: usize,
}

impl SharedMatrix {
    fn from_values(values: Vec<f32>, dim: usize) -> Self {
        Self {
            cells: values.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect(),
            dim,
        }
    }

    fn read(&self, row: u32, into: &mut [f32]) {
        let start = row as usize * self.dim;
        for (dst, cell) in into.iter_mut().zip(&self.cells[start..start + self.dim]) {
            *dst = f32::from_bits(cell.load(Ordering::Relaxed));
        }
    }

    fn write(&self, row: u32, from: &[f32]) {
        let start = row as usize * self.dim;
        for (src, cell) in from.iter().zip(&self.cells[start..start + self.dim]) {
            cell.store(src.to_bits(), Ordering::Relaxed);
        }
    }

    fn into_values(self) -> Vec<f32> {
        self.cells
            .into_iter()
            .map(|c| f32::from_bits(c.into_inner()))
            .collect()
    }
}

fn negative_table(vocab: &Vocabulary) -> Vec<u32> {
    let weights: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| (c as f64).powf(UNIGRAM_POWER))
        .collect();
    let total: f64 = weights.iter().sum();
    let size = NEGATIVE_TABLE_SIZE.max(vocab.len());
    let mut table = Vec::with_capacity(size);
    let mut word = 0usize;
    let mut cum = weights[0] / total;
    for i in 0..size {
        table.push(word as u32);
        if (i + 1) as f64 / size as f64 > cum && word + 1 < weights.len() {
            word += 1;
            cum += weights[word] / total;
        }
    }
    table
}

fn corpus_fingerprint<T: AsRef<[String]>>(corpus: &[T]) -> u64 {
    let mut buf = Vec::new();
    for seq in corpus {
        for t in seq.as_ref() {
            buf.extend_from_slice(t.as_bytes());
            buf.push(b' ');
        }
        buf.push(b'\n');
    }
    fingerprint(&buf)
}

struct TrainState<'a> {
    cfg: &'a TrainConfig,
    input: SharedMatrix,
    output: SharedMatrix,
    table: Vec<u32>,
    keep_prob: Vec<f64>,
    total_work: f64,
    processed: AtomicU64,
    failed: AtomicBool,
}

impl TrainState<'_> {
    fn run_shard(&self, sentences: &[Vec<u32>], rng: &mut ChaCha8Rng) {
        let dim = self.cfg.dim;
        let k = self.cfg.negative_samples;
        let lr0 = self.cfg.initial_learning_rate;
        let mut center_buf = vec![0f32; dim];
        let mut scratch = vec![0f32; dim];
        let mut outs: Vec<Vec<f32>> = vec![vec![0f32; dim]; k + 1];
        let mut ids: Vec<u32> = Vec::with_capacity(k + 1);
        let mut labels: Vec<bool> = Vec::with_capacity(k + 1);
        let mut kept: Vec<u32> = Vec::new();

        for sentence in sentences {
            if self.failed.load(Ordering::Relaxed) {
                return;
            }
            let done = self
                .processed
                .fetch_add(sentence.len() as u64, Ordering::Relaxed) as f64;
            let lr = (lr0 * (1.0 - done / (self.total_work + 1.0)) as f32).max(lr0 * 1e-4);

            kept.clear();
            for &w in sentence {
                let p = self.keep_prob[w as usize];
                if p >= 1.0 || rng.random::<f64>() < p {
                    kept.push(w);
                }
            }

            for (pos, &center) in kept.iter().enumerate() {
                let reach = self.cfg.window - rng.random_range(0..self.cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(kept.len() - 1);
                for (cpos, &context) in kept.iter().enumerate().take(hi + 1).skip(lo) {
                    if cpos == pos {
                        continue;
                    }
                    ids.clear();
                    labels.clear();
                    ids.push(context);
                    labels.push(true);
                    for _ in 0..k {
                        let neg = self.table[rng.random_range(0..self.table.len())];
                        if neg != context {
                            ids.push(neg);
                            labels.push(false);
                        }
                    }
                    self.input.read(center, &mut center_buf);
                    for (buf, &id) in outs.iter_mut().zip(&ids) {
                        self.output.read(id, buf);
                    }
                    let n = ids.len();
                    sgns_step(
                        &mut center_buf,
                        &mut outs[..n],
                        &labels,
                        lr,
                        &mut scratch,
                    );
                    if center_buf.iter().any(|v| !v.is_finite()) {
                        self.failed.store(true, Ordering::Relaxed);
                        return;
                    }
                    for (buf, &id) in outs.iter().zip(&ids) {
                        self.output.write(id, buf);
                    }
                    self.input.write(center, &center_buf);
                }
            }
        }
    }
}

/// Builds the vocabulary and trains skip-gram vectors over `corpus`.
pub fn train<T: AsRef<[String]> + Sync>(
    corpus: &[T],
    cfg: &TrainConfig,
) -> Result<EmbeddingModel, EmbeddingError> {
    cfg.validate()?;
    let vocab = build_vocab(corpus.iter().map(|s| s.as_ref()), cfg.min_count)?;
    let corpus_hash = corpus_fingerprint(corpus);

    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|s| {
            s.as_ref()
                .iter()
                .filter_map(|t| vocab.index_of(t))
                .collect::<Vec<u32>>()
        })
        .filter(|s| s.len() > 1)
        .collect();

    let total = vocab.total_tokens() as f64;
    let thresh = cfg.subsample_threshold * total;
    let keep_prob = vocab
        .counts()
        .iter()
        .map(|&c| {
            let c = c as f64;
            ((c / thresh).sqrt() + 1.0) * thresh / c
        })
        .collect();

    let work: u64 = sentences.iter().map(|s| s.len() as u64).sum();
    let state = TrainState {
        cfg,
        input: SharedMatrix::from_values(initial_vectors(vocab.len(), cfg.dim, cfg.seed), cfg.dim),
        output: SharedMatrix::from_values(vec![0.0; vocab.len() * cfg.dim], cfg.dim),
        table: negative_table(&vocab),
        keep_prob,
        total_work: (work * cfg.epochs as u64) as f64,
        processed: AtomicU64::new(0),
        failed: AtomicBool::new(false),
    };

    let workers = cfg.workers.min(sentences.len().max(1));
    let chunk = sentences.len().div_ceil(workers).max(1);
    for epoch in 0..cfg.epochs {
        if workers == 1 {
            let mut rng = shard_rng(cfg.seed, epoch, 0);
            state.run_shard(&sentences, &mut rng);
        } else {
            std::thread::scope(|s| {
                for (w, shard) in sentences.chunks(chunk).enumerate() {
                    let state = &state;
                    s.spawn(move || {
                        let mut rng = shard_rng(cfg.seed, epoch, w);
                        state.run_shard(shard, &mut rng);
                    });
                }
            });
        }
        if state.failed.load(Ordering::Relaxed) {
            return Err(EmbeddingError::NonFiniteUpdate);
        }
    }

    let vectors = state.input.into_values();
    EmbeddingModel::new(
        vocab,
        cfg.dim,
        vectors,
        ModelMetadata {
            config: Some(cfg.clone()),
            corpus_hash: Some(corpus_hash),
        },
    )
}

fn shard_rng(seed: u64, epoch: usize, worker: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((epoch as u64) << 32) | (worker as u64 + 1));
    rng
}
