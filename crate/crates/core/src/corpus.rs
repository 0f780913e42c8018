//! Parallel corpora: loading aligned line files, length filtering, seeded
//! train/validation splits, and per-domain statistics.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unicode_normalization::UnicodeNormalization;

use crate::text::Tokenizer;

/// Domain label used for pairs loaded without one.
pub const DEFAULT_DOMAIN: &str = "all";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line count mismatch: {source_path} has {source_lines} lines, {target_path} has {target_lines}")]
    LineCountMismatch {
        source_path: PathBuf,
        target_path: PathBuf,
        source_lines: usize,
        target_lines: usize,
    },
    #[error("cannot access {path}: {err}")]
    IoFailure { path: PathBuf, err: std::io::Error },
    #[error("{path} is not valid UTF-8 (byte offset {offset})")]
    EncodingFailure { path: PathBuf, offset: usize },
    #[error("cannot split an empty corpus")]
    EmptyCorpus,
    #[error("invalid train fraction {0}; expected a value strictly between 0 and 1")]
    InvalidFraction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SentencePair {
    /// NFC-normalized source sentence.
    pub source: String,
    pub target: String,
    pub domain: Option<String>,
}

impl SentencePair {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self {
            source: source.into(),
            target: target.into(),
            domain: None,
        }
    }

    pub fn with_domain(mut self, domain: impl Into<String>) -> Self {
        self.domain = Some(domain.into());
        self
    }

    fn domain_label(&self) -> &str {
        self.domain.as_deref().unwrap_or(DEFAULT_DOMAIN)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    pub provenance: Vec<PathBuf>,
}

impl ParallelCorpus {
    /// Builds a corpus, dropping pairs with a blank side.
    pub fn from_pairs(pairs: impl IntoIterator<Item = SentencePair>) -> Self {
        Self {
            pairs: pairs
                .into_iter()
                .filter(|p| !p.source.trim().is_empty() && !p.target.trim().is_empty())
                .collect(),
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Appends another corpus, keeping order.
    pub fn extend(&mut self, other: ParallelCorpus) {
        self.pairs.extend(other.pairs);
        self.provenance.extend(other.provenance);
    }
}

/// A loaded corpus together with the number of blank-sided pairs dropped.
#[derive(Debug, Clone)]
pub struct LoadedBitext {
    pub corpus: ParallelCorpus,
    pub dropped: usize,
}

/// Reads a UTF-8 file as NFC-normalized lines.
pub fn read_lines(path: &Path) -> Result<Vec<String>, CorpusError> {
    let bytes = fs::read(path).map_err(|err| CorpusError::IoFailure {
        path: path.to_path_buf(),
        err,
    })?;
    let text = String::from_utf8(bytes).map_err(|e| CorpusError::EncodingFailure {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })?;
    Ok(split_lines(&text).map(|l| l.nfc().collect()).collect())
}

/// LF-separated lines; a single trailing newline does not start a new line.
pub(crate) fn split_lines(text: &str) -> impl Iterator<Item = &str> {
    let body = text.strip_suffix('\n').unwrap_or(text);
    let empty = text.is_empty();
    body.split('\n').filter(move |_| !empty)
}

/// Loads a sentence-aligned bitext: line `i` of `source_path` translates
/// line `i` of `target_path`.
pub fn load_bitext(
    source_path: &Path,
    target_path: &Path,
    domain: Option<&str>,
) -> Result<LoadedBitext, CorpusError> {
    let src = read_lines(source_path)?;
    let tgt = read_lines(target_path)?;
    if src.len() != tgt.len() {
        return Err(CorpusError::LineCountMismatch {
            source_path: source_path.to_path_buf(),
            target_path: target_path.to_path_buf(),
            source_lines: src.len(),
            target_lines: tgt.len(),
        });
    }
    let total = src.len();
    let mut corpus = ParallelCorpus::from_pairs(src.into_iter().zip(tgt).map(|(s, t)| SentencePair {
        source: s,
        target: t,
        domain: domain.map(str::to_string),
    }));
    corpus.provenance = vec![source_path.to_path_buf(), target_path.to_path_buf()];
    let dropped = total - corpus.len();
    if dropped > 0 {
        log::info!(
            "dropped {dropped} of {total} pairs with a blank side from {}",
            source_path.display()
        );
    }
    Ok(LoadedBitext { corpus, dropped })
}

/// Writes the corpus as two aligned line files, LF-terminated.
pub fn save_bitext(
    corpus: &ParallelCorpus,
    source_path: &Path,
    target_path: &Path,
) -> Result<(), CorpusError> {
    let write = |path: &Path, side: fn(&SentencePair) -> &str| {
        let mut out = String::new();
        for pair in &corpus.pairs {
            out.push_str(side(pair));
            out.push('\n');
        }
        fs::write(path, out).map_err(|err| CorpusError::IoFailure {
            path: path.to_path_buf(),
            err,
        })
    };
    write(source_path, |p| &p.source)?;
    write(target_path, |p| &p.target)
}

/// Keeps the pairs whose sides both have at most `max_len` tokens.
pub fn filter_by_length(
    corpus: &ParallelCorpus,
    max_len: usize,
    tokenizer: &Tokenizer,
) -> ParallelCorpus {
    ParallelCorpus {
        pairs: corpus
            .pairs
            .iter()
            .filter(|p| tokenizer.count(&p.source) <= max_len && tokenizer.count(&p.target) <= max_len)
            .cloned()
            .collect(),
        provenance: corpus.provenance.clone(),
    }
}

/// A train fraction kept as an exact rational so the cut point is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainFraction(Ratio<u64>);

impl TrainFraction {
    pub fn new(numer: u64, denom: u64) -> Result<Self, CorpusError> {
        if denom == 0 || numer == 0 || numer >= denom {
            return Err(CorpusError::InvalidFraction(format!("{numer}/{denom}")));
        }
        Ok(Self(Ratio::new(numer, denom)))
    }

    pub fn half() -> Self {
        Self(Ratio::new(1, 2))
    }

    /// `ceil(n * fraction)`.
    pub fn train_count(&self, n: usize) -> usize {
        let n = n as u128;
        let (p, q) = (*self.0.numer() as u128, *self.0.denom() as u128);
        (n * p).div_ceil(q) as usize
    }
}

impl Default for TrainFraction {
    fn default() -> Self {
        Self::half()
    }
}

impl fmt::Display for TrainFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.0.numer(), self.0.denom())
    }
}

impl FromStr for TrainFraction {
    type Err = CorpusError;

    /// Accepts `p/q` or a plain decimal such as `0.5`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CorpusError::InvalidFraction(s.to_string());
        let s = s.trim();
        if let Some((p, q)) = s.split_once('/') {
            let p = p.trim().parse().map_err(|_| bad())?;
            let q = q.trim().parse().map_err(|_| bad())?;
            return Self::new(p, q).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let denom = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let numer = int
            .checked_mul(denom)
            .and_then(|v| v.checked_add(frac_v))
            .ok_or_else(bad)?;
        Self::new(numer, denom).map_err(|_| bad())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SplitSpec {
    pub seed: u64,
    pub train_fraction: TrainFraction,
}

/// Seeded shuffle, then the first `ceil(n * fraction)` pairs go to training
/// and the rest to validation.
pub fn split_train_valid(
    corpus: &ParallelCorpus,
    spec: &SplitSpec,
) -> Result<(ParallelCorpus, ParallelCorpus), CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let cut = spec.train_fraction.train_count(corpus.len());
    let take = |idx: &[usize]| ParallelCorpus {
        pairs: idx.iter().map(|&i| corpus.pairs[i].clone()).collect(),
        provenance: corpus.provenance.clone(),
    };
    Ok((take(&order[..cut]), take(&order[cut..])))
}

/// One row of the statistics table: a language side within a domain.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub domain: String,
    pub language: String,
    pub tokens: usize,
    pub average_length: f64,
    pub vocabulary: usize,
    pub sentences: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
}

pub const STATS_HEADER: [&str; 6] = [
    "domain",
    "language",
    "tokens",
    "average_length",
    "vocabulary",
    "sentences",
];

impl CorpusStats {
    pub fn row(&self, domain: &str, language: &str) -> Option<&StatsRow> {
        self.rows
            .iter()
            .find(|r| r.domain == domain && r.language == language)
    }

    /// Tab-separated table with a header line; average length to 4 decimals.
    pub fn to_tsv(&self) -> String {
        let mut out = STATS_HEADER.join("\t");
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.4}\t{}\t{}",
                r.domain, r.language, r.tokens, r.average_length, r.vocabulary, r.sentences
            );
        }
        out
    }
}

fn side_row<'a>(
    domain: &str,
    language: &str,
    sentences: impl Iterator<Item = &'a str>,
    tokenizer: &Tokenizer,
) -> StatsRow {
    let mut vocab: HashSet<String> = HashSet::new();
    let mut tokens = 0;
    let mut count = 0;
    for s in sentences {
        let toks = tokenizer.tokenize(s);
        tokens += toks.len();
        count += 1;
        vocab.extend(toks);
    }
    StatsRow {
        domain: domain.to_string(),
        language: language.to_string(),
        tokens,
        average_length: if count == 0 { 0.0 } else { tokens as f64 / count as f64 },
        vocabulary: vocab.len(),
        sentences: count,
    }
}

/// Per-domain, per-side token/vocabulary/sentence counts. Domains appear in
/// order of first occurrence; an empty corpus yields zero rows for
/// [`DEFAULT_DOMAIN`].
pub fn compute_stats(
    corpus: &ParallelCorpus,
    languages: (&str, &str),
    tokenizer: &Tokenizer,
) -> CorpusStats {
    let mut domains: Vec<&str> = Vec::new();
    for p in &corpus.pairs {
        if !domains.contains(&p.domain_label()) {
            domains.push(p.domain_label());
        }
    }
    if domains.is_empty() {
        domains.push(DEFAULT_DOMAIN);
    }
    let mut rows = Vec::with_capacity(domains.len() * 2);
    for domain in domains {
        let in_domain = || corpus.pairs.iter().filter(move |p| p.domain_label() == domain);
        rows.push(side_row(domain, languages.0, in_domain().map(|p| p.source.as_str()), tokenizer));
        rows.push(side_row(domain, languages.1, in_domain().map(|p| p.target.as_str()), tokenizer));
    }
    CorpusStats { rows }
}
